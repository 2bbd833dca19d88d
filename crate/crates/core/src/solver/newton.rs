use std::time::Instant;

use crate::ad::{EquationSystem, LinearSystem};

use super::linear::solve_sparse;
use super::{Model, SolveReport, SolverConfig, SolverError, StepReport};

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Assembles the stacked residual and Jacobian, rejecting non-square systems and
/// non-finite residual entries.
pub fn assemble(sys: &EquationSystem) -> Result<LinearSystem, SolverError> {
    let ls = sys.assemble()?;
    if ls.jacobian.nrows() != ls.jacobian.ncols() {
        return Err(SolverError::NonSquareSystem { rows: ls.jacobian.nrows(), cols: ls.jacobian.ncols() });
    }
    for (name, start, len) in &ls.blocks {
        if ls.residual[*start..start + len].iter().any(|v| !v.is_finite()) {
            return Err(SolverError::NumericalBreakdown { equation: name.clone() });
        }
    }
    if !ls.jacobian.is_finite() {
        let row = (0..ls.jacobian.nrows()).find(|&i| ls.jacobian.row(i).1.iter().any(|v| !v.is_finite())).unwrap_or(0);
        let name = ls.blocks.iter().find(|(_, s, l)| row >= *s && row < s + l).map(|b| b.0.clone()).unwrap_or_default();
        return Err(SolverError::NumericalBreakdown { equation: name });
    }
    Ok(ls)
}

/// Solves `J dx = -r`, applies the full update and refreshes lagged quantities.
/// Returns the max-norm of the update.
pub fn newton_step<M: Model>(model: &mut M, ls: &LinearSystem) -> Result<f64, SolverError> {
    let rhs: Vec<f64> = ls.residual.iter().map(|r| -r).collect();
    let dx = solve_sparse(&ls.jacobian, &rhs)?;
    model.system_mut().update_state(&dx);
    model.before_iteration()?;
    Ok(dx.iter().fold(0.0_f64, |m, v| m.max(v.abs())))
}

/// Newton iterations for one time step. At least one update is applied; the
/// iteration count is the number of updates.
pub fn newton_solve<M: Model>(model: &mut M, config: &SolverConfig) -> Result<StepReport, SolverError> {
    let start = Instant::now();
    model.before_iteration()?;
    let mut ls = assemble(model.system())?;
    let r0 = norm2(&ls.residual);
    let tol = config.newton_tol * r0 + config.newton_abs_tol;
    let mut history = vec![r0];
    for k in 1..=config.max_newton_iters {
        newton_step(model, &ls)?;
        ls = assemble(model.system())?;
        let r = norm2(&ls.residual);
        history.push(r);
        if r <= tol {
            return Ok(StepReport {
                iterations: k,
                residual_history: history,
                wall_time_s: start.elapsed().as_secs_f64(),
                converged: true,
                ..Default::default()
            });
        }
        if r > config.divergence_factor * r0.max(config.newton_abs_tol) {
            return Err(SolverError::Diverged { iteration: k, residual: r });
        }
    }
    Err(SolverError::NotConverged { iterations: config.max_newton_iters, residual: *history.last().unwrap() })
}

/// Backward Euler stepping from `t0` over the configured schedule. Failed steps are
/// retried with halved dt up to `max_dt_halvings` times. `on_step` is called after
/// every accepted (sub-)step, before the state is shifted to the previous-timestep slot.
/// Returns the report and the terminating error, if any.
pub fn time_loop<M: Model>(
    model: &mut M,
    config: &SolverConfig,
    t0: f64,
    mut on_step: impl FnMut(&M, &StepReport) -> Result<(), SolverError>,
) -> (SolveReport, Result<(), SolverError>) {
    let mut report = SolveReport::default();
    if let Err(e) = config.validate() {
        report.failed = true;
        report.failure = Some(e.to_string());
        return (report, Err(e));
    }
    let mut t = t0;
    for target in config.step_times(t0) {
        let mut dt = target - t;
        let mut halvings = 0;
        while t < target {
            let dt_try = dt.min(target - t);
            let t_new = if dt_try >= target - t { target } else { t + dt_try };
            let attempt = model.before_step(t_new, dt_try).and_then(|_| newton_solve(model, config));
            match attempt {
                Ok(mut step) => {
                    step.time_s = t_new;
                    step.dt_s = dt_try;
                    step.retries = halvings;
                    t = t_new;
                    if let Err(e) = on_step(model, &step) {
                        report.steps.push(step);
                        report.failed = true;
                        report.failure = Some(e.to_string());
                        return (report, Err(e));
                    }
                    model.system_mut().shift_time();
                    report.steps.push(step);
                }
                Err(cause) => {
                    model.system_mut().reset_to_previous_timestep();
                    if halvings >= config.max_dt_halvings {
                        let e = SolverError::StepFailure { time: t_new, retries: halvings, cause: Box::new(cause) };
                        report.failed = true;
                        report.failure = Some(e.to_string());
                        return (report, Err(e));
                    }
                    halvings += 1;
                    dt = dt_try / 2.0;
                }
            }
        }
    }
    (report, Ok(()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ad::{GridRef, Operand, Operator};

    /// Single-cell decay `(y - y_prev)/dt + k y = 0`.
    struct Decay {
        sys: EquationSystem,
    }

    impl Decay {
        fn new(k: f64, nonlinear: bool) -> Self {
            let mut sys = EquationSystem::with_counts(vec![1], vec![]);
            let y = sys.register_variable("y", &[GridRef::Subdomain(0)], 1).unwrap();
            sys.set_values(y, &[1.0]).unwrap();
            sys.shift_time();
            let yo = sys.var(y);
            let decay = if nonlinear { k * yo.exp() - k } else { k * &yo };
            let eq = Operator::parameter("inv_dt") * (&yo - yo.previous_timestep()) + decay;
            sys.set_equation("decay", eq);
            Self { sys }
        }
    }

    impl Model for Decay {
        fn system(&self) -> &EquationSystem {
            &self.sys
        }
        fn system_mut(&mut self) -> &mut EquationSystem {
            &mut self.sys
        }
        fn before_step(&mut self, _time: f64, dt: f64) -> Result<(), SolverError> {
            self.sys.set_parameter("inv_dt", Operand::Scalar(1.0 / dt));
            Ok(())
        }
    }

    #[test]
    fn linear_problem_one_iteration_and_exact_backward_euler() {
        let mut m = Decay::new(1.0, false);
        let cfg = SolverConfig::uniform(0.1, 1.0);
        let (report, res) = time_loop(&mut m, &cfg, 0.0, |_, _| Ok(()));
        res.unwrap();
        assert_eq!(report.steps.len(), 10);
        assert!(report.steps.iter().all(|s| s.iterations == 1));
        let y = m.sys.state()[0];
        assert!((y - 1.1_f64.powi(-10)).abs() < 1e-14);
    }

    #[test]
    fn nonlinear_quadratic_convergence() {
        let mut m = Decay::new(5.0, true);
        m.before_step(0.5, 0.5).unwrap();
        let step = newton_solve(&mut m, &SolverConfig::uniform(0.5, 0.5)).unwrap();
        let h = &step.residual_history;
        assert!(step.iterations >= 3, "{h:?}");
        let n = h.len();
        // e_{k+1} ~ C e_k^2 on the last non-trivial pair.
        let rate = (h[n - 2] / h[0]).ln() / (h[n - 3] / h[0]).ln();
        assert!(rate > 1.7, "{h:?}");
    }

    #[test]
    fn nan_names_equation() {
        let mut sys = EquationSystem::with_counts(vec![1], vec![]);
        let y = sys.register_variable("y", &[GridRef::Subdomain(0)], 1).unwrap();
        sys.set_values(y, &[-1.0]).unwrap();
        sys.set_equation("root", sys.var(y).powf(0.5) + sys.var(y) * 0.0);
        let err = assemble(&sys).unwrap_err();
        assert!(
            matches!(&err, SolverError::NumericalBreakdown { equation } if equation == "root")
                || matches!(&err, SolverError::Ad(_)),
            "{err:?}"
        );
    }

    #[test]
    fn failing_steps_report_step_failure() {
        struct Never(EquationSystem);
        impl Model for Never {
            fn system(&self) -> &EquationSystem {
                &self.0
            }
            fn system_mut(&mut self) -> &mut EquationSystem {
                &mut self.0
            }
        }
        let mut sys = EquationSystem::with_counts(vec![1], vec![]);
        let y = sys.register_variable("y", &[GridRef::Subdomain(0)], 1).unwrap();
        // y^2 + 1 = 0 has no real root.
        sys.set_equation("no_root", &sys.var(y) * &sys.var(y) + 1.0);
        sys.set_values(y, &[0.5]).unwrap();
        sys.shift_time();
        let mut m = Never(sys);
        let (report, res) = time_loop(&mut m, &SolverConfig::uniform(1.0, 1.0), 0.0, |_, _| Ok(()));
        assert!(matches!(res, Err(SolverError::StepFailure { retries: 4, .. })));
        assert!(report.failed);
    }

    #[test]
    fn step_times_cover_end() {
        let cfg = SolverConfig::uniform(0.3, 1.0);
        assert_eq!(cfg.step_times(0.0).len(), 4);
        assert_eq!(*cfg.step_times(0.0).last().unwrap(), 1.0);
        let mut bad = cfg.clone();
        bad.dt_s = Some(-1.0);
        assert!(bad.validate().is_err());
    }
}
