//! Backward Euler time stepping with Newton iterations on the assembled system.

mod linear;
mod newton;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ad::{AdError, EquationSystem};
use crate::physics::PhysicsError;

pub use linear::{solve_sparse, SINGULARITY_THRESHOLD};
pub use newton::{assemble, newton_solve, newton_step, time_loop};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("system is not square: {rows} equations for {cols} unknowns")]
    NonSquareSystem { rows: usize, cols: usize },
    #[error("non-finite residual in equation {equation}")]
    NumericalBreakdown { equation: String },
    #[error("singular matrix: {detail}")]
    SingularMatrix { detail: String },
    #[error("Newton diverged at iteration {iteration} (residual {residual:.3e})")]
    Diverged { iteration: usize, residual: f64 },
    #[error("Newton did not converge in {iterations} iterations (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("time step ending at {time} s failed after {retries} retries: {cause}")]
    StepFailure { time: f64, retries: usize, cause: Box<SolverError> },
    #[error(transparent)]
    Ad(#[from] AdError),
    #[error(transparent)]
    Physics(#[from] PhysicsError),
    #[error("{0}")]
    Callback(String),
}

/// A problem the solver can drive: an equation system plus hooks for time-dependent
/// data and lagged coefficients.
pub trait Model {
    fn system(&self) -> &EquationSystem;
    fn system_mut(&mut self) -> &mut EquationSystem;
    /// Called once per attempted step with the step end time and size.
    fn before_step(&mut self, _time: f64, _dt: f64) -> Result<(), SolverError> {
        Ok(())
    }
    /// Called before each residual assembly to refresh lagged quantities.
    fn before_iteration(&mut self) -> Result<(), SolverError> {
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    /// Uniform step size; ignored when `schedule_s` is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_s: Option<f64>,
    /// Explicit step end times, strictly increasing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule_s: Option<Vec<f64>>,
    pub t_end_s: f64,
    #[serde(default = "defaults::newton_tol")]
    pub newton_tol: f64,
    #[serde(default = "defaults::newton_abs_tol")]
    pub newton_abs_tol: f64,
    #[serde(default = "defaults::max_newton_iters")]
    pub max_newton_iters: usize,
    #[serde(default = "defaults::divergence_factor")]
    pub divergence_factor: f64,
    #[serde(default = "defaults::max_dt_halvings")]
    pub max_dt_halvings: usize,
}

mod defaults {
    pub fn newton_tol() -> f64 {
        1e-10
    }
    pub fn newton_abs_tol() -> f64 {
        1e-14
    }
    pub fn max_newton_iters() -> usize {
        15
    }
    pub fn divergence_factor() -> f64 {
        1e4
    }
    pub fn max_dt_halvings() -> usize {
        4
    }
}

impl SolverConfig {
    pub fn uniform(dt: f64, t_end: f64) -> Self {
        Self {
            dt_s: Some(dt),
            schedule_s: None,
            t_end_s: t_end,
            newton_tol: defaults::newton_tol(),
            newton_abs_tol: defaults::newton_abs_tol(),
            max_newton_iters: defaults::max_newton_iters(),
            divergence_factor: defaults::divergence_factor(),
            max_dt_halvings: defaults::max_dt_halvings(),
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: String| Err(SolverError::InvalidConfig(m));
        if !(self.newton_tol > 0.0) || !(self.newton_abs_tol > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if self.max_newton_iters == 0 {
            return bad("max_newton_iters must be at least 1".into());
        }
        if !(self.divergence_factor > 1.0) {
            return bad("divergence_factor must exceed 1".into());
        }
        if !(self.t_end_s > 0.0) {
            return bad(format!("t_end_s must be positive, got {}", self.t_end_s));
        }
        match (&self.schedule_s, self.dt_s) {
            (Some(s), _) => {
                if s.is_empty() || !(s[0] > 0.0) || s.windows(2).any(|w| !(w[1] > w[0])) {
                    return bad("schedule_s must be positive and strictly increasing".into());
                }
            }
            (None, Some(dt)) if !(dt > 0.0) => return bad(format!("dt_s must be positive, got {dt}")),
            (None, None) => return bad("either dt_s or schedule_s is required".into()),
            _ => {}
        }
        Ok(())
    }

    /// Step end times, starting after `t0`.
    pub fn step_times(&self, t0: f64) -> Vec<f64> {
        if let Some(s) = &self.schedule_s {
            return s.iter().copied().filter(|&t| t > t0).collect();
        }
        let dt = self.dt_s.unwrap_or(self.t_end_s);
        let n = ((self.t_end_s - t0) / dt - 1e-9).ceil().max(0.0) as usize;
        (1..=n).map(|k| if k == n { self.t_end_s } else { t0 + k as f64 * dt }).collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub time_s: f64,
    pub dt_s: f64,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub wall_time_s: f64,
    pub converged: bool,
    /// Number of dt halvings needed before this sub-step succeeded.
    pub retries: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub steps: Vec<StepReport>,
    pub failed: bool,
    pub failure: Option<String>,
}

impl SolveReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn total_iterations(&self) -> usize {
        self.steps.iter().map(|s| s.iterations).sum()
    }
}
