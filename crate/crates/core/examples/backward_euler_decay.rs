//! First-order convergence of backward Euler on y' = -y through the generic solver.

use fracflow::ad::{EquationSystem, GridRef, Operand, Operator};
use fracflow::mms::compute_ooc;
use fracflow::solver::{time_loop, Model, SolverConfig, SolverError};

struct Decay(EquationSystem);

impl Model for Decay {
    fn system(&self) -> &EquationSystem {
        &self.0
    }
    fn system_mut(&mut self) -> &mut EquationSystem {
        &mut self.0
    }
    fn before_step(&mut self, _time: f64, dt: f64) -> Result<(), SolverError> {
        self.0.set_parameter("inv_dt", Operand::Scalar(1.0 / dt));
        Ok(())
    }
}

fn solve(dt: f64) -> f64 {
    let mut sys = EquationSystem::with_counts(vec![1], vec![]);
    let y = sys.register_variable("y", &[GridRef::Subdomain(0)], 1).unwrap();
    sys.set_values(y, &[1.0]).unwrap();
    sys.shift_time();
    let yo = sys.var(y);
    sys.set_equation("decay", Operator::parameter("inv_dt") * (&yo - yo.previous_timestep()) + &yo);
    let mut m = Decay(sys);
    let (_, res) = time_loop(&mut m, &SolverConfig::uniform(dt, 1.0), 0.0, |_, _| Ok(()));
    res.unwrap();
    m.0.state()[0]
}

fn main() {
    let dts = [0.1, 0.05, 0.025, 0.0125];
    let errors: Vec<f64> = dts.iter().map(|&dt| (solve(dt) - (-1.0f64).exp()).abs()).collect();
    for (dt, e) in dts.iter().zip(&errors) {
        println!("dt {dt:<7} error {e:.4e}");
    }
    println!("order {:.3}", compute_ooc(&errors, &dts).unwrap());
}
