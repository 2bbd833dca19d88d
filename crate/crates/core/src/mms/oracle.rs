//! Finite-difference reconstruction of the mass sources from the exact pressures,
//! used to validate the closed forms.

use crate::geometry::Point;

use super::exact::ExactSolution;
use super::MmsError;

/// Divergence of `rho v` plus `phi d(rho)/dt` by nested central differences of `p`.
fn balance_fd(e: &ExactSolution, p: &dyn Fn(&Point, f64) -> f64, x: &Point, t: f64, h: f64, axes: &[usize]) -> f64 {
    let c = e.compressibility;
    let rho = |p: f64| (c * p).exp();
    let dt = (rho(p(x, t + h)) - rho(p(x, t - h))) / (2.0 * h);
    let shifted = |x: &Point, a: usize, s: f64| {
        let mut y = *x;
        y[a] += s;
        y
    };
    let mass_flux = |y: &Point, a: usize| {
        let v = -(p(&shifted(y, a, h), t) - p(&shifted(y, a, -h), t)) / (2.0 * h);
        rho(p(y, t)) * v
    };
    let div: f64 = axes
        .iter()
        .map(|&a| (mass_flux(&shifted(x, a, h), a) - mass_flux(&shifted(x, a, -h), a)) / (2.0 * h))
        .sum();
    e.porosity * dt + div
}

fn richardson(f: impl Fn(f64) -> f64, h: f64) -> f64 {
    (4.0 * f(h / 2.0) - f(h)) / 3.0
}

/// Matrix source estimate at `x`, which must lie at least `2 h` from region boundaries
/// and from the fracture plane.
pub fn matrix_source_oracle(e: &ExactSolution, x: &Point, t: f64, h: f64) -> Result<f64, MmsError> {
    e.region(x)?;
    let p = |y: &Point, s: f64| e.matrix_pressure(y, s).unwrap_or(f64::NAN);
    let axes: Vec<usize> = (0..e.ambient_dim).collect();
    Ok(richardson(|h| balance_fd(e, &p, x, t, h, &axes), h))
}

/// One-sided derivative of the matrix pressure normal to the fracture at `x`,
/// eliminating the leading `h^xi` error of the distance power and then `h^2`.
fn normal_derivative(e: &ExactSolution, x: &Point, t: f64, side: f64, h: f64) -> f64 {
    let at = |s: f64| e.matrix_pressure(&[x[0] + side * s, x[1], x[2]], t).unwrap_or(f64::NAN);
    let d = |h: f64| (-3.0 * at(0.0) + 4.0 * at(h) - at(2.0 * h)) / (2.0 * h);
    let q = 2.0_f64.powf(e.xi);
    let r = |h: f64| (q * d(h / 2.0) - d(h)) / (q - 1.0);
    (4.0 * r(h / 2.0) - r(h)) / 3.0
}

/// Fracture source estimate: tangential balance of the fracture pressure minus the
/// mass inflow from both matrix sides, each computed by differencing the matrix pressure.
pub fn fracture_source_oracle(e: &ExactSolution, x: &Point, t: f64, h: f64) -> Result<f64, MmsError> {
    e.fracture(x, t)?;
    let p = |y: &Point, s: f64| e.fracture(y, s).map(|f| f.pressure).unwrap_or(f64::NAN);
    let axes: Vec<usize> = (1..e.ambient_dim).collect();
    let tangential = richardson(|h| balance_fd(e, &p, x, t, h, &axes), h);
    let rho_trace = (e.compressibility * e.matrix_pressure(x, t)?).exp();
    // Inflow from each side is minus the outward normal flux of the matrix, rho grad(p) . n_outward.
    let inflow: f64 = [1.0, -1.0].iter().map(|&side| rho_trace * normal_derivative(e, x, t, side, h)).sum();
    Ok(tangential - inflow)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_at_t0_is_time_derivative_only() {
        let e = ExactSolution::new(3);
        let x = [0.2, 0.4, 0.6];
        let (p, _, _) = e.matrix_profile(&x).unwrap();
        let got = matrix_source_oracle(&e, &x, 0.0, 1e-3).unwrap();
        let want = e.porosity * e.compressibility * p;
        assert!((got - want).abs() < 1e-9 * want.abs(), "{got} vs {want}");
        assert!((e.matrix(&x, 0.0).unwrap().source - want).abs() < 1e-15);
    }

    #[test]
    fn closed_form_matches_in_central_and_corner_regions() {
        let e = ExactSolution::new(3);
        for x in [[0.3, 0.5, 0.4], [0.8, 0.1, 0.1], [0.1, 0.9, 0.6]] {
            let want = e.matrix(&x, 0.5).unwrap().source;
            let got = matrix_source_oracle(&e, &x, 0.5, 1e-3).unwrap();
            assert!((got - want).abs() <= 1e-6 * want.abs(), "{x:?}: {got} vs {want}");
        }
        let x = [0.5, 0.4, 0.55];
        let want = e.fracture(&x, 0.9).unwrap().source;
        let got = fracture_source_oracle(&e, &x, 0.9, 1e-3).unwrap();
        assert!((got - want).abs() <= 1e-6 * want.abs(), "{got} vs {want}");
    }
}
