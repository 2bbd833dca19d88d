use crate::geometry::Point;

use super::MmsError;

const LO: f64 = 0.25;
const HI: f64 = 0.75;
const FRACTURE_X: f64 = 0.5;

/// Piecewise manufactured solution on the unit square or cube with a single fracture
/// at `x = 0.5`, `0.25 <= y, z <= 0.75`. Pressures are linear in time, `p = t P(x)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExactSolution {
    pub ambient_dim: usize,
    /// Regularity exponent of the distance-based matrix pressure.
    pub xi: f64,
    pub compressibility: f64,
    pub porosity: f64,
}

/// Exact fields at one point: pressure, Darcy velocity and mass source.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointFields {
    pub pressure: f64,
    pub velocity: Point,
    pub source: f64,
}

fn band(s: f64) -> usize {
    if s < LO {
        0
    } else if s < HI {
        1
    } else {
        2
    }
}

fn anchor(b: usize) -> f64 {
    if b == 0 {
        LO
    } else {
        HI
    }
}

/// `(s - 0.25)^2 (s - 0.75)^2` and its first two derivatives.
fn quartic(s: f64) -> (f64, f64, f64) {
    let (a, b) = (s - LO, s - HI);
    let f = a * a * b * b;
    let d1 = 2.0 * a * b * (a + b);
    let d2 = 2.0 * (b * b + 4.0 * a * b + a * a);
    (f, d1, d2)
}

impl ExactSolution {
    pub fn new(ambient_dim: usize) -> Self {
        Self { ambient_dim, xi: 1.5, compressibility: 0.2, porosity: 0.1 }
    }

    fn check(&self, x: &Point) -> Result<(), MmsError> {
        let inside = (0..self.ambient_dim).all(|a| (0.0..=1.0).contains(&x[a]));
        if inside && (self.ambient_dim == 2 || self.ambient_dim == 3) {
            Ok(())
        } else {
            Err(MmsError::OutsideDomain(*x))
        }
    }

    /// Matrix region index, 1-based, row-major over the (y, z) bands; 1..=9 in 3D, 1..=3 in 2D.
    pub fn region(&self, x: &Point) -> Result<usize, MmsError> {
        self.check(x)?;
        Ok(if self.ambient_dim == 3 { 3 * band(x[1]) + band(x[2]) + 1 } else { band(x[1]) + 1 })
    }

    fn is_central(&self, x: &Point) -> bool {
        (1..self.ambient_dim).all(|a| band(x[a]) == 1)
    }

    /// Offset from the nearest fracture point, restricted to the active components.
    fn offset(&self, x: &Point) -> (Point, usize) {
        let mut r = [x[0] - FRACTURE_X, 0.0, 0.0];
        let mut k = 1;
        for a in 1..self.ambient_dim {
            let b = band(x[a]);
            if b != 1 {
                r[a] = x[a] - anchor(b);
                k += 1;
            }
        }
        (r, k)
    }

    pub fn distance(&self, x: &Point) -> Result<f64, MmsError> {
        self.check(x)?;
        let (r, _) = self.offset(x);
        Ok((r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt())
    }

    /// Bubble function on the fracture plane and its tangential gradient and Laplacian.
    pub fn bubble(&self, x: &Point) -> (f64, Point, f64) {
        let (fy, dy, ddy) = quartic(x[1]);
        if self.ambient_dim == 2 {
            return (100.0 * fy, [0.0, 100.0 * dy, 0.0], 100.0 * ddy);
        }
        let (fz, dz, ddz) = quartic(x[2]);
        (100.0 * fy * fz, [0.0, 100.0 * dy * fz, 100.0 * fy * dz], 100.0 * (ddy * fz + fy * ddz))
    }

    /// Time-independent factor `P`, its gradient and Laplacian in the matrix.
    pub fn matrix_profile(&self, x: &Point) -> Result<(f64, Point, f64), MmsError> {
        self.check(x)?;
        let m = self.xi + 1.0;
        let (r, k) = self.offset(x);
        let d = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
        let dm2 = d.powf(m - 2.0);
        let mut p = d.powf(m);
        let mut g = [m * dm2 * r[0], m * dm2 * r[1], m * dm2 * r[2]];
        let mut lap = m * (m + k as f64 - 2.0) * dm2;
        if self.is_central(x) {
            let (w, gw, lw) = self.bubble(x);
            p += w * d;
            g[0] += w * r[0].signum();
            g[1] += d * gw[1];
            g[2] += d * gw[2];
            lap += d * lw;
        }
        Ok((p, g, lap))
    }

    fn source(&self, p_factor: f64, grad: &Point, lap: f64, t: f64) -> f64 {
        let c = self.compressibility;
        let rho = (c * t * p_factor).exp();
        let g2 = grad[0] * grad[0] + grad[1] * grad[1] + grad[2] * grad[2];
        rho * (self.porosity * c * p_factor - c * t * t * g2 - t * lap)
    }

    pub fn matrix(&self, x: &Point, t: f64) -> Result<PointFields, MmsError> {
        let (p, g, lap) = self.matrix_profile(x)?;
        Ok(PointFields { pressure: t * p, velocity: [-t * g[0], -t * g[1], -t * g[2]], source: self.source(p, &g, lap, t) })
    }

    pub fn matrix_pressure(&self, x: &Point, t: f64) -> Result<f64, MmsError> {
        Ok(t * self.matrix_profile(x)?.0)
    }

    /// Fracture fields; `x` is a point on the fracture plane.
    pub fn fracture(&self, x: &Point, t: f64) -> Result<PointFields, MmsError> {
        self.check(x)?;
        let on_fracture = (1..self.ambient_dim).all(|a| (LO..=HI).contains(&x[a]));
        if !on_fracture {
            return Err(MmsError::OutsideDomain(*x));
        }
        let (w, gw, lw) = self.bubble(x);
        let (p, g, lap) = (-w, [0.0, -gw[1], -gw[2]], -lw);
        Ok(PointFields {
            pressure: t * p,
            velocity: [0.0, -t * g[1], -t * g[2]],
            source: self.source(p, &g, lap, t) - 2.0 * t * w,
        })
    }

    /// Interface flux (volumetric, from matrix into fracture); equal on both sides.
    pub fn interface_flux(&self, x: &Point, t: f64) -> f64 {
        t * self.bubble(x).0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fracture_center_pressure() {
        let e = ExactSolution::new(3);
        let p = e.fracture(&[0.5, 0.5, 0.5], 1.0).unwrap().pressure;
        let q = 0.25 * -0.25_f64;
        assert!((p - -100.0 * (q * q) * (q * q)).abs() < 1e-18);
        assert!((p + 1.52587890625e-3).abs() < 1e-15);
    }

    #[test]
    fn zero_on_fracture_trace_and_at_t0() {
        let e = ExactSolution::new(3);
        for &(y, z) in &[(0.3, 0.4), (0.25, 0.75), (0.6, 0.26)] {
            assert_eq!(e.matrix_pressure(&[0.5, y, z], 0.7).unwrap(), 0.0);
        }
        let f = e.matrix(&[0.1, 0.2, 0.9], 0.0).unwrap();
        assert_eq!((f.pressure, f.velocity), (0.0, [0.0; 3]));
        assert_eq!(e.fracture(&[0.5, 0.4, 0.6], 0.0).unwrap().pressure, 0.0);
    }

    #[test]
    fn regions_and_half_open_bands() {
        let e = ExactSolution::new(3);
        assert_eq!(e.region(&[0.1, 0.1, 0.1]).unwrap(), 1);
        assert_eq!(e.region(&[0.1, 0.25, 0.25]).unwrap(), 5);
        assert_eq!(e.region(&[0.1, 0.75, 0.5]).unwrap(), 8);
        assert_eq!(e.region(&[0.9, 0.99, 0.99]).unwrap(), 9);
        assert!(matches!(e.region(&[1.1, 0.5, 0.5]), Err(MmsError::OutsideDomain(_))));
        assert_eq!(ExactSolution::new(2).region(&[0.3, 0.8, 0.0]).unwrap(), 3);
    }

    #[test]
    fn distance_and_pressure_continuous_across_regions() {
        let e = ExactSolution::new(3);
        let eps = 1e-12;
        for &(y, z) in &[(0.25, 0.1), (0.75, 0.6), (0.4, 0.25), (0.25, 0.75)] {
            for x in [0.1, 0.8] {
                let a = e.matrix_pressure(&[x, y - eps, z - eps], 1.0).unwrap();
                let b = e.matrix_pressure(&[x, y + eps, z + eps], 1.0).unwrap();
                assert!((a - b).abs() < 1e-9, "({x},{y},{z}): {a} vs {b}");
            }
        }
    }

    #[test]
    fn matrix_normal_flux_equals_bubble() {
        let e = ExactSolution::new(3);
        let x = [0.5 + 1e-12, 0.4, 0.55];
        let v = e.matrix(&x, 0.8).unwrap().velocity;
        // Outward normal of the matrix at the fracture is -x.
        assert!((-v[0] - e.interface_flux(&x, 0.8)).abs() < 1e-12);
    }
}
