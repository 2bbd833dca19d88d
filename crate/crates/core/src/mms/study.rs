use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::discretization::FaceKind;
use crate::geometry::{build_mdg, FaceTag, FractureSpec, GeometrySpec, Grid, MixedDimensionalGrid, Point};
use crate::physics::{BoundarySetup, FlowModel, MaterialParams, PropertyOverrides, Sources};
use crate::solver::{time_loop, SolverConfig};

use super::exact::ExactSolution;
use super::MmsError;

/// Reported variables, in table order.
pub const VARIABLES: [&str; 5] = ["matrix_pressure", "matrix_flux", "fracture_pressure", "fracture_flux", "interface_flux"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelResult {
    pub cells_per_axis: usize,
    pub h: f64,
    pub dt: f64,
    pub newton_iterations: usize,
    /// Relative L2 error per variable name.
    pub errors: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub ambient_dim: usize,
    pub levels: Vec<LevelResult>,
    /// Least-squares slope of log(error) against log(h), per variable.
    pub ooc: BTreeMap<String, f64>,
    /// Variables whose exact field vanishes identically on some level (no order defined).
    #[serde(default)]
    pub degenerate: Vec<String>,
}

/// Golden observed orders, with the tolerance used for comparisons.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoldenOoc {
    pub ambient_dim: usize,
    pub cells_per_axis: Vec<usize>,
    pub tolerance: f64,
    pub ooc: BTreeMap<String, f64>,
}

/// Least-squares slope of `log(error)` against `log(h)`.
pub fn compute_ooc(errors: &[f64], hs: &[f64]) -> Result<f64, MmsError> {
    if errors.len() != hs.len() || errors.len() < 3 {
        return Err(MmsError::TooFewLevels(errors.len().min(hs.len())));
    }
    if let Some(&e) = errors.iter().chain(hs).find(|&&e| !(e > 0.0)) {
        return Err(MmsError::NonPositiveError(e));
    }
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}

/// Unit-coefficient material set of the manufactured problem.
pub fn mms_params(exact: &ExactSolution) -> (MaterialParams, PropertyOverrides) {
    let mut params = MaterialParams::unit();
    params.fluid.compressibility_1_pa = exact.compressibility;
    params.solid.porosity = exact.porosity;
    let overrides = PropertyOverrides {
        fracture_porosity: Some(exact.porosity),
        fracture_permeability_m2: Some(1.0),
        // 2 K_n / (mu a) = 1 with a = 1.
        normal_permeability_m2: Some(0.5),
        aperture_m: Some(1.0),
    };
    (params, overrides)
}

pub fn mms_geometry(dim: usize, n: usize) -> Result<MixedDimensionalGrid, MmsError> {
    if n == 0 || n % 4 != 0 {
        return Err(MmsError::InvalidLevel(n));
    }
    let fracture = FractureSpec { fixed_axis: 0, fixed_value_m: 0.5, extents_m: vec![[0.25, 0.75]; dim - 1] };
    Ok(build_mdg(&GeometrySpec::unit_box(dim, n).with_fracture(fracture))?)
}

/// Two-point Gauss average of `f` over the axis-aligned box `[lo, hi]`; collapsed
/// axes are evaluated at their coordinate.
pub fn gauss_average(lo: &Point, hi: &Point, f: &dyn Fn(&Point) -> f64) -> f64 {
    let g = 0.5 / 3.0_f64.sqrt();
    let active: Vec<usize> = (0..3).filter(|&a| hi[a] > lo[a]).collect();
    let n = 1usize << active.len();
    let mut sum = 0.0;
    for mask in 0..n {
        let mut x = [0.0; 3];
        for a in 0..3 {
            x[a] = 0.5 * (lo[a] + hi[a]);
        }
        for (bit, &a) in active.iter().enumerate() {
            let s = if mask >> bit & 1 == 1 { g } else { -g };
            x[a] += s * (hi[a] - lo[a]);
        }
        sum += f(&x);
    }
    sum / n as f64
}

fn relative_l2(pairs: impl Iterator<Item = (f64, f64, f64)>) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (w, d, e) in pairs {
        num += w * (d - e) * (d - e);
        den += w * e * e;
    }
    if den > 0.0 {
        (num / den).sqrt()
    } else if num.sqrt() <= 1e-12 {
        0.0
    } else {
        f64::INFINITY
    }
}

fn face_flux_exact(g: &Grid, f: usize, vel: &dyn Fn(&Point) -> Point) -> f64 {
    let (lo, hi) = g.face_bounds(f);
    // Face normals are area-weighted.
    let n = g.face_normals[f];
    gauss_average(&lo, &hi, &|x| {
        let v = vel(x);
        v[0] * n[0] + v[1] * n[1] + v[2] * n[2]
    })
}

/// Builds the manufactured problem on an `n^dim` grid.
pub fn build_mms_model(dim: usize, n: usize) -> Result<FlowModel, MmsError> {
    let exact = ExactSolution::new(dim);
    let mdg = mms_geometry(dim, n)?;
    let (params, overrides) = mms_params(&exact);
    let mut bc = BoundarySetup::new(&mdg);
    bc.assign(&mdg, 0, |_, _| true, Some((FaceKind::Dirichlet, 0.0)), None);
    let ex = Arc::new(exact);
    let e1 = Arc::clone(&ex);
    let boundary = move |t: f64, mdg: &MixedDimensionalGrid, bc: &mut BoundarySetup| {
        let g = mdg.matrix();
        for f in 0..g.num_faces {
            if matches!(g.boundary_tags[f], FaceTag::External { .. }) {
                bc.mass[0].values[f] = e1.matrix_pressure(&g.face_centers[f], t).unwrap_or(0.0);
            }
        }
    };
    let e2 = Arc::clone(&ex);
    let sources = move |t: f64, mdg: &MixedDimensionalGrid| {
        let mut mass = Vec::with_capacity(mdg.num_cells_total());
        for g in &mdg.subdomains {
            for c in 0..g.num_cells {
                let x = &g.cell_centers[c];
                let s = if g.dim == mdg.ambient_dim { e2.matrix(x, t) } else { e2.fracture(x, t) };
                mass.push(s.map(|f| f.source).unwrap_or(0.0) * g.cell_volumes[c]);
            }
        }
        Sources { mass, energy: Vec::new() }
    };
    Ok(FlowModel::new(mdg, params, overrides, false, bc)?
        .with_boundary_update(Box::new(boundary))
        .with_source_update(Box::new(sources)))
}

/// Relative errors of the current model state against the exact solution at time `t`.
pub fn discrete_errors(model: &FlowModel, t: f64) -> Result<BTreeMap<String, f64>, MmsError> {
    let mdg = &model.mdg;
    let exact = ExactSolution::new(mdg.ambient_dim);
    let (p, _) = model.cell_fields();
    let flux = model.face_darcy_flux()?;
    let (coff, foff) = (mdg.cell_offsets(), mdg.face_offsets());
    let mut out = BTreeMap::new();
    let matrix = mdg.matrix();
    let frac = &mdg.subdomains[1];

    let mut pm = Vec::new();
    for c in 0..matrix.num_cells {
        pm.push((matrix.cell_volumes[c], p[coff[0] + c], exact.matrix_pressure(&matrix.cell_centers[c], t)?));
    }
    out.insert(VARIABLES[0].to_string(), relative_l2(pm.into_iter()));

    let vel_m = |x: &Point| exact.matrix(x, t).map(|f| f.velocity).unwrap_or([0.0; 3]);
    let mut fm = Vec::new();
    for f in 0..matrix.num_faces {
        if model.boundary.mass[0].kinds[f] == FaceKind::Interface {
            continue;
        }
        let a = matrix.face_areas[f];
        fm.push((a, flux[foff[0] + f] / a, face_flux_exact(matrix, f, &vel_m) / a));
    }
    out.insert(VARIABLES[1].to_string(), relative_l2(fm.into_iter()));

    let mut pf = Vec::new();
    for c in 0..frac.num_cells {
        pf.push((frac.cell_volumes[c], p[coff[1] + c], exact.fracture(&frac.cell_centers[c], t)?.pressure));
    }
    out.insert(VARIABLES[2].to_string(), relative_l2(pf.into_iter()));

    let vel_f = |x: &Point| exact.fracture(x, t).map(|f| f.velocity).unwrap_or([0.0; 3]);
    let mut ff = Vec::new();
    for f in 0..frac.num_faces {
        if frac.cells_of_face(f).len() < 2 {
            continue;
        }
        let a = frac.face_areas[f];
        ff.push((a, flux[foff[1] + f] / a, face_flux_exact(frac, f, &vel_f) / a));
    }
    out.insert(VARIABLES[3].to_string(), relative_l2(ff.into_iter()));

    let lam = match model.vars.interface_darcy_flux {
        Some(v) => model.system().values_of(v).to_vec(),
        None => Vec::new(),
    };
    let moff = mdg.mortar_offsets();
    let mut lf = Vec::new();
    for (j, m) in mdg.interfaces.iter().enumerate() {
        let hg = &mdg.subdomains[m.primary];
        for (i, mc) in m.cells.iter().enumerate() {
            let (lo, hi) = hg.face_bounds(mc.primary_face);
            let want = gauss_average(&lo, &hi, &|x| exact.interface_flux(x, t));
            lf.push((m.cell_volumes[i], lam[moff[j] + i], want));
        }
    }
    out.insert(VARIABLES[4].to_string(), relative_l2(lf.into_iter()));
    Ok(out)
}

/// Runs the manufactured problem over `(0, 1]` with `dt = h` and reports the errors at `t = 1`.
pub fn run_level(dim: usize, n: usize) -> Result<LevelResult, MmsError> {
    let mut model = build_mms_model(dim, n)?;
    let h = 1.0 / n as f64;
    let cfg = SolverConfig::uniform(h, 1.0);
    let (report, res) = time_loop(&mut model, &cfg, 0.0, |_, _| Ok(()));
    res?;
    Ok(LevelResult {
        cells_per_axis: n,
        h,
        dt: h,
        newton_iterations: report.total_iterations(),
        errors: discrete_errors(&model, 1.0)?,
    })
}

pub fn run_convergence_study(dim: usize, levels: &[usize]) -> Result<ConvergenceReport, MmsError> {
    if dim != 2 && dim != 3 {
        return Err(MmsError::UnsupportedDimension(dim));
    }
    if levels.len() < 3 {
        return Err(MmsError::TooFewLevels(levels.len()));
    }
    if levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(MmsError::InvalidLevel(levels[0]));
    }
    let results = levels.iter().map(|&n| run_level(dim, n)).collect::<Result<Vec<_>, _>>()?;
    let hs: Vec<f64> = results.iter().map(|l| l.h).collect();
    let mut ooc = BTreeMap::new();
    let mut degenerate = Vec::new();
    for v in VARIABLES {
        let errs: Vec<f64> = results.iter().map(|l| l.errors[v]).collect();
        match compute_ooc(&errs, &hs) {
            Ok(o) => {
                ooc.insert(v.to_string(), o);
            }
            Err(MmsError::NonPositiveError(_)) => degenerate.push(v.to_string()),
            Err(e) => return Err(e),
        }
    }
    Ok(ConvergenceReport { ambient_dim: dim, levels: results, ooc, degenerate })
}

/// Default refinement schedule per dimension.
pub fn default_levels(dim: usize) -> Vec<usize> {
    if dim == 2 {
        vec![16, 32, 64]
    } else {
        vec![4, 8, 16]
    }
}

impl ConvergenceReport {
    /// Whitespace-separated table: level, h, dt, variable, error, ooc.
    pub fn table(&self) -> String {
        let mut s = format!("{:>5} {:>10} {:>10} {:>18} {:>12} {:>7}\n", "level", "h", "dt", "variable", "error", "ooc");
        for (i, l) in self.levels.iter().enumerate() {
            for v in VARIABLES {
                s.push_str(&format!(
                    "{:>5} {:>10.4e} {:>10.4e} {:>18} {:>12.5e} {:>7}\n",
                    i,
                    l.h,
                    l.dt,
                    v,
                    l.errors[v],
                    self.ooc.get(v).map_or("-".to_string(), |o| format!("{o:.3}"))
                ));
            }
        }
        s
    }

    /// Errors strictly decrease with refinement for every variable.
    pub fn is_monotone(&self) -> bool {
        VARIABLES.iter().all(|v| self.levels.windows(2).all(|w| w[1].errors[*v] < w[0].errors[*v]))
    }

    /// Pairwise orders between consecutive levels.
    pub fn pairwise_ooc(&self, variable: &str) -> Vec<f64> {
        self.levels
            .windows(2)
            .map(|w| (w[1].errors[variable] / w[0].errors[variable]).ln() / (w[1].h / w[0].h).ln())
            .collect()
    }

    pub fn to_golden(&self, tolerance: f64) -> GoldenOoc {
        GoldenOoc {
            ambient_dim: self.ambient_dim,
            cells_per_axis: self.levels.iter().map(|l| l.cells_per_axis).collect(),
            tolerance,
            ooc: self.ooc.clone(),
        }
    }

    /// Variables whose order differs from the golden value by more than its tolerance.
    pub fn compare(&self, golden: &GoldenOoc) -> Vec<(String, f64, f64)> {
        VARIABLES
            .iter()
            .filter_map(|v| {
                let (got, want) = (self.ooc.get(*v).copied(), golden.ooc.get(*v).copied());
                let ok = match (got, want) {
                    (Some(g), Some(w)) => (g - w).abs() <= golden.tolerance,
                    (None, None) => true,
                    _ => false,
                };
                let (got, want) = (got.unwrap_or(f64::NAN), want.unwrap_or(f64::NAN));
                (!ok).then(|| (v.to_string(), got, want))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ooc_of_exact_power_laws() {
        let hs = [1.0, 0.5, 0.25];
        assert!((compute_ooc(&[1.0, 0.25, 0.0625], &hs).unwrap() - 2.0).abs() < 1e-14);
        assert!((compute_ooc(&[1.0, 0.5, 0.25], &hs).unwrap() - 1.0).abs() < 1e-14);
        assert!(matches!(compute_ooc(&[1.0, 0.0, 0.25], &hs), Err(MmsError::NonPositiveError(_))));
        assert!(compute_ooc(&[1.0, 0.5], &hs[..2]).is_err());
    }

    #[test]
    fn gauss_average_is_exact_for_cubics() {
        let lo = [0.0, 1.0, 2.0];
        let hi = [1.0, 3.0, 2.0];
        let avg = gauss_average(&lo, &hi, &|x| x[0].powi(3) + x[1] * x[1]);
        let want = 0.25 + (27.0 - 1.0) / 3.0 / 2.0;
        assert!((avg - want).abs() < 1e-13);
    }

    #[test]
    fn boundary_data_matches_exact_at_face_centers() {
        let mut m = build_mms_model(2, 8).unwrap();
        m.prepare_step(0.6, 0.1).unwrap();
        let e = ExactSolution::new(2);
        let g = m.mdg.matrix();
        for f in 0..g.num_faces {
            if matches!(g.boundary_tags[f], FaceTag::External { .. }) {
                assert_eq!(m.boundary.mass[0].values[f], e.matrix_pressure(&g.face_centers[f], 0.6).unwrap());
            }
        }
    }

    #[test]
    fn rejects_non_conforming_levels() {
        assert!(matches!(mms_geometry(2, 6), Err(MmsError::InvalidLevel(6))));
        assert!(matches!(run_convergence_study(2, &[8, 16]), Err(MmsError::TooFewLevels(2))));
    }

    #[test]
    fn coarse_study_reports_every_variable() {
        let r = run_convergence_study(2, &[8, 16, 32]).unwrap();
        assert_eq!(r.levels.len(), 3);
        assert_eq!(r.table().lines().count(), 1 + 15);
        assert!(r.ooc.values().all(|v| v.is_finite()));
    }
}
