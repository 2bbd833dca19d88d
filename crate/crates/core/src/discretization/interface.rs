use crate::ad::Operator;
use crate::geometry::{MixedDimensionalGrid, ProjectionSet};
use crate::sparse::CsrMatrix;

use super::tpfa::FluxDiscretization;
use super::upwind::{interface_upwind, InterfaceUpwind};
use super::DiscretizationError;

/// Per-mortar-cell geometry in global numbering.
#[derive(Clone, Debug)]
pub struct MortarGeometry {
    pub area: Vec<f64>,
    pub normals: Vec<[f64; 3]>,
    /// Interface fluxes onto the matched higher-dimensional faces: entry `sign x area`,
    /// so a positive mortar flux is an outflow of the adjacent higher-dimensional cell.
    pub mortar_to_face: CsrMatrix,
}

pub fn mortar_geometry(mdg: &MixedDimensionalGrid) -> MortarGeometry {
    let face_off = mdg.face_offsets();
    let nm = mdg.num_mortar_cells_total();
    let mut area = Vec::with_capacity(nm);
    let mut normals = Vec::with_capacity(nm);
    let mut trip = Vec::with_capacity(nm);
    for m in &mdg.interfaces {
        let hg = &mdg.subdomains[m.primary];
        for (k, mc) in m.cells.iter().enumerate() {
            let row = area.len();
            let sign = hg.cells_of_face(mc.primary_face)[0].1;
            trip.push((face_off[m.primary] + mc.primary_face, row, sign * m.cell_volumes[k]));
            area.push(m.cell_volumes[k]);
            normals.push(m.normals[k]);
        }
    }
    MortarGeometry { mortar_to_face: CsrMatrix::from_triplets(mdg.num_faces_total(), nm, &trip), area, normals }
}

/// Jump law `flux = -coef [ scale (lower - trace) - rho g.n ]` on every mortar cell.
#[derive(Clone, Debug)]
pub struct InterfaceLaw {
    /// `2 / (Xi a_l)` per mortar cell.
    pub jump_scale: Vec<f64>,
    /// Normal diffusivity per mortar cell (permeability or conductivity).
    pub coefficient: Vec<f64>,
    /// `g . n` per mortar cell; all zero for the heat law.
    pub gravity_normal: Vec<f64>,
}

impl InterfaceLaw {
    /// `lower` and `trace` are mortar fields; `inverse_mu` and `rho` are optional
    /// upwinded mortar fields (`1/mu_j` and `rho_j`).
    pub fn flux(&self, lower: &Operator, trace: &Operator, inverse_mu: Option<&Operator>, rho: Option<&Operator>) -> Operator {
        let jump = Operator::dense(self.jump_scale.clone()) * (lower - trace);
        let drive = match rho {
            Some(r) if self.gravity_normal.iter().any(|&g| g != 0.0) => jump - Operator::dense(self.gravity_normal.clone()) * r,
            _ => jump,
        };
        let coef = -Operator::dense(self.coefficient.clone());
        match inverse_mu {
            Some(m) => coef * m * drive,
            None => coef * drive,
        }
    }

    /// Plain-number evaluation of the law, for checks and diagnostics.
    pub fn flux_values(&self, lower: &[f64], trace: &[f64]) -> Vec<f64> {
        (0..self.jump_scale.len())
            .map(|k| -self.coefficient[k] * self.jump_scale[k] * (lower[k] - trace[k]))
            .collect()
    }
}

fn jump_scale(mdg: &MixedDimensionalGrid, proj: &ProjectionSet, aperture: &[f64]) -> Result<Vec<f64>, DiscretizationError> {
    if aperture.len() != mdg.num_cells_total() {
        return Err(DiscretizationError::ShapeMismatch(format!(
            "{} aperture values for {} cells",
            aperture.len(),
            mdg.num_cells_total()
        )));
    }
    proj.secondary_cell_to_mortar
        .matvec(aperture)
        .into_iter()
        .enumerate()
        .map(|(k, a)| if a > 0.0 { Ok(2.0 / a) } else { Err(DiscretizationError::NonPositiveAperture { mortar_cell: k, value: a }) })
        .collect()
}

/// Interface Darcy law. `aperture` is per global cell; the lower-side values are used.
/// `normal_permeability` is per mortar cell.
pub fn interface_darcy_map(
    mdg: &MixedDimensionalGrid,
    proj: &ProjectionSet,
    aperture: &[f64],
    normal_permeability: &[f64],
    gravity: [f64; 3],
) -> Result<InterfaceLaw, DiscretizationError> {
    let geo = mortar_geometry(mdg);
    let gravity_normal = geo.normals.iter().map(|n| n[0] * gravity[0] + n[1] * gravity[1] + n[2] * gravity[2]).collect();
    Ok(InterfaceLaw { jump_scale: jump_scale(mdg, proj, aperture)?, coefficient: normal_permeability.to_vec(), gravity_normal })
}

/// Interface heat conduction law; `conductivity` is per mortar cell.
pub fn interface_fourier_map(
    mdg: &MixedDimensionalGrid,
    proj: &ProjectionSet,
    aperture: &[f64],
    conductivity: &[f64],
) -> Result<InterfaceLaw, DiscretizationError> {
    Ok(InterfaceLaw {
        jump_scale: jump_scale(mdg, proj, aperture)?,
        coefficient: conductivity.to_vec(),
        gravity_normal: vec![0.0; mdg.num_mortar_cells_total()],
    })
}

/// Trace reconstruction on the higher-dimensional side of each mortar cell,
/// `u_face = u_cell - (d / D) * coef * flux`, consistent with the half-transmissibility
/// of the adjacent cell.
#[derive(Clone, Debug)]
pub struct TraceReconstruction {
    pub cell_to_mortar: CsrMatrix,
    /// `face_area / half_transmissibility` per mortar cell.
    pub resistance: Vec<f64>,
}

impl TraceReconstruction {
    /// `coef` multiplies the flux density (viscosity for pressure, absent for temperature).
    pub fn trace(&self, cell_field: &Operator, flux: &Operator, coef: Option<&Operator>) -> Operator {
        let cells = cell_field.left_mul(&Operator::sparse(self.cell_to_mortar.clone()));
        let r = Operator::dense(self.resistance.clone());
        match coef {
            Some(c) => cells - r * c * flux,
            None => cells - r * flux,
        }
    }
}

pub fn trace_reconstruction(
    mdg: &MixedDimensionalGrid,
    proj: &ProjectionSet,
    tpfa: &[Option<FluxDiscretization>],
) -> Result<TraceReconstruction, DiscretizationError> {
    let mut resistance = Vec::with_capacity(mdg.num_mortar_cells_total());
    for m in &mdg.interfaces {
        let disc = tpfa
            .get(m.primary)
            .and_then(|d| d.as_ref())
            .ok_or(DiscretizationError::MissingDiscretization { subdomain: m.primary })?;
        let hg = &mdg.subdomains[m.primary];
        for mc in &m.cells {
            let t = disc.boundary_half_transmissibility[mc.primary_face];
            resistance.push(hg.face_areas[mc.primary_face] / t);
        }
    }
    Ok(TraceReconstruction { cell_to_mortar: proj.primary_cell_to_mortar.clone(), resistance })
}

/// Inter-dimensional upwinding for advected quantities given a flux snapshot.
pub fn interface_advective_map(proj: &ProjectionSet, lambda: &[f64]) -> InterfaceUpwind {
    interface_upwind(proj, lambda)
}

impl InterfaceUpwind {
    /// Upwinded mortar values of a cell field.
    pub fn advected(&self, cell_field: &Operator) -> Operator {
        cell_field.left_mul(&Operator::sparse(self.selection()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ad::{EquationSystem, GridRef};
    use crate::geometry::{build_mdg, build_projections, FractureSpec, GeometrySpec};

    fn setup() -> (MixedDimensionalGrid, ProjectionSet) {
        let mdg = build_mdg(&GeometrySpec::unit_box(2, 4).with_fracture(FractureSpec {
            fixed_axis: 0,
            fixed_value_m: 0.5,
            extents_m: vec![[0.25, 0.75]],
        }))
        .unwrap();
        let proj = build_projections(&mdg).unwrap();
        (mdg, proj)
    }

    #[test]
    fn darcy_law_by_substitution() {
        let (mdg, proj) = setup();
        let nm = mdg.num_mortar_cells_total();
        let law = interface_darcy_map(&mdg, &proj, &vec![0.5; mdg.num_cells_total()], &vec![1.0; nm], [0.0; 3]).unwrap();
        assert!(law.flux_values(&vec![1.0; nm], &vec![0.0; nm]).iter().all(|&v| v == -4.0));
        assert!(law.flux_values(&vec![0.3; nm], &vec![0.3; nm]).iter().all(|&v| v == 0.0));
        let wide = interface_darcy_map(&mdg, &proj, &vec![1.0; mdg.num_cells_total()], &vec![1.0; nm], [0.0; 3]).unwrap();
        assert!(wide.flux_values(&vec![1.0; nm], &vec![0.0; nm]).iter().all(|&v| v == -2.0));
    }

    #[test]
    fn fourier_law_and_antisymmetry() {
        let (mdg, proj) = setup();
        let nm = mdg.num_mortar_cells_total();
        let law = interface_fourier_map(&mdg, &proj, &vec![0.5; mdg.num_cells_total()], &vec![2.0; nm]).unwrap();
        assert!(law.flux_values(&vec![0.0; nm], &vec![1.0; nm]).iter().all(|&v| v == 8.0));
        let a = law.flux_values(&[0.1, 0.7, -0.2, 0.4], &[0.3, 0.2, 0.9, -1.0]);
        let b = law.flux_values(&[0.3, 0.2, 0.9, -1.0], &[0.1, 0.7, -0.2, 0.4]);
        assert!(a.iter().zip(&b).all(|(x, y)| *x == -*y));
    }

    #[test]
    fn operator_form_matches_values() {
        let (mdg, proj) = setup();
        let nm = mdg.num_mortar_cells_total();
        let mut sys = EquationSystem::new(&mdg);
        let grids: Vec<GridRef> = (0..mdg.num_subdomains()).map(GridRef::Subdomain).collect();
        let p = sys.register_variable("p", &grids, 1).unwrap();
        let vals: Vec<f64> = (0..mdg.num_cells_total()).map(|c| (c as f64 * 0.3).cos()).collect();
        sys.set_values(p, &vals).unwrap();
        let law = interface_darcy_map(&mdg, &proj, &vec![0.25; mdg.num_cells_total()], &vec![3.0; nm], [0.0; 3]).unwrap();
        let lower = sys.var(p).left_mul(&Operator::sparse(proj.secondary_cell_to_mortar.clone()));
        let upper = sys.var(p).left_mul(&Operator::sparse(proj.primary_cell_to_mortar.clone()));
        let got = sys.evaluate(&law.flux(&lower, &upper, None, None)).unwrap();
        let want = law.flux_values(&proj.secondary_cell_to_mortar.matvec(&vals), &proj.primary_cell_to_mortar.matvec(&vals));
        for (g, w) in got.val.iter().zip(&want) {
            assert!((g - w).abs() < 1e-14);
        }
    }

    #[test]
    fn missing_tpfa() {
        let (mdg, proj) = setup();
        let err = trace_reconstruction(&mdg, &proj, &[None, None]).unwrap_err();
        assert_eq!(err, DiscretizationError::MissingDiscretization { subdomain: 0 });
    }

    #[test]
    fn mortar_to_face_signs_follow_incidence() {
        let (mdg, _) = setup();
        let geo = mortar_geometry(&mdg);
        let g = mdg.matrix();
        let div = super::super::divergence(g);
        // Unit outflow on every mortar cell leaves each adjacent matrix cell.
        let face = geo.mortar_to_face.matvec(&vec![1.0; mdg.num_mortar_cells_total()]);
        let out = div.matvec(&face[..g.num_faces]);
        let total: f64 = out.iter().sum();
        assert!((total - geo.area.iter().sum::<f64>()).abs() < 1e-14);
        assert!(out.iter().all(|&v| v >= 0.0));
    }
}
