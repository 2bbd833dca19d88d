use crate::geometry::{FaceTag, Grid};
use crate::sparse::CsrMatrix;

use super::DiscretizationError;

/// Treatment of a face in a flux discretization.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FaceKind {
    Interior,
    /// Internal boundary whose flux is supplied by an interface variable.
    Interface,
    Dirichlet,
    /// Prescribed outward flux per unit face area.
    Neumann,
    Unassigned,
}

/// Face condition kinds of one grid, with the values used by the current step.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryCondition {
    pub kinds: Vec<FaceKind>,
    pub values: Vec<f64>,
}

impl BoundaryCondition {
    /// Interior faces and fracture traces are classified from the grid tags; tips are
    /// zero Neumann; external faces are left unassigned.
    pub fn from_tags(g: &Grid) -> Self {
        let kinds = g
            .boundary_tags
            .iter()
            .map(|t| match t {
                FaceTag::Interior => FaceKind::Interior,
                FaceTag::FractureTrace { .. } => FaceKind::Interface,
                FaceTag::Tip => FaceKind::Neumann,
                FaceTag::External { .. } => FaceKind::Unassigned,
            })
            .collect();
        Self { kinds, values: vec![0.0; g.num_faces] }
    }

    /// Every external face set to `kind` with value `value`.
    pub fn uniform(g: &Grid, kind: FaceKind, value: f64) -> Self {
        let mut bc = Self::from_tags(g);
        for (f, t) in g.boundary_tags.iter().enumerate() {
            if matches!(t, FaceTag::External { .. }) {
                bc.kinds[f] = kind;
                bc.values[f] = value;
            }
        }
        bc
    }

    pub fn check_assigned(&self, grid: usize) -> Result<(), DiscretizationError> {
        match self.kinds.iter().position(|k| *k == FaceKind::Unassigned) {
            Some(face) => Err(DiscretizationError::MissingCondition { grid, face }),
            None => Ok(()),
        }
    }

    pub fn is(&self, f: usize, kind: FaceKind) -> bool {
        self.kinds[f] == kind
    }
}

/// Two-point flux discretization of `-D grad u` on one grid.
///
/// Face fluxes are `flux_map @ u + bound_flux_map @ b`, oriented along the face
/// normal, where `b` holds Dirichlet values or Neumann outward flux densities per face.
#[derive(Clone, Debug)]
pub struct FluxDiscretization {
    pub flux_map: CsrMatrix,
    pub bound_flux_map: CsrMatrix,
    /// Dirichlet part of `bound_flux_map`.
    pub dirichlet_bound: CsrMatrix,
    /// Neumann part of `bound_flux_map`.
    pub neumann_bound: CsrMatrix,
    /// Face transmissibility (interior faces) or half-transmissibility (boundary faces).
    pub transmissibility: Vec<f64>,
    /// Half-transmissibility of the cell adjacent to each boundary face (0 on interior faces).
    pub boundary_half_transmissibility: Vec<f64>,
    /// The diffusivity the maps were built with.
    pub diffusivity: Vec<f64>,
}

fn half_transmissibility(g: &Grid, c: usize, f: usize, k: f64) -> Result<f64, DiscretizationError> {
    let d = g.cell_face_distance(c, f);
    if d <= 0.0 {
        return Err(DiscretizationError::ZeroCellFaceDistance { grid: g.id, cell: c, face: f });
    }
    Ok(k * g.face_areas[f] / d)
}

pub fn tpfa(g: &Grid, diffusivity: &[f64], bc: &BoundaryCondition) -> Result<FluxDiscretization, DiscretizationError> {
    if diffusivity.len() != g.num_cells {
        return Err(DiscretizationError::ShapeMismatch(format!(
            "{} diffusivity values for {} cells",
            diffusivity.len(),
            g.num_cells
        )));
    }
    if let Some(c) = diffusivity.iter().position(|&k| !(k > 0.0)) {
        return Err(DiscretizationError::NonPositiveDiffusivity { grid: g.id, cell: c, value: diffusivity[c] });
    }
    bc.check_assigned(g.id)?;
    let nf = g.num_faces;
    let mut flux = Vec::new();
    let mut dir = Vec::new();
    let mut neu = Vec::new();
    let mut trans = vec![0.0; nf];
    let mut half = vec![0.0; nf];
    for f in 0..nf {
        let inc = g.cells_of_face(f);
        match inc {
            [(c1, s1), (c2, s2)] => {
                let t1 = half_transmissibility(g, *c1, f, diffusivity[*c1])?;
                let t2 = half_transmissibility(g, *c2, f, diffusivity[*c2])?;
                let t = t1 * t2 / (t1 + t2);
                trans[f] = t;
                flux.push((f, *c1, s1 * t));
                flux.push((f, *c2, s2 * t));
            }
            [(c, s)] => {
                let t = half_transmissibility(g, *c, f, diffusivity[*c])?;
                half[f] = t;
                match bc.kinds[f] {
                    FaceKind::Dirichlet => {
                        trans[f] = t;
                        flux.push((f, *c, s * t));
                        dir.push((f, f, -s * t));
                    }
                    FaceKind::Neumann => neu.push((f, f, s * g.face_areas[f])),
                    FaceKind::Interface | FaceKind::Interior => {}
                    FaceKind::Unassigned => unreachable!("checked above"),
                }
            }
            _ => {}
        }
    }
    let dirichlet_bound = CsrMatrix::from_triplets(nf, nf, &dir);
    let neumann_bound = CsrMatrix::from_triplets(nf, nf, &neu);
    Ok(FluxDiscretization {
        flux_map: CsrMatrix::from_triplets(nf, g.num_cells, &flux),
        bound_flux_map: dirichlet_bound.add(&neumann_bound),
        dirichlet_bound,
        neumann_bound,
        transmissibility: trans,
        boundary_half_transmissibility: half,
        diffusivity: diffusivity.to_vec(),
    })
}

/// Per-face gravity driving term: face flux gains `rho_face * G_f` for the
/// Darcy law `-D (grad p - rho g)`.
pub fn gravity_term(g: &Grid, disc: &FluxDiscretization, bc: &BoundaryCondition, gravity: [f64; 3]) -> Vec<f64> {
    let dot = |a: &[f64; 3], b: &[f64; 3]| gravity[0] * (a[0] - b[0]) + gravity[1] * (a[1] - b[1]) + gravity[2] * (a[2] - b[2]);
    (0..g.num_faces)
        .map(|f| match g.cells_of_face(f) {
            [(c1, s1), (c2, _)] => {
                let (plus, minus) = if *s1 > 0.0 { (*c1, *c2) } else { (*c2, *c1) };
                disc.transmissibility[f] * dot(&g.cell_centers[minus], &g.cell_centers[plus])
            }
            [(c, s)] if bc.kinds[f] == FaceKind::Dirichlet => {
                s * disc.transmissibility[f] * dot(&g.face_centers[f], &g.cell_centers[*c])
            }
            _ => 0.0,
        })
        .collect()
}

/// Discrete divergence: signed incidence, `num_cells x num_faces`.
pub fn divergence(g: &Grid) -> CsrMatrix {
    g.cell_faces.transpose()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_mdg, GeometrySpec};

    fn grid(ambient: usize, extent: Vec<f64>, cells: Vec<usize>) -> Grid {
        let mdg = build_mdg(&GeometrySpec { ambient_dim: ambient, extent_m: extent, cells, fractures: vec![] }).unwrap();
        mdg.subdomains[0].clone()
    }

    #[test]
    fn harmonic_transmissibility() {
        let g = grid(2, vec![2.0, 1.0], vec![2, 1]);
        let bc = BoundaryCondition::uniform(&g, FaceKind::Neumann, 0.0);
        let d = tpfa(&g, &[1.0, 1.0], &bc).unwrap();
        let interior = (0..g.num_faces).find(|&f| g.cells_of_face(f).len() == 2).unwrap();
        assert!((d.transmissibility[interior] - 1.0).abs() < 1e-15);
        let d = tpfa(&g, &[1.0, 3.0], &bc).unwrap();
        assert!((d.transmissibility[interior] - 1.5).abs() < 1e-15);
        let (cols, vals) = d.flux_map.row(interior);
        assert_eq!(cols.len(), 2);
        assert_eq!(vals.iter().sum::<f64>(), 0.0);
    }

    #[test]
    fn constant_dirichlet_gives_zero_flux() {
        let g = grid(3, vec![1.0; 3], vec![3, 2, 2]);
        let bc = BoundaryCondition::uniform(&g, FaceKind::Dirichlet, 7.0);
        let d = tpfa(&g, &vec![2.5; g.num_cells], &bc).unwrap();
        let u = vec![7.0; g.num_cells];
        let flux: Vec<f64> = d.flux_map.matvec(&u).iter().zip(d.bound_flux_map.matvec(&bc.values)).map(|(a, b)| a + b).collect();
        assert!(flux.iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn errors() {
        let g = grid(2, vec![1.0, 1.0], vec![2, 2]);
        let bc = BoundaryCondition::uniform(&g, FaceKind::Neumann, 0.0);
        assert!(matches!(tpfa(&g, &[1.0, 0.0, 1.0, 1.0], &bc), Err(DiscretizationError::NonPositiveDiffusivity { cell: 1, .. })));
        let open = BoundaryCondition::from_tags(&g);
        assert!(matches!(tpfa(&g, &[1.0; 4], &open), Err(DiscretizationError::MissingCondition { .. })));
    }

    #[test]
    fn divergence_of_outward_unit_fluxes() {
        let g = grid(3, vec![1.0; 3], vec![1, 1, 1]);
        let div = divergence(&g);
        // Outward unit flux on every face, expressed along the face normals.
        let f: Vec<f64> = (0..g.num_faces).map(|f| g.cells_of_face(f)[0].1).collect();
        assert_eq!(div.matvec(&f), vec![6.0]);
    }

    #[test]
    fn telescoping_chain() {
        let g = grid(2, vec![4.0, 1.0], vec![4, 1]);
        let div = divergence(&g);
        let f: Vec<f64> = (0..g.num_faces).map(|f| if g.face_axis[f] == 0 { 1.0 } else { 0.0 }).collect();
        let d = div.matvec(&f);
        assert_eq!(&d[1..3], &[0.0, 0.0]);
    }

    #[test]
    fn hydrostatic_state_has_no_flux() {
        let g = grid(2, vec![1.0, 1.0], vec![3, 3]);
        let gravity = [0.0, -9.81, 0.0];
        let rho = 2.0;
        let mut bc = BoundaryCondition::uniform(&g, FaceKind::Dirichlet, 0.0);
        let p = |x: &[f64; 3]| rho * (gravity[0] * x[0] + gravity[1] * x[1]);
        for f in 0..g.num_faces {
            bc.values[f] = p(&g.face_centers[f]);
        }
        let d = tpfa(&g, &[1.0; 9], &bc).unwrap();
        let gt = gravity_term(&g, &d, &bc, gravity);
        let pc: Vec<f64> = g.cell_centers.iter().map(p).collect();
        let flux = d.flux_map.matvec(&pc);
        let bnd = d.bound_flux_map.matvec(&bc.values);
        for f in 0..g.num_faces {
            assert!((flux[f] + bnd[f] + rho * gt[f]).abs() < 1e-12);
        }
    }
}
