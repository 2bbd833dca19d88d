use crate::geometry::{Grid, ProjectionSet};
use crate::sparse::CsrMatrix;

use super::tpfa::{BoundaryCondition, FaceKind};

/// Upstream selection on the faces of one grid for a frozen flux direction.
#[derive(Clone, Debug)]
pub struct UpwindDiscretization {
    /// `num_faces x num_cells`, a single unit entry at the upstream cell.
    pub face_value_map: CsrMatrix,
    /// 1 where the boundary value is upstream (Dirichlet or Neumann inflow), else 0.
    pub boundary_inflow: Vec<f64>,
}

impl UpwindDiscretization {
    /// Face values from cell values and per-face boundary values.
    pub fn face_values(&self, cells: &[f64], boundary: &[f64]) -> Vec<f64> {
        self.face_value_map
            .matvec(cells)
            .iter()
            .zip(&self.boundary_inflow)
            .zip(boundary)
            .map(|((v, w), b)| v + w * b)
            .collect()
    }
}

/// Non-negative flux selects the cell on the negative-normal side (the `+1` cell);
/// negative flux selects the other side. On external faces a side without a cell
/// is the boundary.
pub fn upwind(g: &Grid, face_flux: &[f64], bc: &BoundaryCondition) -> UpwindDiscretization {
    let mut trip = Vec::with_capacity(g.num_faces);
    let mut inflow = vec![0.0; g.num_faces];
    for f in 0..g.num_faces {
        let want_plus = face_flux[f] >= 0.0;
        let inc = g.cells_of_face(f);
        match inc.iter().find(|(_, s)| (*s > 0.0) == want_plus) {
            Some(&(c, _)) => trip.push((f, c, 1.0)),
            None => match bc.kinds[f] {
                FaceKind::Dirichlet | FaceKind::Neumann => inflow[f] = 1.0,
                // Interface and tip faces carry no advective flux of their own.
                _ => {
                    if let Some(&(c, _)) = inc.first() {
                        trip.push((f, c, 1.0));
                    }
                }
            },
        }
    }
    UpwindDiscretization {
        face_value_map: CsrMatrix::from_triplets(g.num_faces, g.num_cells, &trip),
        boundary_inflow: inflow,
    }
}

/// Inter-dimensional upwinding on mortar cells, in global numbering.
#[derive(Clone, Debug)]
pub struct InterfaceUpwind {
    /// Rows of the higher-side cell projection where `lambda > 0`.
    pub higher: CsrMatrix,
    /// Rows of the lower-side cell projection where `lambda <= 0`.
    pub lower: CsrMatrix,
}

impl InterfaceUpwind {
    /// The combined map `higher + lower` (`mortar cells x cells`).
    pub fn selection(&self) -> CsrMatrix {
        self.higher.add(&self.lower)
    }
}

pub fn interface_upwind(proj: &ProjectionSet, lambda: &[f64]) -> InterfaceUpwind {
    let pos: Vec<f64> = lambda.iter().map(|&l| if l > 0.0 { 1.0 } else { 0.0 }).collect();
    let neg: Vec<f64> = pos.iter().map(|w| 1.0 - w).collect();
    InterfaceUpwind {
        higher: proj.primary_cell_to_mortar.scale_rows(&pos),
        lower: proj.secondary_cell_to_mortar.scale_rows(&neg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_mdg, build_projections, FractureSpec, GeometrySpec};

    fn chain() -> Grid {
        let mdg = build_mdg(&GeometrySpec { ambient_dim: 2, extent_m: vec![3.0, 1.0], cells: vec![3, 1], fractures: vec![] })
            .unwrap();
        mdg.subdomains[0].clone()
    }

    fn x_faces(g: &Grid) -> Vec<usize> {
        let mut f: Vec<usize> = (0..g.num_faces).filter(|&f| g.face_axis[f] == 0).collect();
        f.sort_by(|a, b| g.face_centers[*a][0].partial_cmp(&g.face_centers[*b][0]).unwrap());
        f
    }

    #[test]
    fn positive_flux_takes_left_neighbour() {
        let g = chain();
        let bc = BoundaryCondition::uniform(&g, FaceKind::Dirichlet, 0.0);
        let flux: Vec<f64> = (0..g.num_faces).map(|f| if g.face_axis[f] == 0 { 1.0 } else { 0.0 }).collect();
        let up = upwind(&g, &flux, &bc);
        let cells = [10.0, 20.0, 30.0];
        let vals = up.face_values(&cells, &vec![-1.0; g.num_faces]);
        let xf = x_faces(&g);
        assert_eq!(xf.iter().map(|&f| vals[f]).collect::<Vec<_>>(), vec![-1.0, 10.0, 20.0, 30.0]);
        let rev: Vec<f64> = flux.iter().map(|v| -v).collect();
        let vals = upwind(&g, &rev, &bc).face_values(&cells, &vec![-1.0; g.num_faces]);
        assert_eq!(xf.iter().map(|&f| vals[f]).collect::<Vec<_>>(), vec![10.0, 20.0, 30.0, -1.0]);
    }

    #[test]
    fn interior_rows_have_single_entry() {
        let g = chain();
        let bc = BoundaryCondition::uniform(&g, FaceKind::Neumann, 0.0);
        let up = upwind(&g, &vec![0.0; g.num_faces], &bc);
        for f in 0..g.num_faces {
            if g.cells_of_face(f).len() == 2 {
                let (_, v) = up.face_value_map.row(f);
                assert_eq!(v, &[1.0]);
            }
        }
    }

    #[test]
    fn interface_branches() {
        let mdg = build_mdg(&GeometrySpec::unit_box(2, 4).with_fracture(FractureSpec {
            fixed_axis: 0,
            fixed_value_m: 0.5,
            extents_m: vec![[0.25, 0.75]],
        }))
        .unwrap();
        let proj = build_projections(&mdg).unwrap();
        let nm = mdg.num_mortar_cells_total();
        let cells: Vec<f64> = (0..mdg.num_cells_total()).map(|c| c as f64).collect();
        let up = interface_upwind(&proj, &vec![1.0; nm]);
        assert_eq!(up.selection().matvec(&cells), proj.primary_cell_to_mortar.matvec(&cells));
        let up = interface_upwind(&proj, &vec![0.0; nm]);
        assert_eq!(up.selection().matvec(&cells), proj.secondary_cell_to_mortar.matvec(&cells));
    }
}
