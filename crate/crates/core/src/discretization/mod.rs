//! Finite-volume building blocks as constant sparse maps.
//!
//! Flux maps are per grid; [`GlobalFlux`] stacks them block-diagonally in the
//! mixed-dimensional numbering used by the equation system.

mod interface;
mod tpfa;
mod upwind;

use thiserror::Error;

use crate::geometry::MixedDimensionalGrid;
use crate::sparse::CsrMatrix;

pub use interface::{
    interface_advective_map, interface_darcy_map, interface_fourier_map, mortar_geometry, trace_reconstruction,
    InterfaceLaw, MortarGeometry, TraceReconstruction,
};
pub use tpfa::{divergence, gravity_term, tpfa, BoundaryCondition, FaceKind, FluxDiscretization};
pub use upwind::{interface_upwind, upwind, InterfaceUpwind, UpwindDiscretization};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiscretizationError {
    #[error("non-positive diffusivity {value} in cell {cell} of grid {grid}")]
    NonPositiveDiffusivity { grid: usize, cell: usize, value: f64 },
    #[error("zero cell-face distance (grid {grid}, cell {cell}, face {face})")]
    ZeroCellFaceDistance { grid: usize, cell: usize, face: usize },
    #[error("face {face} of grid {grid} has no boundary condition")]
    MissingCondition { grid: usize, face: usize },
    #[error("no flux discretization for subdomain {subdomain}")]
    MissingDiscretization { subdomain: usize },
    #[error("non-positive aperture {value} on mortar cell {mortar_cell}")]
    NonPositiveAperture { mortar_cell: usize, value: f64 },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

/// Per-subdomain TPFA maps stacked in global cell/face numbering.
#[derive(Clone, Debug)]
pub struct GlobalFlux {
    pub flux_map: CsrMatrix,
    pub dirichlet_bound: CsrMatrix,
    pub neumann_bound: CsrMatrix,
    pub divergence: CsrMatrix,
    pub gravity: Vec<f64>,
    pub per_subdomain: Vec<FluxDiscretization>,
}

impl GlobalFlux {
    pub fn new(
        mdg: &MixedDimensionalGrid,
        diffusivity: &[Vec<f64>],
        bcs: &[BoundaryCondition],
        gravity: [f64; 3],
    ) -> Result<Self, DiscretizationError> {
        let mut discs = Vec::with_capacity(mdg.num_subdomains());
        let mut grav = Vec::with_capacity(mdg.num_faces_total());
        for (i, g) in mdg.subdomains.iter().enumerate() {
            let d = tpfa(g, &diffusivity[i], &bcs[i])?;
            grav.extend(gravity_term(g, &d, &bcs[i], gravity));
            discs.push(d);
        }
        let stack = |f: &dyn Fn(&FluxDiscretization) -> &CsrMatrix| {
            let blocks: Vec<&CsrMatrix> = discs.iter().map(f).collect();
            CsrMatrix::block_diag(&blocks)
        };
        let divs: Vec<CsrMatrix> = mdg.subdomains.iter().map(divergence).collect();
        let div_refs: Vec<&CsrMatrix> = divs.iter().collect();
        Ok(Self {
            flux_map: stack(&|d| &d.flux_map),
            dirichlet_bound: stack(&|d| &d.dirichlet_bound),
            neumann_bound: stack(&|d| &d.neumann_bound),
            divergence: CsrMatrix::block_diag(&div_refs),
            gravity: grav,
            per_subdomain: discs,
        })
    }
}

/// Per-subdomain upwind maps stacked in global numbering.
pub fn global_upwind(
    mdg: &MixedDimensionalGrid,
    face_flux: &[f64],
    bcs: &[BoundaryCondition],
) -> UpwindDiscretization {
    let face_off = mdg.face_offsets();
    let mut maps = Vec::with_capacity(mdg.num_subdomains());
    let mut inflow = Vec::with_capacity(mdg.num_faces_total());
    for (i, g) in mdg.subdomains.iter().enumerate() {
        let u = upwind(g, &face_flux[face_off[i]..face_off[i] + g.num_faces], &bcs[i]);
        inflow.extend_from_slice(&u.boundary_inflow);
        maps.push(u.face_value_map);
    }
    let refs: Vec<&CsrMatrix> = maps.iter().collect();
    UpwindDiscretization { face_value_map: CsrMatrix::block_diag(&refs), boundary_inflow: inflow }
}
