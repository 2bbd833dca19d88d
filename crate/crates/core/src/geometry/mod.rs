//! Mixed-dimensional Cartesian grids.
//!
//! A [`MixedDimensionalGrid`] holds one cell-centred grid per subdomain (the host
//! box, each fracture, each fracture intersection) and one [`MortarGrid`] per
//! pair of subdomains one dimension apart. All grids are tensor-product boxes
//! carved from the same global node lines, so fractures conform to host faces
//! and every mortar cell matches exactly one host face and one fracture cell.

mod aperture;
mod grid;
mod mdg;
mod projection;

use thiserror::Error;

pub use aperture::{intersection_aperture, specific_volume};
pub use grid::{compute_geometry, distance, FaceTag, Grid, IndexBox, Point};
pub use mdg::{build_mdg, FractureSpec, GeometrySpec, MixedDimensionalGrid, MortarCell, MortarGrid};
pub use projection::{build_projections, InterfaceProjections, ProjectionSet};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("non-conforming geometry: {0}")]
    NonConformingGeometry(String),
    #[error("unsupported geometry: {0}")]
    UnsupportedGeometry(String),
    #[error("degenerate cell {cell} in grid {grid} (volume {volume})")]
    DegenerateCell { grid: usize, cell: usize, volume: f64 },
    #[error("mortar matching failed: {0}")]
    MatchingFailure(String),
    #[error("non-positive aperture {value} in cell {cell}")]
    NonPositiveAperture { cell: usize, value: f64 },
    #[error("missing neighbour data: {0}")]
    MissingNeighbourData(String),
}
