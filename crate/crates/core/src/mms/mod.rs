//! Manufactured-solution verification of the flow model on a unit domain with one
//! immersed fracture, in 2D and 3D.

mod exact;
mod oracle;
mod study;

use thiserror::Error;

use crate::geometry::{GeometryError, Point};
use crate::physics::PhysicsError;
use crate::solver::SolverError;

pub use exact::{ExactSolution, PointFields};
pub use oracle::{fracture_source_oracle, matrix_source_oracle};
pub use study::{
    build_mms_model, compute_ooc, default_levels, discrete_errors, gauss_average, mms_geometry, mms_params,
    run_convergence_study, run_level, ConvergenceReport, GoldenOoc, LevelResult, VARIABLES,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MmsError {
    #[error("point {0:?} is outside the domain")]
    OutsideDomain(Point),
    #[error("errors and mesh sizes must be positive, got {0}")]
    NonPositiveError(f64),
    #[error("at least 3 refinement levels required, got {0}")]
    TooFewLevels(usize),
    #[error("invalid refinement level {0}: cell counts must be positive multiples of 4 and increasing")]
    InvalidLevel(usize),
    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Physics(#[from] PhysicsError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}
