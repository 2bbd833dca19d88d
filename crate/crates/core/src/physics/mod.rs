//! Fluid and rock properties, constitutive laws and the coupled flow/heat model.

mod constitutive;
mod model;
mod params;
mod properties;

use thiserror::Error;

use crate::ad::AdError;
use crate::discretization::DiscretizationError;
use crate::geometry::GeometryError;

pub use constitutive::{
    check_vogel_range, cubic_law, effective_quantity, effective_value, enthalpy_and_internal_energy, fluid_density,
    fluid_density_value, fluid_enthalpy_value, fluid_viscosity, fluid_viscosity_value, Energies,
};
pub use model::{
    BalanceTerms, BoundarySetup, BoundaryUpdate, FlowModel, ModelVariables, SourceUpdate, Sources, ENERGY_BALANCE,
    INTERFACE_DARCY_FLUX, INTERFACE_ENTHALPY_FLUX, INTERFACE_HEAT_FLUX, MASS_BALANCE, PRESSURE, TEMPERATURE,
};
pub use params::{FluidParams, MaterialParams, PropertyOverrides, SolidParams, ViscosityModel};
pub use properties::{compute_properties, Properties};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhysicsError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Discretization(#[from] DiscretizationError),
    #[error(transparent)]
    Ad(#[from] AdError),
    #[error("face {face} of subdomain {subdomain} has no boundary condition")]
    MissingCondition { subdomain: usize, face: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("temperature {value} K at or below the Vogel cutoff{}", cell.map(|c| format!(" in cell {c}")).unwrap_or_default())]
    TemperatureBelowVogelCutoff { cell: Option<usize>, value: f64 },
}
