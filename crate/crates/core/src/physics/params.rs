use serde::{Deserialize, Serialize};

use super::PhysicsError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ViscosityModel {
    Constant { viscosity_pa_s: f64 },
    /// `mu_a * exp(mu_b / (T - mu_c))`.
    Vogel { mu_a_pa_s: f64, mu_b_k: f64, mu_c_k: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FluidParams {
    pub reference_density_kg_m3: f64,
    pub compressibility_1_pa: f64,
    pub thermal_expansion_1_k: f64,
    pub heat_capacity_j_kg_k: f64,
    pub conductivity_w_m_k: f64,
    pub viscosity: ViscosityModel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolidParams {
    pub density_kg_m3: f64,
    pub heat_capacity_j_kg_k: f64,
    pub conductivity_w_m_k: f64,
    pub porosity: f64,
    pub permeability_m2: f64,
}

/// Missing fields in deserialized input take the reference table values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaterialParams {
    pub fluid: FluidParams,
    pub solid: SolidParams,
    pub residual_aperture_m: f64,
    pub reference_pressure_pa: f64,
    pub reference_temperature_k: f64,
    pub gravity_m_s2: [f64; 3],
}

impl Default for MaterialParams {
    fn default() -> Self {
        Self::table()
    }
}

impl Default for FluidParams {
    fn default() -> Self {
        MaterialParams::table().fluid
    }
}

impl Default for SolidParams {
    fn default() -> Self {
        MaterialParams::table().solid
    }
}

/// Optional replacements of the default per-subdomain properties.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropertyOverrides {
    /// Porosity of fractures and intersections (default 1).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fracture_porosity: Option<f64>,
    /// Tangential permeability of fractures and intersections (default: cubic law).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fracture_permeability_m2: Option<f64>,
    /// Normal permeability of every interface (default: lower neighbour permeability).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normal_permeability_m2: Option<f64>,
    /// Aperture of fractures and intersections (default: residual aperture).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aperture_m: Option<f64>,
}

impl MaterialParams {
    /// Defaults from the reference parameter table, with temperature-dependent viscosity.
    pub fn table() -> Self {
        Self {
            fluid: FluidParams {
                reference_density_kg_m3: 1.0e3,
                compressibility_1_pa: 4.0e-10,
                thermal_expansion_1_k: 2.1e-4,
                heat_capacity_j_kg_k: 4.18e3,
                conductivity_w_m_k: 0.6,
                viscosity: ViscosityModel::Vogel { mu_a_pa_s: 2.94e-5, mu_b_k: 508.0, mu_c_k: 149.0 },
            },
            solid: SolidParams {
                density_kg_m3: 2.7e3,
                heat_capacity_j_kg_k: 7.9e2,
                conductivity_w_m_k: 2.5,
                porosity: 5.0e-2,
                permeability_m2: 2.0e-15,
            },
            residual_aperture_m: 5.0e-4,
            reference_pressure_pa: 1.01e5,
            reference_temperature_k: 400.0,
            gravity_m_s2: [0.0; 3],
        }
    }

    /// Table defaults with the constant viscosity of 1e-3 Pa s.
    pub fn table_constant_viscosity() -> Self {
        let mut p = Self::table();
        p.fluid.viscosity = ViscosityModel::Constant { viscosity_pa_s: 1.0e-3 };
        p
    }

    /// Unit coefficients: incompressible fluid, unit density, viscosity, permeability.
    pub fn unit() -> Self {
        Self {
            fluid: FluidParams {
                reference_density_kg_m3: 1.0,
                compressibility_1_pa: 0.0,
                thermal_expansion_1_k: 0.0,
                heat_capacity_j_kg_k: 1.0,
                conductivity_w_m_k: 1.0,
                viscosity: ViscosityModel::Constant { viscosity_pa_s: 1.0 },
            },
            solid: SolidParams {
                density_kg_m3: 1.0,
                heat_capacity_j_kg_k: 1.0,
                conductivity_w_m_k: 1.0,
                porosity: 0.1,
                permeability_m2: 1.0,
            },
            residual_aperture_m: 1.0,
            reference_pressure_pa: 0.0,
            reference_temperature_k: 0.0,
            gravity_m_s2: [0.0; 3],
        }
    }

    /// Compressibility and thermal expansion may be zero; every other coefficient
    /// must be strictly positive and finite.
    pub fn validate(&self) -> Result<(), PhysicsError> {
        let f = &self.fluid;
        let s = &self.solid;
        let positive = [
            ("fluid.reference_density_kg_m3", f.reference_density_kg_m3),
            ("fluid.heat_capacity_j_kg_k", f.heat_capacity_j_kg_k),
            ("fluid.conductivity_w_m_k", f.conductivity_w_m_k),
            ("solid.density_kg_m3", s.density_kg_m3),
            ("solid.heat_capacity_j_kg_k", s.heat_capacity_j_kg_k),
            ("solid.conductivity_w_m_k", s.conductivity_w_m_k),
            ("solid.porosity", s.porosity),
            ("solid.permeability_m2", s.permeability_m2),
            ("residual_aperture_m", self.residual_aperture_m),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(PhysicsError::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("fluid.compressibility_1_pa", f.compressibility_1_pa),
            ("fluid.thermal_expansion_1_k", f.thermal_expansion_1_k),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(PhysicsError::InvalidParameter(format!("{name} must be non-negative, got {v}")));
            }
        }
        if s.porosity > 1.0 {
            return Err(PhysicsError::InvalidParameter(format!("solid.porosity must not exceed 1, got {}", s.porosity)));
        }
        if !self.reference_pressure_pa.is_finite() || !self.reference_temperature_k.is_finite() {
            return Err(PhysicsError::InvalidParameter("reference state must be finite".into()));
        }
        match f.viscosity {
            ViscosityModel::Constant { viscosity_pa_s } if !(viscosity_pa_s > 0.0) => {
                Err(PhysicsError::InvalidParameter(format!("viscosity must be positive, got {viscosity_pa_s}")))
            }
            ViscosityModel::Vogel { mu_a_pa_s, .. } if !(mu_a_pa_s > 0.0) => {
                Err(PhysicsError::InvalidParameter(format!("mu_a must be positive, got {mu_a_pa_s}")))
            }
            _ => Ok(()),
        }
    }
}
