//! Constitutive laws as operator graphs, with plain-number counterparts.

use crate::ad::Operator;

use super::params::{MaterialParams, ViscosityModel};
use super::PhysicsError;

/// `rho0 exp(c (p - p0) - beta (T - T0))`; `temperature` defaults to the reference.
pub fn fluid_density(p: &Operator, temperature: Option<&Operator>, params: &MaterialParams) -> Operator {
    let f = &params.fluid;
    let mut arg = f.compressibility_1_pa * (p - params.reference_pressure_pa);
    if let Some(t) = temperature {
        if f.thermal_expansion_1_k != 0.0 {
            arg = arg - f.thermal_expansion_1_k * (t - params.reference_temperature_k);
        }
    }
    f.reference_density_kg_m3 * arg.exp()
}

pub fn fluid_density_value(p: f64, temperature: f64, params: &MaterialParams) -> f64 {
    let f = &params.fluid;
    f.reference_density_kg_m3
        * (f.compressibility_1_pa * (p - params.reference_pressure_pa)
            - f.thermal_expansion_1_k * (temperature - params.reference_temperature_k))
            .exp()
}

/// Viscosity as an operator. Constant models ignore `temperature`; the Vogel model
/// uses the reference temperature when none is given.
pub fn fluid_viscosity(temperature: Option<&Operator>, params: &MaterialParams) -> Operator {
    match params.fluid.viscosity {
        ViscosityModel::Constant { viscosity_pa_s } => Operator::scalar(viscosity_pa_s),
        ViscosityModel::Vogel { mu_a_pa_s, mu_b_k, mu_c_k } => match temperature {
            Some(t) => mu_a_pa_s * (mu_b_k / (t - mu_c_k)).exp(),
            None => Operator::scalar(vogel(mu_a_pa_s, mu_b_k, mu_c_k, params.reference_temperature_k)),
        },
    }
}

fn vogel(a: f64, b: f64, c: f64, t: f64) -> f64 {
    a * (b / (t - c)).exp()
}

pub fn fluid_viscosity_value(temperature: f64, params: &MaterialParams) -> Result<f64, PhysicsError> {
    match params.fluid.viscosity {
        ViscosityModel::Constant { viscosity_pa_s } => Ok(viscosity_pa_s),
        ViscosityModel::Vogel { mu_a_pa_s, mu_b_k, mu_c_k } => {
            if temperature > mu_c_k {
                Ok(vogel(mu_a_pa_s, mu_b_k, mu_c_k, temperature))
            } else {
                Err(PhysicsError::TemperatureBelowVogelCutoff { cell: None, value: temperature })
            }
        }
    }
}

/// Checks the Vogel validity range `T > mu_c` on every cell.
pub fn check_vogel_range(temperature: &[f64], params: &MaterialParams) -> Result<(), PhysicsError> {
    if let ViscosityModel::Vogel { mu_c_k, .. } = params.fluid.viscosity {
        if let Some(c) = temperature.iter().position(|&t| !(t > mu_c_k)) {
            return Err(PhysicsError::TemperatureBelowVogelCutoff { cell: Some(c), value: temperature[c] });
        }
    }
    Ok(())
}

/// Fluid enthalpy, fluid internal energy and solid internal energy.
pub struct Energies {
    pub fluid_enthalpy: Operator,
    pub fluid_internal_energy: Operator,
    pub solid_internal_energy: Operator,
}

pub fn enthalpy_and_internal_energy(p: &Operator, t: &Operator, rho: &Operator, params: &MaterialParams) -> Energies {
    let dt = t - params.reference_temperature_k;
    let h = params.fluid.heat_capacity_j_kg_k * &dt;
    Energies {
        fluid_internal_energy: &h - p / rho,
        fluid_enthalpy: h,
        solid_internal_energy: params.solid.heat_capacity_j_kg_k * dt,
    }
}

pub fn fluid_enthalpy_value(temperature: f64, params: &MaterialParams) -> f64 {
    params.fluid.heat_capacity_j_kg_k * (temperature - params.reference_temperature_k)
}

/// `phi s_f + (1 - phi) s_s`.
pub fn effective_quantity(phi: &Operator, fluid: &Operator, solid: &Operator) -> Operator {
    phi * fluid + (1.0 - phi) * solid
}

pub fn effective_value(phi: f64, fluid: f64, solid: f64) -> f64 {
    phi * fluid + (1.0 - phi) * solid
}

/// Cubic law `a^2 / 12`.
pub fn cubic_law(aperture: f64) -> f64 {
    aperture * aperture / 12.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ad::{EquationSystem, GridRef};

    fn one_cell(values: &[f64]) -> (EquationSystem, Operator, Operator) {
        let mut sys = EquationSystem::with_counts(vec![values.len()], vec![]);
        let p = sys.register_variable("p", &[GridRef::Subdomain(0)], 1).unwrap();
        let t = sys.register_variable("T", &[GridRef::Subdomain(0)], 1).unwrap();
        sys.set_values(p, values).unwrap();
        sys.set_values(t, values).unwrap();
        let (po, to) = (sys.var(p), sys.var(t));
        (sys, po, to)
    }

    #[test]
    fn density_reference_and_derivative() {
        let mut params = MaterialParams::unit();
        params.fluid.compressibility_1_pa = 0.2;
        let (sys, p, _) = one_cell(&[1.0]);
        let v = sys.evaluate(&fluid_density(&p, None, &params)).unwrap();
        assert!((v.val[0] - 0.2_f64.exp()).abs() < 1e-15);
        assert!((v.jac.get(0, 0) - 0.2 * 0.2_f64.exp()).abs() < 1e-15);
        let table = MaterialParams::table();
        assert_eq!(fluid_density_value(1.01e5, 400.0, &table), 1.0e3);
    }

    #[test]
    fn vogel_viscosity() {
        let params = MaterialParams::table();
        let mu = fluid_viscosity_value(400.0, &params).unwrap();
        assert!((mu - 2.94e-5 * (508.0_f64 / 251.0).exp()).abs() < 1e-18);
        assert!((mu - 2.224e-4).abs() < 1e-7);
        assert!(fluid_viscosity_value(1e12, &params).unwrap() - 2.94e-5 < 1e-12);
        assert!(matches!(fluid_viscosity_value(149.0, &params), Err(PhysicsError::TemperatureBelowVogelCutoff { .. })));
        let (sys, _, t) = one_cell(&[400.0]);
        let v = sys.evaluate(&fluid_viscosity(Some(&t), &params)).unwrap();
        let d = -mu * 508.0 / (251.0 * 251.0);
        assert!(((v.jac.get(0, 1) - d) / d).abs() < 1e-13);
    }

    #[test]
    fn energies() {
        let params = MaterialParams::table();
        assert_eq!(fluid_enthalpy_value(410.0, &params), 41800.0);
        let (sys, _, t) = one_cell(&[410.0]);
        let p = Operator::scalar(1e5);
        let rho = Operator::scalar(1e3);
        let e = enthalpy_and_internal_energy(&p, &t, &rho, &params);
        let uf = sys.evaluate(&e.fluid_internal_energy).unwrap().val[0];
        assert!((uf - (41800.0 - 100.0)).abs() < 1e-9);
    }

    #[test]
    fn effective() {
        assert_eq!(effective_value(1.0, 2.0, 5.0), 2.0);
        assert_eq!(effective_value(0.5, 2.0, 4.0), 3.0);
        assert!((effective_value(0.1, 10.0, 20.0) - 19.0).abs() < 1e-14);
    }
}
