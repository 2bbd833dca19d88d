use crate::ad::{EquationSystem, GridRef, Operand, Operator, VariableId};
use crate::discretization::{
    global_upwind, interface_darcy_map, interface_fourier_map, interface_upwind, mortar_geometry, trace_reconstruction,
    BoundaryCondition, FaceKind, GlobalFlux, MortarGeometry,
};
use crate::geometry::{build_projections, FaceTag, MixedDimensionalGrid, ProjectionSet};
use crate::solver::{Model, SolverError};
use crate::sparse::CsrMatrix;

use super::constitutive::{
    check_vogel_range, effective_quantity, enthalpy_and_internal_energy, fluid_density, fluid_density_value,
    fluid_enthalpy_value, fluid_viscosity, fluid_viscosity_value,
};
use super::params::{MaterialParams, PropertyOverrides};
use super::properties::{compute_properties, Properties};
use super::PhysicsError;

pub const PRESSURE: &str = "pressure";
pub const TEMPERATURE: &str = "temperature";
pub const INTERFACE_DARCY_FLUX: &str = "interface_darcy_flux";
pub const INTERFACE_ENTHALPY_FLUX: &str = "interface_enthalpy_flux";
pub const INTERFACE_HEAT_FLUX: &str = "interface_heat_flux";
pub const MASS_BALANCE: &str = "mass_balance";
pub const ENERGY_BALANCE: &str = "energy_balance";

mod param {
    pub const INVERSE_DT: &str = "inverse_dt";
    pub const UPWIND: &str = "upwind_faces";
    pub const BND_MOBILITY: &str = "boundary_mobility";
    pub const BND_DENSITY: &str = "boundary_density";
    pub const BND_ENTHALPY: &str = "boundary_enthalpy";
    pub const INTERFACE_UPWIND: &str = "interface_upwind";
    pub const DIRICHLET_P: &str = "dirichlet_pressure";
    pub const NEUMANN_MASS: &str = "neumann_mass_flux";
    pub const DIRICHLET_T: &str = "dirichlet_temperature";
    pub const NEUMANN_ENERGY: &str = "neumann_energy_flux";
    pub const MASS_SOURCE: &str = "mass_source";
    pub const ENERGY_SOURCE: &str = "energy_source";
}

/// Face condition kinds and current values per subdomain, for mass and energy.
#[derive(Clone, Debug)]
pub struct BoundarySetup {
    pub mass: Vec<BoundaryCondition>,
    pub energy: Vec<BoundaryCondition>,
}

impl BoundarySetup {
    /// All external faces unassigned; tips zero Neumann.
    pub fn new(mdg: &MixedDimensionalGrid) -> Self {
        let bcs: Vec<BoundaryCondition> = mdg.subdomains.iter().map(BoundaryCondition::from_tags).collect();
        Self { mass: bcs.clone(), energy: bcs }
    }

    /// Sets every external face of subdomain `sd` satisfying `select(face_center, tag)`.
    pub fn assign(
        &mut self,
        mdg: &MixedDimensionalGrid,
        sd: usize,
        select: impl Fn([f64; 3], FaceTag) -> bool,
        mass: Option<(FaceKind, f64)>,
        energy: Option<(FaceKind, f64)>,
    ) -> usize {
        let g = &mdg.subdomains[sd];
        let mut count = 0;
        for f in 0..g.num_faces {
            let tag = g.boundary_tags[f];
            if !matches!(tag, FaceTag::External { .. }) || !select(g.face_centers[f], tag) {
                continue;
            }
            count += 1;
            if let Some((k, v)) = mass {
                self.mass[sd].kinds[f] = k;
                self.mass[sd].values[f] = v;
            }
            if let Some((k, v)) = energy {
                self.energy[sd].kinds[f] = k;
                self.energy[sd].values[f] = v;
            }
        }
        count
    }

    /// Every external face of every subdomain.
    pub fn uniform(mdg: &MixedDimensionalGrid, mass: (FaceKind, f64), energy: (FaceKind, f64)) -> Self {
        let mut s = Self::new(mdg);
        for sd in 0..mdg.num_subdomains() {
            s.assign(mdg, sd, |_, _| true, Some(mass), Some(energy));
        }
        s
    }

    pub fn validate(&self, energy: bool) -> Result<(), PhysicsError> {
        let sets: &[&Vec<BoundaryCondition>] = if energy { &[&self.mass, &self.energy] } else { &[&self.mass] };
        for set in sets {
            for (sd, bc) in set.iter().enumerate() {
                if let Some(face) = bc.kinds.iter().position(|k| *k == FaceKind::Unassigned) {
                    return Err(PhysicsError::MissingCondition { subdomain: sd, face });
                }
            }
        }
        Ok(())
    }
}

/// Integrated sources per global cell (kg/s and W).
#[derive(Clone, Debug, Default)]
pub struct Sources {
    pub mass: Vec<f64>,
    pub energy: Vec<f64>,
}

pub type BoundaryUpdate = Box<dyn Fn(f64, &MixedDimensionalGrid, &mut BoundarySetup) + Send + Sync>;
pub type SourceUpdate = Box<dyn Fn(f64, &MixedDimensionalGrid) -> Sources + Send + Sync>;

/// Global balance terms of one step: accumulation change rate, net boundary outflow, sources.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BalanceTerms {
    pub accumulation: f64,
    pub boundary_outflow: f64,
    pub source: f64,
    /// Largest absolute per-cell or per-face contribution entering the sums.
    pub scale: f64,
}

impl BalanceTerms {
    pub fn residual(&self) -> f64 {
        self.accumulation + self.boundary_outflow - self.source
    }

    /// Residual relative to the largest term (absolute when all terms vanish).
    pub fn relative(&self) -> f64 {
        let s = self.accumulation.abs().max(self.boundary_outflow.abs()).max(self.source.abs()).max(self.scale);
        if s > 0.0 {
            self.residual().abs() / s
        } else {
            self.residual().abs()
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ModelVariables {
    pub pressure: VariableId,
    pub temperature: Option<VariableId>,
    pub interface_darcy_flux: Option<VariableId>,
    pub interface_enthalpy_flux: Option<VariableId>,
    pub interface_heat_flux: Option<VariableId>,
}

struct Diagnostics {
    mass_accumulation: Operator,
    mass_bulk_flux: Operator,
    darcy_potential_flux: Operator,
    energy_accumulation: Option<Operator>,
    energy_bulk_flux: Option<Operator>,
}

/// Compressible single-phase flow, optionally coupled with heat transport, on a
/// mixed-dimensional grid.
pub struct FlowModel {
    pub mdg: MixedDimensionalGrid,
    pub projections: ProjectionSet,
    pub params: MaterialParams,
    pub properties: Properties,
    pub mortar: MortarGeometry,
    pub boundary: BoundarySetup,
    pub energy: bool,
    pub vars: ModelVariables,
    sys: EquationSystem,
    darcy: GlobalFlux,
    fourier: Option<GlobalFlux>,
    external_sign: Vec<f64>,
    boundary_cell: Vec<Option<usize>>,
    advective_mask: Vec<f64>,
    boundary_update: Option<BoundaryUpdate>,
    source_update: Option<SourceUpdate>,
    diagnostics: Diagnostics,
    time: f64,
}

fn stack_values(mdg: &MixedDimensionalGrid, bcs: &[BoundaryCondition], kind: FaceKind) -> Vec<f64> {
    let mut out = Vec::with_capacity(mdg.num_faces_total());
    for bc in bcs {
        out.extend(bc.kinds.iter().zip(&bc.values).map(|(k, v)| if *k == kind { *v } else { 0.0 }));
    }
    out
}

fn stack_kinds(bcs: &[BoundaryCondition]) -> Vec<FaceKind> {
    bcs.iter().flat_map(|b| b.kinds.iter().copied()).collect()
}

impl FlowModel {
    pub fn new(
        mdg: MixedDimensionalGrid,
        params: MaterialParams,
        overrides: PropertyOverrides,
        energy: bool,
        boundary: BoundarySetup,
    ) -> Result<Self, PhysicsError> {
        params.validate()?;
        boundary.validate(energy)?;
        let proj = build_projections(&mdg)?;
        let props = compute_properties(&mdg, &proj, &params, &overrides)?;
        let mortar = mortar_geometry(&mdg);
        let off = mdg.cell_offsets();
        let by_sd = |v: &[f64]| -> Vec<Vec<f64>> {
            mdg.subdomains.iter().enumerate().map(|(i, g)| v[off[i]..off[i] + g.num_cells].to_vec()).collect()
        };
        let nu_k: Vec<f64> = props.specific_volume.iter().zip(&props.permeability).map(|(a, b)| a * b).collect();
        let darcy = GlobalFlux::new(&mdg, &by_sd(&nu_k), &boundary.mass, params.gravity_m_s2)?;
        let fourier = if energy {
            let nu_kappa: Vec<f64> = props.specific_volume.iter().zip(&props.conductivity).map(|(a, b)| a * b).collect();
            Some(GlobalFlux::new(&mdg, &by_sd(&nu_kappa), &boundary.energy, [0.0; 3])?)
        } else {
            None
        };

        let mut external_sign = Vec::with_capacity(mdg.num_faces_total());
        let mut boundary_cell = Vec::with_capacity(mdg.num_faces_total());
        for (i, g) in mdg.subdomains.iter().enumerate() {
            for f in 0..g.num_faces {
                let inc = g.cells_of_face(f);
                let ext = inc.len() == 1 && matches!(g.boundary_tags[f], FaceTag::External { .. });
                external_sign.push(if ext { inc[0].1 } else { 0.0 });
                boundary_cell.push(if inc.len() == 1 { Some(off[i] + inc[0].0) } else { None });
            }
        }
        let advective_mask: Vec<f64> = stack_kinds(&boundary.energy)
            .iter()
            .map(|k| if matches!(k, FaceKind::Interior | FaceKind::Dirichlet) { 1.0 } else { 0.0 })
            .collect();

        let mut sys = EquationSystem::new(&mdg);
        let sd: Vec<GridRef> = (0..mdg.num_subdomains()).map(GridRef::Subdomain).collect();
        let intf: Vec<GridRef> = (0..mdg.interfaces.len()).map(GridRef::Interface).collect();
        let p = sys.register_variable(PRESSURE, &sd, 1)?;
        let t = if energy { Some(sys.register_variable(TEMPERATURE, &sd, 1)?) } else { None };
        let has_intf = !intf.is_empty();
        let lam = if has_intf { Some(sys.register_variable(INTERFACE_DARCY_FLUX, &intf, 1)?) } else { None };
        let (eta, q) = if energy && has_intf {
            (
                Some(sys.register_variable(INTERFACE_ENTHALPY_FLUX, &intf, 1)?),
                Some(sys.register_variable(INTERFACE_HEAT_FLUX, &intf, 1)?),
            )
        } else {
            (None, None)
        };
        let vars = ModelVariables {
            pressure: p,
            temperature: t,
            interface_darcy_flux: lam,
            interface_enthalpy_flux: eta,
            interface_heat_flux: q,
        };

        let mut model = Self {
            mdg,
            projections: proj,
            params,
            properties: props,
            mortar,
            boundary,
            energy,
            vars,
            sys,
            darcy,
            fourier,
            external_sign,
            boundary_cell,
            advective_mask,
            boundary_update: None,
            source_update: None,
            diagnostics: Diagnostics {
                mass_accumulation: Operator::scalar(0.0),
                mass_bulk_flux: Operator::scalar(0.0),
                darcy_potential_flux: Operator::scalar(0.0),
                energy_accumulation: None,
                energy_bulk_flux: None,
            },
            time: 0.0,
        };
        model.build_equations()?;
        model.update_step_parameters(1.0)?;
        let (nf, nc) = (model.mdg.num_faces_total(), model.mdg.num_cells_total());
        let sys = &mut model.sys;
        sys.set_parameter(param::UPWIND, Operand::Sparse(CsrMatrix::zeros(nf, nc)));
        for name in [param::BND_MOBILITY, param::BND_DENSITY, param::BND_ENTHALPY] {
            sys.set_parameter(name, Operand::Dense(vec![0.0; nf]));
        }
        model.apply_initial_conditions(None, None)?;
        Ok(model)
    }

    pub fn with_boundary_update(mut self, f: BoundaryUpdate) -> Self {
        self.boundary_update = Some(f);
        self
    }

    pub fn with_source_update(mut self, f: SourceUpdate) -> Self {
        self.source_update = Some(f);
        self
    }

    pub fn system(&self) -> &EquationSystem {
        &self.sys
    }

    pub fn system_mut(&mut self) -> &mut EquationSystem {
        &mut self.sys
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn darcy(&self) -> &GlobalFlux {
        &self.darcy
    }

    fn build_equations(&mut self) -> Result<(), PhysicsError> {
        let mdg = &self.mdg;
        let prm = &self.params;
        let props = &self.properties;
        let v = self.vars;
        let p = self.sys.var(v.pressure);
        let t = v.temperature.map(|t| self.sys.var(t));
        let sparse = |m: &CsrMatrix| Operator::sparse(m.clone());

        let inv_dt = Operator::parameter(param::INVERSE_DT);
        let upwind = Operator::parameter(param::UPWIND);
        let rho = fluid_density(&p, t.as_ref(), prm);
        let mu = fluid_viscosity(t.as_ref(), prm);
        let inv_mu = 1.0 / &mu;
        let mobility = &rho * &inv_mu;
        // Without a temperature variable the viscosity is a single scalar.
        let vogel = t.is_some() && matches!(prm.fluid.viscosity, super::params::ViscosityModel::Vogel { .. });

        let cell_measure: Vec<f64> = mdg
            .subdomains
            .iter()
            .flat_map(|g| g.cell_volumes.iter().copied())
            .zip(&props.specific_volume)
            .map(|(vol, nu)| vol * nu)
            .collect();
        let mass_weight: Vec<f64> = cell_measure.iter().zip(&props.porosity).map(|(m, phi)| m * phi).collect();
        let mass_acc = &inv_dt * Operator::dense(mass_weight) * (&rho - rho.previous_timestep());

        let mob_face = mobility.left_mul(&upwind) + Operator::parameter(param::BND_MOBILITY);
        let mut potential = p.left_mul(&sparse(&self.darcy.flux_map))
            + Operator::parameter(param::DIRICHLET_P).left_mul(&sparse(&self.darcy.dirichlet_bound));
        if prm.gravity_m_s2.iter().any(|&g| g != 0.0) {
            let rho_face = rho.left_mul(&upwind) + Operator::parameter(param::BND_DENSITY);
            potential = potential + Operator::dense(self.darcy.gravity.clone()) * rho_face;
        }
        let bulk_flux =
            &mob_face * &potential + Operator::parameter(param::NEUMANN_MASS).left_mul(&sparse(&self.darcy.neumann_bound));
        let div = sparse(&self.darcy.divergence);

        let area = Operator::dense(self.mortar.area.clone());
        let nu_j = Operator::dense(props.mortar_specific_volume.clone());
        let mortar_to_face = sparse(&self.mortar.mortar_to_face);
        let pi_int = sparse(&self.projections.mortar_to_secondary_int);
        let xi_lower = sparse(&self.projections.secondary_cell_to_mortar);
        let iu = Operator::parameter(param::INTERFACE_UPWIND);

        let mut mass = mass_acc.clone() + bulk_flux.left_mul(&div) - Operator::parameter(param::MASS_SOURCE);
        let lam = v.interface_darcy_flux.map(|l| self.sys.var(l));
        let mut interface_eqs = Vec::new();
        let mut rho_j = None;
        if let Some(lam) = &lam {
            let rj = rho.left_mul(&iu);
            let mortar_mass = &nu_j * &rj * lam;
            mass = mass + mortar_mass.left_mul(&mortar_to_face).left_mul(&div) - (&area * &mortar_mass).left_mul(&pi_int);
            let inv_mu_j = if vogel { inv_mu.left_mul(&iu) } else { inv_mu.clone() };
            let darcy_law = interface_darcy_map(
                mdg,
                &self.projections,
                &props.aperture,
                &props.normal_permeability,
                prm.gravity_m_s2,
            )?;
            let tpfa: Vec<_> = self.darcy.per_subdomain.iter().cloned().map(Some).collect();
            let mut tr = trace_reconstruction(mdg, &self.projections, &tpfa)?;
            // Mortar fluxes carry the higher-side specific volume on the face.
            for (r, nu) in tr.resistance.iter_mut().zip(&props.mortar_specific_volume) {
                *r *= nu;
            }
            let mu_h = if vogel { mu.left_mul(&sparse(&self.projections.primary_cell_to_mortar)) } else { mu.clone() };
            let trace = tr.trace(&p, lam, Some(&mu_h));
            let lower = p.left_mul(&xi_lower);
            let law = darcy_law.flux(&lower, &trace, Some(&inv_mu_j), Some(&rj));
            interface_eqs.push((INTERFACE_DARCY_FLUX, &area * (lam - law)));
            rho_j = Some(rj);
        }
        self.sys.set_equation(MASS_BALANCE, mass.with_label(MASS_BALANCE));

        let mut energy_acc = None;
        let mut energy_flux = None;
        if let (Some(t), Some(fourier)) = (&t, &self.fourier) {
            let e = enthalpy_and_internal_energy(&p, t, &rho, prm);
            let phi = Operator::dense(props.porosity.clone());
            let rho_s = prm.solid.density_kg_m3;
            let fluid_part = &rho * &e.fluid_internal_energy;
            let energy_density = effective_quantity(&phi, &fluid_part, &(rho_s * &e.solid_internal_energy));
            let acc = &inv_dt
                * Operator::dense(cell_measure.clone())
                * (&energy_density - energy_density.previous_timestep());
            let h_face = e.fluid_enthalpy.left_mul(&upwind) + Operator::parameter(param::BND_ENTHALPY);
            let advective = Operator::dense(self.advective_mask.clone()) * h_face * &bulk_flux;
            let conductive = t.left_mul(&sparse(&fourier.flux_map))
                + Operator::parameter(param::DIRICHLET_T).left_mul(&sparse(&fourier.dirichlet_bound))
                + Operator::parameter(param::NEUMANN_ENERGY).left_mul(&sparse(&fourier.neumann_bound));
            let bulk = advective + conductive;
            let mut energy = acc.clone() + bulk.left_mul(&div) - Operator::parameter(param::ENERGY_SOURCE);
            if let (Some(lam), Some(eta_id), Some(q_id), Some(rj)) =
                (&lam, v.interface_enthalpy_flux, v.interface_heat_flux, &rho_j)
            {
                let eta = self.sys.var(eta_id);
                let q = self.sys.var(q_id);
                let total = &nu_j * (&eta + &q);
                energy = energy + total.left_mul(&mortar_to_face).left_mul(&div) - (&area * &total).left_mul(&pi_int);
                let h_j = e.fluid_enthalpy.left_mul(&iu);
                interface_eqs.push((INTERFACE_ENTHALPY_FLUX, &area * (&eta - h_j * rj * lam)));
                let law = interface_fourier_map(mdg, &self.projections, &props.aperture, &props.normal_conductivity)?;
                let tpfa: Vec<_> = fourier.per_subdomain.iter().cloned().map(Some).collect();
                let mut tr = trace_reconstruction(mdg, &self.projections, &tpfa)?;
                for (r, nu) in tr.resistance.iter_mut().zip(&props.mortar_specific_volume) {
                    *r *= nu;
                }
                let trace = tr.trace(t, &q, None);
                let flux = law.flux(&t.left_mul(&xi_lower), &trace, None, None);
                interface_eqs.push((INTERFACE_HEAT_FLUX, &area * (&q - flux)));
            }
            self.sys.set_equation(ENERGY_BALANCE, energy.with_label(ENERGY_BALANCE));
            energy_acc = Some(acc);
            energy_flux = Some(bulk);
        }
        for (name, eq) in interface_eqs {
            self.sys.set_equation(name, eq.with_label(name));
        }
        self.diagnostics = Diagnostics {
            mass_accumulation: mass_acc,
            mass_bulk_flux: bulk_flux,
            darcy_potential_flux: potential,
            energy_accumulation: energy_acc,
            energy_bulk_flux: energy_flux,
        };
        Ok(())
    }

    /// Sets initial pressure and temperature (reference values when `None`); interface
    /// variables start at zero. The state is copied to the previous-timestep slot.
    pub fn apply_initial_conditions(&mut self, p: Option<&[f64]>, t: Option<&[f64]>) -> Result<(), PhysicsError> {
        let nc = self.mdg.num_cells_total();
        let p0 = vec![self.params.reference_pressure_pa; nc];
        self.sys.set_values(self.vars.pressure, p.unwrap_or(&p0))?;
        if let Some(tv) = self.vars.temperature {
            let t0 = vec![self.params.reference_temperature_k; nc];
            self.sys.set_values(tv, t.unwrap_or(&t0))?;
        }
        for v in [self.vars.interface_darcy_flux, self.vars.interface_enthalpy_flux, self.vars.interface_heat_flux]
            .into_iter()
            .flatten()
        {
            let n = self.sys.variable_info(v).size;
            self.sys.set_values(v, &vec![0.0; n])?;
        }
        self.sys.shift_time();
        self.refresh_lagged()
    }

    /// Refreshes boundary values and sources for a step ending at `time`.
    pub fn prepare_step(&mut self, time: f64, dt: f64) -> Result<(), PhysicsError> {
        if let Some(f) = &self.boundary_update {
            f(time, &self.mdg, &mut self.boundary);
        }
        self.time = time;
        self.update_step_parameters(dt)
    }

    fn update_step_parameters(&mut self, dt: f64) -> Result<(), PhysicsError> {
        if !(dt > 0.0) {
            return Err(PhysicsError::InvalidParameter(format!("time step must be positive, got {dt}")));
        }
        let mdg = &self.mdg;
        let sys = &mut self.sys;
        sys.set_parameter(param::INVERSE_DT, Operand::Scalar(1.0 / dt));
        sys.set_parameter(param::DIRICHLET_P, Operand::Dense(stack_values(mdg, &self.boundary.mass, FaceKind::Dirichlet)));
        sys.set_parameter(param::NEUMANN_MASS, Operand::Dense(stack_values(mdg, &self.boundary.mass, FaceKind::Neumann)));
        sys.set_parameter(param::DIRICHLET_T, Operand::Dense(stack_values(mdg, &self.boundary.energy, FaceKind::Dirichlet)));
        sys.set_parameter(
            param::NEUMANN_ENERGY,
            Operand::Dense(stack_values(mdg, &self.boundary.energy, FaceKind::Neumann)),
        );
        let nc = mdg.num_cells_total();
        let sources = match &self.source_update {
            Some(f) => f(self.time, mdg),
            None => Sources::default(),
        };
        let fill = |v: Vec<f64>| if v.is_empty() { vec![0.0; nc] } else { v };
        let (ms, es) = (fill(sources.mass), fill(sources.energy));
        if ms.len() != nc || es.len() != nc {
            return Err(PhysicsError::InvalidParameter(format!("sources must have {nc} entries")));
        }
        sys.set_parameter(param::MASS_SOURCE, Operand::Dense(ms));
        sys.set_parameter(param::ENERGY_SOURCE, Operand::Dense(es));
        Ok(())
    }

    /// Current cell pressures and temperatures.
    pub fn cell_fields(&self) -> (Vec<f64>, Vec<f64>) {
        let p = self.sys.values_of(self.vars.pressure).to_vec();
        let t = match self.vars.temperature {
            Some(t) => self.sys.values_of(t).to_vec(),
            None => vec![self.params.reference_temperature_k; p.len()],
        };
        (p, t)
    }

    /// Recomputes lagged upwind directions and boundary upstream values from the current state.
    pub fn refresh_lagged(&mut self) -> Result<(), PhysicsError> {
        let (p, t) = self.cell_fields();
        check_vogel_range(&t, &self.params)?;
        let prm = &self.params;
        let nf = self.mdg.num_faces_total();
        let p_kinds = stack_kinds(&self.boundary.mass);
        let p_b = stack_values(&self.mdg, &self.boundary.mass, FaceKind::Dirichlet);
        let t_kinds = stack_kinds(&self.boundary.energy);
        let t_dir = stack_values(&self.mdg, &self.boundary.energy, FaceKind::Dirichlet);
        let neumann = stack_values(&self.mdg, &self.boundary.mass, FaceKind::Neumann);
        let mut direction = self.sys.evaluate_values(&self.diagnostics.darcy_potential_flux)?;
        for (d, b) in direction.iter_mut().zip(self.darcy.neumann_bound.matvec(&neumann)) {
            *d += b;
        }
        let up = global_upwind(&self.mdg, &direction, &self.boundary.mass);
        let mut bnd_mob = vec![0.0; nf];
        let mut bnd_rho = vec![0.0; nf];
        let mut bnd_h = vec![0.0; nf];
        for f in 0..nf {
            if up.boundary_inflow[f] == 0.0 {
                continue;
            }
            let t_b = if self.energy && t_kinds[f] == FaceKind::Dirichlet { t_dir[f] } else { prm.reference_temperature_k };
            let p_f = match (p_kinds[f], self.boundary_cell[f]) {
                (FaceKind::Dirichlet, _) => p_b[f],
                (_, Some(c)) => p[c],
                _ => prm.reference_pressure_pa,
            };
            let rho_b = fluid_density_value(p_f, t_b, prm);
            bnd_rho[f] = rho_b;
            bnd_mob[f] = rho_b / fluid_viscosity_value(t_b, prm)?;
            bnd_h[f] = fluid_enthalpy_value(t_b, prm);
        }
        let sys = &mut self.sys;
        sys.set_parameter(param::UPWIND, Operand::Sparse(up.face_value_map));
        sys.set_parameter(param::BND_MOBILITY, Operand::Dense(bnd_mob));
        sys.set_parameter(param::BND_DENSITY, Operand::Dense(bnd_rho));
        sys.set_parameter(param::BND_ENTHALPY, Operand::Dense(bnd_h));
        let lam = match self.vars.interface_darcy_flux {
            Some(l) => sys.values_of(l).to_vec(),
            None => Vec::new(),
        };
        sys.set_parameter(param::INTERFACE_UPWIND, Operand::Sparse(interface_upwind(&self.projections, &lam).selection()));
        Ok(())
    }

    /// Mass balance terms of the current state relative to the previous timestep.
    pub fn mass_balance_terms(&self) -> Result<BalanceTerms, PhysicsError> {
        self.balance_terms(&self.diagnostics.mass_accumulation, &self.diagnostics.mass_bulk_flux, param::MASS_SOURCE)
    }

    pub fn energy_balance_terms(&self) -> Result<Option<BalanceTerms>, PhysicsError> {
        match (&self.diagnostics.energy_accumulation, &self.diagnostics.energy_bulk_flux) {
            (Some(a), Some(f)) => Ok(Some(self.balance_terms(a, f, param::ENERGY_SOURCE)?)),
            _ => Ok(None),
        }
    }

    fn balance_terms(&self, acc: &Operator, flux: &Operator, source: &str) -> Result<BalanceTerms, PhysicsError> {
        let a = self.sys.evaluate_values(acc)?;
        let f = self.sys.evaluate_values(flux)?;
        let s = self.sys.parameter(source).map(|o| o.values()).transpose()?.unwrap_or_default();
        let out: Vec<f64> = f.iter().zip(&self.external_sign).map(|(x, s)| x * s).collect();
        let max_abs = |v: &[f64]| v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        Ok(BalanceTerms {
            accumulation: a.iter().sum(),
            boundary_outflow: out.iter().sum(),
            source: s.iter().sum(),
            scale: max_abs(&a).max(max_abs(&out)).max(max_abs(&s)),
        })
    }

    /// Volumetric Darcy flux on every face (along the face normal, integrated over the
    /// face, including the specific volume), from the current state.
    pub fn face_darcy_flux(&self) -> Result<Vec<f64>, PhysicsError> {
        let pot = self.sys.evaluate_values(&self.diagnostics.darcy_potential_flux)?;
        let (_, t) = self.cell_fields();
        let up = self.sys.parameter(param::UPWIND).cloned();
        let mu: Vec<f64> = t.iter().map(|&tc| fluid_viscosity_value(tc, &self.params)).collect::<Result<_, _>>()?;
        let mu_face = match up {
            Some(Operand::Sparse(u)) => u.matvec(&mu),
            _ => vec![0.0; pot.len()],
        };
        let mu_ref = fluid_viscosity_value(self.params.reference_temperature_k, &self.params)?;
        Ok(pot.iter().zip(&mu_face).map(|(v, m)| v / if *m > 0.0 { *m } else { mu_ref }).collect())
    }

    /// Global face index offset of each subdomain.
    pub fn face_offsets(&self) -> Vec<usize> {
        self.mdg.face_offsets()
    }
}

impl Model for FlowModel {
    fn system(&self) -> &EquationSystem {
        &self.sys
    }

    fn system_mut(&mut self) -> &mut EquationSystem {
        &mut self.sys
    }

    fn before_step(&mut self, time: f64, dt: f64) -> Result<(), SolverError> {
        self.prepare_step(time, dt).map_err(SolverError::from)
    }

    fn before_iteration(&mut self) -> Result<(), SolverError> {
        self.refresh_lagged().map_err(SolverError::from)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_mdg, FractureSpec, GeometrySpec};
    use crate::solver::{assemble, time_loop, SolverConfig};

    fn fractured_2d(n: usize) -> MixedDimensionalGrid {
        let mut spec = GeometrySpec::unit_box(2, n);
        spec.extent_m = vec![10.0, 10.0];
        build_mdg(
            &spec
                .with_fracture(FractureSpec { fixed_axis: 0, fixed_value_m: 5.0, extents_m: vec![[2.5, 10.0]] })
                .with_fracture(FractureSpec { fixed_axis: 1, fixed_value_m: 5.0, extents_m: vec![[0.0, 7.5]] }),
        )
        .unwrap()
    }

    fn gradient_model(energy: bool) -> FlowModel {
        let mdg = fractured_2d(4);
        let params = MaterialParams::table();
        let (p0, t0) = (params.reference_pressure_pa, params.reference_temperature_k);
        let mut bc = BoundarySetup::new(&mdg);
        for sd in 0..mdg.num_subdomains() {
            bc.assign(&mdg, sd, |_, _| true, Some((FaceKind::Neumann, 0.0)), Some((FaceKind::Neumann, 0.0)));
            bc.assign(
                &mdg,
                sd,
                |x, _| x[0] < 1e-9,
                Some((FaceKind::Dirichlet, p0 + 4e5)),
                Some((FaceKind::Dirichlet, t0 - 10.0)),
            );
            bc.assign(&mdg, sd, |x, _| x[0] > 10.0 - 1e-9, Some((FaceKind::Dirichlet, p0)), Some((FaceKind::Dirichlet, t0)));
        }
        FlowModel::new(mdg, params, PropertyOverrides::default(), energy, bc).unwrap()
    }

    #[test]
    fn equilibrium_is_fixed_point() {
        let mdg = fractured_2d(4);
        let params = MaterialParams::table();
        let bc = BoundarySetup::uniform(
            &mdg,
            (FaceKind::Dirichlet, params.reference_pressure_pa),
            (FaceKind::Dirichlet, params.reference_temperature_k),
        );
        let mut m = FlowModel::new(mdg, params, PropertyOverrides::default(), true, bc).unwrap();
        m.prepare_step(1.0, 1.0).unwrap();
        let r = assemble(m.system()).unwrap().residual;
        assert!(r.iter().all(|v| v.abs() < 1e-10), "{:?}", r.iter().fold(0.0_f64, |a, b| a.max(b.abs())));
        let (report, res) = time_loop(&mut m, &SolverConfig::uniform(1e5, 3e5), 0.0, |_, _| Ok(()));
        res.unwrap();
        assert!(report.steps.iter().all(|s| s.iterations == 1));
    }

    #[test]
    fn unassigned_face_is_rejected() {
        let mdg = fractured_2d(4);
        let bc = BoundarySetup::new(&mdg);
        let err = FlowModel::new(mdg, MaterialParams::table(), PropertyOverrides::default(), false, bc).err().unwrap();
        assert!(matches!(err, PhysicsError::MissingCondition { .. }));
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let mut m = gradient_model(true);
        let n = m.system().num_dofs();
        let mut state = m.system().state().to_vec();
        for (i, v) in state.iter_mut().enumerate() {
            *v *= 1.0 + 1e-3 * ((i as f64) * 1.3).sin();
        }
        m.system_mut().set_state(&state).unwrap();
        m.system_mut().shift_time();
        m.prepare_step(1e5, 1e5).unwrap();
        m.refresh_lagged().unwrap();
        let ls = assemble(m.system()).unwrap();
        let jd = ls.jacobian.to_dense();
        for j in 0..n {
            let h = 1e-6 * state[j].abs().max(1.0);
            let mut sp = state.clone();
            sp[j] += h;
            m.system_mut().set_state(&sp).unwrap();
            let rp = m.system().assemble_residual().unwrap();
            sp[j] -= 2.0 * h;
            m.system_mut().set_state(&sp).unwrap();
            let rm = m.system().assemble_residual().unwrap();
            for i in 0..n {
                let fd = (rp[i] - rm[i]) / (2.0 * h);
                let scale = jd[i].iter().fold(0.0_f64, |a, b| a.max(b.abs()));
                assert!((fd - jd[i][j]).abs() <= 1e-5 * scale + 1e-12, "entry ({i},{j}): fd {fd}, ad {}", jd[i][j]);
            }
        }
    }

    #[test]
    fn steps_conserve_mass_and_energy() {
        let mut m = gradient_model(true);
        let cfg = SolverConfig::uniform(1e6, 5e6);
        let mut checked = 0;
        let (_, res) = time_loop(&mut m, &cfg, 0.0, |model, _| {
            let mb = model.mass_balance_terms().unwrap();
            let eb = model.energy_balance_terms().unwrap().unwrap();
            assert!(mb.relative() < 1e-8, "{mb:?}");
            assert!(eb.relative() < 1e-8, "{eb:?}");
            assert!(mb.accumulation.abs() > 0.0);
            checked += 1;
            Ok(())
        });
        res.unwrap();
        assert_eq!(checked, 5);
    }

    #[test]
    fn mass_only_model_with_vogel_viscosity_steps() {
        let mut m = gradient_model(false);
        assert!(m.vars.temperature.is_none());
        let mut cfg = SolverConfig::uniform(1e6, 3e6);
        // Mass residuals in kg/s bottom out near 1e-10 from fracture flux round-off.
        cfg.newton_abs_tol = 1e-8;
        let (_, res) = time_loop(&mut m, &cfg, 0.0, |model, _| {
            assert!(model.mass_balance_terms().unwrap().relative() < 1e-8);
            Ok(())
        });
        res.unwrap();
        let (p, _) = m.cell_fields();
        assert!(p.iter().any(|&v| v > m.params.reference_pressure_pa + 1e3));
    }
}
