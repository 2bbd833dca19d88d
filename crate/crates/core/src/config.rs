//! Declarative scenario description read from TOML.
//!
//! Field names carry their units. Values under `[units]` are the SI size of one
//! input unit of length, time and pressure; they scale geometry, times, Dirichlet
//! pressures and the initial pressure on load. Material parameters and Neumann
//! fluxes are always SI.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::discretization::FaceKind;
use crate::geometry::{FaceTag, GeometrySpec, MixedDimensionalGrid};
use crate::physics::{BoundarySetup, MaterialParams, PropertyOverrides};
use crate::solver::SolverConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
}

impl ConfigError {
    fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Invalid { field: field.into(), message: message.into() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubdomainSelector {
    Matrix,
    /// Every lower-dimensional subdomain (fractures and intersections).
    Fractures,
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    XMin,
    XMax,
    YMin,
    YMax,
    ZMin,
    ZMax,
    All,
}

impl Side {
    /// `(axis, upper)` of a single side, `None` for `All`.
    pub fn axis(self) -> Option<(usize, bool)> {
        match self {
            Side::XMin => Some((0, false)),
            Side::XMax => Some((0, true)),
            Side::YMin => Some((1, false)),
            Side::YMax => Some((1, true)),
            Side::ZMin => Some((2, false)),
            Side::ZMax => Some((2, true)),
            Side::All => None,
        }
    }

    fn matches(self, tag: FaceTag) -> bool {
        match (self.axis(), tag) {
            (None, FaceTag::External { .. }) => true,
            (Some((a, u)), FaceTag::External { axis, upper }) => a == axis && u == upper,
            _ => false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionKind {
    Dirichlet,
    /// Outward flux per unit face area.
    Neumann,
}

impl From<ConditionKind> for FaceKind {
    fn from(k: ConditionKind) -> Self {
        match k {
            ConditionKind::Dirichlet => FaceKind::Dirichlet,
            ConditionKind::Neumann => FaceKind::Neumann,
        }
    }
}

/// A boundary value with optional step changes `[time_s, value]`. A step applies to
/// every time step ending strictly after its time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionSpec {
    pub kind: ConditionKind,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub steps: Vec<[f64; 2]>,
}

impl ConditionSpec {
    pub fn value_at(&self, time: f64) -> f64 {
        self.steps.iter().take_while(|s| s[0] < time).last().map_or(self.value, |s| s[1])
    }

    fn validate(&self, field: &str) -> Result<(), ConfigError> {
        if !self.value.is_finite() || self.steps.iter().any(|s| !s[0].is_finite() || !s[1].is_finite()) {
            return Err(ConfigError::invalid(field, "values must be finite"));
        }
        if self.steps.windows(2).any(|w| !(w[1][0] > w[0][0])) {
            return Err(ConfigError::invalid(format!("{field}.steps"), "step times must be strictly increasing"));
        }
        Ok(())
    }

    fn scaled(&self, time: f64, value: f64) -> Self {
        Self {
            kind: self.kind,
            value: self.value * value,
            steps: self.steps.iter().map(|s| [s[0] * time, s[1] * value]).collect(),
        }
    }
}

/// Conditions for the external faces on one side of a set of subdomains. Rules are
/// applied in order, later rules overriding earlier ones.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryRule {
    #[serde(default = "default_selector")]
    pub subdomains: SubdomainSelector,
    pub side: Side,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass: Option<ConditionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy: Option<ConditionSpec>,
}

fn default_selector() -> SubdomainSelector {
    SubdomainSelector::All
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    /// Uniform initial pressure; the reference pressure when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pressure_pa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature_k: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    /// Whitespace-separated cell table.
    Columns,
    /// Whitespace-separated mortar cell table.
    Interfaces,
    /// Legacy ASCII unstructured grid.
    Vtk,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub directory: PathBuf,
    /// Export every n-th accepted step; the initial and final states are always written.
    pub every_n_steps: usize,
    pub formats: Vec<OutputFormat>,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("output"),
            every_n_steps: 1,
            formats: vec![OutputFormat::Columns, OutputFormat::Interfaces, OutputFormat::Vtk],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UnitScaling {
    pub length_m: f64,
    pub time_s: f64,
    pub pressure_pa: f64,
}

impl Default for UnitScaling {
    fn default() -> Self {
        Self { length_m: 1.0, time_s: 1.0, pressure_pa: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Solve the energy balance together with the mass balance.
    #[serde(default = "default_true")]
    pub energy: bool,
    #[serde(default)]
    pub units: UnitScaling,
    pub geometry: GeometrySpec,
    #[serde(default)]
    pub materials: MaterialParams,
    #[serde(default)]
    pub properties: PropertyOverrides,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default)]
    pub boundary: Vec<BoundaryRule>,
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_true() -> bool {
    true
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.len(), |i| before.len() - i - 1) + 1;
    (line, column)
}

impl ScenarioConfig {
    /// Parses and validates a configuration.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map_or((0, 0), |s| line_column(text, s.start));
            ConfigError::Parse { line, column, message: e.message().trim().to_string() }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let dim = self.geometry.ambient_dim;
        if dim != 2 && dim != 3 {
            return Err(ConfigError::invalid("geometry.ambient_dim", format!("must be 2 or 3, got {dim}")));
        }
        let u = &self.units;
        for (name, v) in [("units.length_m", u.length_m), ("units.time_s", u.time_s), ("units.pressure_pa", u.pressure_pa)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConfigError::invalid(name, format!("must be positive, got {v}")));
            }
        }
        self.materials.validate().map_err(|e| ConfigError::invalid("materials", e.to_string()))?;
        self.solver.validate().map_err(|e| ConfigError::invalid("solver", e.to_string()))?;
        if self.output.every_n_steps == 0 {
            return Err(ConfigError::invalid("output.every_n_steps", "must be at least 1"));
        }
        if self.boundary.is_empty() {
            return Err(ConfigError::invalid("boundary", "at least one rule is required"));
        }
        for (i, rule) in self.boundary.iter().enumerate() {
            let field = format!("boundary[{i}]");
            if let Some((axis, _)) = rule.side.axis() {
                if axis >= dim {
                    return Err(ConfigError::invalid(
                        format!("{field}.side"),
                        format!("side {:?} does not exist in {dim}D", rule.side),
                    ));
                }
            }
            if rule.mass.is_none() && rule.energy.is_none() {
                return Err(ConfigError::invalid(field, "neither mass nor energy condition given"));
            }
            if let Some(m) = &rule.mass {
                m.validate(&format!("{field}.mass"))?;
            }
            if let Some(e) = &rule.energy {
                e.validate(&format!("{field}.energy"))?;
            }
        }
        Ok(())
    }

    /// The same scenario with every scaled quantity converted to SI and unit factors reset.
    pub fn to_si(&self) -> Self {
        let u = self.units;
        let mut c = self.clone();
        c.units = UnitScaling::default();
        c.geometry.extent_m.iter_mut().for_each(|l| *l *= u.length_m);
        for f in &mut c.geometry.fractures {
            f.fixed_value_m *= u.length_m;
            f.extents_m.iter_mut().flatten().for_each(|l| *l *= u.length_m);
        }
        c.properties.aperture_m = c.properties.aperture_m.map(|a| a * u.length_m);
        c.initial.pressure_pa = c.initial.pressure_pa.map(|p| p * u.pressure_pa);
        for rule in &mut c.boundary {
            if let Some(m) = &mut rule.mass {
                let p = if m.kind == ConditionKind::Dirichlet { u.pressure_pa } else { 1.0 };
                *m = m.scaled(u.time_s, p);
            }
            if let Some(e) = &mut rule.energy {
                *e = e.scaled(u.time_s, 1.0);
            }
        }
        let s = &mut c.solver;
        s.dt_s = s.dt_s.map(|d| d * u.time_s);
        s.t_end_s *= u.time_s;
        if let Some(sched) = &mut s.schedule_s {
            sched.iter_mut().for_each(|t| *t *= u.time_s);
        }
        c
    }

    /// Boundary conditions valid for a step ending at `time`. Every external face
    /// must be covered (energy faces only when the energy balance is active), and
    /// every rule must select at least one face.
    pub fn boundary_setup(&self, mdg: &MixedDimensionalGrid, time: f64) -> Result<BoundarySetup, ConfigError> {
        let mut bc = BoundarySetup::new(mdg);
        let n = apply_rules(&self.boundary, mdg, time, &mut bc);
        if let Some(i) = n.iter().position(|&k| k == 0) {
            return Err(ConfigError::invalid(format!("boundary[{i}]"), "selects no external face"));
        }
        let check = |set: &[crate::discretization::BoundaryCondition], what: &str| {
            for (sd, b) in set.iter().enumerate() {
                if let Some(f) = b.kinds.iter().position(|k| *k == FaceKind::Unassigned) {
                    let x = mdg.subdomains[sd].face_centers[f];
                    return Err(ConfigError::invalid(
                        "boundary",
                        format!("no {what} condition for face {f} of subdomain {sd} at {x:?}"),
                    ));
                }
            }
            Ok(())
        };
        check(&bc.mass, "mass")?;
        if self.energy {
            check(&bc.energy, "energy")?;
        }
        Ok(bc)
    }
}

/// Applies `rules` at `time`, returning the number of faces each rule selected.
pub fn apply_rules(rules: &[BoundaryRule], mdg: &MixedDimensionalGrid, time: f64, bc: &mut BoundarySetup) -> Vec<usize> {
    rules
        .iter()
        .map(|rule| {
            let mut count = 0;
            for (sd, g) in mdg.subdomains.iter().enumerate() {
                let selected = match rule.subdomains {
                    SubdomainSelector::Matrix => g.dim == mdg.ambient_dim,
                    SubdomainSelector::Fractures => g.dim < mdg.ambient_dim,
                    SubdomainSelector::All => true,
                };
                if !selected {
                    continue;
                }
                let side = rule.side;
                let at = |c: &Option<ConditionSpec>| c.as_ref().map(|c| (FaceKind::from(c.kind), c.value_at(time)));
                count += bc.assign(mdg, sd, |_, tag| side.matches(tag), at(&rule.mass), at(&rule.energy));
            }
            count
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
energy = false

[geometry]
ambient_dim = 2
extent_m = [1.0, 1.0]
cells = [2, 2]

[[boundary]]
side = "all"
mass = { kind = "neumann", value = 0.0 }

[solver]
dt_s = 1.0
t_end_s = 2.0
"#;

    #[test]
    fn minimal_config_takes_table_defaults() {
        let c = ScenarioConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.materials, MaterialParams::table());
        assert_eq!(c.output, OutputSpec::default());
        assert!(!c.energy);
    }

    #[test]
    fn partial_materials_keep_other_defaults() {
        let text = MINIMAL.replace("[solver]", "[materials.solid]\npermeability_m2 = 1e-12\n\n[solver]");
        let c = ScenarioConfig::parse(&text).unwrap();
        assert_eq!(c.materials.solid.permeability_m2, 1e-12);
        assert_eq!(c.materials.solid.porosity, MaterialParams::table().solid.porosity);
        assert_eq!(c.materials.fluid, MaterialParams::table().fluid);
    }

    #[test]
    fn unknown_field_reports_name_and_line() {
        let text = MINIMAL.replace("t_end_s = 2.0", "t_end_s = 2.0\nnewton_tolerance = 1e-8");
        match ScenarioConfig::parse(&text).unwrap_err() {
            ConfigError::Parse { line, message, .. } => {
                assert!(message.contains("newton_tolerance"), "{message}");
                assert_eq!(line, text.lines().position(|l| l.starts_with("newton_tolerance")).unwrap() + 1);
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn missing_field_is_named() {
        let text = MINIMAL.replace("t_end_s = 2.0", "");
        let e = ScenarioConfig::parse(&text).unwrap_err().to_string();
        assert!(e.contains("t_end_s"), "{e}");
    }

    #[test]
    fn side_must_exist() {
        let text = MINIMAL.replace("side = \"all\"", "side = \"z_max\"");
        match ScenarioConfig::parse(&text).unwrap_err() {
            ConfigError::Invalid { field, .. } => assert_eq!(field, "boundary[0].side"),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn step_times_must_increase() {
        let text = MINIMAL.replace("value = 0.0 }", "value = 0.0, steps = [[2.0, 1.0], [1.0, 0.0]] }");
        match ScenarioConfig::parse(&text).unwrap_err() {
            ConfigError::Invalid { field, .. } => assert_eq!(field, "boundary[0].mass.steps"),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn steps_apply_strictly_after_their_time() {
        let c = ConditionSpec { kind: ConditionKind::Dirichlet, value: 1.0, steps: vec![[10.0, 5.0], [20.0, 7.0]] };
        assert_eq!(c.value_at(10.0), 1.0);
        assert_eq!(c.value_at(10.5), 5.0);
        assert_eq!(c.value_at(20.0), 5.0);
        assert_eq!(c.value_at(1e9), 7.0);
    }

    #[test]
    fn unit_scaling_converts_to_si() {
        let text = MINIMAL.replace("energy = false", "energy = false\n[units]\nlength_m = 10.0\ntime_s = 60.0");
        let c = ScenarioConfig::parse(&text).unwrap().to_si();
        assert_eq!(c.geometry.extent_m, vec![10.0, 10.0]);
        assert_eq!(c.solver.t_end_s, 120.0);
        assert_eq!(c.units, UnitScaling::default());
    }

    #[test]
    fn uncovered_face_is_reported() {
        let text = MINIMAL.replace("side = \"all\"", "side = \"x_min\"");
        let c = ScenarioConfig::parse(&text).unwrap();
        let mdg = crate::geometry::build_mdg(&c.geometry).unwrap();
        match c.boundary_setup(&mdg, 1.0).unwrap_err() {
            ConfigError::Invalid { field, .. } => assert_eq!(field, "boundary"),
            e => panic!("{e}"),
        }
    }
}
