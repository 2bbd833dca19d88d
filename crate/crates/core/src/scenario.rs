//! Building and running a flow model from a [`ScenarioConfig`].

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::config::{apply_rules, ConfigError, ScenarioConfig};
use crate::export::{write_snapshot, FieldSnapshot};
use crate::geometry::build_mdg;
use crate::physics::FlowModel;
use crate::solver::{time_loop, SolveReport, SolverError, StepReport};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("solver failed: {0}")]
    Solver(SolverError),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl RunError {
    /// Process exit code: 1 for configuration errors, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 1,
            _ => 2,
        }
    }
}

/// A configured model, ready to be stepped.
pub struct Scenario {
    /// The configuration converted to SI units.
    pub config: ScenarioConfig,
    pub model: FlowModel,
}

/// Result of a completed (or aborted) run.
#[derive(Debug)]
pub struct RunOutcome {
    pub report: SolveReport,
    pub files: Vec<PathBuf>,
}

impl Scenario {
    pub fn build(config: &ScenarioConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let config = config.to_si();
        let mdg = build_mdg(&config.geometry).map_err(|e| ConfigError::Invalid {
            field: "geometry".into(),
            message: e.to_string(),
        })?;
        let boundary = config.boundary_setup(&mdg, 0.0)?;
        let rules = config.boundary.clone();
        let update = move |t: f64, mdg: &crate::geometry::MixedDimensionalGrid, bc: &mut crate::physics::BoundarySetup| {
            apply_rules(&rules, mdg, t, bc);
        };
        let invalid = |field: &str, e: crate::physics::PhysicsError| ConfigError::Invalid {
            field: field.into(),
            message: e.to_string(),
        };
        let mut model =
            FlowModel::new(mdg, config.materials.clone(), config.properties.clone(), config.energy, boundary)
                .map_err(|e| invalid("materials", e))?
                .with_boundary_update(Box::new(update));
        let nc = model.mdg.num_cells_total();
        let p0 = config.initial.pressure_pa.map(|p| vec![p; nc]);
        let t0 = config.initial.temperature_k.map(|t| vec![t; nc]);
        model.apply_initial_conditions(p0.as_deref(), t0.as_deref()).map_err(|e| invalid("initial", e))?;
        Ok(Self { config, model })
    }

    /// Runs the configured schedule. Snapshots go to `out_dir` when given, together
    /// with `report.json`; `observe` is called after every accepted step.
    pub fn run(
        &mut self,
        out_dir: Option<&Path>,
        mut observe: impl FnMut(&FlowModel, &StepReport),
    ) -> Result<RunOutcome, RunError> {
        let formats = self.config.output.formats.clone();
        let every = self.config.output.every_n_steps;
        let mut files = Vec::new();
        let write = |model: &FlowModel, k: usize, files: &mut Vec<PathBuf>| -> Result<(), RunError> {
            if let Some(dir) = out_dir {
                let snap = FieldSnapshot::from_model(model);
                let written = write_snapshot(dir, &format!("step_{k:05}"), &model.mdg, &snap, &formats)
                    .map_err(|source| RunError::Io { path: dir.to_path_buf(), source })?;
                files.extend(written);
            }
            Ok(())
        };
        write(&self.model, 0, &mut files)?;
        let mut accepted = 0;
        let mut last_written = 0;
        let mut io_error = None;
        let solver = self.config.solver.clone();
        let (report, result) = time_loop(&mut self.model, &solver, 0.0, |model, step| {
            accepted += 1;
            observe(model, step);
            if accepted % every == 0 {
                last_written = accepted;
                if let Err(e) = write(model, accepted, &mut files) {
                    let msg = e.to_string();
                    io_error = Some(e);
                    return Err(SolverError::Callback(msg));
                }
            }
            Ok(())
        });
        if let Some(e) = io_error {
            return Err(e);
        }
        if last_written != accepted {
            write(&self.model, accepted, &mut files)?;
        }
        if let Some(dir) = out_dir {
            let path = dir.join("report.json");
            std::fs::write(&path, report.to_json()).map_err(|source| RunError::Io { path: path.clone(), source })?;
            files.push(path);
        }
        result.map_err(RunError::Solver)?;
        Ok(RunOutcome { report, files })
    }
}

/// Loads, builds and runs a scenario file.
pub fn run_file(path: &Path, out_dir: Option<&Path>) -> Result<RunOutcome, RunError> {
    let cfg = ScenarioConfig::load(path)?;
    let mut scenario = Scenario::build(&cfg)?;
    let dir = out_dir.map(Path::to_path_buf).unwrap_or_else(|| scenario.config.output.directory.clone());
    scenario.run(Some(&dir), |_, _| {})
}
