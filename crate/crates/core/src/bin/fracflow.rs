use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use fracflow::config::{OutputFormat, ScenarioConfig};
use fracflow::export::{write_snapshot, FieldSnapshot};
use fracflow::mms::{run_convergence_study, GoldenOoc};
use fracflow::scenario::{RunError, Scenario};

/// Overrides the output directory of `run` and `export`.
const OUTPUT_ENV: &str = "FRACFLOW_OUTPUT_DIR";

#[derive(Parser)]
#[command(name = "fracflow", version, about = "Mixed-dimensional flow and heat transport in fractured media")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write snapshots plus report.json.
    Run { config: PathBuf },
    /// Run the manufactured-solution convergence study and compare with golden orders.
    Verify {
        #[arg(long, value_parser = clap::value_parser!(u8).range(2..=3))]
        dim: u8,
        /// Number of refinement levels (at least 3).
        #[arg(long, default_value_t = 3)]
        levels: usize,
        /// Directory holding mms_<dim>d.json.
        #[arg(long, default_value = "golden")]
        golden: PathBuf,
        /// Overwrite the golden file with this run (only if errors decrease monotonically).
        #[arg(long)]
        bless: bool,
    },
    /// Run a scenario and export only its final state.
    Export {
        config: PathBuf,
        #[arg(long, value_enum)]
        format: Vec<Format>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Columns,
    Interfaces,
    Vtk,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Columns => OutputFormat::Columns,
            Format::Interfaces => OutputFormat::Interfaces,
            Format::Vtk => OutputFormat::Vtk,
        }
    }
}

fn output_dir(cli: Option<PathBuf>, cfg: &ScenarioConfig) -> PathBuf {
    cli.or_else(|| std::env::var_os(OUTPUT_ENV).map(PathBuf::from)).unwrap_or_else(|| cfg.output.directory.clone())
}

fn fail(e: &RunError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn run(config: &Path) -> ExitCode {
    let result = ScenarioConfig::load(config).map_err(RunError::from).and_then(|cfg| {
        let mut s = Scenario::build(&cfg)?;
        let dir = output_dir(None, &cfg);
        let outcome = s.run(Some(&dir), |_, step| {
            eprintln!("t = {:.6e} s  dt = {:.3e} s  newton {}", step.time_s, step.dt_s, step.iterations);
        })?;
        Ok((dir, outcome))
    });
    match result {
        Ok((dir, outcome)) => {
            println!(
                "{} steps, {} Newton iterations, {} files in {}",
                outcome.report.steps.len(),
                outcome.report.total_iterations(),
                outcome.files.len(),
                dir.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}

fn export(config: &Path, formats: Vec<Format>, output: Option<PathBuf>) -> ExitCode {
    let result = ScenarioConfig::load(config).map_err(RunError::from).and_then(|cfg| {
        let mut s = Scenario::build(&cfg)?;
        s.run(None, |_, _| {})?;
        let dir = output_dir(output, &cfg);
        let formats: Vec<OutputFormat> =
            if formats.is_empty() { cfg.output.formats.clone() } else { formats.into_iter().map(Into::into).collect() };
        let snap = FieldSnapshot::from_model(&s.model);
        write_snapshot(&dir, "final", &s.model.mdg, &snap, &formats).map_err(|source| RunError::Io { path: dir, source })
    });
    match result {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}

fn verify(dim: usize, levels: usize, golden_dir: &Path, bless: bool) -> ExitCode {
    if levels < 3 {
        eprintln!("error: --levels must be at least 3");
        return ExitCode::from(1);
    }
    let base = if dim == 2 { 16 } else { 4 };
    let cells: Vec<usize> = (0..levels).map(|k| base << k).collect();
    let report = match run_convergence_study(dim, &cells) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    print!("{}", report.table());
    for v in &report.degenerate {
        println!("{v}: exact field vanishes on some level; no order computed");
    }
    let path = golden_dir.join(format!("mms_{dim}d.json"));
    if bless {
        if !report.is_monotone() && report.degenerate.is_empty() {
            eprintln!("error: errors do not decrease monotonically; refusing to bless");
            return ExitCode::from(2);
        }
        let text = serde_json::to_string_pretty(&report.to_golden(0.1)).expect("golden serializes");
        if let Err(e) = std::fs::create_dir_all(golden_dir).and_then(|_| std::fs::write(&path, text + "\n")) {
            eprintln!("error: cannot write {}: {e}", path.display());
            return ExitCode::from(2);
        }
        println!("wrote {}", path.display());
        return ExitCode::SUCCESS;
    }
    let golden: GoldenOoc = match std::fs::read_to_string(&path)
        .map_err(|e| e.to_string())
        .and_then(|t| serde_json::from_str(&t).map_err(|e| e.to_string()))
    {
        Ok(g) => g,
        Err(e) => {
            eprintln!("error: cannot read golden file {}: {e}", path.display());
            return ExitCode::from(1);
        }
    };
    if golden.cells_per_axis != cells {
        eprintln!("error: golden file is for levels {:?}, this run used {cells:?}", golden.cells_per_axis);
        return ExitCode::from(2);
    }
    let mismatches = report.compare(&golden);
    for (v, got, want) in &mismatches {
        println!("MISMATCH {v}: ooc {got:.3}, golden {want:.3} (tolerance {})", golden.tolerance);
    }
    if mismatches.is_empty() {
        println!("all orders within {} of golden values", golden.tolerance);
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { config } => run(&config),
        Command::Verify { dim, levels, golden, bless } => verify(dim as usize, levels, &golden, bless),
        Command::Export { config, format, output } => export(&config, format, output),
    }
}
