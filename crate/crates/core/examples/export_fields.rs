//! Runs a short scenario and writes column tables and a legacy VTK file to a directory.
//!
//! `cargo run --example export_fields [out_dir]`

use std::path::PathBuf;

use fracflow::config::{OutputFormat, ScenarioConfig};
use fracflow::export::{write_snapshot, FieldSnapshot};
use fracflow::scenario::Scenario;

fn main() {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "output/export_fields".into()));
    let cfg = ScenarioConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/equilibrium.toml").as_ref())
        .unwrap();
    let mut s = Scenario::build(&cfg).unwrap();
    s.run(None, |_, _| {}).unwrap();
    let snap = FieldSnapshot::from_model(&s.model);
    let formats = [OutputFormat::Columns, OutputFormat::Interfaces, OutputFormat::Vtk];
    for f in write_snapshot(&out, "final", &s.model.mdg, &snap, &formats).unwrap() {
        println!("{}", f.display());
    }
}
