//! Runs the shipped cold-injection scenario and prints per-step fracture and matrix means.
//!
//! `cargo run --release --example demo_thermal_injection [config.toml]`

use fracflow::config::ScenarioConfig;
use fracflow::scenario::Scenario;

fn main() {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/demo.toml").to_string());
    let cfg = ScenarioConfig::load(path.as_ref()).unwrap_or_else(|e| panic!("{e}"));
    let mut s = Scenario::build(&cfg).unwrap_or_else(|e| panic!("{e}"));
    let off = s.model.mdg.cell_offsets();
    let groups: Vec<(String, std::ops::Range<usize>)> = s
        .model
        .mdg
        .subdomains
        .iter()
        .enumerate()
        .map(|(i, g)| (format!("sd{i} (dim {})", g.dim), off[i]..off[i] + g.num_cells))
        .collect();
    let outcome = s
        .run(None, |m, step| {
            let (p, t) = m.cell_fields();
            print!("t = {:.4e} s ({} its)", step.time_s, step.iterations);
            for (name, r) in &groups {
                let n = r.len() as f64;
                let mp: f64 = p[r.clone()].iter().sum::<f64>() / n;
                let mt: f64 = t[r.clone()].iter().sum::<f64>() / n;
                print!("  {name}: p {mp:.4e} T {mt:.3}");
            }
            println!();
        })
        .unwrap_or_else(|e| panic!("{e}"));
    println!("{} Newton iterations in total", outcome.report.total_iterations());
}
