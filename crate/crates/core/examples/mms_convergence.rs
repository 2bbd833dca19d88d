//! Manufactured-solution convergence study.
//!
//! `cargo run --release --example mms_convergence -- 2` (or `3`).

use std::time::Instant;

use fracflow::mms::{default_levels, run_convergence_study};

fn main() {
    let dim: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2);
    let levels = default_levels(dim);
    let start = Instant::now();
    let report = run_convergence_study(dim, &levels).expect("study failed");
    print!("{}", report.table());
    println!("monotone: {}", report.is_monotone());
    for (v, ooc) in &report.ooc {
        println!("{v:>18}: ooc {ooc:.3}  pairwise {:?}", report.pairwise_ooc(v));
    }
    for v in &report.degenerate {
        println!("{v:>18}: exact field vanishes on a level, no order");
    }
    println!("elapsed {:.1} s", start.elapsed().as_secs_f64());
}
