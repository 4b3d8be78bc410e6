//! Runs a TOML scenario: a sweep over agent counts and turn budgets, written
//! as chain files, transcripts and a metrics table.
//!
//! `cargo run --example scenario_sweep [scenario.toml] [out-dir]`

use std::path::PathBuf;

use delibchain::metrics::summarize;
use delibchain::scenario::{run_scenario, Scenario};

fn main() {
    let mut args = std::env::args().skip(1);
    let path = args.next().map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/scenarios/sweep.toml")
    });
    let scenario = Scenario::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let out = args
        .next()
        .map(PathBuf::from)
        .or_else(|| scenario.output_dir.clone())
        .unwrap_or_else(|| std::env::temp_dir().join(format!("delibchain-{}", scenario.name)));

    let report = run_scenario(&scenario, &out).unwrap();
    println!(
        "{} deliberations written under {}",
        report.rows.len(),
        out.display()
    );
    println!("all chains re-verified: {}", report.all_verified());
    println!(
        "{:>6} {:>6} {:>5} {:>8} {:>10} {:>9} {:>9}",
        "agents", "turns", "runs", "success", "TRC ticks", "block B", "accuracy"
    );
    for s in summarize(&report.rows) {
        let accuracy = s
            .mean_final_accuracy
            .map_or("-".into(), |a| format!("{a:.3}"));
        println!(
            "{:>6} {:>6} {:>5} {:>8} {:>10.0} {:>9.0} {:>9}",
            s.agents,
            s.turns,
            s.deliberations,
            s.successes,
            s.mean_trc_ticks,
            s.mean_block_bytes,
            accuracy
        );
    }
}
