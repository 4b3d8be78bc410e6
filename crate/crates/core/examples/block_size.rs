//! Block size as a function of turns and agents with fixed-size utterances,
//! and the oversize cut-off.
//!
//! `cargo run --example block_size [utterance_bytes]`

use delibchain::agent::AgentBehavior;
use delibchain::crypto::NodeIdentity;
use delibchain::domain::Problem;
use delibchain::engine::{AgentSpec, DeliberationConfig, Engine};
use delibchain::ledger::MAX_BLOCK_BYTES;

fn padded(len: usize, answer: &str) -> String {
    let tail = format!("\nANSWER: {answer}");
    format!("{}{tail}", "x".repeat(len.saturating_sub(tail.len())))
}

/// Agent 0 holds out until the final turn, so every turn is used.
fn run(n: u64, turns: u32, body: usize) -> (String, usize) {
    let agents = (0..n)
        .map(|a| {
            let script: Vec<String> = (0..=turns)
                .map(|t| padded(body, if a == 0 && t < turns { "1" } else { "2" }))
                .collect();
            AgentSpec::new(NodeIdentity::derive(40, a), AgentBehavior::scripted(script))
        })
        .collect();
    let config = DeliberationConfig::new(agents, turns).with_timeout(1 << 40);
    let problem = Problem::definitive("size", "What is 1 + 1?").unwrap();
    let r = Engine::new().run_deliberation(&config, &problem).unwrap();
    (format!("{:?}", r.record.outcome), r.metrics.block_bytes)
}

fn main() {
    let body: usize = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(1024);
    println!("utterance size {body} B, cap {MAX_BLOCK_BYTES} B");
    println!("{:>6} {:>6} {:>10}  outcome", "agents", "turns", "bytes");
    for n in [3, 4, 6] {
        for t in 1..=8 {
            let (outcome, bytes) = run(n, t, body);
            println!("{n:>6} {t:>6} {bytes:>10}  {outcome}");
        }
    }
}
