//! The append-only ledger: blocks written to a chain file, reloaded with
//! full re-verification, inspected, then tampered with.
//!
//! `cargo run --example ledger [chain-file]`

use std::path::PathBuf;

use delibchain::agent::AgentBehavior;
use delibchain::cli::block_json;
use delibchain::crypto::NodeIdentity;
use delibchain::domain::{Action, Problem};
use delibchain::engine::{AgentSpec, DeliberationConfig, Engine};
use delibchain::ledger::Chain;

fn main() {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("delibchain-example.chain"));

    let mut engine = Engine::new();
    for (k, answers) in [["4", "4", "4"], ["4", "5", "4"], ["3", "5", "7"]]
        .iter()
        .enumerate()
    {
        let agents = answers
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let behavior =
                    AgentBehavior::convergent(Action::definitive(v, ""), 0.9, (k * 10 + i) as u64);
                AgentSpec::new(NodeIdentity::derive(30, i as u64), behavior)
            })
            .collect();
        let problem = Problem::definitive(&format!("q{k}"), "What is 2 + 2?")
            .unwrap()
            .with_ground_truth("4");
        engine
            .run_deliberation(&DeliberationConfig::new(agents, 2), &problem)
            .unwrap();
    }
    engine.chain().save(&path).unwrap();
    println!(
        "wrote {} blocks to {}",
        engine.chain().height(),
        path.display()
    );

    let loaded = Chain::load(&path).unwrap();
    println!("reloaded and re-verified {} blocks", loaded.height());
    for b in loaded.blocks() {
        println!(
            "  #{} {} prev {} {:?} t={}",
            b.height(),
            &b.hash().to_hex()[..12],
            &b.header.prev_hash.to_hex()[..12],
            b.header.outcome,
            b.header.timestamp
        );
    }
    let json = block_json(loaded.get(1).unwrap());
    println!(
        "block #1 record:\n{}",
        serde_json::to_string_pretty(&json["record"]).unwrap()
    );

    let mut bytes = loaded.to_bytes().unwrap();
    let middle = bytes.len() / 2;
    bytes[middle] ^= 0x10;
    match Chain::from_bytes(&bytes) {
        Err(e) => println!("one flipped bit at byte {middle}: {e}"),
        Ok(_) => println!("tampering went unnoticed"),
    }
}
