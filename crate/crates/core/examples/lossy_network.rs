//! Deliberations over increasingly lossy links: retries absorb light loss,
//! heavy loss ends in a timeout and an empty block. Every run appends one
//! block either way.
//!
//! `cargo run --example lossy_network`

use delibchain::agent::AgentBehavior;
use delibchain::crypto::NodeIdentity;
use delibchain::domain::{Action, Problem};
use delibchain::engine::{AgentSpec, DeliberationConfig, Engine};
use delibchain::network::{LinkModel, NetworkConfig};

fn main() {
    let mut engine = Engine::new();
    for (k, drop) in [0.0, 0.05, 0.2, 0.5, 1.0].into_iter().enumerate() {
        let agents = (0..4)
            .map(|i| {
                let behavior = AgentBehavior::convergent(
                    Action::definitive(["9", "9", "9", "8"][i], ""),
                    1.0,
                    i as u64,
                );
                AgentSpec::new(NodeIdentity::derive(20, i as u64), behavior)
            })
            .collect();
        let network = NetworkConfig {
            link: LinkModel {
                min_latency: 1,
                max_latency: 6,
                drop_probability: drop,
            },
            ..Default::default()
        };
        let config = DeliberationConfig::new(agents, 3)
            .with_network(network)
            .with_seed(k as u64);
        let problem = Problem::definitive(&format!("square-{k}"), "What is 3 * 3?").unwrap();
        let r = engine.run_deliberation(&config, &problem).unwrap();
        println!(
            "drop {drop:>4}: {:<22} height {} announce {:>6} B data {:>6} B completed at t={}",
            format!("{:?}", r.record.outcome),
            r.block.height(),
            r.metrics.announce_bytes,
            r.metrics.data_bytes,
            r.record.completed_at
        );
    }
    let agree = engine
        .node_chains()
        .values()
        .all(|c| c.tip() == engine.chain().get(c.height()));
    println!("node chains agree with the canonical chain: {agree}");
}
