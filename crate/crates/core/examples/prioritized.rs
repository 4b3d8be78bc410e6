//! Graded consensus over policy sets, with a configurable threshold.
//!
//! `cargo run --example prioritized [theta]`

use delibchain::agent::AgentBehavior;
use delibchain::crypto::NodeIdentity;
use delibchain::domain::{Problem, Threshold};
use delibchain::engine::{AgentSpec, DeliberationConfig, Engine};

fn policies(list: &[&str]) -> String {
    list.iter()
        .map(|p| format!("POLICY: {p}"))
        .collect::<Vec<_>>()
        .join("\n")
}

fn main() {
    let theta = std::env::args().nth(1).unwrap_or_else(|| "0.5".into());
    let theta = Threshold::from_decimal(&theta).expect("theta in (0, 1]");
    let problem =
        Problem::prioritized("budget", "Which measures should the city fund next year?").unwrap();
    let positions: [&[&str]; 4] = [
        &["bike lanes", "night buses"],
        &["bike lanes"],
        &["bike lanes", "night buses", "tree planting"],
        &["night buses", "library hours"],
    ];
    let agents = positions
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let text = policies(p);
            AgentSpec::new(
                NodeIdentity::derive(6, i as u64),
                AgentBehavior::scripted(vec![text; 3]),
            )
        })
        .collect();
    let config = DeliberationConfig::new(agents, 2).with_theta(theta);
    let r = Engine::new().run_deliberation(&config, &problem).unwrap();

    println!("θ = {}: {:?}", theta.fraction(), r.record.outcome);
    for (policy, level) in &r.record.consensus.accepted_policies {
        println!("  accepted {policy:<14} at {level}");
    }
    println!("confidence C = {}", r.record.confidence());
    println!(
        "block #{} with {} utterances",
        r.block.height(),
        r.block.transcript().len()
    );
}
