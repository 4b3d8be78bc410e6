//! A definitive deliberation stepped through the engine state machine.
//!
//! `cargo run --example definitive [p_adopt]`

use delibchain::agent::AgentBehavior;
use delibchain::crypto::NodeIdentity;
use delibchain::domain::{fraction_to_f64, Action, Problem};
use delibchain::engine::{AgentSpec, DeliberationConfig, Engine};

fn main() {
    let p_adopt: f64 = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(0.8);
    let problem = Problem::definitive(
        "gsm-1",
        "Natalia sold 48 clips in April and half as many in May. How many in total?",
    )
    .unwrap()
    .with_ground_truth("72");
    let agents = ["72", "72", "96", "70", "72"]
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let behavior = AgentBehavior::convergent(Action::definitive(v, ""), p_adopt, i as u64);
            AgentSpec::new(NodeIdentity::derive(5, i as u64), behavior)
        })
        .collect();
    let config = DeliberationConfig::new(agents, 4).with_seed(5);

    let mut engine = Engine::new();
    let mut d = engine.start(&config, &problem).unwrap();
    println!("{} starts in state {:?}", d.id(), d.state());
    for u in d.run_initial_round().unwrap() {
        println!(
            "  initial {} -> {:?}",
            u.agent.short(),
            u.action.value().map(|v| v.as_str())
        );
    }
    while matches!(
        d.state(),
        delibchain::engine::EngineState::Reflection { .. }
    ) {
        let state = d.state();
        let outcome = d.run_reflection_turn().unwrap().cloned();
        let last = d.rounds().last().unwrap();
        let values: Vec<_> = last
            .iter()
            .map(|u| u.action.value().map(|v| v.to_string()))
            .collect();
        println!("{state:?}: {values:?} -> {:?}", outcome.map(|o| o.status));
    }
    let r = d.conclude().unwrap();
    println!(
        "outcome {:?}, confidence {}, turns used {}, block #{} ({} bytes)",
        r.record.outcome,
        r.record.confidence(),
        r.metrics.turns_used,
        r.block.height(),
        r.metrics.block_bytes
    );
    if let Some(acc) = &r.metrics.accuracy_per_turn {
        let acc: Vec<String> = acc
            .iter()
            .map(|a| format!("{:.2}", fraction_to_f64(*a)))
            .collect();
        println!("accuracy per turn: {}", acc.join(" "));
    }
    println!(
        "payoffs: {:?}",
        r.record
            .payoff
            .values()
            .map(|p| p.to_string())
            .collect::<Vec<_>>()
    );
}
