//! A stubborn dissenter hangs a problem; the same agent set is refused, a
//! changed set is admitted. Both attempts land on the chain.
//!
//! `cargo run --example hung_restart`

use delibchain::agent::AgentBehavior;
use delibchain::crypto::NodeIdentity;
use delibchain::domain::{Action, Problem};
use delibchain::engine::{AgentSpec, DeliberationConfig, Engine};

fn agent(i: u64, behavior: AgentBehavior) -> AgentSpec {
    AgentSpec::new(NodeIdentity::derive(12, i), behavior)
}

fn main() {
    let problem = Problem::definitive("capital", "What is the capital of Australia?")
        .unwrap()
        .with_ground_truth("canberra");
    let mut agents: Vec<AgentSpec> = (0..3)
        .map(|i| {
            agent(
                i,
                AgentBehavior::convergent(Action::definitive("Canberra", ""), 1.0, i),
            )
        })
        .collect();
    agents.push(agent(
        3,
        AgentBehavior::stubborn(Action::definitive("Sydney", "")),
    ));
    let config = DeliberationConfig::new(agents.clone(), 3);
    let mut engine = Engine::new();

    let r = engine.run_deliberation(&config, &problem).unwrap();
    println!(
        "attempt 1: {:?}, empty block: {}",
        r.record.outcome,
        r.block.is_empty()
    );
    println!(
        "hung set holds {} failed set(s) for {}",
        engine.hung_set().failed_sets(&problem.id).len(),
        problem.id
    );

    match engine.run_deliberation(&config, &problem) {
        Err(e) => println!("attempt 2 with the same agents: {e}"),
        Ok(r) => println!("attempt 2 unexpectedly ran: {:?}", r.record.outcome),
    }

    agents[3] = agent(
        4,
        AgentBehavior::convergent(Action::definitive("Canberra", ""), 1.0, 4),
    );
    let swapped = DeliberationConfig::new(agents, 3);
    let r = engine.run_deliberation(&swapped, &problem).unwrap();
    println!(
        "attempt 3 with one agent swapped: {:?}, value {:?}",
        r.record.outcome, r.record.consensus.value
    );

    for b in engine.chain().blocks() {
        println!(
            "  block #{} {} {:?} {}",
            b.height(),
            &b.hash().to_hex()[..12],
            b.header.outcome,
            b.record().deliberation_id
        );
    }
}
