//! Prompt construction and answer extraction, without a network.
//!
//! `cargo run --example prompts`

use delibchain::agent::{
    assign_prompt_styles, build_initial_prompt, build_reflection_prompt, extract_action,
    AgentBehavior, Responder,
};
use delibchain::crypto::NodeIdentity;
use delibchain::domain::{Action, Problem, ProblemKind};
use delibchain::network::{sign_utterance, Round, UnsignedUtterance};

fn main() {
    let problem = Problem::definitive("sum", "What is 17 + 25?").unwrap();
    let identities: Vec<NodeIdentity> = (0..3).map(|i| NodeIdentity::derive(1, i)).collect();
    let mut order: Vec<_> = identities.iter().map(NodeIdentity::node_id).collect();
    order.sort();
    let styles = assign_prompt_styles(identities.len());
    println!("styles: {styles:?}");

    let agents = [
        AgentBehavior::convergent(Action::definitive("42", ""), 1.0, 0),
        AgentBehavior::convergent(Action::definitive("42", ""), 1.0, 1),
        AgentBehavior::convergent(Action::definitive("43", ""), 1.0, 2),
    ];

    let initial: Vec<_> = identities
        .iter()
        .zip(&agents)
        .zip(&styles)
        .map(|((id, agent), style)| {
            let prompt = build_initial_prompt(&problem, *style);
            let body = agent.respond(&prompt, 0).unwrap();
            let unsigned = UnsignedUtterance {
                deliberation_id: "sum#0".into(),
                round: Round::Initial,
                turn: 0,
                agent: id.node_id(),
                body,
            };
            sign_utterance(id, unsigned, ProblemKind::Definitive).unwrap()
        })
        .collect();
    println!(
        "--- initial prompt ---\n{}\n",
        build_initial_prompt(&problem, styles[0]).render()
    );

    let third = &initial[2];
    let reflection = build_reflection_prompt(&problem, styles[2], third, &initial, &order).unwrap();
    println!(
        "--- reflection prompt for the dissenter ---\n{}\n",
        reflection.render()
    );
    let reply = agents[2].respond(&reflection, 1).unwrap();
    println!("--- reply ---\n{reply}\n");
    println!(
        "extracted: {:?}",
        extract_action(&reply, ProblemKind::Definitive)
    );
}
