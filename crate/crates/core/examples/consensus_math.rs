//! Exact-rational consensus: unanimity for definitive answers, graded
//! agreement for policy sets.
//!
//! `cargo run --example consensus_math`

use std::collections::BTreeMap;

use delibchain::domain::{
    accepted_policies, agreement_level, check_definitive_unanimity, consensus_confidence,
    fraction_to_f64, normalize_value, Action, Threshold,
};

fn main() {
    let answers: BTreeMap<&str, Action> = [
        ("alice", Action::definitive("42", "17 + 25")),
        ("bob", Action::definitive(" 42.0 ", "carried the one")),
        ("carol", Action::definitive("42", "checked twice")),
    ]
    .into_iter()
    .collect();
    let unanimous = check_definitive_unanimity(&answers).unwrap();
    println!(
        "definitive: status {:?}, value {:?}",
        unanimous.status, unanimous.value
    );

    let policies: BTreeMap<&str, Action> = [
        ("a1", Action::prioritized(["p1", "p2"])),
        ("a2", Action::prioritized(["p1"])),
        ("a3", Action::prioritized(["p1", "p2", "p3"])),
    ]
    .into_iter()
    .collect();
    for policy in ["p1", "p2", "p3"] {
        let level = agreement_level(&normalize_value(policy).unwrap(), &policies);
        println!("A({policy}) = {level}");
    }
    for (n, d) in [(3, 10), (1, 2), (4, 5), (1, 1)] {
        let theta = Threshold::new(n, d).unwrap();
        let accepted: Vec<String> = accepted_policies(&policies, theta)
            .into_iter()
            .map(|(p, level)| format!("{p}@{level}"))
            .collect();
        let outcome = consensus_confidence(&policies, theta);
        println!(
            "θ = {n}/{d}: Acc = [{}], C = {} ({:.4}), {:?}",
            accepted.join(", "),
            outcome.confidence,
            fraction_to_f64(outcome.confidence),
            outcome.status
        );
    }
}
