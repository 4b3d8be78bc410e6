//! Two-phase gossip over the deterministic simulated network: digests are
//! announced, bodies pulled on request.
//!
//! `cargo run --example gossip [nodes] [drop_probability]`

use delibchain::crypto::NodeIdentity;
use delibchain::domain::ProblemKind;
use delibchain::network::{
    sign_utterance, LinkModel, NetworkConfig, Round, SimNetwork, UnsignedUtterance,
};

fn main() {
    let mut args = std::env::args().skip(1);
    let n: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(10);
    let drop: f64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(0.0);

    let identities: Vec<NodeIdentity> = (0..n).map(|i| NodeIdentity::derive(3, i)).collect();
    let ids: Vec<_> = identities.iter().map(NodeIdentity::node_id).collect();
    let config = NetworkConfig {
        link: LinkModel {
            min_latency: 1,
            max_latency: 4,
            drop_probability: drop,
        },
        ..Default::default()
    };
    let mut net = SimNetwork::new(&ids, ProblemKind::Definitive, &config, 7).unwrap();

    let mut digests = Vec::new();
    for (i, id) in identities.iter().enumerate() {
        let unsigned = UnsignedUtterance {
            deliberation_id: "demo#0".into(),
            round: Round::Initial,
            turn: 0,
            agent: id.node_id(),
            body: format!("Working it out carefully, agent {i} concludes:\nANSWER: 42"),
        };
        let u = sign_utterance(id, unsigned, ProblemKind::Definitive).unwrap();
        digests.push(u.digest);
        net.publish(u).unwrap();
    }
    let delivered = net.run_to_quiescence();
    let stats = net.transport().stats();

    println!(
        "{n} nodes, drop {drop}: {delivered} messages delivered by t={}",
        net.now()
    );
    println!(
        "every node holds every utterance: {}",
        net.all_hold(&digests)
    );
    for node in net.nodes() {
        println!(
            "  {} holds {}/{}",
            node.id().short(),
            node.utterances().count(),
            digests.len()
        );
    }
    println!(
        "announce {} B for {} digests, data {} B for {} utterances, requests {} B, dropped {}",
        stats.announce_bytes,
        stats.announced_digests,
        stats.data_bytes,
        stats.data_utterances,
        stats.request_bytes,
        stats.dropped
    );
    println!("first events:");
    for e in net.transport().log().iter().take(6) {
        println!("  {}", serde_json::to_string(e).unwrap());
    }
}
