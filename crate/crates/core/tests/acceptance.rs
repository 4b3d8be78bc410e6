//! Acceptance suite. Prints one pass/fail line per criterion and exits
//! non-zero when any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use delibchain::agent::{extract_action, AgentBehavior};
use delibchain::crypto::NodeIdentity;
use delibchain::domain::{
    accepted_policies, agreement_level, consensus_confidence, fraction_to_f64, normalize_value,
    Action, AgentId, CanonicalValue, ConsensusStatus, Fraction, HungReason, Problem, ProblemKind,
    RecordOutcome, Threshold,
};
use delibchain::engine::{AgentSpec, DeliberationConfig, DeliberationResult, Engine, EngineError};
use delibchain::ledger::{canonical_serialize, verify_block, Block, MAX_BLOCK_BYTES};
use delibchain::network::{
    sign_utterance, GossipMessage, LinkModel, NetworkConfig, Round, SimNetwork, UnsignedUtterance,
    Utterance,
};
use delibchain::scenario::{run_scenario, Scenario};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn value(text: &str) -> CanonicalValue {
    normalize_value(text).expect("non-empty value")
}

fn agent(seed: u64, index: u64, behavior: AgentBehavior) -> AgentSpec {
    AgentSpec::new(NodeIdentity::derive(seed, index), behavior)
}

fn answer_problem(id: &str) -> Problem {
    Problem::definitive(id, "What is 17 + 25?")
        .unwrap()
        .with_ground_truth("42")
}

// ---------------------------------------------------------------------------
// 1. consensus math against a hand-count oracle

fn criterion_1() -> Check {
    let started = Instant::now();
    let thetas = [(3u64, 10u64), (1, 2), (4, 5)];
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE);
    let mut graded = 0;
    for i in 0..1000 {
        let n = rng.random_range(1..=8usize);
        let m = rng.random_range(1..=10usize);
        let (tn, td) = thetas[i % thetas.len()];
        let theta = Threshold::new(tn, td).unwrap();
        let names: Vec<String> = (0..m).map(|j| format!("p{j}")).collect();

        // membership[a][j]: agent a proposes policy j
        let mut membership = vec![vec![false; m]; n];
        let mut actions = BTreeMap::new();
        for (a, row) in membership.iter_mut().enumerate() {
            let action = if rng.random_bool(0.1) {
                Action::Abstain
            } else {
                for cell in row.iter_mut() {
                    *cell = rng.random_bool(0.5);
                }
                Action::prioritized(
                    names
                        .iter()
                        .zip(row.iter())
                        .filter(|(_, &b)| b)
                        .map(|(s, _)| s.as_str()),
                )
            };
            actions.insert(a as u32, action);
        }

        let counts: Vec<u64> = (0..m)
            .map(|j| membership.iter().filter(|r| r[j]).count() as u64)
            .collect();
        for j in 0..m {
            let got = agreement_level(&value(&names[j]), &actions);
            ensure(got == Fraction::new(counts[j], n as u64), || {
                format!(
                    "instance {i}: level of {} is {got}, oracle {}/{n}",
                    names[j], counts[j]
                )
            })?;
        }

        // accepted iff count / n >= tn / td, cross-multiplied in integers
        let mut oracle: Vec<usize> = (0..m)
            .filter(|&j| counts[j] * td >= tn * n as u64)
            .collect();
        oracle.sort_by(|&x, &y| counts[y].cmp(&counts[x]).then(names[x].cmp(&names[y])));
        let expected: Vec<(CanonicalValue, Fraction)> = oracle
            .iter()
            .map(|&j| (value(&names[j]), Fraction::new(counts[j], n as u64)))
            .collect();
        let got = accepted_policies(&actions, theta);
        ensure(got == expected, || {
            format!("instance {i}: accepted {got:?}, oracle {expected:?}")
        })?;

        let outcome = consensus_confidence(&actions, theta);
        if oracle.is_empty() {
            ensure(
                outcome.status == ConsensusStatus::NoConsensus
                    && outcome.confidence == Fraction::from_integer(0),
                || format!("instance {i}: expected no consensus, got {outcome:?}"),
            )?;
        } else {
            graded += 1;
            let sum: u64 = oracle.iter().map(|&j| counts[j]).sum();
            let c = Fraction::new(sum, (n * oracle.len()) as u64);
            ensure(
                outcome.status == ConsensusStatus::Graded && outcome.confidence == c,
                || {
                    format!(
                        "instance {i}: confidence {}, oracle {c}",
                        outcome.confidence
                    )
                },
            )?;
        }
    }
    let elapsed = started.elapsed();
    ensure(elapsed.as_secs_f64() < 10.0, || format!("took {elapsed:?}"))?;
    Ok(format!(
        "1000 instances ({graded} graded) exact in {:.2?}",
        elapsed
    ))
}

// ---------------------------------------------------------------------------
// 2. worked example

fn criterion_2() -> Check {
    let actions: BTreeMap<&str, Action> = [
        ("a1", Action::prioritized(["p1", "p2"])),
        ("a2", Action::prioritized(["p1"])),
        ("a3", Action::prioritized(["p1", "p2", "p3"])),
    ]
    .into_iter()
    .collect();
    let theta = Threshold::new(1, 2).unwrap();
    let outcome = consensus_confidence(&actions, theta);
    let acc: BTreeSet<&str> = outcome
        .accepted_policies
        .iter()
        .map(|(p, _)| p.as_str())
        .collect();
    ensure(acc == BTreeSet::from(["p1", "p2"]), || {
        format!("Acc = {acc:?}")
    })?;
    // hand-derived: A(p1) = 3/3, A(p2) = 2/3, C = (1 + 2/3) / 2
    ensure(outcome.confidence == Fraction::new(5, 6), || {
        format!("C = {}", outcome.confidence)
    })?;
    Ok(format!(
        "Acc = {{p1, p2}}, C = {} ≈ {:.4}",
        outcome.confidence,
        fraction_to_f64(outcome.confidence)
    ))
}

// ---------------------------------------------------------------------------
// 3, 4, 10. convergent runs

struct Run {
    config: DeliberationConfig,
    result: DeliberationResult,
    engine: Engine,
}

fn convergent_runs() -> Vec<Run> {
    let mut runs = Vec::new();
    for i in 0..200u64 {
        let p = [0.5, 1.0][(i % 2) as usize];
        let n = [3, 4, 5][((i / 2) % 3) as usize];
        let t = [2, 3][((i / 6) % 2) as usize];
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + i);
        let agents = (0..n)
            .map(|a| {
                let v = if rng.random_bool(0.6) {
                    "42"
                } else {
                    ["41", "43"][rng.random_range(0..2)]
                };
                agent(
                    i,
                    a,
                    AgentBehavior::convergent(Action::definitive(v, ""), p, i * 100 + a),
                )
            })
            .collect();
        let config = DeliberationConfig::new(agents, t).with_seed(i);
        let mut engine = Engine::new();
        let result = engine
            .run_deliberation(&config, &answer_problem(&format!("c3-{i}")))
            .expect("deliberation runs");
        runs.push(Run {
            config,
            result,
            engine,
        });
    }
    runs
}

/// Final-round values read back from a block's own transcript bodies.
fn final_values_from_transcript(block: &Block) -> Vec<Option<CanonicalValue>> {
    let last = block.transcript().iter().map(|u| (u.round, u.turn)).max();
    block
        .transcript()
        .iter()
        .filter(|u| Some((u.round, u.turn)) == last)
        .map(|u| {
            extract_action(&u.body, ProblemKind::Definitive)
                .value()
                .cloned()
        })
        .collect()
}

fn criterion_3(runs: &[Run]) -> Check {
    let mut successes = 0;
    for (i, run) in runs.iter().enumerate() {
        let r = &run.result;
        if r.record.outcome != RecordOutcome::Success {
            continue;
        }
        successes += 1;
        let finals: Vec<Option<CanonicalValue>> = r
            .honest_final_values(&run.config)
            .into_iter()
            .map(|a| a.and_then(|a| a.value().cloned()))
            .collect();
        ensure(
            finals.len() == run.config.agents.len()
                && finals.iter().all(|v| v.is_some() && *v == finals[0]),
            || format!("run {i}: final values differ: {finals:?}"),
        )?;
        ensure(
            r.rejected_by.is_empty() && r.diverging_nodes.is_empty(),
            || {
                format!(
                    "run {i}: rejected by {:?}, diverging {:?}",
                    r.rejected_by, r.diverging_nodes
                )
            },
        )?;
        for (node, chain) in run.engine.node_chains() {
            let block = chain
                .get(1)
                .ok_or_else(|| format!("run {i}: node {node} has no block"))?;
            verify_block(None, block)
                .map_err(|e| format!("run {i}: node {node} rejects its block: {e}"))?;
            let theirs = final_values_from_transcript(block);
            ensure(
                theirs.len() == finals.len() && theirs.iter().all(|v| *v == finals[0]),
                || format!("run {i}: node {node} reads final values {theirs:?}"),
            )?;
            ensure(block.hash() == r.block.hash(), || {
                format!("run {i}: node {node} holds a different block")
            })?;
        }
    }
    ensure(successes > 0, || "no Success block among 200 runs".into())?;
    Ok(format!("{successes}/200 Success blocks, 0 violations"))
}

/// The canonical chain and every participant's chain sit at `expected`,
/// byte for byte.
fn one_block_each(
    engine: &Engine,
    participants: &BTreeSet<AgentId>,
    expected: u64,
    label: &str,
) -> Result<(), String> {
    ensure(engine.chain().height() == expected, || {
        format!(
            "{label}: canonical height {} after {expected} deliberations",
            engine.chain().height()
        )
    })?;
    let canonical = engine.chain().to_bytes().map_err(|e| e.to_string())?;
    for node in participants {
        let chain = engine
            .node_chain(node)
            .ok_or_else(|| format!("{label}: node {node} has no chain"))?;
        ensure(chain.height() == expected, || {
            format!("{label}: node {node} at height {}", chain.height())
        })?;
        ensure(
            chain.to_bytes().map_err(|e| e.to_string())? == canonical,
            || format!("{label}: node {node} chain differs"),
        )?;
    }
    Ok(())
}

fn criterion_4(runs: &[Run]) -> Check {
    for (i, run) in runs.iter().enumerate() {
        one_block_each(
            &run.engine,
            &run.config.agent_set(),
            1,
            &format!("convergent run {i}"),
        )?;
    }

    let mut outcomes: BTreeMap<String, usize> = BTreeMap::new();
    let mut adversarial = 0;
    for (kind, count) in [("stubborn", 17u64), ("drop", 17), ("timeout", 16)] {
        let mut engine = Engine::new();
        for k in 0..count {
            let seed = 5000 + k;
            let mut agents: Vec<AgentSpec> = (0..3)
                .map(|a| {
                    agent(
                        seed,
                        a,
                        AgentBehavior::convergent(Action::definitive("42", ""), 1.0, a),
                    )
                })
                .collect();
            let mut config = match kind {
                "stubborn" => {
                    let mut dissenter = agent(
                        seed,
                        3,
                        AgentBehavior::stubborn(Action::definitive("41", "")),
                    );
                    dissenter.honest = false;
                    agents.push(dissenter);
                    DeliberationConfig::new(agents, 3)
                }
                "drop" => DeliberationConfig::new(agents, 2).with_network(NetworkConfig {
                    link: LinkModel {
                        drop_probability: 1.0,
                        ..Default::default()
                    },
                    ..Default::default()
                }),
                _ => DeliberationConfig::new(agents, 2).with_timeout(5 + k),
            };
            config = config.with_seed(seed);
            let before = engine.chain().height();
            let r = engine
                .run_deliberation(&config, &answer_problem(&format!("{kind}-{k}")))
                .map_err(|e| format!("{kind} run {k}: {e}"))?;
            one_block_each(
                &engine,
                &config.agent_set(),
                before + 1,
                &format!("{kind} run {k}"),
            )?;
            *outcomes
                .entry(format!("{:?}", r.record.outcome))
                .or_default() += 1;
            adversarial += 1;
        }
    }
    Ok(format!(
        "{} deliberations, {} blocks, 0 missing; adversarial outcomes {outcomes:?}",
        runs.len() + adversarial,
        runs.len() + adversarial
    ))
}

fn criterion_10(runs: &[Run], extra: &[DeliberationResult]) -> Check {
    let mut checked = 0;
    for r in runs.iter().map(|r| &r.result).chain(extra) {
        if r.record.outcome != RecordOutcome::Success {
            continue;
        }
        checked += 1;
        let record = r.block.record();
        let n = record.agents.len();
        ensure(record.participation() == Fraction::from_integer(1), || {
            format!(
                "{}: participation {}",
                record.deliberation_id,
                record.participation()
            )
        })?;
        ensure(r.metrics.participation == Fraction::from_integer(1), || {
            format!(
                "{}: reported participation {}",
                record.deliberation_id, r.metrics.participation
            )
        })?;
        for (t, round) in record.actions_by_round.iter().enumerate().skip(1) {
            let voting = round.values().filter(|a| !a.is_abstention()).count();
            ensure(voting == n, || {
                format!(
                    "{}: turn {t} has {voting}/{n} contributors",
                    record.deliberation_id
                )
            })?;
        }
    }
    ensure(checked > 0, || "no Success blocks to check".into())?;
    Ok(format!("{checked} Success blocks, all at participation 1"))
}

// ---------------------------------------------------------------------------
// 5. hung / restart gating

fn criterion_5() -> Check {
    let problem = answer_problem("gate");
    let mut agents: Vec<AgentSpec> = (0..3)
        .map(|a| {
            agent(
                9,
                a,
                AgentBehavior::convergent(Action::definitive("42", ""), 1.0, a),
            )
        })
        .collect();
    agents.push(agent(
        9,
        3,
        AgentBehavior::stubborn(Action::definitive("41", "")),
    ));
    let config = DeliberationConfig::new(agents.clone(), 2);
    let mut engine = Engine::new();

    let r = engine
        .run_deliberation(&config, &problem)
        .map_err(|e| e.to_string())?;
    ensure(
        r.record.outcome == RecordOutcome::Hung(HungReason::NoConvergence),
        || format!("stubborn run ended {:?}", r.record.outcome),
    )?;
    ensure(r.block.is_empty(), || {
        "hung run did not produce an empty block".into()
    })?;
    ensure(
        engine.hung_set().failed_sets(&problem.id) == [config.agent_set()],
        || "problem not in the hung set with the failing agent set".into(),
    )?;

    let refused = engine.run_deliberation(&config, &problem);
    ensure(matches!(refused, Err(EngineError::StartRefused(_))), || {
        format!(
            "identical set was not refused: {:?}",
            refused.map(|r| r.record.outcome)
        )
    })?;
    ensure(engine.chain().height() == 1, || {
        "refused start appended a block".into()
    })?;

    agents[3] = agent(
        9,
        4,
        AgentBehavior::convergent(Action::definitive("42", ""), 1.0, 4),
    );
    let swapped = DeliberationConfig::new(agents, 2);
    let r = engine
        .run_deliberation(&swapped, &problem)
        .map_err(|e| format!("swap refused: {e}"))?;
    ensure(engine.chain().height() == 2, || {
        "admitted run appended no block".into()
    })?;
    Ok(format!(
        "hung → refused → swap admitted ({:?})",
        r.record.outcome
    ))
}

// ---------------------------------------------------------------------------
// 6. gossip dissemination, bandwidth and signature fuzzing

fn body_of(len: usize, i: usize) -> String {
    let tail = format!("\nANSWER: {i}");
    format!("{}{tail}", "r".repeat(len.saturating_sub(tail.len())))
}

fn signed(identity: &NodeIdentity, body: String) -> Utterance {
    let unsigned = UnsignedUtterance {
        deliberation_id: "gossip#0".into(),
        round: Round::Initial,
        turn: 0,
        agent: identity.node_id(),
        body,
    };
    sign_utterance(identity, unsigned, ProblemKind::Definitive).unwrap()
}

fn mutate(rng: &mut ChaCha8Rng, bytes: &[u8], donors: &[Vec<u8>]) -> Vec<u8> {
    let mut out = bytes.to_vec();
    match rng.random_range(0..6) {
        0 => {
            let i = rng.random_range(0..out.len());
            out[i] ^= 1 << rng.random_range(0..8);
        }
        1 => {
            let i = rng.random_range(0..out.len());
            out[i] = out[i].wrapping_add(rng.random_range(1..=255));
        }
        2 => {
            for _ in 0..rng.random_range(2..=8) {
                let i = rng.random_range(0..out.len());
                out[i] ^= rng.random_range(1..=255u8);
            }
        }
        3 => out.truncate(rng.random_range(0..out.len())),
        4 => {
            let i = rng.random_range(0..=out.len());
            out.insert(i, rng.random());
        }
        _ => {
            // splice a random window from another valid utterance
            let donor = &donors[rng.random_range(0..donors.len())];
            let len = rng.random_range(1..=64.min(donor.len()).min(out.len()));
            let from = rng.random_range(0..=donor.len() - len);
            let to = rng.random_range(0..=out.len() - len);
            out[to..to + len].copy_from_slice(&donor[from..from + len]);
            if out == bytes {
                out[to] ^= 0x80;
            }
        }
    }
    out
}

fn criterion_6() -> Check {
    let n = 10;
    let identities: Vec<NodeIdentity> = (0..n).map(|i| NodeIdentity::derive(606, i)).collect();
    let ids: Vec<AgentId> = identities.iter().map(NodeIdentity::node_id).collect();
    let mut bandwidth = Vec::new();

    for body_len in [33, 64, 256, 1024] {
        let mut net = SimNetwork::new(
            &ids,
            ProblemKind::Definitive,
            &NetworkConfig::default(),
            body_len as u64,
        )
        .map_err(|e| e.to_string())?;
        let utterances: Vec<Utterance> = identities
            .iter()
            .enumerate()
            .map(|(i, id)| signed(id, body_of(body_len, i)))
            .collect();
        for u in &utterances {
            net.publish(u.clone()).map_err(|e| e.to_string())?;
        }
        net.run_to_quiescence();
        let digests: Vec<_> = utterances.iter().map(|u| u.digest).collect();
        ensure(net.all_hold(&digests), || {
            format!("body {body_len}: dissemination incomplete")
        })?;

        let s = net.transport().stats();
        let per_digest = s.announce_bytes as f64 / s.announced_digests as f64;
        let per_utterance = s.data_bytes as f64 / s.data_utterances as f64;
        ensure(per_digest < per_utterance, || {
            format!("body {body_len}: announce {per_digest:.1} B/digest vs data {per_utterance:.1} B/utterance")
        })?;
        bandwidth.push(format!(
            "{body_len}B: {per_digest:.0} < {per_utterance:.0} B/item (totals {}/{})",
            s.announce_bytes, s.data_bytes
        ));
    }

    // a tampered utterance pushed straight at every node
    let mut net = SimNetwork::new(&ids, ProblemKind::Definitive, &NetworkConfig::default(), 7)
        .map_err(|e| e.to_string())?;
    let originals: Vec<Utterance> = identities
        .iter()
        .enumerate()
        .map(|(i, id)| signed(id, body_of(200, i)))
        .collect();
    for u in &originals {
        net.publish(u.clone()).map_err(|e| e.to_string())?;
    }
    net.run_to_quiescence();
    let held: usize = net.nodes().map(|n| n.utterances().count()).sum();

    let mut tampered = originals[3].clone();
    tampered.body = body_of(200, 99);
    tampered.action = extract_action(&tampered.body, ProblemKind::Definitive);
    for victim in &ids[..] {
        net.transport_mut().send(
            ids[3],
            *victim,
            GossipMessage::Data {
                utterances: vec![tampered.clone()],
            },
        );
    }
    net.run_to_quiescence();

    let donors: Vec<Vec<u8>> = originals.iter().map(Utterance::encode).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let mut decoded = 0;
    for k in 0..10_000 {
        let source = &donors[k % donors.len()];
        let bytes = mutate(&mut rng, source, &donors);
        let Ok(u) = Utterance::decode(&bytes, ProblemKind::Definitive) else {
            continue;
        };
        decoded += 1;
        let victim = ids[rng.random_range(0..ids.len())];
        net.transport_mut().send(
            u.agent,
            victim,
            GossipMessage::Data {
                utterances: vec![u],
            },
        );
        net.run_to_quiescence();
    }
    let after: usize = net.nodes().map(|n| n.utterances().count()).sum();
    let invalid = net
        .nodes()
        .flat_map(|n| n.utterances())
        .filter(|u| !u.verify())
        .count();
    ensure(invalid == 0, || {
        format!("{invalid} held utterances fail verification")
    })?;
    ensure(after == held, || {
        format!("{} fuzzed utterances accepted", after - held)
    })?;
    Ok(format!(
        "all 10 nodes hold all; {}; 10000 mutations ({decoded} decodable) + 1 tampered: 0 accepted",
        bandwidth.join(", ")
    ))
}

// ---------------------------------------------------------------------------
// 7. block size

fn padded_answer(len: usize, v: &str) -> String {
    let tail = format!("\nANSWER: {v}");
    format!("{}{tail}", "w".repeat(len - tail.len()))
}

fn sized_run(
    n: u64,
    turns: u32,
    body_len: usize,
    dissent: bool,
) -> Result<DeliberationResult, String> {
    let agents = (0..n)
        .map(|a| {
            let script: Vec<String> = (0..=turns)
                .map(|t| {
                    let v = if dissent && a == 0 && t < turns {
                        "41"
                    } else {
                        "42"
                    };
                    padded_answer(body_len, v)
                })
                .collect();
            agent(70, a, AgentBehavior::scripted(script))
        })
        .collect();
    let config = DeliberationConfig::new(agents, turns).with_timeout(1 << 40);
    Engine::new()
        .run_deliberation(&config, &answer_problem("size"))
        .map_err(|e| e.to_string())
}

fn criterion_7() -> Check {
    let mut points = Vec::new();
    for t in 1..=8u32 {
        let r = sized_run(4, t, 1024, true)?;
        ensure(
            r.record.outcome == RecordOutcome::Success && r.metrics.turns_used == t,
            || {
                format!(
                    "T={t}: {:?} after {} turns",
                    r.record.outcome, r.metrics.turns_used
                )
            },
        )?;
        let size = canonical_serialize(&r.block)
            .map_err(|e| e.to_string())?
            .len();
        points.push((f64::from(t), size as f64));
    }
    let k = points.len() as f64;
    let (sx, sy) = points
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / k, sy / k);
    let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = points.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let worst = points
        .iter()
        .map(|(x, y)| ((y - (intercept + slope * x)) / y).abs())
        .fold(0.0, f64::max);
    ensure(worst < 0.05, || {
        format!("worst residual {:.2}%", worst * 100.0)
    })?;

    let small = sized_run(3, 2, 1024, false)?;
    let small_size = canonical_serialize(&small.block)
        .map_err(|e| e.to_string())?
        .len();
    ensure(
        small.record.outcome == RecordOutcome::Success && small_size < 30 * 1024,
        || {
            format!(
                "3 agents x 2 turns: {:?}, {small_size} bytes",
                small.record.outcome
            )
        },
    )?;

    // 4 agents, 2 turns: 12 bodies, crossing the cap between 8 KB and 9 KB each
    let (mut fits, mut oversize) = (0, 0);
    for body_len in (8_000..=9_000).step_by(100) {
        let r = sized_run(4, 2, body_len, true)?;
        match r.record.outcome {
            RecordOutcome::Success => {
                ensure(r.block.encoded_len() <= MAX_BLOCK_BYTES, || {
                    format!("{body_len}: oversize Success block")
                })?;
                fits += 1;
            }
            RecordOutcome::Hung(HungReason::Oversize) => {
                ensure(r.block.is_empty(), || {
                    format!("{body_len}: oversize run left a non-empty block")
                })?;
                oversize += 1;
            }
            other => return Err(format!("{body_len}: unexpected {other:?}")),
        }
        if body_len * 12 > MAX_BLOCK_BYTES {
            ensure(
                r.record.outcome == RecordOutcome::Hung(HungReason::Oversize),
                || {
                    format!(
                        "{body_len}: bodies alone exceed the cap but run ended {:?}",
                        r.record.outcome
                    )
                },
            )?;
        }
    }
    ensure(fits > 0 && oversize > 0, || {
        format!("cap never crossed ({fits} fit, {oversize} oversize)")
    })?;
    Ok(format!(
        "size ≈ {intercept:.0} + {slope:.0}·T bytes, worst residual {:.2}%; 3x2 block {small_size} B; \
         {oversize} oversize runs → empty blocks",
        worst * 100.0
    ))
}

// ---------------------------------------------------------------------------
// 8. determinism

fn files_under(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(
                    path.strip_prefix(root).unwrap().to_path_buf(),
                    fs::read(&path).unwrap(),
                );
            }
        }
    }
    out
}

fn criterion_8() -> Check {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/scenarios/sweep.toml");
    let scenario = Scenario::load(&path).map_err(|e| e.to_string())?;
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let ra = run_scenario(&scenario, a.path()).map_err(|e| e.to_string())?;
    run_scenario(&scenario, b.path()).map_err(|e| e.to_string())?;
    ensure(ra.all_verified(), || {
        "a chain failed re-verification".into()
    })?;
    let (fa, fb) = (files_under(a.path()), files_under(b.path()));
    ensure(fa.keys().eq(fb.keys()), || {
        "runs wrote different file sets".into()
    })?;
    let differing: Vec<_> = fa
        .iter()
        .filter(|(k, v)| fb[*k] != **v)
        .map(|(k, _)| k.display().to_string())
        .collect();
    ensure(differing.is_empty(), || {
        format!("differing files: {differing:?}")
    })?;
    let chains = fa
        .keys()
        .filter(|k| k.extension().is_some_and(|e| e == "chain"))
        .count();
    ensure(
        chains > 0 && fa.contains_key(Path::new("metrics.csv")),
        || "chain files or metrics missing".into(),
    )?;
    Ok(format!(
        "{} files ({chains} chains, metrics.csv) byte-identical",
        fa.len()
    ))
}

// ---------------------------------------------------------------------------
// 9. accuracy-per-turn shape

fn accuracy_curve(p_adopt: f64, seeds: u64) -> Result<(Vec<f64>, Vec<DeliberationResult>), String> {
    let (n, turns, correct) = (5usize, 5u32, 3usize); // ⌈5 · 0.6⌉ = 3
    let mut sums = vec![0.0; turns as usize + 1];
    let mut results = Vec::new();
    for seed in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(9000 + seed);
        let mut initial: Vec<String> = (0..n)
            .map(|i| {
                if i < correct {
                    "42".to_owned()
                } else {
                    (43 + i).to_string()
                }
            })
            .collect();
        initial.shuffle(&mut rng);
        let agents = initial
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let behavior = AgentBehavior::convergent(
                    Action::definitive(v, ""),
                    p_adopt,
                    seed * 10 + i as u64,
                );
                agent(seed, i as u64, behavior)
            })
            .collect();
        let config = DeliberationConfig::new(agents, turns).with_seed(seed);
        let r = Engine::new()
            .run_deliberation(&config, &answer_problem(&format!("acc-{seed}")))
            .map_err(|e| e.to_string())?;
        let per_turn = r
            .metrics
            .accuracy_per_turn
            .clone()
            .ok_or("accuracy missing")?;
        ensure(!per_turn.is_empty(), || format!("seed {seed}: no rounds"))?;
        // an early exit holds its last accuracy for the unused turns
        for (t, sum) in sums.iter_mut().enumerate() {
            *sum += fraction_to_f64(per_turn[t.min(per_turn.len() - 1)]);
        }
        results.push(r);
    }
    Ok((sums.iter().map(|s| s / seeds as f64).collect(), results))
}

fn criterion_9(successes: &mut Vec<DeliberationResult>) -> Check {
    let band = 0.02;
    let (high, results) = accuracy_curve(0.9, 100)?;
    successes.extend(results);
    for w in high.windows(2) {
        ensure(w[1] >= w[0] - band, || {
            format!("p=0.9 curve decreases: {high:.3?}")
        })?;
    }
    let last = *high.last().unwrap();
    ensure(last >= 1.0 - band, || {
        format!("p=0.9 ends at {last:.3}: {high:.3?}")
    })?;

    let (flat, _) = accuracy_curve(0.0, 100)?;
    ensure(flat.iter().all(|a| (a - 0.6).abs() <= band), || {
        format!("p=0 curve leaves 0.6: {flat:.3?}")
    })?;
    Ok(format!("p=0.9 {high:.3?}; p=0 {flat:.3?}"))
}

// ---------------------------------------------------------------------------

fn guarded(f: impl FnOnce() -> Check) -> Check {
    panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| (*s).to_owned()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    })
}

fn main() {
    panic::set_hook(Box::new(|_| {}));
    let mut results: Vec<(u8, &str, Check)> = Vec::new();
    let mut report = |id: u8, name: &'static str, check: Check| {
        match &check {
            Ok(detail) => println!("[PASS] {id:>2} {name}: {detail}"),
            Err(why) => println!("[FAIL] {id:>2} {name}: {why}"),
        }
        results.push((id, name, check));
    };

    report(1, "consensus math oracle", guarded(criterion_1));
    report(2, "worked confidence example", guarded(criterion_2));
    let runs = panic::catch_unwind(convergent_runs).ok();
    let mut accuracy_runs = Vec::new();
    match &runs {
        Some(runs) => {
            report(
                3,
                "definitive unanimity and consistency",
                guarded(|| criterion_3(runs)),
            );
            report(4, "liveness", guarded(|| criterion_4(runs)));
        }
        None => {
            report(
                3,
                "definitive unanimity and consistency",
                Err("convergent runs panicked".into()),
            );
            report(4, "liveness", Err("convergent runs panicked".into()));
        }
    }
    report(5, "hung/restart gating", guarded(criterion_5));
    report(
        6,
        "gossip dissemination and bandwidth",
        guarded(criterion_6),
    );
    report(7, "block size", guarded(criterion_7));
    report(8, "determinism", guarded(criterion_8));
    report(
        9,
        "accuracy-per-turn shape",
        guarded(|| criterion_9(&mut accuracy_runs)),
    );
    let successes: Vec<DeliberationResult> = accuracy_runs
        .into_iter()
        .filter(|r| r.record.outcome == RecordOutcome::Success)
        .collect();
    report(
        10,
        "participation",
        match &runs {
            Some(runs) => guarded(|| criterion_10(runs, &successes)),
            None => Err("convergent runs panicked".into()),
        },
    );

    let failed = results.iter().filter(|(_, _, c)| c.is_err()).count();
    println!(
        "acceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
