//! Canonical byte layout of records and block bodies.
//!
//! Decoding is strict: every value must already be in canonical form, so a
//! decoded body re-encodes to exactly the input bytes.

use std::collections::{BTreeMap, BTreeSet};

use crate::codec::{CodecError, Reader, Writer};
use crate::domain::{
    normalize_value, Action, AgentId, CanonicalValue, ConsensusOutcome, ConsensusStatus,
    DeliberationRecord, Fraction, Problem, ProblemId, ProblemKind, RecordOutcome, Threshold,
};
use crate::network::Utterance;

fn fraction(w: &mut Writer, f: &Fraction) {
    w.u64(*f.numer()).u64(*f.denom());
}

fn canonical_value(w: &mut Writer, v: &CanonicalValue) {
    w.str(v.as_str());
}

fn optional_value(w: &mut Writer, v: Option<&CanonicalValue>) {
    match v {
        None => {
            w.u8(0);
        }
        Some(v) => {
            w.u8(1);
            canonical_value(w, v);
        }
    }
}

fn action(w: &mut Writer, a: &Action) {
    match a {
        Action::Abstain => {
            w.u8(0);
        }
        Action::Definitive { value, argument } => {
            w.u8(1);
            canonical_value(w, value);
            w.str(argument);
        }
        Action::Prioritized { policies } => {
            w.u8(2).u32(policies.len() as u32);
            for p in policies {
                canonical_value(w, p);
            }
        }
    }
}

pub(crate) fn write_record(w: &mut Writer, r: &DeliberationRecord) {
    w.str(&r.deliberation_id)
        .str(r.problem.id.as_str())
        .str(&r.problem.statement)
        .u8(r.problem.kind.tag());
    optional_value(w, r.problem.ground_truth.as_ref());

    w.u32(r.agents.len() as u32);
    for a in &r.agents {
        w.fixed(a.as_bytes());
    }
    fraction(w, &r.theta.fraction());
    w.u32(r.max_turns).u64(r.timeout).u32(r.min_participants);

    w.u32(r.actions_by_round.len() as u32);
    for round in &r.actions_by_round {
        w.u32(round.len() as u32);
        for (agent, a) in round {
            w.fixed(agent.as_bytes());
            action(w, a);
        }
    }

    let c = &r.consensus;
    w.u8(c.status.tag());
    fraction(w, &c.confidence);
    optional_value(w, c.value.as_ref());
    w.u32(c.accepted_policies.len() as u32);
    for (p, level) in &c.accepted_policies {
        canonical_value(w, p);
        fraction(w, level);
    }
    w.u32(c.agreeing_agents.len() as u32);
    for a in &c.agreeing_agents {
        w.fixed(a.as_bytes());
    }

    w.u32(r.payoff.len() as u32);
    for (a, f) in &r.payoff {
        w.fixed(a.as_bytes());
        fraction(w, f);
    }
    w.u64(r.completed_at).u8(r.outcome.tag());
}

/// `[record][u32 count]{[u32 len][utterance]}*`
pub(crate) fn body_bytes(record: &DeliberationRecord, transcript: &[Utterance]) -> Vec<u8> {
    let mut w = Writer::new();
    write_record(&mut w, record);
    w.u32(transcript.len() as u32);
    for u in transcript {
        w.bytes(&u.encode());
    }
    w.finish()
}

fn read_fraction(r: &mut Reader<'_>) -> Result<Fraction, CodecError> {
    let (n, d) = (r.u64()?, r.u64()?);
    if d == 0 {
        return Err(CodecError::NonCanonical("zero denominator"));
    }
    let f = Fraction::new(n, d);
    if *f.numer() != n || *f.denom() != d {
        return Err(CodecError::NonCanonical("unreduced fraction"));
    }
    Ok(f)
}

fn read_value(r: &mut Reader<'_>) -> Result<CanonicalValue, CodecError> {
    let s = r.string("value")?;
    match normalize_value(&s) {
        Some(v) if v.as_str() == s => Ok(v),
        _ => Err(CodecError::NonCanonical("value")),
    }
}

fn read_optional_value(r: &mut Reader<'_>) -> Result<Option<CanonicalValue>, CodecError> {
    match r.u8()? {
        0 => Ok(None),
        1 => Ok(Some(read_value(r)?)),
        tag => Err(CodecError::InvalidTag {
            tag,
            what: "option",
        }),
    }
}

fn read_agent(r: &mut Reader<'_>) -> Result<AgentId, CodecError> {
    Ok(AgentId(r.array()?))
}

fn read_action(r: &mut Reader<'_>) -> Result<Action, CodecError> {
    match r.u8()? {
        0 => Ok(Action::Abstain),
        1 => {
            let value = read_value(r)?;
            let argument = r.string("argument")?;
            Ok(Action::Definitive { value, argument })
        }
        2 => {
            let n = r.count(4)?;
            let mut policies = BTreeSet::new();
            for _ in 0..n {
                if !policies.insert(read_value(r)?) {
                    return Err(CodecError::NonCanonical("duplicate policy"));
                }
            }
            Ok(Action::Prioritized { policies })
        }
        tag => Err(CodecError::InvalidTag {
            tag,
            what: "action",
        }),
    }
}

pub(crate) fn read_record(r: &mut Reader<'_>) -> Result<DeliberationRecord, CodecError> {
    let deliberation_id = r.string("deliberation id")?;
    let problem_id = r.string("problem id")?;
    let statement = r.string("statement")?;
    let tag = r.u8()?;
    let kind = ProblemKind::from_tag(tag).ok_or(CodecError::InvalidTag {
        tag,
        what: "problem kind",
    })?;
    let ground_truth = read_optional_value(r)?;
    let problem = Problem {
        id: ProblemId::new(problem_id),
        statement,
        kind,
        ground_truth,
    };

    let n = r.count(32)?;
    let agents = (0..n)
        .map(|_| read_agent(r))
        .collect::<Result<Vec<_>, _>>()?;
    let theta = read_fraction(r)?;
    let theta = Threshold::new(*theta.numer(), *theta.denom())
        .map_err(|_| CodecError::NonCanonical("theta"))?;
    let max_turns = r.u32()?;
    let timeout = r.u64()?;
    let min_participants = r.u32()?;

    let rounds = r.count(4)?;
    let mut actions_by_round = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        let n = r.count(33)?;
        let mut round = BTreeMap::new();
        for _ in 0..n {
            let agent = read_agent(r)?;
            let a = read_action(r)?;
            if round.insert(agent, a).is_some() {
                return Err(CodecError::NonCanonical("duplicate agent"));
            }
        }
        actions_by_round.push(round);
    }

    let tag = r.u8()?;
    let status = ConsensusStatus::from_tag(tag).ok_or(CodecError::InvalidTag {
        tag,
        what: "consensus status",
    })?;
    let confidence = read_fraction(r)?;
    let value = read_optional_value(r)?;
    let n = r.count(20)?;
    let accepted_policies = (0..n)
        .map(|_| Ok((read_value(r)?, read_fraction(r)?)))
        .collect::<Result<Vec<_>, CodecError>>()?;
    let n = r.count(32)?;
    let agreeing_agents = (0..n)
        .map(|_| read_agent(r))
        .collect::<Result<BTreeSet<_>, _>>()?;
    let consensus = ConsensusOutcome {
        status,
        confidence,
        value,
        accepted_policies,
        agreeing_agents,
    };

    let n = r.count(48)?;
    let mut payoff = BTreeMap::new();
    for _ in 0..n {
        let agent = read_agent(r)?;
        payoff.insert(agent, read_fraction(r)?);
    }
    let completed_at = r.u64()?;
    let tag = r.u8()?;
    let outcome = RecordOutcome::from_tag(tag).ok_or(CodecError::InvalidTag {
        tag,
        what: "outcome",
    })?;

    Ok(DeliberationRecord {
        deliberation_id,
        problem,
        agents,
        theta,
        max_turns,
        timeout,
        min_participants,
        actions_by_round,
        consensus,
        payoff,
        completed_at,
        outcome,
    })
}

pub(crate) fn read_body(bytes: &[u8]) -> Result<(DeliberationRecord, Vec<Utterance>), CodecError> {
    let mut r = Reader::new(bytes);
    let record = read_record(&mut r)?;
    let n = r.count(4)?;
    let mut transcript = Vec::with_capacity(n);
    for _ in 0..n {
        let raw = r.bytes()?;
        transcript.push(Utterance::decode(raw, record.problem.kind)?);
    }
    r.finish()?;
    Ok((record, transcript))
}
