use std::collections::BTreeSet;
use std::fmt;

use num_rational::Ratio;
use serde::{Serialize, Serializer};

use super::ConsensusError;

/// Exact rational used for agreement levels, confidence and payoffs.
pub type Fraction = Ratio<u64>;

/// Agent (and node) identifier: the SHA-256 digest of the node's public key.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AgentId(pub [u8; 32]);

impl AgentId {
    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    /// First eight hex characters, for logs and tables.
    pub fn short(&self) -> String {
        hex::encode(&self.0[..4])
    }
}

impl fmt::Debug for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AgentId({})", self.short())
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.short())
    }
}

impl Serialize for AgentId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ProblemId(String);

impl ProblemId {
    pub fn new(id: impl Into<String>) -> Self {
        ProblemId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ProblemId {
    fn from(s: &str) -> Self {
        ProblemId(s.to_owned())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    /// A unique correct value exists; consensus means unanimity.
    Definitive,
    /// The answer is a set of policies; consensus is graded.
    Prioritized,
}

impl ProblemKind {
    pub fn tag(self) -> u8 {
        match self {
            ProblemKind::Definitive => 0,
            ProblemKind::Prioritized => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(ProblemKind::Definitive),
            1 => Some(ProblemKind::Prioritized),
            _ => None,
        }
    }
}

/// The subject of a deliberation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Problem {
    pub id: ProblemId,
    pub statement: String,
    pub kind: ProblemKind,
    /// Used for accuracy metrics only; never consulted by consensus.
    pub ground_truth: Option<CanonicalValue>,
}

impl Problem {
    pub fn new(
        id: impl Into<ProblemId>,
        statement: impl Into<String>,
        kind: ProblemKind,
    ) -> Result<Self, ConsensusError> {
        let statement = statement.into();
        if statement.trim().is_empty() {
            return Err(ConsensusError::EmptyStatement);
        }
        Ok(Problem {
            id: id.into(),
            statement,
            kind,
            ground_truth: None,
        })
    }

    pub fn definitive(id: &str, statement: &str) -> Result<Self, ConsensusError> {
        Problem::new(id, statement, ProblemKind::Definitive)
    }

    pub fn prioritized(id: &str, statement: &str) -> Result<Self, ConsensusError> {
        Problem::new(id, statement, ProblemKind::Prioritized)
    }

    pub fn with_ground_truth(mut self, truth: &str) -> Self {
        self.ground_truth = normalize_value(truth);
        self
    }
}

impl From<String> for ProblemId {
    fn from(s: String) -> Self {
        ProblemId(s)
    }
}

/// A normalized answer or policy string. Only [`normalize_value`] builds these.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct CanonicalValue(String);

impl CanonicalValue {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for CanonicalValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Canonical form of a free-text answer.
///
/// Trims, case-folds and collapses runs of whitespace. Plain decimal numbers
/// are rewritten without a `+` sign, leading integer zeros or trailing
/// fractional zeros, so `" 042.50 "` and `"42.5"` compare equal.
///
/// `None` is the abstention marker: nothing was left after normalization.
pub fn normalize_value(text: &str) -> Option<CanonicalValue> {
    let folded = text
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase();
    if folded.is_empty() {
        return None;
    }
    Some(CanonicalValue(canonical_number(&folded).unwrap_or(folded)))
}

fn canonical_number(s: &str) -> Option<String> {
    let (negative, unsigned) = match s.as_bytes()[0] {
        b'-' => (true, &s[1..]),
        b'+' => (false, &s[1..]),
        _ => (false, s),
    };
    let (int_part, frac_part) = match unsigned.split_once('.') {
        Some((i, f)) => (i, f),
        None => (unsigned, ""),
    };
    let all_digits = |p: &str| p.bytes().all(|b| b.is_ascii_digit());
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !all_digits(int_part) || !all_digits(frac_part) {
        return None;
    }

    let int_part = int_part.trim_start_matches('0');
    let frac_part = frac_part.trim_end_matches('0');
    let mut out = String::with_capacity(s.len());
    if negative && !(int_part.is_empty() && frac_part.is_empty()) {
        out.push('-');
    }
    out.push_str(if int_part.is_empty() { "0" } else { int_part });
    if !frac_part.is_empty() {
        out.push('.');
        out.push_str(frac_part);
    }
    Some(out)
}

/// Decision content extracted from one utterance.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Action {
    /// No decision could be read from the utterance.
    Abstain,
    /// A value with its supporting argument.
    Definitive {
        value: CanonicalValue,
        argument: String,
    },
    /// A set of proposed policies. An empty set is an abstention.
    Prioritized { policies: BTreeSet<CanonicalValue> },
}

impl Action {
    /// Builds a definitive action, or `Abstain` when the value normalizes to nothing.
    pub fn definitive(value: &str, argument: impl Into<String>) -> Self {
        match normalize_value(value) {
            Some(value) => Action::Definitive {
                value,
                argument: argument.into(),
            },
            None => Action::Abstain,
        }
    }

    pub fn prioritized<'a>(policies: impl IntoIterator<Item = &'a str>) -> Self {
        Action::Prioritized {
            policies: policies.into_iter().filter_map(normalize_value).collect(),
        }
    }

    pub fn is_abstention(&self) -> bool {
        match self {
            Action::Abstain => true,
            Action::Definitive { .. } => false,
            Action::Prioritized { policies } => policies.is_empty(),
        }
    }

    pub fn value(&self) -> Option<&CanonicalValue> {
        match self {
            Action::Definitive { value, .. } => Some(value),
            _ => None,
        }
    }

    pub fn policies(&self) -> Option<&BTreeSet<CanonicalValue>> {
        match self {
            Action::Prioritized { policies } => Some(policies),
            _ => None,
        }
    }

    /// Same decision with the argument text dropped; what the ledger records.
    pub fn without_argument(&self) -> Action {
        match self {
            Action::Definitive { value, .. } => Action::Definitive {
                value: value.clone(),
                argument: String::new(),
            },
            other => other.clone(),
        }
    }

    pub fn is_compatible_with(&self, kind: ProblemKind) -> bool {
        !matches!(
            (self, kind),
            (Action::Definitive { .. }, ProblemKind::Prioritized)
                | (Action::Prioritized { .. }, ProblemKind::Definitive)
        )
    }
}

/// Acceptance threshold θ for graded consensus, an exact fraction in (0, 1].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Threshold(Fraction);

impl Threshold {
    pub fn new(numer: u64, denom: u64) -> Result<Self, ConsensusError> {
        if denom == 0 || numer == 0 || numer > denom {
            return Err(ConsensusError::InvalidThreshold(format!("{numer}/{denom}")));
        }
        Ok(Threshold(Fraction::new(numer, denom)))
    }

    /// Parses a plain decimal such as `"0.3"` exactly (no binary rounding).
    pub fn from_decimal(text: &str) -> Result<Self, ConsensusError> {
        let bad = || ConsensusError::InvalidThreshold(text.to_owned());
        let t = text.trim();
        let (int_part, frac_part) = t.split_once('.').unwrap_or((t, ""));
        if (int_part.is_empty() && frac_part.is_empty())
            || !int_part.bytes().all(|b| b.is_ascii_digit())
            || !frac_part.bytes().all(|b| b.is_ascii_digit())
            || frac_part.len() > 18
        {
            return Err(bad());
        }
        let denom = 10u64.pow(frac_part.len() as u32);
        let int: u64 = if int_part.is_empty() {
            0
        } else {
            int_part.parse().map_err(|_| bad())?
        };
        let frac: u64 = if frac_part.is_empty() {
            0
        } else {
            frac_part.parse().map_err(|_| bad())?
        };
        let numer = int
            .checked_mul(denom)
            .and_then(|v| v.checked_add(frac))
            .ok_or_else(bad)?;
        Threshold::new(numer, denom).map_err(|_| bad())
    }

    /// Converts through the shortest decimal rendering of `value`, so `0.3`
    /// becomes exactly 3/10.
    pub fn from_f64(value: f64) -> Result<Self, ConsensusError> {
        if !value.is_finite() {
            return Err(ConsensusError::InvalidThreshold(value.to_string()));
        }
        Threshold::from_decimal(&format!("{value}"))
    }

    pub fn fraction(&self) -> Fraction {
        self.0
    }
}

impl Default for Threshold {
    fn default() -> Self {
        Threshold(Fraction::new(1, 2))
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub fn fraction_to_f64(f: Fraction) -> f64 {
    *f.numer() as f64 / *f.denom() as f64
}
