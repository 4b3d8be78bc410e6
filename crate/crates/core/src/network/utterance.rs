use serde::Serialize;

use super::NetworkError;
use crate::agent::extract_action;
use crate::codec::{CodecError, Reader, Writer};
use crate::crypto::{
    node_id_for, verify_signature, Digest, NodeIdentity, PUBLIC_KEY_LEN, SIGNATURE_LEN,
};
use crate::domain::{Action, AgentId, ProblemKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Round {
    Initial,
    Reflection,
    Conclusion,
}

impl Round {
    pub fn tag(self) -> u8 {
        match self {
            Round::Initial => 0,
            Round::Reflection => 1,
            Round::Conclusion => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Round::Initial),
            1 => Some(Round::Reflection),
            2 => Some(Round::Conclusion),
            _ => None,
        }
    }
}

/// The signed part of an utterance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnsignedUtterance {
    pub deliberation_id: String,
    pub round: Round,
    pub turn: u32,
    pub agent: AgentId,
    pub body: String,
}

impl UnsignedUtterance {
    /// `[len][deliberation_id] [round u8] [turn u32] [agent 32B] [len][body]`
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.str(&self.deliberation_id)
            .u8(self.round.tag())
            .u32(self.turn)
            .fixed(self.agent.as_bytes())
            .str(&self.body);
        w.finish()
    }
}

/// One agent's signed contribution at a (round, turn).
///
/// `action` is not signed; it is always re-derived from `body`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Utterance {
    pub deliberation_id: String,
    pub round: Round,
    pub turn: u32,
    pub agent: AgentId,
    pub body: String,
    pub action: Action,
    pub public_key: [u8; PUBLIC_KEY_LEN],
    pub signature: [u8; SIGNATURE_LEN],
    pub digest: Digest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Invalid {
    DigestMismatch,
    KeyMismatch,
    BadSignature,
    ActionMismatch,
}

pub fn sign_utterance(
    identity: &NodeIdentity,
    unsigned: UnsignedUtterance,
    kind: ProblemKind,
) -> Result<Utterance, NetworkError> {
    if unsigned.agent != identity.node_id() {
        return Err(NetworkError::IdentityMismatch {
            expected: identity.node_id(),
            found: unsigned.agent,
        });
    }
    let bytes = unsigned.canonical_bytes();
    let signature = identity.sign(&bytes);
    let action = extract_action(&unsigned.body, kind);
    Ok(Utterance {
        deliberation_id: unsigned.deliberation_id,
        round: unsigned.round,
        turn: unsigned.turn,
        agent: unsigned.agent,
        body: unsigned.body,
        action,
        public_key: identity.public_key(),
        signature,
        digest: Digest::of(&bytes),
    })
}

impl Utterance {
    pub fn unsigned(&self) -> UnsignedUtterance {
        UnsignedUtterance {
            deliberation_id: self.deliberation_id.clone(),
            round: self.round,
            turn: self.turn,
            agent: self.agent,
            body: self.body.clone(),
        }
    }

    pub fn canonical_bytes(&self) -> Vec<u8> {
        self.unsigned().canonical_bytes()
    }

    /// Digest, key binding and signature.
    pub fn check(&self) -> Result<(), Invalid> {
        let bytes = self.canonical_bytes();
        if Digest::of(&bytes) != self.digest {
            return Err(Invalid::DigestMismatch);
        }
        if node_id_for(&self.public_key) != self.agent {
            return Err(Invalid::KeyMismatch);
        }
        if !verify_signature(&self.public_key, &bytes, &self.signature) {
            return Err(Invalid::BadSignature);
        }
        Ok(())
    }

    /// [`check`](Self::check) plus the extracted action matching the body.
    pub fn check_for(&self, kind: ProblemKind) -> Result<(), Invalid> {
        self.check()?;
        if extract_action(&self.body, kind) != self.action {
            return Err(Invalid::ActionMismatch);
        }
        Ok(())
    }

    pub fn verify(&self) -> bool {
        self.check().is_ok()
    }

    /// Wire form: canonical bytes, then the public key, then the signature.
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.fixed(&self.canonical_bytes())
            .fixed(&self.public_key)
            .fixed(&self.signature);
        w.finish()
    }

    pub fn encoded_len(&self) -> usize {
        4 + self.deliberation_id.len()
            + 1
            + 4
            + 32
            + 4
            + self.body.len()
            + PUBLIC_KEY_LEN
            + SIGNATURE_LEN
    }

    /// Decodes a wire utterance. The digest and action are recomputed, so a
    /// decoded utterance is only trustworthy after [`check`](Self::check).
    pub fn decode(bytes: &[u8], kind: ProblemKind) -> Result<Utterance, CodecError> {
        let mut r = Reader::new(bytes);
        let u = Utterance::read(&mut r, kind)?;
        r.finish()?;
        Ok(u)
    }

    pub(crate) fn read(r: &mut Reader<'_>, kind: ProblemKind) -> Result<Utterance, CodecError> {
        let start = r.position();
        let deliberation_id = r.string("deliberation id")?;
        let tag = r.u8()?;
        let round = Round::from_tag(tag).ok_or(CodecError::InvalidTag { tag, what: "round" })?;
        let turn = r.u32()?;
        let agent = AgentId(r.array()?);
        let body = r.string("utterance body")?;
        let signed_len = r.position() - start;
        let public_key = r.array()?;
        let signature = r.array()?;
        let unsigned = UnsignedUtterance {
            deliberation_id,
            round,
            turn,
            agent,
            body,
        };
        debug_assert_eq!(unsigned.canonical_bytes().len(), signed_len);
        let digest = Digest::of(&unsigned.canonical_bytes());
        let action = extract_action(&unsigned.body, kind);
        Ok(Utterance {
            deliberation_id: unsigned.deliberation_id,
            round,
            turn,
            agent,
            body: unsigned.body,
            action,
            public_key,
            signature,
            digest,
        })
    }
}
