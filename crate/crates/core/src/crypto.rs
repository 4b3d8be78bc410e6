//! Hashing and signatures.
//!
//! Digests are SHA-256. Signatures use Ed25519 with strict verification,
//! which rejects malleable encodings. The rest of the crate only touches the
//! scheme through [`NodeIdentity::sign`] and [`verify_signature`].

use std::fmt;

use ed25519_dalek::{Signature, Signer, SigningKey, VerifyingKey};
use sha2::{Digest as _, Sha256};

use crate::domain::AgentId;

pub const SIGNATURE_LEN: usize = 64;
pub const PUBLIC_KEY_LEN: usize = 32;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    pub const ZERO: Digest = Digest([0; 32]);

    pub fn of(bytes: &[u8]) -> Digest {
        Digest(Sha256::digest(bytes).into())
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", hex::encode(&self.0[..6]))
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl serde::Serialize for Digest {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

/// Node id derived from a public key.
pub fn node_id_for(public_key: &[u8; PUBLIC_KEY_LEN]) -> AgentId {
    AgentId(Digest::of(public_key).0)
}

pub fn verify_signature(
    public_key: &[u8; PUBLIC_KEY_LEN],
    message: &[u8],
    signature: &[u8; SIGNATURE_LEN],
) -> bool {
    let Ok(key) = VerifyingKey::from_bytes(public_key) else {
        return false;
    };
    key.verify_strict(message, &Signature::from_bytes(signature))
        .is_ok()
}

/// A node's signing keypair and the id derived from it.
#[derive(Clone)]
pub struct NodeIdentity {
    key: SigningKey,
    node_id: AgentId,
}

impl NodeIdentity {
    pub fn from_secret(secret: [u8; 32]) -> Self {
        let key = SigningKey::from_bytes(&secret);
        let node_id = node_id_for(key.verifying_key().as_bytes());
        NodeIdentity { key, node_id }
    }

    /// Deterministic identity for simulations: the secret is a hash of the
    /// scenario seed and the node's index.
    pub fn derive(seed: u64, index: u64) -> Self {
        let mut h = Sha256::new();
        h.update(b"delibchain/node-identity");
        h.update(seed.to_be_bytes());
        h.update(index.to_be_bytes());
        NodeIdentity::from_secret(h.finalize().into())
    }

    pub fn node_id(&self) -> AgentId {
        self.node_id
    }

    pub fn public_key(&self) -> [u8; PUBLIC_KEY_LEN] {
        self.key.verifying_key().to_bytes()
    }

    pub fn sign(&self, message: &[u8]) -> [u8; SIGNATURE_LEN] {
        self.key.sign(message).to_bytes()
    }
}

impl fmt::Debug for NodeIdentity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NodeIdentity")
            .field("node_id", &self.node_id)
            .finish_non_exhaustive()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_identities_are_stable_and_distinct() {
        let a = NodeIdentity::derive(1, 0);
        assert_eq!(a.node_id(), NodeIdentity::derive(1, 0).node_id());
        assert_ne!(a.node_id(), NodeIdentity::derive(1, 1).node_id());
        assert_ne!(a.node_id(), NodeIdentity::derive(2, 0).node_id());
        assert_eq!(a.node_id(), node_id_for(&a.public_key()));
    }

    #[test]
    fn signatures_bind_key_and_message() {
        let a = NodeIdentity::derive(9, 0);
        let b = NodeIdentity::derive(9, 1);
        let sig = a.sign(b"hello");
        assert!(verify_signature(&a.public_key(), b"hello", &sig));
        assert!(!verify_signature(&a.public_key(), b"hellp", &sig));
        assert!(!verify_signature(&b.public_key(), b"hello", &sig));
    }
}
