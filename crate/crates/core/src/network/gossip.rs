//! Two-phase gossip: digests are announced first, bodies are pulled on demand.

use std::collections::{BTreeMap, BTreeSet};

use crate::crypto::Digest;
use crate::domain::{AgentId, ProblemKind};
use crate::ledger::Block;

use super::Utterance;

#[derive(Clone, Debug, PartialEq)]
pub enum GossipMessage {
    Announce { digests: Vec<Digest> },
    Request { digests: Vec<Digest> },
    Data { utterances: Vec<Utterance> },
    BlockAnnounce { digest: Digest },
    BlockData { block: Box<Block> },
}

impl GossipMessage {
    pub fn kind(&self) -> &'static str {
        match self {
            GossipMessage::Announce { .. } => "announce",
            GossipMessage::Request { .. } => "request",
            GossipMessage::Data { .. } => "data",
            GossipMessage::BlockAnnounce { .. } => "block_announce",
            GossipMessage::BlockData { .. } => "block_data",
        }
    }

    /// Bytes on the wire: a one-byte tag, then 4-byte count or length
    /// prefixes in front of every variable part.
    pub fn wire_len(&self) -> usize {
        match self {
            GossipMessage::Announce { digests } | GossipMessage::Request { digests } => {
                1 + 4 + 32 * digests.len()
            }
            GossipMessage::Data { utterances } => {
                1 + 4
                    + utterances
                        .iter()
                        .map(|u| 4 + u.encoded_len())
                        .sum::<usize>()
            }
            GossipMessage::BlockAnnounce { .. } => 1 + 32,
            GossipMessage::BlockData { block } => 1 + 4 + block.encoded_len(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct NodeStats {
    pub accepted: u64,
    pub rejected: u64,
    pub duplicates: u64,
    pub blocks_matched: u64,
    pub blocks_mismatched: u64,
}

/// One node's gossip state for a single deliberation.
#[derive(Clone, Debug)]
pub struct GossipNode {
    id: AgentId,
    kind: ProblemKind,
    peers: Vec<AgentId>,
    store: BTreeMap<Digest, Utterance>,
    /// Requested but not yet received, with the number of attempts made.
    pending: BTreeMap<Digest, u8>,
    /// Peers that announced each missing digest, in arrival order.
    sources: BTreeMap<Digest, Vec<AgentId>>,
    local_block: Option<Block>,
    seen_blocks: BTreeSet<Digest>,
    pub stats: NodeStats,
}

impl GossipNode {
    pub fn new(id: AgentId, kind: ProblemKind, peers: Vec<AgentId>) -> Self {
        GossipNode {
            id,
            kind,
            peers,
            store: BTreeMap::new(),
            pending: BTreeMap::new(),
            sources: BTreeMap::new(),
            local_block: None,
            seen_blocks: BTreeSet::new(),
            stats: NodeStats::default(),
        }
    }

    pub fn id(&self) -> AgentId {
        self.id
    }

    pub fn peers(&self) -> &[AgentId] {
        &self.peers
    }

    pub fn holds(&self, digest: &Digest) -> bool {
        self.store.contains_key(digest)
    }

    pub fn get(&self, digest: &Digest) -> Option<&Utterance> {
        self.store.get(digest)
    }

    pub fn utterances(&self) -> impl Iterator<Item = &Utterance> {
        self.store.values()
    }

    /// Stores the node's own utterance. Returns false for an invalid one.
    pub fn publish(&mut self, utterance: Utterance) -> bool {
        if utterance.check_for(self.kind).is_err() {
            return false;
        }
        self.store.insert(utterance.digest, utterance);
        true
    }

    /// One `Announce` per peer carrying the held subset of `digests`,
    /// deduplicated in first-seen order. Nothing is sent for an empty list.
    pub fn announce(&self, digests: &[Digest]) -> Vec<(AgentId, GossipMessage)> {
        let mut seen = BTreeSet::new();
        let digests: Vec<Digest> = digests
            .iter()
            .filter(|d| self.holds(d) && seen.insert(**d))
            .copied()
            .collect();
        if digests.is_empty() {
            return Vec::new();
        }
        self.peers
            .iter()
            .map(|p| {
                (
                    *p,
                    GossipMessage::Announce {
                        digests: digests.clone(),
                    },
                )
            })
            .collect()
    }

    /// Requests the announced digests this node neither holds nor has
    /// already asked for. `from` is remembered as a source for retries.
    pub fn handle_announce(&mut self, from: AgentId, digests: &[Digest]) -> Option<GossipMessage> {
        let mut wanted = Vec::new();
        for d in digests {
            if self.holds(d) {
                continue;
            }
            self.note_source(*d, from);
            if !self.pending.contains_key(d) && !wanted.contains(d) {
                wanted.push(*d);
            }
        }
        if wanted.is_empty() {
            return None;
        }
        for d in &wanted {
            self.pending.insert(*d, 1);
        }
        Some(GossipMessage::Request { digests: wanted })
    }

    /// The held subset of the request; unknown digests are skipped.
    pub fn serve_request(&self, digests: &[Digest]) -> GossipMessage {
        GossipMessage::Data {
            utterances: digests
                .iter()
                .filter_map(|d| self.store.get(d))
                .cloned()
                .collect(),
        }
    }

    /// Accepts every utterance whose digest and signature verify and whose
    /// action matches its body. Returns the newly stored ones.
    pub fn ingest_data(&mut self, utterances: Vec<Utterance>) -> Vec<Utterance> {
        let mut accepted = Vec::new();
        for u in utterances {
            if u.check_for(self.kind).is_err() {
                self.stats.rejected += 1;
                continue;
            }
            self.pending.remove(&u.digest);
            self.sources.remove(&u.digest);
            if self.store.contains_key(&u.digest) {
                self.stats.duplicates += 1;
                continue;
            }
            self.stats.accepted += 1;
            self.store.insert(u.digest, u.clone());
            accepted.push(u);
        }
        accepted
    }

    fn note_source(&mut self, digest: Digest, peer: AgentId) {
        let known = self.sources.entry(digest).or_default();
        if !known.contains(&peer) {
            known.push(peer);
        }
    }

    /// Re-requests whatever in `digests` is still pending, rotating through
    /// the peers that announced each digest. Digests past `max_attempts` are
    /// forgotten so a later announce can start over. Returns one request
    /// batch per source peer.
    pub(crate) fn retry_plan(
        &mut self,
        digests: &[Digest],
        max_attempts: u8,
    ) -> Vec<(AgentId, Vec<Digest>)> {
        let mut plan: BTreeMap<AgentId, Vec<Digest>> = BTreeMap::new();
        for d in digests {
            let Some(n) = self.pending.get_mut(d) else {
                continue;
            };
            let sources = self.sources.get(d).map(Vec::as_slice).unwrap_or(&[]);
            if *n >= max_attempts || sources.is_empty() {
                self.pending.remove(d);
                continue;
            }
            let peer = sources[*n as usize % sources.len()];
            *n += 1;
            let batch = plan.entry(peer).or_default();
            if !batch.contains(d) {
                batch.push(*d);
            }
        }
        plan.into_iter().collect()
    }

    pub fn set_local_block(&mut self, block: Block) {
        self.seen_blocks.insert(block.hash());
        self.local_block = Some(block);
    }

    pub fn local_block(&self) -> Option<&Block> {
        self.local_block.as_ref()
    }

    pub fn knows_block(&self, digest: &Digest) -> bool {
        self.seen_blocks.contains(digest)
    }

    pub(crate) fn request_block(&mut self, from: AgentId, digest: Digest) -> Option<GossipMessage> {
        if self.knows_block(&digest) {
            return None;
        }
        self.note_source(digest, from);
        if self.pending.contains_key(&digest) {
            return None;
        }
        self.pending.insert(digest, 1);
        Some(GossipMessage::Request {
            digests: vec![digest],
        })
    }

    pub(crate) fn serve_block(&self, digests: &[Digest]) -> Option<GossipMessage> {
        let block = self.local_block.as_ref()?;
        let hash = block.hash();
        digests.contains(&hash).then(|| GossipMessage::BlockData {
            block: Box::new(block.clone()),
        })
    }

    /// Compares a received block with the locally built one. Returns true the
    /// first time a block is seen.
    pub fn ingest_block(&mut self, block: &Block) -> bool {
        let hash = block.hash();
        self.pending.remove(&hash);
        self.sources.remove(&hash);
        match &self.local_block {
            Some(local) if local.hash() == hash => self.stats.blocks_matched += 1,
            _ => self.stats.blocks_mismatched += 1,
        }
        self.seen_blocks.insert(hash)
    }
}
