//! Deterministic discrete-event transport.
//!
//! Events are delivered in (time, insertion sequence) order. Latency and loss
//! come from a seeded ChaCha stream, so a seed and a scenario fix the whole
//! delivery schedule.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::gossip::{GossipMessage, GossipNode};
use super::{NetworkError, Utterance};
use crate::crypto::Digest;
use crate::domain::{AgentId, ProblemKind};
use crate::ledger::Block;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkModel {
    pub min_latency: u64,
    pub max_latency: u64,
    pub drop_probability: f64,
}

impl Default for LinkModel {
    fn default() -> Self {
        LinkModel {
            min_latency: 1,
            max_latency: 3,
            drop_probability: 0.0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub enum Topology {
    #[default]
    FullyConnected,
    /// `adjacency[i]` lists the peers of the i-th node, by index into the
    /// node order given to [`SimNetwork::new`].
    Adjacency(Vec<Vec<usize>>),
}

/// Requests per missing digest before a node waits for a fresh announce.
pub const MAX_REQUEST_ATTEMPTS: u8 = 12;

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkConfig {
    pub link: LinkModel,
    pub topology: Topology,
    /// Logical delay before a missing request is re-sent. Each retry goes
    /// to the next peer that announced the digest, up to
    /// [`MAX_REQUEST_ATTEMPTS`] requests in total.
    pub retry_delay: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            link: LinkModel::default(),
            topology: Topology::FullyConnected,
            retry_delay: 8,
        }
    }
}

#[derive(Clone, Debug)]
enum Event {
    Deliver {
        from: AgentId,
        to: AgentId,
        msg: GossipMessage,
    },
    Retry {
        node: AgentId,
        digests: Vec<Digest>,
    },
}

struct Scheduled {
    at: u64,
    seq: u64,
    event: Event,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        (self.at, self.seq) == (other.at, other.seq)
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        (other.at, other.seq).cmp(&(self.at, self.seq))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EventStatus {
    Sent,
    Dropped,
    Delivered,
    Retry,
}

/// One line of the transport event log.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TransportEvent {
    pub time: u64,
    pub seq: u64,
    pub from: String,
    pub to: String,
    pub kind: &'static str,
    pub bytes: usize,
    pub status: EventStatus,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct TrafficStats {
    pub sent: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub announce_bytes: u64,
    pub request_bytes: u64,
    pub data_bytes: u64,
    pub block_bytes: u64,
    /// Digests carried by announce messages.
    pub announced_digests: u64,
    /// Utterances carried by data messages.
    pub data_utterances: u64,
}

pub struct SimTransport {
    clock: u64,
    seq: u64,
    queue: BinaryHeap<Scheduled>,
    link: LinkModel,
    rng: ChaCha8Rng,
    log: Vec<TransportEvent>,
    stats: TrafficStats,
}

impl SimTransport {
    pub fn new(link: LinkModel, seed: u64) -> Self {
        SimTransport {
            clock: 0,
            seq: 0,
            queue: BinaryHeap::new(),
            link,
            rng: ChaCha8Rng::seed_from_u64(seed),
            log: Vec::new(),
            stats: TrafficStats::default(),
        }
    }

    pub fn now(&self) -> u64 {
        self.clock
    }

    pub fn advance(&mut self, ticks: u64) {
        self.clock += ticks;
    }

    pub fn advance_to(&mut self, time: u64) {
        self.clock = self.clock.max(time);
    }

    pub fn is_idle(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn stats(&self) -> TrafficStats {
        self.stats
    }

    pub fn log(&self) -> &[TransportEvent] {
        &self.log
    }

    /// Line-delimited JSON, one record per event.
    pub fn write_log<W: Write>(&self, mut out: W) -> io::Result<()> {
        for e in &self.log {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    fn next_seq(&mut self) -> u64 {
        self.seq += 1;
        self.seq
    }

    /// Enqueues `msg`, or drops it. Returns false when dropped.
    pub fn send(&mut self, from: AgentId, to: AgentId, msg: GossipMessage) -> bool {
        let latency = self
            .rng
            .random_range(self.link.min_latency..=self.link.max_latency.max(self.link.min_latency));
        let roll: f64 = self.rng.random();
        let dropped = roll < self.link.drop_probability;
        let bytes = msg.wire_len();
        let seq = self.next_seq();

        self.stats.sent += 1;
        let counter = match msg {
            GossipMessage::Announce { .. } => &mut self.stats.announce_bytes,
            GossipMessage::Request { .. } => &mut self.stats.request_bytes,
            GossipMessage::Data { .. } => &mut self.stats.data_bytes,
            GossipMessage::BlockAnnounce { .. } | GossipMessage::BlockData { .. } => {
                &mut self.stats.block_bytes
            }
        };
        *counter += bytes as u64;
        match &msg {
            GossipMessage::Announce { digests } => {
                self.stats.announced_digests += digests.len() as u64
            }
            GossipMessage::Data { utterances } => {
                self.stats.data_utterances += utterances.len() as u64
            }
            _ => {}
        }
        self.log.push(TransportEvent {
            time: self.clock,
            seq,
            from: from.short(),
            to: to.short(),
            kind: msg.kind(),
            bytes,
            status: if dropped {
                EventStatus::Dropped
            } else {
                EventStatus::Sent
            },
        });
        if dropped {
            self.stats.dropped += 1;
            return false;
        }
        self.queue.push(Scheduled {
            at: self.clock + latency,
            seq,
            event: Event::Deliver { from, to, msg },
        });
        true
    }

    fn schedule_retry(&mut self, node: AgentId, digests: Vec<Digest>, delay: u64) {
        let seq = self.next_seq();
        self.queue.push(Scheduled {
            at: self.clock + delay,
            seq,
            event: Event::Retry { node, digests },
        });
    }

    /// Pops the next event due at or before `until`, moving the clock to it.
    fn pop_due(&mut self, until: u64) -> Option<(u64, Event)> {
        if self.queue.peek()?.at > until {
            return None;
        }
        let s = self.queue.pop()?;
        self.clock = self.clock.max(s.at);
        Some((s.seq, s.event))
    }
}

/// A set of gossip nodes wired over a [`SimTransport`].
pub struct SimNetwork {
    nodes: BTreeMap<AgentId, GossipNode>,
    transport: SimTransport,
    retry_delay: u64,
}

impl SimNetwork {
    pub fn new(
        ids: &[AgentId],
        kind: ProblemKind,
        config: &NetworkConfig,
        seed: u64,
    ) -> Result<Self, NetworkError> {
        let mut nodes = BTreeMap::new();
        for (i, id) in ids.iter().enumerate() {
            let peers: Vec<AgentId> = match &config.topology {
                Topology::FullyConnected => ids.iter().filter(|p| *p != id).copied().collect(),
                Topology::Adjacency(adj) => {
                    let row = adj.get(i).ok_or(NetworkError::InvalidTopology(format!(
                        "no row for node {i}"
                    )))?;
                    row.iter()
                        .map(|&j| match ids.get(j) {
                            Some(p) if j != i => Ok(*p),
                            _ => Err(NetworkError::InvalidTopology(format!(
                                "bad peer {j} for node {i}"
                            ))),
                        })
                        .collect::<Result<_, _>>()?
                }
            };
            if nodes
                .insert(*id, GossipNode::new(*id, kind, peers))
                .is_some()
            {
                return Err(NetworkError::InvalidTopology(format!(
                    "duplicate node {id}"
                )));
            }
        }
        Ok(SimNetwork {
            nodes,
            transport: SimTransport::new(config.link, seed),
            retry_delay: config.retry_delay,
        })
    }

    pub fn node(&self, id: &AgentId) -> Option<&GossipNode> {
        self.nodes.get(id)
    }

    pub fn node_mut(&mut self, id: &AgentId) -> Option<&mut GossipNode> {
        self.nodes.get_mut(id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &GossipNode> {
        self.nodes.values()
    }

    pub fn transport(&self) -> &SimTransport {
        &self.transport
    }

    pub fn transport_mut(&mut self) -> &mut SimTransport {
        &mut self.transport
    }

    pub fn now(&self) -> u64 {
        self.transport.now()
    }

    /// Stores `utterance` at its author's node and announces it to the
    /// author's peers.
    pub fn publish(&mut self, utterance: Utterance) -> Result<(), NetworkError> {
        let author = utterance.agent;
        let digest = utterance.digest;
        let node = self
            .nodes
            .get_mut(&author)
            .ok_or(NetworkError::UnknownNode(author))?;
        if !node.publish(utterance) {
            return Err(NetworkError::InvalidUtterance);
        }
        for (peer, msg) in node.announce(&[digest]) {
            self.transport.send(author, peer, msg);
        }
        Ok(())
    }

    /// Gives every node its locally built block, then has `leader` announce it.
    pub fn announce_block(&mut self, leader: AgentId, block: &Block) -> Result<(), NetworkError> {
        let digest = block.hash();
        let node = self
            .nodes
            .get(&leader)
            .ok_or(NetworkError::UnknownNode(leader))?;
        for peer in node.peers().to_vec() {
            self.transport
                .send(leader, peer, GossipMessage::BlockAnnounce { digest });
        }
        Ok(())
    }

    /// True when every node holds every digest.
    pub fn all_hold(&self, digests: &[Digest]) -> bool {
        self.nodes
            .values()
            .all(|n| digests.iter().all(|d| n.holds(d)))
    }

    /// Delivers every event due at or before `until`. Returns the number of
    /// messages delivered.
    pub fn run_until(&mut self, until: u64) -> usize {
        let mut delivered = 0;
        while let Some((seq, event)) = self.transport.pop_due(until) {
            if self.dispatch(seq, event) {
                delivered += 1;
            }
        }
        delivered
    }

    pub fn run_to_quiescence(&mut self) -> usize {
        self.run_until(u64::MAX)
    }

    fn dispatch(&mut self, seq: u64, event: Event) -> bool {
        let now = self.transport.now();
        match event {
            Event::Retry { node, digests } => {
                let Some(n) = self.nodes.get_mut(&node) else {
                    return false;
                };
                let plan = n.retry_plan(&digests, MAX_REQUEST_ATTEMPTS);
                // one more timer after the last attempt clears the pending marks
                if !plan.is_empty() {
                    self.transport
                        .schedule_retry(node, digests, self.retry_delay);
                }
                for (peer, missing) in plan {
                    self.transport.log.push(TransportEvent {
                        time: now,
                        seq,
                        from: node.short(),
                        to: peer.short(),
                        kind: "request",
                        bytes: 0,
                        status: EventStatus::Retry,
                    });
                    self.transport
                        .send(node, peer, GossipMessage::Request { digests: missing });
                }
                false
            }
            Event::Deliver { from, to, msg } => {
                self.transport.stats.delivered += 1;
                self.transport.log.push(TransportEvent {
                    time: now,
                    seq,
                    from: from.short(),
                    to: to.short(),
                    kind: msg.kind(),
                    bytes: msg.wire_len(),
                    status: EventStatus::Delivered,
                });
                let Some(node) = self.nodes.get_mut(&to) else {
                    return true;
                };
                let mut outbox: Vec<(AgentId, GossipMessage)> = Vec::new();
                let mut retry: Option<Vec<Digest>> = None;
                match msg {
                    GossipMessage::Announce { digests } => {
                        if let Some(req) = node.handle_announce(from, &digests) {
                            if let GossipMessage::Request { digests } = &req {
                                retry = Some(digests.clone());
                            }
                            outbox.push((from, req));
                        }
                    }
                    GossipMessage::Request { digests } => {
                        let data = node.serve_request(&digests);
                        if matches!(&data, GossipMessage::Data { utterances } if !utterances.is_empty())
                        {
                            outbox.push((from, data));
                        }
                        if let Some(block) = node.serve_block(&digests) {
                            outbox.push((from, block));
                        }
                    }
                    GossipMessage::Data { utterances } => {
                        let accepted: Vec<Digest> = node
                            .ingest_data(utterances)
                            .iter()
                            .map(|u| u.digest)
                            .collect();
                        outbox.extend(
                            node.announce(&accepted)
                                .into_iter()
                                .filter(|(p, _)| *p != from),
                        );
                    }
                    GossipMessage::BlockAnnounce { digest } => {
                        if let Some(req) = node.request_block(from, digest) {
                            retry = Some(vec![digest]);
                            outbox.push((from, req));
                        }
                    }
                    GossipMessage::BlockData { block } => {
                        let first = node.ingest_block(&block);
                        let matches = node.local_block().is_some_and(|b| b.hash() == block.hash());
                        if first && matches {
                            let digest = block.hash();
                            outbox.extend(
                                node.peers()
                                    .iter()
                                    .filter(|p| **p != from)
                                    .map(|p| (*p, GossipMessage::BlockAnnounce { digest })),
                            );
                        }
                    }
                }
                for (peer, msg) in outbox {
                    self.transport.send(to, peer, msg);
                }
                if let Some(digests) = retry {
                    self.transport.schedule_retry(to, digests, self.retry_delay);
                }
                true
            }
        }
    }
}
