//! Discovery messages, neighbor tables and the two- and three-way
//! handshakes.
//!
//! A node's knowledge is its direct neighbor list (peers it has handshaken
//! with) plus its indirect neighbor list (peers learned from exchanged
//! tables). A direct link is *confirmed* once the node knows the peer has
//! received its tables. The three-way handshake confirms both ends; the
//! two-way handshake confirms only the initiator's end.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeighborTables {
    owner: NodeId,
    dnl: BTreeSet<NodeId>,
    inl: BTreeSet<NodeId>,
    confirmed: BTreeSet<NodeId>,
}

impl NeighborTables {
    pub fn new(owner: NodeId) -> Self {
        NeighborTables {
            owner,
            dnl: BTreeSet::new(),
            inl: BTreeSet::new(),
            confirmed: BTreeSet::new(),
        }
    }

    pub fn owner(&self) -> NodeId {
        self.owner
    }

    pub fn direct(&self) -> &BTreeSet<NodeId> {
        &self.dnl
    }

    pub fn indirect(&self) -> &BTreeSet<NodeId> {
        &self.inl
    }

    pub fn confirmed(&self) -> &BTreeSet<NodeId> {
        &self.confirmed
    }

    pub fn knows(&self, node: NodeId) -> bool {
        self.dnl.contains(&node) || self.inl.contains(&node)
    }

    pub fn knowledge(&self) -> BTreeSet<NodeId> {
        self.dnl.union(&self.inl).copied().collect()
    }

    pub fn knowledge_len(&self) -> usize {
        self.dnl.len() + self.inl.len()
    }

    pub fn is_confirmed(&self, node: NodeId) -> bool {
        self.confirmed.contains(&node)
    }

    pub fn has_unconfirmed(&self) -> bool {
        self.confirmed.len() < self.dnl.len()
    }

    pub fn unconfirmed(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.dnl.difference(&self.confirmed).copied()
    }

    /// Tables to put in an outgoing message. With `gate_unconfirmed` set,
    /// direct links not yet confirmed are withheld.
    pub fn snapshot(&self, kind: MessageKind, gate_unconfirmed: bool) -> HandshakeMessage {
        let dnl = if gate_unconfirmed {
            self.confirmed.clone()
        } else {
            self.dnl.clone()
        };
        HandshakeMessage {
            kind,
            sender: self.owner,
            dnl,
            inl: self.inl.clone(),
        }
    }

    fn learn_indirect(&mut self, msg: &HandshakeMessage) {
        for &n in msg.dnl.iter().chain(msg.inl.iter()) {
            if n != self.owner && !self.dnl.contains(&n) {
                self.inl.insert(n);
            }
        }
    }

    /// Folds a received handshake message into the tables: the sender
    /// becomes a direct neighbor and everything it reports becomes an
    /// indirect one (unless already direct, never the owner itself).
    pub fn merge(&mut self, msg: &HandshakeMessage) {
        if msg.sender == self.owner {
            return;
        }
        self.inl.remove(&msg.sender);
        self.dnl.insert(msg.sender);
        self.learn_indirect(msg);
    }

    /// Overheard traffic only teaches indirect neighbors.
    pub fn overhear(&mut self, msg: &HandshakeMessage) {
        if msg.sender == self.owner {
            return;
        }
        if !self.dnl.contains(&msg.sender) {
            self.inl.insert(msg.sender);
        }
        self.learn_indirect(msg);
    }

    pub fn confirm(&mut self, node: NodeId) {
        debug_assert!(self.dnl.contains(&node));
        self.confirmed.insert(node);
    }

    pub fn check_invariants(&self, node_count: usize) -> std::result::Result<(), String> {
        if self.knows(self.owner) {
            return Err(format!("node {} lists itself", self.owner));
        }
        if let Some(n) = self.dnl.intersection(&self.inl).next() {
            return Err(format!("node {} has {n} in both lists", self.owner));
        }
        if !self.confirmed.is_subset(&self.dnl) {
            return Err(format!("node {} confirmed a non-direct peer", self.owner));
        }
        if self.knowledge_len() > node_count.saturating_sub(1) {
            return Err(format!("node {} knows more than N-1 peers", self.owner));
        }
        Ok(())
    }
}

/// Free-function form of [`NeighborTables::merge`].
pub fn merge(local: &mut NeighborTables, msg: &HandshakeMessage) {
    local.merge(msg);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MessageKind {
    #[serde(rename = "D-REQ")]
    DReq,
    #[serde(rename = "D-RESP")]
    DResp,
    #[serde(rename = "D-ACK")]
    DAck,
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MessageKind::DReq => "D-REQ",
            MessageKind::DResp => "D-RESP",
            MessageKind::DAck => "D-ACK",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HandshakeMessage {
    pub kind: MessageKind,
    pub sender: NodeId,
    pub dnl: BTreeSet<NodeId>,
    pub inl: BTreeSet<NodeId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum HandshakeKind {
    #[serde(rename = "2wh")]
    TwoWay,
    #[serde(rename = "3wh")]
    ThreeWay,
}

impl HandshakeKind {
    pub fn packets(&self) -> u64 {
        match self {
            HandshakeKind::TwoWay => 2,
            HandshakeKind::ThreeWay => 3,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            HandshakeKind::TwoWay => "2wh",
            HandshakeKind::ThreeWay => "3wh",
        }
    }
}

impl fmt::Display for HandshakeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for HandshakeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "").as_str() {
            "2wh" | "2" | "twoway" => Ok(HandshakeKind::TwoWay),
            "3wh" | "3" | "threeway" => Ok(HandshakeKind::ThreeWay),
            _ => Err(Error::invalid(format!("unknown handshake '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transmission {
    pub kind: MessageKind,
    pub sender: NodeId,
    /// `None` for an unanswered broadcast.
    pub receiver: Option<NodeId>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub messages: Vec<Transmission>,
    pub successful: u64,
}

impl Transcript {
    pub fn packets(&self) -> u64 {
        self.messages.len() as u64
    }

    fn send(&mut self, msg: &HandshakeMessage, to: NodeId) {
        self.messages.push(Transmission {
            kind: msg.kind,
            sender: msg.sender,
            receiver: Some(to),
        });
    }
}

/// D-REQ from the initiator, D-ACK carrying the responder's merged tables.
/// Only the initiator ends up with a confirmed link.
pub fn run_2wh(
    initiator: &mut NeighborTables,
    responder: &mut NeighborTables,
    gate_unconfirmed: bool,
) -> Transcript {
    let mut t = Transcript::default();
    let req = initiator.snapshot(MessageKind::DReq, gate_unconfirmed);
    t.send(&req, responder.owner);
    responder.merge(&req);

    let ack = responder.snapshot(MessageKind::DAck, gate_unconfirmed);
    t.send(&ack, initiator.owner);
    initiator.merge(&ack);
    initiator.confirm(responder.owner);

    t.successful = 1;
    t
}

/// D-REQ, D-RESP with the responder's merged tables, then D-ACK with the
/// initiator's merged tables. Both ends confirm.
pub fn run_3wh(
    initiator: &mut NeighborTables,
    responder: &mut NeighborTables,
    gate_unconfirmed: bool,
) -> Transcript {
    let mut t = Transcript::default();
    let req = initiator.snapshot(MessageKind::DReq, gate_unconfirmed);
    t.send(&req, responder.owner);
    responder.merge(&req);

    let resp = responder.snapshot(MessageKind::DResp, gate_unconfirmed);
    t.send(&resp, initiator.owner);
    initiator.merge(&resp);
    initiator.confirm(responder.owner);

    let ack = initiator.snapshot(MessageKind::DAck, gate_unconfirmed);
    t.send(&ack, responder.owner);
    responder.merge(&ack);
    responder.confirm(initiator.owner);

    t.successful = 1;
    t
}

pub fn run_handshake(
    kind: HandshakeKind,
    initiator: &mut NeighborTables,
    responder: &mut NeighborTables,
    gate_unconfirmed: bool,
) -> Transcript {
    match kind {
        HandshakeKind::TwoWay => run_2wh(initiator, responder, gate_unconfirmed),
        HandshakeKind::ThreeWay => run_3wh(initiator, responder, gate_unconfirmed),
    }
}
