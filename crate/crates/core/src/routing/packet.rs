use std::fmt;
use std::str::FromStr;

use crate::protocols::aodv::AodvMessage;
use crate::protocols::aomdv::AomdvMessage;
use crate::protocols::dsr::{DsrMessage, SourceRouteHeader};
use crate::sim::SimTime;
use crate::NodeId;

/// Default hop budget for every packet kind.
pub const DEFAULT_TTL: u8 = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Address {
    Node(NodeId),
    Broadcast,
}

impl Address {
    pub fn node(self) -> Option<NodeId> {
        match self {
            Address::Node(n) => Some(n),
            Address::Broadcast => None,
        }
    }
}

impl From<NodeId> for Address {
    fn from(n: NodeId) -> Self {
        Address::Node(n)
    }
}

/// Broadcast renders as `-1` in traces.
impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Address::Node(n) => write!(f, "{n}"),
            Address::Broadcast => f.write_str("-1"),
        }
    }
}

impl FromStr for Address {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        if s == "-1" {
            return Ok(Address::Broadcast);
        }
        s.parse().map(Address::Node).map_err(|_| ())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PacketKind {
    Data,
    Rreq,
    Rrep,
    Rerr,
}

impl PacketKind {
    pub const ALL: [PacketKind; 4] = [PacketKind::Data, PacketKind::Rreq, PacketKind::Rrep, PacketKind::Rerr];

    pub fn as_str(self) -> &'static str {
        match self {
            PacketKind::Data => "DATA",
            PacketKind::Rreq => "RREQ",
            PacketKind::Rrep => "RREP",
            PacketKind::Rerr => "RERR",
        }
    }

    pub fn is_control(self) -> bool {
        self != PacketKind::Data
    }
}

impl fmt::Display for PacketKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PacketKind {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        PacketKind::ALL.into_iter().find(|k| k.as_str() == s).ok_or(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Body {
    /// Application payload; DSR stamps a source route into the header.
    Data {
        payload: u32,
        source_route: Option<SourceRouteHeader>,
    },
    Aodv(AodvMessage),
    Dsr(DsrMessage),
    Aomdv(AomdvMessage),
}

/// A network-layer packet. `uid` is preserved across hops; `size` is the
/// current on-air size including any routing header.
#[derive(Clone, Debug, PartialEq)]
pub struct Packet {
    pub uid: u64,
    pub kind: PacketKind,
    pub size: u32,
    /// Node that created the packet.
    pub app_src: NodeId,
    pub app_dst: Address,
    pub ttl: u8,
    pub created_at: SimTime,
    pub body: Body,
}

impl Packet {
    pub fn data(uid: u64, src: NodeId, dst: NodeId, payload: u32, ttl: u8, now: SimTime) -> Self {
        Packet {
            uid,
            kind: PacketKind::Data,
            size: payload,
            app_src: src,
            app_dst: Address::Node(dst),
            ttl,
            created_at: now,
            body: Body::Data {
                payload,
                source_route: None,
            },
        }
    }

    pub fn dst_node(&self) -> Option<NodeId> {
        self.app_dst.node()
    }

    pub fn payload(&self) -> Option<u32> {
        match self.body {
            Body::Data { payload, .. } => Some(payload),
            _ => None,
        }
    }
}

/// Monotone uid counter, one per simulation run.
#[derive(Debug, Default)]
pub struct UidSource(u64);

impl UidSource {
    pub fn new() -> Self {
        UidSource(0)
    }

    pub fn next(&mut self) -> u64 {
        let uid = self.0;
        self.0 += 1;
        uid
    }
}
