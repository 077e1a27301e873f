//! Protocol-neutral routing contract.
//!
//! A protocol instance lives on one node and never touches the world
//! directly: every effect (transmissions, drops, timers) is queued on a
//! [`NodeCtx`] and applied by the network after the callback returns.

mod buffer;
mod packet;

use std::any::Any;

pub use buffer::{BufferOutcome, PendingBuffer, DEFAULT_CAPACITY, DEFAULT_TIMEOUT};
pub use packet::{Address, Body, Packet, PacketKind, UidSource, DEFAULT_TTL};

use crate::sim::SimTime;
use crate::trace::DropReason;
use crate::NodeId;

/// Settings shared by every protocol.
#[derive(Clone, Debug, PartialEq)]
pub struct RoutingParams {
    pub ttl: u8,
    pub buffer_capacity: usize,
    pub buffer_timeout: SimTime,
}

impl Default for RoutingParams {
    fn default() -> Self {
        RoutingParams {
            ttl: DEFAULT_TTL,
            buffer_capacity: DEFAULT_CAPACITY,
            buffer_timeout: DEFAULT_TIMEOUT,
        }
    }
}

impl RoutingParams {
    pub fn new_buffer(&self) -> PendingBuffer {
        PendingBuffer::new(self.buffer_capacity, self.buffer_timeout)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Timer {
    /// Fires when a route discovery attempt for `dst` has gone unanswered.
    DiscoveryRetry { dst: NodeId, attempt: u32 },
}

#[derive(Clone, Debug, PartialEq)]
pub enum Action {
    Broadcast(Packet),
    Unicast {
        next_hop: NodeId,
        pkt: Packet,
    },
    Drop {
        pkt: Packet,
        reason: DropReason,
    },
    SetTimer {
        after: SimTime,
        timer: Timer,
    },
    /// Routing state toward `dst` changed; lets the network re-check invariants.
    RouteChanged(NodeId),
    /// A protocol-internal invariant did not hold.
    Violation(String),
}

pub struct NodeCtx<'a> {
    node: NodeId,
    now: SimTime,
    params: &'a RoutingParams,
    uids: &'a mut UidSource,
    actions: &'a mut Vec<Action>,
}

impl<'a> NodeCtx<'a> {
    pub fn new(node: NodeId, now: SimTime, params: &'a RoutingParams, uids: &'a mut UidSource, actions: &'a mut Vec<Action>) -> Self {
        NodeCtx {
            node,
            now,
            params,
            uids,
            actions,
        }
    }

    pub fn node(&self) -> NodeId {
        self.node
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn params(&self) -> &RoutingParams {
        self.params
    }

    /// Builds a fresh control packet originated by this node.
    pub fn control(&mut self, kind: PacketKind, size: u32, dst: Address, body: Body) -> Packet {
        Packet {
            uid: self.uids.next(),
            kind,
            size,
            app_src: self.node,
            app_dst: dst,
            ttl: self.params.ttl,
            created_at: self.now,
            body,
        }
    }

    pub fn broadcast(&mut self, pkt: Packet) {
        self.actions.push(Action::Broadcast(pkt));
    }

    pub fn unicast(&mut self, next_hop: NodeId, pkt: Packet) {
        self.actions.push(Action::Unicast { next_hop, pkt });
    }

    pub fn drop_packet(&mut self, pkt: Packet, reason: DropReason) {
        self.actions.push(Action::Drop { pkt, reason });
    }

    pub fn drop_all(&mut self, pkts: impl IntoIterator<Item = Packet>, reason: DropReason) {
        for pkt in pkts {
            self.drop_packet(pkt, reason);
        }
    }

    pub fn set_timer(&mut self, after: SimTime, timer: Timer) {
        self.actions.push(Action::SetTimer { after, timer });
    }

    pub fn route_changed(&mut self, dst: NodeId) {
        self.actions.push(Action::RouteChanged(dst));
    }

    pub fn violation(&mut self, what: String) {
        self.actions.push(Action::Violation(what));
    }
}

/// Behavioral contract shared by AODV, DSR and AOMDV.
pub trait RoutingProtocol: Send {
    fn name(&self) -> &'static str;

    /// A locally generated DATA packet (already traced at the agent layer).
    fn on_app_send(&mut self, ctx: &mut NodeCtx<'_>, pkt: Packet);

    /// A packet received from neighbor `from`. DATA addressed to this node
    /// never reaches the protocol; the network hands it to the sink.
    fn on_packet(&mut self, ctx: &mut NodeCtx<'_>, pkt: Packet, from: NodeId);

    /// The MAC could not deliver `pkt` to `next_hop`.
    fn on_link_failure(&mut self, ctx: &mut NodeCtx<'_>, next_hop: NodeId, pkt: Packet);

    fn on_timer(&mut self, ctx: &mut NodeCtx<'_>, timer: Timer);

    /// End of simulation; buffered data should be dropped.
    fn on_sim_end(&mut self, _ctx: &mut NodeCtx<'_>) {}

    /// Next hops currently usable toward `dst`, for loop checking.
    fn next_hops(&self, _dst: NodeId, _now: SimTime) -> Vec<NodeId> {
        Vec::new()
    }

    fn as_any(&self) -> &dyn Any;
}
