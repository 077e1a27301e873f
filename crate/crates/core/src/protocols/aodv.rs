//! Ad-hoc On-demand Distance Vector routing.
//!
//! Flooded route requests identified by `(src, broadcast_id)`, replies
//! unicast back along the reverse path, destination sequence numbers for
//! loop freedom. Repair is source-driven: a broken link invalidates the
//! affected routes, an error is broadcast upstream, and the source floods a
//! fresh request on its next send.

use std::any::Any;
use std::collections::{BTreeMap, HashMap};

use super::{NodeBuilder, Overrides, ProtocolFactory};
use crate::config::ConfigError;
use crate::routing::{Address, Body, NodeCtx, Packet, PacketKind, PendingBuffer, RoutingParams, RoutingProtocol, Timer};
use crate::sim::SimTime;
use crate::trace::DropReason;
use crate::NodeId;

#[derive(Clone, Debug, PartialEq)]
pub struct AodvParams {
    pub active_route_lifetime: SimTime,
    pub reverse_route_lifetime: SimTime,
    pub seen_lifetime: SimTime,
    pub rreq_retries: u32,
    /// Wait before the first retry; doubles on each further retry.
    pub retry_wait: SimTime,
    pub rreq_size: u32,
    pub rrep_size: u32,
    pub rerr_size: u32,
}

impl Default for AodvParams {
    fn default() -> Self {
        AodvParams {
            active_route_lifetime: SimTime::from_secs(10),
            reverse_route_lifetime: SimTime::from_secs(6),
            seen_lifetime: SimTime::from_secs(6),
            rreq_retries: 2,
            retry_wait: SimTime::from_secs(1),
            rreq_size: 48,
            rrep_size: 44,
            rerr_size: 32,
        }
    }
}

impl AodvParams {
    pub(crate) fn read(o: &mut Overrides<'_>, d: AodvParams) -> AodvParams {
        AodvParams {
            active_route_lifetime: o.secs("active_route_lifetime", d.active_route_lifetime),
            reverse_route_lifetime: o.secs("reverse_route_lifetime", d.reverse_route_lifetime),
            seen_lifetime: o.secs("seen_lifetime", d.seen_lifetime),
            rreq_retries: o.u32("rreq_retries", d.rreq_retries),
            retry_wait: o.secs("retry_wait", d.retry_wait),
            rreq_size: o.u32("rreq_size", d.rreq_size),
            rrep_size: o.u32("rrep_size", d.rrep_size),
            rerr_size: o.u32("rerr_size", d.rerr_size),
        }
    }

    pub fn retry_delay(&self, attempt: u32) -> SimTime {
        self.retry_wait.checked_mul(1u64 << attempt.min(20)).unwrap_or(SimTime::MAX)
    }
}

pub struct AodvFactory;

impl ProtocolFactory for AodvFactory {
    fn name(&self) -> &'static str {
        "aodv"
    }

    fn builder(&self, overrides: &BTreeMap<String, String>) -> Result<NodeBuilder, Vec<ConfigError>> {
        let mut o = Overrides::new("aodv", overrides);
        let params = AodvParams::read(&mut o, AodvParams::default());
        o.finish()?;
        Ok(std::sync::Arc::new(move |node, routing: &RoutingParams| {
            Box::new(Aodv::new(node, params.clone(), routing)) as Box<dyn RoutingProtocol>
        }))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AodvRreq {
    pub src: NodeId,
    pub src_seq: u32,
    pub broadcast_id: u32,
    pub dst: NodeId,
    /// Last sequence number known for `dst` (0 when unknown).
    pub dst_seq: u32,
    pub hop_count: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AodvRrep {
    /// Originator of the request this answers.
    pub src: NodeId,
    pub dst: NodeId,
    pub dst_seq: u32,
    pub hop_count: u32,
    pub lifetime: SimTime,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AodvRerr {
    pub unreachable: Vec<(NodeId, u32)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AodvMessage {
    Rreq(AodvRreq),
    Rrep(AodvRrep),
    Rerr(AodvRerr),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AodvRouteEntry {
    pub dst: NodeId,
    pub next_hop: NodeId,
    pub hop_count: u32,
    pub dst_seq: u32,
    pub expires_at: SimTime,
    pub valid: bool,
}

impl AodvRouteEntry {
    pub fn is_usable(&self, now: SimTime) -> bool {
        self.valid && now < self.expires_at
    }
}

/// Freshness and length of a route, as compared by [`route_update_rule`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RouteMetric {
    pub dst_seq: u32,
    pub hop_count: u32,
}

/// Accept iff there is no current route, the candidate is fresher, or it is
/// equally fresh and strictly shorter.
pub fn route_update_rule(current: Option<RouteMetric>, candidate: RouteMetric) -> bool {
    match current {
        None => true,
        Some(cur) => candidate.dst_seq > cur.dst_seq || (candidate.dst_seq == cur.dst_seq && candidate.hop_count < cur.hop_count),
    }
}

#[derive(Debug, Default)]
pub struct RouteTable {
    entries: BTreeMap<NodeId, AodvRouteEntry>,
}

impl RouteTable {
    pub fn get(&self, dst: NodeId) -> Option<&AodvRouteEntry> {
        self.entries.get(&dst)
    }

    pub fn usable(&self, dst: NodeId, now: SimTime) -> Option<&AodvRouteEntry> {
        self.entries.get(&dst).filter(|e| e.is_usable(now))
    }

    pub fn known_seq(&self, dst: NodeId) -> u32 {
        self.entries.get(&dst).map_or(0, |e| e.dst_seq)
    }

    /// Marks an expired entry invalid. Invalidation always bumps the stored
    /// sequence number so only strictly fresher information can revive it.
    fn expire(&mut self, dst: NodeId, now: SimTime) {
        if let Some(e) = self.entries.get_mut(&dst) {
            if e.valid && now >= e.expires_at {
                e.valid = false;
                e.dst_seq += 1;
            }
        }
    }

    /// Applies the update rule. An invalid entry compares as infinitely long,
    /// so same-sequence information revives it. Returns whether the candidate
    /// was installed.
    pub fn offer(&mut self, dst: NodeId, next_hop: NodeId, metric: RouteMetric, expires_at: SimTime, now: SimTime) -> bool {
        self.expire(dst, now);
        let current = self.entries.get(&dst).map(|e| RouteMetric {
            dst_seq: e.dst_seq,
            hop_count: if e.valid { e.hop_count } else { u32::MAX },
        });
        if !route_update_rule(current, metric) {
            return false;
        }
        let keep_until = self.entries.get(&dst).filter(|e| e.valid).map_or(SimTime::ZERO, |e| e.expires_at);
        self.entries.insert(
            dst,
            AodvRouteEntry {
                dst,
                next_hop,
                hop_count: metric.hop_count,
                dst_seq: metric.dst_seq,
                expires_at: expires_at.max(keep_until),
                valid: true,
            },
        );
        true
    }

    fn refresh(&mut self, dst: NodeId, until: SimTime) {
        if let Some(e) = self.entries.get_mut(&dst) {
            if e.valid && e.expires_at < until {
                e.expires_at = until;
            }
        }
    }

    /// Invalidates every usable route whose next hop is `via`, returning
    /// `(dst, new_seq)` for each.
    fn invalidate_via(&mut self, via: NodeId, now: SimTime) -> Vec<(NodeId, u32)> {
        let mut out = Vec::new();
        for e in self.entries.values_mut() {
            if e.next_hop == via && e.is_usable(now) {
                e.valid = false;
                e.dst_seq += 1;
                out.push((e.dst, e.dst_seq));
            }
        }
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = &AodvRouteEntry> {
        self.entries.values()
    }
}

#[derive(Debug, Clone, Copy)]
struct Discovery {
    attempt: u32,
}

pub struct Aodv {
    node: NodeId,
    params: AodvParams,
    own_seq: u32,
    broadcast_id: u32,
    table: RouteTable,
    seen: HashMap<(NodeId, u32), SimTime>,
    pending: BTreeMap<NodeId, Discovery>,
    buffer: PendingBuffer,
}

impl Aodv {
    pub fn new(node: NodeId, params: AodvParams, routing: &RoutingParams) -> Self {
        Aodv {
            node,
            params,
            own_seq: 0,
            broadcast_id: 0,
            table: RouteTable::default(),
            seen: HashMap::new(),
            pending: BTreeMap::new(),
            buffer: routing.new_buffer(),
        }
    }

    pub fn table(&self) -> &RouteTable {
        &self.table
    }

    pub fn own_seq(&self) -> u32 {
        self.own_seq
    }

    pub fn broadcast_id(&self) -> u32 {
        self.broadcast_id
    }

    pub fn discovery_pending(&self, dst: NodeId) -> bool {
        self.pending.contains_key(&dst)
    }

    pub fn buffered(&self) -> usize {
        self.buffer.len()
    }

    fn mark_seen(&mut self, key: (NodeId, u32), now: SimTime) -> bool {
        if self.seen.len() > 512 {
            self.seen.retain(|_, exp| *exp > now);
        }
        match self.seen.get(&key) {
            Some(exp) if *exp > now => false,
            _ => {
                self.seen.insert(key, now + self.params.seen_lifetime);
                true
            }
        }
    }

    fn originate_discovery(&mut self, ctx: &mut NodeCtx<'_>, dst: NodeId, attempt: u32) {
        self.own_seq += 1;
        self.broadcast_id += 1;
        let now = ctx.now();
        self.mark_seen((self.node, self.broadcast_id), now);
        self.table.expire(dst, now);
        let rreq = AodvRreq {
            src: self.node,
            src_seq: self.own_seq,
            broadcast_id: self.broadcast_id,
            dst,
            dst_seq: self.table.known_seq(dst),
            hop_count: 0,
        };
        let pkt = ctx.control(
            PacketKind::Rreq,
            self.params.rreq_size,
            Address::Broadcast,
            Body::Aodv(AodvMessage::Rreq(rreq)),
        );
        ctx.broadcast(pkt);
        self.pending.insert(dst, Discovery { attempt });
        ctx.set_timer(self.params.retry_delay(attempt), Timer::DiscoveryRetry { dst, attempt });
    }

    /// Sends a DATA packet from this node, buffering it and starting
    /// discovery when no usable route exists.
    fn send_data(&mut self, ctx: &mut NodeCtx<'_>, pkt: Packet) {
        let Some(dst) = pkt.dst_node() else {
            ctx.drop_packet(pkt, DropReason::NoRoute);
            return;
        };
        let now = ctx.now();
        if let Some(next_hop) = self.table.usable(dst, now).map(|e| e.next_hop) {
            self.table.refresh(dst, now + self.params.active_route_lifetime);
            ctx.unicast(next_hop, pkt);
            return;
        }
        let outcome = self.buffer.buffer_or_drop(pkt, now);
        ctx.drop_all(outcome.dropped, DropReason::NoRoute);
        if !self.pending.contains_key(&dst) {
            self.originate_discovery(ctx, dst, 0);
        }
    }

    fn forward_data(&mut self, ctx: &mut NodeCtx<'_>, pkt: Packet) {
        let Some(dst) = pkt.dst_node() else {
            ctx.drop_packet(pkt, DropReason::NoRoute);
            return;
        };
        let now = ctx.now();
        if let Some(next_hop) = self.table.usable(dst, now).map(|e| e.next_hop) {
            self.table.refresh(dst, now + self.params.active_route_lifetime);
            ctx.unicast(next_hop, pkt);
        } else {
            self.table.expire(dst, now);
            if let Some(e) = self.table.get(dst) {
                let seq = e.dst_seq;
                self.send_rerr(ctx, vec![(dst, seq)]);
            }
            ctx.drop_packet(pkt, DropReason::NoRoute);
        }
    }

    fn send_rerr(&mut self, ctx: &mut NodeCtx<'_>, unreachable: Vec<(NodeId, u32)>) {
        let pkt = ctx.control(
            PacketKind::Rerr,
            self.params.rerr_size,
            Address::Broadcast,
            Body::Aodv(AodvMessage::Rerr(AodvRerr { unreachable })),
        );
        ctx.broadcast(pkt);
    }

    fn flush_buffer(&mut self, ctx: &mut NodeCtx<'_>, dst: NodeId) {
        let (ready, expired) = self.buffer.take_for(dst, ctx.now());
        ctx.drop_all(expired, DropReason::NoRoute);
        for pkt in ready {
            self.send_data(ctx, pkt);
        }
    }

    fn handle_rreq(&mut self, ctx: &mut NodeCtx<'_>, mut pkt: Packet, rreq: AodvRreq, from: NodeId) {
        let now = ctx.now();
        if rreq.src == self.node || !self.mark_seen((rreq.src, rreq.broadcast_id), now) {
            return;
        }
        let reverse = RouteMetric {
            dst_seq: rreq.src_seq,
            hop_count: rreq.hop_count + 1,
        };
        if self
            .table
            .offer(rreq.src, from, reverse, now + self.params.reverse_route_lifetime, now)
        {
            ctx.route_changed(rreq.src);
        } else {
            self.table.refresh(rreq.src, now + self.params.reverse_route_lifetime);
        }

        if rreq.dst == self.node {
            self.own_seq = self.own_seq.max(rreq.dst_seq);
            let rrep = AodvRrep {
                src: rreq.src,
                dst: self.node,
                dst_seq: self.own_seq,
                hop_count: 0,
                lifetime: self.params.active_route_lifetime,
            };
            self.send_rrep(ctx, rrep, from);
            return;
        }

        self.table.expire(rreq.dst, now);
        if let Some(route) = self.table.usable(rreq.dst, now) {
            if route.dst_seq >= rreq.dst_seq {
                let rrep = AodvRrep {
                    src: rreq.src,
                    dst: rreq.dst,
                    dst_seq: route.dst_seq,
                    hop_count: route.hop_count,
                    lifetime: route.expires_at - now,
                };
                self.send_rrep(ctx, rrep, from);
                return;
            }
        }

        let forwarded = AodvRreq {
            hop_count: rreq.hop_count + 1,
            dst_seq: rreq.dst_seq.max(self.table.known_seq(rreq.dst)),
            ..rreq
        };
        pkt.body = Body::Aodv(AodvMessage::Rreq(forwarded));
        ctx.broadcast(pkt);
    }

    fn send_rrep(&mut self, ctx: &mut NodeCtx<'_>, rrep: AodvRrep, to: NodeId) {
        let pkt = ctx.control(
            PacketKind::Rrep,
            self.params.rrep_size,
            Address::Node(rrep.src),
            Body::Aodv(AodvMessage::Rrep(rrep)),
        );
        ctx.unicast(to, pkt);
    }

    fn handle_rrep(&mut self, ctx: &mut NodeCtx<'_>, mut pkt: Packet, rrep: AodvRrep, from: NodeId) {
        let now = ctx.now();
        let forward = RouteMetric {
            dst_seq: rrep.dst_seq,
            hop_count: rrep.hop_count + 1,
        };
        if self.table.offer(rrep.dst, from, forward, now + rrep.lifetime, now) {
            ctx.route_changed(rrep.dst);
        }

        if rrep.src == self.node {
            if self.table.usable(rrep.dst, now).is_some() {
                self.pending.remove(&rrep.dst);
                self.flush_buffer(ctx, rrep.dst);
            }
            return;
        }

        self.table.expire(rrep.src, now);
        match self.table.usable(rrep.src, now).map(|e| e.next_hop) {
            Some(next_hop) => {
                self.table.refresh(rrep.src, now + self.params.reverse_route_lifetime);
                pkt.body = Body::Aodv(AodvMessage::Rrep(AodvRrep {
                    hop_count: rrep.hop_count + 1,
                    ..rrep
                }));
                ctx.unicast(next_hop, pkt);
            }
            None => ctx.drop_packet(pkt, DropReason::NoRoute),
        }
    }

    fn handle_rerr(&mut self, ctx: &mut NodeCtx<'_>, rerr: AodvRerr, from: NodeId) {
        let now = ctx.now();
        let mut lost = Vec::new();
        for (dst, seq) in rerr.unreachable {
            self.table.expire(dst, now);
            if let Some(e) = self.table.entries.get_mut(&dst) {
                if e.valid && e.next_hop == from {
                    e.valid = false;
                    e.dst_seq = (e.dst_seq + 1).max(seq);
                    lost.push((dst, e.dst_seq));
                    ctx.route_changed(dst);
                }
            }
        }
        if !lost.is_empty() {
            self.send_rerr(ctx, lost);
        }
    }
}

impl RoutingProtocol for Aodv {
    fn name(&self) -> &'static str {
        "aodv"
    }

    fn on_app_send(&mut self, ctx: &mut NodeCtx<'_>, pkt: Packet) {
        self.send_data(ctx, pkt);
    }

    fn on_packet(&mut self, ctx: &mut NodeCtx<'_>, pkt: Packet, from: NodeId) {
        match &pkt.body {
            Body::Aodv(AodvMessage::Rreq(r)) => {
                let r = r.clone();
                self.handle_rreq(ctx, pkt, r, from)
            }
            Body::Aodv(AodvMessage::Rrep(r)) => {
                let r = r.clone();
                self.handle_rrep(ctx, pkt, r, from)
            }
            Body::Aodv(AodvMessage::Rerr(r)) => {
                let r = r.clone();
                self.handle_rerr(ctx, r, from)
            }
            Body::Data { .. } => self.forward_data(ctx, pkt),
            _ => ctx.drop_packet(pkt, DropReason::RouteError),
        }
    }

    fn on_link_failure(&mut self, ctx: &mut NodeCtx<'_>, next_hop: NodeId, pkt: Packet) {
        let lost = self.table.invalidate_via(next_hop, ctx.now());
        for (dst, _) in &lost {
            ctx.route_changed(*dst);
        }
        if !lost.is_empty() {
            self.send_rerr(ctx, lost);
        }
        if pkt.kind == PacketKind::Data && pkt.app_src == self.node {
            self.send_data(ctx, pkt);
        } else {
            ctx.drop_packet(pkt, DropReason::NoRoute);
        }
    }

    fn on_timer(&mut self, ctx: &mut NodeCtx<'_>, timer: Timer) {
        let Timer::DiscoveryRetry { dst, attempt } = timer;
        match self.pending.get(&dst) {
            Some(d) if d.attempt == attempt => {}
            _ => return,
        }
        if self.table.usable(dst, ctx.now()).is_some() {
            self.pending.remove(&dst);
            self.flush_buffer(ctx, dst);
        } else if attempt < self.params.rreq_retries {
            self.originate_discovery(ctx, dst, attempt + 1);
        } else {
            self.pending.remove(&dst);
            let (stranded, expired) = self.buffer.take_for(dst, ctx.now());
            ctx.drop_all(expired, DropReason::NoRoute);
            ctx.drop_all(stranded, DropReason::NoRoute);
        }
    }

    fn on_sim_end(&mut self, ctx: &mut NodeCtx<'_>) {
        let stranded = self.buffer.drain_all();
        ctx.drop_all(stranded, DropReason::NoRoute);
    }

    fn next_hops(&self, dst: NodeId, now: SimTime) -> Vec<NodeId> {
        self.table.usable(dst, now).map(|e| e.next_hop).into_iter().collect()
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}
