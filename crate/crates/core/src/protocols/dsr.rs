//! Dynamic Source Routing.
//!
//! Sources stamp the complete hop list into every DATA header. Routes come
//! from a per-node cache filled by route replies, which carry the record
//! accumulated by the flooded request. Link failures are reported back to
//! the packet's originator with a source-routed error, and every node the
//! error passes prunes the broken link from its cache.

use std::any::Any;
use std::collections::{BTreeMap, HashMap};

use super::{NodeBuilder, Overrides, ProtocolFactory};
use crate::config::ConfigError;
use crate::routing::{Address, Body, NodeCtx, Packet, PacketKind, PendingBuffer, RoutingParams, RoutingProtocol, Timer};
use crate::sim::SimTime;
use crate::trace::DropReason;
use crate::NodeId;

#[derive(Clone, Debug, PartialEq)]
pub struct DsrParams {
    pub cache_per_dst: usize,
    pub seen_lifetime: SimTime,
    pub rreq_retries: u32,
    pub retry_wait: SimTime,
    pub reply_from_cache: bool,
    pub rreq_base: u32,
    pub rrep_base: u32,
    pub rerr_size: u32,
    pub data_header_base: u32,
    pub bytes_per_hop: u32,
}

impl Default for DsrParams {
    fn default() -> Self {
        DsrParams {
            cache_per_dst: 4,
            seen_lifetime: SimTime::from_secs(10),
            rreq_retries: 2,
            retry_wait: SimTime::from_secs(1),
            reply_from_cache: true,
            rreq_base: 32,
            rrep_base: 36,
            rerr_size: 36,
            data_header_base: 8,
            bytes_per_hop: 4,
        }
    }
}

impl DsrParams {
    fn read(o: &mut Overrides<'_>) -> DsrParams {
        let d = DsrParams::default();
        DsrParams {
            cache_per_dst: o.u32("cache_per_dst", d.cache_per_dst as u32) as usize,
            seen_lifetime: o.secs("seen_lifetime", d.seen_lifetime),
            rreq_retries: o.u32("rreq_retries", d.rreq_retries),
            retry_wait: o.secs("retry_wait", d.retry_wait),
            reply_from_cache: o.bool("reply_from_cache", d.reply_from_cache),
            rreq_base: o.u32("rreq_size", d.rreq_base),
            rrep_base: o.u32("rrep_size", d.rrep_base),
            rerr_size: o.u32("rerr_size", d.rerr_size),
            data_header_base: o.u32("data_header_size", d.data_header_base),
            bytes_per_hop: o.u32("bytes_per_hop", d.bytes_per_hop),
        }
    }

    fn retry_delay(&self, attempt: u32) -> SimTime {
        self.retry_wait.checked_mul(1u64 << attempt.min(20)).unwrap_or(SimTime::MAX)
    }

    /// Bytes a source-route header adds to a DATA packet.
    pub fn data_header_bytes(&self, route_len: usize) -> u32 {
        self.data_header_base + self.bytes_per_hop * route_len as u32
    }
}

pub struct DsrFactory;

impl ProtocolFactory for DsrFactory {
    fn name(&self) -> &'static str {
        "dsr"
    }

    fn builder(&self, overrides: &BTreeMap<String, String>) -> Result<NodeBuilder, Vec<ConfigError>> {
        let mut o = Overrides::new("dsr", overrides);
        let params = DsrParams::read(&mut o);
        o.finish()?;
        if params.cache_per_dst == 0 {
            return Err(vec![ConfigError::new("dsr.cache_per_dst".into(), "must be at least 1".into())]);
        }
        Ok(std::sync::Arc::new(move |node, routing: &RoutingParams| {
            Box::new(Dsr::new(node, params.clone(), routing)) as Box<dyn RoutingProtocol>
        }))
    }
}

/// Hop list carried in a packet, in travel order. `pos` indexes the node
/// currently holding the packet.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SourceRouteHeader {
    pub hops: Vec<NodeId>,
    pub pos: usize,
}

impl SourceRouteHeader {
    pub fn new(hops: Vec<NodeId>) -> Self {
        SourceRouteHeader { hops, pos: 0 }
    }

    pub fn next_hop(&self) -> Option<NodeId> {
        self.hops.get(self.pos + 1).copied()
    }

    /// Hops already covered, ending at the current holder.
    pub fn traversed(&self) -> &[NodeId] {
        &self.hops[..=self.pos.min(self.hops.len().saturating_sub(1))]
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DsrRreq {
    pub src: NodeId,
    pub dst: NodeId,
    pub request_id: u32,
    pub route_record: Vec<NodeId>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DsrRrep {
    /// Discovered route, requester first.
    pub route: Vec<NodeId>,
    /// Path back to the requester.
    pub header: SourceRouteHeader,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DsrRerr {
    pub reporter: NodeId,
    pub broken_link: (NodeId, NodeId),
    pub original_src: NodeId,
    pub header: SourceRouteHeader,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DsrMessage {
    Rreq(DsrRreq),
    Rrep(DsrRrep),
    Rerr(DsrRerr),
}

pub fn is_loop_free(route: &[NodeId]) -> bool {
    route.iter().enumerate().all(|(i, n)| !route[..i].contains(n))
}

fn contains_link(route: &[NodeId], a: NodeId, b: NodeId) -> bool {
    route.windows(2).any(|w| (w[0] == a && w[1] == b) || (w[0] == b && w[1] == a))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CachedRoute {
    pub hops: Vec<NodeId>,
    pub added_at: SimTime,
}

/// Source routes starting at the owning node, grouped by destination.
#[derive(Debug, Default)]
pub struct RouteCache {
    per_dst: usize,
    routes: BTreeMap<NodeId, Vec<CachedRoute>>,
}

impl RouteCache {
    pub fn new(per_dst: usize) -> Self {
        RouteCache {
            per_dst,
            routes: BTreeMap::new(),
        }
    }

    /// Adds a route (owner first, destination last). Duplicates are ignored;
    /// a full list evicts its oldest route.
    pub fn insert(&mut self, hops: Vec<NodeId>, now: SimTime) {
        if hops.len() < 2 || !is_loop_free(&hops) {
            return;
        }
        let dst = *hops.last().unwrap();
        let list = self.routes.entry(dst).or_default();
        if list.iter().any(|r| r.hops == hops) {
            return;
        }
        if list.len() >= self.per_dst {
            // Oldest first; stable order makes ties resolve to the earliest inserted.
            let oldest = list.iter().enumerate().min_by_key(|(_, r)| r.added_at).map(|(i, _)| i).unwrap();
            list.remove(oldest);
        }
        list.push(CachedRoute { hops, added_at: now });
    }

    /// Fewest hops, ties to the oldest.
    pub fn best(&self, dst: NodeId) -> Option<&[NodeId]> {
        self.routes
            .get(&dst)?
            .iter()
            .min_by_key(|r| (r.hops.len(), r.added_at))
            .map(|r| r.hops.as_slice())
    }

    pub fn routes_to(&self, dst: NodeId) -> &[CachedRoute] {
        self.routes.get(&dst).map_or(&[], |v| v.as_slice())
    }

    /// Removes every route using the link in either direction.
    pub fn prune_link(&mut self, a: NodeId, b: NodeId) -> usize {
        let mut removed = 0;
        for list in self.routes.values_mut() {
            let before = list.len();
            list.retain(|r| !contains_link(&r.hops, a, b));
            removed += before - list.len();
        }
        self.routes.retain(|_, l| !l.is_empty());
        removed
    }

    pub fn iter(&self) -> impl Iterator<Item = &CachedRoute> {
        self.routes.values().flatten()
    }
}

pub struct Dsr {
    node: NodeId,
    params: DsrParams,
    request_id: u32,
    cache: RouteCache,
    seen: HashMap<(NodeId, u32), SimTime>,
    pending: BTreeMap<NodeId, u32>,
    buffer: PendingBuffer,
}

impl Dsr {
    pub fn new(node: NodeId, params: DsrParams, routing: &RoutingParams) -> Self {
        Dsr {
            node,
            cache: RouteCache::new(params.cache_per_dst),
            params,
            request_id: 0,
            seen: HashMap::new(),
            pending: BTreeMap::new(),
            buffer: routing.new_buffer(),
        }
    }

    pub fn cache(&self) -> &RouteCache {
        &self.cache
    }

    pub fn cache_mut(&mut self) -> &mut RouteCache {
        &mut self.cache
    }

    pub fn discovery_pending(&self, dst: NodeId) -> bool {
        self.pending.contains_key(&dst)
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

    fn rreq_size(&self, record_len: usize) -> u32 {
        self.params.rreq_base + self.params.bytes_per_hop * record_len as u32
    }

    fn rrep_size(&self, route_len: usize) -> u32 {
        self.params.rrep_base + self.params.bytes_per_hop * route_len as u32
    }

    fn originate_discovery(&mut self, ctx: &mut NodeCtx<'_>, dst: NodeId, attempt: u32) {
        self.request_id += 1;
        self.mark_seen((self.node, self.request_id), ctx.now());
        let rreq = DsrRreq {
            src: self.node,
            dst,
            request_id: self.request_id,
            route_record: vec![self.node],
        };
        let pkt = ctx.control(
            PacketKind::Rreq,
            self.rreq_size(1),
            Address::Broadcast,
            Body::Dsr(DsrMessage::Rreq(rreq)),
        );
        ctx.broadcast(pkt);
        self.pending.insert(dst, attempt);
        ctx.set_timer(self.params.retry_delay(attempt), Timer::DiscoveryRetry { dst, attempt });
    }

    /// Re-stamps `pkt` with `route` (starting at this node) and sends it.
    fn send_along(&mut self, ctx: &mut NodeCtx<'_>, mut pkt: Packet, route: Vec<NodeId>) {
        let next_hop = route[1];
        if let Body::Data { payload, source_route } = &mut pkt.body {
            pkt.size = *payload + self.params.data_header_bytes(route.len());
            *source_route = Some(SourceRouteHeader::new(route));
        }
        ctx.unicast(next_hop, pkt);
    }

    fn send_data(&mut self, ctx: &mut NodeCtx<'_>, pkt: Packet) {
        let Some(dst) = pkt.dst_node() else {
            ctx.drop_packet(pkt, DropReason::NoRoute);
            return;
        };
        if let Some(route) = self.cache.best(dst).map(<[NodeId]>::to_vec) {
            self.send_along(ctx, pkt, route);
            return;
        }
        let outcome = self.buffer.buffer_or_drop(pkt, ctx.now());
        ctx.drop_all(outcome.dropped, DropReason::NoRoute);
        if !self.pending.contains_key(&dst) {
            self.originate_discovery(ctx, dst, 0);
        }
    }

    fn forward_data(&mut self, ctx: &mut NodeCtx<'_>, mut pkt: Packet) {
        let Body::Data {
            source_route: Some(header),
            ..
        } = &mut pkt.body
        else {
            ctx.drop_packet(pkt, DropReason::RouteError);
            return;
        };
        let Some(pos) = header.hops.iter().position(|&n| n == self.node) else {
            ctx.drop_packet(pkt, DropReason::RouteError);
            return;
        };
        if pos + 1 >= header.hops.len() {
            ctx.drop_packet(pkt, DropReason::RouteError);
            return;
        }
        header.pos = pos;
        let next_hop = header.hops[pos + 1];
        ctx.unicast(next_hop, pkt);
    }

    fn flush_buffer(&mut self, ctx: &mut NodeCtx<'_>, dst: NodeId) {
        let (ready, expired) = self.buffer.take_for(dst, ctx.now());
        ctx.drop_all(expired, DropReason::NoRoute);
        for pkt in ready {
            self.send_data(ctx, pkt);
        }
    }

    fn handle_rreq(&mut self, ctx: &mut NodeCtx<'_>, mut pkt: Packet, rreq: DsrRreq) {
        let now = ctx.now();
        if rreq.src == self.node || rreq.route_record.contains(&self.node) {
            return;
        }
        if !self.mark_seen((rreq.src, rreq.request_id), now) {
            return;
        }

        if rreq.dst == self.node {
            let mut route = rreq.route_record.clone();
            route.push(self.node);
            self.send_rrep(ctx, route);
            return;
        }

        if self.params.reply_from_cache {
            if let Some(cached) = self.cache.best(rreq.dst) {
                let mut route = rreq.route_record.clone();
                route.extend_from_slice(cached);
                if is_loop_free(&route) {
                    self.send_rrep(ctx, route);
                    return;
                }
            }
        }

        let mut record = rreq.route_record;
        record.push(self.node);
        pkt.size = self.rreq_size(record.len());
        pkt.body = Body::Dsr(DsrMessage::Rreq(DsrRreq {
            route_record: record,
            ..rreq
        }));
        ctx.broadcast(pkt);
    }

    /// Replies with `route`, travelling back over the prefix that ends at this node.
    fn send_rrep(&mut self, ctx: &mut NodeCtx<'_>, route: Vec<NodeId>) {
        let me = route.iter().position(|&n| n == self.node).expect("replier on route");
        let mut back: Vec<NodeId> = route[..=me].to_vec();
        back.reverse();
        let to = back[1];
        let requester = route[0];
        let size = self.rrep_size(route.len());
        let pkt = ctx.control(
            PacketKind::Rrep,
            size,
            Address::Node(requester),
            Body::Dsr(DsrMessage::Rrep(DsrRrep {
                route,
                header: SourceRouteHeader::new(back),
            })),
        );
        ctx.unicast(to, pkt);
    }

    fn handle_rrep(&mut self, ctx: &mut NodeCtx<'_>, mut pkt: Packet, mut rrep: DsrRrep) {
        let now = ctx.now();
        let Some(idx) = rrep.route.iter().position(|&n| n == self.node) else {
            ctx.drop_packet(pkt, DropReason::RouteError);
            return;
        };
        self.cache.insert(rrep.route[idx..].to_vec(), now);
        if idx == 0 {
            let dst = *rrep.route.last().unwrap();
            self.pending.remove(&dst);
            self.flush_buffer(ctx, dst);
            return;
        }
        let Some(pos) = rrep.header.hops.iter().position(|&n| n == self.node) else {
            ctx.drop_packet(pkt, DropReason::RouteError);
            return;
        };
        rrep.header.pos = pos;
        match rrep.header.next_hop() {
            Some(next) => {
                pkt.body = Body::Dsr(DsrMessage::Rrep(rrep));
                ctx.unicast(next, pkt);
            }
            None => ctx.drop_packet(pkt, DropReason::RouteError),
        }
    }

    fn handle_rerr(&mut self, ctx: &mut NodeCtx<'_>, mut pkt: Packet, mut rerr: DsrRerr) {
        let (a, b) = rerr.broken_link;
        self.cache.prune_link(a, b);
        if rerr.original_src == self.node {
            return;
        }
        let Some(pos) = rerr.header.hops.iter().position(|&n| n == self.node) else {
            return;
        };
        rerr.header.pos = pos;
        if let Some(next) = rerr.header.next_hop() {
            pkt.body = Body::Dsr(DsrMessage::Rerr(rerr));
            ctx.unicast(next, pkt);
        }
    }

    /// Sends an error about `(self, next_hop)` back along `traversed`
    /// (which ends at this node).
    fn report_broken_link(&mut self, ctx: &mut NodeCtx<'_>, next_hop: NodeId, traversed: &[NodeId]) {
        if traversed.len() < 2 {
            return;
        }
        let mut back = traversed.to_vec();
        back.reverse();
        let original_src = traversed[0];
        let to = back[1];
        let pkt = ctx.control(
            PacketKind::Rerr,
            self.params.rerr_size,
            Address::Node(original_src),
            Body::Dsr(DsrMessage::Rerr(DsrRerr {
                reporter: self.node,
                broken_link: (self.node, next_hop),
                original_src,
                header: SourceRouteHeader::new(back),
            })),
        );
        ctx.unicast(to, pkt);
    }
}

impl RoutingProtocol for Dsr {
    fn name(&self) -> &'static str {
        "dsr"
    }

    fn on_app_send(&mut self, ctx: &mut NodeCtx<'_>, pkt: Packet) {
        self.send_data(ctx, pkt);
    }

    fn on_packet(&mut self, ctx: &mut NodeCtx<'_>, pkt: Packet, _from: NodeId) {
        match &pkt.body {
            Body::Dsr(DsrMessage::Rreq(r)) => {
                let r = r.clone();
                self.handle_rreq(ctx, pkt, r)
            }
            Body::Dsr(DsrMessage::Rrep(r)) => {
                let r = r.clone();
                self.handle_rrep(ctx, pkt, r)
            }
            Body::Dsr(DsrMessage::Rerr(r)) => {
                let r = r.clone();
                self.handle_rerr(ctx, pkt, r)
            }
            Body::Data { .. } => self.forward_data(ctx, pkt),
            _ => ctx.drop_packet(pkt, DropReason::RouteError),
        }
    }

    fn on_link_failure(&mut self, ctx: &mut NodeCtx<'_>, next_hop: NodeId, pkt: Packet) {
        self.cache.prune_link(self.node, next_hop);
        match &pkt.body {
            Body::Data { source_route, .. } => {
                if pkt.app_src == self.node {
                    self.send_data(ctx, pkt);
                    return;
                }
                if let Some(h) = source_route {
                    let traversed = h.traversed().to_vec();
                    self.report_broken_link(ctx, next_hop, &traversed);
                }
                let dst = pkt.dst_node();
                match dst.and_then(|d| self.cache.best(d)).map(<[NodeId]>::to_vec) {
                    Some(route) => self.send_along(ctx, pkt, route),
                    None => ctx.drop_packet(pkt, DropReason::RouteError),
                }
            }
            Body::Dsr(DsrMessage::Rrep(r)) => {
                let traversed = r.header.traversed().to_vec();
                self.report_broken_link(ctx, next_hop, &traversed);
                ctx.drop_packet(pkt, DropReason::RouteError);
            }
            _ => ctx.drop_packet(pkt, DropReason::RouteError),
        }
    }

    fn on_timer(&mut self, ctx: &mut NodeCtx<'_>, timer: Timer) {
        let Timer::DiscoveryRetry { dst, attempt } = timer;
        if self.pending.get(&dst) != Some(&attempt) {
            return;
        }
        if self.cache.best(dst).is_some() {
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

    fn as_any(&self) -> &dyn Any {
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::routing::testing::{broadcasts, drops, unicasts, Harness};

    fn node(id: NodeId) -> Dsr {
        Dsr::new(id, DsrParams::default(), &RoutingParams::default())
    }

    fn rreq_of(p: &Packet) -> &DsrRreq {
        match &p.body {
            Body::Dsr(DsrMessage::Rreq(r)) => r,
            other => panic!("not an rreq: {other:?}"),
        }
    }

    fn header_of(p: &Packet) -> &SourceRouteHeader {
        match &p.body {
            Body::Data { source_route: Some(h), .. } => h,
            other => panic!("no header: {other:?}"),
        }
    }

    #[test]
    fn record_accumulates() {
        let mut h = Harness::new();
        let mut src = node(1);
        let p = h.data(1, 8);
        let rreq = broadcasts(&h.with(1, |ctx| src.on_app_send(ctx, p)))[0].clone();
        assert_eq!(rreq_of(&rreq).route_record, [1]);
        assert_eq!(rreq.size, 36);
        let mut n3 = node(3);
        let fwd = broadcasts(&h.with(3, |ctx| n3.on_packet(ctx, rreq, 1)))[0].clone();
        assert_eq!(rreq_of(&fwd).route_record, [1, 3]);
        assert_eq!(fwd.size, 40);
    }

    #[test]
    fn node_already_in_record_discards() {
        let mut h = Harness::new();
        let mut n = node(3);
        let rreq = DsrRreq {
            src: 1,
            dst: 8,
            request_id: 1,
            route_record: vec![1, 3, 5],
        };
        let pkt = h.with(5, |ctx| {
            let p = ctx.control(PacketKind::Rreq, 44, Address::Broadcast, Body::Dsr(DsrMessage::Rreq(rreq)));
            ctx.broadcast(p)
        });
        let acts = h.with(3, |ctx| n.on_packet(ctx, broadcasts(&pkt)[0].clone(), 5));
        assert!(acts.is_empty());
    }

    #[test]
    fn destination_replies_and_route_returns() {
        let mut h = Harness::new();
        let rreq = DsrRreq {
            src: 1,
            dst: 8,
            request_id: 1,
            route_record: vec![1, 3, 5],
        };
        let pkt = h.with(5, |ctx| {
            let p = ctx.control(PacketKind::Rreq, 44, Address::Broadcast, Body::Dsr(DsrMessage::Rreq(rreq)));
            ctx.broadcast(p)
        });
        let mut dst = node(8);
        let acts = h.with(8, |ctx| dst.on_packet(ctx, broadcasts(&pkt)[0].clone(), 5));
        let (to, rrep) = unicasts(&acts)[0];
        assert_eq!(to, 5);
        assert_eq!(rrep.size, 36 + 16);

        let mut n5 = node(5);
        let acts = h.with(5, |ctx| n5.on_packet(ctx, rrep.clone(), 8));
        assert_eq!(n5.cache.best(8), Some(&[5, 8][..]));
        let (to, rrep) = unicasts(&acts)[0];
        assert_eq!(to, 3);
        let mut n3 = node(3);
        let (to, rrep) = {
            let acts = h.with(3, |ctx| n3.on_packet(ctx, rrep.clone(), 5));
            let (t, p) = unicasts(&acts)[0];
            (t, p.clone())
        };
        assert_eq!(to, 1);
        let mut src = node(1);
        src.pending.insert(8, 0);
        h.with(1, |ctx| src.on_packet(ctx, rrep, 3));
        assert_eq!(src.cache.best(8), Some(&[1, 3, 5, 8][..]));
        assert!(!src.discovery_pending(8));
    }

    #[test]
    fn cache_hit_sends_without_discovery() {
        let mut h = Harness::new();
        let mut src = node(1);
        src.cache.insert(vec![1, 2, 5, 8], h.now);
        let p = h.data(1, 8);
        let acts = h.with(1, |ctx| src.on_app_send(ctx, p));
        assert!(broadcasts(&acts).is_empty());
        let (to, pkt) = unicasts(&acts)[0];
        assert_eq!(to, 2);
        assert_eq!(header_of(pkt).hops, [1, 2, 5, 8]);
        // 3 hops: payload + 8 + 4 * 4
        assert_eq!(pkt.size, 512 + 8 + 16);
    }

    #[test]
    fn forwarders_follow_header() {
        let mut h = Harness::new();
        let mut src = node(1);
        src.cache.insert(vec![1, 2, 5, 8], h.now);
        let p = h.data(1, 8);
        let pkt = unicasts(&h.with(1, |ctx| src.on_app_send(ctx, p)))[0].1.clone();
        let mut n2 = node(2);
        let acts = h.with(2, |ctx| n2.on_packet(ctx, pkt.clone(), 1));
        assert_eq!(unicasts(&acts)[0].0, 5);
        let mut n4 = node(4);
        let acts = h.with(4, |ctx| n4.on_packet(ctx, pkt, 1));
        assert_eq!(drops(&acts)[0].1, DropReason::RouteError);
    }

    #[test]
    fn broken_link_reports_to_source_and_prunes() {
        let mut h = Harness::new();
        let mut src = node(1);
        src.cache.insert(vec![1, 2, 5, 8], h.now);
        src.cache.insert(vec![1, 3, 6, 8], h.now + SimTime::from_micros(1));
        let p = h.data(1, 8);
        let pkt = unicasts(&h.with(1, |ctx| src.on_app_send(ctx, p)))[0].1.clone();
        let mut n2 = node(2);
        let pkt = unicasts(&h.with(2, |ctx| n2.on_packet(ctx, pkt, 1)))[0].1.clone();
        let mut n5 = node(5);
        n5.cache.insert(vec![5, 8], h.now);
        let pkt = unicasts(&h.with(5, |ctx| n5.on_packet(ctx, pkt, 2)))[0].1.clone();
        let acts = h.with(5, |ctx| n5.on_link_failure(ctx, 8, pkt));
        assert!(n5.cache.best(8).is_none());
        let (to, rerr) = unicasts(&acts)[0];
        assert_eq!(to, 2);
        assert_eq!(drops(&acts)[0].1, DropReason::RouteError);

        let rerr = unicasts(&h.with(2, |ctx| n2.on_packet(ctx, rerr.clone(), 5)))[0].1.clone();
        let acts = h.with(1, |ctx| src.on_packet(ctx, rerr, 2));
        assert!(acts.is_empty());
        assert_eq!(src.cache.routes_to(8).len(), 1);
        assert!(src.cache.iter().all(|r| !contains_link(&r.hops, 5, 8)));

        // The alternate route carries the next packet; no new flood.
        let p = h.data(1, 8);
        let acts = h.with(1, |ctx| src.on_app_send(ctx, p));
        assert!(broadcasts(&acts).is_empty());
        assert_eq!(unicasts(&acts)[0].0, 3);
    }

    #[test]
    fn intermediate_salvages_with_own_cache() {
        let mut h = Harness::new();
        let mut n5 = node(5);
        n5.cache.insert(vec![5, 7, 8], h.now);
        let mut pkt = h.data(1, 8);
        pkt.body = Body::Data {
            payload: 512,
            source_route: Some(SourceRouteHeader {
                hops: vec![1, 2, 5, 8],
                pos: 2,
            }),
        };
        let acts = h.with(5, |ctx| n5.on_link_failure(ctx, 8, pkt));
        let u = unicasts(&acts);
        assert_eq!(u.len(), 2);
        assert_eq!(u[0].1.kind, PacketKind::Rerr);
        assert_eq!((u[1].0, header_of(u[1].1).hops.clone()), (7, vec![5, 7, 8]));
    }

    #[test]
    fn cache_reply_only_when_loop_free() {
        let mut h = Harness::new();
        let mut n4 = node(4);
        n4.cache.insert(vec![4, 6, 8], h.now);
        let rreq = DsrRreq {
            src: 1,
            dst: 8,
            request_id: 1,
            route_record: vec![1, 2],
        };
        let make = |h: &mut Harness, r: DsrRreq| {
            let a = h.with(2, |ctx| {
                let p = ctx.control(PacketKind::Rreq, 40, Address::Broadcast, Body::Dsr(DsrMessage::Rreq(r)));
                ctx.broadcast(p)
            });
            broadcasts(&a)[0].clone()
        };
        let pkt = make(&mut h, rreq);
        let acts = h.with(4, |ctx| n4.on_packet(ctx, pkt, 2));
        let (to, rrep) = unicasts(&acts)[0];
        assert_eq!(to, 2);
        match &rrep.body {
            Body::Dsr(DsrMessage::Rrep(r)) => assert_eq!(r.route, [1, 2, 4, 6, 8]),
            _ => unreachable!(),
        }

        let mut n4 = node(4);
        n4.cache.insert(vec![4, 1, 8], h.now);
        let pkt = make(
            &mut h,
            DsrRreq {
                src: 1,
                dst: 8,
                request_id: 2,
                route_record: vec![1, 2],
            },
        );
        let acts = h.with(4, |ctx| n4.on_packet(ctx, pkt, 2));
        assert_eq!(broadcasts(&acts).len(), 1);
    }

    #[test]
    fn cache_policy() {
        let mut c = RouteCache::new(4);
        let t = SimTime::from_micros;
        c.insert(vec![0, 1, 2, 9], t(1));
        c.insert(vec![0, 3, 9], t(2));
        c.insert(vec![0, 4, 9], t(3));
        assert_eq!(c.best(9), Some(&[0, 3, 9][..]));
        c.insert(vec![0, 5, 9], t(4));
        c.insert(vec![0, 6, 9], t(5));
        assert_eq!(c.routes_to(9).len(), 4);
        assert!(c.routes_to(9).iter().all(|r| r.hops != [0, 1, 2, 9]));
        c.insert(vec![0, 3, 3, 9], t(6));
        assert_eq!(c.routes_to(9).len(), 4);
        assert_eq!(c.prune_link(3, 9), 1);
        assert_eq!(c.best(9), Some(&[0, 4, 9][..]));
    }
}
