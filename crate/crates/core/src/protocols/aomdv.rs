//! Ad-hoc On-demand Multipath Distance Vector routing.
//!
//! Discovery works like AODV, but duplicate request copies are harvested as
//! alternate reverse paths instead of being discarded, and the destination
//! answers one copy per distinct first hop. Every route entry holds up to a
//! few link-disjoint paths (distinct next hops and distinct last hops). The
//! advertised hop count of an entry is fixed for a given sequence number, and
//! a path is only accepted when it is shorter than that, which keeps the
//! multipath graph loop-free.

use std::any::Any;
use std::collections::{BTreeMap, HashMap};

use super::{NodeBuilder, Overrides, ProtocolFactory};
use crate::config::ConfigError;
use crate::routing::{Address, Body, NodeCtx, Packet, PacketKind, PendingBuffer, RoutingParams, RoutingProtocol, Timer};
use crate::sim::SimTime;
use crate::trace::DropReason;
use crate::NodeId;

#[derive(Clone, Debug, PartialEq)]
pub struct AomdvParams {
    pub active_route_lifetime: SimTime,
    pub reverse_route_lifetime: SimTime,
    pub seen_lifetime: SimTime,
    pub rreq_retries: u32,
    pub retry_wait: SimTime,
    pub max_paths: usize,
    /// Advertised hop count = first path's hop count + slack. Zero makes
    /// only strictly shorter paths acceptable as alternates.
    pub advertised_slack: u32,
    pub rreq_size: u32,
    pub rrep_size: u32,
    pub rerr_size: u32,
}

impl Default for AomdvParams {
    fn default() -> Self {
        AomdvParams {
            active_route_lifetime: SimTime::from_secs(10),
            reverse_route_lifetime: SimTime::from_secs(6),
            seen_lifetime: SimTime::from_secs(6),
            rreq_retries: 2,
            retry_wait: SimTime::from_secs(1),
            max_paths: 3,
            advertised_slack: 1,
            rreq_size: 52,
            rrep_size: 48,
            rerr_size: 32,
        }
    }
}

impl AomdvParams {
    fn read(o: &mut Overrides<'_>) -> AomdvParams {
        let d = AomdvParams::default();
        AomdvParams {
            active_route_lifetime: o.secs("active_route_lifetime", d.active_route_lifetime),
            reverse_route_lifetime: o.secs("reverse_route_lifetime", d.reverse_route_lifetime),
            seen_lifetime: o.secs("seen_lifetime", d.seen_lifetime),
            rreq_retries: o.u32("rreq_retries", d.rreq_retries),
            retry_wait: o.secs("retry_wait", d.retry_wait),
            max_paths: o.u32("max_paths", d.max_paths as u32) as usize,
            advertised_slack: o.u32("advertised_slack", d.advertised_slack),
            rreq_size: o.u32("rreq_size", d.rreq_size),
            rrep_size: o.u32("rrep_size", d.rrep_size),
            rerr_size: o.u32("rerr_size", d.rerr_size),
        }
    }

    fn retry_delay(&self, attempt: u32) -> SimTime {
        self.retry_wait.checked_mul(1u64 << attempt.min(20)).unwrap_or(SimTime::MAX)
    }
}

pub struct AomdvFactory;

impl ProtocolFactory for AomdvFactory {
    fn name(&self) -> &'static str {
        "aomdv"
    }

    fn builder(&self, overrides: &BTreeMap<String, String>) -> Result<NodeBuilder, Vec<ConfigError>> {
        let mut o = Overrides::new("aomdv", overrides);
        let params = AomdvParams::read(&mut o);
        o.finish()?;
        if params.max_paths == 0 {
            return Err(vec![ConfigError::new("aomdv.max_paths".into(), "must be at least 1".into())]);
        }
        Ok(std::sync::Arc::new(move |node, routing: &RoutingParams| {
            Box::new(Aomdv::new(node, params.clone(), routing)) as Box<dyn RoutingProtocol>
        }))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AomdvRreq {
    pub src: NodeId,
    pub src_seq: u32,
    pub broadcast_id: u32,
    pub dst: NodeId,
    pub dst_seq: u32,
    pub hop_count: u32,
    /// Neighbor of `src` this copy went through; `None` until the first rebroadcast.
    pub first_hop: Option<NodeId>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AomdvRrep {
    pub src: NodeId,
    pub dst: NodeId,
    pub dst_seq: u32,
    pub hop_count: u32,
    /// Neighbor of `dst` this copy went through; `None` until the first forward.
    pub last_hop: Option<NodeId>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AomdvRerr {
    pub unreachable: Vec<(NodeId, u32)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AomdvMessage {
    Rreq(AomdvRreq),
    Rrep(AomdvRrep),
    Rerr(AomdvRerr),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AomdvPath {
    pub next_hop: NodeId,
    pub last_hop: NodeId,
    pub hop_count: u32,
    pub expires_at: SimTime,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AomdvRouteEntry {
    pub dst: NodeId,
    pub dst_seq: u32,
    /// Fixed once set for `dst_seq`; cleared when the sequence number moves.
    pub advertised_hop_count: Option<u32>,
    pub paths: Vec<AomdvPath>,
}

impl AomdvRouteEntry {
    fn new(dst: NodeId, dst_seq: u32) -> Self {
        AomdvRouteEntry {
            dst,
            dst_seq,
            advertised_hop_count: None,
            paths: Vec::new(),
        }
    }

    pub fn live_paths(&self, now: SimTime) -> impl Iterator<Item = &AomdvPath> {
        self.paths.iter().filter(move |p| now < p.expires_at)
    }

    pub fn is_usable(&self, now: SimTime) -> bool {
        self.live_paths(now).next().is_some()
    }

    /// Next hops pairwise distinct, last hops pairwise distinct.
    pub fn is_disjoint(&self) -> bool {
        let ps = &self.paths;
        ps.iter()
            .enumerate()
            .all(|(i, a)| ps[..i].iter().all(|b| a.next_hop != b.next_hop && a.last_hop != b.last_hop))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PathCandidate {
    pub next_hop: NodeId,
    pub last_hop: NodeId,
    pub hop_count: u32,
    pub dst_seq: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PathDecision {
    /// Fresher sequence number: all previous paths replaced.
    Reset,
    Added,
    Rejected,
}

/// The path acceptance rule. Fresher information replaces the entry. At the
/// same sequence number a path is added iff it is shorter than the
/// advertised hop count, disjoint from every stored path, and there is room.
pub fn accept_alternate_path(
    entry: &mut AomdvRouteEntry,
    cand: PathCandidate,
    expires_at: SimTime,
    max_paths: usize,
    slack: u32,
) -> PathDecision {
    let path = AomdvPath {
        next_hop: cand.next_hop,
        last_hop: cand.last_hop,
        hop_count: cand.hop_count,
        expires_at,
    };
    if cand.dst_seq > entry.dst_seq {
        entry.dst_seq = cand.dst_seq;
        entry.advertised_hop_count = Some(cand.hop_count + slack);
        entry.paths = vec![path];
        return PathDecision::Reset;
    }
    if cand.dst_seq < entry.dst_seq {
        return PathDecision::Rejected;
    }
    match entry.advertised_hop_count {
        None => {
            entry.advertised_hop_count = Some(cand.hop_count + slack);
            entry.paths = vec![path];
            PathDecision::Added
        }
        Some(adv) => {
            if let Some(same) = entry
                .paths
                .iter_mut()
                .find(|p| p.next_hop == cand.next_hop && p.last_hop == cand.last_hop && p.hop_count == cand.hop_count)
            {
                // Same path heard again.
                same.expires_at = same.expires_at.max(expires_at);
                return PathDecision::Rejected;
            }
            let disjoint = entry
                .paths
                .iter()
                .all(|p| p.next_hop != cand.next_hop && p.last_hop != cand.last_hop);
            if cand.hop_count < adv && disjoint && entry.paths.len() < max_paths {
                entry.paths.push(path);
                PathDecision::Added
            } else {
                PathDecision::Rejected
            }
        }
    }
}

#[derive(Debug, Default)]
pub struct MultipathTable {
    entries: BTreeMap<NodeId, AomdvRouteEntry>,
}

impl MultipathTable {
    pub fn get(&self, dst: NodeId) -> Option<&AomdvRouteEntry> {
        self.entries.get(&dst)
    }

    pub fn known_seq(&self, dst: NodeId) -> u32 {
        self.entries.get(&dst).map_or(0, |e| e.dst_seq)
    }

    pub fn iter(&self) -> impl Iterator<Item = &AomdvRouteEntry> {
        self.entries.values()
    }

    /// Drops expired paths. An entry that loses its last path this way is
    /// invalidated: the sequence number is bumped and the advertised hop
    /// count cleared.
    fn expire(&mut self, dst: NodeId, now: SimTime) {
        if let Some(e) = self.entries.get_mut(&dst) {
            let had = !e.paths.is_empty();
            e.paths.retain(|p| now < p.expires_at);
            if had && e.paths.is_empty() {
                invalidate(e);
            }
        }
    }

    fn offer(&mut self, dst: NodeId, cand: PathCandidate, expires_at: SimTime, p: &AomdvParams, now: SimTime) -> PathDecision {
        self.expire(dst, now);
        let e = self.entries.entry(dst).or_insert_with(|| AomdvRouteEntry::new(dst, cand.dst_seq));
        accept_alternate_path(e, cand, expires_at, p.max_paths, p.advertised_slack)
    }

    /// First live path, with its lifetime extended.
    fn select(&mut self, dst: NodeId, now: SimTime, until: SimTime) -> Option<NodeId> {
        self.expire(dst, now);
        let path = self.entries.get_mut(&dst)?.paths.first_mut()?;
        path.expires_at = path.expires_at.max(until);
        Some(path.next_hop)
    }

    /// Removes every path through `via`; returns `(dst, new_seq)` for each
    /// entry left without paths.
    fn remove_via(&mut self, via: NodeId, only: Option<&[NodeId]>, now: SimTime) -> Vec<(NodeId, u32)> {
        let mut lost = Vec::new();
        for e in self.entries.values_mut() {
            if only.is_some_and(|o| !o.contains(&e.dst)) {
                continue;
            }
            e.paths.retain(|p| now < p.expires_at);
            let before = e.paths.len();
            e.paths.retain(|p| p.next_hop != via);
            if before > 0 && e.paths.is_empty() {
                invalidate(e);
                lost.push((e.dst, e.dst_seq));
            }
        }
        lost
    }
}

fn invalidate(e: &mut AomdvRouteEntry) {
    e.paths.clear();
    e.dst_seq += 1;
    e.advertised_hop_count = None;
}

pub struct Aomdv {
    node: NodeId,
    params: AomdvParams,
    own_seq: u32,
    broadcast_id: u32,
    table: MultipathTable,
    seen: HashMap<(NodeId, u32), SimTime>,
    /// First hops the destination already answered, per request.
    answered: HashMap<(NodeId, u32), Vec<NodeId>>,
    /// Reverse next hops already used per `(src, dst, dst_seq)` reply.
    rrep_used: HashMap<(NodeId, NodeId, u32), Vec<NodeId>>,
    /// Hop count carried in forwarded messages, per `(dst, seq)`.
    carried: HashMap<(NodeId, u32), u32>,
    pending: BTreeMap<NodeId, u32>,
    buffer: PendingBuffer,
}

impl Aomdv {
    pub fn new(node: NodeId, params: AomdvParams, routing: &RoutingParams) -> Self {
        Aomdv {
            node,
            params,
            own_seq: 0,
            broadcast_id: 0,
            table: MultipathTable::default(),
            seen: HashMap::new(),
            answered: HashMap::new(),
            rrep_used: HashMap::new(),
            carried: HashMap::new(),
            pending: BTreeMap::new(),
            buffer: routing.new_buffer(),
        }
    }

    pub fn table(&self) -> &MultipathTable {
        &self.table
    }

    pub fn discovery_pending(&self, dst: NodeId) -> bool {
        self.pending.contains_key(&dst)
    }

    fn mark_seen(&mut self, key: (NodeId, u32), now: SimTime) -> bool {
        if self.seen.len() > 512 {
            self.seen.retain(|_, exp| *exp > now);
            self.answered.retain(|k, _| self.seen.contains_key(k));
        }
        match self.seen.get(&key) {
            Some(exp) if *exp > now => false,
            _ => {
                self.seen.insert(key, now + self.params.seen_lifetime);
                true
            }
        }
    }

    /// Records a path offer and checks the entry invariants afterwards.
    fn offer(&mut self, ctx: &mut NodeCtx<'_>, dst: NodeId, cand: PathCandidate, expires_at: SimTime) -> PathDecision {
        let now = ctx.now();
        self.table.expire(dst, now);
        let before = self.table.get(dst).map(|e| (e.dst_seq, e.advertised_hop_count));
        let decision = self.table.offer(dst, cand, expires_at, &self.params, now);
        let e = self.table.get(dst).expect("entry exists after offer");
        if let Some((seq, Some(adv))) = before {
            if seq == e.dst_seq && e.advertised_hop_count != Some(adv) {
                ctx.violation(format!("node {}: advertised hop count for {dst} changed at seq {seq}", self.node));
            }
        }
        if !e.is_disjoint() {
            ctx.violation(format!("node {}: paths to {dst} not disjoint", self.node));
        }
        if let Some(adv) = e.advertised_hop_count {
            if e.paths.iter().any(|p| p.hop_count > adv) {
                ctx.violation(format!("node {}: path to {dst} longer than advertised", self.node));
            }
        }
        if decision != PathDecision::Rejected {
            ctx.route_changed(dst);
        }
        decision
    }

    /// Hop count this node advertises for `dst` in forwarded messages. It
    /// must not change while the sequence number stays the same.
    fn carried_hops(&mut self, ctx: &mut NodeCtx<'_>, dst: NodeId, fallback: u32) -> u32 {
        let (seq, hops) = match self.table.get(dst) {
            Some(e) => (
                e.dst_seq,
                e.advertised_hop_count.map_or(fallback, |a| a - self.params.advertised_slack),
            ),
            None => return fallback,
        };
        if self.carried.len() > 4096 {
            self.carried.clear();
        }
        match self.carried.insert((dst, seq), hops) {
            Some(prev) if prev != hops => {
                ctx.violation(format!("node {}: advertised {prev} then {hops} for {dst} at seq {seq}", self.node));
            }
            _ => {}
        }
        hops
    }

    fn originate_discovery(&mut self, ctx: &mut NodeCtx<'_>, dst: NodeId, attempt: u32) {
        self.own_seq += 1;
        self.broadcast_id += 1;
        let now = ctx.now();
        self.mark_seen((self.node, self.broadcast_id), now);
        self.table.expire(dst, now);
        let rreq = AomdvRreq {
            src: self.node,
            src_seq: self.own_seq,
            broadcast_id: self.broadcast_id,
            dst,
            dst_seq: self.table.known_seq(dst),
            hop_count: 0,
            first_hop: None,
        };
        let pkt = ctx.control(
            PacketKind::Rreq,
            self.params.rreq_size,
            Address::Broadcast,
            Body::Aomdv(AomdvMessage::Rreq(rreq)),
        );
        ctx.broadcast(pkt);
        self.pending.insert(dst, attempt);
        ctx.set_timer(self.params.retry_delay(attempt), Timer::DiscoveryRetry { dst, attempt });
    }

    fn send_data(&mut self, ctx: &mut NodeCtx<'_>, pkt: Packet) {
        let Some(dst) = pkt.dst_node() else {
            ctx.drop_packet(pkt, DropReason::NoRoute);
            return;
        };
        let now = ctx.now();
        if let Some(next_hop) = self.table.select(dst, now, now + self.params.active_route_lifetime) {
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
        if let Some(next_hop) = self.table.select(dst, now, now + self.params.active_route_lifetime) {
            ctx.unicast(next_hop, pkt);
        } else {
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
            Body::Aomdv(AomdvMessage::Rerr(AomdvRerr { unreachable })),
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

    fn handle_rreq(&mut self, ctx: &mut NodeCtx<'_>, mut pkt: Packet, rreq: AomdvRreq, from: NodeId) {
        let now = ctx.now();
        if rreq.src == self.node {
            return;
        }
        // Every copy is a candidate reverse path.
        let reverse = PathCandidate {
            next_hop: from,
            last_hop: rreq.first_hop.unwrap_or(self.node),
            hop_count: rreq.hop_count + 1,
            dst_seq: rreq.src_seq,
        };
        self.offer(ctx, rreq.src, reverse, now + self.params.reverse_route_lifetime);
        let first_copy = self.mark_seen((rreq.src, rreq.broadcast_id), now);

        if rreq.dst == self.node {
            let key = rreq.first_hop.unwrap_or(self.node);
            let answered = self.answered.entry((rreq.src, rreq.broadcast_id)).or_default();
            if answered.contains(&key) || answered.len() >= self.params.max_paths {
                return;
            }
            answered.push(key);
            self.own_seq = self.own_seq.max(rreq.dst_seq);
            let rrep = AomdvRrep {
                src: rreq.src,
                dst: self.node,
                dst_seq: self.own_seq,
                hop_count: 0,
                last_hop: None,
            };
            let out = ctx.control(
                PacketKind::Rrep,
                self.params.rrep_size,
                Address::Node(rreq.src),
                Body::Aomdv(AomdvMessage::Rrep(rrep)),
            );
            ctx.unicast(from, out);
            return;
        }

        if !first_copy {
            return;
        }
        self.table.expire(rreq.dst, now);
        let hop_count = self.carried_hops(ctx, rreq.src, rreq.hop_count + 1);
        let forwarded = AomdvRreq {
            hop_count,
            dst_seq: rreq.dst_seq.max(self.table.known_seq(rreq.dst)),
            first_hop: rreq.first_hop.or(Some(self.node)),
            ..rreq
        };
        pkt.body = Body::Aomdv(AomdvMessage::Rreq(forwarded));
        ctx.broadcast(pkt);
    }

    fn handle_rrep(&mut self, ctx: &mut NodeCtx<'_>, mut pkt: Packet, rrep: AomdvRrep, from: NodeId) {
        let now = ctx.now();
        let forward = PathCandidate {
            next_hop: from,
            last_hop: rrep.last_hop.unwrap_or(self.node),
            hop_count: rrep.hop_count + 1,
            dst_seq: rrep.dst_seq,
        };
        self.offer(ctx, rrep.dst, forward, now + self.params.active_route_lifetime);

        if rrep.src == self.node {
            if self.table.get(rrep.dst).is_some_and(|e| e.is_usable(now)) {
                self.pending.remove(&rrep.dst);
                self.flush_buffer(ctx, rrep.dst);
            }
            return;
        }

        // Each copy goes back over a reverse path not yet used for this reply.
        self.table.expire(rrep.src, now);
        let key = (rrep.src, rrep.dst, rrep.dst_seq);
        if self.rrep_used.len() > 4096 {
            self.rrep_used.clear();
        }
        let used = self.rrep_used.entry(key).or_default();
        let next = self
            .table
            .get(rrep.src)
            .and_then(|e| e.live_paths(now).map(|p| p.next_hop).find(|n| !used.contains(n)));
        let Some(next_hop) = next else {
            ctx.drop_packet(pkt, DropReason::NoRoute);
            return;
        };
        used.push(next_hop);
        let hop_count = self.carried_hops(ctx, rrep.dst, rrep.hop_count + 1);
        pkt.body = Body::Aomdv(AomdvMessage::Rrep(AomdvRrep {
            hop_count,
            last_hop: rrep.last_hop.or(Some(self.node)),
            ..rrep
        }));
        ctx.unicast(next_hop, pkt);
    }

    fn handle_rerr(&mut self, ctx: &mut NodeCtx<'_>, rerr: AomdvRerr, from: NodeId) {
        let now = ctx.now();
        let dsts: Vec<NodeId> = rerr.unreachable.iter().map(|(d, _)| *d).collect();
        let mut lost = self.table.remove_via(from, Some(&dsts), now);
        for (dst, seq) in &mut lost {
            if let Some((_, reported)) = rerr.unreachable.iter().find(|(d, _)| d == dst) {
                if *reported > *seq {
                    *seq = *reported;
                    if let Some(e) = self.table.entries.get_mut(dst) {
                        e.dst_seq = *reported;
                    }
                }
            }
            ctx.route_changed(*dst);
        }
        if !lost.is_empty() {
            self.send_rerr(ctx, lost);
        }
    }
}

impl RoutingProtocol for Aomdv {
    fn name(&self) -> &'static str {
        "aomdv"
    }

    fn on_app_send(&mut self, ctx: &mut NodeCtx<'_>, pkt: Packet) {
        self.send_data(ctx, pkt);
    }

    fn on_packet(&mut self, ctx: &mut NodeCtx<'_>, pkt: Packet, from: NodeId) {
        match &pkt.body {
            Body::Aomdv(AomdvMessage::Rreq(r)) => {
                let r = r.clone();
                self.handle_rreq(ctx, pkt, r, from)
            }
            Body::Aomdv(AomdvMessage::Rrep(r)) => {
                let r = r.clone();
                self.handle_rrep(ctx, pkt, r, from)
            }
            Body::Aomdv(AomdvMessage::Rerr(r)) => {
                let r = r.clone();
                self.handle_rerr(ctx, r, from)
            }
            Body::Data { .. } => self.forward_data(ctx, pkt),
            _ => ctx.drop_packet(pkt, DropReason::RouteError),
        }
    }

    fn on_link_failure(&mut self, ctx: &mut NodeCtx<'_>, next_hop: NodeId, pkt: Packet) {
        let now = ctx.now();
        let lost = self.table.remove_via(next_hop, None, now);
        for (dst, _) in &lost {
            ctx.route_changed(*dst);
        }
        if !lost.is_empty() {
            self.send_rerr(ctx, lost);
        }
        if pkt.kind != PacketKind::Data {
            ctx.drop_packet(pkt, DropReason::NoRoute);
            return;
        }
        let Some(dst) = pkt.dst_node() else {
            ctx.drop_packet(pkt, DropReason::NoRoute);
            return;
        };
        if let Some(alt) = self.table.select(dst, now, now + self.params.active_route_lifetime) {
            ctx.unicast(alt, pkt);
        } else if pkt.app_src == self.node {
            self.send_data(ctx, pkt);
        } else {
            ctx.drop_packet(pkt, DropReason::NoRoute);
        }
    }

    fn on_timer(&mut self, ctx: &mut NodeCtx<'_>, timer: Timer) {
        let Timer::DiscoveryRetry { dst, attempt } = timer;
        if self.pending.get(&dst) != Some(&attempt) {
            return;
        }
        let now = ctx.now();
        self.table.expire(dst, now);
        if self.table.get(dst).is_some_and(|e| e.is_usable(now)) {
            self.pending.remove(&dst);
            self.flush_buffer(ctx, dst);
        } else if attempt < self.params.rreq_retries {
            self.originate_discovery(ctx, dst, attempt + 1);
        } else {
            self.pending.remove(&dst);
            let (stranded, expired) = self.buffer.take_for(dst, now);
            ctx.drop_all(expired, DropReason::NoRoute);
            ctx.drop_all(stranded, DropReason::NoRoute);
        }
    }

    fn on_sim_end(&mut self, ctx: &mut NodeCtx<'_>) {
        let stranded = self.buffer.drain_all();
        ctx.drop_all(stranded, DropReason::NoRoute);
    }

    fn next_hops(&self, dst: NodeId, now: SimTime) -> Vec<NodeId> {
        self.table
            .get(dst)
            .map(|e| e.live_paths(now).map(|p| p.next_hop).collect())
            .unwrap_or_default()
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}
