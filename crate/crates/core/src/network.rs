//! The simulated world: node positions, radio delivery, traffic sources and
//! per-node protocol instances, driven by one event queue.
//!
//! Protocol callbacks return [`Action`]s; this module turns them into
//! transmissions, drops and timers, writes the trace, and keeps the online
//! metric counters.

use std::collections::HashSet;
use std::io;

use crate::metrics::Counts;
use crate::mobility::{next_leg, Area, NodeMotion, Point};
use crate::protocols::NodeBuilder;
use crate::radio::RadioConfig;
use crate::routing::{Action, Address, NodeCtx, Packet, PacketKind, RoutingParams, RoutingProtocol, Timer, UidSource};
use crate::sim::{Scheduler, SimRng, SimTime};
use crate::trace::{DropReason, Layer, Op, TraceRecord, TraceSink};
use crate::traffic::CbrFlow;
use crate::NodeId;

/// Everything needed to build a [`Network`] besides the protocol.
#[derive(Clone, Debug)]
pub struct NetworkSetup {
    pub radio: RadioConfig,
    pub area: Area,
    pub max_speed: f64,
    pub pause: f64,
    pub positions: Vec<Point>,
    pub flows: Vec<CbrFlow>,
    pub sim_time: SimTime,
    pub routing: RoutingParams,
    pub check_loops: bool,
    pub mobility_rng: SimRng,
    pub loss_rng: SimRng,
}

impl NetworkSetup {
    /// Static nodes at `positions`, default radio, no traffic.
    pub fn fixed(positions: Vec<Point>, sim_time: SimTime) -> Self {
        NetworkSetup {
            radio: RadioConfig::default(),
            area: Area::default(),
            max_speed: 0.0,
            pause: 0.0,
            positions,
            flows: Vec::new(),
            sim_time,
            routing: RoutingParams::default(),
            check_loops: false,
            mobility_rng: SimRng::new(0),
            loss_rng: SimRng::new(0),
        }
    }
}

#[derive(Clone, Debug)]
enum Event {
    Deliver { to: NodeId, from: NodeId, pkt: Packet },
    LinkFailure { node: NodeId, next_hop: NodeId, pkt: Packet },
    Timer { node: NodeId, timer: Timer },
    LegEnd { node: NodeId },
    Relocate { node: NodeId, to: Point },
    TrafficTick { flow: usize, k: u64 },
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RunStats {
    pub events: u64,
    pub transmissions: u64,
    pub deliveries: u64,
    pub link_failures: u64,
    pub losses: u64,
    pub loop_checks: u64,
    pub loop_violations: u64,
    pub protocol_violations: u64,
    /// First few violation descriptions.
    pub violation_samples: Vec<String>,
}

impl RunStats {
    fn note(&mut self, what: String) {
        if self.violation_samples.len() < 16 {
            self.violation_samples.push(what);
        }
    }
}

pub struct Network<S: TraceSink> {
    sched: Scheduler<Event>,
    radio: RadioConfig,
    area: Area,
    max_speed: f64,
    pause: f64,
    motions: Vec<NodeMotion>,
    nodes: Vec<Box<dyn RoutingProtocol>>,
    flows: Vec<CbrFlow>,
    routing: RoutingParams,
    sim_time: SimTime,
    check_loops: bool,
    uids: UidSource,
    mobility_rng: SimRng,
    loss_rng: SimRng,
    delivered: HashSet<u64>,
    counts: Counts,
    stats: RunStats,
    sink: S,
    line: String,
    io_error: Option<io::Error>,
    ended: bool,
}

impl<S: TraceSink> Network<S> {
    pub fn new(setup: NetworkSetup, builder: &NodeBuilder, sink: S) -> Self {
        let n = setup.positions.len();
        let nodes = (0..n as NodeId).map(|id| builder(id, &setup.routing)).collect();
        let mut net = Network {
            sched: Scheduler::new(),
            radio: setup.radio,
            area: setup.area,
            max_speed: setup.max_speed,
            pause: setup.pause,
            motions: Vec::with_capacity(n),
            nodes,
            flows: setup.flows,
            routing: setup.routing,
            sim_time: setup.sim_time,
            check_loops: setup.check_loops,
            uids: UidSource::new(),
            mobility_rng: setup.mobility_rng,
            loss_rng: setup.loss_rng,
            delivered: HashSet::new(),
            counts: Counts::default(),
            stats: RunStats::default(),
            sink,
            line: String::with_capacity(96),
            io_error: None,
            ended: false,
        };
        for (id, &p) in setup.positions.iter().enumerate() {
            let m = next_leg(
                &mut net.mobility_rng,
                &net.area,
                id as NodeId,
                p,
                SimTime::ZERO,
                net.max_speed,
                net.pause,
            );
            if let Some(end) = m.leg_end() {
                net.sched.schedule_in(end, Event::LegEnd { node: id as NodeId });
            }
            net.motions.push(m);
        }
        for i in 0..net.flows.len() {
            let f = &net.flows[i];
            if f.is_valid() && (f.src as usize) < n && (f.dst as usize) < n {
                if let Some(t) = f.emission_time(0) {
                    net.sched.schedule_in(t, Event::TrafficTick { flow: i, k: 0 });
                }
            }
        }
        net
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn now(&self) -> SimTime {
        self.sched.now()
    }

    pub fn counts(&self) -> Counts {
        self.counts
    }

    pub fn stats(&self) -> &RunStats {
        &self.stats
    }

    pub fn protocol(&self, node: NodeId) -> &dyn RoutingProtocol {
        self.nodes[node as usize].as_ref()
    }

    pub fn position(&self, node: NodeId) -> Point {
        self.motions[node as usize].position_at(self.sched.now())
    }

    pub fn sink(&self) -> &S {
        &self.sink
    }

    pub fn into_sink(self) -> S {
        self.sink
    }

    /// Teleports `node` to `to` at time `at`, leaving it stationary there.
    pub fn schedule_relocation(&mut self, node: NodeId, at: SimTime, to: Point) {
        let _ = self.sched.schedule(at.max(self.sched.now()), Event::Relocate { node, to });
    }

    /// Delivers `pkt` to `to` as if `from` had transmitted it.
    pub fn schedule_delivery(&mut self, at: SimTime, to: NodeId, from: NodeId, pkt: Packet) {
        let _ = self.sched.schedule(at.max(self.sched.now()), Event::Deliver { to, from, pkt });
    }

    /// Runs every event up to and including `t` (capped at the end of the run).
    pub fn run_until(&mut self, t: SimTime) -> io::Result<()> {
        let limit = t.min(self.sim_time);
        while let Some((_, ev)) = self.sched.pop_due(limit) {
            self.stats.events += 1;
            self.handle(ev);
            if let Some(e) = self.io_error.take() {
                return Err(e);
            }
        }
        self.sched.advance_to(limit);
        Ok(())
    }

    /// Runs to the end, drops whatever is still buffered, flushes the sink.
    pub fn run(&mut self) -> io::Result<()> {
        self.run_until(self.sim_time)?;
        if !self.ended {
            self.ended = true;
            for id in 0..self.nodes.len() as NodeId {
                self.with_node(id, |p, ctx| p.on_sim_end(ctx));
            }
            if let Some(e) = self.io_error.take() {
                return Err(e);
            }
            self.sink.finish()?;
        }
        Ok(())
    }

    fn handle(&mut self, ev: Event) {
        match ev {
            Event::TrafficTick { flow, k } => self.traffic_tick(flow, k),
            Event::Deliver { to, from, pkt } => self.deliver(to, from, pkt),
            Event::LinkFailure { node, next_hop, pkt } => {
                self.stats.link_failures += 1;
                self.with_node(node, |p, ctx| p.on_link_failure(ctx, next_hop, pkt));
            }
            Event::Timer { node, timer } => self.with_node(node, |p, ctx| p.on_timer(ctx, timer)),
            Event::LegEnd { node } => {
                let now = self.sched.now();
                let from = self.motions[node as usize].position_at(now);
                let m = next_leg(&mut self.mobility_rng, &self.area, node, from, now, self.max_speed, self.pause);
                if let Some(end) = m.leg_end() {
                    let _ = self.sched.schedule(end, Event::LegEnd { node });
                }
                self.motions[node as usize] = m;
            }
            Event::Relocate { node, to } => {
                self.motions[node as usize] = NodeMotion::stationary(node, to, self.sched.now());
            }
        }
    }

    fn traffic_tick(&mut self, flow: usize, k: u64) {
        let now = self.sched.now();
        let f = &self.flows[flow];
        let (src, dst, size) = (f.src, f.dst, f.pkt_size);
        if let Some(next) = f.emission_time(k + 1) {
            let _ = self.sched.schedule(next, Event::TrafficTick { flow, k: k + 1 });
        }
        let pkt = Packet::data(self.uids.next(), src, dst, size, self.routing.ttl, now);
        self.counts.psnd += 1;
        self.trace(Op::Send, src, Layer::Agt, &pkt, None);
        self.with_node(src, |p, ctx| p.on_app_send(ctx, pkt));
    }

    fn deliver(&mut self, to: NodeId, from: NodeId, pkt: Packet) {
        self.stats.deliveries += 1;
        self.trace(Op::Recv, to, Layer::Mac, &pkt, None);
        if pkt.ttl == 0 {
            self.trace(Op::Drop, to, Layer::Rtr, &pkt, Some(DropReason::Ttl));
            return;
        }
        if pkt.kind == PacketKind::Data && pkt.app_dst == Address::Node(to) {
            if self.delivered.insert(pkt.uid) {
                let now = self.sched.now();
                self.counts.prec += 1;
                self.counts.delay_sum_us += u128::from(now.saturating_sub(pkt.created_at).as_micros());
                self.trace(Op::Recv, to, Layer::Agt, &pkt, None);
            } else {
                self.trace(Op::Drop, to, Layer::Agt, &pkt, Some(DropReason::Dup));
            }
            return;
        }
        self.with_node(to, |p, ctx| p.on_packet(ctx, pkt, from));
    }

    /// Runs one protocol callback and applies what it asked for.
    fn with_node<F>(&mut self, node: NodeId, f: F)
    where
        F: FnOnce(&mut dyn RoutingProtocol, &mut NodeCtx<'_>),
    {
        let mut actions = Vec::new();
        {
            let now = self.sched.now();
            let mut ctx = NodeCtx::new(node, now, &self.routing, &mut self.uids, &mut actions);
            f(self.nodes[node as usize].as_mut(), &mut ctx);
        }
        for a in actions {
            self.apply(node, a);
        }
    }

    fn apply(&mut self, node: NodeId, action: Action) {
        match action {
            Action::Broadcast(pkt) => self.transmit(node, None, pkt),
            Action::Unicast { next_hop, pkt } => self.transmit(node, Some(next_hop), pkt),
            Action::Drop { pkt, reason } => self.trace(Op::Drop, node, Layer::Rtr, &pkt, Some(reason)),
            Action::SetTimer { after, timer } => {
                self.sched.schedule_in(after, Event::Timer { node, timer });
            }
            Action::RouteChanged(dst) => {
                if self.check_loops {
                    self.check_loop(dst);
                }
            }
            Action::Violation(what) => {
                self.stats.protocol_violations += 1;
                self.stats.note(what);
            }
        }
    }

    fn transmit(&mut self, node: NodeId, next_hop: Option<NodeId>, mut pkt: Packet) {
        let n = self.nodes.len() as NodeId;
        if let Some(to) = next_hop {
            if to >= n || to == node {
                self.stats.protocol_violations += 1;
                self.stats.note(format!("node {node} unicast to invalid next hop {to}"));
                self.trace(Op::Drop, node, Layer::Rtr, &pkt, Some(DropReason::RouteError));
                return;
            }
        }
        if pkt.ttl == 0 {
            self.trace(Op::Drop, node, Layer::Rtr, &pkt, Some(DropReason::Ttl));
            return;
        }
        let op = if pkt.app_src == node { Op::Send } else { Op::Forward };
        if pkt.kind.is_control() {
            self.counts.overhead_pkts += 1;
            self.counts.overhead_bytes += u64::from(pkt.size);
        }
        self.trace(op, node, Layer::Rtr, &pkt, None);
        self.trace(Op::Send, node, Layer::Mac, &pkt, None);
        self.stats.transmissions += 1;
        pkt.ttl -= 1;

        let now = self.sched.now();
        let here = self.motions[node as usize].position_at(now);
        let loss = self.radio.per_hop_loss;
        match next_hop {
            None => {
                for j in 0..n {
                    if j == node {
                        continue;
                    }
                    let there = self.motions[j as usize].position_at(now);
                    let d = here.distance(&there);
                    if d > self.radio.range {
                        continue;
                    }
                    if loss > 0.0 && self.loss_rng.bernoulli(loss) {
                        self.stats.losses += 1;
                        self.trace(Op::Drop, j, Layer::Mac, &pkt, Some(DropReason::Loss));
                        continue;
                    }
                    let at = self.radio.delivery_delay(pkt.size, d);
                    self.sched.schedule_in(
                        at,
                        Event::Deliver {
                            to: j,
                            from: node,
                            pkt: pkt.clone(),
                        },
                    );
                }
            }
            Some(to) => {
                let there = self.motions[to as usize].position_at(now);
                let d = here.distance(&there);
                let lost = loss > 0.0 && self.loss_rng.bernoulli(loss);
                if d <= self.radio.range && !lost {
                    let at = self.radio.delivery_delay(pkt.size, d);
                    self.sched.schedule_in(at, Event::Deliver { to, from: node, pkt });
                } else {
                    if lost {
                        self.stats.losses += 1;
                    }
                    let after = self.radio.link_fail_detect_delay;
                    self.sched.schedule_in(after, Event::LinkFailure { node, next_hop: to, pkt });
                }
            }
        }
    }

    /// Looks for a cycle in the union of every node's next hops toward `dst`.
    fn check_loop(&mut self, dst: NodeId) {
        self.stats.loop_checks += 1;
        let now = self.sched.now();
        let n = self.nodes.len();
        let succ: Vec<Vec<NodeId>> = (0..n)
            .map(|u| {
                if u as NodeId == dst {
                    Vec::new()
                } else {
                    self.nodes[u].next_hops(dst, now)
                }
            })
            .collect();
        // 0 = unvisited, 1 = on stack, 2 = done.
        let mut color = vec![0u8; n];
        for start in 0..n {
            if color[start] != 0 {
                continue;
            }
            let mut stack: Vec<(usize, usize)> = vec![(start, 0)];
            color[start] = 1;
            while let Some(&mut (u, ref mut i)) = stack.last_mut() {
                if let Some(&v) = succ[u].get(*i) {
                    *i += 1;
                    let v = v as usize;
                    if v >= n {
                        continue;
                    }
                    match color[v] {
                        0 => {
                            color[v] = 1;
                            stack.push((v, 0));
                        }
                        1 => {
                            self.stats.loop_violations += 1;
                            let cycle: Vec<String> = stack.iter().skip_while(|(w, _)| *w != v).map(|(w, _)| w.to_string()).collect();
                            self.stats
                                .note(format!("routing loop toward {dst} at {now}: {}", cycle.join(" -> ")));
                            return;
                        }
                        _ => {}
                    }
                } else {
                    color[u] = 2;
                    stack.pop();
                }
            }
        }
    }

    fn trace(&mut self, op: Op, node: NodeId, layer: Layer, pkt: &Packet, reason: Option<DropReason>) {
        if self.io_error.is_some() {
            return;
        }
        let rec = TraceRecord {
            op,
            time: self.sched.now(),
            node,
            layer,
            kind: pkt.kind,
            uid: pkt.uid,
            size: pkt.size,
            src: pkt.app_src,
            dst: pkt.app_dst,
            reason,
        };
        self.line.clear();
        rec.write_to(&mut self.line);
        if let Err(e) = self.sink.line(&self.line) {
            self.io_error = Some(e);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::ProtocolRegistry;
    use crate::trace::LineCollector;
    use std::collections::BTreeMap;

    fn builder(name: &str) -> NodeBuilder {
        ProtocolRegistry::default().get(name).unwrap().builder(&BTreeMap::new()).unwrap()
    }

    fn chain(n: usize, spacing: f64) -> Vec<Point> {
        (0..n).map(|i| Point::new(i as f64 * spacing, 0.0)).collect()
    }

    fn one_flow(src: NodeId, dst: NodeId, start: u64, stop: u64, rate: f64) -> CbrFlow {
        CbrFlow {
            src,
            dst,
            rate,
            pkt_size: 512,
            start_at: SimTime::from_secs(start),
            stop_at: SimTime::from_secs(stop),
        }
    }

    fn records(lines: &[String]) -> Vec<TraceRecord> {
        lines.iter().map(|l| TraceRecord::parse(l).unwrap()).collect()
    }

    #[test]
    fn broadcast_reaches_only_in_range_nodes() {
        let mut setup = NetworkSetup::fixed(
            vec![Point::new(0.0, 0.0), Point::new(100.0, 0.0), Point::new(300.0, 0.0)],
            SimTime::from_secs(5),
        );
        setup.flows = vec![one_flow(0, 2, 1, 2, 1.0)];
        let mut net = Network::new(setup, &builder("aodv"), LineCollector::default());
        net.run().unwrap();
        let recs = records(&net.sink().lines);
        let rx: Vec<_> = recs
            .iter()
            .filter(|r| r.layer == Layer::Mac && r.op == Op::Recv && r.kind == PacketKind::Rreq)
            .collect();
        let first: Vec<_> = rx.iter().filter(|r| r.time == rx[0].time).map(|r| r.node).collect();
        assert_eq!(first, [1]);
        // Node 1's rebroadcast reaches both ends.
        assert!(rx.iter().any(|r| r.node == 2));
    }

    #[test]
    fn delivery_time_includes_tx_and_prop() {
        let mut setup = NetworkSetup::fixed(chain(2, 150.0), SimTime::from_secs(5));
        setup.flows = vec![one_flow(0, 1, 1, 2, 1.0)];
        let mut net = Network::new(setup, &builder("aodv"), LineCollector::default());
        net.run().unwrap();
        let recs = records(&net.sink().lines);
        let rreq_tx = recs
            .iter()
            .find(|r| r.kind == PacketKind::Rreq && r.layer == Layer::Mac && r.op == Op::Send)
            .unwrap();
        let rreq_rx = recs
            .iter()
            .find(|r| r.kind == PacketKind::Rreq && r.layer == Layer::Mac && r.op == Op::Recv)
            .unwrap();
        // 48 bytes at 2 Mb/s = 192 us, 150 m = 0.5 us rounds to 1 us.
        assert_eq!(rreq_rx.time - rreq_tx.time, SimTime::from_micros(193));
        let c = net.counts();
        assert_eq!((c.psnd, c.prec), (1, 1));
    }

    #[test]
    fn lossy_unicast_always_fails() {
        let mut setup = NetworkSetup::fixed(chain(2, 100.0), SimTime::from_secs(10));
        setup.radio.per_hop_loss = 1.0;
        setup.flows = vec![one_flow(0, 1, 1, 2, 1.0)];
        let mut net = Network::new(setup, &builder("aodv"), LineCollector::default());
        net.run().unwrap();
        assert_eq!(net.counts().prec, 0);
        assert_eq!(net.stats().deliveries, 0);
        assert!(net.stats().losses > 0);
    }

    #[test]
    fn static_in_range_never_fails_link() {
        let mut setup = NetworkSetup::fixed(chain(4, 200.0), SimTime::from_secs(30));
        setup.flows = vec![one_flow(0, 3, 1, 25, 4.0)];
        let mut net = Network::new(setup, &builder("dsr"), LineCollector::default());
        net.run().unwrap();
        assert_eq!(net.stats().link_failures, 0);
        assert_eq!(net.counts().prec, net.counts().psnd);
    }

    #[test]
    fn ttl_zero_arrival_is_dropped() {
        let setup = NetworkSetup::fixed(chain(3, 100.0), SimTime::from_secs(2));
        let mut net = Network::new(setup, &builder("aodv"), LineCollector::default());
        let mut pkt = Packet::data(900, 0, 2, 512, 0, SimTime::ZERO);
        pkt.ttl = 0;
        net.schedule_delivery(SimTime::from_secs(1), 1, 0, pkt);
        net.run().unwrap();
        let last = net.sink().lines.last().unwrap().clone();
        assert_eq!(last, "d 1.000000 1 RTR DATA 900 512 0 2 TTL");
    }

    #[test]
    fn duplicate_receipt_is_traced_not_counted() {
        let setup = NetworkSetup::fixed(chain(2, 100.0), SimTime::from_secs(3));
        let mut net = Network::new(setup, &builder("aodv"), LineCollector::default());
        let pkt = Packet::data(7, 0, 1, 512, 5, SimTime::ZERO);
        net.schedule_delivery(SimTime::from_secs(1), 1, 0, pkt.clone());
        net.schedule_delivery(SimTime::from_secs(2), 1, 0, pkt);
        net.run().unwrap();
        let lines = &net.sink().lines;
        assert!(lines.contains(&"r 1.000000 1 AGT DATA 7 512 0 1 -".to_string()));
        assert!(lines.contains(&"d 2.000000 1 AGT DATA 7 512 0 1 DUP".to_string()));
        assert_eq!(net.counts().prec, 1);
    }

    #[test]
    fn relocation_breaks_link() {
        let mut setup = NetworkSetup::fixed(chain(3, 200.0), SimTime::from_secs(20));
        setup.flows = vec![one_flow(0, 2, 1, 15, 2.0)];
        let mut net = Network::new(setup, &builder("aodv"), LineCollector::default());
        net.schedule_relocation(2, SimTime::from_secs(5), Point::new(2000.0, 0.0));
        net.run().unwrap();
        assert!(net.stats().link_failures > 0);
        assert!(net.counts().prec < net.counts().psnd);
        assert_eq!(net.position(2), Point::new(2000.0, 0.0));
    }

    #[test]
    fn mobile_nodes_stay_in_area() {
        let mut rng = SimRng::new(9);
        let area = Area::default();
        let positions: Vec<Point> = (0..20).map(|_| area.random_point(&mut rng)).collect();
        let mut setup = NetworkSetup::fixed(positions, SimTime::from_secs(60));
        setup.max_speed = 30.0;
        setup.mobility_rng = SimRng::new(4);
        let mut net = Network::new(setup, &builder("aodv"), ());
        for t in 1..=60 {
            net.run_until(SimTime::from_secs(t)).unwrap();
            for i in 0..20 {
                assert!(area.contains(net.position(i)));
            }
        }
    }

    struct Failing;
    impl TraceSink for Failing {
        fn line(&mut self, _: &str) -> io::Result<()> {
            Err(io::Error::other("disk full"))
        }
    }

    #[test]
    fn io_failure_aborts() {
        let mut setup = NetworkSetup::fixed(chain(2, 100.0), SimTime::from_secs(5));
        setup.flows = vec![one_flow(0, 1, 1, 2, 1.0)];
        let mut net = Network::new(setup, &builder("aodv"), Failing);
        assert!(net.run().is_err());
    }
}
