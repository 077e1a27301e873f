#![allow(dead_code)]

use std::collections::BTreeMap;

use manet_sim::mobility::Point;
use manet_sim::network::{Network, NetworkSetup};
use manet_sim::protocols::{NodeBuilder, ProtocolRegistry};
use manet_sim::routing::PacketKind;
use manet_sim::sim::SimTime;
use manet_sim::trace::{Layer, LineCollector, Op, TraceRecord};
use manet_sim::traffic::CbrFlow;
use manet_sim::NodeId;

pub fn builder(name: &str) -> NodeBuilder {
    ProtocolRegistry::default().get(name).unwrap().builder(&BTreeMap::new()).unwrap()
}

pub fn flow(src: NodeId, dst: NodeId, start: u64, stop: u64, rate: f64) -> CbrFlow {
    CbrFlow {
        src,
        dst,
        rate,
        pkt_size: 512,
        start_at: SimTime::from_secs(start),
        stop_at: SimTime::from_secs(stop),
    }
}

pub fn records(net: &Network<LineCollector>) -> Vec<TraceRecord> {
    net.sink().lines.iter().map(|l| TraceRecord::parse(l).unwrap()).collect()
}

pub fn is(r: &TraceRecord, op: Op, layer: Layer, kind: PacketKind) -> bool {
    r.op == op && r.layer == layer && r.kind == kind
}

/// Static chain of three nodes 200 m apart, one flow from head to tail.
pub fn chain3(protocol: &str) -> Network<LineCollector> {
    let positions = (0..3).map(|i| Point::new(i as f64 * 200.0, 0.0)).collect();
    let mut setup = NetworkSetup::fixed(positions, SimTime::from_secs(10));
    setup.flows = vec![flow(0, 2, 1, 8, 2.0)];
    let mut net = Network::new(setup, &builder(protocol), LineCollector::default());
    net.run().unwrap();
    net
}

/// Node 0 reaches node 3 through either 1 or 2; 1 and 2 cannot hear each other.
pub const DIAMOND_BREAK: SimTime = SimTime::from_secs(5);

pub fn diamond(protocol: &str) -> Network<LineCollector> {
    let positions = vec![
        Point::new(0.0, 0.0),
        Point::new(200.0, 130.0),
        Point::new(200.0, -130.0),
        Point::new(400.0, 0.0),
    ];
    let mut setup = NetworkSetup::fixed(positions, SimTime::from_secs(9));
    setup.flows = vec![flow(0, 3, 1, 8, 4.0)];
    let mut net = Network::new(setup, &builder(protocol), LineCollector::default());
    net.schedule_relocation(1, DIAMOND_BREAK, Point::new(200.0, 900.0));
    net.run().unwrap();
    net
}

/// Eight nodes nd1..nd8 as ids 0..7. The spine nd1-nd3-nd5-nd8 is the only
/// three-hop route; nd2, nd4, nd6, nd7 form a longer parallel row.
pub const ND1: NodeId = 0;
pub const ND3: NodeId = 2;
pub const ND5: NodeId = 4;
pub const ND8: NodeId = 7;
pub const FIG3_BREAK: SimTime = SimTime::from_secs(5);

pub fn fig3() -> Network<LineCollector> {
    let positions = vec![
        Point::new(0.0, 0.0),     // nd1
        Point::new(0.0, 200.0),   // nd2
        Point::new(200.0, 0.0),   // nd3
        Point::new(200.0, 200.0), // nd4
        Point::new(400.0, 0.0),   // nd5
        Point::new(400.0, 200.0), // nd6
        Point::new(600.0, 200.0), // nd7
        Point::new(600.0, 0.0),   // nd8
    ];
    let mut setup = NetworkSetup::fixed(positions, SimTime::from_secs(10));
    setup.flows = vec![flow(ND1, ND8, 1, 8, 4.0)];
    let mut net = Network::new(setup, &builder("dsr"), LineCollector::default());
    // Out of nd5's reach, still next to nd7.
    net.schedule_relocation(ND8, FIG3_BREAK, Point::new(700.0, 350.0));
    net.run().unwrap();
    net
}
