//! Constant-bit-rate sources over an unacknowledged datagram agent.

use crate::sim::{SimRng, SimTime};
use crate::NodeId;

#[derive(Clone, Debug, PartialEq)]
pub struct CbrFlow {
    pub src: NodeId,
    pub dst: NodeId,
    /// Packets per second.
    pub rate: f64,
    pub pkt_size: u32,
    pub start_at: SimTime,
    pub stop_at: SimTime,
}

impl CbrFlow {
    pub fn is_valid(&self) -> bool {
        self.src != self.dst && self.rate > 0.0 && self.rate.is_finite() && self.start_at < self.stop_at
    }

    /// Emission time of the `k`-th packet, or `None` once past `stop_at`.
    pub fn emission_time(&self, k: u64) -> Option<SimTime> {
        let offset = (k as f64 * 1e6 / self.rate).round() as u64;
        let t = self.start_at + SimTime::from_micros(offset);
        (t < self.stop_at).then_some(t)
    }

    pub fn emission_times(&self) -> impl Iterator<Item = SimTime> + '_ {
        (0..).map_while(move |k| self.emission_time(k))
    }
}

/// Window within which generated flows are active.
#[derive(Clone, Debug, PartialEq)]
pub struct TrafficPattern {
    pub flows: usize,
    pub rate: f64,
    pub pkt_size: u32,
    pub start_min: SimTime,
    pub start_max: SimTime,
    pub stop_at: SimTime,
}

/// Draws `pattern.flows` flows over distinct ordered `(src, dst)` pairs.
/// Fewer are returned when the node count cannot supply enough pairs.
pub fn random_flows(rng: &mut SimRng, nodes: usize, pattern: &TrafficPattern) -> Vec<CbrFlow> {
    if nodes < 2 {
        return Vec::new();
    }
    let wanted = pattern.flows.min(nodes * (nodes - 1));
    let mut pairs: Vec<(NodeId, NodeId)> = Vec::with_capacity(wanted);
    while pairs.len() < wanted {
        let src = rng.below(nodes as u64) as NodeId;
        let mut dst = rng.below(nodes as u64 - 1) as NodeId;
        if dst >= src {
            dst += 1;
        }
        if !pairs.contains(&(src, dst)) {
            pairs.push((src, dst));
        }
    }
    let lo = pattern.start_min.as_secs_f64();
    let hi = pattern.start_max.as_secs_f64();
    pairs
        .into_iter()
        .map(|(src, dst)| CbrFlow {
            src,
            dst,
            rate: pattern.rate,
            pkt_size: pattern.pkt_size,
            start_at: SimTime::from_secs_f64(rng.uniform(lo, hi)),
            stop_at: pattern.stop_at,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flow(rate: f64, start: f64, stop: f64) -> CbrFlow {
        CbrFlow {
            src: 0,
            dst: 1,
            rate,
            pkt_size: 512,
            start_at: SimTime::from_secs_f64(start),
            stop_at: SimTime::from_secs_f64(stop),
        }
    }

    #[test]
    fn arithmetic_progression() {
        let f = flow(4.0, 10.0, 20.0);
        let times: Vec<_> = f.emission_times().collect();
        assert_eq!(times.len(), 40);
        assert_eq!(times[0], SimTime::from_secs(10));
        assert_eq!(times[1], SimTime::from_micros(10_250_000));
        assert_eq!(times[39], SimTime::from_micros(19_750_000));
    }

    #[test]
    fn one_interval_gives_one_packet() {
        assert_eq!(flow(4.0, 10.0, 10.25).emission_times().count(), 1);
    }

    #[test]
    fn full_window() {
        let total: usize = (0..10).map(|_| flow(4.0, 5.0, 295.0).emission_times().count()).sum();
        assert_eq!(total, 11600);
    }

    #[test]
    fn random_pairs_are_distinct() {
        let pattern = TrafficPattern {
            flows: 10,
            rate: 4.0,
            pkt_size: 512,
            start_min: SimTime::from_secs(1),
            start_max: SimTime::from_secs(5),
            stop_at: SimTime::from_secs(295),
        };
        let mut rng = SimRng::new(3);
        let flows = random_flows(&mut rng, 60, &pattern);
        assert_eq!(flows.len(), 10);
        for (i, f) in flows.iter().enumerate() {
            assert!(f.is_valid());
            assert!(f.start_at >= SimTime::from_secs(1) && f.start_at <= SimTime::from_secs(5));
            assert!(flows[..i].iter().all(|g| (g.src, g.dst) != (f.src, f.dst)));
        }
        assert_eq!(random_flows(&mut rng, 2, &pattern).len(), 2);
        assert!(random_flows(&mut rng, 1, &pattern).is_empty());
        assert_eq!(random_flows(&mut SimRng::new(3), 60, &pattern), flows);
    }
}
