//! Unit-disk radio with a fixed-rate, collision-free MAC.

use crate::mobility::Point;
use crate::sim::SimTime;
use crate::NodeId;

/// Signal speed used for propagation delay, m/s.
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

#[derive(Clone, Debug, PartialEq)]
pub struct RadioConfig {
    /// Meters; the boundary is inclusive.
    pub range: f64,
    /// Bits per second.
    pub bandwidth: f64,
    pub per_hop_loss: f64,
    pub link_fail_detect_delay: SimTime,
}

impl Default for RadioConfig {
    fn default() -> Self {
        RadioConfig {
            range: 250.0,
            bandwidth: 2.0e6,
            per_hop_loss: 0.0,
            link_fail_detect_delay: SimTime::from_millis(50),
        }
    }
}

impl RadioConfig {
    /// `(field, message)` for each invalid setting.
    pub fn problems(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        if !(self.range > 0.0 && self.range.is_finite()) {
            out.push(("radio.range", format!("must be > 0, got {}", self.range)));
        }
        if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            out.push(("radio.bandwidth", format!("must be > 0, got {}", self.bandwidth)));
        }
        if !(0.0..=1.0).contains(&self.per_hop_loss) {
            out.push(("radio.per_hop_loss", format!("must be within [0, 1], got {}", self.per_hop_loss)));
        }
        out
    }

    pub fn in_range(&self, a: &Point, b: &Point) -> bool {
        a.distance(b) <= self.range
    }

    pub fn tx_delay(&self, size_bytes: u32) -> SimTime {
        SimTime::from_secs_f64(f64::from(size_bytes) * 8.0 / self.bandwidth)
    }

    pub fn prop_delay(&self, meters: f64) -> SimTime {
        SimTime::from_secs_f64(meters / SPEED_OF_LIGHT)
    }

    /// Time from transmission start until the frame is fully received.
    pub fn delivery_delay(&self, size_bytes: u32, meters: f64) -> SimTime {
        self.tx_delay(size_bytes) + self.prop_delay(meters)
    }
}

/// Nodes within `range` of `node`, in id order, excluding `node` itself.
pub fn neighbors(positions: &[Point], node: NodeId, range: f64) -> Vec<NodeId> {
    let me = positions[node as usize];
    positions
        .iter()
        .enumerate()
        .filter(|&(i, p)| i as NodeId != node && me.distance(p) <= range)
        .map(|(i, _)| i as NodeId)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::SimRng;
    use proptest::prelude::*;

    #[test]
    fn boundary_is_inclusive() {
        let pos = [Point::new(0.0, 0.0), Point::new(250.0, 0.0), Point::new(250.1, 0.0)];
        assert_eq!(neighbors(&pos, 0, 250.0), [1]);
        assert!(neighbors(&pos[..1], 0, 250.0).is_empty());
    }

    #[test]
    fn delays() {
        let r = RadioConfig::default();
        assert_eq!(r.tx_delay(512), SimTime::from_micros(2048));
        assert_eq!(r.prop_delay(300.0), SimTime::from_micros(1));
        assert_eq!(r.delivery_delay(512, 0.0), SimTime::from_micros(2048));
    }

    #[test]
    fn validation() {
        let r = RadioConfig {
            range: 0.0,
            bandwidth: -1.0,
            per_hop_loss: 1.5,
            ..Default::default()
        };
        let fields: Vec<_> = r.problems().into_iter().map(|(f, _)| f).collect();
        assert_eq!(fields, ["radio.range", "radio.bandwidth", "radio.per_hop_loss"]);
        assert!(RadioConfig::default().problems().is_empty());
    }

    proptest! {
        #[test]
        fn matches_brute_force(seed in any::<u64>(), n in 1usize..40, range in 10.0f64..400.0) {
            let mut rng = SimRng::new(seed);
            let pos: Vec<Point> = (0..n).map(|_| Point::new(rng.uniform(0.0, 500.0), rng.uniform(0.0, 500.0))).collect();
            for i in 0..n {
                let mut want = Vec::new();
                for j in 0..n {
                    let dx = pos[i].x - pos[j].x;
                    let dy = pos[i].y - pos[j].y;
                    if i != j && (dx * dx + dy * dy).sqrt() <= range {
                        want.push(j as NodeId);
                    }
                }
                prop_assert_eq!(neighbors(&pos, i as NodeId, range), want);
            }
        }
    }
}
