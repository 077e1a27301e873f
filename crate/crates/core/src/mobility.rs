//! Random Waypoint mobility.
//!
//! Positions are evaluated lazily from the current leg; the engine only needs
//! an event when a leg (travel plus pause) ends.

use crate::sim::{SimRng, SimTime};
use crate::NodeId;

/// Lowest speed a moving node may draw, in m/s. Keeps nodes from stalling
/// on near-zero speeds.
pub const V_MIN: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Area {
    pub width: f64,
    pub height: f64,
}

impl Area {
    pub fn new(width: f64, height: f64) -> Option<Self> {
        (width > 0.0 && height > 0.0 && width.is_finite() && height.is_finite()).then_some(Area { width, height })
    }

    pub fn contains(&self, p: Point) -> bool {
        (0.0..=self.width).contains(&p.x) && (0.0..=self.height).contains(&p.y)
    }

    pub fn random_point(&self, rng: &mut SimRng) -> Point {
        Point {
            x: rng.uniform(0.0, self.width),
            y: rng.uniform(0.0, self.height),
        }
    }
}

impl Default for Area {
    fn default() -> Self {
        Area {
            width: 500.0,
            height: 500.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// One straight-line leg followed by a pause at the waypoint.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NodeMotion {
    pub node: NodeId,
    pub origin: Point,
    pub waypoint: Point,
    pub speed: f64,
    pub depart_at: SimTime,
    pub pause: f64,
}

impl NodeMotion {
    pub fn stationary(node: NodeId, at: Point, since: SimTime) -> Self {
        NodeMotion {
            node,
            origin: at,
            waypoint: at,
            speed: 0.0,
            depart_at: since,
            pause: 0.0,
        }
    }

    pub fn is_static(&self) -> bool {
        self.speed <= 0.0
    }

    /// Travel time to the waypoint in seconds (infinite for a static node).
    pub fn travel_secs(&self) -> f64 {
        if self.is_static() {
            f64::INFINITY
        } else {
            self.origin.distance(&self.waypoint) / self.speed
        }
    }

    /// When the pause at the waypoint ends and a new leg should be drawn.
    pub fn leg_end(&self) -> Option<SimTime> {
        if self.is_static() {
            return None;
        }
        let micros = ((self.travel_secs() + self.pause) * 1e6).ceil() as u64;
        Some(self.depart_at + SimTime::from_micros(micros.max(1)))
    }

    pub fn position_at(&self, t: SimTime) -> Point {
        if self.is_static() || t <= self.depart_at {
            return self.origin;
        }
        let total = self.origin.distance(&self.waypoint);
        let travelled = self.speed * (t - self.depart_at).as_secs_f64();
        if travelled >= total || total == 0.0 {
            return self.waypoint;
        }
        let f = travelled / total;
        Point {
            x: self.origin.x + (self.waypoint.x - self.origin.x) * f,
            y: self.origin.y + (self.waypoint.y - self.origin.y) * f,
        }
    }
}

/// Draws the next leg starting at `from` at time `now`.
pub fn next_leg(rng: &mut SimRng, area: &Area, node: NodeId, from: Point, now: SimTime, v_max: f64, pause: f64) -> NodeMotion {
    if v_max <= 0.0 {
        return NodeMotion::stationary(node, from, now);
    }
    let waypoint = area.random_point(rng);
    let speed = rng.uniform(V_MIN.min(v_max), v_max);
    NodeMotion {
        node,
        origin: from,
        waypoint,
        speed,
        depart_at: now,
        pause,
    }
}
