use std::collections::VecDeque;

use crate::routing::packet::Packet;
use crate::sim::SimTime;
use crate::NodeId;

pub const DEFAULT_CAPACITY: usize = 64;
pub const DEFAULT_TIMEOUT: SimTime = SimTime::from_secs(30);

/// DATA packets waiting for a route, oldest first.
///
/// Capacity is shared across destinations. Expired entries are purged on
/// every access; the caller traces each returned packet as a NO_ROUTE drop.
#[derive(Debug)]
pub struct PendingBuffer {
    capacity: usize,
    timeout: SimTime,
    entries: VecDeque<(SimTime, Packet)>,
}

#[derive(Debug, Default, PartialEq)]
pub struct BufferOutcome {
    pub buffered: bool,
    pub dropped: Vec<Packet>,
}

impl PendingBuffer {
    pub fn new(capacity: usize, timeout: SimTime) -> Self {
        PendingBuffer {
            capacity,
            timeout,
            entries: VecDeque::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn has_packets_for(&self, dst: NodeId) -> bool {
        self.entries.iter().any(|(_, p)| p.dst_node() == Some(dst))
    }

    /// Removes entries older than the timeout.
    pub fn expire(&mut self, now: SimTime) -> Vec<Packet> {
        let mut dropped = Vec::new();
        while let Some((at, _)) = self.entries.front() {
            if now.saturating_sub(*at) <= self.timeout {
                break;
            }
            dropped.push(self.entries.pop_front().unwrap().1);
        }
        dropped
    }

    pub fn buffer_or_drop(&mut self, pkt: Packet, now: SimTime) -> BufferOutcome {
        let mut dropped = self.expire(now);
        if self.capacity == 0 {
            dropped.push(pkt);
            return BufferOutcome { buffered: false, dropped };
        }
        while self.entries.len() >= self.capacity {
            dropped.push(self.entries.pop_front().unwrap().1);
        }
        self.entries.push_back((now, pkt));
        BufferOutcome { buffered: true, dropped }
    }

    /// Takes every live packet for `dst` in arrival order. Also returns
    /// whatever expired along the way.
    pub fn take_for(&mut self, dst: NodeId, now: SimTime) -> (Vec<Packet>, Vec<Packet>) {
        let expired = self.expire(now);
        let mut taken = Vec::new();
        self.entries.retain(|(_, p)| {
            if p.dst_node() == Some(dst) {
                taken.push(p.clone());
                false
            } else {
                true
            }
        });
        (taken, expired)
    }

    pub fn drain_all(&mut self) -> Vec<Packet> {
        self.entries.drain(..).map(|(_, p)| p).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pkt(uid: u64, dst: NodeId) -> Packet {
        Packet::data(uid, 0, dst, 512, 32, SimTime::ZERO)
    }

    #[test]
    fn overflow_drops_oldest() {
        let mut b = PendingBuffer::new(64, DEFAULT_TIMEOUT);
        let mut dropped = vec![];
        for uid in 0..65 {
            dropped.extend(b.buffer_or_drop(pkt(uid, 1), SimTime::ZERO).dropped);
        }
        assert_eq!(dropped.len(), 1);
        assert_eq!(dropped[0].uid, 0);
        assert_eq!(b.len(), 64);
    }

    #[test]
    fn timeout_expires_on_access() {
        let mut b = PendingBuffer::new(64, SimTime::from_secs(30));
        b.buffer_or_drop(pkt(1, 1), SimTime::ZERO);
        let out = b.buffer_or_drop(pkt(2, 1), SimTime::from_secs(31));
        assert_eq!(out.dropped.iter().map(|p| p.uid).collect::<Vec<_>>(), [1]);
        assert_eq!(b.len(), 1);
    }

    #[test]
    fn take_for_preserves_arrival_order() {
        let mut b = PendingBuffer::new(64, DEFAULT_TIMEOUT);
        for (uid, dst) in [(1, 5), (2, 6), (3, 5), (4, 5)] {
            b.buffer_or_drop(pkt(uid, dst), SimTime::ZERO);
        }
        let (taken, expired) = b.take_for(5, SimTime::from_secs(1));
        assert!(expired.is_empty());
        assert_eq!(taken.iter().map(|p| p.uid).collect::<Vec<_>>(), [1, 3, 4]);
        assert!(b.has_packets_for(6));
        assert!(!b.has_packets_for(5));
    }
}
