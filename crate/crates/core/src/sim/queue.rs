use std::collections::BTreeMap;

use super::time::SimTime;
use super::SimError;

/// Handle returned by [`Scheduler::schedule`]; the only way to cancel an event.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct EventHandle {
    fire_at: SimTime,
    seq: u64,
}

impl EventHandle {
    pub fn fire_at(&self) -> SimTime {
        self.fire_at
    }
}

/// Virtual clock plus pending-event queue.
///
/// Events are keyed by `(fire_at, seq)` where `seq` is the insertion counter,
/// so simultaneous events dispatch in FIFO order.
#[derive(Debug)]
pub struct Scheduler<E> {
    now: SimTime,
    next_seq: u64,
    pending: BTreeMap<(SimTime, u64), E>,
}

impl<E> Default for Scheduler<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> Scheduler<E> {
    pub fn new() -> Self {
        Scheduler {
            now: SimTime::ZERO,
            next_seq: 0,
            pending: BTreeMap::new(),
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    pub fn schedule(&mut self, fire_at: SimTime, event: E) -> Result<EventHandle, SimError> {
        if fire_at < self.now {
            return Err(SimError::SchedulingInPast {
                requested: fire_at,
                now: self.now,
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.pending.insert((fire_at, seq), event);
        Ok(EventHandle { fire_at, seq })
    }

    /// Schedules `delay` after the current time; never fails.
    pub fn schedule_in(&mut self, delay: SimTime, event: E) -> EventHandle {
        let at = self.now + delay;
        self.schedule(at, event).expect("relative schedule is never in the past")
    }

    /// Returns true iff the event was still pending.
    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        self.pending.remove(&(handle.fire_at, handle.seq)).is_some()
    }

    /// Pops the next event firing at or before `limit`, advancing the clock to it.
    pub fn pop_due(&mut self, limit: SimTime) -> Option<(SimTime, E)> {
        let entry = self.pending.first_entry()?;
        if entry.key().0 > limit {
            return None;
        }
        let ((at, _), event) = entry.remove_entry();
        self.now = at;
        Some((at, event))
    }

    /// Moves the clock forward to `t` (no-op when `t` is in the past).
    pub fn advance_to(&mut self, t: SimTime) {
        if t > self.now {
            self.now = t;
        }
    }

    /// Dispatches every event with `fire_at <= t_end` to `handler`, which may
    /// schedule or cancel further events. Leaves `now() == t_end`.
    pub fn run_until<F>(&mut self, t_end: SimTime, mut handler: F) -> u64
    where
        F: FnMut(&mut Self, SimTime, E),
    {
        let mut dispatched = 0;
        while let Some((at, event)) = self.pop_due(t_end) {
            dispatched += 1;
            handler(self, at, event);
        }
        self.advance_to(t_end);
        dispatched
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::SimRng;

    fn secs(s: f64) -> SimTime {
        SimTime::from_secs_f64(s)
    }

    #[test]
    fn equal_times_fire_fifo() {
        let mut s = Scheduler::new();
        s.schedule(secs(1.0), "a").unwrap();
        s.schedule(secs(1.0), "b").unwrap();
        let mut seen = vec![];
        s.run_until(secs(5.0), |_, _, e| seen.push(e));
        assert_eq!(seen, ["a", "b"]);
    }

    #[test]
    fn past_schedule_is_rejected() {
        let mut s: Scheduler<()> = Scheduler::new();
        s.advance_to(secs(0.7));
        let err = s.schedule(secs(0.5), ()).unwrap_err();
        assert!(matches!(err, SimError::SchedulingInPast { .. }));
    }

    #[test]
    fn random_times_dispatch_sorted() {
        let mut rng = SimRng::new(99);
        let mut s = Scheduler::new();
        let mut times: Vec<u64> = (0..1000).map(|_| rng.below(1_000_000)).collect();
        for &t in &times {
            s.schedule(SimTime::from_micros(t), t).unwrap();
        }
        let mut out = vec![];
        s.run_until(SimTime::from_secs(2), |_, at, e| {
            assert_eq!(at.as_micros(), e);
            out.push(e)
        });
        times.sort();
        assert_eq!(out, times);
    }

    #[test]
    fn cancel_semantics() {
        let mut s = Scheduler::new();
        let h = s.schedule(secs(1.0), 1).unwrap();
        assert!(s.cancel(h));
        assert!(!s.cancel(h));
        assert_eq!(s.run_until(secs(2.0), |_, _, _| {}), 0);

        let fired = s.schedule(secs(3.0), 2).unwrap();
        s.run_until(secs(4.0), |_, _, _| {});
        assert!(!s.cancel(fired));
    }

    #[test]
    fn cancel_half_of_ten_timers() {
        let mut s = Scheduler::new();
        let handles: Vec<_> = (0..10).map(|i| s.schedule(secs(i as f64), i).unwrap()).collect();
        for h in handles.iter().step_by(2) {
            assert!(s.cancel(*h));
        }
        let mut fired = vec![];
        let n = s.run_until(secs(20.0), |_, _, e| fired.push(e));
        assert_eq!(n, 5);
        assert_eq!(fired, [1, 3, 5, 7, 9]);
    }

    #[test]
    fn run_until_bounds() {
        let mut s: Scheduler<u8> = Scheduler::new();
        assert_eq!(s.run_until(secs(300.0), |_, _, _| {}), 0);
        assert_eq!(s.now(), secs(300.0));

        let mut s = Scheduler::new();
        for t in [1.0, 2.0, 3.0] {
            s.schedule(secs(t), ()).unwrap();
        }
        assert_eq!(s.run_until(secs(2.0), |_, _, _| {}), 2);
        assert_eq!(s.now(), secs(2.0));
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn handler_can_reschedule() {
        let mut s = Scheduler::new();
        s.schedule(SimTime::ZERO, 0u32).unwrap();
        let mut count = 0;
        s.run_until(secs(1.0), |s, _, n| {
            count += 1;
            if n < 9 {
                s.schedule_in(SimTime::from_millis(100), n + 1);
            }
        });
        assert_eq!(count, 10);
    }
}
