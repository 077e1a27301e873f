//! Discrete-event engine: integer clock, FIFO-stable event queue, seeded RNG.

mod queue;
mod rng;
mod time;

pub use queue::{EventHandle, Scheduler};
pub use rng::{stream, SimRng};
pub use time::SimTime;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error("event scheduled at {requested} but the clock is already at {now}")]
    SchedulingInPast { requested: SimTime, now: SimTime },
}
