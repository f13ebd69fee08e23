//! Discrete-event engine primitives: virtual clock, event queue, seeded
//! random streams, and trace logs.

mod rng;
mod scheduler;
mod time;
mod trace;

pub use rng::{RngStream, StreamId};
pub use scheduler::{EventHandle, Fired, Scheduler};
pub use time::SimTime;
pub use trace::{EventTrace, LineLog, SharedBuffer};
