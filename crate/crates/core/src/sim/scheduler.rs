//! Priority event queue keyed by `(fire_time, seq)`.
//!
//! `seq` is a per-scheduler insertion counter, so events scheduled for the same
//! instant fire in the order they were scheduled. Cancellation is lazy: a
//! cancelled entry stays in the heap and is skipped when it surfaces.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashSet};

use super::time::SimTime;
use crate::error::SimError;

/// Opaque reference to a scheduled event, used for cancellation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct EventHandle(u64);

impl EventHandle {
    pub fn seq(self) -> u64 {
        self.0
    }
}

/// An event popped from the queue.
#[derive(Debug)]
pub struct Fired<E> {
    pub time: SimTime,
    pub seq: u64,
    pub event: E,
}

struct Entry<E> {
    time: SimTime,
    seq: u64,
    event: E,
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        self.time == other.time && self.seq == other.seq
    }
}

impl<E> Eq for Entry<E> {}

impl<E> Ord for Entry<E> {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.time, self.seq).cmp(&(other.time, other.seq))
    }
}

impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub struct Scheduler<E> {
    now: SimTime,
    next_seq: u64,
    heap: BinaryHeap<Reverse<Entry<E>>>,
    pending: HashSet<u64>,
    last_fired: Option<(SimTime, u64)>,
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
            heap: BinaryHeap::new(),
            pending: HashSet::new(),
            last_fired: None,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    /// Number of live (not yet fired, not cancelled) events.
    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    pub fn schedule(&mut self, at: SimTime, event: E) -> Result<EventHandle, SimError> {
        if at < self.now {
            return Err(SimError::ScheduledInPast { at, now: self.now });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Reverse(Entry {
            time: at,
            seq,
            event,
        }));
        self.pending.insert(seq);
        Ok(EventHandle(seq))
    }

    /// Schedules `delay` after the current clock. Cannot fail.
    pub fn schedule_in(&mut self, delay: SimTime, event: E) -> EventHandle {
        let at = self.now + delay;
        self.schedule(at, event)
            .expect("relative schedule is never in the past")
    }

    /// Returns true if the event was live and is now inert.
    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        self.pending.remove(&handle.0)
    }

    pub fn is_pending(&self, handle: EventHandle) -> bool {
        self.pending.contains(&handle.0)
    }

    /// Pops the next live event with `fire_time <= t_end`, advancing the clock.
    pub fn pop_until(&mut self, t_end: SimTime) -> Option<Fired<E>> {
        loop {
            let top = self.heap.peek()?;
            if top.0.time > t_end {
                return None;
            }
            let Reverse(entry) = self.heap.pop().expect("peeked");
            if !self.pending.remove(&entry.seq) {
                continue;
            }
            debug_assert!(
                self.last_fired
                    .is_none_or(|last| last < (entry.time, entry.seq)),
                "event order violated"
            );
            self.last_fired = Some((entry.time, entry.seq));
            self.now = entry.time;
            return Some(Fired {
                time: entry.time,
                seq: entry.seq,
                event: entry.event,
            });
        }
    }

    /// Processes every event with `fire_time <= t_end` in `(fire_time, seq)`
    /// order, then sets the clock to `t_end`. Returns the number processed.
    pub fn run_until<F>(&mut self, t_end: SimTime, mut handler: F) -> Result<u64, SimError>
    where
        F: FnMut(&mut Self, Fired<E>),
    {
        if t_end < self.now {
            return Err(SimError::ScheduledInPast {
                at: t_end,
                now: self.now,
            });
        }
        let mut processed = 0;
        while let Some(fired) = self.pop_until(t_end) {
            handler(self, fired);
            processed += 1;
        }
        self.now = t_end;
        Ok(processed)
    }

    /// Live events in arbitrary order.
    pub fn live_events(&self) -> impl Iterator<Item = (SimTime, &E)> + '_ {
        self.heap
            .iter()
            .filter(|e| self.pending.contains(&e.0.seq))
            .map(|e| (e.0.time, &e.0.event))
    }
}
