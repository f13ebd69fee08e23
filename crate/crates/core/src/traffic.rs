//! CBR traffic generation and the delivery metrics computed from it.

use std::collections::BTreeMap;

use crate::error::ConfigError;
use crate::ids::NodeId;
use crate::sim::SimTime;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CbrFlow {
    pub src: NodeId,
    pub dst: NodeId,
    /// Packets per second.
    pub rate: f64,
    pub payload: u32,
    pub start: SimTime,
    /// Exclusive: no packet is sent at or after `end`.
    pub end: SimTime,
}

impl CbrFlow {
    pub fn validate(&self, sim_end: SimTime) -> Result<(), ConfigError> {
        if self.src == self.dst {
            return Err(ConfigError::new(
                "flow source and destination are the same node",
            ));
        }
        if !(self.rate.is_finite() && self.rate > 0.0) {
            return Err(ConfigError::new("flow rate must be positive"));
        }
        if self.payload == 0 {
            return Err(ConfigError::new("flow payload must be positive"));
        }
        if self.start >= self.end {
            return Err(ConfigError::new("flow start must precede its end"));
        }
        if self.end > sim_end {
            return Err(ConfigError::new("flow ends after the simulation"));
        }
        Ok(())
    }

    /// Send time of packet `seq`, on an exact grid anchored at `start`.
    pub fn send_time(&self, seq: u32) -> SimTime {
        let offset = (seq as f64 * 1e6 / self.rate).round() as u64;
        self.start + SimTime::from_micros(offset)
    }

    /// All send times, sequence-numbered from 0.
    pub fn generate(&self) -> Vec<SimTime> {
        (0u32..)
            .map(|k| self.send_time(k))
            .take_while(|&t| t < self.end)
            .collect()
    }

    /// Upper bound on throughput: every packet delivered.
    pub fn offered_bps(&self) -> f64 {
        self.rate * self.payload as f64 * 8.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DeliverySample {
    pub seq: u32,
    pub send_time: SimTime,
    pub recv_time: SimTime,
}

impl DeliverySample {
    pub fn delay(&self) -> SimTime {
        self.recv_time - self.send_time
    }
}

/// Mean of `recv - send` in seconds; `None` without samples.
pub fn end_to_end_delay(samples: &[DeliverySample]) -> Option<f64> {
    if samples.is_empty() {
        return None;
    }
    let total: u128 = samples.iter().map(|s| s.delay().as_micros() as u128).sum();
    Some(total as f64 / samples.len() as f64 / 1e6)
}

/// Sum and count of `|delay(i) - delay(i-1)|` over consecutive samples,
/// in microseconds. Samples must be ordered by sequence number.
fn jitter_terms(samples: &[DeliverySample]) -> (u128, u64) {
    samples.windows(2).fold((0, 0), |(sum, n), w| {
        let a = w[0].delay().as_micros() as i128;
        let b = w[1].delay().as_micros() as i128;
        (sum + (b - a).unsigned_abs(), n + 1)
    })
}

/// Mean absolute difference of consecutive delays, in seconds. Lost packets
/// are skipped, so survivors on either side of a gap form a pair.
pub fn avg_jitter(samples: &[DeliverySample]) -> Option<f64> {
    debug_assert!(samples.windows(2).all(|w| w[0].seq < w[1].seq));
    let (sum, n) = jitter_terms(samples);
    (n > 0).then(|| sum as f64 / n as f64 / 1e6)
}

/// Delivered payload bits over the time from flow start to last reception.
pub fn throughput(samples: &[DeliverySample], flow: &CbrFlow) -> f64 {
    let Some(last) = samples.iter().map(|s| s.recv_time).max() else {
        return 0.0;
    };
    let span = last.saturating_sub(flow.start);
    if span == SimTime::ZERO {
        return 0.0;
    }
    let bits = samples.len() as f64 * flow.payload as f64 * 8.0;
    bits / span.as_secs_f64()
}

/// Network-wide control transmissions, each frame counted once when it
/// first goes on the air.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ControlCounters {
    pub beacons: u64,
    pub role_changes: u64,
    pub rreq: u64,
    pub rrep: u64,
    pub rerr: u64,
}

pub fn control_overhead(c: &ControlCounters) -> u64 {
    c.beacons + c.role_changes + c.rreq + c.rrep + c.rerr
}

/// Why a data packet never reached its destination.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DropCause {
    MacQueue,
    MacRetry,
    NoRoute,
    BufferOverflow,
    DiscoveryFailed,
    TtlExpired,
}

impl DropCause {
    pub fn token(self) -> &'static str {
        match self {
            DropCause::MacQueue => "mac_queue",
            DropCause::MacRetry => "mac_retry",
            DropCause::NoRoute => "no_route",
            DropCause::BufferOverflow => "buffer_overflow",
            DropCause::DiscoveryFailed => "discovery_failed",
            DropCause::TtlExpired => "ttl_expired",
        }
    }
}

/// Per-flow bookkeeping at source and destination.
#[derive(Clone, Debug)]
pub struct FlowStats {
    pub flow: CbrFlow,
    pub sent: u64,
    samples: Vec<DeliverySample>,
    received: Vec<bool>,
    pub duplicates: u64,
    pub drops: BTreeMap<DropCause, u64>,
    /// Filled in when the run ends.
    pub in_flight: u64,
}

impl FlowStats {
    pub fn new(flow: CbrFlow) -> Self {
        FlowStats {
            flow,
            sent: 0,
            samples: Vec::new(),
            received: Vec::new(),
            duplicates: 0,
            drops: BTreeMap::new(),
            in_flight: 0,
        }
    }

    /// Returns false (and counts a duplicate) if `seq` was already delivered.
    pub fn record_delivery(&mut self, seq: u32, send_time: SimTime, recv_time: SimTime) -> bool {
        let i = seq as usize;
        if self.received.len() <= i {
            self.received.resize(i + 1, false);
        }
        if self.received[i] {
            self.duplicates += 1;
            return false;
        }
        self.received[i] = true;
        self.samples.push(DeliverySample {
            seq,
            send_time,
            recv_time,
        });
        true
    }

    pub fn record_drop(&mut self, cause: DropCause) {
        *self.drops.entry(cause).or_default() += 1;
    }

    pub fn delivered(&self) -> u64 {
        self.samples.len() as u64
    }

    pub fn dropped(&self) -> u64 {
        self.drops.values().sum()
    }

    /// Samples ordered by sequence number.
    pub fn samples(&self) -> Vec<DeliverySample> {
        let mut s = self.samples.clone();
        s.sort_by_key(|x| x.seq);
        s
    }

    /// `sent = delivered + dropped + in_flight`.
    pub fn is_conserved(&self) -> bool {
        self.sent == self.delivered() + self.dropped() + self.in_flight
    }
}

/// Aggregate delay, jitter and throughput over several flows.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowSummary {
    pub delay_ms: Option<f64>,
    pub jitter_ms: Option<f64>,
    pub throughput_bps: f64,
}

pub fn summarize(flows: &[FlowStats]) -> FlowSummary {
    let mut delay_sum: u128 = 0;
    let mut delay_n: u64 = 0;
    let mut jitter_sum: u128 = 0;
    let mut jitter_n: u64 = 0;
    let mut bits = 0.0;
    let mut first_start: Option<SimTime> = None;
    let mut last_recv: Option<SimTime> = None;
    for f in flows {
        let samples = f.samples();
        delay_sum += samples
            .iter()
            .map(|s| s.delay().as_micros() as u128)
            .sum::<u128>();
        delay_n += samples.len() as u64;
        let (s, n) = jitter_terms(&samples);
        jitter_sum += s;
        jitter_n += n;
        bits += samples.len() as f64 * f.flow.payload as f64 * 8.0;
        first_start = Some(first_start.map_or(f.flow.start, |t| t.min(f.flow.start)));
        if let Some(r) = samples.iter().map(|s| s.recv_time).max() {
            last_recv = Some(last_recv.map_or(r, |t| t.max(r)));
        }
    }
    let throughput_bps = match (first_start, last_recv) {
        (Some(s), Some(r)) if r > s => bits / (r - s).as_secs_f64(),
        _ => 0.0,
    };
    FlowSummary {
        delay_ms: (delay_n > 0).then(|| delay_sum as f64 / delay_n as f64 / 1e3),
        jitter_ms: (jitter_n > 0).then(|| jitter_sum as f64 / jitter_n as f64 / 1e3),
        throughput_bps,
    }
}
