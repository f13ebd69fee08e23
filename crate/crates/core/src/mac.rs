//! Simplified IEEE 802.11 DCF over a shared unit-disk channel.
//!
//! Carrier sense is physical only (no NAV, no RTS/CTS). Acknowledgments are
//! abstract: a unicast succeeds iff the frame decodes at its next hop, and
//! the sender learns this at the end of its transmission.

use std::collections::{BTreeMap, VecDeque};

use crate::frame::{Frame, FrameClass};
use crate::ids::NodeId;
use crate::mobility::Point;
use crate::radio::RadioParams;
use crate::sim::{RngStream, SimTime, StreamId};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MacParams {
    pub slot: SimTime,
    pub difs: SimTime,
    pub cw_min: u32,
    pub cw_max: u32,
    pub retry_limit: u32,
    pub ack_timeout: SimTime,
    pub queue_capacity: usize,
}

impl Default for MacParams {
    fn default() -> Self {
        MacParams {
            slot: SimTime::from_micros(20),
            difs: SimTime::from_micros(50),
            cw_min: 31,
            cw_max: 1023,
            retry_limit: 7,
            ack_timeout: SimTime::from_millis(1),
            queue_capacity: 50,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MacCounters {
    pub enqueued: u64,
    pub tx_attempts: u64,
    /// Unicast frames acknowledged by their next hop.
    pub delivered: u64,
    pub collisions: u64,
    pub drops_retry: u64,
    pub drops_queue: u64,
    /// Broadcast frames sent (once each, never retried).
    pub broadcasts: u64,
}

impl MacCounters {
    pub fn drops(&self) -> u64 {
        self.drops_retry + self.drops_queue
    }
}

impl std::ops::AddAssign for MacCounters {
    fn add_assign(&mut self, o: Self) {
        self.enqueued += o.enqueued;
        self.tx_attempts += o.tx_attempts;
        self.delivered += o.delivered;
        self.collisions += o.collisions;
        self.drops_retry += o.drops_retry;
        self.drops_queue += o.drops_queue;
        self.broadcasts += o.broadcasts;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MacDropReason {
    QueueFull,
    RetryLimit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MacTimer {
    BackoffExpiry(NodeId),
    TxEnd(NodeId),
    AckTimeout(NodeId),
}

/// Timer service supplied by whoever drives the MAC.
pub trait MacTimers {
    fn arm(&mut self, at: SimTime, timer: MacTimer);
    /// Cancels the node's pending backoff expiry, if any.
    fn disarm_backoff(&mut self, node: NodeId);
}

#[derive(Clone, Debug, PartialEq)]
pub enum MacIndication {
    TxStarted {
        node: NodeId,
        class: FrameClass,
        first_attempt: bool,
    },
    /// Frame decoded at `receiver`; hand it up at time `at`.
    Received {
        receiver: NodeId,
        at: SimTime,
        frame: Frame,
    },
    Dropped {
        node: NodeId,
        frame: Frame,
        reason: MacDropReason,
    },
}

#[derive(Clone, Copy, Debug)]
struct Backoff {
    slots: u64,
    /// Start of the current countdown; `None` while frozen.
    counting_from: Option<SimTime>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Phase {
    Idle,
    Transmitting(u64),
    AwaitAck,
}

#[derive(Debug)]
struct NodeMac {
    queue: VecDeque<Frame>,
    cw: u32,
    retry: u32,
    backoff: Option<Backoff>,
    phase: Phase,
    idle_since: SimTime,
    counters: MacCounters,
    rng: RngStream,
}

#[derive(Clone, Copy, Debug)]
struct Hearer {
    node: NodeId,
    propagation: SimTime,
    corrupted: bool,
}

#[derive(Debug)]
struct Transmission {
    start: SimTime,
    frame: Frame,
    hearers: Vec<Hearer>,
}

/// MAC state of every node plus the transmissions currently on the air.
#[derive(Debug)]
pub struct MacLayer {
    params: MacParams,
    radio: RadioParams,
    nodes: Vec<NodeMac>,
    active: BTreeMap<u64, Transmission>,
    /// Per node: ids of active transmissions it can hear.
    audible: Vec<Vec<u64>>,
    next_tx: u64,
}

impl MacLayer {
    pub fn new(params: MacParams, radio: RadioParams, node_count: usize, master_seed: u64) -> Self {
        let nodes = (0..node_count)
            .map(|i| NodeMac {
                queue: VecDeque::new(),
                cw: params.cw_min,
                retry: 0,
                backoff: None,
                phase: Phase::Idle,
                idle_since: SimTime::ZERO,
                counters: MacCounters::default(),
                rng: RngStream::new(master_seed, StreamId::MacBackoff(NodeId::from_index(i))),
            })
            .collect();
        MacLayer {
            params,
            radio,
            nodes,
            active: BTreeMap::new(),
            audible: vec![Vec::new(); node_count],
            next_tx: 0,
        }
    }

    pub fn params(&self) -> &MacParams {
        &self.params
    }

    pub fn counters(&self, node: NodeId) -> &MacCounters {
        &self.nodes[node.index()].counters
    }

    pub fn totals(&self) -> MacCounters {
        let mut sum = MacCounters::default();
        for n in &self.nodes {
            sum += n.counters;
        }
        sum
    }

    pub fn queue_len(&self, node: NodeId) -> usize {
        self.nodes[node.index()].queue.len()
    }

    pub fn contention_window(&self, node: NodeId) -> u32 {
        self.nodes[node.index()].cw
    }

    /// Every frame still held by some MAC, including ones on the air or
    /// awaiting acknowledgment.
    pub fn queued_frames(&self) -> impl Iterator<Item = &Frame> {
        self.nodes.iter().flat_map(|n| n.queue.iter())
    }

    pub fn is_medium_busy(&self, node: NodeId) -> bool {
        !self.audible[node.index()].is_empty()
    }

    pub fn is_transmitting(&self, node: NodeId) -> bool {
        matches!(self.nodes[node.index()].phase, Phase::Transmitting(_))
    }

    pub fn enqueue(
        &mut self,
        now: SimTime,
        frame: Frame,
        positions: &[Point],
        timers: &mut impl MacTimers,
        out: &mut Vec<MacIndication>,
    ) {
        let node = frame.sender;
        let i = node.index();
        let cap = self.params.queue_capacity;
        let m = &mut self.nodes[i];
        m.counters.enqueued += 1;
        if m.queue.len() >= cap {
            m.counters.drops_queue += 1;
            out.push(MacIndication::Dropped {
                node,
                frame,
                reason: MacDropReason::QueueFull,
            });
            return;
        }
        m.queue.push_back(frame);
        if m.queue.len() > 1 || m.phase != Phase::Idle || m.backoff.is_some() {
            // an armed or frozen backoff already covers this frame
            return;
        }
        let idle_long_enough = self.audible[i].is_empty() && now >= m.idle_since + self.params.difs;
        if idle_long_enough {
            self.start_tx(now, node, positions, timers, out);
        } else {
            self.draw_backoff(now, node, timers);
        }
    }

    pub fn on_timer(
        &mut self,
        now: SimTime,
        timer: MacTimer,
        positions: &[Point],
        timers: &mut impl MacTimers,
        out: &mut Vec<MacIndication>,
    ) {
        match timer {
            MacTimer::BackoffExpiry(node) => {
                self.on_backoff_expiry(now, node, positions, timers, out)
            }
            MacTimer::TxEnd(node) => self.on_tx_end(now, node, timers, out),
            MacTimer::AckTimeout(node) => self.on_ack_timeout(now, node, timers, out),
        }
    }

    fn draw_backoff(&mut self, now: SimTime, node: NodeId, timers: &mut impl MacTimers) {
        let m = &mut self.nodes[node.index()];
        let slots = m.rng.uniform_int(0, m.cw as u64);
        m.backoff = Some(Backoff {
            slots,
            counting_from: None,
        });
        self.resume(now, node, timers);
    }

    /// Starts (or restarts) the countdown if the medium is idle.
    fn resume(&mut self, now: SimTime, node: NodeId, timers: &mut impl MacTimers) {
        let i = node.index();
        if !self.audible[i].is_empty() {
            return;
        }
        let m = &mut self.nodes[i];
        if m.phase != Phase::Idle {
            return;
        }
        let Some(b) = m.backoff.as_mut() else {
            return;
        };
        if b.counting_from.is_some() {
            return;
        }
        let from = now.max(m.idle_since + self.params.difs);
        b.counting_from = Some(from);
        let expiry = from + SimTime::from_micros(b.slots * self.params.slot.as_micros());
        timers.arm(expiry, MacTimer::BackoffExpiry(node));
    }

    /// Medium became busy at `node`: stop the countdown, keeping whole slots
    /// already elapsed. A countdown expiring at this very instant is not
    /// stopped; that node transmits too and the frames collide.
    fn freeze(&mut self, now: SimTime, node: NodeId, timers: &mut impl MacTimers) {
        let slot = self.params.slot.as_micros();
        let m = &mut self.nodes[node.index()];
        let Some(b) = m.backoff.as_mut() else {
            return;
        };
        let Some(from) = b.counting_from else {
            return;
        };
        let expiry = from + SimTime::from_micros(b.slots * slot);
        if expiry <= now {
            return;
        }
        let elapsed = now.saturating_sub(from).as_micros() / slot;
        b.slots -= elapsed.min(b.slots);
        b.counting_from = None;
        timers.disarm_backoff(node);
    }

    fn on_backoff_expiry(
        &mut self,
        now: SimTime,
        node: NodeId,
        positions: &[Point],
        timers: &mut impl MacTimers,
        out: &mut Vec<MacIndication>,
    ) {
        let m = &mut self.nodes[node.index()];
        m.backoff = None;
        if m.phase == Phase::Idle && !m.queue.is_empty() {
            self.start_tx(now, node, positions, timers, out);
        }
    }

    fn start_tx(
        &mut self,
        now: SimTime,
        node: NodeId,
        positions: &[Point],
        timers: &mut impl MacTimers,
        out: &mut Vec<MacIndication>,
    ) {
        let i = node.index();
        let tx_id = self.next_tx;
        self.next_tx += 1;

        let m = &mut self.nodes[i];
        let head = m.queue.front_mut().expect("transmit with empty queue");
        head.attempts += 1;
        let frame = head.clone();
        m.counters.tx_attempts += 1;
        m.phase = Phase::Transmitting(tx_id);
        m.backoff = None;

        let airtime = self
            .radio
            .airtime(frame.size_bytes())
            .expect("frames always carry headers");

        // half duplex: whatever this node was receiving is lost
        for k in 0..self.audible[i].len() {
            let other = self.audible[i][k];
            debug_assert_eq!(
                self.active[&other].start, now,
                "node {node} transmitted over a transmission it could sense"
            );
            corrupt_at(&mut self.active, other, node);
        }

        let mut hearers = Vec::new();
        for h in self.radio.receivers_of(node, positions) {
            let hi = h.index();
            let mut corrupted = matches!(self.nodes[hi].phase, Phase::Transmitting(_));
            let was_idle = self.audible[hi].is_empty();
            for k in 0..self.audible[hi].len() {
                corrupted = true;
                corrupt_at(&mut self.active, self.audible[hi][k], h);
            }
            self.audible[hi].push(tx_id);
            if was_idle {
                self.freeze(now, h, timers);
            }
            hearers.push(Hearer {
                node: h,
                propagation: self
                    .radio
                    .propagation_delay(positions[i].distance(positions[hi])),
                corrupted,
            });
        }

        out.push(MacIndication::TxStarted {
            node,
            class: frame.class(),
            first_attempt: frame.attempts == 1,
        });
        self.active.insert(
            tx_id,
            Transmission {
                start: now,
                frame,
                hearers,
            },
        );
        timers.arm(now + airtime, MacTimer::TxEnd(node));
    }

    fn on_tx_end(
        &mut self,
        now: SimTime,
        node: NodeId,
        timers: &mut impl MacTimers,
        out: &mut Vec<MacIndication>,
    ) {
        let i = node.index();
        let Phase::Transmitting(tx_id) = self.nodes[i].phase else {
            debug_assert!(false, "tx-end without a transmission at {node}");
            return;
        };
        let tx = self.active.remove(&tx_id).expect("live transmission");

        for h in &tx.hearers {
            let hi = h.node.index();
            self.audible[hi].retain(|&x| x != tx_id);
            if self.audible[hi].is_empty() {
                self.nodes[hi].idle_since = now;
                self.resume(now, h.node, timers);
            }
        }

        let mut acked = false;
        let mut collided = false;
        for h in &tx.hearers {
            let addressed = tx.frame.next_hop.is_none_or(|d| d == h.node);
            if !addressed {
                continue;
            }
            if h.corrupted {
                collided = true;
                continue;
            }
            acked = true;
            out.push(MacIndication::Received {
                receiver: h.node,
                at: now + h.propagation,
                frame: tx.frame.clone(),
            });
        }

        let m = &mut self.nodes[i];
        if self.audible[i].is_empty() {
            m.idle_since = now;
        }
        if collided {
            m.counters.collisions += 1;
        }
        m.phase = Phase::Idle;
        if tx.frame.is_broadcast() {
            m.counters.broadcasts += 1;
            self.complete_head(now, node, timers);
        } else if acked {
            m.counters.delivered += 1;
            self.complete_head(now, node, timers);
        } else {
            m.phase = Phase::AwaitAck;
            timers.arm(now + self.params.ack_timeout, MacTimer::AckTimeout(node));
        }
    }

    fn on_ack_timeout(
        &mut self,
        now: SimTime,
        node: NodeId,
        timers: &mut impl MacTimers,
        out: &mut Vec<MacIndication>,
    ) {
        let p = self.params;
        let m = &mut self.nodes[node.index()];
        debug_assert_eq!(m.phase, Phase::AwaitAck);
        m.phase = Phase::Idle;
        if m.retry < p.retry_limit {
            m.retry += 1;
            m.cw = (2 * m.cw + 1).min(p.cw_max);
            self.draw_backoff(now, node, timers);
        } else {
            m.counters.drops_retry += 1;
            let frame = m.queue.front().expect("frame awaiting ack").clone();
            self.complete_head(now, node, timers);
            out.push(MacIndication::Dropped {
                node,
                frame,
                reason: MacDropReason::RetryLimit,
            });
        }
    }

    /// Head frame is finished (sent, acknowledged or dropped): reset the
    /// contention state and start the post-transmission backoff.
    fn complete_head(&mut self, now: SimTime, node: NodeId, timers: &mut impl MacTimers) {
        let m = &mut self.nodes[node.index()];
        m.queue.pop_front();
        m.retry = 0;
        m.cw = self.params.cw_min;
        self.draw_backoff(now, node, timers);
    }
}

fn corrupt_at(active: &mut BTreeMap<u64, Transmission>, tx: u64, at: NodeId) {
    if let Some(t) = active.get_mut(&tx) {
        for h in t.hearers.iter_mut().filter(|h| h.node == at) {
            h.corrupted = true;
        }
    }
}
