//! Ad-hoc on-demand distance vector routing.
//!
//! [`AodvAgent`] is I/O-free: every input returns the [`Action`]s the caller
//! must perform (transmit, deliver, drop, arm a timer). The simulator wires it
//! to the MAC; tests can wire it to an ideal channel.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::ids::NodeId;
use crate::sim::SimTime;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AodvParams {
    pub active_route_timeout: SimTime,
    pub rreq_retries: u32,
    pub node_traversal_time: SimTime,
    pub net_diameter: u8,
    /// Data packets buffered per destination while discovery runs.
    pub buffer_capacity: usize,
    /// Lifetime of a neighbor route learned from a hello/beacon.
    pub hello_lifetime: SimTime,
}

impl Default for AodvParams {
    fn default() -> Self {
        AodvParams {
            active_route_timeout: SimTime::from_millis(3_000),
            rreq_retries: 2,
            node_traversal_time: SimTime::from_millis(40),
            net_diameter: 35,
            buffer_capacity: 64,
            hello_lifetime: SimTime::from_millis(3_000),
        }
    }
}

impl AodvParams {
    pub fn path_discovery_time(&self) -> SimTime {
        SimTime::from_micros(2 * self.node_traversal_time.as_micros() * self.net_diameter as u64)
    }

    /// How long attempt `attempt` (0-based) waits for a reply.
    pub fn discovery_wait(&self, attempt: u32) -> SimTime {
        SimTime::from_micros(self.path_discovery_time().as_micros() << attempt.min(16))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Rreq {
    pub originator: NodeId,
    pub rreq_id: u32,
    pub orig_seq: u32,
    pub dest: NodeId,
    /// Last sequence number the originator knew for `dest`, if any.
    pub dest_seq: Option<u32>,
    pub hop_count: u8,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Rrep {
    pub dest: NodeId,
    pub dest_seq: u32,
    pub originator: NodeId,
    pub hop_count: u8,
    pub lifetime: SimTime,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rerr {
    pub unreachable: Vec<(NodeId, u32)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ControlMsg {
    Rreq(Rreq),
    Rrep(Rrep),
    Rerr(Rerr),
}

impl ControlMsg {
    /// Message body size on the wire, excluding lower-layer headers.
    pub fn wire_bytes(&self) -> u32 {
        match self {
            ControlMsg::Rreq(_) => 24,
            ControlMsg::Rrep(_) => 20,
            ControlMsg::Rerr(e) => 4 + 8 * e.unreachable.len() as u32,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DropReason {
    /// Intermediate node had no valid route.
    NoRoute,
    /// Oldest packet evicted from a full discovery buffer.
    BufferOverflow,
    /// All discovery attempts timed out.
    DiscoveryFailed,
    /// Hop limit reached.
    TtlExpired,
}

#[derive(Debug, PartialEq)]
pub enum Action<P> {
    Broadcast(ControlMsg),
    Unicast {
        next_hop: NodeId,
        msg: ControlMsg,
    },
    SendData {
        next_hop: NodeId,
        packet: P,
    },
    Drop {
        packet: P,
        reason: DropReason,
    },
    ArmDiscoveryTimer {
        dest: NodeId,
        attempt: u32,
        at: SimTime,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RreqOutcome {
    /// Already processed this `(originator, rreq_id)`.
    Duplicate,
    /// Reply sent (we are the destination or hold a fresh route).
    Replied,
    Forwarded,
    /// Not allowed to rebroadcast (off the backbone).
    Suppressed,
    /// Hop limit reached.
    Expired,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RouteEntry {
    pub destination: NodeId,
    pub next_hop: NodeId,
    pub hop_count: u8,
    pub dest_seq: Option<u32>,
    pub lifetime: SimTime,
    pub valid: bool,
    pub precursors: BTreeSet<NodeId>,
}

impl RouteEntry {
    pub fn is_active(&self, now: SimTime) -> bool {
        self.valid && self.lifetime > now
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AodvCounters {
    pub rreq_originated: u64,
    pub rreq_forwarded: u64,
    pub rrep_originated: u64,
    pub rrep_forwarded: u64,
    pub rerr_sent: u64,
    pub suppressed_forwards: u64,
    pub duplicate_rreqs: u64,
    pub rrep_no_reverse: u64,
}

#[derive(Clone, Copy, Debug)]
struct Discovery {
    attempt: u32,
}

#[derive(Debug)]
pub struct AodvAgent<P> {
    id: NodeId,
    params: AodvParams,
    seq: u32,
    next_rreq_id: u32,
    routes: BTreeMap<NodeId, RouteEntry>,
    seen: BTreeMap<(NodeId, u32), SimTime>,
    discoveries: BTreeMap<NodeId, Discovery>,
    buffers: BTreeMap<NodeId, VecDeque<P>>,
    counters: AodvCounters,
}

impl<P> AodvAgent<P> {
    pub fn new(id: NodeId, params: AodvParams) -> Self {
        AodvAgent {
            id,
            params,
            seq: 0,
            next_rreq_id: 0,
            routes: BTreeMap::new(),
            seen: BTreeMap::new(),
            discoveries: BTreeMap::new(),
            buffers: BTreeMap::new(),
            counters: AodvCounters::default(),
        }
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn seq(&self) -> u32 {
        self.seq
    }

    pub fn counters(&self) -> &AodvCounters {
        &self.counters
    }

    pub fn route(&self, dest: NodeId) -> Option<&RouteEntry> {
        self.routes.get(&dest)
    }

    pub fn routes(&self) -> impl Iterator<Item = &RouteEntry> {
        self.routes.values()
    }

    /// Next hop of a valid, unexpired route.
    pub fn route_lookup(&self, dest: NodeId, now: SimTime) -> Option<NodeId> {
        self.routes
            .get(&dest)
            .filter(|r| r.is_active(now))
            .map(|r| r.next_hop)
    }

    pub fn is_discovering(&self, dest: NodeId) -> bool {
        self.discoveries.contains_key(&dest)
    }

    /// Packets waiting on route discovery, per destination.
    pub fn buffered(&self) -> impl Iterator<Item = &P> {
        self.buffers.values().flatten()
    }

    /// Installs or improves a route according to sequence-number freshness,
    /// then hop count. Returns whether the entry changed.
    fn offer_route(
        &mut self,
        now: SimTime,
        dest: NodeId,
        next_hop: NodeId,
        hop_count: u8,
        seq: Option<u32>,
        lifetime: SimTime,
    ) -> bool {
        if dest == self.id {
            return false;
        }
        match self.routes.get_mut(&dest) {
            None => {
                self.routes.insert(
                    dest,
                    RouteEntry {
                        destination: dest,
                        next_hop,
                        hop_count,
                        dest_seq: seq,
                        lifetime,
                        valid: true,
                        precursors: BTreeSet::new(),
                    },
                );
                true
            }
            Some(e) => {
                let better = !e.is_active(now)
                    || match (seq, e.dest_seq) {
                        (Some(n), Some(o)) => n > o || (n == o && hop_count < e.hop_count),
                        (Some(_), None) => true,
                        (None, Some(_)) => false,
                        (None, None) => hop_count < e.hop_count,
                    };
                if better {
                    e.next_hop = next_hop;
                    e.hop_count = hop_count;
                    e.dest_seq = seq.or(e.dest_seq);
                    e.lifetime = if e.valid {
                        e.lifetime.max(lifetime)
                    } else {
                        lifetime
                    };
                    e.valid = true;
                    true
                } else {
                    if e.next_hop == next_hop {
                        e.lifetime = e.lifetime.max(lifetime);
                    }
                    false
                }
            }
        }
    }

    fn refresh(&mut self, dest: NodeId, now: SimTime) {
        let until = now + self.params.active_route_timeout;
        if let Some(e) = self.routes.get_mut(&dest) {
            if e.valid {
                e.lifetime = e.lifetime.max(until);
            }
        }
    }

    /// Neighbor heard directly (beacon/hello).
    pub fn on_hello(&mut self, now: SimTime, neighbor: NodeId) {
        let until = now + self.params.hello_lifetime;
        match self.routes.get_mut(&neighbor) {
            Some(e) if e.is_active(now) && e.next_hop == neighbor => {
                e.lifetime = e.lifetime.max(until);
            }
            Some(e) => {
                e.next_hop = neighbor;
                e.hop_count = 1;
                e.lifetime = until;
                e.valid = true;
            }
            None => {
                self.offer_route(now, neighbor, neighbor, 1, None, until);
            }
        }
    }

    /// Originates a data packet at this node.
    pub fn send(&mut self, now: SimTime, dest: NodeId, packet: P) -> Vec<Action<P>> {
        let mut out = Vec::new();
        if let Some(next_hop) = self.route_lookup(dest, now) {
            self.refresh(dest, now);
            self.refresh(next_hop, now);
            out.push(Action::SendData { next_hop, packet });
            return out;
        }
        let buf = self.buffers.entry(dest).or_default();
        if buf.len() >= self.params.buffer_capacity {
            if let Some(old) = buf.pop_front() {
                out.push(Action::Drop {
                    packet: old,
                    reason: DropReason::BufferOverflow,
                });
            }
        }
        buf.push_back(packet);
        if let std::collections::btree_map::Entry::Vacant(e) = self.discoveries.entry(dest) {
            e.insert(Discovery { attempt: 0 });
            self.originate_rreq(now, dest, 0, &mut out);
        }
        out
    }

    /// Relays a data packet that arrived from `prev_hop`.
    pub fn forward(
        &mut self,
        now: SimTime,
        prev_hop: NodeId,
        src: NodeId,
        dest: NodeId,
        packet: P,
    ) -> Vec<Action<P>> {
        let mut out = Vec::new();
        match self.route_lookup(dest, now) {
            Some(next_hop) => {
                self.refresh(dest, now);
                self.refresh(next_hop, now);
                self.refresh(src, now);
                self.refresh(prev_hop, now);
                out.push(Action::SendData { next_hop, packet });
            }
            None => {
                out.push(Action::Drop {
                    packet,
                    reason: DropReason::NoRoute,
                });
                let seq = self.routes.get(&dest).and_then(|e| e.dest_seq).unwrap_or(0);
                self.counters.rerr_sent += 1;
                out.push(Action::Unicast {
                    next_hop: prev_hop,
                    msg: ControlMsg::Rerr(Rerr {
                        unreachable: vec![(dest, seq)],
                    }),
                });
            }
        }
        out
    }

    fn originate_rreq(
        &mut self,
        now: SimTime,
        dest: NodeId,
        attempt: u32,
        out: &mut Vec<Action<P>>,
    ) {
        self.seq += 1;
        let rreq_id = self.next_rreq_id;
        self.next_rreq_id += 1;
        self.seen
            .insert((self.id, rreq_id), now + self.params.path_discovery_time());
        let dest_seq = self.routes.get(&dest).and_then(|e| e.dest_seq);
        self.counters.rreq_originated += 1;
        out.push(Action::Broadcast(ControlMsg::Rreq(Rreq {
            originator: self.id,
            rreq_id,
            orig_seq: self.seq,
            dest,
            dest_seq,
            hop_count: 0,
        })));
        out.push(Action::ArmDiscoveryTimer {
            dest,
            attempt,
            at: now + self.params.discovery_wait(attempt),
        });
    }

    pub fn on_discovery_timeout(
        &mut self,
        now: SimTime,
        dest: NodeId,
        attempt: u32,
    ) -> Vec<Action<P>> {
        let mut out = Vec::new();
        match self.discoveries.get(&dest) {
            Some(d) if d.attempt == attempt => {}
            _ => return out,
        }
        if self.route_lookup(dest, now).is_some() {
            self.discoveries.remove(&dest);
            self.flush(now, dest, &mut out);
            return out;
        }
        if attempt < self.params.rreq_retries {
            self.discoveries.insert(
                dest,
                Discovery {
                    attempt: attempt + 1,
                },
            );
            self.originate_rreq(now, dest, attempt + 1, &mut out);
        } else {
            self.discoveries.remove(&dest);
            for packet in self.buffers.remove(&dest).into_iter().flatten() {
                out.push(Action::Drop {
                    packet,
                    reason: DropReason::DiscoveryFailed,
                });
            }
        }
        out
    }

    fn flush(&mut self, now: SimTime, dest: NodeId, out: &mut Vec<Action<P>>) {
        let Some(next_hop) = self.route_lookup(dest, now) else {
            return;
        };
        if let Some(buf) = self.buffers.remove(&dest) {
            self.refresh(dest, now);
            out.extend(
                buf.into_iter()
                    .map(|packet| Action::SendData { next_hop, packet }),
            );
        }
    }

    /// `may_forward` tells whether this node is allowed to rebroadcast
    /// (always true under full flooding; backbone membership otherwise).
    pub fn on_rreq(
        &mut self,
        now: SimTime,
        from: NodeId,
        rreq: Rreq,
        may_forward: bool,
    ) -> (RreqOutcome, Vec<Action<P>>) {
        let mut out = Vec::new();
        self.seen.retain(|_, &mut exp| exp > now);
        if self.seen.contains_key(&(rreq.originator, rreq.rreq_id)) {
            self.counters.duplicate_rreqs += 1;
            return (RreqOutcome::Duplicate, out);
        }
        self.seen.insert(
            (rreq.originator, rreq.rreq_id),
            now + self.params.path_discovery_time(),
        );

        let art = now + self.params.active_route_timeout;
        self.on_hello_route(now, from);
        let hops = rreq.hop_count.saturating_add(1);
        self.offer_route(now, rreq.originator, from, hops, Some(rreq.orig_seq), art);

        if rreq.dest == self.id {
            if let Some(s) = rreq.dest_seq {
                self.seq = self.seq.max(s);
            }
            self.seq += 1;
            self.counters.rrep_originated += 1;
            out.push(Action::Unicast {
                next_hop: from,
                msg: ControlMsg::Rrep(Rrep {
                    dest: self.id,
                    dest_seq: self.seq,
                    originator: rreq.originator,
                    hop_count: 0,
                    lifetime: self.params.active_route_timeout,
                }),
            });
            return (RreqOutcome::Replied, out);
        }

        // Only nodes allowed to relay may answer from cache; otherwise a
        // reply could route through a node that is off the backbone.
        let cached = self
            .routes
            .get(&rreq.dest)
            .filter(|_| may_forward)
            .and_then(|e| {
                let fresh = e.is_active(now)
                    && e.dest_seq
                        .is_some_and(|s| rreq.dest_seq.is_none_or(|want| s >= want));
                fresh.then(|| {
                    (
                        e.next_hop,
                        e.hop_count,
                        e.dest_seq.expect("checked"),
                        e.lifetime,
                    )
                })
            });
        if let Some((dest_next, hop_count, dest_seq, lifetime)) = cached {
            if let Some(e) = self.routes.get_mut(&rreq.dest) {
                e.precursors.insert(from);
            }
            if let Some(e) = self.routes.get_mut(&rreq.originator) {
                e.precursors.insert(dest_next);
            }
            self.counters.rrep_originated += 1;
            out.push(Action::Unicast {
                next_hop: from,
                msg: ControlMsg::Rrep(Rrep {
                    dest: rreq.dest,
                    dest_seq,
                    originator: rreq.originator,
                    hop_count,
                    lifetime: lifetime.saturating_sub(now),
                }),
            });
            return (RreqOutcome::Replied, out);
        }

        if !may_forward {
            self.counters.suppressed_forwards += 1;
            return (RreqOutcome::Suppressed, out);
        }
        if hops >= self.params.net_diameter {
            return (RreqOutcome::Expired, out);
        }
        let known = self.routes.get(&rreq.dest).and_then(|e| e.dest_seq);
        let dest_seq = match (rreq.dest_seq, known) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
        self.counters.rreq_forwarded += 1;
        out.push(Action::Broadcast(ControlMsg::Rreq(Rreq {
            hop_count: hops,
            dest_seq,
            ..rreq
        })));
        (RreqOutcome::Forwarded, out)
    }

    /// Route to the previous hop implied by receiving any control message.
    fn on_hello_route(&mut self, now: SimTime, from: NodeId) {
        let until = now + self.params.active_route_timeout;
        if self.route_lookup(from, now) != Some(from) {
            self.on_hello(now, from);
        }
        self.refresh(from, now);
        if let Some(e) = self.routes.get_mut(&from) {
            e.lifetime = e.lifetime.max(until);
        }
    }

    pub fn on_rrep(&mut self, now: SimTime, from: NodeId, rrep: Rrep) -> Vec<Action<P>> {
        let mut out = Vec::new();
        self.on_hello_route(now, from);
        let hops = rrep.hop_count.saturating_add(1);
        let lifetime = now + rrep.lifetime.max(self.params.active_route_timeout);
        self.offer_route(now, rrep.dest, from, hops, Some(rrep.dest_seq), lifetime);

        if rrep.originator == self.id {
            self.discoveries.remove(&rrep.dest);
            self.flush(now, rrep.dest, &mut out);
            return out;
        }
        let Some(toward_orig) = self.route_lookup(rrep.originator, now) else {
            self.counters.rrep_no_reverse += 1;
            return out;
        };
        if let Some(e) = self.routes.get_mut(&rrep.dest) {
            e.precursors.insert(toward_orig);
        }
        if let Some(e) = self.routes.get_mut(&rrep.originator) {
            e.precursors.insert(from);
        }
        self.refresh(rrep.originator, now);
        self.counters.rrep_forwarded += 1;
        out.push(Action::Unicast {
            next_hop: toward_orig,
            msg: ControlMsg::Rrep(Rrep {
                hop_count: hops,
                ..rrep
            }),
        });
        out
    }

    /// MAC gave up on `neighbor`, or its beacons stopped.
    pub fn on_link_break(&mut self, now: SimTime, neighbor: NodeId) -> Vec<Action<P>> {
        let broken: Vec<(NodeId, Option<u32>)> = self
            .routes
            .values()
            .filter(|e| e.valid && e.next_hop == neighbor)
            .map(|e| (e.destination, None))
            .collect();
        self.invalidate_and_report(now, &broken)
    }

    pub fn on_rerr(&mut self, now: SimTime, from: NodeId, rerr: Rerr) -> Vec<Action<P>> {
        let mut affected = Vec::new();
        for (dest, seq) in rerr.unreachable {
            if let Some(e) = self.routes.get_mut(&dest) {
                if e.valid && e.next_hop == from {
                    affected.push((dest, Some(e.dest_seq.map_or(seq, |s| s.max(seq)))));
                }
            }
        }
        self.invalidate_and_report(now, &affected)
    }

    /// Invalidates `dests`. A `None` sequence means we detected the break
    /// ourselves and bump the last known number; otherwise it is adopted.
    fn invalidate_and_report(
        &mut self,
        now: SimTime,
        dests: &[(NodeId, Option<u32>)],
    ) -> Vec<Action<P>> {
        let mut out = Vec::new();
        let mut unreachable = Vec::new();
        let mut precursors = BTreeSet::new();
        for (dest, reported) in dests {
            let Some(e) = self.routes.get_mut(dest) else {
                continue;
            };
            if !e.valid {
                continue;
            }
            e.valid = false;
            e.lifetime = now;
            let seq = reported.unwrap_or_else(|| e.dest_seq.map_or(0, |s| s + 1));
            e.dest_seq = Some(seq);
            if !e.precursors.is_empty() {
                unreachable.push((*dest, seq));
                precursors.extend(std::mem::take(&mut e.precursors));
            }
        }
        if unreachable.is_empty() {
            return out;
        }
        let msg = ControlMsg::Rerr(Rerr { unreachable });
        self.counters.rerr_sent += 1;
        if precursors.len() == 1 {
            let next_hop = *precursors.iter().next().expect("one precursor");
            out.push(Action::Unicast { next_hop, msg });
        } else {
            out.push(Action::Broadcast(msg));
        }
        out
    }
}
