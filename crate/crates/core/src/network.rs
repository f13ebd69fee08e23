//! The simulation: every layer wired to one event queue.

use std::io::Write;

use crate::aodv::{Action, AodvAgent, AodvCounters, AodvParams, ControlMsg, DropReason};
use crate::clustering::formation::backbone_size;
use crate::clustering::{form_clusters, ClusterAgent, ClusterRole, Mode, RoleKind, Topology};
use crate::error::{Error, Result};
use crate::frame::{DataPacket, Frame, FrameClass, Payload};
use crate::ids::NodeId;
use crate::mac::{
    MacCounters, MacDropReason, MacIndication, MacLayer, MacParams, MacTimer, MacTimers,
};
use crate::mobility::{init_placement, Point, Trajectory, WaypointParams};
use crate::radio::RadioParams;
use crate::report::RunReport;
use crate::scenario::{Flooding, MobilityModel, ScenarioConfig};
use crate::sim::{EventHandle, EventTrace, LineLog, RngStream, Scheduler, SimTime, StreamId};
use crate::traffic::{control_overhead, summarize, ControlCounters, DropCause, FlowStats};

#[derive(Clone, Debug, PartialEq)]
pub enum Event {
    MobilityWaypoint(NodeId),
    FrameDelivery {
        receiver: NodeId,
        frame: Frame,
    },
    Mac(MacTimer),
    BeaconTimer {
        node: NodeId,
        k: u64,
    },
    RouteTimeout {
        node: NodeId,
        dest: NodeId,
        attempt: u32,
    },
    TrafficSend {
        flow: usize,
        seq: u32,
    },
    LinkCheck,
    SimEnd,
}

impl Event {
    pub fn kind(&self) -> &'static str {
        match self {
            Event::MobilityWaypoint(_) => "mobility-waypoint",
            Event::FrameDelivery { .. } => "frame-delivery",
            Event::Mac(MacTimer::BackoffExpiry(_)) => "backoff-expiry",
            Event::Mac(MacTimer::TxEnd(_)) => "tx-end",
            Event::Mac(MacTimer::AckTimeout(_)) => "ack-timeout",
            Event::BeaconTimer { .. } => "beacon-timer",
            Event::RouteTimeout { .. } => "route-timeout",
            Event::TrafficSend { .. } => "traffic-send",
            Event::LinkCheck => "link-check",
            Event::SimEnd => "sim-end",
        }
    }

    /// Node the event acts on; `None` for engine-global events.
    pub fn target(&self) -> Option<NodeId> {
        match self {
            Event::MobilityWaypoint(n) => Some(*n),
            Event::FrameDelivery { receiver, .. } => Some(*receiver),
            Event::Mac(
                MacTimer::BackoffExpiry(n) | MacTimer::TxEnd(n) | MacTimer::AckTimeout(n),
            ) => Some(*n),
            Event::BeaconTimer { node, .. } => Some(*node),
            Event::RouteTimeout { node, .. } => Some(*node),
            Event::TrafficSend { .. } | Event::LinkCheck | Event::SimEnd => None,
        }
    }
}

/// Optional outputs of a run.
#[derive(Default)]
pub struct RunOptions {
    /// One line per processed event: `time_us,seq,kind,target`.
    pub trace: Option<Box<dyn Write + Send>>,
    /// One line per role change: `time_us,node,old_role,new_role,cluster_id`.
    pub role_log: Option<Box<dyn Write + Send>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RoleChangeRecord {
    pub time: SimTime,
    pub node: NodeId,
    pub old: ClusterRole,
    pub new: ClusterRole,
}

/// Backbone state sampled at a link check.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BackboneSnapshot {
    pub time: SimTime,
    /// Backbone size of the running protocol.
    pub live: usize,
    /// No node has a role change waiting out the stability window.
    pub settled: bool,
    /// Reference backbone sizes for both modes on the current unit-disk graph.
    pub formed_chg: usize,
    pub formed_ch_g: usize,
}

/// Everything a run produces, beyond the report row.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub report: RunReport,
    pub flows: Vec<FlowStats>,
    pub mac: Vec<MacCounters>,
    pub control: ControlCounters,
    pub routing: AodvCounters,
    pub snapshots: Vec<BackboneSnapshot>,
    pub role_changes: Vec<RoleChangeRecord>,
    pub final_roles: Vec<ClusterRole>,
    pub events_processed: u64,
}

impl RunOutcome {
    pub fn mac_totals(&self) -> MacCounters {
        let mut t = MacCounters::default();
        for c in &self.mac {
            t += *c;
        }
        t
    }
}

struct Timers<'a> {
    sched: &'a mut Scheduler<Event>,
    backoff: &'a mut [Option<EventHandle>],
}

impl MacTimers for Timers<'_> {
    fn arm(&mut self, at: SimTime, timer: MacTimer) {
        let h = self
            .sched
            .schedule(at, Event::Mac(timer))
            .expect("MAC timers are never in the past");
        if let MacTimer::BackoffExpiry(n) = timer {
            if let Some(old) = self.backoff[n.index()].replace(h) {
                self.sched.cancel(old);
            }
        }
    }

    fn disarm_backoff(&mut self, node: NodeId) {
        if let Some(h) = self.backoff[node.index()].take() {
            self.sched.cancel(h);
        }
    }
}

pub struct Simulation {
    cfg: ScenarioConfig,
    end: SimTime,
    sched: Scheduler<Event>,
    backoff_handles: Vec<Option<EventHandle>>,
    waypoint: WaypointParams,
    trajectories: Vec<Trajectory>,
    mobility_rng: Vec<RngStream>,
    positions: Vec<Point>,
    positions_at: Option<SimTime>,
    radio: RadioParams,
    mac: MacLayer,
    clusters: Vec<ClusterAgent>,
    routing: Vec<AodvAgent<DataPacket>>,
    beacon_rng: Vec<RngStream>,
    beacon_phase: Vec<SimTime>,
    flows: Vec<FlowStats>,
    control: ControlCounters,
    indications: Vec<MacIndication>,
    trace: Option<EventTrace>,
    role_log: Option<LineLog>,
    role_changes: Vec<RoleChangeRecord>,
    snapshots: Vec<BackboneSnapshot>,
    events: u64,
}

impl Simulation {
    pub fn new(cfg: &ScenarioConfig, options: RunOptions) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.node_count;
        let seed = cfg.master_seed;
        let end = cfg.sim_time;

        let mut placement_rng = RngStream::new(seed, StreamId::Placement);
        let mut initial = init_placement(n, &cfg.terrain, &mut placement_rng)?;
        for (id, p) in &cfg.placement {
            initial[id.index()] = *p;
        }
        let trajectories = initial.iter().map(|&p| Trajectory::stationary(p)).collect();

        let radio = cfg.radio();
        let cluster_params = cfg.cluster_params();
        let nodes = || (0..n).map(NodeId::from_index);
        let clusters = nodes()
            .map(|id| {
                if cfg.pinned_roles.is_empty() {
                    ClusterAgent::elected(id, cfg.mode, cluster_params)
                } else {
                    let kind = cfg
                        .pinned_roles
                        .get(&id)
                        .copied()
                        .unwrap_or(RoleKind::Ordinary);
                    ClusterAgent::pinned(id, cfg.mode, cluster_params, kind)
                }
            })
            .collect();

        let mut sim = Simulation {
            cfg: cfg.clone(),
            end,
            sched: Scheduler::new(),
            backoff_handles: vec![None; n],
            waypoint: cfg.waypoint(),
            trajectories,
            mobility_rng: nodes()
                .map(|id| RngStream::new(seed, StreamId::Mobility(id)))
                .collect(),
            positions: initial,
            positions_at: None,
            radio,
            mac: MacLayer::new(MacParams::default(), radio, n, seed),
            clusters,
            routing: nodes()
                .map(|id| AodvAgent::new(id, AodvParams::default()))
                .collect(),
            beacon_rng: nodes()
                .map(|id| RngStream::new(seed, StreamId::Beacon(id)))
                .collect(),
            beacon_phase: vec![SimTime::ZERO; n],
            flows: cfg.flows.iter().map(|f| FlowStats::new(*f)).collect(),
            control: ControlCounters::default(),
            indications: Vec::new(),
            trace: options.trace.map(EventTrace::new),
            role_log: options.role_log.map(LineLog::new),
            role_changes: Vec::new(),
            snapshots: Vec::new(),
            events: 0,
        };
        sim.schedule_initial()?;
        Ok(sim)
    }

    fn schedule_initial(&mut self) -> Result<()> {
        self.sched.schedule(self.end, Event::SimEnd)?;
        let interval = self.cfg.beacon_interval;
        let jitter = interval.as_micros() / 10;
        for i in 0..self.cfg.node_count {
            let node = NodeId::from_index(i);
            if self.cfg.mobility == MobilityModel::RandomWaypoint
                && self.cfg.mobility_start <= self.end
            {
                self.sched
                    .schedule(self.cfg.mobility_start, Event::MobilityWaypoint(node))?;
            }
            // beacon k lands in (k*I, (k+1)*I - 10 ms]: a per-node phase in
            // (J, I - 10 ms] minus a fresh jitter in [0, J], J = I/10
            let phase = self.beacon_rng[i].uniform_int(jitter + 1, interval.as_micros() - 10_000);
            self.beacon_phase[i] = SimTime::from_micros(phase);
            self.schedule_beacon(node, 0)?;
        }
        let check = self.cfg.link_check_interval;
        if check <= self.end {
            self.sched.schedule(check, Event::LinkCheck)?;
        }
        for (f, stats) in self.flows.iter().enumerate() {
            self.sched.schedule(
                stats.flow.send_time(0),
                Event::TrafficSend { flow: f, seq: 0 },
            )?;
        }
        Ok(())
    }

    fn schedule_beacon(&mut self, node: NodeId, k: u64) -> Result<()> {
        let interval = self.cfg.beacon_interval.as_micros();
        if (k + 1) * interval > self.end.as_micros() {
            return Ok(());
        }
        let i = node.index();
        let jitter = self.beacon_rng[i].uniform_int(0, interval / 10);
        let at = SimTime::from_micros(self.beacon_phase[i].as_micros() + k * interval - jitter);
        self.sched.schedule(at, Event::BeaconTimer { node, k })?;
        Ok(())
    }

    pub fn now(&self) -> SimTime {
        self.sched.now()
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn position(&self, node: NodeId, t: SimTime) -> Point {
        self.trajectories[node.index()].position_at(t)
    }

    pub fn role(&self, node: NodeId) -> ClusterRole {
        self.clusters[node.index()].role()
    }

    pub fn routing(&self, node: NodeId) -> &AodvAgent<DataPacket> {
        &self.routing[node.index()]
    }

    pub fn mac(&self) -> &MacLayer {
        &self.mac
    }

    fn refresh_positions(&mut self, now: SimTime) {
        if self.positions_at == Some(now) {
            return;
        }
        for (p, tr) in self.positions.iter_mut().zip(&self.trajectories) {
            *p = tr.position_at(now);
        }
        self.positions_at = Some(now);
    }

    /// Unit-disk graph at `t`.
    pub fn topology_at(&self, t: SimTime) -> Topology {
        let pos: Vec<Point> = self
            .trajectories
            .iter()
            .map(|tr| tr.position_at(t))
            .collect();
        Topology::from_positions(&pos, &self.radio)
    }

    /// Processes events up to and including `until` (capped at the end time).
    /// Returns false once the simulation has ended.
    pub fn step_until(&mut self, until: SimTime) -> Result<bool> {
        let until = until.min(self.end);
        while let Some(fired) = self.sched.pop_until(until) {
            self.events += 1;
            if let Some(tr) = self.trace.as_mut() {
                tr.record(
                    fired.time,
                    fired.seq,
                    fired.event.kind(),
                    fired.event.target(),
                );
            }
            if matches!(fired.event, Event::SimEnd) {
                return Ok(false);
            }
            self.dispatch(fired.time, fired.event)?;
        }
        Ok(true)
    }

    pub fn run(mut self) -> Result<RunOutcome> {
        let end = self.end;
        self.step_until(end)?;
        self.finish()
    }

    fn dispatch(&mut self, now: SimTime, event: Event) -> Result<()> {
        match event {
            Event::MobilityWaypoint(node) => {
                let i = node.index();
                let arrive =
                    self.trajectories[i].advance(&self.waypoint, now, &mut self.mobility_rng[i]);
                self.positions_at = None;
                if arrive <= self.end {
                    self.sched.schedule(arrive, Event::MobilityWaypoint(node))?;
                }
            }
            Event::FrameDelivery { receiver, frame } => self.on_frame(now, receiver, frame)?,
            Event::Mac(timer) => {
                if let MacTimer::BackoffExpiry(n) = timer {
                    self.backoff_handles[n.index()] = None;
                }
                self.refresh_positions(now);
                let mut timers = Timers {
                    sched: &mut self.sched,
                    backoff: &mut self.backoff_handles,
                };
                self.mac.on_timer(
                    now,
                    timer,
                    &self.positions,
                    &mut timers,
                    &mut self.indications,
                );
                self.pump(now)?;
            }
            Event::BeaconTimer { node, k } => {
                let beacon = self.clusters[node.index()].make_beacon(false);
                self.transmit(now, Frame::broadcast(node, Payload::Beacon(beacon)))?;
                self.schedule_beacon(node, k + 1)?;
            }
            Event::RouteTimeout {
                node,
                dest,
                attempt,
            } => {
                let actions = self.routing[node.index()].on_discovery_timeout(now, dest, attempt);
                self.apply(now, node, actions)?;
            }
            Event::TrafficSend { flow, seq } => self.on_traffic(now, flow, seq)?,
            Event::LinkCheck => self.on_link_check(now)?,
            Event::SimEnd => {}
        }
        Ok(())
    }

    fn transmit(&mut self, now: SimTime, frame: Frame) -> Result<()> {
        self.refresh_positions(now);
        let mut timers = Timers {
            sched: &mut self.sched,
            backoff: &mut self.backoff_handles,
        };
        self.mac.enqueue(
            now,
            frame,
            &self.positions,
            &mut timers,
            &mut self.indications,
        );
        self.pump(now)
    }

    /// Handles MAC indications until none are left.
    fn pump(&mut self, now: SimTime) -> Result<()> {
        while !self.indications.is_empty() {
            let batch = std::mem::take(&mut self.indications);
            for ind in batch {
                self.on_indication(now, ind)?;
            }
        }
        Ok(())
    }

    fn on_indication(&mut self, now: SimTime, ind: MacIndication) -> Result<()> {
        match ind {
            MacIndication::TxStarted {
                class,
                first_attempt: true,
                ..
            } => match class {
                FrameClass::Data => {}
                FrameClass::Beacon => self.control.beacons += 1,
                FrameClass::RoleChange => self.control.role_changes += 1,
                FrameClass::Rreq => self.control.rreq += 1,
                FrameClass::Rrep => self.control.rrep += 1,
                FrameClass::Rerr => self.control.rerr += 1,
            },
            MacIndication::TxStarted { .. } => {}
            MacIndication::Received {
                receiver,
                at,
                frame,
            } => {
                self.sched
                    .schedule(at, Event::FrameDelivery { receiver, frame })?;
            }
            MacIndication::Dropped {
                node,
                frame,
                reason,
            } => {
                if let Some(p) = frame.data() {
                    let cause = match reason {
                        MacDropReason::QueueFull => DropCause::MacQueue,
                        MacDropReason::RetryLimit => DropCause::MacRetry,
                    };
                    self.flows[p.flow].record_drop(cause);
                }
                if let (MacDropReason::RetryLimit, Some(next_hop)) = (reason, frame.next_hop) {
                    let actions = self.routing[node.index()].on_link_break(now, next_hop);
                    self.apply(now, node, actions)?;
                }
            }
        }
        Ok(())
    }

    fn apply(
        &mut self,
        now: SimTime,
        node: NodeId,
        actions: Vec<Action<DataPacket>>,
    ) -> Result<()> {
        for a in actions {
            match a {
                Action::Broadcast(msg) => {
                    self.transmit(now, Frame::broadcast(node, Payload::Control(msg)))?
                }
                Action::Unicast { next_hop, msg } => {
                    self.transmit(now, Frame::unicast(node, next_hop, Payload::Control(msg)))?
                }
                Action::SendData { next_hop, packet } => {
                    self.transmit(now, Frame::unicast(node, next_hop, Payload::Data(packet)))?
                }
                Action::Drop { packet, reason } => {
                    let cause = match reason {
                        DropReason::NoRoute => DropCause::NoRoute,
                        DropReason::BufferOverflow => DropCause::BufferOverflow,
                        DropReason::DiscoveryFailed => DropCause::DiscoveryFailed,
                        DropReason::TtlExpired => DropCause::TtlExpired,
                    };
                    self.flows[packet.flow].record_drop(cause);
                }
                Action::ArmDiscoveryTimer { dest, attempt, at } => {
                    self.sched.schedule(
                        at,
                        Event::RouteTimeout {
                            node,
                            dest,
                            attempt,
                        },
                    )?;
                }
            }
        }
        Ok(())
    }

    fn may_forward(&self, node: NodeId) -> bool {
        match self.cfg.flooding {
            Flooding::Full => true,
            Flooding::Backbone => self.clusters[node.index()].is_backbone(),
        }
    }

    fn on_frame(&mut self, now: SimTime, receiver: NodeId, frame: Frame) -> Result<()> {
        let r = receiver.index();
        let from = frame.sender;
        match frame.payload {
            Payload::Beacon(b) => {
                self.clusters[r].on_beacon(now, b);
                self.routing[r].on_hello(now, b.sender);
            }
            Payload::Control(ControlMsg::Rreq(q)) => {
                let may = self.may_forward(receiver);
                let (_, actions) = self.routing[r].on_rreq(now, from, q, may);
                self.apply(now, receiver, actions)?;
            }
            Payload::Control(ControlMsg::Rrep(p)) => {
                let actions = self.routing[r].on_rrep(now, from, p);
                self.apply(now, receiver, actions)?;
            }
            Payload::Control(ControlMsg::Rerr(e)) => {
                let actions = self.routing[r].on_rerr(now, from, e);
                self.apply(now, receiver, actions)?;
            }
            Payload::Data(mut p) => {
                p.hops = p.hops.saturating_add(1);
                if p.dst == receiver {
                    self.flows[p.flow].record_delivery(p.seq, p.sent_at, now);
                } else if p.hops >= AodvParams::default().net_diameter {
                    self.flows[p.flow].record_drop(DropCause::TtlExpired);
                } else {
                    let actions = self.routing[r].forward(now, from, p.src, p.dst, p);
                    self.apply(now, receiver, actions)?;
                }
            }
        }
        Ok(())
    }

    fn on_traffic(&mut self, now: SimTime, flow: usize, seq: u32) -> Result<()> {
        let f = self.flows[flow].flow;
        self.flows[flow].sent += 1;
        let packet = DataPacket {
            flow,
            seq,
            src: f.src,
            dst: f.dst,
            sent_at: now,
            payload_bytes: f.payload,
            hops: 0,
        };
        let actions = self.routing[f.src.index()].send(now, f.dst, packet);
        self.apply(now, f.src, actions)?;
        let next = f.send_time(seq + 1);
        if next < f.end {
            self.sched
                .schedule(next, Event::TrafficSend { flow, seq: seq + 1 })?;
        }
        Ok(())
    }

    fn on_link_check(&mut self, now: SimTime) -> Result<()> {
        for i in 0..self.cfg.node_count {
            let node = NodeId::from_index(i);
            for lost in self.clusters[i].expire_neighbors(now) {
                let actions = self.routing[i].on_link_break(now, lost);
                self.apply(now, node, actions)?;
            }
            if let Some(change) = self.clusters[i].maintain(now) {
                let rec = RoleChangeRecord {
                    time: now,
                    node,
                    old: change.old,
                    new: change.new,
                };
                if let Some(log) = self.role_log.as_mut() {
                    log.write_line(format_args!(
                        "{},{},{},{},{}",
                        now.as_micros(),
                        node,
                        rec.old.kind,
                        rec.new.kind,
                        rec.new
                            .cluster_id
                            .map_or("-".to_string(), |c| c.to_string())
                    ));
                }
                self.role_changes.push(rec);
                let beacon = self.clusters[i].make_beacon(true);
                self.transmit(now, Frame::broadcast(node, Payload::Beacon(beacon)))?;
            }
        }
        self.snapshot(now);
        let next = now + self.cfg.link_check_interval;
        if next <= self.end {
            self.sched.schedule(next, Event::LinkCheck)?;
        }
        Ok(())
    }

    fn snapshot(&mut self, now: SimTime) {
        let live = self.clusters.iter().filter(|c| c.is_backbone()).count();
        let settled = self
            .clusters
            .iter()
            .all(|c| c.is_settled() && c.role().cluster_id.is_some());
        self.refresh_positions(now);
        let topo = Topology::from_positions(&self.positions, &self.radio);
        let formed_chg = backbone_size(&form_clusters(&topo, Mode::Chg), Mode::Chg);
        let formed_ch_g = backbone_size(&form_clusters(&topo, Mode::ChG), Mode::ChG);
        self.snapshots.push(BackboneSnapshot {
            time: now,
            live,
            settled,
            formed_chg,
            formed_ch_g,
        });
    }

    /// Counts data packets still queued, buffered or on their way to a
    /// receiver, per flow.
    fn in_flight(&self) -> Vec<u64> {
        let mut count = vec![0u64; self.flows.len()];
        for f in self.mac.queued_frames() {
            if let Some(p) = f.data() {
                count[p.flow] += 1;
            }
        }
        for agent in &self.routing {
            for p in agent.buffered() {
                count[p.flow] += 1;
            }
        }
        for (_, e) in self.sched.live_events() {
            if let Event::FrameDelivery { frame, .. } = e {
                if let Some(p) = frame.data() {
                    count[p.flow] += 1;
                }
            }
        }
        count
    }

    pub fn finish(mut self) -> Result<RunOutcome> {
        let in_flight = self.in_flight();
        for (f, n) in self.flows.iter_mut().zip(in_flight) {
            f.in_flight = n;
        }
        let mac: Vec<MacCounters> = (0..self.cfg.node_count)
            .map(|i| *self.mac.counters(NodeId::from_index(i)))
            .collect();
        let mut mac_total = MacCounters::default();
        for c in &mac {
            mac_total += *c;
        }
        let mut routing = AodvCounters::default();
        for a in &self.routing {
            let c = a.counters();
            routing.rreq_originated += c.rreq_originated;
            routing.rreq_forwarded += c.rreq_forwarded;
            routing.rrep_originated += c.rrep_originated;
            routing.rrep_forwarded += c.rrep_forwarded;
            routing.rerr_sent += c.rerr_sent;
            routing.suppressed_forwards += c.suppressed_forwards;
            routing.duplicate_rreqs += c.duplicate_rreqs;
            routing.rrep_no_reverse += c.rrep_no_reverse;
        }
        let summary = summarize(&self.flows);
        let report = RunReport {
            seed: self.cfg.master_seed,
            mode: self.cfg.mode,
            sent: self.flows.iter().map(|f| f.sent).sum(),
            delivered: self.flows.iter().map(|f| f.delivered()).sum(),
            e2e_delay_ms: summary.delay_ms,
            jitter_ms: summary.jitter_ms,
            mac_drops: mac_total.drops(),
            control_tx: control_overhead(&self.control),
            suppressed_forwards: routing.suppressed_forwards,
            throughput_bps: summary.throughput_bps,
        };
        if let Some(tr) = self.trace.take() {
            tr.finish()
                .map_err(|e| Error::io("writing event trace", e))?;
        }
        if let Some(log) = self.role_log.take() {
            log.finish().map_err(|e| Error::io("writing role log", e))?;
        }
        Ok(RunOutcome {
            report,
            final_roles: self.clusters.iter().map(|c| c.role()).collect(),
            flows: self.flows,
            mac,
            control: self.control,
            routing,
            snapshots: self.snapshots,
            role_changes: self.role_changes,
            events_processed: self.events,
        })
    }
}

/// Runs `cfg` to completion.
pub fn simulate(cfg: &ScenarioConfig, options: RunOptions) -> Result<RunOutcome> {
    Simulation::new(cfg, options)?.run()
}
