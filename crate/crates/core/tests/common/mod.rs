//! Lossless, zero-contention channel for driving routing agents directly.

use std::collections::{BTreeSet, VecDeque};

use manetsim::aodv::{Action, AodvAgent, AodvParams, ControlMsg, RreqOutcome};
use manetsim::{NodeId, SimTime, Topology};

enum Msg {
    Control(ControlMsg),
    /// Packet id and hops travelled so far.
    Data(u32, u32),
}

pub struct Delivery {
    pub id: u32,
    pub hops: u32,
    pub path: Vec<NodeId>,
}

pub struct IdealChannel {
    adj: Vec<BTreeSet<NodeId>>,
    pub agents: Vec<AodvAgent<u32>>,
    may_forward: Vec<bool>,
    pub now: SimTime,
    queue: VecDeque<(NodeId, NodeId, Msg)>,
    timers: Vec<(SimTime, NodeId, NodeId, u32)>,
    pub rreq_forwards: usize,
    pub rreq_forwarders: BTreeSet<NodeId>,
    pub delivered: Vec<Delivery>,
    pub dropped: usize,
    paths: std::collections::BTreeMap<u32, Vec<NodeId>>,
    flow: Option<(NodeId, NodeId)>,
}

impl IdealChannel {
    pub fn new(topo: &Topology, may_forward: Vec<bool>) -> Self {
        IdealChannel {
            adj: topo
                .nodes()
                .map(|v| topo.neighbors(v).iter().copied().collect())
                .collect(),
            agents: topo
                .nodes()
                .map(|v| AodvAgent::new(v, AodvParams::default()))
                .collect(),
            may_forward,
            now: SimTime::from_millis(1_000),
            queue: VecDeque::new(),
            timers: Vec::new(),
            rreq_forwards: 0,
            rreq_forwarders: BTreeSet::new(),
            delivered: Vec::new(),
            dropped: 0,
            paths: Default::default(),
            flow: None,
        }
    }

    pub fn remove_link(&mut self, a: NodeId, b: NodeId) {
        self.adj[a.index()].remove(&b);
        self.adj[b.index()].remove(&a);
    }

    /// Sends packet `id` from `src` to `dst` and runs until nothing is left
    /// to do, including discovery retries.
    pub fn send(&mut self, src: NodeId, dst: NodeId, id: u32) {
        self.flow = Some((src, dst));
        self.paths.insert(id, vec![src]);
        let actions = self.agents[src.index()].send(self.now, dst, id);
        self.apply(src, actions);
        self.drain();
    }

    fn apply(&mut self, from: NodeId, actions: Vec<Action<u32>>) {
        for a in actions {
            match a {
                Action::Broadcast(m) => {
                    for &n in &self.adj[from.index()] {
                        self.queue.push_back((n, from, Msg::Control(m.clone())));
                    }
                }
                Action::Unicast { next_hop, msg } => {
                    if self.adj[from.index()].contains(&next_hop) {
                        self.queue.push_back((next_hop, from, Msg::Control(msg)));
                    }
                }
                Action::SendData { next_hop, packet } => {
                    if self.adj[from.index()].contains(&next_hop) {
                        let hops = self.paths.get(&packet).map_or(0, |p| p.len() as u32 - 1);
                        self.queue
                            .push_back((next_hop, from, Msg::Data(packet, hops + 1)));
                    } else {
                        // what the MAC reports after exhausting its retries
                        self.dropped += 1;
                        let more = self.agents[from.index()].on_link_break(self.now, next_hop);
                        self.apply(from, more);
                    }
                }
                Action::Drop { .. } => self.dropped += 1,
                Action::ArmDiscoveryTimer { dest, attempt, at } => {
                    self.timers.push((at, from, dest, attempt));
                }
            }
        }
    }

    fn drain(&mut self) {
        loop {
            while let Some((to, from, msg)) = self.queue.pop_front() {
                self.now += SimTime::from_micros(10);
                let now = self.now;
                let actions = match msg {
                    Msg::Control(ControlMsg::Rreq(r)) => {
                        let may = self.may_forward[to.index()];
                        let (outcome, actions) = self.agents[to.index()].on_rreq(now, from, r, may);
                        if outcome == RreqOutcome::Forwarded {
                            self.rreq_forwards += 1;
                            self.rreq_forwarders.insert(to);
                        }
                        actions
                    }
                    Msg::Control(ControlMsg::Rrep(r)) => {
                        self.agents[to.index()].on_rrep(now, from, r)
                    }
                    Msg::Control(ControlMsg::Rerr(r)) => {
                        self.agents[to.index()].on_rerr(now, from, r)
                    }
                    Msg::Data(id, hops) => {
                        let (src, dst) = self.flow.expect("data only after send");
                        if let Some(p) = self.paths.get_mut(&id) {
                            p.push(to);
                        }
                        if to == dst {
                            let path = self.paths.remove(&id).unwrap_or_default();
                            self.delivered.push(Delivery { id, hops, path });
                            Vec::new()
                        } else {
                            self.agents[to.index()].forward(now, from, src, dst, id)
                        }
                    }
                };
                self.apply(to, actions);
            }
            // idle: let the earliest pending discovery timer fire
            self.timers.sort_by_key(|t| t.0);
            if self.timers.is_empty() {
                return;
            }
            let (at, node, dest, attempt) = self.timers.remove(0);
            self.now = self.now.max(at);
            let actions = self.agents[node.index()].on_discovery_timeout(self.now, dest, attempt);
            self.apply(node, actions);
        }
    }
}

/// Random geometric graph with the default 250 m range, redrawn until
/// connected.
pub fn random_connected_graph(rng: &mut impl rand::Rng, n: usize) -> Topology {
    loop {
        let side = 250.0 * (n as f64).sqrt() * 0.9;
        let pts: Vec<(f64, f64)> = (0..n)
            .map(|_| (rng.random_range(0.0..side), rng.random_range(0.0..side)))
            .collect();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let (dx, dy) = (pts[i].0 - pts[j].0, pts[i].1 - pts[j].1);
                if (dx * dx + dy * dy).sqrt() <= 250.0 {
                    edges.push((NodeId::from_index(i), NodeId::from_index(j)));
                }
            }
        }
        let t = Topology::from_edges(n, &edges);
        if t.is_connected() {
            return t;
        }
    }
}
