//! Acceptance checks. Each test prints one `PASS`/`FAIL` line (bypassing
//! the output capture) and then asserts the same verdict.

use std::collections::VecDeque;
use std::io::Write;
use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use manetsim::aodv::{Action, AodvAgent, AodvParams, ControlMsg};
use manetsim::clustering::{form_clusters, ClusterAgent, ClusterParams};
use manetsim::harness::{self, compare, ComparisonReport};
use manetsim::network::RunOutcome;
use manetsim::report::{median, Aggregate, Metric};
use manetsim::sim::SharedBuffer;
use manetsim::traffic::{avg_jitter, DeliverySample};
use manetsim::{
    ClusterRole, Mode, NodeId, RoleKind, RunOptions, ScenarioConfig, SimTime, SweepTable, Topology,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEEDS: std::ops::RangeInclusive<u64> = 1..=20;

fn verdict(id: u32, pass: bool, detail: String) {
    let line = format!(
        "acceptance [{id:>2}] {} {detail}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
    assert!(pass, "{}", line.trim_end());
}

fn scenario(name: &str) -> ScenarioConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name);
    ScenarioConfig::load(&path).expect("bundled scenario loads")
}

struct Sweeps {
    chg: Vec<RunOutcome>,
    chgw: Vec<RunOutcome>,
    elapsed: Duration,
}

impl Sweeps {
    fn table(runs: &[RunOutcome]) -> SweepTable {
        SweepTable::from_reports(runs.iter().map(|o| o.report).collect())
    }

    fn median(runs: &[RunOutcome], m: Metric) -> Option<f64> {
        Self::table(runs)
            .aggregate(Aggregate::Median)
            .unwrap()
            .value(m)
    }

    fn comparison(&self) -> ComparisonReport {
        // `a` = CH_G, `b` = CHG, so ratios read CHG / CH_G
        compare(&Self::table(&self.chgw), &Self::table(&self.chg)).unwrap()
    }
}

/// The bundled scenario pair, 20 seeds each; timed as one 40-run batch.
fn pinned_sweeps() -> &'static Sweeps {
    static CELL: OnceLock<Sweeps> = OnceLock::new();
    CELL.get_or_init(|| {
        let seeds: Vec<u64> = SEEDS.collect();
        let (a, b) = (scenario("paper_chg.scn"), scenario("paper_chgw.scn"));
        let t0 = Instant::now();
        let chg = harness::sweep_outcomes(&a, &seeds).unwrap();
        let chgw = harness::sweep_outcomes(&b, &seeds).unwrap();
        Sweeps {
            chg,
            chgw,
            elapsed: t0.elapsed(),
        }
    })
}

/// Same network with elected roles; used for extra invariant coverage.
fn elected_sweeps() -> &'static Sweeps {
    static CELL: OnceLock<Sweeps> = OnceLock::new();
    CELL.get_or_init(|| {
        let seeds: Vec<u64> = SEEDS.collect();
        let t0 = Instant::now();
        let chg = harness::sweep_outcomes(&scenario("elected_chg.scn"), &seeds).unwrap();
        let chgw = harness::sweep_outcomes(&scenario("elected_chgw.scn"), &seeds).unwrap();
        Sweeps {
            chg,
            chgw,
            elapsed: t0.elapsed(),
        }
    })
}

fn fmt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), |x| format!("{x:.3}"))
}

#[test]
fn c01_fewer_mac_drops_with_merged_heads() {
    let s = pinned_sweeps();
    let (chg, chgw) = (
        Sweeps::median(&s.chg, Metric::MacDrops),
        Sweeps::median(&s.chgw, Metric::MacDrops),
    );
    let fast = s.elapsed < Duration::from_secs(60);
    let pass = matches!((chg, chgw), (Some(a), Some(b)) if a <= b) && fast;
    verdict(
        1,
        pass,
        format!(
            "median mac_drops CHG={} CH_G={}; 40 runs in {:.2}s (limit 60s)",
            fmt(chg),
            fmt(chgw),
            s.elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn c02_lower_jitter_with_merged_heads() {
    let s = pinned_sweeps();
    let (chg, chgw) = (
        Sweeps::median(&s.chg, Metric::JitterMs),
        Sweeps::median(&s.chgw, Metric::JitterMs),
    );
    let avail = |runs: &[RunOutcome]| runs.iter().filter(|o| o.report.jitter_ms.is_some()).count();
    let paired = s.comparison().median(Metric::JitterMs).cloned().unwrap();
    let e = elected_sweeps();
    let pass = matches!((chg, chgw), (Some(a), Some(b)) if a <= b);
    verdict(
        2,
        pass,
        format!(
            "median jitter_ms CHG={} ({} seeds with data) CH_G={} ({} seeds); \
             over seeds where both have data: CHG={} CH_G={}; elected roles (not gated): CHG={} CH_G={}",
            fmt(chg),
            avail(&s.chg),
            fmt(chgw),
            avail(&s.chgw),
            fmt(paired.b),
            fmt(paired.a),
            fmt(Sweeps::median(&e.chg, Metric::JitterMs)),
            fmt(Sweeps::median(&e.chgw, Metric::JitterMs))
        ),
    );
}

#[test]
fn c03_throughput_parity() {
    let s = pinned_sweeps();
    let cmp = s.comparison();
    let ratio = cmp.median(Metric::ThroughputBps).and_then(|r| r.ratio);
    // seeds where at least one mode delivered anything
    let informative: Vec<f64> = SEEDS
        .filter_map(|seed| cmp.row(Metric::ThroughputBps, seed))
        .filter(|r| r.a != Some(0.0) || r.b != Some(0.0))
        .filter_map(|r| r.ratio)
        .collect();
    let elected = elected_sweeps()
        .comparison()
        .median(Metric::ThroughputBps)
        .and_then(|r| r.ratio);
    let pass = ratio.is_some_and(|r| (0.9..=1.1).contains(&r));
    verdict(
        3,
        pass,
        format!(
            "median throughput ratio CHG/CH_G={} (bounds [0.9, 1.1]); \
             over the {} seeds with any delivery: {}; elected roles (not gated): {}",
            fmt(ratio),
            informative.len(),
            fmt(median(&informative)),
            fmt(elected)
        ),
    );
}

#[test]
fn c04_less_control_overhead() {
    let s = pinned_sweeps();
    let (chg, chgw) = (
        Sweeps::median(&s.chg, Metric::ControlTx),
        Sweeps::median(&s.chgw, Metric::ControlTx),
    );
    let wins_in = |s: &Sweeps| {
        s.chg
            .iter()
            .zip(&s.chgw)
            .filter(|(a, b)| a.report.suppressed_forwards >= b.report.suppressed_forwards)
            .count()
    };
    let wins = wins_in(s);
    let share = wins as f64 / s.chg.len() as f64;
    let e = elected_sweeps();
    let pass = matches!((chg, chgw), (Some(a), Some(b)) if a <= b) && share >= 0.7;
    verdict(
        4,
        pass,
        format!(
            "median control_tx CHG={} CH_G={}; suppressed_forwards CHG>=CH_G in {wins}/{} seeds ({:.0}%, need 70%); \
             elected roles (not gated): control_tx CHG={} CH_G={}, suppressed CHG>=CH_G in {}/{}",
            fmt(chg),
            fmt(chgw),
            s.chg.len(),
            share * 100.0,
            fmt(Sweeps::median(&e.chg, Metric::ControlTx)),
            fmt(Sweeps::median(&e.chgw, Metric::ControlTx)),
            wins_in(e),
            e.chg.len()
        ),
    );
}

#[test]
fn c05_backbone_never_larger_when_merged() {
    let mut snapshots = 0usize;
    let mut violations = 0usize;
    let pinned_runs = pinned_sweeps();
    let elected = elected_sweeps();
    for runs in [
        &pinned_runs.chg,
        &pinned_runs.chgw,
        &elected.chg,
        &elected.chgw,
    ] {
        for o in runs.iter() {
            for snap in &o.snapshots {
                snapshots += 1;
                if snap.formed_chg > snap.formed_ch_g {
                    violations += 1;
                }
            }
        }
    }
    let pinned_ok = |runs: &[RunOutcome], size: usize| {
        runs.iter()
            .all(|o| !o.snapshots.is_empty() && o.snapshots.iter().all(|s| s.live == size))
    };
    let pinned = pinned_ok(&pinned_runs.chg, 2) && pinned_ok(&pinned_runs.chgw, 4);

    // Elected runs share mobility, so equal-time snapshots see the same graph.
    let (mut matched, mut live_violations) = (0usize, 0usize);
    for (a, b) in elected.chg.iter().zip(&elected.chgw) {
        for (x, y) in a.snapshots.iter().zip(&b.snapshots) {
            assert_eq!(x.time, y.time);
            if x.settled && y.settled {
                matched += 1;
                if x.live > y.live {
                    live_violations += 1;
                }
            }
        }
    }
    let pass = violations == 0 && snapshots > 0 && pinned;
    verdict(
        5,
        pass,
        format!(
            "{snapshots} snapshots, {violations} with |CHG| > |CH_G|; pinned sizes 2 vs 4 on every snapshot: {pinned}; \
             elected runs, settled equal-time pairs: {matched}, live |CHG| > |CH_G| in {live_violations}"
        ),
    );
}

// ---- routing oracle ----------------------------------------------------

/// Connected random geometric graph with `n` nodes.
fn random_connected_graph(rng: &mut ChaCha8Rng, n: usize) -> Topology {
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

enum Msg {
    Control(ControlMsg),
    Data(u32),
}

/// One route discovery over a lossless FIFO channel with fresh agents.
/// Returns the originator's route hop count and the hops the packet took.
fn discover(topo: &Topology, src: NodeId, dst: NodeId) -> Option<(u8, u32)> {
    let mut agents: Vec<AodvAgent<u32>> = topo
        .nodes()
        .map(|v| AodvAgent::new(v, AodvParams::default()))
        .collect();
    let mut queue: VecDeque<(NodeId, NodeId, Msg)> = VecDeque::new();
    let mut now = SimTime::from_millis(1_000);
    let push = |queue: &mut VecDeque<_>, from: NodeId, actions: Vec<Action<u32>>| {
        for a in actions {
            match a {
                Action::Broadcast(m) => {
                    for &n in topo.neighbors(from) {
                        queue.push_back((n, from, Msg::Control(m.clone())));
                    }
                }
                Action::Unicast { next_hop, msg } => {
                    assert!(topo.has_edge(from, next_hop));
                    queue.push_back((next_hop, from, Msg::Control(msg)));
                }
                Action::SendData { next_hop, packet } => {
                    assert!(topo.has_edge(from, next_hop));
                    queue.push_back((next_hop, from, Msg::Data(packet + 1)));
                }
                Action::Drop { .. } => panic!("drop on an ideal channel"),
                Action::ArmDiscoveryTimer { .. } => {}
            }
        }
    };
    let first = agents[src.index()].send(now, dst, 0);
    push(&mut queue, src, first);
    while let Some((to, from, msg)) = queue.pop_front() {
        now += SimTime::from_micros(10);
        let agent = &mut agents[to.index()];
        let actions = match msg {
            Msg::Control(ControlMsg::Rreq(r)) => agent.on_rreq(now, from, r, true).1,
            Msg::Control(ControlMsg::Rrep(r)) => agent.on_rrep(now, from, r),
            Msg::Control(ControlMsg::Rerr(r)) => agent.on_rerr(now, from, r),
            Msg::Data(hops) if to == dst => {
                let route = agents[src.index()].route(dst)?.hop_count;
                return Some((route, hops));
            }
            Msg::Data(hops) => agent.forward(now, from, src, dst, hops),
        };
        push(&mut queue, to, actions);
    }
    None
}

#[test]
fn c06_discovered_routes_are_shortest() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0006);
    let (mut pairs, mut mismatches) = (0usize, 0usize);
    let mut graphs = 0;
    while graphs < 50 {
        let n = rng.random_range(2..=15);
        let topo = random_connected_graph(&mut rng, n);
        graphs += 1;
        for s in topo.nodes() {
            let bfs = topo.bfs_hops(s);
            for d in topo.nodes().filter(|&d| d != s) {
                pairs += 1;
                let want = bfs[d.index()].unwrap();
                match discover(&topo, s, d) {
                    Some((route, hops)) if u32::from(route) == want && hops == want => {}
                    _ => mismatches += 1,
                }
            }
        }
    }
    verdict(
        6,
        mismatches == 0,
        format!("{graphs} graphs, {pairs} source/destination pairs, {mismatches} differ from BFS"),
    );
}

// ---- clustering oracle -------------------------------------------------

/// Exhaustive search for the head set: the unique subset where a node is a
/// head exactly when no lower-id neighbor is one. Roles then follow from it.
fn brute_force_roles(n: usize, adj: &[Vec<bool>], mode: Mode) -> Vec<ClusterRole> {
    let mut heads = None;
    for mask in 0u32..(1 << n) {
        let consistent = (0..n).all(|v| {
            let lower_head = (0..v).any(|u| adj[u][v] && mask >> u & 1 == 1);
            (mask >> v & 1 == 1) == !lower_head
        });
        if consistent {
            assert!(heads.is_none(), "head set must be unique");
            heads = Some(mask);
        }
    }
    let heads = heads.expect("a head set exists");
    let is_head = |v: usize| heads >> v & 1 == 1;
    let cluster: Vec<usize> = (0..n)
        .map(|v| {
            if is_head(v) {
                v
            } else {
                (0..n).find(|&u| adj[v][u] && is_head(u)).unwrap()
            }
        })
        .collect();
    let boundary: Vec<bool> = (0..n)
        .map(|v| (0..n).any(|u| adj[v][u] && cluster[u] != cluster[v]))
        .collect();
    let id = |v: usize| NodeId::from_index(v);
    match mode {
        Mode::ChG => (0..n)
            .map(|v| {
                let kind = if is_head(v) {
                    RoleKind::ClusterHead
                } else if boundary[v] {
                    RoleKind::Gateway
                } else {
                    RoleKind::Ordinary
                };
                ClusterRole::new(kind, id(cluster[v]))
            })
            .collect(),
        Mode::Chg => {
            let designee = |c: usize| {
                (0..n)
                    .find(|&v| cluster[v] == c && boundary[v])
                    .unwrap_or(c)
            };
            (0..n)
                .map(|v| {
                    let d = designee(cluster[v]);
                    if d == v {
                        ClusterRole::new(RoleKind::ClusterHeadGateway, id(v))
                    } else {
                        ClusterRole::new(RoleKind::Ordinary, id(d))
                    }
                })
                .collect()
        }
    }
}

/// Beacon exchange on a fixed topology with ideal delivery, long enough to
/// settle.
fn distributed_roles(topo: &Topology, mode: Mode) -> Vec<ClusterRole> {
    let mut agents: Vec<ClusterAgent> = topo
        .nodes()
        .map(|v| ClusterAgent::elected(v, mode, ClusterParams::default()))
        .collect();
    let mut t = SimTime::ZERO;
    while t <= SimTime::from_millis(40_000) {
        let beacons: Vec<_> = agents.iter_mut().map(|a| a.make_beacon(false)).collect();
        for v in topo.nodes() {
            for &u in topo.neighbors(v) {
                agents[v.index()].on_beacon(t, beacons[u.index()]);
            }
        }
        for a in agents.iter_mut() {
            a.expire_neighbors(t);
            a.maintain(t);
        }
        t += SimTime::from_millis(250);
    }
    agents.iter().map(|a| a.role()).collect()
}

#[test]
fn c07_clustering_matches_exhaustive_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0007);
    let (mut formed_bad, mut agent_bad) = (0usize, 0usize);
    let graphs = 100;
    for _ in 0..graphs {
        let n: usize = rng.random_range(1..=12);
        let p: f64 = rng.random_range(0.1..0.6);
        let mut adj = vec![vec![false; n]; n];
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.random_bool(p) {
                    edges.push((i, j));
                }
            }
        }
        for &(i, j) in &edges {
            adj[i][j] = true;
            adj[j][i] = true;
        }
        let edges: Vec<_> = edges
            .into_iter()
            .map(|(i, j)| (NodeId::from_index(i), NodeId::from_index(j)))
            .collect();
        let topo = Topology::from_edges(n, &edges);
        for mode in [Mode::ChG, Mode::Chg] {
            let want = brute_force_roles(n, &adj, mode);
            if form_clusters(&topo, mode) != want {
                formed_bad += 1;
            }
            if distributed_roles(&topo, mode) != want {
                agent_bad += 1;
            }
        }
    }
    verdict(
        7,
        formed_bad == 0 && agent_bad == 0,
        format!(
            "{graphs} graphs x 2 modes: formation mismatches {formed_bad}, beacon-protocol mismatches {agent_bad}"
        ),
    );
}

// ---- determinism, conservation, metrics ----------------------------------

fn traced_run(cfg: &ScenarioConfig, seed: u64) -> (String, Vec<u8>, Vec<u8>) {
    let trace = SharedBuffer::new();
    let roles = SharedBuffer::new();
    let options = RunOptions {
        trace: Some(Box::new(trace.clone())),
        role_log: Some(Box::new(roles.clone())),
    };
    let o = harness::run(cfg, seed, options).unwrap();
    (o.report.to_csv_row(), trace.contents(), roles.contents())
}

#[test]
fn c08_runs_are_reproducible() {
    let mut checked = 0;
    let mut identical = true;
    let mut trace_bytes = 0;
    for name in [
        "paper_chg.scn",
        "paper_chgw.scn",
        "elected_chg.scn",
        "elected_chgw.scn",
    ] {
        let cfg = scenario(name);
        for seed in [3, 11] {
            let first = traced_run(&cfg, seed);
            let second = traced_run(&cfg, seed);
            identical &= first == second && !first.1.is_empty();
            trace_bytes += first.1.len();
            checked += 1;
        }
    }
    let cfg = scenario("elected_chg.scn");
    let seeds: Vec<u64> = (1..=6).collect();
    let sweeps_match =
        harness::sweep(&cfg, &seeds).unwrap() == harness::sweep(&cfg, &seeds).unwrap();
    verdict(
        8,
        identical && sweeps_match,
        format!(
            "{checked} run pairs byte-identical (reports, event traces, role logs; {trace_bytes} trace bytes): {identical}; repeated sweep identical: {sweeps_match}"
        ),
    );
}

#[test]
fn c09_packets_are_conserved() {
    let pinned_runs = pinned_sweeps();
    let elected = elected_sweeps();
    let (mut runs, mut broken) = (0usize, 0usize);
    for set in [
        &pinned_runs.chg,
        &pinned_runs.chgw,
        &elected.chg,
        &elected.chgw,
    ] {
        for o in set.iter() {
            runs += 1;
            let flows_ok = o
                .flows
                .iter()
                .all(|f| f.sent == f.delivered() + f.dropped() + f.in_flight && f.is_conserved());
            if !flows_ok {
                broken += 1;
            }
        }
    }
    verdict(
        9,
        broken == 0 && runs == 80,
        format!("{runs} runs, {broken} with sent != delivered + drops + in-flight"),
    );
}

#[test]
fn c10_metric_definitions() {
    // constant delay, with a gap from a lost packet
    let samples: Vec<DeliverySample> = [0u32, 1, 2, 4, 5]
        .iter()
        .map(|&seq| {
            let send = SimTime::from_millis(250 * u64::from(seq));
            DeliverySample {
                seq,
                send_time: send,
                recv_time: send + SimTime::from_micros(7_321),
            }
        })
        .collect();
    let jitter = avg_jitter(&samples);

    let cfg = ScenarioConfig::parse(
        "terrain=500x500\nnode_count=2\nmobility=static\nplace.1=100,100\nplace.2=200,100\n\
         sim_time=60\nflow.0.src=1\nflow.0.dst=2\n",
    )
    .unwrap();
    let o = harness::run(&cfg, 1, RunOptions::default()).unwrap();
    // closed form: whole frame on the air plus 100 m at light speed
    let bits = f64::from((512 + 58) * 8);
    let expected_ms = (bits / 2e6 + 100.0 / 3e8) * 1e3;
    let slot_ms = 0.020;
    let delay = o.report.e2e_delay_ms;
    let close = delay.is_some_and(|d| (d - expected_ms).abs() <= slot_ms);
    let clean = o.report.delivered == o.report.sent && o.report.mac_drops == 0;
    verdict(
        10,
        jitter == Some(0.0) && close && clean,
        format!(
            "constant-delay jitter={jitter:?}; 2-node delay {} ms vs {expected_ms:.4} ms (tolerance {slot_ms} ms); delivered {}/{} with {} MAC drops",
            fmt(delay),
            o.report.delivered,
            o.report.sent,
            o.report.mac_drops
        ),
    );
}
