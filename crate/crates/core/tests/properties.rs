use proptest::prelude::*;

use manetsim::clustering::{form_clusters, formation::backbone_size};
use manetsim::mobility::{Trajectory, WaypointParams};
use manetsim::report::{RunReport, SweepTable};
use manetsim::{
    Mode, NodeId, Point, RadioParams, RngStream, ScenarioConfig, Scheduler, SimTime, StreamId,
    Terrain, Topology,
};

fn terrain() -> Terrain {
    Terrain::new(1500.0, 1500.0).unwrap()
}

fn waypoint(speed_max: f64, pause_ms: u64) -> WaypointParams {
    WaypointParams {
        terrain: terrain(),
        speed_min: 0.0,
        speed_max,
        pause: SimTime::from_millis(pause_ms),
        start: SimTime::from_millis(10_000),
    }
}

proptest! {
    #[test]
    fn waypoint_motion_is_continuous_and_stays_inside(
        seed in any::<u64>(),
        speed_max in 0.5f64..20.0,
        pause_ms in 0u64..3_000,
    ) {
        let params = waypoint(speed_max, pause_ms);
        let mut rng = RngStream::new(seed, StreamId::Mobility(NodeId::from_index(0)));
        let mut traj = Trajectory::stationary(Point::new(700.0, 300.0));
        let mut t = params.start;
        let step = SimTime::from_millis(100);
        for _ in 0..5 {
            let before = traj.position_at(t);
            let arrive = traj.advance(&params, t, &mut rng);
            // no jump when a new leg starts
            prop_assert!(traj.position_at(t).distance(before) < 1e-9);
            let mut prev = before;
            let mut s = t;
            while s <= arrive {
                let p = traj.position_at(s);
                prop_assert!(terrain().contains(p), "{p:?} outside at {s}");
                // 100 ms at most `speed_max`, with slack for rounding to whole microseconds
                prop_assert!(p.distance(prev) <= speed_max * 0.1 + 1e-3);
                prev = p;
                s += step;
            }
            t = arrive;
        }
    }

    #[test]
    fn range_test_is_symmetric(
        ax in 0.0f64..1500.0, ay in 0.0f64..1500.0,
        bx in 0.0f64..1500.0, by in 0.0f64..1500.0,
    ) {
        let r = RadioParams::default();
        let (a, b) = (Point::new(ax, ay), Point::new(bx, by));
        prop_assert_eq!(r.in_range(a, b), r.in_range(b, a));
        prop_assert_eq!(r.in_range(a, b), a.distance(b) <= 250.0);
    }

    #[test]
    fn receivers_match_pairwise_scan(
        pts in prop::collection::vec((0.0f64..800.0, 0.0f64..800.0), 1..40),
        sender in 0usize..40,
    ) {
        let positions: Vec<Point> = pts.iter().map(|&(x, y)| Point::new(x, y)).collect();
        let sender = NodeId::from_index(sender % positions.len());
        let r = RadioParams::default();
        let got = r.receivers_of(sender, &positions);
        let me = positions[sender.index()];
        let want: Vec<NodeId> = (0..positions.len())
            .map(NodeId::from_index)
            .filter(|&v| v != sender && (positions[v.index()].x - me.x).hypot(positions[v.index()].y - me.y) <= 250.0)
            .collect();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn scheduler_pops_in_time_then_insertion_order(
        times in prop::collection::vec(0u64..50, 1..200),
        cancel in prop::collection::vec(any::<bool>(), 200),
    ) {
        let mut s = Scheduler::new();
        let mut handles = Vec::new();
        for (i, &t) in times.iter().enumerate() {
            handles.push(s.schedule(SimTime::from_micros(t), i).unwrap());
        }
        let mut live: Vec<(u64, usize)> = Vec::new();
        for (i, h) in handles.into_iter().enumerate() {
            if cancel[i] {
                prop_assert!(s.cancel(h));
                prop_assert!(!s.cancel(h));
            } else {
                live.push((times[i], i));
            }
        }
        live.sort();
        let mut fired = Vec::new();
        s.run_until(SimTime::from_micros(1_000), |_, f| fired.push((f.time.as_micros(), f.event))).unwrap();
        prop_assert_eq!(fired, live);
        prop_assert_eq!(s.now(), SimTime::from_micros(1_000));
    }

    #[test]
    fn report_rows_round_trip(
        seed in any::<u64>(),
        chg in any::<bool>(),
        sent in 0u64..100_000,
        delivered in 0u64..100_000,
        delay in prop::option::of(0.0f64..1e5),
        jitter in prop::option::of(0.0f64..1e4),
        counts in (any::<u32>(), any::<u32>(), any::<u32>()),
        throughput in 0.0f64..1e7,
    ) {
        let r = RunReport {
            seed,
            mode: if chg { Mode::Chg } else { Mode::ChG },
            sent,
            delivered,
            e2e_delay_ms: delay,
            jitter_ms: jitter,
            mac_drops: counts.0.into(),
            control_tx: counts.1.into(),
            suppressed_forwards: counts.2.into(),
            throughput_bps: throughput,
        };
        prop_assert_eq!(RunReport::parse_csv_row(&r.to_csv_row()).unwrap(), r);
        let t = SweepTable::from_reports(vec![r]);
        prop_assert_eq!(SweepTable::parse_csv(&t.to_csv()).unwrap(), t);
    }

    #[test]
    fn merged_backbone_is_never_larger(
        edges in prop::collection::vec((0usize..25, 0usize..25), 0..80),
    ) {
        let edges: Vec<_> = edges
            .into_iter()
            .filter(|(a, b)| a != b)
            .map(|(a, b)| (NodeId::from_index(a), NodeId::from_index(b)))
            .collect();
        let t = Topology::from_edges(25, &edges);
        let chg = backbone_size(&form_clusters(&t, Mode::Chg), Mode::Chg);
        let chgw = backbone_size(&form_clusters(&t, Mode::ChG), Mode::ChG);
        prop_assert!(chg <= chgw);
    }

    #[test]
    fn scenario_text_round_trips(
        nodes in 2usize..60,
        seed in any::<u64>(),
        chg in any::<bool>(),
        full in any::<bool>(),
        rate in 1u32..20,
    ) {
        let text = format!(
            "node_count={nodes}\nseed={seed}\nmode={}\nflooding={}\nflow.0.src=1\nflow.0.dst={nodes}\nflow.0.rate={rate}\n",
            if chg { "CHG" } else { "CH_G" },
            if full { "full" } else { "backbone" },
        );
        let c = ScenarioConfig::parse(&text).unwrap();
        prop_assert_eq!(ScenarioConfig::parse(&c.to_text()).unwrap(), c);
    }
}
