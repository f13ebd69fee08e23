use std::path::PathBuf;

use manetsim::harness::{
    self, check_comparable, compare, compare_files, sidecar_path, write_report,
};
use manetsim::report::Metric;
use manetsim::scenario::is_mode_key;
use manetsim::{nid, Error, Flooding, MobilityModel, Mode, RoleKind, ScenarioConfig, SimTime};

fn bundled(name: &str) -> ScenarioConfig {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name);
    ScenarioConfig::load(&p).unwrap()
}

#[test]
fn bundled_scenario_values() {
    let c = bundled("paper_chg.scn");
    assert_eq!(c.node_count, 30);
    assert_eq!((c.terrain.width, c.terrain.height), (1500.0, 1500.0));
    assert_eq!((c.speed_min, c.speed_max), (0.0, 10.0));
    assert_eq!(c.pause_time, SimTime::ZERO);
    assert_eq!(c.mobility_start, SimTime::from_millis(10_000));
    assert_eq!(c.mobility, MobilityModel::RandomWaypoint);
    assert_eq!(c.flooding, Flooding::Backbone);
    assert_eq!((c.flows[0].src, c.flows[0].dst), (nid(12), nid(17)));
    assert_eq!(c.mode, Mode::Chg);
    let pins: Vec<_> = c.pinned_roles.iter().map(|(&n, &k)| (n, k)).collect();
    assert_eq!(
        pins,
        vec![
            (nid(15), RoleKind::ClusterHeadGateway),
            (nid(30), RoleKind::ClusterHeadGateway)
        ]
    );

    let w = bundled("paper_chgw.scn");
    assert_eq!(w.mode, Mode::ChG);
    let pins: Vec<_> = w.pinned_roles.iter().map(|(&n, &k)| (n.get(), k)).collect();
    assert_eq!(
        pins,
        vec![
            (6, RoleKind::ClusterHead),
            (15, RoleKind::ClusterHead),
            (18, RoleKind::Gateway),
            (30, RoleKind::Gateway)
        ]
    );
}

#[test]
fn paired_scenarios_differ_only_in_mode_keys() {
    for (a, b) in [
        ("paper_chg.scn", "paper_chgw.scn"),
        ("elected_chg.scn", "elected_chgw.scn"),
    ] {
        let (a, b) = (bundled(a), bundled(b));
        let diff = a.differing_keys(&b);
        assert!(diff.contains(&"mode".to_string()));
        assert!(diff.iter().all(|k| is_mode_key(k)), "{diff:?}");
        check_comparable(&a, &b).unwrap();
    }
    // the elected variants are the pinned pair without pins
    let (p, e) = (bundled("paper_chg.scn"), bundled("elected_chg.scn"));
    assert!(p.differing_keys(&e).iter().all(|k| k.starts_with("pin.")));
}

#[test]
fn comparing_against_other_settings_names_the_keys() {
    let a = bundled("paper_chg.scn");
    let mut b = bundled("paper_chgw.scn");
    b.node_count = 31;
    b.sim_time = SimTime::from_millis(100_000);
    let err = check_comparable(&a, &b).unwrap_err().to_string();
    let keys = err.rsplit(": ").next().unwrap();
    assert_eq!(keys, "node_count, sim_time", "{err}");
}

fn short(name: &str) -> ScenarioConfig {
    let mut c = bundled(name);
    c.sim_time = SimTime::from_millis(40_000);
    c.flows[0].end = SimTime::from_millis(35_000);
    c
}

#[test]
fn self_comparison_is_the_identity() {
    let t = harness::sweep(&short("elected_chg.scn"), &[1, 2, 3]).unwrap();
    let c = compare(&t, &t).unwrap();
    for row in &c.rows {
        if row.a.is_some() {
            assert_eq!(row.difference, Some(0.0), "{row:?}");
            assert_eq!(row.ratio, Some(1.0), "{row:?}");
        }
    }
    assert!(c.median(Metric::DeliveryRatio).is_some());
}

#[test]
fn sweep_shape_and_single_seed_aggregate() {
    let cfg = short("paper_chgw.scn");
    let t = harness::sweep(&cfg, &[3, 1, 2]).unwrap();
    assert_eq!(t.seeds(), vec![1, 2, 3]);
    assert_eq!(t.aggregates.len(), 3);
    let one = harness::sweep(&cfg, &[2]).unwrap();
    assert_eq!(one.reports[0], t.reports[1]);
    for agg in &one.aggregates {
        for m in Metric::COLUMNS {
            assert_eq!(agg.value(m), one.reports[0].metric(m));
        }
    }
}

#[test]
fn report_files_carry_their_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let (a_cfg, b_cfg) = (short("paper_chgw.scn"), short("paper_chg.scn"));
    let seeds = [1, 2];
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    write_report(&a, &harness::sweep(&a_cfg, &seeds).unwrap(), &a_cfg).unwrap();
    write_report(&b, &harness::sweep(&b_cfg, &seeds).unwrap(), &b_cfg).unwrap();
    assert!(sidecar_path(&a).exists());
    let c = compare_files(&a, &b).unwrap();
    assert!(c.row(Metric::ControlTx, 2).is_some());

    // a different network is refused
    let mut other = b_cfg.clone();
    other.tx_range = 300.0;
    let o = dir.path().join("o.csv");
    write_report(&o, &harness::sweep(&other, &seeds).unwrap(), &other).unwrap();
    let err = compare_files(&a, &o).unwrap_err();
    assert!(
        matches!(err, Error::Compare(ref m) if m.contains("tx_range")),
        "{err}"
    );

    // and so is a different seed set
    let s = dir.path().join("s.csv");
    write_report(&s, &harness::sweep(&b_cfg, &[1, 3]).unwrap(), &b_cfg).unwrap();
    assert!(matches!(compare_files(&a, &s), Err(Error::Compare(_))));
}
