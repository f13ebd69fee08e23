//! Batch driver: single runs, parallel seed sweeps and mode comparisons.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{ConfigError, Error, Result};
use crate::network::{simulate, RunOptions, RunOutcome};
use crate::report::{fmt_opt, median, parse_opt, Metric, RunReport, SweepTable};
use crate::scenario::{is_mode_key, ScenarioConfig};

pub const COMPARISON_HEADER: &str = "metric,seed,a,b,difference,ratio";

/// Metrics listed in a comparison, in output order.
pub const COMPARED_METRICS: [Metric; 7] = [
    Metric::E2eDelayMs,
    Metric::JitterMs,
    Metric::MacDrops,
    Metric::ControlTx,
    Metric::SuppressedForwards,
    Metric::ThroughputBps,
    Metric::DeliveryRatio,
];

/// Runs one seed of `cfg`.
pub fn run(cfg: &ScenarioConfig, seed: u64, options: RunOptions) -> Result<RunOutcome> {
    simulate(&cfg.with_seed(seed), options)
}

/// Runs every seed in parallel; outcomes come back ordered by seed.
pub fn sweep_outcomes(cfg: &ScenarioConfig, seeds: &[u64]) -> Result<Vec<RunOutcome>> {
    let mut seeds = seeds.to_vec();
    seeds.sort_unstable();
    seeds.dedup();
    seeds
        .par_iter()
        .map(|&s| run(cfg, s, RunOptions::default()))
        .collect()
}

pub fn sweep(cfg: &ScenarioConfig, seeds: &[u64]) -> Result<SweepTable> {
    let reports = sweep_outcomes(cfg, seeds)?
        .into_iter()
        .map(|o| o.report)
        .collect();
    Ok(SweepTable::from_reports(reports))
}

/// Accepts `N` (seeds 1..=N), `a..b` (inclusive) or a comma list.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>, ConfigError> {
    let bad = |what: &str| ConfigError::at_key("seeds", format!("{what} in {text:?}"));
    let num = |s: &str| s.trim().parse::<u64>().map_err(|_| bad("invalid seed"));
    let text = text.trim();
    let seeds: Vec<u64> = if let Some((lo, hi)) = text.split_once("..") {
        let (lo, hi) = (num(lo)?, num(hi)?);
        if lo > hi {
            return Err(bad("empty range"));
        }
        (lo..=hi).collect()
    } else if text.contains(',') {
        text.split(',').map(num).collect::<Result<_, _>>()?
    } else {
        let n = num(text)?;
        (1..=n).collect()
    };
    if seeds.is_empty() {
        return Err(bad("no seeds"));
    }
    Ok(seeds)
}

/// `b / a`, with 0/0 = 1 and x/0 = inf.
pub fn ratio(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        if b == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        b / a
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonRow {
    pub metric: Metric,
    /// `None` for the median row.
    pub seed: Option<u64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub difference: Option<f64>,
    pub ratio: Option<f64>,
}

impl ComparisonRow {
    fn per_seed(metric: Metric, seed: u64, a: Option<f64>, b: Option<f64>) -> Self {
        let both = a.zip(b);
        ComparisonRow {
            metric,
            seed: Some(seed),
            a,
            b,
            difference: both.map(|(a, b)| b - a),
            ratio: both.map(|(a, b)| ratio(a, b)),
        }
    }

    fn to_csv_row(&self) -> String {
        let seed = self
            .seed
            .map_or_else(|| "median".to_string(), |s| s.to_string());
        format!(
            "{},{},{},{},{},{}",
            self.metric,
            seed,
            fmt_opt(self.a),
            fmt_opt(self.b),
            fmt_opt(self.difference),
            fmt_opt(self.ratio)
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonReport {
    pub fn median(&self, metric: Metric) -> Option<&ComparisonRow> {
        self.rows
            .iter()
            .find(|r| r.metric == metric && r.seed.is_none())
    }

    pub fn row(&self, metric: Metric, seed: u64) -> Option<&ComparisonRow> {
        self.rows
            .iter()
            .find(|r| r.metric == metric && r.seed == Some(seed))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(COMPARISON_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(s, "{}", r.to_csv_row());
        }
        s
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        if lines.next().map(str::trim_end) != Some(COMPARISON_HEADER) {
            return Err(Error::Report("missing comparison header".into()));
        }
        let rows = lines
            .map(|line| {
                let f: Vec<&str> = line.trim_end().split(',').collect();
                if f.len() != 6 {
                    return Err(Error::Report(format!("expected 6 fields: {line:?}")));
                }
                let opt = |s: &str| parse_opt(s).map_err(Error::Report);
                Ok(ComparisonRow {
                    metric: f[0].parse().map_err(Error::Report)?,
                    seed: match f[1] {
                        "median" => None,
                        s => Some(
                            s.parse()
                                .map_err(|_| Error::Report(format!("invalid seed {s:?}")))?,
                        ),
                    },
                    a: opt(f[2])?,
                    b: opt(f[3])?,
                    difference: opt(f[4])?,
                    ratio: opt(f[5])?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(ComparisonReport { rows })
    }
}

/// Per-seed differences `b - a` and ratios `b / a`, plus a median row per
/// metric taken over the seeds where both sides have a value.
pub fn compare(a: &SweepTable, b: &SweepTable) -> Result<ComparisonReport> {
    let (sa, sb) = (a.seeds(), b.seeds());
    if sa != sb {
        return Err(Error::Compare(format!(
            "seed sets differ: {sa:?} vs {sb:?}"
        )));
    }
    if sa.is_empty() {
        return Err(Error::Compare("no runs to compare".into()));
    }
    let mut rows = Vec::new();
    for m in COMPARED_METRICS {
        let per_seed: Vec<ComparisonRow> = a
            .reports
            .iter()
            .zip(&b.reports)
            .map(|(ra, rb): (&RunReport, &RunReport)| {
                ComparisonRow::per_seed(m, ra.seed, ra.metric(m), rb.metric(m))
            })
            .collect();
        // medians over matched seeds: only rows where both sides have a value
        let col = |f: fn(&ComparisonRow) -> Option<f64>| {
            let vals: Vec<f64> = per_seed
                .iter()
                .filter(|r| r.a.is_some() && r.b.is_some())
                .filter_map(f)
                .collect();
            median(&vals)
        };
        let med = ComparisonRow {
            metric: m,
            seed: None,
            a: col(|r| r.a),
            b: col(|r| r.b),
            difference: col(|r| r.difference),
            ratio: col(|r| r.ratio),
        };
        rows.extend(per_seed);
        rows.push(med);
    }
    Ok(ComparisonReport { rows })
}

/// The two configs may differ only in mode-related keys.
pub fn check_comparable(a: &ScenarioConfig, b: &ScenarioConfig) -> Result<()> {
    let bad: Vec<String> = a
        .differing_keys(b)
        .into_iter()
        .filter(|k| !is_mode_key(k))
        .collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Error::Compare(format!(
            "scenarios differ in non-mode keys: {}",
            bad.join(", ")
        )))
    }
}

/// Where the canonical scenario of a report file is stored.
pub fn sidecar_path(report: &Path) -> PathBuf {
    let mut s = report.as_os_str().to_owned();
    s.push(".scenario");
    PathBuf::from(s)
}

pub fn write_report(out: &Path, table: &SweepTable, cfg: &ScenarioConfig) -> Result<()> {
    std::fs::write(out, table.to_csv())
        .map_err(|e| Error::io(format!("writing {}", out.display()), e))?;
    let side = sidecar_path(out);
    std::fs::write(&side, cfg.to_text())
        .map_err(|e| Error::io(format!("writing {}", side.display()), e))
}

/// Reads a report and its scenario sidecar, if there is one.
pub fn read_report(path: &Path) -> Result<(SweepTable, Option<ScenarioConfig>)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let table = SweepTable::parse_csv(&text)?;
    let side = sidecar_path(path);
    let cfg = if side.exists() {
        Some(ScenarioConfig::load(&side)?)
    } else {
        None
    };
    Ok((table, cfg))
}

pub fn compare_files(a: &Path, b: &Path) -> Result<ComparisonReport> {
    let (ta, ca) = read_report(a)?;
    let (tb, cb) = read_report(b)?;
    if let (Some(ca), Some(cb)) = (&ca, &cb) {
        check_comparable(ca, cb)?;
    }
    compare(&ta, &tb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::Mode;

    fn report(seed: u64, mode: Mode, drops: u64, thr: f64, delay: Option<f64>) -> RunReport {
        RunReport {
            seed,
            mode,
            sent: 100,
            delivered: 90,
            e2e_delay_ms: delay,
            jitter_ms: None,
            mac_drops: drops,
            control_tx: 500,
            suppressed_forwards: 0,
            throughput_bps: thr,
        }
    }

    #[test]
    fn seeds_forms() {
        assert_eq!(parse_seeds("3").unwrap(), vec![1, 2, 3]);
        assert_eq!(parse_seeds("4..6").unwrap(), vec![4, 5, 6]);
        assert_eq!(parse_seeds("9,2, 5").unwrap(), vec![9, 2, 5]);
        assert!(parse_seeds("0").is_err());
        assert!(parse_seeds("6..4").is_err());
        assert!(parse_seeds("x").is_err());
    }

    #[test]
    fn ratio_conventions() {
        assert_eq!(ratio(0.0, 0.0), 1.0);
        assert_eq!(ratio(0.0, 2.0), f64::INFINITY);
        assert_eq!(ratio(4.0, 2.0), 0.5);
    }

    #[test]
    fn comparison_rows_and_medians() {
        let a = SweepTable::from_reports(vec![
            report(1, Mode::Chg, 0, 1000.0, Some(2.0)),
            report(2, Mode::Chg, 2, 1000.0, None),
            report(3, Mode::Chg, 4, 1000.0, Some(4.0)),
        ]);
        let b = SweepTable::from_reports(vec![
            report(1, Mode::ChG, 0, 1100.0, Some(3.0)),
            report(2, Mode::ChG, 3, 900.0, Some(1.0)),
            report(3, Mode::ChG, 8, 1000.0, Some(5.0)),
        ]);
        let c = compare(&a, &b).unwrap();
        let r = c.row(Metric::MacDrops, 1).unwrap();
        assert_eq!((r.difference, r.ratio), (Some(0.0), Some(1.0)));
        let r = c.row(Metric::MacDrops, 3).unwrap();
        assert_eq!((r.difference, r.ratio), (Some(4.0), Some(2.0)));
        let d = c.row(Metric::E2eDelayMs, 2).unwrap();
        assert_eq!((d.a, d.difference, d.ratio), (None, None, None));
        let m = c.median(Metric::MacDrops).unwrap();
        assert_eq!((m.a, m.b, m.ratio), (Some(2.0), Some(3.0), Some(1.5)));
        let t = c.median(Metric::ThroughputBps).unwrap();
        assert_eq!(t.ratio, Some(1.0));
        let md = c.median(Metric::E2eDelayMs).unwrap();
        // seed 2 has no delay on side a, so it is left out of both medians
        assert_eq!((md.a, md.b), (Some(3.0), Some(4.0)));
        assert_eq!(ComparisonReport::parse_csv(&c.to_csv()).unwrap(), c);
        assert!(c.to_csv().starts_with("metric,seed,a,b,difference,ratio\n"));
    }

    #[test]
    fn mismatched_seeds_are_rejected() {
        let a = SweepTable::from_reports(vec![report(1, Mode::Chg, 0, 1.0, None)]);
        let b = SweepTable::from_reports(vec![report(2, Mode::ChG, 0, 1.0, None)]);
        assert!(matches!(compare(&a, &b), Err(Error::Compare(_))));
    }

    #[test]
    fn sidecar_name() {
        assert_eq!(
            sidecar_path(Path::new("out/a.csv")),
            PathBuf::from("out/a.csv.scenario")
        );
    }
}
