//! Run report rows and their CSV form.

use std::fmt;
use std::str::FromStr;

use crate::clustering::Mode;
use crate::error::Error;

pub const REPORT_HEADER: &str =
    "seed,mode,sent,delivered,e2e_delay_ms,jitter_ms,mac_drops,control_tx,suppressed_forwards,throughput_bps";

/// Marker for values that cannot be computed (e.g. delay without deliveries).
pub const NA: &str = "NA";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunReport {
    pub seed: u64,
    pub mode: Mode,
    pub sent: u64,
    pub delivered: u64,
    pub e2e_delay_ms: Option<f64>,
    pub jitter_ms: Option<f64>,
    pub mac_drops: u64,
    pub control_tx: u64,
    pub suppressed_forwards: u64,
    pub throughput_bps: f64,
}

/// Numeric report columns, plus the derived delivery ratio.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    Sent,
    Delivered,
    E2eDelayMs,
    JitterMs,
    MacDrops,
    ControlTx,
    SuppressedForwards,
    ThroughputBps,
    DeliveryRatio,
}

impl Metric {
    /// The numeric CSV columns, in header order.
    pub const COLUMNS: [Metric; 8] = [
        Metric::Sent,
        Metric::Delivered,
        Metric::E2eDelayMs,
        Metric::JitterMs,
        Metric::MacDrops,
        Metric::ControlTx,
        Metric::SuppressedForwards,
        Metric::ThroughputBps,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Sent => "sent",
            Metric::Delivered => "delivered",
            Metric::E2eDelayMs => "e2e_delay_ms",
            Metric::JitterMs => "jitter_ms",
            Metric::MacDrops => "mac_drops",
            Metric::ControlTx => "control_tx",
            Metric::SuppressedForwards => "suppressed_forwards",
            Metric::ThroughputBps => "throughput_bps",
            Metric::DeliveryRatio => "delivery_ratio",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metric::COLUMNS
            .iter()
            .chain(&[Metric::DeliveryRatio])
            .copied()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown metric {s:?}"))
    }
}

pub fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x}"),
        None => NA.to_string(),
    }
}

pub fn parse_opt(field: &str) -> Result<Option<f64>, String> {
    if field == NA {
        return Ok(None);
    }
    field
        .parse::<f64>()
        .map(Some)
        .map_err(|_| format!("invalid number {field:?}"))
}

impl RunReport {
    pub fn metric(&self, m: Metric) -> Option<f64> {
        match m {
            Metric::Sent => Some(self.sent as f64),
            Metric::Delivered => Some(self.delivered as f64),
            Metric::E2eDelayMs => self.e2e_delay_ms,
            Metric::JitterMs => self.jitter_ms,
            Metric::MacDrops => Some(self.mac_drops as f64),
            Metric::ControlTx => Some(self.control_tx as f64),
            Metric::SuppressedForwards => Some(self.suppressed_forwards as f64),
            Metric::ThroughputBps => Some(self.throughput_bps),
            Metric::DeliveryRatio => self.delivery_ratio(),
        }
    }

    pub fn delivery_ratio(&self) -> Option<f64> {
        (self.sent > 0).then(|| self.delivered as f64 / self.sent as f64)
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.seed,
            self.mode,
            self.sent,
            self.delivered,
            fmt_opt(self.e2e_delay_ms),
            fmt_opt(self.jitter_ms),
            self.mac_drops,
            self.control_tx,
            self.suppressed_forwards,
            self.throughput_bps
        )
    }

    pub fn parse_csv_row(line: &str) -> Result<Self, Error> {
        let f: Vec<&str> = line.trim_end().split(',').collect();
        if f.len() != 10 {
            return Err(Error::Report(format!(
                "expected 10 fields, got {}: {line:?}",
                f.len()
            )));
        }
        let int = |i: usize| {
            f[i].parse::<u64>()
                .map_err(|_| Error::Report(format!("column {i}: invalid count {:?}", f[i])))
        };
        let opt = |i: usize| parse_opt(f[i]).map_err(|e| Error::Report(format!("column {i}: {e}")));
        Ok(RunReport {
            seed: int(0)?,
            mode: f[1].parse().map_err(Error::Report)?,
            sent: int(2)?,
            delivered: int(3)?,
            e2e_delay_ms: opt(4)?,
            jitter_ms: opt(5)?,
            mac_drops: int(6)?,
            control_tx: int(7)?,
            suppressed_forwards: int(8)?,
            throughput_bps: opt(9)?
                .ok_or_else(|| Error::Report("throughput cannot be NA".into()))?,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Aggregate {
    Median,
    Min,
    Max,
}

impl Aggregate {
    pub const ALL: [Aggregate; 3] = [Aggregate::Median, Aggregate::Min, Aggregate::Max];

    pub fn label(self) -> &'static str {
        match self {
            Aggregate::Median => "median",
            Aggregate::Min => "min",
            Aggregate::Max => "max",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Aggregate::ALL.into_iter().find(|a| a.label() == s)
    }

    /// Over the available values; `None` when there are none.
    pub fn apply(self, values: &[f64]) -> Option<f64> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(match self {
            Aggregate::Min => v[0],
            Aggregate::Max => v[v.len() - 1],
            Aggregate::Median => median_sorted(&v),
        })
    }
}

fn median_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Median of the given values, ignoring none of them; `None` if empty.
pub fn median(values: &[f64]) -> Option<f64> {
    Aggregate::Median.apply(values)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AggregateRow {
    pub kind: Aggregate,
    pub mode: Mode,
    /// One value per entry of [`Metric::COLUMNS`].
    pub values: [Option<f64>; 8],
}

impl AggregateRow {
    pub fn value(&self, m: Metric) -> Option<f64> {
        Metric::COLUMNS
            .iter()
            .position(|&c| c == m)
            .and_then(|i| self.values[i])
    }

    fn to_csv_row(&self) -> String {
        let mut s = format!("{},{}", self.kind.label(), self.mode);
        for v in self.values {
            s.push(',');
            s.push_str(&fmt_opt(v));
        }
        s
    }
}

/// Per-seed rows of a sweep followed by median/min/max rows.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepTable {
    pub reports: Vec<RunReport>,
    pub aggregates: Vec<AggregateRow>,
}

impl SweepTable {
    pub fn from_reports(mut reports: Vec<RunReport>) -> Self {
        reports.sort_by_key(|r| r.seed);
        let mode = reports.first().map(|r| r.mode).unwrap_or(Mode::ChG);
        let aggregates = Aggregate::ALL
            .into_iter()
            .map(|kind| {
                let mut values = [None; 8];
                for (slot, m) in values.iter_mut().zip(Metric::COLUMNS) {
                    let col: Vec<f64> = reports.iter().filter_map(|r| r.metric(m)).collect();
                    *slot = kind.apply(&col);
                }
                AggregateRow { kind, mode, values }
            })
            .collect();
        SweepTable {
            reports,
            aggregates,
        }
    }

    pub fn aggregate(&self, kind: Aggregate) -> Option<&AggregateRow> {
        self.aggregates.iter().find(|a| a.kind == kind)
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.reports.iter().map(|r| r.seed).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(REPORT_HEADER);
        s.push('\n');
        for r in &self.reports {
            s.push_str(&r.to_csv_row());
            s.push('\n');
        }
        for a in &self.aggregates {
            s.push_str(&a.to_csv_row());
            s.push('\n');
        }
        s
    }

    /// Parses report CSV; aggregate rows are optional (a single-run file
    /// has none).
    pub fn parse_csv(text: &str) -> Result<Self, Error> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        match lines.next() {
            Some(h) if h.trim_end() == REPORT_HEADER => {}
            Some(h) => return Err(Error::Report(format!("unexpected header {h:?}"))),
            None => return Err(Error::Report("empty report".into())),
        }
        let mut reports = Vec::new();
        let mut aggregates = Vec::new();
        for line in lines {
            let first = line.split(',').next().unwrap_or("");
            if let Some(kind) = Aggregate::parse(first) {
                let f: Vec<&str> = line.trim_end().split(',').collect();
                if f.len() != 10 {
                    return Err(Error::Report(format!("expected 10 fields: {line:?}")));
                }
                let mut values = [None; 8];
                for (slot, field) in values.iter_mut().zip(&f[2..]) {
                    *slot = parse_opt(field).map_err(Error::Report)?;
                }
                aggregates.push(AggregateRow {
                    kind,
                    mode: f[1].parse().map_err(Error::Report)?,
                    values,
                });
            } else {
                reports.push(RunReport::parse_csv_row(line)?);
            }
        }
        Ok(SweepTable {
            reports,
            aggregates,
        })
    }
}
