//! Scenario files: flat `key=value` lines with `#` comments.
//!
//! ```text
//! terrain=1500x1500
//! node_count=30
//! mode=CHG
//! flow.0.src=12
//! flow.0.dst=17
//! pin.15=CHG
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::clustering::{ClusterParams, Mode, RoleKind};
use crate::error::{ConfigError, Error};
use crate::ids::NodeId;
use crate::mobility::{Point, Terrain, WaypointParams};
use crate::radio::RadioParams;
use crate::sim::SimTime;
use crate::traffic::CbrFlow;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Flooding {
    /// Every node rebroadcasts route requests.
    Full,
    /// Only backbone nodes rebroadcast.
    Backbone,
}

impl Flooding {
    pub fn token(self) -> &'static str {
        match self {
            Flooding::Full => "full",
            Flooding::Backbone => "backbone",
        }
    }
}

impl FromStr for Flooding {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" => Ok(Flooding::Full),
            "backbone" => Ok(Flooding::Backbone),
            _ => Err(format!("expected `full` or `backbone`, got {s:?}")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MobilityModel {
    RandomWaypoint,
    Static,
}

impl MobilityModel {
    pub fn token(self) -> &'static str {
        match self {
            MobilityModel::RandomWaypoint => "random_waypoint",
            MobilityModel::Static => "static",
        }
    }
}

impl FromStr for MobilityModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random_waypoint" => Ok(MobilityModel::RandomWaypoint),
            "static" => Ok(MobilityModel::Static),
            _ => Err(format!("expected `random_waypoint` or `static`, got {s:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub terrain: Terrain,
    pub node_count: usize,
    pub speed_min: f64,
    pub speed_max: f64,
    pub pause_time: SimTime,
    pub mobility_start: SimTime,
    pub mobility: MobilityModel,
    pub sim_time: SimTime,
    pub tx_range: f64,
    pub bitrate: f64,
    pub mode: Mode,
    pub flooding: Flooding,
    pub flows: Vec<CbrFlow>,
    /// Fixed roles. When non-empty, election is off and unlisted nodes are
    /// ordinary members.
    pub pinned_roles: BTreeMap<NodeId, RoleKind>,
    /// Fixed initial positions; other nodes are placed at random.
    pub placement: BTreeMap<NodeId, Point>,
    pub beacon_interval: SimTime,
    pub neighbor_timeout: SimTime,
    pub stability_window: SimTime,
    pub link_check_interval: SimTime,
    pub master_seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let cluster = ClusterParams::default();
        ScenarioConfig {
            terrain: Terrain::default(),
            node_count: 30,
            speed_min: 0.0,
            speed_max: 10.0,
            pause_time: SimTime::ZERO,
            mobility_start: SimTime::from_millis(10_000),
            mobility: MobilityModel::RandomWaypoint,
            sim_time: SimTime::from_millis(300_000),
            tx_range: 250.0,
            bitrate: 2e6,
            mode: Mode::ChG,
            flooding: Flooding::Backbone,
            flows: Vec::new(),
            pinned_roles: BTreeMap::new(),
            placement: BTreeMap::new(),
            beacon_interval: cluster.beacon_interval,
            neighbor_timeout: cluster.neighbor_timeout,
            stability_window: cluster.stability_window,
            link_check_interval: SimTime::from_millis(250),
            master_seed: 1,
        }
    }
}

const DEFAULT_RATE: f64 = 4.0;
const DEFAULT_PAYLOAD: u32 = 512;
const DEFAULT_FLOW_START: SimTime = SimTime::from_micros(15_000_000);
const DEFAULT_FLOW_TAIL: SimTime = SimTime::from_micros(5_000_000);

#[derive(Default)]
struct FlowDraft {
    src: Option<NodeId>,
    dst: Option<NodeId>,
    rate: Option<f64>,
    payload: Option<u32>,
    start: Option<SimTime>,
    end: Option<SimTime>,
}

fn secs_text(t: SimTime) -> String {
    format!("{}", t.as_secs_f64())
}

fn parse_value<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>()
        .map_err(|e| ConfigError::at_line(line, Some(key), format!("invalid value {v:?}: {e}")))
}

fn parse_f64(line: usize, key: &str, v: &str) -> Result<f64, ConfigError> {
    let x: f64 = parse_value(line, key, v)?;
    if !x.is_finite() {
        return Err(ConfigError::at_line(
            line,
            Some(key),
            "value must be finite",
        ));
    }
    Ok(x)
}

fn parse_secs(line: usize, key: &str, v: &str) -> Result<SimTime, ConfigError> {
    let x = parse_f64(line, key, v)?;
    if x < 0.0 {
        return Err(ConfigError::at_line(
            line,
            Some(key),
            "time must not be negative",
        ));
    }
    Ok(SimTime::from_secs_f64(x))
}

fn parse_node(line: usize, key: &str, v: &str) -> Result<NodeId, ConfigError> {
    v.parse::<NodeId>()
        .map_err(|e| ConfigError::at_line(line, Some(key), e))
}

fn parse_pair(line: usize, key: &str, v: &str, sep: char) -> Result<(f64, f64), ConfigError> {
    let (a, b) = v.split_once(sep).ok_or_else(|| {
        ConfigError::at_line(
            line,
            Some(key),
            format!("expected two numbers separated by `{sep}`"),
        )
    })?;
    Ok((
        parse_f64(line, key, a.trim())?,
        parse_f64(line, key, b.trim())?,
    ))
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = ScenarioConfig::default();
        let mut flows: BTreeMap<u32, FlowDraft> = BTreeMap::new();
        let mut seen: BTreeMap<String, usize> = BTreeMap::new();

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| ConfigError::at_line(line, None, "expected `key=value`"))?;
            let (key, value) = (key.trim(), value.trim());
            if let Some(first) = seen.insert(key.to_string(), line) {
                return Err(ConfigError::at_line(
                    line,
                    Some(key),
                    format!("duplicate key (first set on line {first})"),
                ));
            }
            match key {
                "terrain" => {
                    let (w, h) = parse_pair(line, key, value, 'x')?;
                    cfg.terrain = Terrain::new(w, h)
                        .map_err(|e| ConfigError::at_line(line, Some(key), e.message))?;
                }
                "node_count" => cfg.node_count = parse_value(line, key, value)?,
                "speed_min" => cfg.speed_min = parse_f64(line, key, value)?,
                "speed_max" => cfg.speed_max = parse_f64(line, key, value)?,
                "pause_time" => cfg.pause_time = parse_secs(line, key, value)?,
                "mobility_start" => cfg.mobility_start = parse_secs(line, key, value)?,
                "mobility" => cfg.mobility = parse_value(line, key, value)?,
                "sim_time" => cfg.sim_time = parse_secs(line, key, value)?,
                "tx_range" => cfg.tx_range = parse_f64(line, key, value)?,
                "bitrate" => cfg.bitrate = parse_f64(line, key, value)?,
                "mode" => cfg.mode = parse_value(line, key, value)?,
                "flooding" => cfg.flooding = parse_value(line, key, value)?,
                "seed" => cfg.master_seed = parse_value(line, key, value)?,
                "beacon_interval" => cfg.beacon_interval = parse_secs(line, key, value)?,
                "neighbor_timeout" => cfg.neighbor_timeout = parse_secs(line, key, value)?,
                "stability_window" => cfg.stability_window = parse_secs(line, key, value)?,
                "link_check_interval" => cfg.link_check_interval = parse_secs(line, key, value)?,
                _ => {
                    if let Some(rest) = key.strip_prefix("flow.") {
                        let (n, field) = rest.split_once('.').ok_or_else(|| {
                            ConfigError::at_line(line, Some(key), "expected `flow.<n>.<field>`")
                        })?;
                        let n: u32 = parse_value(line, key, n)?;
                        let d = flows.entry(n).or_default();
                        match field {
                            "src" => d.src = Some(parse_node(line, key, value)?),
                            "dst" => d.dst = Some(parse_node(line, key, value)?),
                            "rate" => d.rate = Some(parse_f64(line, key, value)?),
                            "payload" => d.payload = Some(parse_value(line, key, value)?),
                            "start" => d.start = Some(parse_secs(line, key, value)?),
                            "end" => d.end = Some(parse_secs(line, key, value)?),
                            _ => {
                                return Err(ConfigError::at_line(
                                    line,
                                    Some(key),
                                    "unknown flow field",
                                ))
                            }
                        }
                    } else if let Some(n) = key.strip_prefix("pin.") {
                        let node = parse_node(line, key, n)?;
                        let kind: RoleKind = parse_value(line, key, value)?;
                        cfg.pinned_roles.insert(node, kind);
                    } else if let Some(n) = key.strip_prefix("place.") {
                        let node = parse_node(line, key, n)?;
                        let (x, y) = parse_pair(line, key, value, ',')?;
                        cfg.placement.insert(node, Point::new(x, y));
                    } else {
                        return Err(ConfigError::at_line(line, Some(key), "unknown key"));
                    }
                }
            }
        }

        for (n, d) in flows {
            let key = |f: &str| format!("flow.{n}.{f}");
            let src = d
                .src
                .ok_or_else(|| ConfigError::at_key(key("src"), "missing"))?;
            let dst = d
                .dst
                .ok_or_else(|| ConfigError::at_key(key("dst"), "missing"))?;
            let payload = d.payload.unwrap_or(DEFAULT_PAYLOAD);
            let start = d.start.unwrap_or(DEFAULT_FLOW_START);
            let end = d
                .end
                .unwrap_or_else(|| cfg.sim_time.saturating_sub(DEFAULT_FLOW_TAIL));
            cfg.flows.push(CbrFlow {
                src,
                dst,
                rate: d.rate.unwrap_or(DEFAULT_RATE),
                payload,
                start,
                end,
            });
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            ConfigError::new(format!("cannot read scenario {}: {e}", path.display()))
        })?;
        ScenarioConfig::parse(&text).map_err(Error::from)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.node_count == 0 {
            return Err(ConfigError::at_key("node_count", "need at least one node"));
        }
        if self.node_count > u16::MAX as usize {
            return Err(ConfigError::at_key("node_count", "too many nodes"));
        }
        if self.terrain.width <= 0.0 || self.terrain.height <= 0.0 {
            return Err(ConfigError::at_key(
                "terrain",
                "terrain must have positive area",
            ));
        }
        if self.speed_min < 0.0 {
            return Err(ConfigError::at_key("speed_min", "must not be negative"));
        }
        if self.speed_max < self.speed_min {
            return Err(ConfigError::at_key(
                "speed_max",
                "must be at least speed_min",
            ));
        }
        if self.mobility == MobilityModel::RandomWaypoint && self.speed_max <= 0.0 {
            return Err(ConfigError::at_key(
                "speed_max",
                "must be positive for random waypoint",
            ));
        }
        if self.sim_time == SimTime::ZERO {
            return Err(ConfigError::at_key("sim_time", "must be positive"));
        }
        if self.tx_range.is_nan() || self.tx_range <= 0.0 {
            return Err(ConfigError::at_key("tx_range", "must be positive"));
        }
        if self.bitrate.is_nan() || self.bitrate <= 0.0 {
            return Err(ConfigError::at_key("bitrate", "must be positive"));
        }
        // beacons are jittered by a tenth of the interval and kept 10 ms
        // clear of the next period
        if self.beacon_interval < SimTime::from_millis(20) {
            return Err(ConfigError::at_key(
                "beacon_interval",
                "must be at least 0.02 s",
            ));
        }
        if self.link_check_interval == SimTime::ZERO {
            return Err(ConfigError::at_key(
                "link_check_interval",
                "must be positive",
            ));
        }
        if self.neighbor_timeout == SimTime::ZERO {
            return Err(ConfigError::at_key("neighbor_timeout", "must be positive"));
        }
        let in_range = |id: NodeId| id.get() as usize <= self.node_count;
        for (i, f) in self.flows.iter().enumerate() {
            if !in_range(f.src) {
                return Err(ConfigError::at_key(format!("flow.{i}.src"), "no such node"));
            }
            if !in_range(f.dst) {
                return Err(ConfigError::at_key(format!("flow.{i}.dst"), "no such node"));
            }
            f.validate(self.sim_time)
                .map_err(|e| ConfigError::at_key(format!("flow.{i}"), e.message))?;
        }
        for (&id, &kind) in &self.pinned_roles {
            let key = format!("pin.{id}");
            if !in_range(id) {
                return Err(ConfigError::at_key(key, "no such node"));
            }
            if !kind.allowed_in(self.mode) {
                return Err(ConfigError::at_key(
                    key,
                    format!("role {kind} does not exist in mode {}", self.mode),
                ));
            }
        }
        for (&id, &p) in &self.placement {
            let key = format!("place.{id}");
            if !in_range(id) {
                return Err(ConfigError::at_key(key, "no such node"));
            }
            if !self.terrain.contains(p) {
                return Err(ConfigError::at_key(key, "position outside the terrain"));
            }
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        ScenarioConfig {
            master_seed: seed,
            ..self.clone()
        }
    }

    pub fn radio(&self) -> RadioParams {
        RadioParams {
            tx_range: self.tx_range,
            bitrate: self.bitrate,
            ..RadioParams::default()
        }
    }

    pub fn waypoint(&self) -> WaypointParams {
        WaypointParams {
            terrain: self.terrain,
            speed_min: self.speed_min,
            speed_max: self.speed_max,
            pause: self.pause_time,
            start: self.mobility_start,
        }
    }

    pub fn cluster_params(&self) -> ClusterParams {
        ClusterParams {
            beacon_interval: self.beacon_interval,
            neighbor_timeout: self.neighbor_timeout,
            stability_window: self.stability_window,
            ..ClusterParams::default()
        }
    }

    /// Every setting as canonical `key -> value` text, defaults included.
    pub fn entries(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: String, v: String| {
            m.insert(k, v);
        };
        put(
            "terrain".into(),
            format!("{}x{}", self.terrain.width, self.terrain.height),
        );
        put("node_count".into(), self.node_count.to_string());
        put("speed_min".into(), self.speed_min.to_string());
        put("speed_max".into(), self.speed_max.to_string());
        put("pause_time".into(), secs_text(self.pause_time));
        put("mobility_start".into(), secs_text(self.mobility_start));
        put("mobility".into(), self.mobility.token().into());
        put("sim_time".into(), secs_text(self.sim_time));
        put("tx_range".into(), self.tx_range.to_string());
        put("bitrate".into(), self.bitrate.to_string());
        put("mode".into(), self.mode.to_string());
        put("flooding".into(), self.flooding.token().into());
        put("seed".into(), self.master_seed.to_string());
        put("beacon_interval".into(), secs_text(self.beacon_interval));
        put("neighbor_timeout".into(), secs_text(self.neighbor_timeout));
        put("stability_window".into(), secs_text(self.stability_window));
        put(
            "link_check_interval".into(),
            secs_text(self.link_check_interval),
        );
        for (i, f) in self.flows.iter().enumerate() {
            put(format!("flow.{i}.src"), f.src.to_string());
            put(format!("flow.{i}.dst"), f.dst.to_string());
            put(format!("flow.{i}.rate"), f.rate.to_string());
            put(format!("flow.{i}.payload"), f.payload.to_string());
            put(format!("flow.{i}.start"), secs_text(f.start));
            put(format!("flow.{i}.end"), secs_text(f.end));
        }
        for (id, kind) in &self.pinned_roles {
            put(format!("pin.{id}"), kind.token().into());
        }
        for (id, p) in &self.placement {
            put(format!("place.{id}"), format!("{},{}", p.x, p.y));
        }
        m
    }

    /// Canonical scenario text; parses back to an equal config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }

    /// Keys whose values differ between the two configs (or exist in one only).
    pub fn differing_keys(&self, other: &ScenarioConfig) -> Vec<String> {
        let a = self.entries();
        let b = other.entries();
        let mut keys: Vec<String> = a
            .keys()
            .chain(b.keys())
            .filter(|k| a.get(*k) != b.get(*k))
            .cloned()
            .collect();
        keys.sort();
        keys.dedup();
        keys
    }
}

/// Keys allowed to differ between the two sides of a mode comparison.
pub fn is_mode_key(key: &str) -> bool {
    key == "mode" || key == "seed" || key.starts_with("pin.")
}
