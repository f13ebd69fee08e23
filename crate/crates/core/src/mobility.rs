//! Random waypoint mobility over a rectangular terrain.
//!
//! Positions are never stepped; each node holds its current [`MotionLeg`] and
//! positions are interpolated on demand.

use crate::error::ConfigError;
use crate::sim::{RngStream, SimTime};

/// Lower bound applied to sampled speeds so no node stalls forever at 0 m/s.
pub const SPEED_FLOOR: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Terrain {
    pub width: f64,
    pub height: f64,
}

impl Terrain {
    pub fn new(width: f64, height: f64) -> Result<Self, ConfigError> {
        if !(width > 0.0 && height > 0.0 && width.is_finite() && height.is_finite()) {
            return Err(ConfigError::at_key(
                "terrain",
                format!("terrain must have positive area, got {width}x{height}"),
            ));
        }
        Ok(Terrain { width, height })
    }

    pub fn contains(&self, p: Point) -> bool {
        (0.0..=self.width).contains(&p.x) && (0.0..=self.height).contains(&p.y)
    }

    fn sample(&self, rng: &mut RngStream) -> Point {
        Point::new(rng.uniform(0.0, self.width), rng.uniform(0.0, self.height))
    }
}

impl Default for Terrain {
    fn default() -> Self {
        Terrain {
            width: 1500.0,
            height: 1500.0,
        }
    }
}

/// One straight-line movement. Between `depart` and `arrive` the node moves
/// from `origin` toward `waypoint` at `speed`; before `depart` it waits at
/// `origin` (pause), after `arrive` it rests at `waypoint`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MotionLeg {
    pub origin: Point,
    pub waypoint: Point,
    pub speed: f64,
    pub depart: SimTime,
    pub arrive: SimTime,
}

impl MotionLeg {
    pub fn new(origin: Point, waypoint: Point, speed: f64, depart: SimTime) -> Self {
        debug_assert!(speed > 0.0);
        let travel_us = (origin.distance(waypoint) / speed * 1e6).ceil() as u64;
        MotionLeg {
            origin,
            waypoint,
            speed,
            depart,
            arrive: depart + SimTime::from_micros(travel_us.max(1)),
        }
    }

    pub fn position_at(&self, t: SimTime) -> Point {
        if t <= self.depart {
            return self.origin;
        }
        if t >= self.arrive {
            return self.waypoint;
        }
        let total = self.origin.distance(self.waypoint);
        let traveled = (self.speed * (t - self.depart).as_secs_f64()).min(total);
        let f = traveled / total;
        Point::new(
            self.origin.x + (self.waypoint.x - self.origin.x) * f,
            self.origin.y + (self.waypoint.y - self.origin.y) * f,
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WaypointParams {
    pub terrain: Terrain,
    pub speed_min: f64,
    pub speed_max: f64,
    pub pause: SimTime,
    pub start: SimTime,
}

impl WaypointParams {
    pub fn speed_min_effective(&self) -> f64 {
        self.speed_min.max(SPEED_FLOOR)
    }

    /// Draws the next leg starting at `at`. Waypoint is uniform over the
    /// terrain, speed uniform over `[speed_min_effective, speed_max]`, and the
    /// node departs after the configured pause.
    pub fn next_leg(&self, at: Point, t: SimTime, rng: &mut RngStream) -> MotionLeg {
        debug_assert!(t >= self.start, "legs begin at mobility start");
        let waypoint = self.terrain.sample(rng);
        let lo = self.speed_min_effective();
        let hi = self.speed_max.max(lo);
        let speed = rng.uniform(lo, hi);
        MotionLeg::new(at, waypoint, speed, t + self.pause)
    }
}

pub fn init_placement(
    node_count: usize,
    terrain: &Terrain,
    rng: &mut RngStream,
) -> Result<Vec<Point>, ConfigError> {
    if node_count == 0 {
        return Err(ConfigError::at_key("node_count", "need at least one node"));
    }
    Ok((0..node_count).map(|_| terrain.sample(rng)).collect())
}

/// Per-node motion state.
#[derive(Clone, Debug)]
pub struct Trajectory {
    initial: Point,
    leg: Option<MotionLeg>,
}

impl Trajectory {
    pub fn stationary(at: Point) -> Self {
        Trajectory {
            initial: at,
            leg: None,
        }
    }

    pub fn current_leg(&self) -> Option<&MotionLeg> {
        self.leg.as_ref()
    }

    pub fn position_at(&self, t: SimTime) -> Point {
        match &self.leg {
            Some(leg) => leg.position_at(t),
            None => self.initial,
        }
    }

    /// Starts a new leg from wherever the node is at `t`; returns its arrival.
    pub fn advance(&mut self, params: &WaypointParams, t: SimTime, rng: &mut RngStream) -> SimTime {
        let here = self.position_at(t);
        let leg = params.next_leg(here, t, rng);
        let arrive = leg.arrive;
        self.leg = Some(leg);
        arrive
    }
}
