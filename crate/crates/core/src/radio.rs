//! Unit-disk propagation model.

use std::collections::BTreeMap;

use crate::error::SimError;
use crate::ids::NodeId;
use crate::mobility::Point;
use crate::sim::SimTime;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadioParams {
    /// Meters.
    pub tx_range: f64,
    /// Meters per second.
    pub propagation_speed: f64,
    /// Bits per second.
    pub bitrate: f64,
}

impl Default for RadioParams {
    fn default() -> Self {
        RadioParams {
            tx_range: 250.0,
            propagation_speed: 3.0e8,
            bitrate: 2.0e6,
        }
    }
}

impl RadioParams {
    pub fn in_range(&self, a: Point, b: Point) -> bool {
        a.distance(b) <= self.tx_range
    }

    /// Nodes within range of `sender`, ascending by id. `positions[i]` is the
    /// position of the node with index `i`.
    pub fn receivers_of(&self, sender: NodeId, positions: &[Point]) -> Vec<NodeId> {
        let origin = positions[sender.index()];
        let cell = self.tx_range.max(f64::MIN_POSITIVE);
        let key = |p: Point| ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64);

        let mut grid: BTreeMap<(i64, i64), Vec<usize>> = BTreeMap::new();
        for (i, p) in positions.iter().enumerate() {
            grid.entry(key(*p)).or_default().push(i);
        }
        let (cx, cy) = key(origin);
        let mut out = Vec::new();
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(bucket) = grid.get(&(cx + dx, cy + dy)) {
                    out.extend(
                        bucket
                            .iter()
                            .filter(|&&i| {
                                i != sender.index() && self.in_range(origin, positions[i])
                            })
                            .map(|&i| NodeId::from_index(i)),
                    );
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Time on air for a frame of `bytes` (headers included), rounded up to
    /// the next microsecond.
    pub fn airtime(&self, bytes: u32) -> Result<SimTime, SimError> {
        if bytes == 0 {
            return Err(SimError::EmptyFrame);
        }
        let us = (bytes as f64 * 8.0 / self.bitrate * 1e6).ceil();
        Ok(SimTime::from_micros(us as u64))
    }

    pub fn propagation_delay(&self, distance: f64) -> SimTime {
        SimTime::from_secs_f64(distance / self.propagation_speed)
    }
}
