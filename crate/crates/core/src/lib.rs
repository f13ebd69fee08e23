//! Deterministic discrete-event simulator for mobile ad hoc networks running
//! AODV over a clustered backbone. Two backbone modes are modelled: separate
//! cluster heads and gateways (`CH_G`), and combined cluster-head gateways
//! (`CHG`), which keep the flooding backbone smaller.
//!
//! Every run is a pure function of its scenario and master seed.

pub mod aodv;
pub mod clustering;
pub mod error;
pub mod frame;
pub mod harness;
pub mod ids;
pub mod mac;
pub mod mobility;
pub mod network;
pub mod radio;
pub mod report;
pub mod scenario;
pub mod sim;
pub mod traffic;

pub use clustering::{ClusterRole, Mode, RoleKind, Topology};
pub use error::{ConfigError, Error, Result, SimError};
pub use harness::{compare, sweep, ComparisonReport};
pub use ids::{nid, NodeId};
pub use mobility::{Point, Terrain};
pub use network::{simulate, RunOptions, RunOutcome, Simulation};
pub use radio::RadioParams;
pub use report::{Metric, RunReport, SweepTable, REPORT_HEADER};
pub use scenario::{Flooding, MobilityModel, ScenarioConfig};
pub use sim::{RngStream, Scheduler, SimTime, StreamId};
