//! Lowest-ID clustering in two architectures.
//!
//! * `ChG`: cluster heads plus separate gateway members.
//! * `Chg`: after lowest-ID formation, each cluster hands its head role to
//!   the lowest-id member that borders another cluster; that node is the
//!   merged cluster-head-gateway and the only backbone node of its cluster.
//!
//! [`formation`] computes the stabilized assignment of a static graph in one
//! pass. [`protocol`] is the beacon-driven version that runs inside the
//! simulator and converges to the same assignment on static topologies.

pub mod formation;
pub mod protocol;

use std::fmt;
use std::str::FromStr;

use crate::ids::NodeId;

pub use formation::{form_clusters, lowest_id_formation, Topology};
pub use protocol::{
    Beacon, ClusterAgent, ClusterParams, NeighborRecord, NeighborTable, RoleChange,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    /// Separate cluster heads and gateways.
    ChG,
    /// Merged cluster-head-gateway.
    Chg,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::ChG => "CH_G",
            Mode::Chg => "CHG",
        })
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "CH_G" | "CH&G" | "ch_g" => Ok(Mode::ChG),
            "CHG" | "chg" => Ok(Mode::Chg),
            other => Err(format!("unknown mode {other:?} (expected CH_G or CHG)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RoleKind {
    Ordinary,
    Gateway,
    ClusterHead,
    ClusterHeadGateway,
}

impl RoleKind {
    pub fn token(self) -> &'static str {
        match self {
            RoleKind::Ordinary => "ORD",
            RoleKind::Gateway => "GW",
            RoleKind::ClusterHead => "CH",
            RoleKind::ClusterHeadGateway => "CHG",
        }
    }

    pub fn is_head(self) -> bool {
        matches!(self, RoleKind::ClusterHead | RoleKind::ClusterHeadGateway)
    }

    /// Whether this kind may appear in `mode`.
    pub fn allowed_in(self, mode: Mode) -> bool {
        match mode {
            Mode::ChG => self != RoleKind::ClusterHeadGateway,
            Mode::Chg => matches!(self, RoleKind::Ordinary | RoleKind::ClusterHeadGateway),
        }
    }
}

impl fmt::Display for RoleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for RoleKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "ORD" | "ordinary" => Ok(RoleKind::Ordinary),
            "GW" | "gateway" => Ok(RoleKind::Gateway),
            "CH" | "cluster_head" => Ok(RoleKind::ClusterHead),
            "CHG" | "cluster_head_gateway" => Ok(RoleKind::ClusterHeadGateway),
            other => Err(format!(
                "unknown role {other:?} (expected ORD, GW, CH or CHG)"
            )),
        }
    }
}

/// Role kind plus cluster membership. `cluster_id` is `None` only before a
/// node has joined any cluster.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ClusterRole {
    pub kind: RoleKind,
    pub cluster_id: Option<NodeId>,
}

impl ClusterRole {
    pub const UNAFFILIATED: ClusterRole = ClusterRole {
        kind: RoleKind::Ordinary,
        cluster_id: None,
    };

    pub fn new(kind: RoleKind, cluster_id: NodeId) -> Self {
        ClusterRole {
            kind,
            cluster_id: Some(cluster_id),
        }
    }
}

pub fn is_backbone(kind: RoleKind, mode: Mode) -> bool {
    match mode {
        Mode::ChG => matches!(kind, RoleKind::ClusterHead | RoleKind::Gateway),
        Mode::Chg => kind == RoleKind::ClusterHeadGateway,
    }
}

/// Lowest-ID formation state of a node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Anchor {
    Undecided,
    Head,
    Member(NodeId),
}

impl Anchor {
    /// Formation cluster of a node in this state.
    pub fn cluster_of(self, me: NodeId) -> Option<NodeId> {
        match self {
            Anchor::Undecided => None,
            Anchor::Head => Some(me),
            Anchor::Member(h) => Some(h),
        }
    }
}
