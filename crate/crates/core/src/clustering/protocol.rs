//! Beacon-driven cluster maintenance run by every node.

use std::collections::BTreeMap;

use super::{is_backbone, Anchor, ClusterRole, Mode, RoleKind};
use crate::ids::NodeId;
use crate::sim::SimTime;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClusterParams {
    pub beacon_interval: SimTime,
    pub neighbor_timeout: SimTime,
    pub stability_window: SimTime,
    /// Nodes stay undecided until this time so first beacons can arrive.
    pub formation_delay: SimTime,
}

impl Default for ClusterParams {
    fn default() -> Self {
        ClusterParams {
            beacon_interval: SimTime::from_millis(1_000),
            neighbor_timeout: SimTime::from_millis(3_000),
            stability_window: SimTime::from_millis(2_000),
            formation_delay: SimTime::from_millis(2_000),
        }
    }
}

/// Periodic hello carrying the sender's clustering state. Role-change
/// announcements use the same body with `role_change` set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Beacon {
    pub sender: NodeId,
    pub seq: u32,
    pub role: ClusterRole,
    pub anchor: Anchor,
    pub boundary: bool,
    /// Chosen cluster-head-gateway, advertised by formation heads in CHG mode.
    pub designee: Option<NodeId>,
    pub role_change: bool,
}

impl Beacon {
    pub const WIRE_BYTES: u32 = 12;
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NeighborRecord {
    pub last_heard: SimTime,
    pub beacon: Beacon,
}

#[derive(Clone, Debug, Default)]
pub struct NeighborTable {
    entries: BTreeMap<NodeId, NeighborRecord>,
}

impl NeighborTable {
    /// Records a beacon. Out-of-order (older seq) beacons only refresh liveness.
    pub fn update(&mut self, now: SimTime, beacon: Beacon) {
        match self.entries.get_mut(&beacon.sender) {
            Some(rec) if rec.beacon.seq > beacon.seq => rec.last_heard = now,
            Some(rec) => {
                rec.last_heard = now;
                rec.beacon = beacon;
            }
            None => {
                self.entries.insert(
                    beacon.sender,
                    NeighborRecord {
                        last_heard: now,
                        beacon,
                    },
                );
            }
        }
    }

    /// Drops entries not heard from for longer than `timeout`; returns them.
    pub fn expire(&mut self, now: SimTime, timeout: SimTime) -> Vec<NodeId> {
        let stale: Vec<NodeId> = self
            .entries
            .iter()
            .filter(|(_, r)| now.saturating_sub(r.last_heard) > timeout)
            .map(|(&id, _)| id)
            .collect();
        for id in &stale {
            self.entries.remove(id);
        }
        stale
    }

    pub fn get(&self, id: NodeId) -> Option<&NeighborRecord> {
        self.entries.get(&id)
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.entries.contains_key(&id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Ascending by neighbor id.
    pub fn iter(&self) -> impl Iterator<Item = (NodeId, &NeighborRecord)> {
        self.entries.iter().map(|(&k, v)| (k, v))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RoleChange {
    pub node: NodeId,
    pub old: ClusterRole,
    pub new: ClusterRole,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Election {
    Elected,
    /// Kind fixed by scenario configuration; membership follows the
    /// lowest-id pinned head in range.
    Pinned(RoleKind),
}

/// Hysteresis slot: a proposed value and since when it has been proposed.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Pending<T> {
    value: T,
    since: SimTime,
}

fn settle<T: Copy + PartialEq>(
    current: T,
    desired: T,
    pending: &mut Option<Pending<T>>,
    now: SimTime,
    window: SimTime,
) -> Option<T> {
    if desired == current {
        *pending = None;
        return None;
    }
    match pending {
        Some(p) if p.value == desired => {
            if now.saturating_sub(p.since) >= window {
                *pending = None;
                Some(desired)
            } else {
                None
            }
        }
        _ => {
            *pending = Some(Pending {
                value: desired,
                since: now,
            });
            if window == SimTime::ZERO {
                *pending = None;
                Some(desired)
            } else {
                None
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct ClusterAgent {
    id: NodeId,
    mode: Mode,
    params: ClusterParams,
    election: Election,
    anchor: Anchor,
    boundary: bool,
    designee: Option<NodeId>,
    role: ClusterRole,
    pending_anchor: Option<Pending<Anchor>>,
    pending_role: Option<Pending<ClusterRole>>,
    beacon_seq: u32,
    table: NeighborTable,
}

impl ClusterAgent {
    pub fn elected(id: NodeId, mode: Mode, params: ClusterParams) -> Self {
        ClusterAgent {
            id,
            mode,
            params,
            election: Election::Elected,
            anchor: Anchor::Undecided,
            boundary: false,
            designee: None,
            role: ClusterRole::UNAFFILIATED,
            pending_anchor: None,
            pending_role: None,
            beacon_seq: 0,
            table: NeighborTable::default(),
        }
    }

    pub fn pinned(id: NodeId, mode: Mode, params: ClusterParams, kind: RoleKind) -> Self {
        let role = if kind.is_head() {
            ClusterRole::new(kind, id)
        } else {
            ClusterRole {
                kind,
                cluster_id: None,
            }
        };
        ClusterAgent {
            election: Election::Pinned(kind),
            anchor: if kind.is_head() {
                Anchor::Head
            } else {
                Anchor::Undecided
            },
            role,
            ..ClusterAgent::elected(id, mode, params)
        }
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn role(&self) -> ClusterRole {
        self.role
    }

    pub fn anchor(&self) -> Anchor {
        self.anchor
    }

    pub fn is_backbone(&self) -> bool {
        is_backbone(self.role.kind, self.mode)
    }

    pub fn neighbors(&self) -> &NeighborTable {
        &self.table
    }

    /// True when nothing is waiting out the stability window.
    pub fn is_settled(&self) -> bool {
        self.pending_anchor.is_none() && self.pending_role.is_none()
    }

    pub fn on_beacon(&mut self, now: SimTime, beacon: Beacon) {
        debug_assert_ne!(beacon.sender, self.id);
        self.table.update(now, beacon);
    }

    pub fn expire_neighbors(&mut self, now: SimTime) -> Vec<NodeId> {
        self.table.expire(now, self.params.neighbor_timeout)
    }

    pub fn make_beacon(&mut self, role_change: bool) -> Beacon {
        self.beacon_seq += 1;
        Beacon {
            sender: self.id,
            seq: self.beacon_seq,
            role: self.role,
            anchor: self.anchor,
            boundary: self.boundary,
            designee: self.designee,
            role_change,
        }
    }

    /// Re-evaluates this node's role from its neighbor table. Returns a
    /// change that must be announced, if one took effect.
    pub fn maintain(&mut self, now: SimTime) -> Option<RoleChange> {
        match self.election {
            Election::Pinned(kind) => {
                self.maintain_pinned(kind);
                None
            }
            Election::Elected => self.maintain_elected(now),
        }
    }

    fn maintain_pinned(&mut self, kind: RoleKind) {
        if kind.is_head() {
            return;
        }
        let head = self
            .table
            .iter()
            .find(|(_, r)| r.beacon.role.kind.is_head())
            .map(|(id, _)| id);
        if head.is_some() {
            self.role.cluster_id = head;
        }
    }

    fn maintain_elected(&mut self, now: SimTime) -> Option<RoleChange> {
        let window = self.params.stability_window;

        let desired = self.desired_anchor(now);
        if self.anchor == Anchor::Undecided {
            self.anchor = desired;
            self.pending_anchor = None;
        } else if let Some(a) = settle(self.anchor, desired, &mut self.pending_anchor, now, window)
        {
            self.anchor = a;
        }

        self.boundary = self.compute_boundary();
        self.designee = match (self.mode, self.anchor) {
            (Mode::Chg, Anchor::Head) => Some(self.compute_designee()),
            _ => None,
        };

        let desired = self.desired_role();
        if self.role.cluster_id.is_none() {
            // first decision: announced by the next periodic beacon
            self.role = desired;
            self.pending_role = None;
            return None;
        }
        let old = self.role;
        settle(self.role, desired, &mut self.pending_role, now, window).map(|new| {
            self.role = new;
            RoleChange {
                node: self.id,
                old,
                new,
            }
        })
    }

    fn desired_anchor(&self, now: SimTime) -> Anchor {
        if now < self.params.formation_delay {
            return self.anchor;
        }
        let mut lowest_head = None;
        for (id, rec) in self.table.iter() {
            if id >= self.id {
                break;
            }
            match rec.beacon.anchor {
                Anchor::Undecided => return self.anchor,
                Anchor::Head if lowest_head.is_none() => lowest_head = Some(id),
                _ => {}
            }
        }
        match lowest_head {
            Some(h) => Anchor::Member(h),
            None => Anchor::Head,
        }
    }

    fn compute_boundary(&self) -> bool {
        let Some(mine) = self.anchor.cluster_of(self.id) else {
            return false;
        };
        self.table
            .iter()
            .any(|(id, rec)| rec.beacon.anchor.cluster_of(id).is_some_and(|c| c != mine))
    }

    fn compute_designee(&self) -> NodeId {
        let members = self
            .table
            .iter()
            .filter(|(_, rec)| rec.beacon.anchor == Anchor::Member(self.id) && rec.beacon.boundary);
        let own = self.boundary.then_some(self.id);
        members
            .map(|(id, _)| id)
            .chain(own)
            .min()
            .unwrap_or(self.id)
    }

    fn desired_role(&self) -> ClusterRole {
        let me = self.id;
        match (self.mode, self.anchor) {
            (_, Anchor::Undecided) => ClusterRole::UNAFFILIATED,
            (Mode::ChG, Anchor::Head) => ClusterRole::new(RoleKind::ClusterHead, me),
            (Mode::ChG, Anchor::Member(h)) if self.boundary => {
                ClusterRole::new(RoleKind::Gateway, h)
            }
            (Mode::ChG, Anchor::Member(h)) => ClusterRole::new(RoleKind::Ordinary, h),
            (Mode::Chg, Anchor::Head) => match self.designee {
                Some(d) if d != me => ClusterRole::new(RoleKind::Ordinary, d),
                _ => ClusterRole::new(RoleKind::ClusterHeadGateway, me),
            },
            (Mode::Chg, Anchor::Member(h)) => {
                let advertised = self
                    .table
                    .get(h)
                    .filter(|rec| rec.beacon.anchor == Anchor::Head)
                    .and_then(|rec| rec.beacon.designee);
                match advertised {
                    Some(d) if d == me => ClusterRole::new(RoleKind::ClusterHeadGateway, me),
                    Some(d) => ClusterRole::new(RoleKind::Ordinary, d),
                    None => ClusterRole::new(RoleKind::Ordinary, h),
                }
            }
        }
    }
}
