//! Stabilized cluster assignment of a static graph.

use super::{Anchor, ClusterRole, Mode, RoleKind};
use crate::ids::NodeId;
use crate::mobility::Point;
use crate::radio::RadioParams;

/// Undirected graph over nodes `1..=n` with sorted adjacency lists.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Topology {
    adj: Vec<Vec<NodeId>>,
}

impl Topology {
    pub fn empty(node_count: usize) -> Self {
        Topology {
            adj: vec![Vec::new(); node_count],
        }
    }

    pub fn from_edges(node_count: usize, edges: &[(NodeId, NodeId)]) -> Self {
        let mut t = Topology::empty(node_count);
        for &(a, b) in edges {
            t.add_edge(a, b);
        }
        t
    }

    /// Unit-disk graph of a position snapshot.
    pub fn from_positions(positions: &[Point], radio: &RadioParams) -> Self {
        let mut t = Topology::empty(positions.len());
        for i in 0..positions.len() {
            for j in (i + 1)..positions.len() {
                if radio.in_range(positions[i], positions[j]) {
                    t.add_edge(NodeId::from_index(i), NodeId::from_index(j));
                }
            }
        }
        t
    }

    pub fn add_edge(&mut self, a: NodeId, b: NodeId) {
        assert_ne!(a, b, "self loops are not links");
        for (x, y) in [(a, b), (b, a)] {
            let list = &mut self.adj[x.index()];
            if let Err(pos) = list.binary_search(&y) {
                list.insert(pos, y);
            }
        }
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        (0..self.adj.len()).map(NodeId::from_index)
    }

    pub fn neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.adj[v.index()]
    }

    pub fn has_edge(&self, a: NodeId, b: NodeId) -> bool {
        self.adj[a.index()].binary_search(&b).is_ok()
    }

    /// Hop distances from `src` (`None` = unreachable).
    pub fn bfs_hops(&self, src: NodeId) -> Vec<Option<u32>> {
        let mut dist = vec![None; self.adj.len()];
        let mut queue = std::collections::VecDeque::new();
        dist[src.index()] = Some(0);
        queue.push_back(src);
        while let Some(v) = queue.pop_front() {
            let d = dist[v.index()].expect("queued nodes have a distance");
            for &u in self.neighbors(v) {
                if dist[u.index()].is_none() {
                    dist[u.index()] = Some(d + 1);
                    queue.push_back(u);
                }
            }
        }
        dist
    }

    pub fn is_connected(&self) -> bool {
        self.adj.is_empty()
            || self
                .bfs_hops(NodeId::from_index(0))
                .iter()
                .all(Option::is_some)
    }
}

/// Greedy lowest-ID formation: visiting nodes in ascending id order, a node
/// joins its lowest-id neighboring head if it has one, otherwise it becomes a
/// head.
pub fn lowest_id_formation(topo: &Topology) -> Vec<Anchor> {
    let mut anchors = vec![Anchor::Undecided; topo.node_count()];
    for v in topo.nodes() {
        let head = topo
            .neighbors(v)
            .iter()
            .copied()
            .find(|u| anchors[u.index()] == Anchor::Head);
        anchors[v.index()] = match head {
            Some(h) => Anchor::Member(h),
            None => Anchor::Head,
        };
    }
    anchors
}

/// Whether each node has a neighbor in a different formation cluster.
pub fn boundary_flags(topo: &Topology, anchors: &[Anchor]) -> Vec<bool> {
    topo.nodes()
        .map(|v| {
            let Some(mine) = anchors[v.index()].cluster_of(v) else {
                return false;
            };
            topo.neighbors(v)
                .iter()
                .any(|&u| anchors[u.index()].cluster_of(u).is_some_and(|c| c != mine))
        })
        .collect()
}

/// For each formation head, the member chosen as cluster-head-gateway.
pub fn chg_designees(
    topo: &Topology,
    anchors: &[Anchor],
    boundary: &[bool],
) -> Vec<Option<NodeId>> {
    let mut designee: Vec<Option<NodeId>> = vec![None; topo.node_count()];
    // Nodes are visited in ascending order, so the first boundary member seen
    // for a cluster is its lowest-id one.
    for v in topo.nodes() {
        if let Some(h) = anchors[v.index()].cluster_of(v) {
            if boundary[v.index()] && designee[h.index()].is_none() {
                designee[h.index()] = Some(v);
            }
        }
    }
    for v in topo.nodes() {
        if anchors[v.index()] == Anchor::Head && designee[v.index()].is_none() {
            designee[v.index()] = Some(v);
        }
    }
    designee
}

/// Final per-node roles in `mode`.
pub fn classify(topo: &Topology, anchors: &[Anchor], mode: Mode) -> Vec<ClusterRole> {
    let boundary = boundary_flags(topo, anchors);
    match mode {
        Mode::ChG => topo
            .nodes()
            .map(|v| match anchors[v.index()] {
                Anchor::Undecided => ClusterRole::UNAFFILIATED,
                Anchor::Head => ClusterRole::new(RoleKind::ClusterHead, v),
                Anchor::Member(h) if boundary[v.index()] => ClusterRole::new(RoleKind::Gateway, h),
                Anchor::Member(h) => ClusterRole::new(RoleKind::Ordinary, h),
            })
            .collect(),
        Mode::Chg => {
            let designee = chg_designees(topo, anchors, &boundary);
            topo.nodes()
                .map(|v| match anchors[v.index()].cluster_of(v) {
                    None => ClusterRole::UNAFFILIATED,
                    Some(h) => {
                        let d = designee[h.index()].expect("every head has a designee");
                        if d == v {
                            ClusterRole::new(RoleKind::ClusterHeadGateway, v)
                        } else {
                            ClusterRole::new(RoleKind::Ordinary, d)
                        }
                    }
                })
                .collect()
        }
    }
}

pub fn form_clusters(topo: &Topology, mode: Mode) -> Vec<ClusterRole> {
    classify(topo, &lowest_id_formation(topo), mode)
}

pub fn backbone_size(roles: &[ClusterRole], mode: Mode) -> usize {
    roles
        .iter()
        .filter(|r| super::is_backbone(r.kind, mode))
        .count()
}
