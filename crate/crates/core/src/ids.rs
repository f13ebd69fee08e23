use std::fmt;
use std::num::NonZeroU16;
use std::str::FromStr;

/// Node identifier. Ids are 1-based (`1..=node_count`) as in scenario files;
/// `index()` gives the 0-based slot used for per-node vectors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(NonZeroU16);

impl NodeId {
    pub fn new(id: u16) -> Option<NodeId> {
        NonZeroU16::new(id).map(NodeId)
    }

    pub fn from_index(index: usize) -> NodeId {
        let id = u16::try_from(index + 1).expect("node index out of range");
        NodeId(NonZeroU16::new(id).expect("index + 1 is nonzero"))
    }

    pub fn get(self) -> u16 {
        self.0.get()
    }

    pub fn index(self) -> usize {
        self.0.get() as usize - 1
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for NodeId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let raw: u16 = s
            .trim()
            .parse()
            .map_err(|_| format!("invalid node id {s:?}"))?;
        NodeId::new(raw).ok_or_else(|| "node ids start at 1".to_string())
    }
}

/// Shorthand used throughout tests.
pub fn nid(id: u16) -> NodeId {
    NodeId::new(id).expect("node ids start at 1")
}
