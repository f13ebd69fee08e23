//! Frames as they travel over the air.

use crate::aodv::ControlMsg;
use crate::clustering::Beacon;
use crate::ids::NodeId;
use crate::sim::SimTime;

/// MAC + IP + UDP header bytes carried by every frame.
pub const HEADER_BYTES: u32 = 58;

/// One CBR application packet.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DataPacket {
    pub flow: usize,
    pub seq: u32,
    pub src: NodeId,
    pub dst: NodeId,
    pub sent_at: SimTime,
    pub payload_bytes: u32,
    /// Hops travelled so far.
    pub hops: u8,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Payload {
    Data(DataPacket),
    Control(ControlMsg),
    Beacon(Beacon),
}

/// Coarse frame category used for overhead accounting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FrameClass {
    Data,
    Beacon,
    RoleChange,
    Rreq,
    Rrep,
    Rerr,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub sender: NodeId,
    /// `None` for broadcast.
    pub next_hop: Option<NodeId>,
    pub payload: Payload,
    /// Transmission attempts made so far, maintained by the MAC.
    pub attempts: u32,
}

impl Frame {
    pub fn unicast(sender: NodeId, next_hop: NodeId, payload: Payload) -> Self {
        Frame {
            sender,
            next_hop: Some(next_hop),
            payload,
            attempts: 0,
        }
    }

    pub fn broadcast(sender: NodeId, payload: Payload) -> Self {
        Frame {
            sender,
            next_hop: None,
            payload,
            attempts: 0,
        }
    }

    pub fn is_broadcast(&self) -> bool {
        self.next_hop.is_none()
    }

    pub fn body_bytes(&self) -> u32 {
        match &self.payload {
            Payload::Data(p) => p.payload_bytes,
            Payload::Control(m) => m.wire_bytes(),
            Payload::Beacon(_) => Beacon::WIRE_BYTES,
        }
    }

    pub fn size_bytes(&self) -> u32 {
        HEADER_BYTES + self.body_bytes()
    }

    /// Routing and clustering traffic, as opposed to application data.
    pub fn is_control(&self) -> bool {
        !matches!(self.payload, Payload::Data(_))
    }

    pub fn class(&self) -> FrameClass {
        match &self.payload {
            Payload::Data(_) => FrameClass::Data,
            Payload::Beacon(b) if b.role_change => FrameClass::RoleChange,
            Payload::Beacon(_) => FrameClass::Beacon,
            Payload::Control(ControlMsg::Rreq(_)) => FrameClass::Rreq,
            Payload::Control(ControlMsg::Rrep(_)) => FrameClass::Rrep,
            Payload::Control(ControlMsg::Rerr(_)) => FrameClass::Rerr,
        }
    }

    pub fn data(&self) -> Option<&DataPacket> {
        match &self.payload {
            Payload::Data(p) => Some(p),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aodv::Rerr;
    use crate::ids::nid;

    #[test]
    fn sizes_include_headers() {
        let data = Frame::unicast(
            nid(1),
            nid(2),
            Payload::Data(DataPacket {
                flow: 0,
                seq: 0,
                src: nid(1),
                dst: nid(2),
                sent_at: SimTime::ZERO,
                payload_bytes: 512,
                hops: 0,
            }),
        );
        assert_eq!(data.size_bytes(), 570);
        assert!(!data.is_control());

        let rerr = Frame::broadcast(
            nid(1),
            Payload::Control(ControlMsg::Rerr(Rerr {
                unreachable: vec![(nid(3), 1), (nid(4), 2)],
            })),
        );
        assert_eq!(rerr.size_bytes(), 58 + 20);
        assert!(rerr.is_broadcast());
        assert!(rerr.is_control());
    }
}
