use std::fmt;
use std::net::{IpAddr, SocketAddr};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transport {
    Tcp,
    Udp,
}

/// Which way a packet travels relative to a [`FlowKey`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    /// src → dst, i.e. initiator → responder once orientation is settled.
    Up,
    Down,
}

impl Direction {
    pub fn flip(self) -> Self {
        match self {
            Direction::Up => Direction::Down,
            Direction::Down => Direction::Up,
        }
    }
}

/// Five-tuple of a flow. `src` is the initiator: the SYN sender when one was
/// seen, otherwise the lower `address:port`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FlowKey {
    pub src_ip: IpAddr,
    pub src_port: u16,
    pub dst_ip: IpAddr,
    pub dst_port: u16,
    pub transport: Transport,
}

impl FlowKey {
    pub fn new(src: SocketAddr, dst: SocketAddr, transport: Transport) -> Self {
        Self { src_ip: src.ip(), src_port: src.port(), dst_ip: dst.ip(), dst_port: dst.port(), transport }
    }

    /// Address-ordered key for a packet from `src` to `dst`, plus the
    /// packet's direction relative to it.
    pub fn canonical(src: SocketAddr, dst: SocketAddr, transport: Transport) -> (Self, Direction) {
        if (src.ip(), src.port()) <= (dst.ip(), dst.port()) {
            (Self::new(src, dst, transport), Direction::Up)
        } else {
            (Self::new(dst, src, transport), Direction::Down)
        }
    }

    pub fn src(&self) -> SocketAddr {
        SocketAddr::new(self.src_ip, self.src_port)
    }

    pub fn dst(&self) -> SocketAddr {
        SocketAddr::new(self.dst_ip, self.dst_port)
    }

    pub fn reversed(&self) -> Self {
        Self::new(self.dst(), self.src(), self.transport)
    }
}

impl fmt::Display for FlowKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let proto = match self.transport {
            Transport::Tcp => "tcp",
            Transport::Udp => "udp",
        };
        write!(f, "{} -> {}/{}", self.src(), self.dst(), proto)
    }
}
