//! Link, network and transport header encoding for generated packets.

use std::net::{IpAddr, SocketAddr};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TcpFlags {
    pub syn: bool,
    pub ack: bool,
    pub fin: bool,
    pub rst: bool,
    pub psh: bool,
}

impl TcpFlags {
    pub const SYN: Self = Self { syn: true, ack: false, fin: false, rst: false, psh: false };
    pub const SYN_ACK: Self = Self { syn: true, ack: true, fin: false, rst: false, psh: false };
    pub const ACK: Self = Self { syn: false, ack: true, fin: false, rst: false, psh: false };
    pub const PSH_ACK: Self = Self { syn: false, ack: true, fin: false, rst: false, psh: true };
    pub const FIN_ACK: Self = Self { syn: false, ack: true, fin: true, rst: false, psh: false };

    fn bits(self) -> u8 {
        u8::from(self.fin) | u8::from(self.syn) << 1 | u8::from(self.rst) << 2 | u8::from(self.psh) << 3
            | u8::from(self.ack) << 4
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Transport {
    Tcp { seq: u32, ack: u32, flags: TcpFlags },
    Udp,
}

/// One generated packet, before link-layer framing.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthPacket {
    pub ts: f64,
    pub src: SocketAddr,
    pub dst: SocketAddr,
    pub transport: Transport,
    pub payload: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkLayer {
    Ethernet,
    RawIp,
}

impl LinkLayer {
    pub fn linktype(self) -> u16 {
        match self {
            LinkLayer::Ethernet => 1,
            LinkLayer::RawIp => 101,
        }
    }
}

fn ipv4_checksum(header: &[u8]) -> u16 {
    let mut sum: u32 = header.chunks(2).map(|c| u32::from(u16::from_be_bytes([c[0], c[1]]))).sum();
    while sum > 0xffff {
        sum = (sum & 0xffff) + (sum >> 16);
    }
    !(sum as u16)
}

impl SynthPacket {
    fn transport_bytes(&self) -> (u8, Vec<u8>) {
        let mut out = Vec::with_capacity(20 + self.payload.len());
        out.extend_from_slice(&self.src.port().to_be_bytes());
        out.extend_from_slice(&self.dst.port().to_be_bytes());
        match &self.transport {
            Transport::Tcp { seq, ack, flags } => {
                out.extend_from_slice(&seq.to_be_bytes());
                out.extend_from_slice(&ack.to_be_bytes());
                out.push(5 << 4);
                out.push(flags.bits());
                out.extend_from_slice(&65535u16.to_be_bytes());
                out.extend_from_slice(&[0, 0, 0, 0]);
                out.extend_from_slice(&self.payload);
                (6, out)
            }
            Transport::Udp => {
                out.extend_from_slice(&((8 + self.payload.len()) as u16).to_be_bytes());
                out.extend_from_slice(&[0, 0]);
                out.extend_from_slice(&self.payload);
                (17, out)
            }
        }
    }

    /// The IP datagram carrying this packet.
    pub fn ip_bytes(&self) -> Vec<u8> {
        let (proto, l4) = self.transport_bytes();
        match (self.src.ip(), self.dst.ip()) {
            (IpAddr::V4(s), IpAddr::V4(d)) => {
                let mut h = Vec::with_capacity(20 + l4.len());
                h.extend_from_slice(&[0x45, 0]);
                h.extend_from_slice(&((20 + l4.len()) as u16).to_be_bytes());
                h.extend_from_slice(&[0, 0, 0x40, 0, 64, proto, 0, 0]);
                h.extend_from_slice(&s.octets());
                h.extend_from_slice(&d.octets());
                let sum = ipv4_checksum(&h);
                h[10..12].copy_from_slice(&sum.to_be_bytes());
                h.extend_from_slice(&l4);
                h
            }
            (IpAddr::V6(s), IpAddr::V6(d)) => {
                let mut h = Vec::with_capacity(40 + l4.len());
                h.extend_from_slice(&[0x60, 0, 0, 0]);
                h.extend_from_slice(&(l4.len() as u16).to_be_bytes());
                h.extend_from_slice(&[proto, 64]);
                h.extend_from_slice(&s.octets());
                h.extend_from_slice(&d.octets());
                h.extend_from_slice(&l4);
                h
            }
            _ => panic!("mixed address families in one packet"),
        }
    }

    pub fn frame(&self, link: LinkLayer) -> Vec<u8> {
        let ip = self.ip_bytes();
        match link {
            LinkLayer::RawIp => ip,
            LinkLayer::Ethernet => {
                let ethertype: u16 = if self.src.is_ipv4() { 0x0800 } else { 0x86dd };
                let mut f = Vec::with_capacity(14 + ip.len());
                f.extend_from_slice(&[0x02, 0, 0, 0, 0, 0x02]);
                f.extend_from_slice(&[0x02, 0, 0, 0, 0, 0x01]);
                f.extend_from_slice(&ethertype.to_be_bytes());
                f.extend_from_slice(&ip);
                f
            }
        }
    }
}
