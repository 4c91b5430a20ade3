//! TCP conversations carrying TLS handshakes, for fixtures and demos.

use std::net::SocketAddr;

use crate::capture::Direction;
use crate::codec::put_u24;
use crate::tls::{encode_records, ClientHello, ContentType, HandshakeType, ProtocolVersion, ServerHello};

use super::packet::{SynthPacket, TcpFlags, Transport};

pub const DEFAULT_MSS: usize = 1460;

/// A TCP connection written packet by packet: handshake on creation, then
/// MSS-sized data segments with correct sequence numbers.
#[derive(Debug, Clone)]
pub struct TcpConversation {
    client: SocketAddr,
    server: SocketAddr,
    client_next: u32,
    server_next: u32,
    mss: usize,
    packets: Vec<SynthPacket>,
}

impl TcpConversation {
    /// Open with SYN, SYN-ACK, ACK at `ts`, 1 ms apart.
    pub fn open(client: SocketAddr, server: SocketAddr, ts: f64, client_isn: u32, server_isn: u32) -> Self {
        let mut conv = Self {
            client,
            server,
            client_next: client_isn.wrapping_add(1),
            server_next: server_isn.wrapping_add(1),
            mss: DEFAULT_MSS,
            packets: Vec::new(),
        };
        conv.raw(ts, Direction::Up, client_isn, TcpFlags::SYN, Vec::new());
        conv.raw(ts + 0.001, Direction::Down, server_isn, TcpFlags::SYN_ACK, Vec::new());
        conv.raw(ts + 0.002, Direction::Up, conv.client_next, TcpFlags::ACK, Vec::new());
        conv
    }

    pub fn with_mss(mut self, mss: usize) -> Self {
        self.mss = mss.max(1);
        self
    }

    fn raw(&mut self, ts: f64, dir: Direction, seq: u32, flags: TcpFlags, payload: Vec<u8>) {
        let (src, dst, ack) = match dir {
            Direction::Up => (self.client, self.server, self.server_next),
            Direction::Down => (self.server, self.client, self.client_next),
        };
        let ack = if flags.ack { ack } else { 0 };
        self.packets.push(SynthPacket { ts, src, dst, transport: Transport::Tcp { seq, ack, flags }, payload });
    }

    /// Send `data` in MSS-sized segments with timestamps spread evenly over
    /// `[start, end]`.
    pub fn send(&mut self, dir: Direction, data: &[u8], start: f64, end: f64) {
        let chunks: Vec<&[u8]> = data.chunks(self.mss).collect();
        let step = if chunks.len() > 1 { (end - start) / (chunks.len() - 1) as f64 } else { 0.0 };
        for (i, chunk) in chunks.iter().enumerate() {
            let next = match dir {
                Direction::Up => &mut self.client_next,
                Direction::Down => &mut self.server_next,
            };
            let seq = *next;
            *next = next.wrapping_add(chunk.len() as u32);
            self.raw(start + step * i as f64, dir, seq, TcpFlags::PSH_ACK, chunk.to_vec());
        }
    }

    /// FIN from the client, FIN from the server, final ACK.
    pub fn close(&mut self, ts: f64) {
        let seq = self.client_next;
        self.raw(ts, Direction::Up, seq, TcpFlags::FIN_ACK, Vec::new());
        self.client_next = seq.wrapping_add(1);
        let seq = self.server_next;
        self.raw(ts + 0.001, Direction::Down, seq, TcpFlags::FIN_ACK, Vec::new());
        self.server_next = seq.wrapping_add(1);
        let seq = self.client_next;
        self.raw(ts + 0.002, Direction::Up, seq, TcpFlags::ACK, Vec::new());
    }

    pub fn into_packets(self) -> Vec<SynthPacket> {
        self.packets
    }
}

/// One UDP datagram per element of `payloads`, alternating client and server.
pub fn udp_exchange(client: SocketAddr, server: SocketAddr, start: f64, payloads: &[Vec<u8>]) -> Vec<SynthPacket> {
    payloads
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let (src, dst) = if i % 2 == 0 { (client, server) } else { (server, client) };
            SynthPacket { ts: start + 0.01 * i as f64, src, dst, transport: Transport::Udp, payload: p.clone() }
        })
        .collect()
}

fn handshake_msg(msg_type: u8, body: &[u8]) -> Vec<u8> {
    let mut out = vec![msg_type];
    put_u24(&mut out, body.len() as u32);
    out.extend_from_slice(body);
    out
}

/// A Certificate message holding one dummy DER blob.
pub fn certificate_message(cert_len: usize) -> Vec<u8> {
    let cert = vec![0x30; cert_len];
    let mut entry = Vec::new();
    put_u24(&mut entry, cert.len() as u32);
    entry.extend_from_slice(&cert);
    let mut body = Vec::new();
    put_u24(&mut body, entry.len() as u32);
    body.extend_from_slice(&entry);
    handshake_msg(HandshakeType::CERTIFICATE, &body)
}

/// Deterministic filler for encrypted payloads.
fn filler(len: usize, seed: u8) -> Vec<u8> {
    (0..len).map(|i| (i as u8).wrapping_mul(31).wrapping_add(seed)).collect()
}

/// Parameters of one synthetic TLS connection.
#[derive(Debug, Clone)]
pub struct TlsFlowSpec {
    pub client: SocketAddr,
    pub server: SocketAddr,
    pub start: f64,
    /// Seconds from SYN to FIN.
    pub duration: f64,
    pub hello: ClientHello,
    /// Version the server selects.
    pub server_version: ProtocolVersion,
    /// Application data after the handshake, in bytes of record payload.
    pub app_bytes_up: usize,
    pub app_bytes_down: usize,
    pub client_isn: u32,
    pub server_isn: u32,
}

impl TlsFlowSpec {
    pub fn new(client: SocketAddr, server: SocketAddr, hello: ClientHello) -> Self {
        let server_version = if hello.tls_version().is_tls13() { ProtocolVersion::TLS1_3 } else { ProtocolVersion::TLS1_2 };
        Self {
            client,
            server,
            start: 0.0,
            duration: 1.0,
            hello,
            server_version,
            app_bytes_up: 512,
            app_bytes_down: 8 * 1024,
            client_isn: 1_000,
            server_isn: 5_000_000,
        }
    }

    /// Packets of the whole connection: TCP open, TLS handshake, application
    /// data spread over the duration, TCP close.
    pub fn packets(&self) -> Vec<SynthPacket> {
        let t0 = self.start;
        let end = self.start + self.duration.max(0.02);
        let mut conv = TcpConversation::open(self.client, self.server, t0, self.client_isn, self.server_isn);
        conv.send(Direction::Up, &self.hello.to_record_bytes(), t0 + 0.003, t0 + 0.003);

        let sh = ServerHello::for_version(self.server_version, self.hello.cipher_suites().first().copied().unwrap_or(0x1301));
        let mut flight = sh.to_bytes();
        if self.server_version < ProtocolVersion::TLS1_3 {
            flight.extend(certificate_message(900));
            flight.extend(handshake_msg(14, &[]));
        }
        let mut down = encode_records(ContentType::Handshake, ProtocolVersion::TLS1_2, &flight);
        down.extend(encode_records(ContentType::ChangeCipherSpec, ProtocolVersion::TLS1_2, &[1]));
        conv.send(Direction::Down, &down, t0 + 0.010, t0 + 0.011);

        let mut up = encode_records(ContentType::ChangeCipherSpec, ProtocolVersion::TLS1_2, &[1]);
        up.extend(encode_records(ContentType::ApplicationData, ProtocolVersion::TLS1_2, &filler(self.app_bytes_up.max(1), 7)));
        conv.send(Direction::Up, &up, t0 + 0.012, t0 + 0.013);

        if self.app_bytes_down > 0 {
            let data = encode_records(ContentType::ApplicationData, ProtocolVersion::TLS1_2, &filler(self.app_bytes_down, 3));
            conv.send(Direction::Down, &data, t0 + 0.015, end - 0.005);
        }
        conv.close(end - 0.002);
        conv.into_packets()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequence_numbers_are_contiguous() {
        let c: SocketAddr = "10.0.0.2:40000".parse().unwrap();
        let s: SocketAddr = "10.0.0.1:443".parse().unwrap();
        let mut conv = TcpConversation::open(c, s, 1.0, 100, 900).with_mss(4);
        conv.send(Direction::Up, b"abcdefghij", 2.0, 3.0);
        let pkts = conv.into_packets();
        assert_eq!(pkts.len(), 6);
        let seqs: Vec<u32> = pkts[3..]
            .iter()
            .map(|p| match p.transport {
                Transport::Tcp { seq, .. } => seq,
                Transport::Udp => unreachable!(),
            })
            .collect();
        assert_eq!(seqs, [101, 105, 109]);
        assert_eq!(pkts[5].ts, 3.0);
        assert_eq!(pkts[5].payload, b"ij");
    }
}
