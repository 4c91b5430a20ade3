//! Per-direction TCP stream reconstruction and handshake extraction.

use std::collections::HashMap;

use crate::tls::{
    assess_privacy, parse_records, parse_records_resync, parse_server_hello, plaintext_handshake, ClientHello,
    HandshakeType, PrivacyAssessment, RecordScan, ServerHello, TlsVersion,
};

use super::{Direction, FlowKey, PacketEvent, Transport};

/// Bytes kept per direction for handshake parsing.
pub const DEFAULT_STREAM_CAP: usize = 64 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReassemblyConfig {
    pub stream_cap: usize,
}

impl Default for ReassemblyConfig {
    fn default() -> Self {
        Self { stream_cap: DEFAULT_STREAM_CAP }
    }
}

/// One bidirectional flow. `key.src` is the initiator.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowRecord {
    pub key: FlowKey,
    pub first_ts: f64,
    pub last_ts: f64,
    /// Payload bytes initiator → responder, retransmissions included.
    pub bytes_up: u64,
    pub bytes_down: u64,
    pub client_hello: Option<ClientHello>,
    pub server_hello: Option<ServerHello>,
    pub assessment: Option<PrivacyAssessment>,
    /// A sequence gap or a missing stream start cut handshake parsing short.
    pub truncated: bool,
}

impl FlowRecord {
    pub fn session_length(&self) -> f64 {
        self.last_ts - self.first_ts
    }

    pub fn total_bytes(&self) -> u64 {
        self.bytes_up + self.bytes_down
    }

    pub fn sni(&self) -> Option<&str> {
        self.client_hello.as_ref().and_then(ClientHello::sni)
    }

    pub fn ech_present(&self) -> bool {
        self.assessment.is_some_and(|a| a.ech_present)
    }

    /// Report label: a TLS version, `quic-opaque` for UDP, or `unknown`.
    pub fn tls_version_label(&self) -> &'static str {
        if self.key.transport == Transport::Udp {
            return "quic-opaque";
        }
        match (&self.assessment, &self.client_hello) {
            (Some(a), _) => a.effective_version.label(),
            (None, Some(ch)) => ch.tls_version().label(),
            (None, None) => TlsVersion::Unknown.label(),
        }
    }
}

#[derive(Debug, Default)]
struct HalfStream {
    /// Sequence number of this side's SYN.
    syn: Option<u32>,
    /// Lowest data sequence number seen, by serial-number arithmetic.
    low: Option<u32>,
    segments: Vec<(u32, Vec<u8>)>,
    bytes: u64,
}

impl HalfStream {
    fn base(&self) -> Option<u32> {
        self.syn.map(|s| s.wrapping_add(1)).or(self.low)
    }

    fn offset(base: u32, seq: u32) -> Option<usize> {
        let diff = seq.wrapping_sub(base) as i32;
        (diff >= 0).then_some(diff as usize)
    }

    fn push(&mut self, seq: u32, syn: bool, payload: &[u8], cap: usize) {
        self.bytes += payload.len() as u64;
        let data_seq = if syn { seq.wrapping_add(1) } else { seq };
        if syn {
            self.syn = Some(seq);
        }
        if payload.is_empty() {
            return;
        }
        if self.low.map_or(true, |low| (data_seq.wrapping_sub(low) as i32) < 0) {
            self.low = Some(data_seq);
        }
        let base = self.base().unwrap_or(data_seq);
        let keep = |seq: u32, len: usize| match Self::offset(base, seq) {
            Some(off) => off < cap,
            None => (seq.wrapping_add(len as u32).wrapping_sub(base) as i32) > 0,
        };
        if keep(data_seq, payload.len()) {
            self.segments.push((data_seq, payload.to_vec()));
        }
        self.segments.retain(|(s, d)| keep(*s, d.len()));
    }

    /// In-order bytes from the stream start up to the first hole, and whether
    /// a hole (or an unknown start) cut the stream short.
    fn assemble(&self, cap: usize) -> (Vec<u8>, bool) {
        let Some(base) = self.base() else { return (Vec::new(), false) };
        let mut pieces: Vec<(usize, &[u8])> = self
            .segments
            .iter()
            .filter_map(|(seq, data)| match Self::offset(base, *seq) {
                Some(off) => Some((off, data.as_slice())),
                None => {
                    let skip = base.wrapping_sub(*seq) as usize;
                    (skip < data.len()).then(|| (0, &data[skip..]))
                }
            })
            .collect();
        pieces.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.len().cmp(&a.1.len())).then(a.1.cmp(b.1)));
        let mut out = Vec::new();
        let mut gap = false;
        for (off, data) in pieces {
            if out.len() >= cap {
                break;
            }
            if off > out.len() {
                gap = true;
                break;
            }
            let end = (off + data.len()).min(cap);
            if end > out.len() {
                let from = out.len() - off;
                out.extend_from_slice(&data[from..end - off]);
            }
        }
        (out, gap || (self.syn.is_none() && self.bytes > 0))
    }
}

#[derive(Debug)]
struct FlowState {
    key: FlowKey,
    first_ts: f64,
    last_ts: f64,
    /// Indexed by [`Direction`] relative to the address-ordered key.
    halves: [HalfStream; 2],
    /// Direction whose sender opened the connection with a bare SYN.
    opener: Option<Direction>,
}

fn slot(d: Direction) -> usize {
    match d {
        Direction::Up => 0,
        Direction::Down => 1,
    }
}

/// Rebuild flows from packet events. The result does not depend on the order
/// of `events`; it is sorted by `first_ts`, then key.
pub fn reassemble_flows<I>(events: I, cfg: &ReassemblyConfig) -> Vec<FlowRecord>
where
    I: IntoIterator<Item = PacketEvent>,
{
    let mut flows: HashMap<FlowKey, FlowState> = HashMap::new();
    for ev in events {
        let state = flows.entry(ev.key).or_insert_with(|| FlowState {
            key: ev.key,
            first_ts: ev.ts,
            last_ts: ev.ts,
            halves: Default::default(),
            opener: None,
        });
        state.first_ts = state.first_ts.min(ev.ts);
        state.last_ts = state.last_ts.max(ev.ts);
        let half = &mut state.halves[slot(ev.direction)];
        match ev.tcp {
            Some(tcp) => {
                if tcp.syn && !tcp.ack {
                    // Simultaneous open is resolved toward the lower endpoint.
                    if state.opener.map_or(true, |o| ev.direction == Direction::Up && o == Direction::Down) {
                        state.opener = Some(ev.direction);
                    }
                }
                half.push(tcp.seq, tcp.syn, &ev.payload, cfg.stream_cap);
            }
            None => half.bytes += ev.payload.len() as u64,
        }
    }
    let mut out: Vec<FlowRecord> = flows.into_values().map(|s| finish(s, cfg)).collect();
    out.sort_by(|a, b| a.first_ts.total_cmp(&b.first_ts).then(a.key.cmp(&b.key)));
    out
}

fn scan(stream: &[u8], anchored: bool) -> Option<RecordScan> {
    if anchored {
        parse_records(stream).ok()
    } else {
        Some(parse_records_resync(stream))
    }
}

fn client_hello_in(scan: &RecordScan) -> Option<ClientHello> {
    let plain = plaintext_handshake(&scan.records);
    if plain.first() != Some(&HandshakeType::CLIENT_HELLO) {
        return None;
    }
    ClientHello::parse(&plain).ok()
}

fn finish(state: FlowState, cfg: &ReassemblyConfig) -> FlowRecord {
    let FlowState { key, first_ts, last_ts, halves: [a, b], opener } = state;
    let udp = key.transport == Transport::Udp;
    let (a_stream, a_cut) = a.assemble(cfg.stream_cap);
    let (b_stream, b_cut) = b.assemble(cfg.stream_cap);
    let a_scan = if udp { None } else { scan(&a_stream, a.syn.is_some()) };
    let b_scan = if udp { None } else { scan(&b_stream, b.syn.is_some()) };
    let a_hello = a_scan.as_ref().and_then(client_hello_in);

    let flipped = match opener {
        Some(d) => d == Direction::Down,
        None => a_hello.is_none() && b_scan.as_ref().and_then(client_hello_in).is_some(),
    };
    let (key, bytes_up, bytes_down, up, down, up_cut, down_cut) = if flipped {
        (key.reversed(), b.bytes, a.bytes, b_scan, a_scan, b_cut, a_cut)
    } else {
        (key, a.bytes, b.bytes, a_scan, b_scan, a_cut, b_cut)
    };
    let client_hello = if flipped { up.as_ref().and_then(client_hello_in) } else { a_hello };
    let server_hello = down.as_ref().and_then(|s| parse_server_hello(&s.records).ok());
    let assessment = client_hello.as_ref().map(|ch| assess_privacy(ch, server_hello.as_ref()));
    let truncated = !udp && (up_cut || down_cut);
    FlowRecord {
        key,
        first_ts,
        last_ts,
        bytes_up,
        bytes_down,
        client_hello,
        server_hello,
        assessment,
        truncated,
    }
}
