//! Classic pcap and pcapng container writers.

use super::packet::{LinkLayer, SynthPacket};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaptureFormat {
    /// Classic pcap, microsecond timestamps.
    Pcap,
    /// Classic pcap, nanosecond timestamps.
    PcapNanos,
    /// pcapng with one interface at the default microsecond resolution.
    PcapNg,
}

fn split_ts(ts: f64, units_per_sec: f64) -> (u32, u32) {
    let total = (ts * units_per_sec).round() as u64;
    let per = units_per_sec as u64;
    ((total / per) as u32, (total % per) as u32)
}

fn pcap_header(link: LinkLayer, nanos: bool) -> Vec<u8> {
    let magic: u32 = if nanos { 0xa1b2_3c4d } else { 0xa1b2_c3d4 };
    let mut out = Vec::with_capacity(24);
    out.extend_from_slice(&magic.to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&4u16.to_le_bytes());
    out.extend_from_slice(&0i32.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    out.extend_from_slice(&65535u32.to_le_bytes());
    out.extend_from_slice(&u32::from(link.linktype()).to_le_bytes());
    out
}

fn ng_block(out: &mut Vec<u8>, block_type: u32, body: &[u8]) {
    let padded = body.len().div_ceil(4) * 4;
    let total = (12 + padded) as u32;
    out.extend_from_slice(&block_type.to_le_bytes());
    out.extend_from_slice(&total.to_le_bytes());
    out.extend_from_slice(body);
    out.resize(out.len() + padded - body.len(), 0);
    out.extend_from_slice(&total.to_le_bytes());
}

fn pcapng_preamble(link: LinkLayer) -> Vec<u8> {
    let mut out = Vec::new();
    let mut shb = Vec::new();
    shb.extend_from_slice(&0x1a2b_3c4du32.to_le_bytes());
    shb.extend_from_slice(&1u16.to_le_bytes());
    shb.extend_from_slice(&0u16.to_le_bytes());
    shb.extend_from_slice(&(-1i64).to_le_bytes());
    ng_block(&mut out, 0x0a0d_0d0a, &shb);
    let mut idb = Vec::new();
    idb.extend_from_slice(&link.linktype().to_le_bytes());
    idb.extend_from_slice(&0u16.to_le_bytes());
    idb.extend_from_slice(&65535u32.to_le_bytes());
    ng_block(&mut out, 1, &idb);
    out
}

/// Serialize `packets` (in the given order) as a capture file.
pub fn write_capture(packets: &[SynthPacket], link: LinkLayer, format: CaptureFormat) -> Vec<u8> {
    let mut out = match format {
        CaptureFormat::Pcap => pcap_header(link, false),
        CaptureFormat::PcapNanos => pcap_header(link, true),
        CaptureFormat::PcapNg => pcapng_preamble(link),
    };
    for pkt in packets {
        let frame = pkt.frame(link);
        let len = frame.len() as u32;
        match format {
            CaptureFormat::Pcap | CaptureFormat::PcapNanos => {
                let unit = if format == CaptureFormat::Pcap { 1e6 } else { 1e9 };
                let (sec, frac) = split_ts(pkt.ts, unit);
                for v in [sec, frac, len, len] {
                    out.extend_from_slice(&v.to_le_bytes());
                }
                out.extend_from_slice(&frame);
            }
            CaptureFormat::PcapNg => {
                let micros = (pkt.ts * 1e6).round() as u64;
                let mut epb = Vec::with_capacity(20 + frame.len());
                epb.extend_from_slice(&0u32.to_le_bytes());
                epb.extend_from_slice(&((micros >> 32) as u32).to_le_bytes());
                epb.extend_from_slice(&(micros as u32).to_le_bytes());
                epb.extend_from_slice(&len.to_le_bytes());
                epb.extend_from_slice(&len.to_le_bytes());
                epb.extend_from_slice(&frame);
                ng_block(&mut out, 6, &epb);
            }
        }
    }
    out
}
