//! Packet capture decoding: pcap / pcapng containers via `pcap-parser`,
//! link/IP/transport headers via `etherparse`.

use std::fs::File;
use std::io::Read;
use std::net::SocketAddr;
use std::path::Path;

use etherparse::{NetSlice, SlicedPacket, TransportSlice};
use pcap_parser::pcapng::Block;
use pcap_parser::traits::{PcapNGPacketBlock, PcapReaderIterator};
use pcap_parser::{create_reader, Linktype, PcapBlockOwned, PcapError};

use super::{CaptureError, Direction, FlowKey, Transport};

const READ_BUFFER: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TcpMeta {
    pub seq: u32,
    pub syn: bool,
    pub ack: bool,
    pub fin: bool,
    pub rst: bool,
}

/// One decoded TCP segment or UDP datagram.
#[derive(Debug, Clone, PartialEq)]
pub struct PacketEvent {
    /// Capture clock, seconds.
    pub ts: f64,
    /// Address-ordered key; reassembly re-orients it on SYN.
    pub key: FlowKey,
    pub direction: Direction,
    /// Present for TCP.
    pub tcp: Option<TcpMeta>,
    pub payload: Vec<u8>,
}

impl PacketEvent {
    pub fn transport(&self) -> Transport {
        self.key.transport
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CaptureStats {
    pub packets: u64,
    pub tcp_segments: u64,
    pub udp_datagrams: u64,
    /// Frames that were not TCP/UDP over IP or could not be decoded.
    pub skipped: u64,
    pub tcp_payload_bytes: u64,
    pub udp_payload_bytes: u64,
}

#[derive(Debug, Clone, Copy)]
enum Link {
    Ethernet,
    Ip,
}

impl Link {
    fn from_linktype(lt: Linktype) -> Result<Self, CaptureError> {
        match lt {
            Linktype::ETHERNET => Ok(Link::Ethernet),
            Linktype::RAW | Linktype::IPV4 | Linktype::IPV6 => Ok(Link::Ip),
            other => Err(CaptureError::UnsupportedLinkType(other.0)),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Interface {
    link: Result<Link, i32>,
    resolution: u64,
    offset: i64,
}

/// Streaming iterator over the TCP/UDP packets of a capture, in file order.
pub struct CaptureReader<'r> {
    inner: Box<dyn PcapReaderIterator + 'r>,
    legacy: Option<(Link, f64)>,
    interfaces: Vec<Interface>,
    last_ts: f64,
    stats: CaptureStats,
    done: bool,
}

/// Open a `.pcap` or `.pcapng` file; the format is detected from its magic.
pub fn read_capture(path: impl AsRef<Path>) -> Result<CaptureReader<'static>, CaptureError> {
    let file = File::open(path.as_ref()).map_err(|e| CaptureError::Io(e.to_string()))?;
    CaptureReader::new(file)
}

impl<'r> CaptureReader<'r> {
    pub fn new<R: Read + 'r>(reader: R) -> Result<Self, CaptureError> {
        let inner = create_reader(READ_BUFFER, reader).map_err(|e| match e {
            PcapError::Eof => CaptureError::Corrupt("empty file".into()),
            PcapError::ReadError => CaptureError::Io("read failed".into()),
            PcapError::Incomplete(_) => CaptureError::Corrupt("file shorter than a capture header".into()),
            other => CaptureError::Corrupt(format!("not a pcap or pcapng file ({other:?})")),
        })?;
        Ok(Self {
            inner,
            legacy: None,
            interfaces: Vec::new(),
            last_ts: 0.0,
            stats: CaptureStats::default(),
            done: false,
        })
    }

    /// Counters for everything read so far.
    pub fn stats(&self) -> CaptureStats {
        self.stats
    }

    /// Drain the reader, returning every event and the final counters.
    pub fn read_all(mut self) -> Result<(Vec<PacketEvent>, CaptureStats), CaptureError> {
        let mut events = Vec::new();
        for ev in self.by_ref() {
            events.push(ev?);
        }
        Ok((events, self.stats))
    }

    fn frame(&mut self, link: Link, ts: f64, data: &[u8]) -> Option<PacketEvent> {
        self.stats.packets += 1;
        let sliced = match link {
            Link::Ethernet => SlicedPacket::from_ethernet(data),
            Link::Ip => SlicedPacket::from_ip(data),
        };
        let Ok(sliced) = sliced else {
            self.stats.skipped += 1;
            return None;
        };
        let (src_ip, dst_ip) = match &sliced.net {
            Some(NetSlice::Ipv4(v4)) => (v4.header().source_addr().into(), v4.header().destination_addr().into()),
            Some(NetSlice::Ipv6(v6)) => (v6.header().source_addr().into(), v6.header().destination_addr().into()),
            None => {
                self.stats.skipped += 1;
                return None;
            }
        };
        let (transport, src_port, dst_port, tcp, payload) = match &sliced.transport {
            Some(TransportSlice::Tcp(t)) => {
                let meta = TcpMeta { seq: t.sequence_number(), syn: t.syn(), ack: t.ack(), fin: t.fin(), rst: t.rst() };
                (Transport::Tcp, t.source_port(), t.destination_port(), Some(meta), t.payload())
            }
            Some(TransportSlice::Udp(u)) => (Transport::Udp, u.source_port(), u.destination_port(), None, u.payload()),
            _ => {
                self.stats.skipped += 1;
                return None;
            }
        };
        match transport {
            Transport::Tcp => {
                self.stats.tcp_segments += 1;
                self.stats.tcp_payload_bytes += payload.len() as u64;
            }
            Transport::Udp => {
                self.stats.udp_datagrams += 1;
                self.stats.udp_payload_bytes += payload.len() as u64;
            }
        }
        let (key, direction) =
            FlowKey::canonical(SocketAddr::new(src_ip, src_port), SocketAddr::new(dst_ip, dst_port), transport);
        Some(PacketEvent { ts, key, direction, tcp, payload: payload.to_vec() })
    }
}

/// What one container block contributes, detached from the reader's buffer.
enum Step {
    Packet { link: Link, ts: f64, data: Vec<u8> },
    Nothing,
    Fail(CaptureError),
}

impl Iterator for CaptureReader<'_> {
    type Item = Result<PacketEvent, CaptureError>;

    fn next(&mut self) -> Option<Self::Item> {
        while !self.done {
            let step = match self.inner.next() {
                Ok((offset, block)) => {
                    let step = match block {
                        PcapBlockOwned::LegacyHeader(hdr) => {
                            let unit = if hdr.is_nanosecond_precision() { 1e-9 } else { 1e-6 };
                            match Link::from_linktype(hdr.network) {
                                Ok(link) => {
                                    self.legacy = Some((link, unit));
                                    Step::Nothing
                                }
                                Err(e) => Step::Fail(e),
                            }
                        }
                        PcapBlockOwned::Legacy(b) => match self.legacy {
                            Some((link, unit)) => Step::Packet {
                                link,
                                ts: f64::from(b.ts_sec) + f64::from(b.ts_usec) * unit,
                                data: b.data.to_vec(),
                            },
                            None => Step::Fail(CaptureError::Corrupt("packet before file header".into())),
                        },
                        PcapBlockOwned::NG(Block::SectionHeader(_)) => {
                            self.interfaces.clear();
                            Step::Nothing
                        }
                        PcapBlockOwned::NG(Block::InterfaceDescription(idb)) => {
                            self.interfaces.push(Interface {
                                link: Link::from_linktype(idb.linktype).map_err(|_| idb.linktype.0),
                                resolution: idb.ts_resolution().unwrap_or(1_000_000),
                                offset: idb.ts_offset(),
                            });
                            Step::Nothing
                        }
                        PcapBlockOwned::NG(Block::EnhancedPacket(epb)) => {
                            match self.interfaces.get(epb.if_id as usize).copied() {
                                Some(Interface { link: Ok(link), resolution, offset }) => Step::Packet {
                                    link,
                                    ts: epb.decode_ts_f64(offset as u64, resolution),
                                    data: epb.packet_data().to_vec(),
                                },
                                Some(Interface { link: Err(code), .. }) => {
                                    Step::Fail(CaptureError::UnsupportedLinkType(code))
                                }
                                None => Step::Fail(CaptureError::Corrupt(format!(
                                    "packet references unknown interface {}",
                                    epb.if_id
                                ))),
                            }
                        }
                        PcapBlockOwned::NG(Block::SimplePacket(spb)) => match self.interfaces.first().copied() {
                            Some(Interface { link: Ok(link), .. }) => {
                                Step::Packet { link, ts: self.last_ts, data: spb.packet_data().to_vec() }
                            }
                            Some(Interface { link: Err(code), .. }) => {
                                Step::Fail(CaptureError::UnsupportedLinkType(code))
                            }
                            None => Step::Fail(CaptureError::Corrupt("simple packet without interface".into())),
                        },
                        PcapBlockOwned::NG(_) => Step::Nothing,
                    };
                    self.inner.consume(offset);
                    step
                }
                Err(PcapError::Eof) => {
                    self.done = true;
                    return None;
                }
                Err(PcapError::Incomplete(_)) => {
                    if self.inner.reader_exhausted() {
                        Step::Fail(CaptureError::Corrupt("capture ends inside a block".into()))
                    } else {
                        match self.inner.refill() {
                            Ok(()) => Step::Nothing,
                            Err(e) => Step::Fail(CaptureError::Corrupt(format!("{e:?}"))),
                        }
                    }
                }
                Err(e) => Step::Fail(CaptureError::Corrupt(format!("{e:?}"))),
            };
            match step {
                Step::Nothing => {}
                Step::Fail(e) => {
                    self.done = true;
                    return Some(Err(e));
                }
                Step::Packet { link, ts, data } => {
                    self.last_ts = ts;
                    if let Some(ev) = self.frame(link, ts, &data) {
                        return Some(Ok(ev));
                    }
                }
            }
        }
        None
    }
}
