//! Capture writer used as a test oracle: builds packets from first
//! principles and serializes them as pcap or pcapng, independent of the
//! parsing libraries the reader uses.

mod file;
mod flows;
mod packet;

pub use file::{write_capture, CaptureFormat};
pub use flows::{certificate_message, udp_exchange, TcpConversation, TlsFlowSpec, DEFAULT_MSS};
pub use packet::{LinkLayer, SynthPacket, TcpFlags, Transport};
