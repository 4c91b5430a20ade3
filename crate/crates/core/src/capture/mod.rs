//! Offline capture ingestion: packets → flows → report rows.

mod flow;
mod key;
mod reader;
mod report;

pub use flow::{reassemble_flows, FlowRecord, ReassemblyConfig, DEFAULT_STREAM_CAP};
pub use key::{Direction, FlowKey, Transport};
pub use reader::{read_capture, CaptureReader, CaptureStats, PacketEvent, TcpMeta};
pub use report::{
    export_report, read_report, read_report_from, write_report, ReportFormat, ReportRow, REPORT_COLUMNS,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CaptureError {
    #[error("unsupported link type {0}")]
    UnsupportedLinkType(i32),
    #[error("corrupt capture: {0}")]
    Corrupt(String),
    #[error("i/o failure: {0}")]
    Io(String),
}
