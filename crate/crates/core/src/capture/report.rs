//! Flat per-flow report: CSV (RFC 4180) and a JSON-lines mirror.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::net::IpAddr;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CaptureError, FlowRecord};

pub const REPORT_COLUMNS: [&str; 12] = [
    "src_ip",
    "src_port",
    "dst_ip",
    "dst_port",
    "tls_version",
    "sni",
    "alpn",
    "ech",
    "bytes_up",
    "bytes_down",
    "session_length_s",
    "privacy_level",
];

/// One report line. Field order is the column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub src_ip: IpAddr,
    pub src_port: u16,
    pub dst_ip: IpAddr,
    pub dst_port: u16,
    pub tls_version: String,
    pub sni: String,
    /// Protocols joined with `;`.
    pub alpn: String,
    pub ech: bool,
    pub bytes_up: u64,
    pub bytes_down: u64,
    /// Seconds, six decimals.
    pub session_length_s: String,
    /// `None`, `PartialTls13`, `FullEch`, or `unknown` without a handshake.
    pub privacy_level: String,
}

impl ReportRow {
    pub fn from_flow(flow: &FlowRecord) -> Self {
        Self {
            src_ip: flow.key.src_ip,
            src_port: flow.key.src_port,
            dst_ip: flow.key.dst_ip,
            dst_port: flow.key.dst_port,
            tls_version: flow.tls_version_label().to_string(),
            sni: flow.sni().unwrap_or_default().to_string(),
            alpn: flow
                .client_hello
                .as_ref()
                .and_then(|ch| ch.alpn())
                .map(|p| p.join(";"))
                .unwrap_or_default(),
            ech: flow.ech_present(),
            bytes_up: flow.bytes_up,
            bytes_down: flow.bytes_down,
            session_length_s: format!("{:.6}", flow.session_length()),
            privacy_level: flow.assessment.map_or("unknown", |a| a.privacy_level.label()).to_string(),
        }
    }

    pub fn session_length(&self) -> f64 {
        self.session_length_s.parse().unwrap_or(0.0)
    }

    pub fn total_bytes(&self) -> u64 {
        self.bytes_up + self.bytes_down
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    JsonLines,
}

impl ReportFormat {
    /// `.jsonl` / `.ndjson` select JSON lines; anything else is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl" | "ndjson") => ReportFormat::JsonLines,
            _ => ReportFormat::Csv,
        }
    }
}

fn io(e: impl std::fmt::Display) -> CaptureError {
    CaptureError::Io(e.to_string())
}

pub fn write_report<W: Write>(flows: &[FlowRecord], format: ReportFormat, out: W) -> Result<(), CaptureError> {
    let mut rows: Vec<(f64, ReportRow)> = flows.iter().map(|f| (f.first_ts, ReportRow::from_flow(f))).collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    match format {
        ReportFormat::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
            w.write_record(REPORT_COLUMNS).map_err(io)?;
            for (_, row) in &rows {
                w.serialize(row).map_err(io)?;
            }
            w.flush().map_err(io)
        }
        ReportFormat::JsonLines => {
            let mut w = BufWriter::new(out);
            for (_, row) in &rows {
                serde_json::to_writer(&mut w, row).map_err(io)?;
                w.write_all(b"\n").map_err(io)?;
            }
            w.flush().map_err(io)
        }
    }
}

/// Write the report to `path`, choosing the format from its extension.
pub fn export_report(flows: &[FlowRecord], path: impl AsRef<Path>) -> Result<(), CaptureError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(io)?;
    write_report(flows, ReportFormat::from_path(path), file)
}

pub fn read_report_from<R: Read>(format: ReportFormat, input: R) -> Result<Vec<ReportRow>, CaptureError> {
    let bad = |e: &dyn std::fmt::Display| CaptureError::Corrupt(format!("bad report: {e}"));
    match format {
        ReportFormat::Csv => {
            let mut r = csv::Reader::from_reader(input);
            let headers = r.headers().map_err(|e| bad(&e))?;
            if headers.iter().ne(REPORT_COLUMNS) {
                return Err(CaptureError::Corrupt(format!(
                    "report columns must be {}",
                    REPORT_COLUMNS.join(",")
                )));
            }
            r.deserialize().map(|row| row.map_err(|e| bad(&e))).collect()
        }
        ReportFormat::JsonLines => BufReader::new(input)
            .lines()
            .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
            .map(|l| serde_json::from_str(&l.map_err(io)?).map_err(|e| bad(&e)))
            .collect(),
    }
}

pub fn read_report(path: impl AsRef<Path>) -> Result<Vec<ReportRow>, CaptureError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(io)?;
    read_report_from(ReportFormat::from_path(path), file)
}
