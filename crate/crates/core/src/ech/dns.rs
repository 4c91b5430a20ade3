//! Pre-fetched HTTPS/SVCB resource records in presentation format.
//!
//! One record per line:
//!
//! ```text
//! <owner> <ttl> [IN] HTTPS|SVCB <priority> <target> [key=value ...]
//! ```
//!
//! Blank lines and lines starting with `;` or `#` are ignored. Values may be
//! double-quoted. `ech=` holds a base64-encoded ECHConfigList; `alpn=` is a
//! comma-separated list; `ipv4hint=` / `ipv6hint=` are comma-separated
//! addresses; `port=` is a decimal port. Any other key is kept verbatim.
//! A target of `.` means the owner name itself.

use std::fmt::Write as _;
use std::net::IpAddr;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine as _;

use super::config::{parse_ech_config_list, serialize_ech_config_list, EchConfigEntry, EchConfigError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordKind {
    Https,
    Svcb,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DnsEchRecord {
    pub owner: String,
    pub ttl: u32,
    pub kind: RecordKind,
    /// 0 marks AliasMode.
    pub priority: u16,
    /// Resolved service target; `.` in the file is replaced by the owner.
    pub target_name: String,
    pub alpn: Vec<String>,
    pub port: Option<u16>,
    pub ip_hints: Vec<IpAddr>,
    pub ech_config_list: Vec<EchConfigEntry>,
    pub other_params: Vec<(String, String)>,
}

impl DnsEchRecord {
    pub fn advertises_ech(&self) -> bool {
        !self.ech_config_list.is_empty()
    }

    /// Presentation-format line that parses back to this record.
    pub fn to_line(&self) -> String {
        let kind = match self.kind {
            RecordKind::Https => "HTTPS",
            RecordKind::Svcb => "SVCB",
        };
        let target = if self.target_name == self.owner { "." } else { self.target_name.as_str() };
        let mut line = format!("{} {} {} {} {}", self.owner, self.ttl, kind, self.priority, target);
        if !self.alpn.is_empty() {
            let _ = write!(line, " alpn={}", self.alpn.join(","));
        }
        if let Some(port) = self.port {
            let _ = write!(line, " port={port}");
        }
        let v4: Vec<_> = self.ip_hints.iter().filter(|a| a.is_ipv4()).map(|a| a.to_string()).collect();
        if !v4.is_empty() {
            let _ = write!(line, " ipv4hint={}", v4.join(","));
        }
        if !self.ech_config_list.is_empty() {
            let _ = write!(line, " ech={}", BASE64.encode(serialize_ech_config_list(&self.ech_config_list)));
        }
        let v6: Vec<_> = self.ip_hints.iter().filter(|a| a.is_ipv6()).map(|a| a.to_string()).collect();
        if !v6.is_empty() {
            let _ = write!(line, " ipv6hint={}", v6.join(","));
        }
        for (k, v) in &self.other_params {
            if v.is_empty() {
                let _ = write!(line, " {k}");
            } else {
                let _ = write!(line, " {k}={v}");
            }
        }
        line
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {reason}")]
pub struct DnsFileError {
    pub line: usize,
    pub reason: String,
}

fn strip_quotes(v: &str) -> &str {
    v.strip_prefix('"').and_then(|s| s.strip_suffix('"')).unwrap_or(v)
}

fn parse_line(text: &str) -> Result<DnsEchRecord, String> {
    let mut fields = text.split_whitespace();
    let mut next = |what: &str| fields.next().ok_or_else(|| format!("missing {what}"));
    let owner = next("owner name")?.to_string();
    let ttl = next("TTL")?.parse::<u32>().map_err(|e| format!("bad TTL: {e}"))?;
    let mut kind_field = next("record type")?;
    if kind_field.eq_ignore_ascii_case("IN") {
        kind_field = next("record type")?;
    }
    let kind = if kind_field.eq_ignore_ascii_case("HTTPS") {
        RecordKind::Https
    } else if kind_field.eq_ignore_ascii_case("SVCB") {
        RecordKind::Svcb
    } else {
        return Err(format!("unsupported record type {kind_field}"));
    };
    let priority = next("priority")?.parse::<u16>().map_err(|e| format!("bad priority: {e}"))?;
    let target = next("target")?;
    let target_name = if target == "." { owner.clone() } else { target.to_string() };

    let mut rec = DnsEchRecord {
        owner,
        ttl,
        kind,
        priority,
        target_name,
        alpn: Vec::new(),
        port: None,
        ip_hints: Vec::new(),
        ech_config_list: Vec::new(),
        other_params: Vec::new(),
    };
    for param in fields {
        let (key, value) = match param.split_once('=') {
            Some((k, v)) => (k.to_ascii_lowercase(), strip_quotes(v)),
            None => (param.to_ascii_lowercase(), ""),
        };
        match key.as_str() {
            "alpn" => rec.alpn = value.split(',').filter(|s| !s.is_empty()).map(str::to_string).collect(),
            "port" => rec.port = Some(value.parse().map_err(|e| format!("bad port: {e}"))?),
            "ipv4hint" | "ipv6hint" => {
                for addr in value.split(',') {
                    rec.ip_hints.push(addr.parse().map_err(|e| format!("bad address {addr}: {e}"))?);
                }
            }
            "ech" => {
                let raw = BASE64.decode(value).map_err(|e| format!("ech value is not base64: {e}"))?;
                rec.ech_config_list = parse_ech_config_list(&raw).map_err(|e: EchConfigError| e.to_string())?;
            }
            _ => rec.other_params.push((key, value.to_string())),
        }
    }
    if rec.priority == 0 && (rec.advertises_ech() || !rec.alpn.is_empty()) {
        return Err("AliasMode record (priority 0) cannot carry service parameters".into());
    }
    Ok(rec)
}

pub fn parse_dns_records(text: &str) -> Result<Vec<DnsEchRecord>, DnsFileError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with(';') || line.starts_with('#') {
            continue;
        }
        out.push(parse_line(line).map_err(|reason| DnsFileError { line: idx + 1, reason })?);
    }
    Ok(out)
}
