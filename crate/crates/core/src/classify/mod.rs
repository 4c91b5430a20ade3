//! Primary / side channel classification and service attribution.

mod profile;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::capture::{FlowKey, FlowRecord, ReportRow, Transport};
use crate::tls::PrivacyLevel;

pub use profile::{
    associate_service, load_profiles, normalize_host, parse_profiles, pattern_matches, table1_profiles,
    validate_profiles, ProfileError, ServiceProfile,
};

pub const DEFAULT_PRIMARY_VOLUME: u64 = 1024 * 1024;
pub const DEFAULT_SIDE_CEILING: u64 = 256 * 1024;
pub const DEFAULT_SESSION_LENGTH_S: f64 = 60.0;

/// Label carried by every service-to-primary attribution.
pub const ATTRIBUTION: &str = "circumstantial";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub primary_volume_threshold: u64,
    pub side_volume_ceiling: u64,
    pub session_length_threshold: f64,
    pub profiles: Vec<ServiceProfile>,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            primary_volume_threshold: DEFAULT_PRIMARY_VOLUME,
            side_volume_ceiling: DEFAULT_SIDE_CEILING,
            session_length_threshold: DEFAULT_SESSION_LENGTH_S,
            profiles: table1_profiles(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("thresholds must be positive")]
    NonPositive,
    #[error("side volume ceiling ({side}) must be below the primary threshold ({primary})")]
    CeilingAbovePrimary { side: u64, primary: u64 },
    #[error(transparent)]
    Profile(#[from] ProfileError),
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.primary_volume_threshold == 0
            || self.side_volume_ceiling == 0
            || !(self.session_length_threshold > 0.0)
        {
            return Err(ConfigError::NonPositive);
        }
        if self.side_volume_ceiling >= self.primary_volume_threshold {
            return Err(ConfigError::CeilingAbovePrimary {
                side: self.side_volume_ceiling,
                primary: self.primary_volume_threshold,
            });
        }
        validate_profiles(&self.profiles)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ChannelRole {
    Primary,
    Side,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "pattern")]
pub enum Evidence {
    VolumeAboveThreshold,
    SessionLengthAboveThreshold,
    SniMatched(String),
    EchOpaque,
    LowVolume,
}

/// What the classifier needs from a flow. Built from a [`FlowRecord`] or a
/// report row; the latter carries no absolute timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSummary {
    pub flow: FlowKey,
    pub sni: Option<String>,
    pub privacy_level: Option<PrivacyLevel>,
    pub total_bytes: u64,
    pub session_length_s: f64,
    pub first_ts: Option<f64>,
    pub last_ts: Option<f64>,
}

impl From<&FlowRecord> for FlowSummary {
    fn from(f: &FlowRecord) -> Self {
        Self {
            flow: f.key,
            sni: f.sni().map(str::to_string),
            privacy_level: f.assessment.map(|a| a.privacy_level),
            total_bytes: f.total_bytes(),
            session_length_s: f.session_length(),
            first_ts: Some(f.first_ts),
            last_ts: Some(f.last_ts),
        }
    }
}

impl From<&ReportRow> for FlowSummary {
    fn from(r: &ReportRow) -> Self {
        let transport = if r.tls_version == "quic-opaque" { Transport::Udp } else { Transport::Tcp };
        Self {
            flow: FlowKey {
                src_ip: r.src_ip,
                src_port: r.src_port,
                dst_ip: r.dst_ip,
                dst_port: r.dst_port,
                transport,
            },
            sni: (!r.sni.is_empty()).then(|| r.sni.clone()),
            privacy_level: PrivacyLevel::from_label(&r.privacy_level),
            total_bytes: r.total_bytes(),
            session_length_s: r.session_length(),
            first_ts: None,
            last_ts: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelClassification {
    pub flow: FlowKey,
    pub role: ChannelRole,
    pub service: Option<String>,
    pub evidence: Vec<Evidence>,
    pub sni: Option<String>,
    pub privacy_level: Option<PrivacyLevel>,
    pub total_bytes: u64,
    pub session_length_s: f64,
    pub first_ts: Option<f64>,
    pub last_ts: Option<f64>,
}

impl ChannelClassification {
    pub fn is_full_ech(&self) -> bool {
        self.privacy_level == Some(PrivacyLevel::FullEch)
    }

    fn overlaps(&self, other: &Self) -> bool {
        match (self.first_ts, self.last_ts, other.first_ts, other.last_ts) {
            (Some(a0), Some(a1), Some(b0), Some(b1)) => a0 <= b1 && b0 <= a1,
            _ => false,
        }
    }
}

pub fn classify_flow(flow: &FlowSummary, cfg: &ClassifierConfig) -> ChannelClassification {
    let full_ech = flow.privacy_level == Some(PrivacyLevel::FullEch);
    let mut evidence = Vec::new();
    let mut service = None;
    if full_ech {
        evidence.push(Evidence::EchOpaque);
    }
    let matched = match (&flow.sni, full_ech) {
        (Some(sni), false) => associate_service(sni, &cfg.profiles),
        _ => None,
    };
    let role = if let Some((name, pattern)) = matched {
        service = Some(name.to_string());
        evidence.push(Evidence::SniMatched(pattern.to_string()));
        ChannelRole::Side
    } else {
        let big = flow.total_bytes >= cfg.primary_volume_threshold;
        let long = flow.total_bytes >= cfg.side_volume_ceiling && flow.session_length_s >= cfg.session_length_threshold;
        if big || long {
            if flow.total_bytes >= cfg.side_volume_ceiling {
                evidence.push(Evidence::VolumeAboveThreshold);
            }
            if flow.session_length_s >= cfg.session_length_threshold {
                evidence.push(Evidence::SessionLengthAboveThreshold);
            }
            ChannelRole::Primary
        } else if flow.total_bytes <= cfg.side_volume_ceiling {
            evidence.push(Evidence::LowVolume);
            ChannelRole::Side
        } else {
            ChannelRole::Unknown
        }
    };
    ChannelClassification {
        flow: flow.flow,
        role,
        service,
        evidence,
        sni: flow.sni.clone(),
        privacy_level: flow.privacy_level,
        total_bytes: flow.total_bytes,
        session_length_s: flow.session_length_s,
        first_ts: flow.first_ts,
        last_ts: flow.last_ts,
    }
}

fn order(a: &ChannelClassification, b: &ChannelClassification) -> std::cmp::Ordering {
    let ts = |c: &ChannelClassification| c.first_ts.unwrap_or(f64::NEG_INFINITY);
    ts(a)
        .total_cmp(&ts(b))
        .then(a.flow.cmp(&b.flow))
        .then(a.total_bytes.cmp(&b.total_bytes))
        .then(a.session_length_s.total_cmp(&b.session_length_s))
}

/// Classify every flow. The output is sorted by first timestamp, then key,
/// so it does not depend on input order.
pub fn classify_summaries(flows: &[FlowSummary], cfg: &ClassifierConfig) -> Vec<ChannelClassification> {
    let mut out: Vec<_> = flows.iter().map(|f| classify_flow(f, cfg)).collect();
    out.sort_by(order);
    out
}

pub fn classify_flows(flows: &[FlowRecord], cfg: &ClassifierConfig) -> Vec<ChannelClassification> {
    let summaries: Vec<FlowSummary> = flows.iter().map(FlowSummary::from).collect();
    classify_summaries(&summaries, cfg)
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ServiceGroup {
    pub side_flows: Vec<FlowKey>,
    /// Primary flows whose lifetime overlaps any of the side flows.
    pub candidate_primary_flows: Vec<FlowKey>,
    pub association: String,
}

pub fn group_by_service(classes: &[ChannelClassification]) -> BTreeMap<String, ServiceGroup> {
    let mut groups: BTreeMap<String, (Vec<&ChannelClassification>, ServiceGroup)> = BTreeMap::new();
    for c in classes {
        if let (ChannelRole::Side, Some(service)) = (c.role, &c.service) {
            let entry = groups.entry(service.clone()).or_default();
            entry.0.push(c);
            entry.1.side_flows.push(c.flow);
        }
    }
    groups
        .into_iter()
        .map(|(name, (sides, mut group))| {
            group.candidate_primary_flows = classes
                .iter()
                .filter(|p| p.role == ChannelRole::Primary && sides.iter().any(|s| s.overlaps(p)))
                .map(|p| p.flow)
                .collect();
            group.association = ATTRIBUTION.to_string();
            (name, group)
        })
        .collect()
}

/// The `classify` output document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub primary_volume_threshold: u64,
    pub side_volume_ceiling: u64,
    pub session_length_threshold: f64,
    pub classifications: Vec<ChannelClassification>,
    pub services: BTreeMap<String, ServiceGroup>,
}

#[derive(Debug, thiserror::Error)]
pub enum ReportIoError {
    #[error("i/o failure on {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("{path} is not a classification report: {reason}")]
    Format { path: String, reason: String },
}

impl ClassificationReport {
    pub fn build(classifications: Vec<ChannelClassification>, cfg: &ClassifierConfig) -> Self {
        let services = group_by_service(&classifications);
        Self {
            primary_volume_threshold: cfg.primary_volume_threshold,
            side_volume_ceiling: cfg.side_volume_ceiling,
            session_length_threshold: cfg.session_length_threshold,
            classifications,
            services,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ReportIoError> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("report serializes");
        std::fs::write(path, text + "\n")
            .map_err(|e| ReportIoError::Io { path: path.display().to_string(), reason: e.to_string() })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ReportIoError> {
        let path = path.as_ref();
        let p = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| ReportIoError::Io { path: p.clone(), reason: e.to_string() })?;
        serde_json::from_str(&text).map_err(|e| ReportIoError::Format { path: p, reason: e.to_string() })
    }
}
