use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classify::{associate_service, ServiceProfile};

const SHIPPED: [&str; 3] = [
    include_str!("../../../../models/hotstar.toml"),
    include_str!("../../../../models/primevideo.toml"),
    include_str!("../../../../models/youtube.toml"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DependencyKind {
    /// Needed before the first segment plays.
    StartupCritical,
    /// Supplies the segment schedule; refetched every `period_segments`.
    ScheduleCritical,
    /// Page decoration: thumbnails, avatars, ads.
    Cosmetic,
}

impl DependencyKind {
    pub fn is_critical(self) -> bool {
        !matches!(self, DependencyKind::Cosmetic)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SideDependency {
    pub host: String,
    pub kind: DependencyKind,
    /// Refetch interval in segments; 0 means startup only.
    pub period_segments: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fallback {
    pub fallback_snis: Vec<String>,
    pub degraded_rate_bps: u64,
    pub degraded_quality_label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceModel {
    pub name: String,
    pub normal_rate_bps: u64,
    /// Segments that still play after the schedule source is lost.
    pub schedule_buffer_segments: u32,
    /// Inner server name of the main stream, hidden by ECH.
    pub primary_host: String,
    /// Outer server name of the main stream.
    pub ech_public_name: String,
    pub side_dependencies: Vec<SideDependency>,
    #[serde(default)]
    pub fallback: Option<Fallback>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("model file: {0}")]
    Parse(String),
    #[error("{service}: dependency host {host:?} is not in the service's profile")]
    InconsistentModel { service: String, host: String },
    #[error("{0}: rates must be positive")]
    BadRate(String),
    #[error("{0}: a ScheduleCritical dependency needs a refetch period")]
    ScheduleWithoutPeriod(String),
}

impl ServiceModel {
    pub fn from_toml(text: &str) -> Result<Self, ModelError> {
        toml::from_str(text).map_err(|e| ModelError::Parse(e.message().to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| ModelError::Parse(e.to_string()))?;
        Self::from_toml(&text)
    }

    /// Hotstar, Primevideo and YouTube, in that order.
    pub fn shipped() -> Vec<Self> {
        SHIPPED.iter().map(|t| Self::from_toml(t).expect("shipped models parse")).collect()
    }

    pub fn shipped_named(name: &str) -> Option<Self> {
        Self::shipped().into_iter().find(|m| m.name.eq_ignore_ascii_case(name))
    }

    /// Every dependency host must belong to this service's profile.
    pub fn validate(&self, profiles: &[ServiceProfile]) -> Result<(), ModelError> {
        if self.normal_rate_bps == 0 || self.fallback.as_ref().is_some_and(|f| f.degraded_rate_bps == 0) {
            return Err(ModelError::BadRate(self.name.clone()));
        }
        for dep in &self.side_dependencies {
            if dep.kind == DependencyKind::ScheduleCritical && dep.period_segments == 0 {
                return Err(ModelError::ScheduleWithoutPeriod(self.name.clone()));
            }
            let owner = associate_service(&dep.host, profiles).map(|(name, _)| name);
            if !owner.is_some_and(|n| n.eq_ignore_ascii_case(&self.name)) {
                return Err(ModelError::InconsistentModel { service: self.name.clone(), host: dep.host.clone() });
            }
        }
        Ok(())
    }
}
