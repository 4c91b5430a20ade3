//! SNI block/throttle lists as a middlebox would apply them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classify::{normalize_host, pattern_matches, ChannelClassification, ChannelRole, Evidence};
use crate::tls::ClientHello;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolicyAction {
    Block,
    /// Rate limit in bits per second.
    Throttle(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    BeforeSession,
    DuringSession,
    Always,
}

impl Scope {
    /// Accepts `before`, `during`, `always` and the long forms.
    pub fn parse(text: &str) -> Option<Self> {
        match text.to_ascii_lowercase().as_str() {
            "before" | "before_session" => Some(Scope::BeforeSession),
            "during" | "during_session" => Some(Scope::DuringSession),
            "always" => Some(Scope::Always),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Scope::BeforeSession => "before_session",
            Scope::DuringSession => "during_session",
            Scope::Always => "always",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RuleFile", into = "RuleFile")]
pub struct PolicyRule {
    /// Exact host, or `.domain` for strict subdomains.
    pub match_sni: String,
    pub action: PolicyAction,
    pub scope: Scope,
}

impl PolicyRule {
    pub fn new(match_sni: impl Into<String>, action: PolicyAction, scope: Scope) -> Self {
        Self { match_sni: match_sni.into(), action, scope }
    }

    pub fn matches(&self, sni: &str) -> bool {
        pattern_matches(&self.match_sni, &normalize_host(sni))
    }
}

/// On-disk rule: `{match_sni, action, rate?, scope}`.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleFile {
    match_sni: String,
    action: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rate: Option<u64>,
    scope: String,
}

impl From<PolicyRule> for RuleFile {
    fn from(r: PolicyRule) -> Self {
        let (action, rate) = match r.action {
            PolicyAction::Block => ("block", None),
            PolicyAction::Throttle(bps) => ("throttle", Some(bps)),
        };
        Self { match_sni: r.match_sni, action: action.into(), rate, scope: r.scope.label().into() }
    }
}

impl TryFrom<RuleFile> for PolicyRule {
    type Error = String;

    fn try_from(f: RuleFile) -> Result<Self, String> {
        let action = match (f.action.to_ascii_lowercase().as_str(), f.rate) {
            ("block", None) => PolicyAction::Block,
            ("block", Some(_)) => return Err("block rules take no rate".into()),
            ("throttle", Some(0)) | ("throttle", None) => return Err("throttle rules need a positive rate".into()),
            ("throttle", Some(bps)) => PolicyAction::Throttle(bps),
            (other, _) => return Err(format!("unknown action {other:?}")),
        };
        let scope = Scope::parse(&f.scope).ok_or_else(|| format!("unknown scope {:?}", f.scope))?;
        if f.match_sni.is_empty() || f.match_sni != f.match_sni.to_ascii_lowercase() {
            return Err(format!("match_sni {:?} must be a non-empty lowercase pattern", f.match_sni));
        }
        Ok(PolicyRule { match_sni: f.match_sni, action, scope })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Policy {
    pub target_service: String,
    pub rules: Vec<PolicyRule>,
    /// Evidence summary; not part of the policy file.
    #[serde(skip)]
    pub derivation_note: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Decision {
    Allow,
    Block,
    Throttle(u64),
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Decision::Allow => f.write_str("allow"),
            Decision::Block => f.write_str("block"),
            Decision::Throttle(bps) => write!(f, "throttle {bps} b/s"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PolicyError {
    #[error("service {0:?} has no identifiable side channels")]
    NoSideChannels(String),
    #[error("throttle rate must be positive")]
    InvalidRate,
    #[error("policy file: {0}")]
    File(String),
}

impl Policy {
    pub fn empty(target: impl Into<String>) -> Self {
        Self { target_service: target.into(), rules: Vec::new(), derivation_note: String::new() }
    }

    /// Decision for a server name, first matching rule wins.
    pub fn decide(&self, sni: Option<&str>) -> Decision {
        self.decide_with(sni, |_| true)
    }

    /// As [`Policy::decide`], considering only rules accepted by `active`.
    pub fn decide_with(&self, sni: Option<&str>, active: impl Fn(&PolicyRule) -> bool) -> Decision {
        let Some(sni) = sni else { return Decision::Allow };
        match self.rules.iter().filter(|r| active(r)).find(|r| r.matches(sni)).map(|r| r.action) {
            None => Decision::Allow,
            Some(PolicyAction::Block) => Decision::Block,
            Some(PolicyAction::Throttle(bps)) => Decision::Throttle(bps),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("policy serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, PolicyError> {
        serde_json::from_str(text).map_err(|e| PolicyError::File(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), PolicyError> {
        std::fs::write(path, self.to_json() + "\n").map_err(|e| PolicyError::File(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PolicyError> {
        let text = std::fs::read_to_string(path).map_err(|e| PolicyError::File(e.to_string()))?;
        Self::from_json(&text)
    }
}

/// What the middlebox does with a connection opening with `hello`. Only
/// the visible (outer) SNI is consulted.
pub fn apply_policy(hello: &ClientHello, policy: &Policy) -> Decision {
    policy.decide(hello.sni())
}

/// One exact-host rule per distinct server name seen on the target's
/// SNI-matched side flows, sorted by host.
///
/// Names that also appear as the visible SNI of a full-ECH flow are left
/// out, so the policy never touches protected connections.
pub fn derive_attack_policy(
    classes: &[ChannelClassification],
    target: &str,
    action: PolicyAction,
    scope: Scope,
) -> Result<Policy, PolicyError> {
    if action == PolicyAction::Throttle(0) {
        return Err(PolicyError::InvalidRate);
    }
    let is_target = |c: &ChannelClassification| c.service.as_deref().is_some_and(|s| s.eq_ignore_ascii_case(target));
    let service_name = classes
        .iter()
        .find(|c| is_target(c))
        .and_then(|c| c.service.clone())
        .unwrap_or_else(|| target.to_string());

    let mut hosts: BTreeMap<String, usize> = BTreeMap::new();
    for c in classes {
        let matched = c.evidence.iter().any(|e| matches!(e, Evidence::SniMatched(_)));
        if c.role == ChannelRole::Side && matched && !c.is_full_ech() && is_target(c) {
            if let Some(sni) = &c.sni {
                *hosts.entry(normalize_host(sni)).or_default() += 1;
            }
        }
    }
    let protected: BTreeSet<String> = classes
        .iter()
        .filter(|c| c.is_full_ech())
        .filter_map(|c| c.sni.as_deref().map(normalize_host))
        .collect();
    hosts.retain(|h, _| !protected.contains(h));
    if hosts.is_empty() {
        return Err(PolicyError::NoSideChannels(service_name));
    }

    let flows: usize = hosts.values().sum();
    let listing: Vec<String> = hosts.iter().map(|(h, n)| format!("{h} ({n})")).collect();
    let derivation_note = format!(
        "{flows} side flow(s) of {service_name} with readable SNI: {}. Rules match the SNI only; \
         some of these names belong to shared CDNs and may also front other tenants.",
        listing.join(", ")
    );
    Ok(Policy {
        target_service: service_name,
        rules: hosts.into_keys().map(|h| PolicyRule::new(h, action, scope)).collect(),
        derivation_note,
    })
}
