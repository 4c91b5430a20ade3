use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

const TABLE1: &str = include_str!("../../../../profiles/table1.toml");

/// Named set of server-name patterns belonging to one service.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceProfile {
    #[serde(rename = "name")]
    pub service_name: String,
    pub sni_patterns: Vec<String>,
    #[serde(default)]
    pub notes: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProfileError {
    #[error("profile file: {0}")]
    Parse(String),
    #[error("service {0:?} has no patterns")]
    NoPatterns(String),
    #[error("service name must not be empty")]
    NoName,
    #[error("service {0:?} is defined twice")]
    DuplicateService(String),
    #[error("pattern {0:?} is not a lowercase host name or .suffix")]
    BadPattern(String),
    #[error("service {service:?}: pattern {covering:?} already matches {covered:?}")]
    Redundant { service: String, covering: String, covered: String },
    #[error("pattern {a_pattern:?} ({a_service}) and {b_pattern:?} ({b_service}) match the same hosts")]
    Ambiguous { a_service: String, a_pattern: String, b_service: String, b_pattern: String },
}

/// Lowercase, drop a trailing root dot and a URL scheme.
pub fn normalize_host(host: &str) -> String {
    let host = host.trim();
    let host = host.split_once("://").map_or(host, |(_, rest)| rest);
    host.trim_end_matches('/').trim_end_matches('.').to_ascii_lowercase()
}

/// `.domain` matches strict subdomains; anything else must match exactly.
pub fn pattern_matches(pattern: &str, host: &str) -> bool {
    if pattern.starts_with('.') {
        host.len() > pattern.len() && host.ends_with(pattern)
    } else {
        host == pattern
    }
}

/// Whether some host name matches both patterns.
fn patterns_overlap(a: &str, b: &str) -> bool {
    match (a.starts_with('.'), b.starts_with('.')) {
        (false, false) => a == b,
        (true, false) => pattern_matches(a, b),
        (false, true) => pattern_matches(b, a),
        (true, true) => a.ends_with(b) || b.ends_with(a),
    }
}

fn valid_pattern(p: &str) -> bool {
    let body = p.strip_prefix('.').unwrap_or(p);
    !body.is_empty()
        && !body.starts_with('.')
        && !body.ends_with('.')
        && !body.contains("..")
        && body.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'-' || b == b'.')
}

impl ServiceProfile {
    pub fn new<S: Into<String>>(name: impl Into<String>, patterns: impl IntoIterator<Item = S>) -> Self {
        Self {
            service_name: name.into(),
            sni_patterns: patterns.into_iter().map(Into::into).collect(),
            notes: String::new(),
        }
    }

    /// The first pattern matching `host`.
    pub fn matching_pattern(&self, host: &str) -> Option<&str> {
        self.sni_patterns.iter().map(String::as_str).find(|p| pattern_matches(p, host))
    }

    fn validate(&self) -> Result<(), ProfileError> {
        if self.service_name.trim().is_empty() {
            return Err(ProfileError::NoName);
        }
        if self.sni_patterns.is_empty() {
            return Err(ProfileError::NoPatterns(self.service_name.clone()));
        }
        for p in &self.sni_patterns {
            if !valid_pattern(p) {
                return Err(ProfileError::BadPattern(p.clone()));
            }
        }
        for (i, a) in self.sni_patterns.iter().enumerate() {
            for b in &self.sni_patterns[i + 1..] {
                if patterns_overlap(a, b) {
                    let (covering, covered) = if a.len() <= b.len() { (a, b) } else { (b, a) };
                    return Err(ProfileError::Redundant {
                        service: self.service_name.clone(),
                        covering: covering.clone(),
                        covered: covered.clone(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Check each profile and reject patterns shared across services.
pub fn validate_profiles(profiles: &[ServiceProfile]) -> Result<(), ProfileError> {
    let mut names = HashSet::new();
    for p in profiles {
        p.validate()?;
        if !names.insert(p.service_name.to_ascii_lowercase()) {
            return Err(ProfileError::DuplicateService(p.service_name.clone()));
        }
    }
    for (i, a) in profiles.iter().enumerate() {
        for b in &profiles[i + 1..] {
            for pa in &a.sni_patterns {
                if let Some(pb) = b.sni_patterns.iter().find(|pb| patterns_overlap(pa, pb)) {
                    return Err(ProfileError::Ambiguous {
                        a_service: a.service_name.clone(),
                        a_pattern: pa.clone(),
                        b_service: b.service_name.clone(),
                        b_pattern: pb.clone(),
                    });
                }
            }
        }
    }
    Ok(())
}

#[derive(Deserialize)]
struct ProfileFile {
    service: Vec<ServiceProfile>,
}

/// Parse and validate a TOML profile file (`[[service]]` tables).
pub fn parse_profiles(text: &str) -> Result<Vec<ServiceProfile>, ProfileError> {
    let file: ProfileFile = toml::from_str(text).map_err(|e| ProfileError::Parse(e.message().to_string()))?;
    validate_profiles(&file.service)?;
    Ok(file.service)
}

pub fn load_profiles(path: impl AsRef<Path>) -> Result<Vec<ServiceProfile>, ProfileError> {
    let text = std::fs::read_to_string(path.as_ref()).map_err(|e| ProfileError::Parse(e.to_string()))?;
    parse_profiles(&text)
}

/// The shipped Hotstar / Primevideo / YouTube side-channel profiles.
pub fn table1_profiles() -> Vec<ServiceProfile> {
    parse_profiles(TABLE1).expect("shipped profiles are valid")
}

/// The service whose patterns match `sni`, with the matching pattern.
pub fn associate_service<'p>(sni: &str, profiles: &'p [ServiceProfile]) -> Option<(&'p str, &'p str)> {
    let host = normalize_host(sni);
    profiles
        .iter()
        .find_map(|p| p.matching_pattern(&host).map(|pat| (p.service_name.as_str(), pat)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table1_shape() {
        let profiles = table1_profiles();
        let counts: Vec<_> = profiles.iter().map(|p| (p.service_name.as_str(), p.sni_patterns.len())).collect();
        assert_eq!(counts, [("Hotstar", 8), ("Primevideo", 5), ("YouTube", 4)]);
    }

    #[test]
    fn association_examples() {
        let profiles = table1_profiles();
        let svc = |s: &str| associate_service(s, &profiles).map(|(n, _)| n);
        assert_eq!(svc("persona.hotstar.com"), Some("Hotstar"));
        assert_eq!(svc("cloudfront.xp-assets.aiv-cdn.net"), Some("Primevideo"));
        assert_eq!(svc("https://img1.hotstarext.com"), Some("Hotstar"));
        assert_eq!(svc("Fonts.GStatic.com."), Some("YouTube"));
        assert_eq!(svc("example.org"), None);
        assert_eq!(svc("www.hotstar.com"), None);
    }

    #[test]
    fn suffix_patterns() {
        assert!(pattern_matches(".hotstar.com", "api.hotstar.com"));
        assert!(!pattern_matches(".hotstar.com", "hotstar.com"));
        assert!(!pattern_matches(".hotstar.com", "nothotstar.com"));
        assert!(patterns_overlap(".b.com", ".a.b.com"));
        assert!(!patterns_overlap("b.com", ".b.com"));
    }

    #[test]
    fn validation_errors() {
        let p = |name: &str, pats: &[&str]| ServiceProfile::new(name, pats.iter().copied());
        assert_eq!(validate_profiles(&[p("A", &[])]), Err(ProfileError::NoPatterns("A".into())));
        assert!(matches!(validate_profiles(&[p("A", &["Upper.com"])]), Err(ProfileError::BadPattern(_))));
        assert!(matches!(
            validate_profiles(&[p("A", &[".a.com", "x.a.com"])]),
            Err(ProfileError::Redundant { .. })
        ));
        assert!(validate_profiles(&[p("A", &["a.com", "x.a.com"])]).is_ok());
        assert!(matches!(
            validate_profiles(&[p("A", &["x.cdn.net"]), p("B", &[".cdn.net"])]),
            Err(ProfileError::Ambiguous { .. })
        ));
        assert!(matches!(
            validate_profiles(&[p("A", &["a.com"]), p("a", &["b.com"])]),
            Err(ProfileError::DuplicateService(_))
        ));
        assert!(matches!(parse_profiles("[[service]]\nname = 1"), Err(ProfileError::Parse(_))));
    }
}
