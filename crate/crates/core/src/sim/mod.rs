//! Segment-level replay of a streaming session behind an SNI shaper.

mod model;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::classify::{table1_profiles, ServiceProfile};
use crate::ech::{build_outer_client_hello, EchConfig, MaskingSealer};
use crate::policy::{apply_policy, Decision, Policy, PolicyAction, PolicyRule, Scope};
use crate::tls::{ClientHello, ProtocolVersion};

pub use model::{DependencyKind, Fallback, ModelError, ServiceModel, SideDependency};

/// Segments per simulated session unless told otherwise.
pub const DEFAULT_SEGMENTS: u32 = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scenario {
    /// Rules are in place before the player starts.
    BlockBefore,
    /// Rules switch on at segment 1.
    BlockDuring,
}

impl Scenario {
    pub fn parse(text: &str) -> Option<Self> {
        match text.to_ascii_lowercase().as_str() {
            "before" | "blockbefore" | "block_before" => Some(Scenario::BlockBefore),
            "during" | "blockduring" | "block_during" => Some(Scenario::BlockDuring),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Scenario::BlockBefore => "Before",
            Scenario::BlockDuring => "During",
        }
    }

    fn rule_active(self, rule: &PolicyRule, startup: bool) -> bool {
        match (self, rule.scope) {
            (_, Scope::Always) => !(startup && self == Scenario::BlockDuring),
            (Scenario::BlockBefore, Scope::BeforeSession) => true,
            (Scenario::BlockDuring, Scope::DuringSession) => !startup,
            _ => false,
        }
    }
}

/// Ordered from least to most harmful.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Playback {
    Normal,
    DegradedQuality,
    StopsAfterBuffer,
    NoVideo,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SimEvent {
    SideFetch { host: String, kind: DependencyKind, decision: Decision },
    /// Main stream segment; `sni` is what the shaper sees.
    PrimaryFetch { sni: String, decision: Decision },
    /// Schedule source lost; this many buffered segments remain.
    ScheduleLost { host: String, buffered: u32 },
    FallbackSwitch { rate_bps: u64, quality: String },
    FallbackBlocked { host: String },
    Stopped { playback: Playback },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimelineEntry {
    /// 0 is the startup phase.
    pub segment: u32,
    pub event: SimEvent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimOutcome {
    pub playback: Playback,
    pub cosmetic_losses: Vec<String>,
    /// Rate at session end; 0 once playback has stopped.
    pub achieved_rate_bps: u64,
    pub segments_played: u32,
    pub timeline: Vec<TimelineEntry>,
}

impl SimOutcome {
    /// Table cell text for this outcome.
    pub fn label(&self) -> &'static str {
        match self.playback {
            Playback::NoVideo => "No video",
            Playback::StopsAfterBuffer => "No Video",
            Playback::DegradedQuality => "Reduced rate and quality downgrade",
            Playback::Normal if !self.cosmetic_losses.is_empty() => "Video playout, no thumbnails",
            Playback::Normal => "Normal",
        }
    }

    pub fn primary_fetches(&self) -> impl Iterator<Item = Decision> + '_ {
        self.timeline.iter().filter_map(|e| match &e.event {
            SimEvent::PrimaryFetch { decision, .. } => Some(*decision),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("a session needs at least one segment")]
    NoSegments,
    #[error("outcome grid is missing {0}")]
    IncompleteGrid(String),
}

fn primary_hello(model: &ServiceModel) -> ClientHello {
    let inner = ClientHello::builder()
        .server_name(&model.primary_host)
        .supported_versions(&[ProtocolVersion::TLS1_3])
        .key_share(&[(0x001d, vec![0x11; 32])])
        .build()
        .expect("fixed hello builds");
    let config = EchConfig::new(1, model.ech_public_name.clone(), model.primary_host.as_bytes().to_vec());
    build_outer_client_hello(&inner, &config, &MaskingSealer).expect("primary hello seals")
}

struct Run<'a> {
    policy: &'a Policy,
    scenario: Scenario,
    timeline: Vec<TimelineEntry>,
    cosmetic_losses: Vec<String>,
}

impl Run<'_> {
    fn fetch(&mut self, segment: u32, host: &str, kind: DependencyKind) -> bool {
        let startup = segment == 0;
        let decision = self.policy.decide_with(Some(host), |r| self.scenario.rule_active(r, startup));
        self.timeline.push(TimelineEntry {
            segment,
            event: SimEvent::SideFetch { host: host.to_string(), kind, decision },
        });
        let ok = decision != Decision::Block;
        if !ok && kind == DependencyKind::Cosmetic && !self.cosmetic_losses.iter().any(|h| h == host) {
            self.cosmetic_losses.push(host.to_string());
        }
        ok
    }

    fn fallback_open(&mut self, segment: u32, fallback: &Fallback) -> bool {
        for host in &fallback.fallback_snis {
            let decision = self.policy.decide_with(Some(host), |r| self.scenario.rule_active(r, false));
            if decision == Decision::Block {
                self.timeline.push(TimelineEntry { segment, event: SimEvent::FallbackBlocked { host: host.clone() } });
                return false;
            }
        }
        true
    }

    fn push(&mut self, segment: u32, event: SimEvent) {
        self.timeline.push(TimelineEntry { segment, event });
    }
}

/// Replay `session_segments` segments of `model` behind `policy`, checking
/// the model against the shipped profiles.
pub fn simulate(
    model: &ServiceModel,
    policy: &Policy,
    scenario: Scenario,
    session_segments: u32,
) -> Result<SimOutcome, SimError> {
    simulate_with_profiles(model, &table1_profiles(), policy, scenario, session_segments)
}

pub fn simulate_with_profiles(
    model: &ServiceModel,
    profiles: &[ServiceProfile],
    policy: &Policy,
    scenario: Scenario,
    session_segments: u32,
) -> Result<SimOutcome, SimError> {
    if session_segments == 0 {
        return Err(SimError::NoSegments);
    }
    model.validate(profiles)?;
    let hello = primary_hello(model);
    let outer_sni = hello.sni().unwrap_or_default().to_string();
    let mut run = Run { policy, scenario, timeline: Vec::new(), cosmetic_losses: Vec::new() };

    let mut startup_ok = true;
    for dep in &model.side_dependencies {
        if !run.fetch(0, &dep.host, dep.kind) && dep.kind.is_critical() {
            startup_ok = false;
        }
    }

    let mut playback = Playback::Normal;
    let mut rate = model.normal_rate_bps;
    let mut draining: Option<u32> = None;
    let mut played = 0;
    if !startup_ok {
        playback = Playback::NoVideo;
        run.push(0, SimEvent::Stopped { playback });
    }

    let mut segment = 1;
    while playback < Playback::StopsAfterBuffer && segment <= session_segments {
        for dep in &model.side_dependencies {
            if dep.period_segments == 0 || segment % dep.period_segments != 0 {
                continue;
            }
            if playback == Playback::DegradedQuality && dep.kind.is_critical() {
                // The fallback server now supplies the schedule.
                let fallback = model.fallback.as_ref().expect("degraded implies fallback");
                if !run.fallback_open(segment, fallback) {
                    playback = Playback::NoVideo;
                    break;
                }
                continue;
            }
            if run.fetch(segment, &dep.host, dep.kind) || !dep.kind.is_critical() || draining.is_some() {
                continue;
            }
            match &model.fallback {
                Some(fallback) => {
                    if run.fallback_open(segment, fallback) {
                        playback = Playback::DegradedQuality;
                        rate = fallback.degraded_rate_bps;
                        let quality = fallback.degraded_quality_label.clone();
                        run.push(segment, SimEvent::FallbackSwitch { rate_bps: rate, quality });
                    } else {
                        playback = Playback::NoVideo;
                        break;
                    }
                }
                None => {
                    draining = Some(model.schedule_buffer_segments);
                    let buffered = model.schedule_buffer_segments;
                    run.push(segment, SimEvent::ScheduleLost { host: dep.host.clone(), buffered });
                }
            }
        }
        if playback == Playback::NoVideo {
            run.push(segment, SimEvent::Stopped { playback });
            break;
        }
        if let Some(left) = draining.as_mut() {
            if *left == 0 {
                playback = Playback::StopsAfterBuffer;
                run.push(segment, SimEvent::Stopped { playback });
                break;
            }
            *left -= 1;
        }
        let decision = apply_policy(&hello, &Policy {
            rules: policy.rules.iter().filter(|r| scenario.rule_active(r, false)).cloned().collect(),
            ..Policy::empty(policy.target_service.clone())
        });
        run.push(segment, SimEvent::PrimaryFetch { sni: outer_sni.clone(), decision });
        match decision {
            Decision::Block => {
                playback = Playback::NoVideo;
                run.push(segment, SimEvent::Stopped { playback });
                break;
            }
            Decision::Throttle(bps) => rate = rate.min(bps),
            Decision::Allow => {}
        }
        played += 1;
        segment += 1;
    }

    let mut cosmetic_losses = run.cosmetic_losses;
    cosmetic_losses.sort();
    Ok(SimOutcome {
        playback,
        cosmetic_losses,
        achieved_rate_bps: if playback >= Playback::StopsAfterBuffer { 0 } else { rate },
        segments_played: played,
        timeline: run.timeline,
    })
}

/// Block every profile pattern of `service`, in the given scope.
pub fn profile_block_policy(profile: &ServiceProfile, scope: Scope) -> Policy {
    let mut rules: Vec<PolicyRule> =
        profile.sni_patterns.iter().map(|p| PolicyRule::new(p.clone(), PolicyAction::Block, scope)).collect();
    rules.sort_by(|a, b| a.match_sni.cmp(&b.match_sni));
    Policy { rules, ..Policy::empty(profile.service_name.clone()) }
}

/// One row per service in first-appearance order, Before and During
/// columns, cells mapped through [`SimOutcome::label`].
pub fn render_outcome_table(outcomes: &[((String, Scenario), SimOutcome)]) -> Result<String, SimError> {
    if outcomes.is_empty() {
        return Err(SimError::IncompleteGrid("every cell".into()));
    }
    let mut services: Vec<&str> = Vec::new();
    for ((s, _), _) in outcomes {
        if !services.contains(&s.as_str()) {
            services.push(s);
        }
    }
    let cell = |service: &str, scenario: Scenario| {
        outcomes
            .iter()
            .find(|((s, sc), _)| s == service && *sc == scenario)
            .map(|(_, o)| o.label())
            .ok_or_else(|| SimError::IncompleteGrid(format!("{service}/{}", scenario.label())))
    };
    let mut rows = Vec::new();
    for s in &services {
        rows.push([s.to_string(), cell(s, Scenario::BlockBefore)?.to_string(), cell(s, Scenario::BlockDuring)?.to_string()]);
    }
    let header = ["Service".to_string(), "Before".to_string(), "During".to_string()];
    let widths: Vec<usize> =
        (0..3).map(|i| rows.iter().chain([&header]).map(|r| r[i].len()).max().unwrap_or(0)).collect();
    let line = |r: &[String; 3]| format!("{:<w0$} | {:<w1$} | {}", r[0], r[1], r[2], w0 = widths[0], w1 = widths[1]);
    let mut out = line(&header);
    out.push('\n');
    let _ = writeln!(out, "{}-+-{}-+-{}", "-".repeat(widths[0]), "-".repeat(widths[1]), "-".repeat(widths[2]));
    for r in &rows {
        out.push_str(line(r).trim_end());
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(name: &str) -> ServiceModel {
        ServiceModel::shipped_named(name).unwrap()
    }

    fn block_all(name: &str) -> Policy {
        let profiles = table1_profiles();
        profile_block_policy(profiles.iter().find(|p| p.service_name == name).unwrap(), Scope::Always)
    }

    fn run(name: &str, policy: &Policy, scenario: Scenario) -> SimOutcome {
        simulate(&model(name), policy, scenario, DEFAULT_SEGMENTS).unwrap()
    }

    #[test]
    fn hotstar() {
        let p = block_all("Hotstar");
        assert_eq!(run("Hotstar", &p, Scenario::BlockBefore).playback, Playback::NoVideo);
        let during = run("Hotstar", &p, Scenario::BlockDuring);
        assert_eq!(during.playback, Playback::StopsAfterBuffer);
        assert_eq!(during.achieved_rate_bps, 0);
        // Segments 1-3 before the loss at 4, then 3 from the buffer.
        assert_eq!(during.segments_played, 6);
        assert!(during.segments_played >= model("Hotstar").schedule_buffer_segments);
    }

    #[test]
    fn primevideo() {
        let p = block_all("Primevideo");
        assert_eq!(run("Primevideo", &p, Scenario::BlockBefore).playback, Playback::NoVideo);
        let during = run("Primevideo", &p, Scenario::BlockDuring);
        assert_eq!(during.playback, Playback::DegradedQuality);
        assert_eq!(during.achieved_rate_bps, 844_444);

        let mut extended = p.clone();
        for host in &model("Primevideo").fallback.unwrap().fallback_snis {
            extended.rules.push(PolicyRule::new(host.clone(), PolicyAction::Block, Scope::Always));
        }
        assert_eq!(run("Primevideo", &extended, Scenario::BlockDuring).playback, Playback::NoVideo);
    }

    #[test]
    fn youtube_loses_only_decoration() {
        let p = block_all("YouTube");
        for scenario in [Scenario::BlockBefore, Scenario::BlockDuring] {
            let o = run("YouTube", &p, scenario);
            assert_eq!(o.playback, Playback::Normal);
            assert!(!o.cosmetic_losses.is_empty());
            assert_eq!(o.achieved_rate_bps, 4_500_000);
        }
    }

    #[test]
    fn empty_policy_is_normal() {
        for m in ServiceModel::shipped() {
            for scenario in [Scenario::BlockBefore, Scenario::BlockDuring] {
                let o = simulate(&m, &Policy::empty(m.name.clone()), scenario, 10).unwrap();
                assert_eq!((o.playback, o.cosmetic_losses.len()), (Playback::Normal, 0));
                assert_eq!(o.segments_played, 10);
                assert!(o.primary_fetches().all(|d| d == Decision::Allow));
            }
        }
    }

    #[test]
    fn scopes_follow_scenario() {
        let before_only = profile_block_policy(&table1_profiles()[0], Scope::BeforeSession);
        assert_eq!(run("Hotstar", &before_only, Scenario::BlockDuring).playback, Playback::Normal);
        let during_only = profile_block_policy(&table1_profiles()[0], Scope::DuringSession);
        assert_eq!(run("Hotstar", &during_only, Scenario::BlockBefore).playback, Playback::Normal);
        assert_eq!(run("Hotstar", &during_only, Scenario::BlockDuring).playback, Playback::StopsAfterBuffer);
    }

    #[test]
    fn throttled_side_fetches_succeed() {
        let mut p = block_all("Hotstar");
        for r in &mut p.rules {
            r.action = PolicyAction::Throttle(50_000);
        }
        let o = run("Hotstar", &p, Scenario::BlockBefore);
        assert_eq!(o.playback, Playback::Normal);
        assert_eq!(o.achieved_rate_bps, 1_000_000);
    }

    #[test]
    fn errors() {
        let p = Policy::empty("Hotstar");
        assert_eq!(simulate(&model("Hotstar"), &p, Scenario::BlockBefore, 0), Err(SimError::NoSegments));
        let o = run("Hotstar", &p, Scenario::BlockBefore);
        let grid = vec![(("Hotstar".to_string(), Scenario::BlockBefore), o)];
        assert!(matches!(render_outcome_table(&grid), Err(SimError::IncompleteGrid(_))));
        assert!(matches!(render_outcome_table(&[]), Err(SimError::IncompleteGrid(_))));
    }

    #[test]
    fn table_layout() {
        let mut grid = Vec::new();
        for name in ["Hotstar", "Primevideo", "YouTube"] {
            for scenario in [Scenario::BlockBefore, Scenario::BlockDuring] {
                grid.push(((name.to_string(), scenario), run(name, &block_all(name), scenario)));
            }
        }
        let table = render_outcome_table(&grid).unwrap();
        let lines: Vec<_> = table.lines().collect();
        assert_eq!(lines.len(), 5);
        assert!(lines[0].starts_with("Service"));
        assert!(lines[2].contains("No video") && lines[2].contains("No Video"));
        assert!(lines[3].ends_with("Reduced rate and quality downgrade"));
        assert!(lines[4].ends_with("Video playout, no thumbnails"));
    }
}
