use std::ffi::OsStr;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use echoscope::capture::{export_report, read_capture, read_report, reassemble_flows, ReassemblyConfig};
use echoscope::classify::{
    classify_flows, classify_summaries, load_profiles, table1_profiles, ChannelClassification, ChannelRole,
    ClassificationReport, ClassifierConfig, FlowSummary, ServiceProfile,
};
use echoscope::policy::{derive_attack_policy, Policy, PolicyAction, PolicyRule, Scope};
use echoscope::sim::{
    profile_block_policy, render_outcome_table, simulate_with_profiles, Scenario, ServiceModel, SimOutcome,
    DEFAULT_SEGMENTS,
};

const GRAMMAR: &str = "\
usage:
  echoscope analyze  --in <capture.pcap|.pcapng> --out <report.csv|.jsonl>
  echoscope classify --in <capture|report.csv|report.jsonl> --out <classes.json>
                     [--profiles <file.toml>] [--threshold-primary <bytes>]
                     [--threshold-side <bytes>] [--threshold-session <seconds>]
  echoscope policy   --in <classes.json|report|dir> --target <service> [--out <policy.json>]
                     [--action block|throttle] [--rate <bits/s>] [--scope before|during|always]
                     [--profiles <file.toml>]
  echoscope simulate --in <policy.json> --scenario before|during [--target <service>]
                     [--model <model.toml>] [--segments <n>] [--out <outcome.json>]
  echoscope table2   [--segments <n>] [--out <table.txt>]

ECHOSCOPE_PROFILES sets the default for --profiles.";

#[derive(Parser)]
#[command(name = "echoscope", version, about = "Audit TLS side channels in packet captures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reassemble flows and write the per-flow report.
    Analyze {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Label flows as primary or side channels and attribute services.
    Classify {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        profiles: ProfileArg,
        #[arg(long)]
        threshold_primary: Option<u64>,
        #[arg(long)]
        threshold_side: Option<u64>,
        #[arg(long)]
        threshold_session: Option<f64>,
    },
    /// Derive the SNI rule list that targets one service's side channels.
    Policy {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        target: String,
        #[arg(long, value_enum, default_value_t = ActionArg::Block)]
        action: ActionArg,
        #[arg(long)]
        rate: Option<u64>,
        #[arg(long, value_enum, default_value_t = ScopeArg::Always)]
        scope: ScopeArg,
        /// Writes the policy to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        profiles: ProfileArg,
    },
    /// Replay a streaming session behind a policy.
    Simulate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        target: Option<String>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, value_enum)]
        scenario: ScenarioArg,
        #[arg(long, default_value_t = DEFAULT_SEGMENTS)]
        segments: u32,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        profiles: ProfileArg,
    },
    /// Regenerate the outcome grid from the shipped models.
    Table2 {
        #[arg(long, default_value_t = DEFAULT_SEGMENTS)]
        segments: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ProfileArg {
    #[arg(long, env = "ECHOSCOPE_PROFILES")]
    profiles: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ActionArg {
    Block,
    Throttle,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScopeArg {
    Before,
    During,
    Always,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    Before,
    During,
}

enum Failure {
    Usage(String),
    Data(String),
}

fn data(path: &Path, e: impl Display) -> Failure {
    Failure::Data(format!("{}: {e}", path.display()))
}

fn require_file(path: &Path) -> Result<(), Failure> {
    if path.exists() {
        Ok(())
    } else {
        Err(Failure::Usage(format!("{} does not exist", path.display())))
    }
}

fn profiles(arg: &ProfileArg) -> Result<Vec<ServiceProfile>, Failure> {
    match &arg.profiles {
        Some(path) => {
            require_file(path)?;
            load_profiles(path).map_err(|e| data(path, e))
        }
        None => Ok(table1_profiles()),
    }
}

fn is_report(path: &Path) -> bool {
    matches!(path.extension().and_then(OsStr::to_str), Some("csv" | "jsonl" | "ndjson"))
}

fn classify_path(path: &Path, cfg: &ClassifierConfig) -> Result<Vec<ChannelClassification>, Failure> {
    if is_report(path) {
        let rows = read_report(path).map_err(|e| data(path, e))?;
        let summaries: Vec<FlowSummary> = rows.iter().map(FlowSummary::from).collect();
        Ok(classify_summaries(&summaries, cfg))
    } else {
        let (events, _) = read_capture(path).and_then(|r| r.read_all()).map_err(|e| data(path, e))?;
        let flows = reassemble_flows(events, &ReassemblyConfig::default());
        Ok(classify_flows(&flows, cfg))
    }
}

/// Classifications from a report, capture, classification file, or a
/// directory holding any of these.
fn gather(path: &Path, cfg: &ClassifierConfig) -> Result<Vec<ChannelClassification>, Failure> {
    if path.is_dir() {
        let mut entries: Vec<PathBuf> = fs::read_dir(path)
            .map_err(|e| data(path, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        entries.sort();
        let mut out = Vec::new();
        for entry in entries {
            out.extend(gather(&entry, cfg)?);
        }
        return Ok(out);
    }
    if path.extension().and_then(OsStr::to_str) == Some("json") {
        return ClassificationReport::load(path).map(|r| r.classifications).map_err(|e| Failure::Data(e.to_string()));
    }
    classify_path(path, cfg)
}

fn write_out(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| data(path, e))
}

fn outcome_json(service: &str, scenario: Scenario, outcome: &SimOutcome) -> String {
    let value = serde_json::json!({
        "service": service,
        "scenario": scenario.label(),
        "label": outcome.label(),
        "outcome": outcome,
    });
    serde_json::to_string_pretty(&value).expect("outcome serializes") + "\n"
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Analyze { input, out } => {
            require_file(&input)?;
            let reader = read_capture(&input).map_err(|e| data(&input, e))?;
            let (events, stats) = reader.read_all().map_err(|e| data(&input, e))?;
            let flows = reassemble_flows(events, &ReassemblyConfig::default());
            export_report(&flows, &out).map_err(|e| data(&out, e))?;
            eprintln!("{} packets, {} flows -> {}", stats.packets, flows.len(), out.display());
        }
        Command::Classify { input, out, profiles: p, threshold_primary, threshold_side, threshold_session } => {
            require_file(&input)?;
            let defaults = ClassifierConfig::default();
            let cfg = ClassifierConfig {
                primary_volume_threshold: threshold_primary.unwrap_or(defaults.primary_volume_threshold),
                side_volume_ceiling: threshold_side.unwrap_or(defaults.side_volume_ceiling),
                session_length_threshold: threshold_session.unwrap_or(defaults.session_length_threshold),
                profiles: profiles(&p)?,
            };
            cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
            let classes = classify_path(&input, &cfg)?;
            let report = ClassificationReport::build(classes, &cfg);
            report.save(&out).map_err(|e| Failure::Data(e.to_string()))?;
            for role in [ChannelRole::Primary, ChannelRole::Side, ChannelRole::Unknown] {
                let n = report.classifications.iter().filter(|c| c.role == role).count();
                println!("{role:?}: {n}");
            }
            for (service, group) in &report.services {
                println!("{service}: {} side flow(s)", group.side_flows.len());
            }
        }
        Command::Policy { input, target, action, rate, scope, out, profiles: p } => {
            require_file(&input)?;
            let action = match (action, rate) {
                (ActionArg::Block, None) => PolicyAction::Block,
                (ActionArg::Block, Some(_)) => return Err(Failure::Usage("--rate only applies to --action throttle".into())),
                (ActionArg::Throttle, Some(bps)) if bps > 0 => PolicyAction::Throttle(bps),
                (ActionArg::Throttle, _) => return Err(Failure::Usage("--action throttle needs a positive --rate".into())),
            };
            let scope = match scope {
                ScopeArg::Before => Scope::BeforeSession,
                ScopeArg::During => Scope::DuringSession,
                ScopeArg::Always => Scope::Always,
            };
            let cfg = ClassifierConfig { profiles: profiles(&p)?, ..Default::default() };
            let classes = gather(&input, &cfg)?;
            let policy = derive_attack_policy(&classes, &target, action, scope).map_err(|e| data(&input, e))?;
            match out {
                Some(path) => policy.save(&path).map_err(|e| data(&path, e))?,
                None => println!("{}", policy.to_json()),
            }
            eprintln!("{} rule(s) for {}", policy.rules.len(), policy.target_service);
            eprintln!("{}", policy.derivation_note);
        }
        Command::Simulate { input, target, model, scenario, segments, out, profiles: p } => {
            require_file(&input)?;
            let policy = Policy::load(&input).map_err(|e| data(&input, e))?;
            let name = target.unwrap_or_else(|| policy.target_service.clone());
            let model = match model {
                Some(path) => {
                    require_file(&path)?;
                    ServiceModel::load(&path).map_err(|e| data(&path, e))?
                }
                None => ServiceModel::shipped_named(&name)
                    .ok_or_else(|| Failure::Usage(format!("no shipped model for {name:?}; pass --model")))?,
            };
            let scenario = match scenario {
                ScenarioArg::Before => Scenario::BlockBefore,
                ScenarioArg::During => Scenario::BlockDuring,
            };
            let profiles = profiles(&p)?;
            let outcome = simulate_with_profiles(&model, &profiles, &policy, scenario, segments)
                .map_err(|e| data(&input, e))?;
            let json = outcome_json(&model.name, scenario, &outcome);
            match out {
                Some(path) => write_out(&path, &json)?,
                None => print!("{json}"),
            }
            eprintln!("{} / {}: {}", model.name, scenario.label(), outcome.label());
        }
        Command::Table2 { segments, out } => {
            let table = table2(segments).map_err(Failure::Data)?;
            match out {
                Some(path) => write_out(&path, &table)?,
                None => print!("{table}"),
            }
        }
    }
    Ok(())
}

fn table2(segments: u32) -> Result<String, String> {
    let profiles = table1_profiles();
    let mut grid = Vec::new();
    let mut extended = None;
    for model in ServiceModel::shipped() {
        let profile = profiles
            .iter()
            .find(|p| p.service_name == model.name)
            .ok_or_else(|| format!("no profile for {}", model.name))?;
        let policy = profile_block_policy(profile, Scope::Always);
        for scenario in [Scenario::BlockBefore, Scenario::BlockDuring] {
            let outcome =
                simulate_with_profiles(&model, &profiles, &policy, scenario, segments).map_err(|e| e.to_string())?;
            grid.push(((model.name.clone(), scenario), outcome));
        }
        if let Some(fallback) = &model.fallback {
            let mut wider = policy.clone();
            wider.rules.extend(
                fallback.fallback_snis.iter().map(|h| PolicyRule::new(h.clone(), PolicyAction::Block, Scope::Always)),
            );
            let outcome = simulate_with_profiles(&model, &profiles, &wider, Scenario::BlockDuring, segments)
                .map_err(|e| e.to_string())?;
            extended = Some(format!("{}, fallback servers also blocked, During: {}\n", model.name, outcome.label()));
        }
    }
    let mut text = render_outcome_table(&grid).map_err(|e| e.to_string())?;
    if let Some(line) = extended {
        text.push('\n');
        text.push_str(&line);
    }
    Ok(text)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            eprintln!("\n{GRAMMAR}");
            return ExitCode::from(1);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\n{GRAMMAR}");
            ExitCode::from(1)
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
