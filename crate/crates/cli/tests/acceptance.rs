//! Acceptance gate. Prints one PASS/FAIL line per criterion, then fails the
//! test if any criterion failed.

mod common;

use std::net::SocketAddr;
use std::panic;
use std::time::{Duration, Instant};

use common::{ech_hello, path_str, run, table1_hosts, write_table1_capture, ECH_PUBLIC_NAME};
use echoscope::capture::{reassemble_flows, CaptureReader, FlowKey, PacketEvent, ReassemblyConfig, Transport};
use echoscope::classify::{
    classify_summaries, ChannelRole, ClassificationReport, ClassifierConfig, Evidence, FlowSummary,
};
use echoscope::ech::{build_outer_client_hello, EchConfig, EchExtension, HpkeSuite, MaskingSealer};
use echoscope::policy::{apply_policy, derive_attack_policy, Decision, Policy, PolicyAction, Scope};
use echoscope::sim::{Playback, Scenario, ServiceModel};
use echoscope::synth::{write_capture, CaptureFormat, LinkLayer, TlsFlowSpec};
use echoscope::tls::{
    is_grease, parse_client_hello, parse_records, parse_records_resync, ClientHello, Extension, PrivacyLevel,
    ProtocolVersion,
};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

const SEED: u64 = 0x5eed_ec40;
const C1_LIMIT: Duration = Duration::from_secs(5);
const C2_LIMIT: Duration = Duration::from_secs(1);
const C3_FLOWS: usize = 1_000;
const C4_HELLOS: usize = 10_000;
const C4_FUZZ: usize = 10_000;
const C5_HELLOS: usize = 2_000;
const C6_FLOWS: usize = 500;
const C6_PERMUTATIONS: usize = 4;

/// Cells of the published outcome grid, Before then During.
const TABLE2: [(&str, &str, &str); 3] = [
    ("Hotstar", "No video", "No Video"),
    ("Primevideo", "No Video", "Video Playout : Reduced rate and quality downgrade"),
    ("YouTube", "Video playout, no thumbnails on webpage", "Video playout, no thumbnails on webpage"),
];
const TABLE2_PLAYBACK: [(Playback, Playback); 3] = [
    (Playback::NoVideo, Playback::StopsAfterBuffer),
    (Playback::NoVideo, Playback::DegradedQuality),
    (Playback::Normal, Playback::Normal),
];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn grease(rng: &mut StdRng) -> u16 {
    let n: u16 = rng.gen_range(0..16);
    (n << 12) | 0x0a00 | (n << 4) | 0x0a
}

fn random_host(rng: &mut StdRng) -> String {
    let labels = rng.gen_range(2..5);
    (0..labels)
        .map(|_| {
            let len = rng.gen_range(1..12);
            (0..len).map(|_| (b'a' + rng.gen_range(0..26)) as char).collect::<String>()
        })
        .collect::<Vec<_>>()
        .join(".")
}

fn random_version(rng: &mut StdRng) -> ProtocolVersion {
    match rng.gen_range(0..5) {
        0 => ProtocolVersion::TLS1_0,
        1 => ProtocolVersion::TLS1_1,
        2 => ProtocolVersion::TLS1_2,
        3 => ProtocolVersion::TLS1_3,
        _ => ProtocolVersion(grease(rng)),
    }
}

fn bytes(rng: &mut StdRng, max: usize) -> Vec<u8> {
    let len = rng.gen_range(0..=max);
    (0..len).map(|_| rng.gen()).collect()
}

fn random_hello(rng: &mut StdRng, force_versions: bool) -> ClientHello {
    let mut b = ClientHello::builder()
        .legacy_version(random_version(rng))
        .random(rng.gen())
        .session_id(bytes(rng, 32))
        .cipher_suites((0..rng.gen_range(1..16)).map(|_| if rng.gen_bool(0.1) { grease(rng) } else { rng.gen() }).collect());
    let mut used = std::collections::HashSet::new();
    let mut order: Vec<u8> = (0..9).collect();
    order.shuffle(rng);
    for kind in order {
        match kind {
            0 if rng.gen_bool(0.8) => b = b.server_name(&random_host(rng)),
            1 if rng.gen_bool(0.5) => b = b.alpn(&["h2", "http/1.1"][..rng.gen_range(1..3)]),
            2 if force_versions || rng.gen_bool(0.6) => {
                let mut v: Vec<_> = (0..rng.gen_range(1..4)).map(|_| random_version(rng)).collect();
                if force_versions {
                    v.push(if rng.gen() { ProtocolVersion::TLS1_3 } else { ProtocolVersion::TLS1_2 });
                }
                b = b.supported_versions(&v);
            }
            3 if rng.gen_bool(0.6) => b = b.key_share(&[(0x001d, bytes(rng, 32)), (rng.gen(), bytes(rng, 8))]),
            4 => {
                for _ in 0..rng.gen_range(0..3) {
                    let g = grease(rng);
                    if used.insert(g) {
                        b = b.extension(Extension::new(g, bytes(rng, 4)));
                    }
                }
            }
            5 => {
                for _ in 0..rng.gen_range(0..3) {
                    let t = rng.gen_range(100u16..0xfe00);
                    if !is_grease(t) && used.insert(t) {
                        b = b.extension(Extension::new(t, bytes(rng, 24)));
                    }
                }
            }
            6 if rng.gen_bool(0.4) => {
                let ech = if rng.gen_bool(0.2) {
                    EchExtension::Inner
                } else {
                    let mut payload = bytes(rng, 180);
                    payload.push(rng.gen());
                    EchExtension::Outer {
                        cipher_suite: HpkeSuite::HKDF_SHA256_AES128GCM,
                        config_id: rng.gen(),
                        enc: bytes(rng, 32),
                        payload,
                    }
                };
                b = b.ech(&ech);
            }
            7 if rng.gen_bool(0.2) => b = b.pre_shared_key(&bytes(rng, 16)),
            8 if rng.gen_bool(0.3) => {
                b = b.extension(Extension::supported_groups(&[0x001d, 0x0017, grease(rng)]))
            }
            _ => {}
        }
    }
    if !force_versions && rng.gen_bool(0.02) {
        b = b.no_extension_block();
    }
    b.build().expect("generated hello is well formed")
}

fn contains(hay: &[u8], needle: &[u8]) -> bool {
    hay.windows(needle.len()).any(|w| w == needle)
}

fn criterion1(dir: &std::path::Path) -> Verdict {
    let cap = write_table1_capture(dir, CaptureFormat::Pcap);
    let out_path = dir.join("classes.json");
    let started = Instant::now();
    let out = run(&["classify", "--in", path_str(&cap), "--out", path_str(&out_path)]);
    let elapsed = started.elapsed();
    if !out.status.success() {
        return verdict(false, format!("classify failed: {}", String::from_utf8_lossy(&out.stderr)));
    }
    let report = ClassificationReport::load(&out_path).unwrap();
    let mut side_ok = 0;
    for (service, host) in table1_hosts() {
        let hit = report.classifications.iter().any(|c| {
            c.sni.as_deref() == Some(host.as_str())
                && c.role == ChannelRole::Side
                && c.service.as_deref() == Some(service.as_str())
                && c.evidence.contains(&Evidence::SniMatched(host.clone()))
        });
        side_ok += usize::from(hit);
    }
    let ech_ok = report
        .classifications
        .iter()
        .filter(|c| c.role == ChannelRole::Primary && c.evidence.contains(&Evidence::EchOpaque) && c.service.is_none())
        .count();
    let pass = side_ok == 17 && ech_ok == 3 && report.classifications.len() == 20 && elapsed < C1_LIMIT;
    verdict(pass, format!("{side_ok}/17 Table 1 hosts Side with correct service, {ech_ok}/3 ECH flows Primary+EchOpaque, {:.2} s (limit {} s)", elapsed.as_secs_f64(), C1_LIMIT.as_secs()))
}

fn criterion2() -> Verdict {
    let started = Instant::now();
    let out = run(&["table2"]);
    let elapsed = started.elapsed();
    let text = String::from_utf8_lossy(&out.stdout).into_owned();
    let mut matched = 0;
    for (service, before, during) in TABLE2 {
        let Some(row) = text.lines().find(|l| l.starts_with(service)) else { continue };
        let cells: Vec<&str> = row.split('|').map(str::trim).collect();
        let fits = |cell: &str, published: &str| {
            !cell.is_empty() && published.to_lowercase().contains(&cell.to_lowercase())
        };
        matched += usize::from(cells.len() == 3 && fits(cells[1], before)) + usize::from(cells.len() == 3 && fits(cells[2], during));
    }
    let extended = text.lines().any(|l| l.starts_with("Primevideo, fallback servers also blocked") && l.ends_with("No video"));

    let mut enums_ok = 0;
    for (model, (before, during)) in ServiceModel::shipped().iter().zip(TABLE2_PLAYBACK) {
        let profiles = echoscope::classify::table1_profiles();
        let profile = profiles.iter().find(|p| p.service_name == model.name).unwrap();
        let policy = echoscope::sim::profile_block_policy(profile, Scope::Always);
        let b = echoscope::sim::simulate(model, &policy, Scenario::BlockBefore, 30).unwrap().playback;
        let d = echoscope::sim::simulate(model, &policy, Scenario::BlockDuring, 30).unwrap().playback;
        enums_ok += usize::from(b == before) + usize::from(d == during);
    }
    let pass = out.status.success() && matched == 6 && enums_ok == 6 && extended && elapsed < C2_LIMIT;
    verdict(pass, format!("{matched}/6 cells match, {enums_ok}/6 outcomes exact, fallback-blocked row {}, {:.2} s (limit {} s)", if extended { "No video" } else { "missing" }, elapsed.as_secs_f64(), C2_LIMIT.as_secs()))
}

fn table1_policies() -> Vec<Policy> {
    let mut flows = Vec::new();
    for (i, (_, host)) in table1_hosts().iter().enumerate() {
        flows.push(FlowSummary {
            flow: FlowKey {
                src_ip: "192.168.1.10".parse().unwrap(),
                src_port: 40_000 + i as u16,
                dst_ip: "203.0.113.1".parse().unwrap(),
                dst_port: 443,
                transport: Transport::Tcp,
            },
            sni: Some(host.clone()),
            privacy_level: Some(PrivacyLevel::None),
            total_bytes: 30_000,
            session_length_s: 2.0,
            first_ts: None,
            last_ts: None,
        });
    }
    let classes = classify_summaries(&flows, &ClassifierConfig::default());
    let mut policies = Vec::new();
    for service in ["Hotstar", "Primevideo", "YouTube"] {
        for action in [PolicyAction::Block, PolicyAction::Throttle(100_000)] {
            policies.push(derive_attack_policy(&classes, service, action, Scope::Always).unwrap());
        }
    }
    policies
}

fn criterion3(rng: &mut StdRng) -> Verdict {
    let policies = table1_policies();
    let hosts: Vec<String> = table1_hosts().into_iter().map(|(_, h)| h).collect();
    let mut matches = 0;
    let mut leaks = 0;
    let mut sni_matched = 0;
    let mut summaries = Vec::new();
    for i in 0..C3_FLOWS {
        let inner_sni = hosts.choose(rng).unwrap();
        let inner = ClientHello::builder()
            .server_name(inner_sni)
            .supported_versions(&[ProtocolVersion::TLS1_3])
            .key_share(&[(0x001d, bytes(rng, 32))])
            .random(rng.gen())
            .build()
            .unwrap();
        let key: Vec<u8> = (0..32).map(|_| rng.gen()).collect();
        let outer = build_outer_client_hello(&inner, &EchConfig::new(rng.gen(), ECH_PUBLIC_NAME, key), &MaskingSealer).unwrap();
        if contains(&outer.to_record_bytes(), inner_sni.as_bytes()) {
            leaks += 1;
        }
        matches += policies.iter().filter(|p| apply_policy(&outer, p) != Decision::Allow).count();
        summaries.push(FlowSummary {
            flow: FlowKey {
                src_ip: "10.9.0.1".parse().unwrap(),
                src_port: i as u16,
                dst_ip: "198.51.100.9".parse().unwrap(),
                dst_port: 443,
                transport: Transport::Tcp,
            },
            sni: outer.sni().map(str::to_string),
            privacy_level: Some(PrivacyLevel::FullEch),
            total_bytes: rng.gen_range(1_000..50_000_000),
            session_length_s: rng.gen_range(0.1..900.0),
            first_ts: None,
            last_ts: None,
        });
    }
    for c in classify_summaries(&summaries, &ClassifierConfig::default()) {
        sni_matched += usize::from(c.evidence.iter().any(|e| matches!(e, Evidence::SniMatched(_))));
    }
    let pass = matches == 0 && leaks == 0 && sni_matched == 0;
    verdict(pass, format!("{C3_FLOWS} FullEch flows x {} policies: {matches} matches, {leaks} outer hellos containing the inner SNI, {sni_matched} SniMatched", policies.len()))
}

fn criterion4(rng: &mut StdRng) -> Verdict {
    let mut round_trip_failures = 0;
    let mut with_ech = 0;
    for _ in 0..C4_HELLOS {
        let ch = random_hello(rng, false);
        with_ech += usize::from(ch.ech().is_some());
        let bytes = ch.to_bytes();
        match parse_client_hello(&bytes) {
            Ok(p) if p == ch && p.to_bytes() == bytes => {}
            _ => round_trip_failures += 1,
        }
    }
    let previous = panic::take_hook();
    panic::set_hook(Box::new(|_| {}));
    let mut crashes = 0;
    for i in 0..C4_FUZZ {
        let mut input = bytes(rng, 300);
        if i % 2 == 0 && input.len() >= 3 {
            // Half the corpus starts like a handshake record to reach deeper code.
            input[0] = 22;
            input[1] = 3;
            input[2] = rng.gen_range(0..5);
        }
        let ok = panic::catch_unwind(|| {
            let _ = parse_records(&input);
            let _ = parse_records_resync(&input);
            let _ = parse_client_hello(&input);
        });
        crashes += usize::from(ok.is_err());
    }
    panic::set_hook(previous);
    let pass = round_trip_failures == 0 && crashes == 0 && with_ech > 0;
    verdict(pass, format!("{round_trip_failures}/{C4_HELLOS} round-trip failures ({with_ech} with ECH), {crashes}/{C4_FUZZ} fuzz crashes"))
}

fn criterion5(rng: &mut StdRng) -> Verdict {
    let mut violations = 0;
    for _ in 0..C5_HELLOS {
        let ch = random_hello(rng, true);
        let expected = ch.effective_version();
        for legacy in [ProtocolVersion::TLS1_0, ProtocolVersion::TLS1_1, ProtocolVersion::TLS1_2, ProtocolVersion::TLS1_3] {
            let mut m = ch.clone();
            m.set_legacy_version(legacy);
            let reparsed = parse_client_hello(&m.to_bytes()).unwrap();
            violations += usize::from(m.effective_version() != expected || reparsed.effective_version() != expected);
        }
    }
    verdict(violations == 0, format!("{violations} violations over {C5_HELLOS} hellos x 4 legacy codes"))
}

fn criterion6(rng: &mut StdRng) -> Verdict {
    let mut packets = Vec::new();
    for i in 0..C6_FLOWS {
        let client = SocketAddr::new(format!("10.{}.{}.2", 1 + i / 250, i % 250).parse().unwrap(), 30_000 + i as u16);
        let server = SocketAddr::new(format!("172.16.{}.1", i % 200).parse().unwrap(), 443);
        let hello = if i % 7 == 0 { ech_hello("media.hotstar.com", 1) } else { common::tls12_hello(&random_host(rng)) };
        let mut spec = TlsFlowSpec::new(client, server, hello);
        spec.start = rng.gen_range(0.0..100.0);
        spec.duration = rng.gen_range(0.1..30.0);
        spec.app_bytes_up = rng.gen_range(0..4_000);
        spec.app_bytes_down = rng.gen_range(0..80_000);
        spec.client_isn = rng.gen();
        spec.server_isn = rng.gen();
        packets.extend(spec.packets());
    }
    let independent: u64 = packets.iter().map(|p| p.payload.len() as u64).sum();
    let bytes = write_capture(&packets, LinkLayer::Ethernet, CaptureFormat::PcapNg);
    let (events, stats) = CaptureReader::new(bytes.as_slice()).unwrap().read_all().unwrap();
    let reference = reassemble_flows(events.clone(), &ReassemblyConfig::default());
    let counted: u64 = reference.iter().map(|f| f.total_bytes()).sum();
    let hellos = reference.iter().filter(|f| f.client_hello.is_some()).count();

    let mut differing = 0;
    for k in 0..C6_PERMUTATIONS {
        let mut shuffled: Vec<PacketEvent> = events.clone();
        if k == 0 {
            shuffled.reverse();
        } else {
            shuffled.shuffle(rng);
        }
        differing += usize::from(reassemble_flows(shuffled, &ReassemblyConfig::default()) != reference);
    }
    let pass = reference.len() == C6_FLOWS
        && hellos == C6_FLOWS
        && differing == 0
        && counted == independent
        && stats.tcp_payload_bytes == independent;
    verdict(pass, format!("{} flows, {hellos} hellos recovered, {differing}/{C6_PERMUTATIONS} permutations differ, bytes {counted} vs independent {independent}", reference.len()))
}

fn criterion7() -> Verdict {
    let models = ServiceModel::shipped();
    let rate = |name: &str| models.iter().find(|m| m.name == name).map(|m| m.normal_rate_bps).unwrap_or(0);
    let degraded = models
        .iter()
        .find_map(|m| m.fallback.as_ref())
        .map(|f| f.degraded_rate_bps)
        .unwrap_or(0);
    let good_tier_bps = (0.38e9 * 8.0 / 3600.0) as u64;
    let yt = rate("YouTube");
    let pass = rate("Hotstar") == 1_000_000
        && rate("Primevideo") == 11_000_000
        && (4_000_000..=5_000_000).contains(&yt)
        && degraded == good_tier_bps;
    verdict(pass, format!("bandwidth traces not reproduced; model constants Hotstar {} b/s, Primevideo {} b/s, YouTube {yt} b/s, degraded {degraded} b/s", rate("Hotstar"), rate("Primevideo")))
}

#[test]
fn acceptance() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = StdRng::seed_from_u64(SEED);
    let results = [
        ("1 Table 1 reproduction", criterion1(dir.path())),
        ("2 Table 2 reproduction", criterion2()),
        ("3 ECH immunity", criterion3(&mut rng)),
        ("4 parser round-trip and fuzz", criterion4(&mut rng)),
        ("5 version precedence", criterion5(&mut rng)),
        ("6 reassembly order-insensitivity", criterion6(&mut rng)),
        ("7 documented constants only", criterion7()),
    ];
    for (name, v) in &results {
        println!("[{}] {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    let failed: Vec<_> = results.iter().filter(|(_, v)| !v.pass).map(|(n, _)| *n).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
