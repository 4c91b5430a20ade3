#![allow(dead_code)]

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use echoscope::classify::table1_profiles;
use echoscope::ech::{build_outer_client_hello, EchConfig, MaskingSealer};
use echoscope::synth::{write_capture, CaptureFormat, LinkLayer, SynthPacket, TlsFlowSpec};
use echoscope::tls::{ClientHello, ProtocolVersion};

pub const ECH_PUBLIC_NAME: &str = "cdn.example";
pub const ECH_INNER_HOSTS: [&str; 3] = ["media.hotstar.com", "video.primevideo.com", "rr1.googlevideo.com"];
pub const ECH_FLOW_BYTES: usize = 4 << 20;
pub const ECH_FLOW_SECONDS: f64 = 600.0;

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_echoscope")
}

pub fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).env_remove("ECHOSCOPE_PROFILES").output().expect("binary runs")
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

/// (service, host) for every Table 1 side channel.
pub fn table1_hosts() -> Vec<(String, String)> {
    table1_profiles()
        .into_iter()
        .flat_map(|p| {
            let name = p.service_name.clone();
            p.sni_patterns.into_iter().map(move |h| (name.clone(), h))
        })
        .collect()
}

pub fn tls12_hello(sni: &str) -> ClientHello {
    ClientHello::builder()
        .legacy_version(ProtocolVersion::TLS1_2)
        .cipher_suites(vec![0xc02f, 0xc030, 0x009c])
        .server_name(sni)
        .alpn(&["h2", "http/1.1"])
        .build()
        .unwrap()
}

pub fn ech_hello(inner_sni: &str, config_id: u8) -> ClientHello {
    let inner = ClientHello::builder()
        .server_name(inner_sni)
        .alpn(&["h2"])
        .supported_versions(&[ProtocolVersion::TLS1_3, ProtocolVersion::TLS1_2])
        .key_share(&[(0x001d, vec![0x24; 32])])
        .build()
        .unwrap();
    let config = EchConfig::new(config_id, ECH_PUBLIC_NAME, vec![config_id; 32]);
    build_outer_client_hello(&inner, &config, &MaskingSealer).unwrap()
}

fn client(port: u16) -> SocketAddr {
    SocketAddr::new("192.168.1.10".parse().unwrap(), port)
}

/// One TLS 1.2 flow per Table 1 host, then three long ECH flows that overlap
/// all of them.
pub fn table1_packets() -> Vec<SynthPacket> {
    let mut packets = Vec::new();
    for (i, (_, host)) in table1_hosts().iter().enumerate() {
        let server = SocketAddr::new(format!("203.0.113.{}", 10 + i).parse().unwrap(), 443);
        let mut spec = TlsFlowSpec::new(client(50_000 + i as u16), server, tls12_hello(host));
        spec.start = 20.0 + 3.0 * i as f64;
        spec.duration = 2.0;
        spec.app_bytes_down = 16 * 1024 + 1024 * i;
        spec.client_isn = 10_000 * i as u32;
        packets.extend(spec.packets());
    }
    for (i, inner) in ECH_INNER_HOSTS.iter().enumerate() {
        let server = SocketAddr::new(format!("198.51.100.{}", 20 + i).parse().unwrap(), 443);
        let mut spec = TlsFlowSpec::new(client(51_000 + i as u16), server, ech_hello(inner, i as u8 + 1));
        spec.start = 5.0 * (i + 1) as f64;
        spec.duration = ECH_FLOW_SECONDS;
        spec.app_bytes_down = ECH_FLOW_BYTES;
        packets.extend(spec.packets());
    }
    packets.sort_by(|a, b| a.ts.total_cmp(&b.ts));
    packets
}

pub fn write_table1_capture(dir: &Path, format: CaptureFormat) -> PathBuf {
    let name = if format == CaptureFormat::PcapNg { "table1.pcapng" } else { "table1.pcap" };
    let path = dir.join(name);
    std::fs::write(&path, write_capture(&table1_packets(), LinkLayer::Ethernet, format)).unwrap();
    path
}
