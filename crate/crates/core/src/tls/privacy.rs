use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ech::detect_ech;

use super::{ClientHello, ServerHello, TlsVersion};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PrivacyLevel {
    /// Server identity readable from SNI and, below 1.3, the certificate.
    None,
    /// TLS 1.3: certificate encrypted, SNI still in the clear.
    PartialTls13,
    /// TLS 1.3 with ECH: the true server name is sealed.
    FullEch,
}

impl PrivacyLevel {
    pub fn label(self) -> &'static str {
        match self {
            PrivacyLevel::None => "None",
            PrivacyLevel::PartialTls13 => "PartialTls13",
            PrivacyLevel::FullEch => "FullEch",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        Some(match label {
            "None" => PrivacyLevel::None,
            "PartialTls13" => PrivacyLevel::PartialTls13,
            "FullEch" => PrivacyLevel::FullEch,
            _ => return None,
        })
    }
}

impl fmt::Display for PrivacyLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrivacyAssessment {
    pub effective_version: TlsVersion,
    pub sni_exposed: bool,
    pub certificate_exposed: bool,
    /// `certificate_exposed` was inferred from the version because no
    /// ServerHello was available.
    pub certificate_inferred: bool,
    pub ech_present: bool,
    pub privacy_level: PrivacyLevel,
}

/// Decide what a passive observer can learn about the server identity.
///
/// With a ServerHello the negotiated version comes from the server;
/// otherwise the client's effective version is used and certificate
/// exposure is inferred (anything not TLS 1.3 is assumed to send it in the
/// clear). The outer SNI of an ECH hello is the fronting server's name and
/// does not count as exposure.
pub fn assess_privacy(ch: &ClientHello, sh: Option<&ServerHello>) -> PrivacyAssessment {
    let effective_version = match sh {
        Some(sh) => sh.tls_version(),
        None => ch.tls_version(),
    };
    let (ech_present, _) = detect_ech(ch);
    let (certificate_exposed, certificate_inferred) = match sh {
        Some(sh) => (sh.certificate_in_clear, false),
        None => (!effective_version.is_tls13(), true),
    };
    let tls13 = effective_version.is_tls13();
    let sni_exposed = ch.sni().is_some() && !(ech_present && tls13);

    let privacy_level = if ech_present && tls13 {
        PrivacyLevel::FullEch
    } else if tls13 && !certificate_exposed && sni_exposed {
        PrivacyLevel::PartialTls13
    } else {
        PrivacyLevel::None
    };

    PrivacyAssessment {
        effective_version,
        sni_exposed,
        certificate_exposed,
        certificate_inferred,
        ech_present,
        privacy_level,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ech::{EchExtension, HpkeSuite};
    use crate::tls::ProtocolVersion;

    fn ech_ext() -> EchExtension {
        EchExtension::Outer {
            cipher_suite: HpkeSuite::HKDF_SHA256_AES128GCM,
            config_id: 1,
            enc: vec![7; 32],
            payload: vec![8; 64],
        }
    }

    #[test]
    fn tls12_with_sni_is_none() {
        let ch = ClientHello::builder().server_name("api.hotstar.com").build().unwrap();
        let a = assess_privacy(&ch, None);
        assert_eq!(a.privacy_level, PrivacyLevel::None);
        assert!(a.sni_exposed);
        assert!(a.certificate_exposed);
        assert!(a.certificate_inferred);
        assert_eq!(a.effective_version, TlsVersion::Tls1_2);
    }

    #[test]
    fn tls13_without_ech_is_partial() {
        let ch = ClientHello::builder()
            .server_name("www.youtube.com")
            .supported_versions(&[ProtocolVersion::TLS1_3])
            .build()
            .unwrap();
        let a = assess_privacy(&ch, None);
        assert_eq!(a.privacy_level, PrivacyLevel::PartialTls13);
        assert!(a.sni_exposed);
        assert!(!a.certificate_exposed);
    }

    #[test]
    fn tls13_with_ech_is_full() {
        let ch = ClientHello::builder()
            .server_name("cdn.example")
            .supported_versions(&[ProtocolVersion::TLS1_3])
            .ech(&ech_ext())
            .build()
            .unwrap();
        let a = assess_privacy(&ch, None);
        assert_eq!(a.privacy_level, PrivacyLevel::FullEch);
        assert!(!a.sni_exposed);
        assert!(a.ech_present);
    }

    #[test]
    fn server_hello_overrides_client_offer() {
        let ch = ClientHello::builder()
            .server_name("fls-eu.amazon.com")
            .supported_versions(&[ProtocolVersion::TLS1_3, ProtocolVersion::TLS1_2])
            .build()
            .unwrap();
        let mut sh = ServerHello::for_version(ProtocolVersion::TLS1_2, 0xc02f);
        sh.certificate_in_clear = true;
        let a = assess_privacy(&ch, Some(&sh));
        assert_eq!(a.effective_version, TlsVersion::Tls1_2);
        assert!(a.certificate_exposed);
        assert!(!a.certificate_inferred);
        assert_eq!(a.privacy_level, PrivacyLevel::None);
    }

    #[test]
    fn ech_on_downgraded_session_is_not_full() {
        let ch = ClientHello::builder()
            .server_name("cdn.example")
            .supported_versions(&[ProtocolVersion::TLS1_3, ProtocolVersion::TLS1_2])
            .ech(&ech_ext())
            .build()
            .unwrap();
        let sh = ServerHello::for_version(ProtocolVersion::TLS1_2, 0xc02f);
        let a = assess_privacy(&ch, Some(&sh));
        assert!(a.ech_present);
        assert_eq!(a.privacy_level, PrivacyLevel::None);
        assert!(a.sni_exposed);
    }
}
