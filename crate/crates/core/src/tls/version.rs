use std::fmt;

use serde::{Deserialize, Serialize};

/// Raw 16-bit protocol version code as it appears on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProtocolVersion(pub u16);

impl ProtocolVersion {
    pub const SSL3_0: Self = Self(0x0300);
    pub const TLS1_0: Self = Self(0x0301);
    pub const TLS1_1: Self = Self(0x0302);
    pub const TLS1_2: Self = Self(0x0303);
    pub const TLS1_3: Self = Self(0x0304);

    pub fn is_grease(self) -> bool {
        is_grease(self.0)
    }
}

impl fmt::Display for ProtocolVersion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{:04x}", self.0)
    }
}

/// GREASE code points (RFC 8701) have the form 0x?A?A with equal bytes.
pub fn is_grease(code: u16) -> bool {
    let [hi, lo] = code.to_be_bytes();
    hi == lo && lo & 0x0f == 0x0a
}

/// Negotiated version as far as privacy assessment is concerned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TlsVersion {
    #[serde(rename = "1.0")]
    Tls1_0,
    #[serde(rename = "1.1")]
    Tls1_1,
    #[serde(rename = "1.2")]
    Tls1_2,
    #[serde(rename = "1.3")]
    Tls1_3,
    #[serde(rename = "unknown")]
    Unknown,
}

impl TlsVersion {
    /// Short label used in reports ("1.2", "1.3", "unknown").
    pub fn label(self) -> &'static str {
        match self {
            TlsVersion::Tls1_0 => "1.0",
            TlsVersion::Tls1_1 => "1.1",
            TlsVersion::Tls1_2 => "1.2",
            TlsVersion::Tls1_3 => "1.3",
            TlsVersion::Unknown => "unknown",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        Some(match label {
            "1.0" => TlsVersion::Tls1_0,
            "1.1" => TlsVersion::Tls1_1,
            "1.2" => TlsVersion::Tls1_2,
            "1.3" => TlsVersion::Tls1_3,
            "unknown" => TlsVersion::Unknown,
            _ => return None,
        })
    }

    pub fn is_tls13(self) -> bool {
        self == TlsVersion::Tls1_3
    }
}

impl From<ProtocolVersion> for TlsVersion {
    fn from(v: ProtocolVersion) -> Self {
        match v {
            ProtocolVersion::TLS1_0 => TlsVersion::Tls1_0,
            ProtocolVersion::TLS1_1 => TlsVersion::Tls1_1,
            ProtocolVersion::TLS1_2 => TlsVersion::Tls1_2,
            ProtocolVersion::TLS1_3 => TlsVersion::Tls1_3,
            _ => TlsVersion::Unknown,
        }
    }
}

impl fmt::Display for TlsVersion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}
