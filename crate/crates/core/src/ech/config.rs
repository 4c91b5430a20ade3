//! ECHConfigList wire format (the value of the `ech` SvcParam).

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::codec::{put_u16, put_vec16, put_vec8, Reader, Short};

use super::HpkeSuite;

/// The only ECHConfig version this crate interprets.
pub const ECH_CONFIG_VERSION: u16 = 0xfe0d;

/// DHKEM(X25519, HKDF-SHA256).
pub const KEM_X25519_SHA256: u16 = 0x0020;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EchConfig {
    pub config_id: u8,
    pub kem_id: u16,
    pub public_key: Vec<u8>,
    pub cipher_suites: Vec<HpkeSuite>,
    pub max_name_length: u8,
    /// Name the client puts in the outer SNI.
    pub public_name: String,
    /// Raw ECHConfigExtensions block, kept for byte-exact re-encoding.
    pub extensions: Vec<u8>,
}

impl EchConfig {
    pub fn new(config_id: u8, public_name: impl Into<String>, public_key: Vec<u8>) -> Self {
        Self {
            config_id,
            kem_id: KEM_X25519_SHA256,
            public_key,
            cipher_suites: vec![HpkeSuite::HKDF_SHA256_AES128GCM],
            max_name_length: 0,
            public_name: public_name.into(),
            extensions: Vec::new(),
        }
    }

    fn validate(&self) -> Result<(), EchConfigError> {
        if self.public_key.is_empty() {
            return Err(EchConfigError::Malformed("empty public_key"));
        }
        if self.cipher_suites.is_empty() {
            return Err(EchConfigError::Malformed("no HPKE cipher suites"));
        }
        if self.public_name.is_empty() || !self.public_name.bytes().all(|b| b.is_ascii_graphic()) {
            return Err(EchConfigError::Malformed("public_name must be non-empty ASCII"));
        }
        Ok(())
    }

    fn encode_contents(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.push(self.config_id);
        put_u16(&mut out, self.kem_id);
        put_vec16(&mut out, &self.public_key);
        let mut suites = Vec::with_capacity(self.cipher_suites.len() * 4);
        for s in &self.cipher_suites {
            put_u16(&mut suites, s.kdf_id);
            put_u16(&mut suites, s.aead_id);
        }
        put_vec16(&mut out, &suites);
        out.push(self.max_name_length);
        put_vec8(&mut out, self.public_name.as_bytes());
        put_vec16(&mut out, &self.extensions);
        out
    }

    fn decode_contents(contents: &[u8]) -> Result<Self, EchConfigError> {
        let short = |_: Short| EchConfigError::Malformed("ECHConfig contents truncated");
        let mut r = Reader::new(contents);
        let config_id = r.u8().map_err(short)?;
        let kem_id = r.u16().map_err(short)?;
        let public_key = r.vec16().map_err(short)?.to_vec();
        let suites = r.vec16().map_err(short)?;
        if suites.len() % 4 != 0 {
            return Err(EchConfigError::Malformed("cipher suite list not a multiple of 4"));
        }
        let cipher_suites = suites
            .chunks_exact(4)
            .map(|c| HpkeSuite {
                kdf_id: u16::from_be_bytes([c[0], c[1]]),
                aead_id: u16::from_be_bytes([c[2], c[3]]),
            })
            .collect();
        let max_name_length = r.u8().map_err(short)?;
        let name = r.vec8().map_err(short)?;
        let public_name = String::from_utf8(name.to_vec())
            .map_err(|_| EchConfigError::Malformed("public_name must be non-empty ASCII"))?;
        let extensions = r.vec16().map_err(short)?.to_vec();
        if !r.is_empty() {
            return Err(EchConfigError::Malformed("trailing bytes in ECHConfig contents"));
        }
        let cfg = EchConfig {
            config_id,
            kem_id,
            public_key,
            cipher_suites,
            max_name_length,
            public_name,
            extensions,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// One element of an ECHConfigList. Versions other than
/// [`ECH_CONFIG_VERSION`] are carried opaquely.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EchConfigEntry {
    Known(EchConfig),
    Unknown { version: u16, contents: Vec<u8> },
}

impl EchConfigEntry {
    pub fn as_known(&self) -> Option<&EchConfig> {
        match self {
            EchConfigEntry::Known(cfg) => Some(cfg),
            EchConfigEntry::Unknown { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EchConfigError {
    #[error("ECHConfigList is empty")]
    Empty,
    #[error("malformed ECHConfigList: {0}")]
    Malformed(&'static str),
    #[error("config_id {0} appears more than once")]
    DuplicateConfigId(u8),
}

pub fn parse_ech_config_list(bytes: &[u8]) -> Result<Vec<EchConfigEntry>, EchConfigError> {
    let mut r = Reader::new(bytes);
    let body = r.vec16().map_err(|_| EchConfigError::Malformed("list length exceeds input"))?;
    if !r.is_empty() {
        return Err(EchConfigError::Malformed("trailing bytes after list"));
    }
    if body.is_empty() {
        return Err(EchConfigError::Empty);
    }
    let mut entries = Vec::new();
    let mut ids = HashSet::new();
    let mut r = Reader::new(body);
    while !r.is_empty() {
        let version = r.u16().map_err(|_| EchConfigError::Malformed("truncated ECHConfig header"))?;
        let contents = r.vec16().map_err(|_| EchConfigError::Malformed("ECHConfig length exceeds list"))?;
        if version == ECH_CONFIG_VERSION {
            let cfg = EchConfig::decode_contents(contents)?;
            if !ids.insert(cfg.config_id) {
                return Err(EchConfigError::DuplicateConfigId(cfg.config_id));
            }
            entries.push(EchConfigEntry::Known(cfg));
        } else {
            entries.push(EchConfigEntry::Unknown { version, contents: contents.to_vec() });
        }
    }
    Ok(entries)
}

pub fn serialize_ech_config_list(entries: &[EchConfigEntry]) -> Vec<u8> {
    let mut body = Vec::new();
    for entry in entries {
        match entry {
            EchConfigEntry::Known(cfg) => {
                put_u16(&mut body, ECH_CONFIG_VERSION);
                put_vec16(&mut body, &cfg.encode_contents());
            }
            EchConfigEntry::Unknown { version, contents } => {
                put_u16(&mut body, *version);
                put_vec16(&mut body, contents);
            }
        }
    }
    let mut out = Vec::with_capacity(body.len() + 2);
    put_vec16(&mut out, &body);
    out
}
