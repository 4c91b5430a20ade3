use serde::{Deserialize, Serialize};

use crate::codec::{put_u16, put_vec16, Reader};

/// Extension code point of `encrypted_client_hello`.
pub const ECH_EXTENSION_TYPE: u16 = 0xfe0d;

const OUTER: u8 = 0;
const INNER: u8 = 1;

/// HPKE KDF/AEAD pair advertised in an ECH config and echoed by the client.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HpkeSuite {
    pub kdf_id: u16,
    pub aead_id: u16,
}

impl HpkeSuite {
    /// HKDF-SHA256 with AES-128-GCM.
    pub const HKDF_SHA256_AES128GCM: Self = Self { kdf_id: 0x0001, aead_id: 0x0001 };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EchVariant {
    Outer,
    Inner,
}

/// Body of the `encrypted_client_hello` extension as sent in a ClientHello.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EchExtension {
    Outer {
        cipher_suite: HpkeSuite,
        config_id: u8,
        /// Encapsulated HPKE key share.
        enc: Vec<u8>,
        /// Sealed inner ClientHello, opaque here.
        payload: Vec<u8>,
    },
    /// Marker carried inside the encrypted inner ClientHello.
    Inner,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EchExtensionError {
    #[error("ECH extension is truncated")]
    Truncated,
    #[error("ECH extension has trailing bytes")]
    TrailingBytes,
    #[error("unknown ECH ClientHello type {0}")]
    UnknownType(u8),
    #[error("outer ECH extension carries an empty payload")]
    EmptyPayload,
}

impl EchExtension {
    pub fn variant(&self) -> EchVariant {
        match self {
            EchExtension::Outer { .. } => EchVariant::Outer,
            EchExtension::Inner => EchVariant::Inner,
        }
    }

    pub fn config_id(&self) -> Option<u8> {
        match self {
            EchExtension::Outer { config_id, .. } => Some(*config_id),
            EchExtension::Inner => None,
        }
    }

    pub fn payload(&self) -> &[u8] {
        match self {
            EchExtension::Outer { payload, .. } => payload,
            EchExtension::Inner => &[],
        }
    }

    pub fn decode(data: &[u8]) -> Result<Self, EchExtensionError> {
        let mut r = Reader::new(data);
        let short = |_| EchExtensionError::Truncated;
        let ext = match r.u8().map_err(short)? {
            OUTER => {
                let cipher_suite = HpkeSuite {
                    kdf_id: r.u16().map_err(short)?,
                    aead_id: r.u16().map_err(short)?,
                };
                let config_id = r.u8().map_err(short)?;
                let enc = r.vec16().map_err(short)?.to_vec();
                let payload = r.vec16().map_err(short)?.to_vec();
                if payload.is_empty() {
                    return Err(EchExtensionError::EmptyPayload);
                }
                EchExtension::Outer { cipher_suite, config_id, enc, payload }
            }
            INNER => EchExtension::Inner,
            other => return Err(EchExtensionError::UnknownType(other)),
        };
        if !r.is_empty() {
            return Err(EchExtensionError::TrailingBytes);
        }
        Ok(ext)
    }

    pub fn encode(&self) -> Vec<u8> {
        match self {
            EchExtension::Outer { cipher_suite, config_id, enc, payload } => {
                let mut out = Vec::with_capacity(10 + enc.len() + payload.len());
                out.push(OUTER);
                put_u16(&mut out, cipher_suite.kdf_id);
                put_u16(&mut out, cipher_suite.aead_id);
                out.push(*config_id);
                put_vec16(&mut out, enc);
                put_vec16(&mut out, payload);
                out
            }
            EchExtension::Inner => vec![INNER],
        }
    }
}
