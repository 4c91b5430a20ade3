use crate::codec::{put_u16, put_u24, put_vec16, put_vec8, Reader};

use super::client_hello::parse_extension_block;
use super::ext::{self, Extension};
use super::handshake::{plaintext_handshake, split_handshake_messages, HandshakeType};
use super::record::TlsRecord;
use super::{ProtocolVersion, TlsError, TlsVersion};

/// What a passive observer learns from the server→client direction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServerHello {
    pub legacy_version: ProtocolVersion,
    pub random: [u8; 32],
    pub session_id: Vec<u8>,
    pub selected_cipher: u16,
    pub compression_method: u8,
    pub extensions: Vec<Extension>,
    pub supported_versions_selected: Option<ProtocolVersion>,
    pub key_share_group: Option<u16>,
    /// A plain-text Certificate message followed the ServerHello before any
    /// ChangeCipherSpec. Never set for TLS 1.3.
    pub certificate_in_clear: bool,
}

impl ServerHello {
    pub fn negotiated_version(&self) -> ProtocolVersion {
        self.supported_versions_selected.unwrap_or(self.legacy_version)
    }

    pub fn tls_version(&self) -> TlsVersion {
        self.negotiated_version().into()
    }

    /// Parse a single ServerHello handshake message (header included).
    pub fn parse_message(msg: &[u8]) -> Result<Self, TlsError> {
        let mut r = Reader::new(msg);
        let msg_type = r.u8().map_err(|_| TlsError::Truncated("handshake header"))?;
        if msg_type != HandshakeType::SERVER_HELLO {
            return Err(TlsError::NotServerHello(msg_type));
        }
        let len = r.u24().map_err(|_| TlsError::Truncated("handshake header"))? as usize;
        let body = r.take(len).map_err(|_| TlsError::Truncated("ServerHello body"))?;

        let mut r = Reader::new(body);
        let legacy_version = ProtocolVersion(r.u16().map_err(|_| TlsError::Truncated("legacy_version"))?);
        let mut random = [0u8; 32];
        random.copy_from_slice(r.take(32).map_err(|_| TlsError::Truncated("random"))?);
        let session_id = r.vec8().map_err(|_| TlsError::Truncated("session_id"))?.to_vec();
        let selected_cipher = r.u16().map_err(|_| TlsError::Truncated("cipher_suite"))?;
        let compression_method = r.u8().map_err(|_| TlsError::Truncated("compression_method"))?;
        let extensions = if r.is_empty() {
            Vec::new()
        } else {
            let block = r.vec16().map_err(|_| TlsError::MalformedExtension {
                ext_type: None,
                reason: "extension block length exceeds message",
            })?;
            parse_extension_block(block)?
        };

        let mut hello = ServerHello {
            legacy_version,
            random,
            session_id,
            selected_cipher,
            compression_method,
            extensions: Vec::new(),
            supported_versions_selected: None,
            key_share_group: None,
            certificate_in_clear: false,
        };
        for e in &extensions {
            let bad = |reason| TlsError::MalformedExtension { ext_type: Some(e.ext_type), reason };
            match e.ext_type {
                ext::SUPPORTED_VERSIONS => {
                    hello.supported_versions_selected = Some(ext::decode_selected_version(&e.data).map_err(bad)?)
                }
                ext::KEY_SHARE => hello.key_share_group = Some(ext::decode_server_key_share(&e.data).map_err(bad)?),
                _ => {}
            }
        }
        hello.extensions = extensions;
        Ok(hello)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut body = Vec::with_capacity(96);
        put_u16(&mut body, self.legacy_version.0);
        body.extend_from_slice(&self.random);
        put_vec8(&mut body, &self.session_id);
        put_u16(&mut body, self.selected_cipher);
        body.push(self.compression_method);
        let mut block = Vec::new();
        for e in &self.extensions {
            put_u16(&mut block, e.ext_type);
            put_vec16(&mut block, &e.data);
        }
        put_vec16(&mut body, &block);
        let mut out = vec![HandshakeType::SERVER_HELLO];
        put_u24(&mut out, body.len() as u32);
        out.extend_from_slice(&body);
        out
    }

    /// A ServerHello for fixtures: TLS 1.3 adds supported_versions and an
    /// X25519 key_share, anything older uses legacy_version alone.
    pub fn for_version(version: ProtocolVersion, cipher: u16) -> Self {
        let mut extensions = Vec::new();
        let (legacy_version, selected, group) = if version >= ProtocolVersion::TLS1_3 {
            extensions.push(Extension::selected_version(version));
            extensions.push(Extension::server_key_share(0x001d, &[0x42; 32]));
            (ProtocolVersion::TLS1_2, Some(version), Some(0x001d))
        } else {
            (version, None, None)
        };
        ServerHello {
            legacy_version,
            random: [0x5a; 32],
            session_id: Vec::new(),
            selected_cipher: cipher,
            compression_method: 0,
            extensions,
            supported_versions_selected: selected,
            key_share_group: group,
            certificate_in_clear: false,
        }
    }
}

/// Find the ServerHello in one server→client record sequence and note
/// whether a Certificate message follows it in plain text.
pub fn parse_server_hello(records: &[TlsRecord]) -> Result<ServerHello, TlsError> {
    let plain = plaintext_handshake(records);
    let (messages, _) = split_handshake_messages(&plain);
    let mut iter = messages.iter();
    let sh_msg = iter
        .by_ref()
        .find(|m| m.msg_type == HandshakeType::SERVER_HELLO)
        .ok_or(TlsError::NoServerHello)?;
    let mut hello = ServerHello::parse_message(sh_msg.bytes)?;
    let cert_seen = iter.any(|m| m.msg_type == HandshakeType::CERTIFICATE);
    hello.certificate_in_clear = cert_seen && hello.negotiated_version() < ProtocolVersion::TLS1_3;
    Ok(hello)
}
