use std::collections::HashSet;

use crate::codec::{put_u16, put_u24, put_vec16, put_vec8, Reader};
use crate::ech::EchExtension;

use super::ext::{self, Extension};
use super::handshake::{HandshakeType, HANDSHAKE_HEADER_LEN};
use super::record::{encode_records, ContentType};
use super::{ProtocolVersion, TlsError, TlsVersion};

/// A parsed ClientHello handshake message.
///
/// The wire fields and the ordered extension list are the source of truth;
/// `sni`, `alpn`, `supported_versions`, `key_share_groups`,
/// `pre_shared_key_present` and `ech` are views derived from exactly one
/// extension each. Fields are private so the two can never disagree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClientHello {
    legacy_version: ProtocolVersion,
    random: [u8; 32],
    session_id: Vec<u8>,
    cipher_suites: Vec<u16>,
    compression_methods: Vec<u8>,
    extensions: Vec<Extension>,
    /// A hello may legally end after compression_methods with no extension
    /// block at all; that is distinct from an empty block.
    has_extension_block: bool,
    sni: Option<String>,
    alpn: Option<Vec<String>>,
    supported_versions: Option<Vec<ProtocolVersion>>,
    key_share_groups: Vec<u16>,
    pre_shared_key_present: bool,
    ech: Option<EchExtension>,
}

pub fn parse_client_hello(payload: &[u8]) -> Result<ClientHello, TlsError> {
    ClientHello::parse(payload)
}

impl ClientHello {
    /// Parse the handshake message at the start of `payload`. Bytes after the
    /// message (further handshake messages) are ignored.
    pub fn parse(payload: &[u8]) -> Result<Self, TlsError> {
        let mut r = Reader::new(payload);
        let msg_type = r.u8().map_err(|_| TlsError::Truncated("handshake header"))?;
        if msg_type != HandshakeType::CLIENT_HELLO {
            return Err(TlsError::NotClientHello(msg_type));
        }
        let len = r.u24().map_err(|_| TlsError::Truncated("handshake header"))? as usize;
        let body = r.take(len).map_err(|_| TlsError::Truncated("ClientHello body"))?;
        Self::parse_body(body)
    }

    fn parse_body(body: &[u8]) -> Result<Self, TlsError> {
        let mut r = Reader::new(body);
        let legacy_version = ProtocolVersion(r.u16().map_err(|_| TlsError::Truncated("legacy_version"))?);
        let mut random = [0u8; 32];
        random.copy_from_slice(r.take(32).map_err(|_| TlsError::Truncated("random"))?);
        let session_id = r.vec8().map_err(|_| TlsError::Truncated("session_id"))?;
        if session_id.len() > 32 {
            return Err(TlsError::Malformed("session_id longer than 32 bytes"));
        }
        let suites = r.vec16().map_err(|_| TlsError::Truncated("cipher_suites"))?;
        if suites.len() % 2 != 0 {
            return Err(TlsError::Malformed("odd cipher_suites length"));
        }
        let cipher_suites = suites.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect();
        let compression_methods = r.vec8().map_err(|_| TlsError::Truncated("compression_methods"))?;
        if compression_methods.is_empty() {
            return Err(TlsError::Malformed("empty compression_methods"));
        }

        let extensions = if r.is_empty() {
            None
        } else {
            let block = r.vec16().map_err(|_| TlsError::MalformedExtension {
                ext_type: None,
                reason: "extension block length exceeds message",
            })?;
            if !r.is_empty() {
                return Err(TlsError::MalformedExtension {
                    ext_type: None,
                    reason: "bytes after extension block",
                });
            }
            Some(parse_extension_block(block)?)
        };

        Self::from_parts(
            legacy_version,
            random,
            session_id.to_vec(),
            cipher_suites,
            compression_methods.to_vec(),
            extensions,
        )
    }

    fn from_parts(
        legacy_version: ProtocolVersion,
        random: [u8; 32],
        session_id: Vec<u8>,
        cipher_suites: Vec<u16>,
        compression_methods: Vec<u8>,
        extensions: Option<Vec<Extension>>,
    ) -> Result<Self, TlsError> {
        let has_extension_block = extensions.is_some();
        let extensions = extensions.unwrap_or_default();
        let mut hello = ClientHello {
            legacy_version,
            random,
            session_id,
            cipher_suites,
            compression_methods,
            extensions: Vec::new(),
            has_extension_block,
            sni: None,
            alpn: None,
            supported_versions: None,
            key_share_groups: Vec::new(),
            pre_shared_key_present: false,
            ech: None,
        };

        let mut seen = HashSet::new();
        for e in &extensions {
            if !seen.insert(e.ext_type) {
                return Err(TlsError::DuplicateExtension(e.ext_type));
            }
            let bad = |reason| TlsError::MalformedExtension { ext_type: Some(e.ext_type), reason };
            match e.ext_type {
                ext::SERVER_NAME => hello.sni = ext::decode_server_name(&e.data).map_err(bad)?,
                ext::ALPN => hello.alpn = Some(ext::decode_alpn(&e.data).map_err(bad)?),
                ext::SUPPORTED_VERSIONS => {
                    hello.supported_versions = Some(ext::decode_supported_versions(&e.data).map_err(bad)?)
                }
                ext::KEY_SHARE => hello.key_share_groups = ext::decode_key_share_groups(&e.data).map_err(bad)?,
                ext::PRE_SHARED_KEY => hello.pre_shared_key_present = true,
                ext::ENCRYPTED_CLIENT_HELLO => {
                    hello.ech = Some(EchExtension::decode(&e.data).map_err(|err| TlsError::MalformedExtension {
                        ext_type: Some(e.ext_type),
                        reason: ech_reason(&err),
                    })?)
                }
                _ => {}
            }
        }
        hello.extensions = extensions;
        Ok(hello)
    }

    pub fn legacy_version(&self) -> ProtocolVersion {
        self.legacy_version
    }

    /// Overwrite legacy_version. It is not extension-derived, so no other
    /// field depends on it.
    pub fn set_legacy_version(&mut self, version: ProtocolVersion) {
        self.legacy_version = version;
    }

    pub fn random(&self) -> &[u8; 32] {
        &self.random
    }

    pub fn session_id(&self) -> &[u8] {
        &self.session_id
    }

    pub fn cipher_suites(&self) -> &[u16] {
        &self.cipher_suites
    }

    pub fn compression_methods(&self) -> &[u8] {
        &self.compression_methods
    }

    pub fn extensions(&self) -> &[Extension] {
        &self.extensions
    }

    pub fn extension(&self, ext_type: u16) -> Option<&Extension> {
        self.extensions.iter().find(|e| e.ext_type == ext_type)
    }

    pub fn sni(&self) -> Option<&str> {
        self.sni.as_deref()
    }

    pub fn alpn(&self) -> Option<&[String]> {
        self.alpn.as_deref()
    }

    pub fn supported_versions(&self) -> Option<&[ProtocolVersion]> {
        self.supported_versions.as_deref()
    }

    pub fn key_share_groups(&self) -> &[u16] {
        &self.key_share_groups
    }

    pub fn pre_shared_key_present(&self) -> bool {
        self.pre_shared_key_present
    }

    pub fn ech(&self) -> Option<&EchExtension> {
        self.ech.as_ref()
    }

    /// Highest non-GREASE entry of supported_versions when that extension is
    /// present, otherwise legacy_version.
    pub fn effective_version(&self) -> ProtocolVersion {
        self.supported_versions
            .as_ref()
            .and_then(|vs| vs.iter().copied().filter(|v| !v.is_grease()).max())
            .unwrap_or(self.legacy_version)
    }

    pub fn tls_version(&self) -> TlsVersion {
        self.effective_version().into()
    }

    /// The handshake message (type, length, body).
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut body = Vec::with_capacity(128);
        put_u16(&mut body, self.legacy_version.0);
        body.extend_from_slice(&self.random);
        put_vec8(&mut body, &self.session_id);
        let mut suites = Vec::with_capacity(self.cipher_suites.len() * 2);
        for s in &self.cipher_suites {
            put_u16(&mut suites, *s);
        }
        put_vec16(&mut body, &suites);
        put_vec8(&mut body, &self.compression_methods);
        if self.has_extension_block {
            let mut block = Vec::new();
            for e in &self.extensions {
                put_u16(&mut block, e.ext_type);
                put_vec16(&mut block, &e.data);
            }
            put_vec16(&mut body, &block);
        }
        let mut out = Vec::with_capacity(HANDSHAKE_HEADER_LEN + body.len());
        out.push(HandshakeType::CLIENT_HELLO);
        put_u24(&mut out, body.len() as u32);
        out.extend_from_slice(&body);
        out
    }

    /// The message framed in handshake records with the conventional 0x0301
    /// record version.
    pub fn to_record_bytes(&self) -> Vec<u8> {
        encode_records(ContentType::Handshake, ProtocolVersion::TLS1_0, &self.to_bytes())
    }

    pub fn builder() -> ClientHelloBuilder {
        ClientHelloBuilder::default()
    }

    /// Start a builder pre-populated with this hello's fields and extensions.
    pub fn to_builder(&self) -> ClientHelloBuilder {
        ClientHelloBuilder {
            legacy_version: self.legacy_version,
            random: self.random,
            session_id: self.session_id.clone(),
            cipher_suites: self.cipher_suites.clone(),
            compression_methods: self.compression_methods.clone(),
            extensions: self.extensions.clone(),
            extension_block: self.has_extension_block,
        }
    }
}

fn ech_reason(err: &crate::ech::EchExtensionError) -> &'static str {
    use crate::ech::EchExtensionError as E;
    match err {
        E::Truncated => "truncated ECH body",
        E::TrailingBytes => "trailing bytes in ECH body",
        E::UnknownType(_) => "unknown ECH ClientHello type",
        E::EmptyPayload => "empty ECH payload",
    }
}

pub(crate) fn parse_extension_block(block: &[u8]) -> Result<Vec<Extension>, TlsError> {
    let mut r = Reader::new(block);
    let mut out = Vec::new();
    while !r.is_empty() {
        let ext_type = r.u16().map_err(|_| TlsError::MalformedExtension {
            ext_type: None,
            reason: "truncated extension header",
        })?;
        let data = r.vec16().map_err(|_| TlsError::MalformedExtension {
            ext_type: Some(ext_type),
            reason: "extension length exceeds block",
        })?;
        out.push(Extension::new(ext_type, data.to_vec()));
    }
    Ok(out)
}

/// Assembles a ClientHello from typed pieces. Extensions are emitted in the
/// order they are added.
#[derive(Debug, Clone)]
pub struct ClientHelloBuilder {
    legacy_version: ProtocolVersion,
    random: [u8; 32],
    session_id: Vec<u8>,
    cipher_suites: Vec<u16>,
    compression_methods: Vec<u8>,
    extensions: Vec<Extension>,
    extension_block: bool,
}

impl Default for ClientHelloBuilder {
    fn default() -> Self {
        Self {
            legacy_version: ProtocolVersion::TLS1_2,
            random: [0; 32],
            session_id: Vec::new(),
            cipher_suites: vec![0x1301, 0x1302, 0xc02f, 0xc030],
            compression_methods: vec![0],
            extensions: Vec::new(),
            extension_block: true,
        }
    }
}

impl ClientHelloBuilder {
    pub fn legacy_version(mut self, v: ProtocolVersion) -> Self {
        self.legacy_version = v;
        self
    }

    pub fn random(mut self, random: [u8; 32]) -> Self {
        self.random = random;
        self
    }

    pub fn session_id(mut self, id: Vec<u8>) -> Self {
        self.session_id = id;
        self
    }

    pub fn cipher_suites(mut self, suites: Vec<u16>) -> Self {
        self.cipher_suites = suites;
        self
    }

    pub fn server_name(self, host: &str) -> Self {
        self.extension(Extension::server_name(host))
    }

    pub fn alpn<S: AsRef<str>>(self, protocols: &[S]) -> Self {
        self.extension(Extension::alpn(protocols))
    }

    pub fn supported_versions(self, versions: &[ProtocolVersion]) -> Self {
        self.extension(Extension::supported_versions(versions))
    }

    pub fn key_share(self, shares: &[(u16, Vec<u8>)]) -> Self {
        self.extension(Extension::key_share(shares))
    }

    /// A pre_shared_key offer with one identity and a 32-byte binder.
    pub fn pre_shared_key(self, identity: &[u8]) -> Self {
        let mut identities = Vec::new();
        put_vec16(&mut identities, identity);
        identities.extend_from_slice(&0u32.to_be_bytes());
        let mut binders = Vec::new();
        put_vec8(&mut binders, &[0u8; 32]);
        let mut data = Vec::new();
        put_vec16(&mut data, &identities);
        put_vec16(&mut data, &binders);
        self.extension(Extension::new(ext::PRE_SHARED_KEY, data))
    }

    pub fn ech(self, ech: &EchExtension) -> Self {
        self.extension(Extension::new(ext::ENCRYPTED_CLIENT_HELLO, ech.encode()))
    }

    pub fn extension(mut self, ext: Extension) -> Self {
        self.extensions.push(ext);
        self.extension_block = true;
        self
    }

    /// Drop every extension of the given type.
    pub fn without(mut self, ext_type: u16) -> Self {
        self.extensions.retain(|e| e.ext_type != ext_type);
        self
    }

    /// Omit the extension block entirely (pre-TLS 1.0 style hello).
    pub fn no_extension_block(mut self) -> Self {
        self.extensions.clear();
        self.extension_block = false;
        self
    }

    pub fn build(self) -> Result<ClientHello, TlsError> {
        ClientHello::from_parts(
            self.legacy_version,
            self.random,
            self.session_id,
            self.cipher_suites,
            self.compression_methods,
            self.extension_block.then_some(self.extensions),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ech::HpkeSuite;

    fn hotstar_api() -> ClientHello {
        ClientHello::builder()
            .legacy_version(ProtocolVersion::TLS1_2)
            .server_name("api.hotstar.com")
            .alpn(&["h2", "http/1.1"])
            .build()
            .unwrap()
    }

    #[test]
    fn tls12_hello_with_sni() {
        let bytes = hotstar_api().to_bytes();
        let hello = parse_client_hello(&bytes).unwrap();
        assert_eq!(hello.sni(), Some("api.hotstar.com"));
        assert_eq!(hello.legacy_version(), ProtocolVersion::TLS1_2);
        assert_eq!(hello.supported_versions(), None);
        assert_eq!(hello.tls_version(), TlsVersion::Tls1_2);
        assert_eq!(hello.to_bytes(), bytes);
    }

    #[test]
    fn supported_versions_wins() {
        let hello = ClientHello::builder()
            .legacy_version(ProtocolVersion::TLS1_2)
            .supported_versions(&[ProtocolVersion(0x3a3a), ProtocolVersion::TLS1_3, ProtocolVersion::TLS1_2])
            .build()
            .unwrap();
        let parsed = parse_client_hello(&hello.to_bytes()).unwrap();
        assert_eq!(parsed.tls_version(), TlsVersion::Tls1_3);
        assert_eq!(parsed.effective_version(), ProtocolVersion::TLS1_3);
    }

    #[test]
    fn zero_extensions() {
        let hello = ClientHello::builder().build().unwrap();
        let parsed = parse_client_hello(&hello.to_bytes()).unwrap();
        assert_eq!(parsed.sni(), None);
        assert_eq!(parsed.alpn(), None);
        assert_eq!(parsed.ech(), None);
        assert!(parsed.extensions().is_empty());

        let bare = ClientHello::builder().no_extension_block().build().unwrap();
        let bytes = bare.to_bytes();
        assert_eq!(parse_client_hello(&bytes).unwrap().to_bytes(), bytes);
        assert_ne!(bytes, hello.to_bytes());
    }

    #[test]
    fn unknown_extensions_are_kept_in_order() {
        let hello = ClientHello::builder()
            .extension(Extension::new(0x0a0a, vec![]))
            .server_name("x.example")
            .extension(Extension::new(0x4469, vec![1, 2, 3]))
            .build()
            .unwrap();
        let parsed = parse_client_hello(&hello.to_bytes()).unwrap();
        let types: Vec<_> = parsed.extensions().iter().map(|e| e.ext_type).collect();
        assert_eq!(types, [0x0a0a, 0, 0x4469]);
        assert_eq!(parsed.extension(0x4469).unwrap().data, [1, 2, 3]);
    }

    #[test]
    fn duplicate_extension_rejected() {
        let err = ClientHello::builder()
            .server_name("a.example")
            .server_name("b.example")
            .build()
            .unwrap_err();
        assert_eq!(err, TlsError::DuplicateExtension(ext::SERVER_NAME));

        let err = ClientHello::builder()
            .extension(Extension::new(0x1234, vec![]))
            .extension(Extension::new(0x1234, vec![1]))
            .build()
            .unwrap_err();
        assert_eq!(err, TlsError::DuplicateExtension(0x1234));
    }

    #[test]
    fn malformed_extension_lengths() {
        let mut bytes = hotstar_api().to_bytes();
        // Inflate the first extension's length past the end of the block.
        let ext_block_start = HANDSHAKE_HEADER_LEN + 2 + 32 + 1 + 2 + 8 + 2 + 2;
        bytes[ext_block_start + 2] = 0xff;
        assert!(matches!(
            parse_client_hello(&bytes),
            Err(TlsError::MalformedExtension { .. })
        ));

        let bad_sni = ClientHello::builder()
            .extension(Extension::new(ext::SERVER_NAME, vec![0, 9, 0, 0, 1, b'a']))
            .build();
        assert!(matches!(bad_sni, Err(TlsError::MalformedExtension { ext_type: Some(0), .. })));
    }

    #[test]
    fn not_a_client_hello() {
        assert_eq!(parse_client_hello(&[2, 0, 0, 0]), Err(TlsError::NotClientHello(2)));
        assert!(matches!(parse_client_hello(&[]), Err(TlsError::Truncated(_))));
        assert!(matches!(parse_client_hello(&[1, 0, 0, 200, 3, 3]), Err(TlsError::Truncated(_))));
    }

    #[test]
    fn psk_key_share_and_ech_fields() {
        let ech = EchExtension::Outer {
            cipher_suite: HpkeSuite::HKDF_SHA256_AES128GCM,
            config_id: 7,
            enc: vec![1; 32],
            payload: vec![2; 40],
        };
        let hello = ClientHello::builder()
            .supported_versions(&[ProtocolVersion::TLS1_3])
            .key_share(&[(0x001d, vec![9; 32])])
            .ech(&ech)
            .pre_shared_key(b"ticket")
            .build()
            .unwrap();
        let parsed = parse_client_hello(&hello.to_bytes()).unwrap();
        assert_eq!(parsed.key_share_groups(), [0x001d]);
        assert!(parsed.pre_shared_key_present());
        assert_eq!(parsed.ech(), Some(&ech));
    }

    #[test]
    fn trailing_handshake_messages_ignored() {
        let mut bytes = hotstar_api().to_bytes();
        let len = bytes.len();
        bytes.extend_from_slice(&[20, 0, 0, 0]);
        let parsed = parse_client_hello(&bytes).unwrap();
        assert_eq!(parsed.to_bytes(), bytes[..len]);
    }
}
