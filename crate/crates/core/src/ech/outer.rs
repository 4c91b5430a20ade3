use crate::tls::{ext, is_grease, ClientHello, Extension, ProtocolVersion, TlsError};

use super::{EchConfig, EchExtension};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("sealer failed: {0}")]
pub struct SealError(pub String);

/// Turns the serialized inner ClientHello into the opaque outer payload.
/// Stands in for HPKE sealing; implementations must be reentrant.
pub trait Sealer {
    fn seal(&self, public_key: &[u8], plaintext: &[u8]) -> Result<Vec<u8>, SealError>;

    /// The `enc` field of the outer extension. Empty unless overridden.
    fn encapsulated_key(&self, _public_key: &[u8]) -> Vec<u8> {
        Vec::new()
    }
}

impl<F> Sealer for F
where
    F: Fn(&[u8], &[u8]) -> Result<Vec<u8>, SealError>,
{
    fn seal(&self, public_key: &[u8], plaintext: &[u8]) -> Result<Vec<u8>, SealError> {
        self(public_key, plaintext)
    }
}

/// XORs the plaintext with a SplitMix64 keystream seeded from the public key.
/// Deterministic and reversible; it hides bytes from substring search, not
/// from an adversary.
#[derive(Debug, Clone, Copy, Default)]
pub struct MaskingSealer;

impl MaskingSealer {
    fn seed(public_key: &[u8]) -> u64 {
        public_key
            .iter()
            .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ u64::from(*b)).wrapping_mul(0x0100_0000_01b3))
    }

    pub fn unseal(public_key: &[u8], sealed: &[u8]) -> Vec<u8> {
        Self::apply(public_key, sealed)
    }

    fn apply(public_key: &[u8], data: &[u8]) -> Vec<u8> {
        let mut state = Self::seed(public_key);
        let mut out = Vec::with_capacity(data.len());
        for chunk in data.chunks(8) {
            state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
            z ^= z >> 31;
            out.extend(chunk.iter().zip(z.to_le_bytes()).map(|(b, k)| b ^ k));
        }
        out
    }
}

impl Sealer for MaskingSealer {
    fn seal(&self, public_key: &[u8], plaintext: &[u8]) -> Result<Vec<u8>, SealError> {
        Ok(Self::apply(public_key, plaintext))
    }

    fn encapsulated_key(&self, public_key: &[u8]) -> Vec<u8> {
        Self::seed(public_key).to_be_bytes().repeat(4)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EchError {
    #[error("inner ClientHello has no SNI to protect")]
    NoInnerSni,
    #[error(transparent)]
    SealerFailure(#[from] SealError),
    #[error("could not assemble ClientHello: {0}")]
    Tls(#[from] TlsError),
}

/// Extensions copied from the inner hello into the outer one. None of them
/// carry names.
fn copied_to_outer(ext_type: u16) -> bool {
    matches!(
        ext_type,
        ext::SUPPORTED_GROUPS
            | ext::EC_POINT_FORMATS
            | ext::SIGNATURE_ALGORITHMS
            | ext::SUPPORTED_VERSIONS
            | ext::PSK_KEY_EXCHANGE_MODES
            | ext::KEY_SHARE
    ) || is_grease(ext_type)
}

/// Wrap `inner` in an outer ClientHello addressed to `config.public_name`.
///
/// The inner hello gets an inner-variant ECH marker, is serialized and passed
/// through `sealer`; the sealed bytes become the outer ECH payload. The outer
/// hello keeps only name-free extensions of the inner one, drops ALPN and
/// always offers TLS 1.3.
pub fn build_outer_client_hello(
    inner: &ClientHello,
    config: &EchConfig,
    sealer: &dyn Sealer,
) -> Result<ClientHello, EchError> {
    if inner.sni().is_none() {
        return Err(EchError::NoInnerSni);
    }
    let marked = inner
        .to_builder()
        .without(ext::ENCRYPTED_CLIENT_HELLO)
        .ech(&EchExtension::Inner)
        .build()?;
    let payload = sealer.seal(&config.public_key, &marked.to_bytes())?;
    if payload.is_empty() {
        return Err(SealError("sealer returned an empty payload".into()).into());
    }
    let cipher_suite = *config
        .cipher_suites
        .first()
        .ok_or_else(|| SealError("ECH config offers no cipher suite".into()))?;
    let outer_ech = EchExtension::Outer {
        cipher_suite,
        config_id: config.config_id,
        enc: sealer.encapsulated_key(&config.public_key),
        payload,
    };

    let mut builder = ClientHello::builder()
        .legacy_version(inner.legacy_version())
        .random(*inner.random())
        .session_id(inner.session_id().to_vec())
        .cipher_suites(inner.cipher_suites().to_vec())
        .server_name(&config.public_name);
    for e in inner.extensions().iter().filter(|e| copied_to_outer(e.ext_type)) {
        builder = builder.extension(e.clone());
    }
    if inner.supported_versions().is_none() {
        builder = builder.extension(Extension::supported_versions(&[ProtocolVersion::TLS1_3]));
    }
    Ok(builder.ech(&outer_ech).build()?)
}

/// Whether the hello carries the ECH extension, and its decoded body.
///
/// GREASE ECH uses the same code point and layout as the real thing, so it
/// is reported as present; a passive observer cannot tell them apart.
pub fn detect_ech(ch: &ClientHello) -> (bool, Option<&EchExtension>) {
    let present = ch.extension(ext::ENCRYPTED_CLIENT_HELLO).is_some();
    (present, ch.ech())
}
