//! TLS record and handshake parsing, limited to what a passive observer sees
//! before encryption starts.

mod client_hello;
pub mod ext;
mod handshake;
mod privacy;
mod record;
mod server_hello;
mod version;

pub use client_hello::{parse_client_hello, ClientHello, ClientHelloBuilder};
pub use ext::Extension;
pub use handshake::{plaintext_handshake, split_handshake_messages, HandshakeMessage, HandshakeType};
pub use privacy::{assess_privacy, PrivacyAssessment, PrivacyLevel};
pub use record::{
    encode_records, parse_records, parse_records_resync, ContentType, RecordScan, RecordStop, TlsRecord,
    MAX_FRAGMENT_LEN, RECORD_HEADER_LEN,
};
pub use server_hello::{parse_server_hello, ServerHello};
pub use version::{is_grease, ProtocolVersion, TlsVersion};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TlsError {
    #[error("stream does not start with a TLS record header")]
    NotTls,
    #[error("handshake message type {0} is not ClientHello")]
    NotClientHello(u8),
    #[error("handshake message type {0} is not ServerHello")]
    NotServerHello(u8),
    #[error("no ServerHello in this direction")]
    NoServerHello,
    #[error("truncated {0}")]
    Truncated(&'static str),
    #[error("malformed message: {0}")]
    Malformed(&'static str),
    #[error("malformed extension{}: {reason}", ext_type.map(|t| format!(" 0x{t:04x}")).unwrap_or_default())]
    MalformedExtension { ext_type: Option<u16>, reason: &'static str },
    #[error("duplicate extension 0x{0:04x}")]
    DuplicateExtension(u16),
}
