//! Handshake-layer framing on top of records.

use crate::codec::Reader;

use super::record::{ContentType, TlsRecord};

pub const HANDSHAKE_HEADER_LEN: usize = 4;

/// Handshake message type codes used by this crate.
pub struct HandshakeType;

impl HandshakeType {
    pub const CLIENT_HELLO: u8 = 1;
    pub const SERVER_HELLO: u8 = 2;
    pub const CERTIFICATE: u8 = 11;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HandshakeMessage<'a> {
    pub msg_type: u8,
    /// Header plus body, as framed on the wire.
    pub bytes: &'a [u8],
}

/// Split a handshake byte stream into whole messages. The flag reports a
/// trailing partial message.
pub fn split_handshake_messages(buf: &[u8]) -> (Vec<HandshakeMessage<'_>>, bool) {
    let mut r = Reader::new(buf);
    let mut out = Vec::new();
    while !r.is_empty() {
        let start = r.position();
        let Ok(msg_type) = r.u8() else { return (out, true) };
        let Ok(len) = r.u24() else { return (out, true) };
        if r.take(len as usize).is_err() {
            return (out, true);
        }
        out.push(HandshakeMessage { msg_type, bytes: &buf[start..r.position()] });
    }
    (out, false)
}

/// Concatenated payloads of the leading run of Handshake records: everything
/// a passive observer can read before ChangeCipherSpec or application data.
pub fn plaintext_handshake(records: &[TlsRecord]) -> Vec<u8> {
    records
        .iter()
        .take_while(|r| r.content_type == ContentType::Handshake)
        .flat_map(|r| r.payload.iter().copied())
        .collect()
}
