//! TLS record-layer framing.

use serde::{Deserialize, Serialize};

use super::{ProtocolVersion, TlsError};

pub const RECORD_HEADER_LEN: usize = 5;
/// Largest plaintext fragment a record may carry.
pub const MAX_FRAGMENT_LEN: usize = 1 << 14;
/// Largest record body accepted on the wire (ciphertext expansion included).
pub const MAX_RECORD_LEN: usize = MAX_FRAGMENT_LEN + 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ContentType {
    ChangeCipherSpec,
    Alert,
    Handshake,
    ApplicationData,
    Other(u8),
}

impl ContentType {
    pub fn code(self) -> u8 {
        match self {
            ContentType::ChangeCipherSpec => 20,
            ContentType::Alert => 21,
            ContentType::Handshake => 22,
            ContentType::ApplicationData => 23,
            ContentType::Other(c) => c,
        }
    }

    pub fn is_known(self) -> bool {
        !matches!(self, ContentType::Other(_))
    }
}

impl From<u8> for ContentType {
    fn from(code: u8) -> Self {
        match code {
            20 => ContentType::ChangeCipherSpec,
            21 => ContentType::Alert,
            22 => ContentType::Handshake,
            23 => ContentType::ApplicationData,
            c => ContentType::Other(c),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TlsRecord {
    pub content_type: ContentType,
    pub legacy_record_version: ProtocolVersion,
    pub payload: Vec<u8>,
    /// Byte position of the record header within the scanned stream.
    pub offset: usize,
}

impl TlsRecord {
    pub fn new(content_type: ContentType, version: ProtocolVersion, payload: Vec<u8>) -> Self {
        Self { content_type, legacy_record_version: version, payload, offset: 0 }
    }

    pub fn encoded_len(&self) -> usize {
        RECORD_HEADER_LEN + self.payload.len()
    }

    pub fn write_to(&self, out: &mut Vec<u8>) {
        debug_assert!(self.payload.len() <= u16::MAX as usize);
        out.push(self.content_type.code());
        out.extend_from_slice(&self.legacy_record_version.0.to_be_bytes());
        out.extend_from_slice(&(self.payload.len() as u16).to_be_bytes());
        out.extend_from_slice(&self.payload);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        self.write_to(&mut out);
        out
    }
}

/// Split `payload` into records of at most [`MAX_FRAGMENT_LEN`] bytes and
/// encode them back to back.
pub fn encode_records(content_type: ContentType, version: ProtocolVersion, payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(payload.len() + RECORD_HEADER_LEN);
    let mut chunks = payload.chunks(MAX_FRAGMENT_LEN).peekable();
    if chunks.peek().is_none() {
        TlsRecord::new(content_type, version, Vec::new()).write_to(&mut out);
    }
    for chunk in chunks {
        TlsRecord::new(content_type, version, chunk.to_vec()).write_to(&mut out);
    }
    out
}

/// Why a record scan ended before the end of the stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordStop {
    /// The stream ends in the middle of the record starting at `offset`.
    Truncated { offset: usize },
    /// The bytes at `offset` are not a plausible record header.
    Malformed { offset: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RecordScan {
    pub records: Vec<TlsRecord>,
    /// Offset of the first byte not covered by a complete record.
    pub consumed: usize,
    pub stop: Option<RecordStop>,
}

impl RecordScan {
    pub fn is_truncated(&self) -> bool {
        matches!(self.stop, Some(RecordStop::Truncated { .. }))
    }
}

enum Header {
    Complete { content_type: ContentType, version: ProtocolVersion, len: usize },
    /// Fewer than five bytes remain but what is there is consistent with a header.
    Partial,
}

fn plausible_version(major: u8, minor: u8) -> bool {
    major == 3 && minor <= 4
}

fn read_header(buf: &[u8]) -> Option<Header> {
    match buf.len() {
        0 => None,
        1 => Some(Header::Partial),
        2 => plausible_version(buf[1], 0).then_some(Header::Partial),
        3 | 4 => plausible_version(buf[1], buf[2]).then_some(Header::Partial),
        _ => {
            if !plausible_version(buf[1], buf[2]) {
                return None;
            }
            let len = u16::from_be_bytes([buf[3], buf[4]]) as usize;
            if len > MAX_RECORD_LEN {
                return None;
            }
            Some(Header::Complete {
                content_type: ContentType::from(buf[0]),
                version: ProtocolVersion(u16::from_be_bytes([buf[1], buf[2]])),
                len,
            })
        }
    }
}

fn scan_from(stream: &[u8], start: usize) -> RecordScan {
    let mut scan = RecordScan { consumed: start, ..RecordScan::default() };
    let mut pos = start;
    while pos < stream.len() {
        match read_header(&stream[pos..]) {
            None => {
                scan.stop = Some(RecordStop::Malformed { offset: pos });
                break;
            }
            Some(Header::Partial) => {
                scan.stop = Some(RecordStop::Truncated { offset: pos });
                break;
            }
            Some(Header::Complete { content_type, version, len }) => {
                let end = pos + RECORD_HEADER_LEN + len;
                if end > stream.len() {
                    scan.stop = Some(RecordStop::Truncated { offset: pos });
                    break;
                }
                scan.records.push(TlsRecord {
                    content_type,
                    legacy_record_version: version,
                    payload: stream[pos + RECORD_HEADER_LEN..end].to_vec(),
                    offset: pos,
                });
                pos = end;
                scan.consumed = end;
            }
        }
    }
    scan
}

/// Frame `stream` into TLS records starting at offset 0.
///
/// Returns the maximal prefix of well-formed records. A stream that ends
/// mid-record is not an error: the scan carries [`RecordStop::Truncated`].
/// Only a stream whose very first bytes cannot be a record header fails.
pub fn parse_records(stream: &[u8]) -> Result<RecordScan, TlsError> {
    if !stream.is_empty() && read_header(stream).is_none() {
        return Err(TlsError::NotTls);
    }
    Ok(scan_from(stream, 0))
}

/// Like [`parse_records`], but first searches for the earliest offset where a
/// run of records plausibly starts. Used for captures that begin mid-stream.
pub fn parse_records_resync(stream: &[u8]) -> RecordScan {
    for start in 0..stream.len() {
        let Some(Header::Complete { content_type, len, .. }) = read_header(&stream[start..]) else {
            continue;
        };
        if !content_type.is_known() {
            continue;
        }
        let next = start + RECORD_HEADER_LEN + len;
        let anchored = next == stream.len()
            || (next < stream.len()
                && matches!(
                    read_header(&stream[next..]),
                    Some(Header::Complete { content_type, .. }) if content_type.is_known()
                ));
        if anchored {
            return scan_from(stream, start);
        }
    }
    RecordScan { consumed: stream.len(), ..RecordScan::default() }
}
