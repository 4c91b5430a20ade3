//! Hello extensions: the raw (type, body) pair plus codecs for the bodies
//! that carry privacy-relevant fields.

use crate::codec::{put_u16, put_vec16, put_vec8, Reader, Short};

use super::ProtocolVersion;

pub const SERVER_NAME: u16 = 0;
pub const SUPPORTED_GROUPS: u16 = 10;
pub const EC_POINT_FORMATS: u16 = 11;
pub const SIGNATURE_ALGORITHMS: u16 = 13;
pub const ALPN: u16 = 16;
pub const PRE_SHARED_KEY: u16 = 41;
pub const SUPPORTED_VERSIONS: u16 = 43;
pub const PSK_KEY_EXCHANGE_MODES: u16 = 45;
pub const KEY_SHARE: u16 = 51;
pub use crate::ech::ECH_EXTENSION_TYPE as ENCRYPTED_CLIENT_HELLO;

const HOST_NAME: u8 = 0;

/// One extension exactly as it appeared on the wire. Unknown and GREASE
/// extensions are kept in this form so a parsed hello re-serializes byte
/// for byte.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Extension {
    pub ext_type: u16,
    pub data: Vec<u8>,
}

impl Extension {
    pub fn new(ext_type: u16, data: Vec<u8>) -> Self {
        Self { ext_type, data }
    }

    pub fn server_name(host: &str) -> Self {
        let mut entry = vec![HOST_NAME];
        put_vec16(&mut entry, host.as_bytes());
        let mut data = Vec::with_capacity(entry.len() + 2);
        put_vec16(&mut data, &entry);
        Self::new(SERVER_NAME, data)
    }

    pub fn alpn<S: AsRef<str>>(protocols: &[S]) -> Self {
        let mut list = Vec::new();
        for p in protocols {
            put_vec8(&mut list, p.as_ref().as_bytes());
        }
        let mut data = Vec::with_capacity(list.len() + 2);
        put_vec16(&mut data, &list);
        Self::new(ALPN, data)
    }

    /// Client form: one-byte length followed by version codes.
    pub fn supported_versions(versions: &[ProtocolVersion]) -> Self {
        let mut list = Vec::with_capacity(versions.len() * 2);
        for v in versions {
            put_u16(&mut list, v.0);
        }
        let mut data = Vec::with_capacity(list.len() + 1);
        put_vec8(&mut data, &list);
        Self::new(SUPPORTED_VERSIONS, data)
    }

    /// Server form: the single selected version.
    pub fn selected_version(version: ProtocolVersion) -> Self {
        Self::new(SUPPORTED_VERSIONS, version.0.to_be_bytes().to_vec())
    }

    /// Client form: a list of (group, key_exchange) shares.
    pub fn key_share(shares: &[(u16, Vec<u8>)]) -> Self {
        let mut list = Vec::new();
        for (group, key) in shares {
            put_u16(&mut list, *group);
            put_vec16(&mut list, key);
        }
        let mut data = Vec::with_capacity(list.len() + 2);
        put_vec16(&mut data, &list);
        Self::new(KEY_SHARE, data)
    }

    /// Server form: the single share for the selected group.
    pub fn server_key_share(group: u16, key: &[u8]) -> Self {
        let mut data = Vec::with_capacity(key.len() + 4);
        put_u16(&mut data, group);
        put_vec16(&mut data, key);
        Self::new(KEY_SHARE, data)
    }

    pub fn supported_groups(groups: &[u16]) -> Self {
        let mut list = Vec::with_capacity(groups.len() * 2);
        for g in groups {
            put_u16(&mut list, *g);
        }
        let mut data = Vec::with_capacity(list.len() + 2);
        put_vec16(&mut data, &list);
        Self::new(SUPPORTED_GROUPS, data)
    }
}

/// Reason an extension body failed to decode.
pub type BodyError = &'static str;

fn short(_: Short) -> BodyError {
    "truncated body"
}

fn finish(r: &Reader<'_>) -> Result<(), BodyError> {
    if r.is_empty() {
        Ok(())
    } else {
        Err("trailing bytes")
    }
}

/// Returns the host_name entry of a server_name body. An empty body (as
/// servers send it) yields `None`.
pub fn decode_server_name(data: &[u8]) -> Result<Option<String>, BodyError> {
    if data.is_empty() {
        return Ok(None);
    }
    let mut r = Reader::new(data);
    let list = r.vec16().map_err(short)?;
    finish(&r)?;
    let mut entries = Reader::new(list);
    let mut host = None;
    while !entries.is_empty() {
        let name_type = entries.u8().map_err(short)?;
        let name = entries.vec16().map_err(short)?;
        if name_type != HOST_NAME {
            continue;
        }
        if host.is_some() {
            return Err("more than one host_name entry");
        }
        if name.is_empty() {
            return Err("empty host_name");
        }
        if !name.iter().all(|b| b.is_ascii_graphic()) {
            return Err("host_name is not printable ASCII");
        }
        host = Some(String::from_utf8(name.to_vec()).map_err(|_| "host_name is not ASCII")?);
    }
    Ok(host)
}

pub fn decode_alpn(data: &[u8]) -> Result<Vec<String>, BodyError> {
    let mut r = Reader::new(data);
    let list = r.vec16().map_err(short)?;
    finish(&r)?;
    let mut entries = Reader::new(list);
    let mut out = Vec::new();
    while !entries.is_empty() {
        let proto = entries.vec8().map_err(short)?;
        if proto.is_empty() {
            return Err("empty protocol name");
        }
        out.push(String::from_utf8_lossy(proto).into_owned());
    }
    Ok(out)
}

pub fn decode_supported_versions(data: &[u8]) -> Result<Vec<ProtocolVersion>, BodyError> {
    let mut r = Reader::new(data);
    let list = r.vec8().map_err(short)?;
    finish(&r)?;
    if list.len() % 2 != 0 {
        return Err("odd version list length");
    }
    Ok(list
        .chunks_exact(2)
        .map(|c| ProtocolVersion(u16::from_be_bytes([c[0], c[1]])))
        .collect())
}

pub fn decode_selected_version(data: &[u8]) -> Result<ProtocolVersion, BodyError> {
    let mut r = Reader::new(data);
    let v = r.u16().map_err(short)?;
    finish(&r)?;
    Ok(ProtocolVersion(v))
}

/// Group codes of a client key_share body, in order.
pub fn decode_key_share_groups(data: &[u8]) -> Result<Vec<u16>, BodyError> {
    let mut r = Reader::new(data);
    let list = r.vec16().map_err(short)?;
    finish(&r)?;
    let mut entries = Reader::new(list);
    let mut groups = Vec::new();
    while !entries.is_empty() {
        groups.push(entries.u16().map_err(short)?);
        entries.vec16().map_err(short)?;
    }
    Ok(groups)
}

/// Group code of a server key_share body. HelloRetryRequest sends the bare
/// group without a key, which is accepted too.
pub fn decode_server_key_share(data: &[u8]) -> Result<u16, BodyError> {
    let mut r = Reader::new(data);
    let group = r.u16().map_err(short)?;
    if !r.is_empty() {
        r.vec16().map_err(short)?;
    }
    finish(&r)?;
    Ok(group)
}
