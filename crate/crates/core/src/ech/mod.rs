//! Encrypted ClientHello as seen from the wire: config distribution through
//! DNS, the outer/inner hello split, and detection in captured hellos.
//!
//! HPKE is out of scope. Sealing is delegated to a [`Sealer`] so tests can
//! inject identity or permutation sealers and the rest of the crate can use
//! [`MaskingSealer`].

mod config;
mod dns;
mod extension;
mod outer;

pub use config::{
    parse_ech_config_list, serialize_ech_config_list, EchConfig, EchConfigEntry, EchConfigError,
    ECH_CONFIG_VERSION, KEM_X25519_SHA256,
};
pub use dns::{parse_dns_records, DnsEchRecord, DnsFileError, RecordKind};
pub use extension::{EchExtension, EchExtensionError, EchVariant, HpkeSuite, ECH_EXTENSION_TYPE};
pub use outer::{build_outer_client_hello, detect_ech, EchError, MaskingSealer, SealError, Sealer};
