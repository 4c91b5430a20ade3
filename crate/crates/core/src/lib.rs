//! Offline auditor for TLS side channels.
//!
//! A service whose main stream runs over TLS 1.3 with Encrypted ClientHello
//! can still be identified when its auxiliary connections use TLS 1.2, since
//! those leak the server name in plain text. This crate parses captured
//! handshakes, groups packets into flows, classifies flows into primary and
//! side channels, derives the SNI block list a middlebox would need, and
//! simulates what that list does to a streaming session.

mod codec;

pub mod capture;
pub mod classify;
pub mod ech;
pub mod policy;
pub mod sim;
pub mod synth;
pub mod tls;
