//! Command-line pipeline over the `disagreement` library.
//!
//! Reads survey shares and GDP growth, writes per-country disagreement
//! indicators, a summary table, DB/DC cross-correlograms and BVAR impulse
//! responses, plus a manifest describing the run.

pub mod config;
pub mod error;
pub mod fixture;
pub mod output;
pub mod pipeline;
pub mod svg;

use sha2::{Digest, Sha256};

/// Stable 64-bit seed from labelled parts: the first eight bytes of
/// SHA-256 over the parts joined with `/`.
pub fn derive_seed(parts: &[&str]) -> u64 {
    let digest = Sha256::digest(parts.join("/").as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_be_bytes(bytes)
}
