//! SHA-256 helpers used for dataset, config, and parameter fingerprints.
//!
//! Digests are hex-encoded and computed over explicitly serialized bytes
//! (little-endian for numeric payloads), so they are stable across
//! platforms and thread counts.

use sha2::{Digest, Sha256};

/// Incremental SHA-256 with convenience methods for the payloads we hash.
pub struct Hasher {
    inner: Sha256,
}

impl Hasher {
    pub fn new() -> Self {
        Hasher {
            inner: Sha256::new(),
        }
    }

    pub fn update(&mut self, bytes: &[u8]) {
        self.inner.update(bytes);
    }

    pub fn update_str(&mut self, s: &str) {
        self.inner.update(s.as_bytes());
    }

    pub fn update_u64(&mut self, v: u64) {
        self.inner.update(v.to_le_bytes());
    }

    pub fn update_f32s(&mut self, xs: &[f32]) {
        for x in xs {
            self.inner.update(x.to_le_bytes());
        }
    }

    pub fn finish(self) -> String {
        hex(&self.inner.finalize())
    }
}

impl Default for Hasher {
    fn default() -> Self {
        Self::new()
    }
}

pub fn hex(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        use std::fmt::Write;
        write!(s, "{b:02x}").unwrap();
    }
    s
}

/// Digest of a UTF-8 string (used for rendered configs).
pub fn of_str(s: &str) -> String {
    let mut h = Hasher::new();
    h.update_str(s);
    h.finish()
}

/// Digest of raw bytes.
pub fn of_bytes(b: &[u8]) -> String {
    let mut h = Hasher::new();
    h.update(b);
    h.finish()
}
