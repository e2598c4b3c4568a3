//! Run manifests: what went in, so reruns can be compared byte for byte.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::time::{SystemTime, UNIX_EPOCH};

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config_digest: Option<String>,
    pub input_digest: Option<String>,
    pub seed: Option<u64>,
    /// Only field that differs between identical reruns.
    pub timestamp_unix: u64,
}

impl RunManifest {
    pub fn new(
        command: &'static str,
        config: Option<&[u8]>,
        input: Option<&[u8]>,
        seed: Option<u64>,
    ) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            config_digest: config.map(sha256_hex),
            input_digest: input.map(sha256_hex),
            seed,
            timestamp_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
