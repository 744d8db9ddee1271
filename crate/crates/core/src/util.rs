//! Small shared helpers: content digests, deterministic seed derivation and
//! the digest-checked JSON artifact container used for everything persisted
//! to disk.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Hex-encoded SHA-256 of the given bytes.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

/// Derives an independent RNG seed from a master seed and a purpose label.
///
/// Different labels give statistically independent streams, and a stream's
/// seed never depends on how many draws another stream consumed. `index`
/// distinguishes repeated uses of the same label (grid cells, trees, ...).
pub fn derive_seed(master: u64, label: &str, index: u64) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update(label.as_bytes());
    hasher.update(index.to_le_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 yields 32 bytes"))
}

/// Canonical JSON serialization of a payload: object keys sorted (the
/// default `serde_json` map is ordered), floats in shortest round-trip form.
/// Two structurally equal payloads digest identically regardless of the field
/// order their Rust types declare.
fn canonical_payload(value: &serde_json::Value) -> String {
    serde_json::to_string(value).expect("JSON value re-serializes")
}

/// Writes `payload` to `path` inside a digest-checked wrapper:
/// `{"kind", "version", "digest", "payload"}`. The digest covers the
/// canonical form of the payload, so any tampering is detected on load.
pub fn save_artifact<T: Serialize>(
    path: &Path,
    kind: &str,
    version: u32,
    payload: &T,
) -> Result<()> {
    let value = serde_json::to_value(payload)?;
    let digest = sha256_hex(canonical_payload(&value).as_bytes());
    let wrapper = serde_json::json!({
        "kind": kind,
        "version": version,
        "digest": digest,
        "payload": value,
    });
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let mut text = serde_json::to_string_pretty(&wrapper)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Loads an artifact saved by [`save_artifact`], verifying kind and digest.
///
/// Errors: [`Error::FileUnreadable`] when the file cannot be read,
/// [`Error::CorruptArtifact`] on malformed JSON or a wrong `kind`,
/// [`Error::DigestMismatch`] when the payload does not match its digest.
pub fn load_artifact<T: DeserializeOwned>(path: &Path, kind: &str) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| Error::FileUnreadable {
        path: path.display().to_string(),
        source,
    })?;
    let corrupt = |reason: String| Error::CorruptArtifact {
        path: path.display().to_string(),
        reason,
    };
    let wrapper: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| corrupt(format!("not valid JSON: {e}")))?;
    let found_kind = wrapper
        .get("kind")
        .and_then(|v| v.as_str())
        .ok_or_else(|| corrupt("missing \"kind\" field".into()))?;
    if found_kind != kind {
        return Err(corrupt(format!(
            "artifact kind is {found_kind:?}, expected {kind:?}"
        )));
    }
    let expected = wrapper
        .get("digest")
        .and_then(|v| v.as_str())
        .ok_or_else(|| corrupt("missing \"digest\" field".into()))?
        .to_string();
    let payload = wrapper
        .get("payload")
        .ok_or_else(|| corrupt("missing \"payload\" field".into()))?;
    let got = sha256_hex(canonical_payload(payload).as_bytes());
    if got != expected {
        return Err(Error::DigestMismatch { expected, got });
    }
    serde_json::from_value(payload.clone())
        .map_err(|e| corrupt(format!("payload does not deserialize: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[test]
    fn digest_matches_known_vector() {
        // SHA-256 of the empty string, a published constant.
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct Payload {
        name: String,
        values: Vec<f64>,
    }

    #[test]
    fn artifact_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let payload = Payload {
            name: "demo".to_string(),
            values: vec![1.5, -0.25, 0.1 + 0.2],
        };
        save_artifact(&path, "model", 1, &payload).unwrap();
        let loaded: Payload = load_artifact(&path, "model").unwrap();
        assert_eq!(loaded, payload);
    }

    #[test]
    fn tampered_artifact_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let payload = Payload {
            name: "demo".to_string(),
            values: vec![1.0, 2.0],
        };
        save_artifact(&path, "model", 1, &payload).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let tampered = text.replace("2.0", "3.0");
        assert_ne!(text, tampered, "tamper target present");
        std::fs::write(&path, tampered).unwrap();
        let err = load_artifact::<Payload>(&path, "model").unwrap_err();
        assert!(matches!(err, Error::DigestMismatch { .. }), "{err:?}");
    }

    #[test]
    fn wrong_kind_and_garbage_are_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let payload = Payload {
            name: "demo".to_string(),
            values: vec![],
        };
        save_artifact(&path, "model", 1, &payload).unwrap();
        let err = load_artifact::<Payload>(&path, "report").unwrap_err();
        assert!(matches!(err, Error::CorruptArtifact { .. }), "{err:?}");

        std::fs::write(&path, "not json at all").unwrap();
        let err = load_artifact::<Payload>(&path, "model").unwrap_err();
        assert!(matches!(err, Error::CorruptArtifact { .. }), "{err:?}");

        let err = load_artifact::<Payload>(&dir.path().join("absent.json"), "model").unwrap_err();
        assert!(matches!(err, Error::FileUnreadable { .. }), "{err:?}");
    }

    #[test]
    fn derived_seeds_are_stable_and_distinct() {
        let a = derive_seed(42, "trees", 0);
        let b = derive_seed(42, "trees", 1);
        let c = derive_seed(42, "cells", 0);
        let again = derive_seed(42, "trees", 0);
        assert_eq!(a, again);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_ne!(b, c);
    }
}
