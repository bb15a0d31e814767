//! Run manifests and the append-only report store.
//!
//! Every invocation produces one JSON envelope `{manifest, report, failures}`
//! written to `<out>/<config_hash>.json`. The hash covers the subcommand,
//! the full parameter set, and the tool version, so re-running the same
//! configuration maps to the same file; differing content under the same
//! name is treated as evidence corruption and refused rather than
//! overwritten.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    /// flat JSON object of every parameter that influenced the run
    pub parameters: Value,
    /// first 16 hex digits of sha256(subcommand, canonical parameters, version)
    pub config_hash: String,
    pub version: String,
    /// wall-clock time; excluded from the hash and from artifact comparison
    pub duration_seconds: f64,
}

impl RunManifest {
    pub fn new(subcommand: &str, parameters: Value) -> Self {
        // serde_json objects are BTreeMap-backed, so to_string is canonical
        let canonical = format!(
            "{subcommand}\n{}\n{}",
            serde_json::to_string(&parameters).expect("parameters serialize"),
            env!("CARGO_PKG_VERSION"),
        );
        let digest = Sha256::digest(canonical.as_bytes());
        let mut hash = String::with_capacity(16);
        for byte in &digest[..8] {
            hash.push_str(&format!("{byte:02x}"));
        }
        RunManifest {
            subcommand: subcommand.to_string(),
            parameters,
            config_hash: hash,
            version: env!("CARGO_PKG_VERSION").to_string(),
            duration_seconds: 0.0,
        }
    }
}

/// One entry of the machine-readable failure list emitted on exit code 1.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Failure {
    pub name: String,
    pub detail: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
}

impl Failure {
    pub fn check(name: &str, value: f64, bound: f64) -> Option<Failure> {
        if value.is_finite() && value <= bound {
            None
        } else {
            Some(Failure {
                name: name.to_string(),
                detail: format!("{value:.6e} exceeds {bound:.3e}"),
                value: Some(value),
                bound: Some(bound),
            })
        }
    }

    pub fn flag(name: &str, detail: String) -> Failure {
        Failure {
            name: name.to_string(),
            detail,
            value: None,
            bound: None,
        }
    }
}

/// The full envelope written to disk and printed to stdout.
#[derive(Debug, Serialize, Deserialize)]
pub struct Envelope {
    pub manifest: RunManifest,
    pub report: Value,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<Failure>,
}

/// Strip the timing field, the only part allowed to differ between
/// re-runs of one configuration.
fn comparable(envelope: &Envelope) -> Value {
    let mut v = serde_json::to_value(envelope).expect("envelope serializes");
    v["manifest"]
        .as_object_mut()
        .expect("manifest object")
        .remove("duration_seconds");
    v
}

/// Write the envelope under its manifest hash. An existing file must match
/// the new content modulo timing; a mismatch aborts without touching it.
pub fn store(out_dir: &Path, envelope: &Envelope) -> Result<PathBuf, CliError> {
    fs::create_dir_all(out_dir)?;
    let path = out_dir.join(format!("{}.json", envelope.manifest.config_hash));
    if path.exists() {
        let old: Envelope = serde_json::from_str(&fs::read_to_string(&path)?)?;
        if comparable(&old) != comparable(envelope) {
            return Err(CliError::ArtifactConflict(path));
        }
        return Ok(path);
    }
    let mut text = serde_json::to_string_pretty(envelope)?;
    text.push('\n');
    fs::write(&path, text)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn hash_ignores_parameter_order_and_duration() {
        let a = RunManifest::new("solve", json!({"mu": 1e4, "res": 129}));
        let b = RunManifest::new("solve", json!({"res": 129, "mu": 1e4}));
        assert_eq!(a.config_hash, b.config_hash);
        assert_eq!(a.config_hash.len(), 16);
        let c = RunManifest::new("solve", json!({"mu": 1e4, "res": 97}));
        assert_ne!(a.config_hash, c.config_hash);
        let d = RunManifest::new("verify", json!({"mu": 1e4, "res": 129}));
        assert_ne!(a.config_hash, d.config_hash);
    }

    // The append-only store compares re-parsed artifacts against freshly
    // computed ones, so float parsing must be exact (serde_json feature
    // `float_roundtrip`; the default fast path is off by an ulp on values
    // like 2.3200801948668754e-10).
    #[test]
    fn envelope_survives_a_disk_round_trip() {
        use crate::{CheckArg, DomainArg};
        let e1 = crate::commands::greens(DomainArg::Ball, CheckArg::All, 50, 3, 2.0, 7).unwrap();
        let e2 = crate::commands::greens(DomainArg::Ball, CheckArg::All, 50, 3, 2.0, 7).unwrap();
        assert_eq!(comparable(&e1), comparable(&e2));
        let text = serde_json::to_string_pretty(&e1).unwrap();
        let back: Envelope = serde_json::from_str(&text).unwrap();
        assert_eq!(comparable(&back), comparable(&e2));
    }

    #[test]
    fn store_is_append_only() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = RunManifest::new("balance", json!({"k": 3}));
        let mut envelope = Envelope {
            manifest,
            report: json!({"violations": 0}),
            failures: vec![],
        };
        let p1 = store(dir.path(), &envelope).unwrap();

        // identical rerun with different timing: accepted, file untouched
        envelope.manifest.duration_seconds = 9.0;
        let before = fs::read_to_string(&p1).unwrap();
        let p2 = store(dir.path(), &envelope).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(before, fs::read_to_string(&p1).unwrap());

        // same hash, different content: refused
        envelope.report = json!({"violations": 1});
        assert!(matches!(
            store(dir.path(), &envelope),
            Err(CliError::ArtifactConflict(_))
        ));
        assert_eq!(before, fs::read_to_string(&p1).unwrap());
    }
}
