//! Persistent cache of GMC moments for the modulus-density table.
//!
//! One JSON file per configuration hash holds a record per modulus. The hash
//! covers everything a moment depends on except `τ`, and each record repeats
//! it so stray files can be detected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use torus_lqg::stats::MeanEstimate;
use torus_lqg::ComplexUH;

use crate::error::{CliError, CliResult};
use crate::output::write_atomic;

pub const CACHE_ENV: &str = "TORUS_LQG_CACHE_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentRecord {
    pub config_hash: String,
    pub tau: [f64; 2],
    pub moment: f64,
    #[serde(rename = "SE")]
    pub std_error: f64,
    pub replicas: usize,
}

impl MomentRecord {
    pub fn estimate(&self) -> MeanEstimate {
        MeanEstimate { mean: self.moment, std_error: self.std_error, count: self.replicas }
    }
}

/// `$TORUS_LQG_CACHE_DIR`, else `$XDG_CACHE_HOME/torus-lqg`, else `~/.cache/torus-lqg`.
pub fn cache_dir() -> PathBuf {
    if let Some(d) = std::env::var_os(CACHE_ENV).filter(|d| !d.is_empty()) {
        return PathBuf::from(d);
    }
    if let Some(d) = std::env::var_os("XDG_CACHE_HOME").filter(|d| !d.is_empty()) {
        return PathBuf::from(d).join("torus-lqg");
    }
    match std::env::var_os("HOME") {
        Some(h) => PathBuf::from(h).join(".cache").join("torus-lqg"),
        None => PathBuf::from(".torus-lqg-cache"),
    }
}

/// Hex SHA-256 of the canonical `key=value` lines.
pub fn config_hash(entries: &[(&str, String)]) -> String {
    let mut h = Sha256::new();
    for (k, v) in entries {
        h.update(k.as_bytes());
        h.update(b"=");
        h.update(v.as_bytes());
        h.update(b"\n");
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn tau_key(tau: ComplexUH) -> (u64, u64) {
    (tau.re().to_bits(), tau.im().to_bits())
}

#[derive(Debug)]
pub struct MomentCache {
    path: PathBuf,
    hash: String,
    records: BTreeMap<(u64, u64), MomentRecord>,
    dirty: bool,
}

impl MomentCache {
    /// Opens (or starts) the cache file for `hash` in `dir`. Unreadable or
    /// foreign records are an error rather than silently recomputed.
    pub fn open(dir: &Path, hash: &str) -> CliResult<Self> {
        let path = dir.join(format!("moments-{hash}.json"));
        let mut records = BTreeMap::new();
        match std::fs::read_to_string(&path) {
            Ok(text) => {
                let list: Vec<MomentRecord> = serde_json::from_str(&text)?;
                for r in list {
                    if r.config_hash != hash {
                        return Err(CliError::Format(format!("{}: record with foreign hash {}", path.display(), r.config_hash)));
                    }
                    let tau = ComplexUH::new(r.tau[0], r.tau[1])?;
                    records.insert(tau_key(tau), r);
                }
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => return Err(CliError::io(&path, e)),
        }
        Ok(Self { path, hash: hash.to_string(), records, dirty: false })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, tau: ComplexUH) -> Option<&MomentRecord> {
        self.records.get(&tau_key(tau))
    }

    pub fn insert(&mut self, tau: ComplexUH, m: &MeanEstimate) {
        let r = MomentRecord {
            config_hash: self.hash.clone(),
            tau: [tau.re(), tau.im()],
            moment: m.mean,
            std_error: m.std_error,
            replicas: m.count,
        };
        self.records.insert(tau_key(tau), r);
        self.dirty = true;
    }

    /// Returns the cached moment at `tau`, computing and storing it on a miss.
    pub fn get_or_compute(&mut self, tau: ComplexUH, compute: impl FnOnce() -> CliResult<MeanEstimate>) -> CliResult<MeanEstimate> {
        if let Some(r) = self.get(tau) {
            return Ok(r.estimate());
        }
        let m = compute()?;
        self.insert(tau, &m);
        Ok(m)
    }

    pub fn save(&mut self) -> CliResult<()> {
        if !self.dirty {
            return Ok(());
        }
        let list: Vec<&MomentRecord> = self.records.values().collect();
        write_atomic(&self.path, serde_json::to_string_pretty(&list)?.as_bytes())?;
        self.dirty = false;
        Ok(())
    }
}
