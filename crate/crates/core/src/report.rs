//! Report formatting and run manifests.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::resample::BootstrapResult;

/// Three decimals, with negative zero printed as `0.000`.
pub fn fmt3(v: f64) -> String {
    let s = format!("{v:.3}");
    if s == "-0.000" { "0.000".into() } else { s }
}

/// `"value (lo, hi)"` to three decimals.
pub fn fmt_ci(value: f64, lo: f64, hi: f64) -> String {
    format!("{} ({}, {})", fmt3(value), fmt3(lo), fmt3(hi))
}

/// A point estimate with its percentile interval; `text` is the only
/// rounded field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub value: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub text: String,
    pub n_missing: usize,
}

impl Interval {
    pub fn new(value: f64, ci_lo: f64, ci_hi: f64) -> Self {
        Self { value, ci_lo, ci_hi, text: fmt_ci(value, ci_lo, ci_hi), n_missing: 0 }
    }

    /// `None` when the full-cohort point is undefined.
    pub fn from_bootstrap(b: &BootstrapResult) -> Option<Self> {
        b.point.map(|p| Self { n_missing: b.n_missing, ..Self::new(p, b.ci_lo, b.ci_hi) })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: u64,
    /// Input label to lowercase hex SHA-256.
    pub inputs: BTreeMap<String, String>,
    pub version: String,
    pub stages: Vec<StageTiming>,
}

impl RunManifest {
    pub fn new(command: &str, config: &impl Serialize, seed: u64) -> Result<Self> {
        Ok(Self {
            command: command.into(),
            config: serde_json::to_value(config)?,
            seed,
            inputs: BTreeMap::new(),
            version: env!("CARGO_PKG_VERSION").into(),
            stages: Vec::new(),
        })
    }

    pub fn add_input(&mut self, label: &str, path: &Path) -> Result<()> {
        self.inputs.insert(label.into(), digest_path(path)?);
        Ok(())
    }

    /// Runs `f`, recording its wall-clock time under `stage`.
    pub fn stage<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let t0 = Instant::now();
        let out = f();
        self.stages.push(StageTiming { stage: stage.into(), seconds: t0.elapsed().as_secs_f64() });
        out
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// SHA-256 of a file's bytes, or for a directory, of each regular file's
/// name and digest in name order.
pub fn digest_path(path: &Path) -> Result<String> {
    if path.is_dir() {
        let mut entries: Vec<PathBuf> = fs::read_dir(path)?.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.is_file()).collect();
        entries.sort();
        let mut h = Sha256::new();
        for p in entries {
            h.update(p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default().as_bytes());
            h.update([0u8]);
            h.update(digest_path(&p)?.as_bytes());
            h.update([b'\n']);
        }
        Ok(hex(&h.finalize()))
    } else {
        Ok(hex(&Sha256::digest(fs::read(path)?)))
    }
}

/// `<out>.manifest.json`.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// `<out>` with `suffix` appended to the file name.
pub fn sidecar_path(out: &Path, suffix: &str) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Pretty JSON with a trailing newline.
pub fn to_json(value: &impl Serialize) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    fs::write(path, to_json(value)?)?;
    Ok(())
}
