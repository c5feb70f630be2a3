//! CSV records, their readers and writers, and the run manifest.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::HarnessError;

pub const MANIFEST_NAME: &str = "manifest.txt";
const MANIFEST_MAGIC: &str = "dynrank-manifest 1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub item_id: String,
    pub category: String,
    pub raw_score: f64,
    pub norm_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub epoch: usize,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session: usize,
    pub page: usize,
    pub position: usize,
    pub item_id: String,
    pub category: String,
    pub exposed: u8,
    pub clicked: u8,
    pub ordered: u8,
    pub gmv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseAggregateRecord {
    pub policy: String,
    pub round: u64,
    pub metric: String,
    pub n: usize,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageDcgRecord {
    pub variant: String,
    pub page: String,
    pub n: usize,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageComparisonRecord {
    pub page: String,
    pub sessions: usize,
    pub wins: u64,
    pub losses: u64,
    pub ties: u64,
    pub mean_static: f64,
    pub mean_dnn_mab: f64,
    pub mean_diff: f64,
    pub p_value: f64,
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `rows` with a header line and returns the file's sha256.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<String, HarnessError> {
    let csv_err = |source| HarnessError::Csv {
        path: path.display().to_string(),
        source,
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| HarnessError::Artifact(format!("{}: {e}", path.display())))?;
    write_bytes(path, &bytes)
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<String, HarnessError> {
    fs::write(path, bytes).map_err(|e| HarnessError::io(path, e))?;
    Ok(sha256_hex(bytes))
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, HarnessError> {
    let csv_err = |source| HarnessError::Csv {
        path: path.display().to_string(),
        source,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(csv_err)
}

/// Fingerprint of one run. Contains no timestamps or paths.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub mode: String,
    pub seed: u64,
    pub config_sha256: String,
    /// `(file name, sha256)` in write order.
    pub artifacts: Vec<(String, String)>,
}

impl Manifest {
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "{MANIFEST_MAGIC}\nmode = {}\nseed = {}\nconfig_sha256 = {}\n",
            self.mode, self.seed, self.config_sha256
        );
        for (name, hash) in &self.artifacts {
            s.push_str(&format!("artifact = {name} {hash}\n"));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, HarnessError> {
        let bad = |m: &str| HarnessError::Artifact(format!("manifest: {m}"));
        let mut lines = text.lines();
        if lines.next() != Some(MANIFEST_MAGIC) {
            return Err(bad("missing header"));
        }
        let mut m = Manifest {
            mode: String::new(),
            seed: 0,
            config_sha256: String::new(),
            artifacts: Vec::new(),
        };
        let mut seen_seed = false;
        for line in lines {
            let (key, value) = line.split_once(" = ").ok_or_else(|| bad(line))?;
            match key {
                "mode" => m.mode = value.to_string(),
                "seed" => {
                    m.seed = value.parse().map_err(|_| bad("seed"))?;
                    seen_seed = true;
                }
                "config_sha256" => m.config_sha256 = value.to_string(),
                "artifact" => {
                    let (name, hash) = value.split_once(' ').ok_or_else(|| bad(line))?;
                    m.artifacts.push((name.to_string(), hash.to_string()));
                }
                _ => return Err(bad(line)),
            }
        }
        if m.mode.is_empty() || !seen_seed || m.config_sha256.is_empty() {
            return Err(bad("incomplete"));
        }
        Ok(m)
    }
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, HarnessError> {
    let path = dir.join(MANIFEST_NAME);
    let text = fs::read_to_string(&path).map_err(|e| HarnessError::io(&path, e))?;
    Manifest::from_text(&text)
}
