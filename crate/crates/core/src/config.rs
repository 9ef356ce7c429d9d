//! Run configuration, its canonical form and hash.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::prompts::PolisherConfig;
use crate::taskgen::{TaskKind, TaskParams};

pub const DEFAULT_SHARD_SIZE: u64 = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    /// Asset directory; the built-in library when absent.
    pub asset_root: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub master_seed: u64,
    pub shard_size: u64,
    /// Worker threads; 0 means one per available core.
    pub jobs: usize,
    /// Explicit per-task sample counts.
    pub counts: BTreeMap<TaskKind, u64>,
    /// Total spread over `mix` weights for tasks without an explicit count.
    pub total: u64,
    pub mix: BTreeMap<TaskKind, f64>,
    pub params: TaskParams,
    pub polisher: PolisherConfig,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            asset_root: None,
            out_dir: PathBuf::from("out"),
            master_seed: 0,
            shard_size: DEFAULT_SHARD_SIZE,
            jobs: 0,
            counts: BTreeMap::new(),
            total: 0,
            mix: BTreeMap::new(),
            params: TaskParams::default(),
            polisher: PolisherConfig::default(),
        }
    }
}

/// The part of a configuration that determines output bytes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CanonicalConfig {
    pub master_seed: u64,
    pub shard_size: u64,
    pub counts: BTreeMap<TaskKind, u64>,
    pub params: TaskParams,
}

impl GenConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config("config", e.message().to_owned()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = GenConfig::from_toml(&text)?;
        // relative paths in a config file are relative to the file
        if let Some(dir) = path.parent() {
            if let Some(root) = &cfg.asset_root {
                if root.is_relative() {
                    cfg.asset_root = Some(dir.join(root));
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.shard_size == 0 {
            return Err(Error::config("shard_size", "must be at least 1"));
        }
        for (task, w) in &self.mix {
            if !(w.is_finite() && *w >= 0.0) {
                return Err(Error::config(format!("mix.{task}"), "weight must be finite and >= 0"));
            }
        }
        let free_weight: f64 = self
            .mix
            .iter()
            .filter(|(t, _)| !self.counts.contains_key(t))
            .map(|(_, w)| w)
            .sum();
        if self.total > 0 && free_weight <= 0.0 {
            return Err(Error::config("mix", "weights must sum to > 0 when total > 0"));
        }
        self.params.validate()
    }

    /// Per-task counts: explicit counts win; `total` is split over the
    /// remaining tasks by largest remainder.
    pub fn resolved_counts(&self) -> BTreeMap<TaskKind, u64> {
        let mut out: BTreeMap<TaskKind, u64> = TaskKind::ALL.iter().map(|t| (*t, 0)).collect();
        let free: Vec<(TaskKind, f64)> = self
            .mix
            .iter()
            .filter(|(t, w)| !self.counts.contains_key(t) && **w > 0.0)
            .map(|(t, w)| (*t, *w))
            .collect();
        let sum: f64 = free.iter().map(|(_, w)| w).sum();
        if self.total > 0 && sum > 0.0 {
            let mut assigned = 0u64;
            let mut rema: Vec<(f64, TaskKind)> = Vec::new();
            for (t, w) in &free {
                let exact = self.total as f64 * w / sum;
                let base = exact.floor() as u64;
                out.insert(*t, base);
                assigned += base;
                rema.push((exact - base as f64, *t));
            }
            rema.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            for (_, t) in rema.iter().take((self.total - assigned) as usize) {
                *out.get_mut(t).expect("present") += 1;
            }
        }
        for (t, n) in &self.counts {
            out.insert(*t, *n);
        }
        out
    }

    pub fn canonical(&self) -> CanonicalConfig {
        CanonicalConfig {
            master_seed: self.master_seed,
            shard_size: self.shard_size,
            counts: self.resolved_counts(),
            params: self.params.clone(),
        }
    }
}

impl CanonicalConfig {
    /// Hex SHA-256 of the sorted-key JSON form.
    pub fn hash(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        let text = serde_json::to_string(&value).expect("value serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reordered_and_defaulted_configs_hash_alike() {
        let a = GenConfig::from_toml(
            "master_seed = 7\nout_dir = \"x\"\n[counts]\ninpaint = 3\ndrag_edit = 2\n",
        )
        .unwrap();
        let b = GenConfig::from_toml(
            "master_seed = 7\nout_dir = \"y\"\nshard_size = 1000\njobs = 3\n[counts]\ndrag_edit = 2\ninpaint = 3\n[params]\ncaption_prob = 0.5\n",
        )
        .unwrap();
        assert_eq!(a.canonical().hash(), b.canonical().hash());
        let c = GenConfig::from_toml("master_seed = 8\n[counts]\ninpaint = 3\ndrag_edit = 2\n").unwrap();
        assert_ne!(a.canonical().hash(), c.canonical().hash());
    }

    #[test]
    fn total_split_by_mix() {
        let cfg = GenConfig::from_toml(
            "total = 10\n[mix]\ninpaint = 1.0\noutpaint = 1.0\nseg_det = 1.0\n[counts]\nt2i_text = 4\n",
        )
        .unwrap();
        cfg.validate().unwrap();
        let c = cfg.resolved_counts();
        assert_eq!(c[&TaskKind::T2iText], 4);
        assert_eq!(c[&TaskKind::Inpaint] + c[&TaskKind::Outpaint] + c[&TaskKind::SegDet], 10);
        assert_eq!(c[&TaskKind::Inpaint], 4);
    }

    #[test]
    fn invalid_fields_are_named() {
        let err = GenConfig::from_toml("shard_size = 0").unwrap().validate().unwrap_err();
        assert!(err.to_string().contains("shard_size"));
        let err = GenConfig::from_toml("[params]\ncaption_prob = 2.0").unwrap().validate().unwrap_err();
        assert!(err.to_string().contains("caption_prob"));
        assert!(GenConfig::from_toml("bogus = 1").is_err());
        assert!(GenConfig::from_toml("total = 5").unwrap().validate().is_err());
    }
}
