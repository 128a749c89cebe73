//! Config-driven experiment runs: dataset generation, training, sampling,
//! evaluation, (τ, k) sweeps and SVG plots, each leaving CSV artifacts and a
//! JSON manifest in the output directory.
//!
//! Run directory layout:
//!
//! ```text
//! data/train.csv data/test.csv data/spec.json   gen-data
//! model.ckpt train_log.csv                      train
//! samples.csv                                   sample, eval
//! histogram.csv ncre.csv prf.csv bpd.csv
//! scores.csv summary.csv                        eval
//! sweep.csv cells/<cell>/...                    sweep
//! plots/*.svg                                   plot
//! manifest_<command>.json                       every command
//! ```

mod commands;
mod manifest;
mod plot;

pub use commands::{gen_data, run_eval, run_sample, run_sweep, run_train, sweep_cell, EvalSummary, SweepRow};
pub use manifest::{FileEntry, RunManifest};
pub use plot::{run_plot, Svg};

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::datasets::{preset, GmmSpec};
use crate::error::{Error, Result};
use crate::flowmatch::TrainConfig;
use crate::ode::SolverConfig;

pub const CONFIG_VERSION: u32 = 1;

/// Either a named benchmark or an explicit mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    Preset(String),
    Spec(GmmSpec),
}

impl DatasetSource {
    pub fn resolve(&self) -> Result<GmmSpec> {
        let spec = match self {
            DatasetSource::Preset(name) => preset(name),
            DatasetSource::Spec(spec) => spec.validate().map(|_| spec.clone()),
        };
        spec.map_err(|e| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub n_gen: usize,
    /// Real points (leading rows of the test set) for precision/recall.
    pub n_real: usize,
    pub knn_k: usize,
    pub histogram: bool,
    pub ncre: bool,
    pub prf: bool,
    pub bpd: bool,
    /// Test points per class fed to the likelihood; 0 takes all.
    pub bpd_per_class: usize,
    pub bpd_solver: SolverConfig,
    /// Batches of majority scores pooled for the score statistics.
    pub score_batches: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            n_gen: 10_000,
            n_real: 5_000,
            knn_k: 5,
            histogram: true,
            ncre: true,
            prf: true,
            bpd: true,
            bpd_per_class: 200,
            bpd_solver: SolverConfig::likelihood(),
            score_batches: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub taus: Vec<f64>,
    pub ks: Vec<f64>,
    pub seeds: Vec<u64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            taus: vec![1.0],
            ks: vec![1.0],
            seeds: vec![0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub dataset: DatasetSource,
    #[serde(default = "default_n_train")]
    pub n_train: usize,
    #[serde(default = "default_n_test")]
    pub n_test: usize,
    #[serde(default)]
    pub train: TrainConfig,
    /// Sampler for generated sets.
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Drives data generation and evaluation; `train.seed` drives training.
    #[serde(default)]
    pub seed: u64,
}

fn default_n_train() -> usize {
    20_000
}

fn default_n_test() -> usize {
    10_000
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs/default")
}

impl ExperimentConfig {
    pub fn new(dataset: DatasetSource) -> Self {
        ExperimentConfig {
            version: CONFIG_VERSION,
            dataset,
            n_train: default_n_train(),
            n_test: default_n_test(),
            train: TrainConfig::default(),
            solver: SolverConfig::default(),
            eval: EvalConfig::default(),
            sweep: SweepConfig::default(),
            output_dir: default_output_dir(),
            seed: 0,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Set both the experiment and the training seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.train.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "config version {} unsupported, expected {CONFIG_VERSION}",
                self.version
            )));
        }
        self.dataset.resolve()?;
        if self.n_train < self.train.batch_size {
            return Err(Error::Config(format!(
                "n_train {} below batch size {}",
                self.n_train, self.train.batch_size
            )));
        }
        if self.n_test == 0 {
            return Err(Error::Config("n_test must be >= 1".into()));
        }
        self.train.validate()?;
        self.solver.validate()?;
        self.eval.bpd_solver.validate()?;
        let e = &self.eval;
        if e.prf && (e.knn_k == 0 || e.knn_k >= e.n_gen.min(e.n_real)) {
            return Err(Error::Config(format!(
                "knn_k {} must be in [1, min(n_gen, n_real))",
                e.knn_k
            )));
        }
        if e.n_real > self.n_test {
            return Err(Error::Config(format!(
                "n_real {} exceeds n_test {}",
                e.n_real, self.n_test
            )));
        }
        if self.sweep.taus.iter().any(|&t| !(t > 0.0))
            || self.sweep.ks.iter().any(|&k| !(k >= 0.0))
            || self.sweep.taus.is_empty()
            || self.sweep.ks.is_empty()
            || self.sweep.seeds.is_empty()
        {
            return Err(Error::Config(
                "sweep needs nonempty grids with tau > 0 and k >= 0".into(),
            ));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> &'static str {
        r#"{"version": 1, "dataset": {"preset": "two_mode_0.1"}}"#
    }

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = ExperimentConfig::from_json(minimal()).unwrap();
        assert_eq!(cfg.train, TrainConfig::default());
        assert_eq!(cfg.eval.knn_k, 5);
        let back = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn strict_parsing() {
        for bad in [
            r#"{"version": 1, "dataset": {"preset": "two_mode"}, "extra": 1}"#,
            r#"{"version": 1, "dataset": {"preset": "two_mode"}, "train": {"lr": 1}}"#,
            r#"{"version": 2, "dataset": {"preset": "two_mode"}}"#,
            r#"{"version": 1, "dataset": {"preset": "ring5_0"}}"#,
            r#"{"version": 1, "dataset": {"preset": "nonsense"}}"#,
            r#"{"version": 1}"#,
        ] {
            assert!(
                matches!(ExperimentConfig::from_json(bad), Err(Error::Config(_))),
                "{bad}"
            );
        }
    }

    #[test]
    fn explicit_spec_round_trips() {
        let spec = crate::datasets::two_mode(0.2).unwrap();
        let cfg = ExperimentConfig::new(DatasetSource::Spec(spec.clone()));
        let back = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back.dataset.resolve().unwrap(), spec);
    }

    #[test]
    fn seed_changes_hash() {
        let cfg = ExperimentConfig::from_json(minimal()).unwrap();
        let other = cfg.clone().with_seed(3);
        assert_ne!(cfg.hash(), other.hash());
        assert_eq!(other.train.seed, 3);
    }
}
