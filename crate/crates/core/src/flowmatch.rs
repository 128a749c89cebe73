//! Conditional flow matching with four couplings between source and target
//! mini-batches, and the reweighted training loop.
//!
//! | coupling      | plan                  | pairs                 | weights            |
//! |---------------|-----------------------|-----------------------|--------------------|
//! | `independent` | none (identity)       | `(i, i)`              | 1                  |
//! | `ot`          | exact assignment      | joint from the plan   | 1                  |
//! | `uot_cfm`     | source-fixed Sinkhorn | joint from the plan   | 1                  |
//! | `uot_rfm`     | source-fixed Sinkhorn | one target per source | `max(s, clamp)^-k` |

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AdamConfig, AdamState, MlpConfig, MlpVectorField};
use crate::numkit::{gaussian_sample, Mat, RngState};
use crate::transport::{
    cost_matrix, emd_exact, majority_scores_lenient, sample_pairs_joint, sample_pairs_rowwise, sinkhorn_unbalanced,
    uniform, MajorityScores, TransportPlan, UotConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    Independent,
    Ot,
    UotCfm,
    UotRfm,
}

impl Coupling {
    pub fn name(self) -> &'static str {
        match self {
            Coupling::Independent => "independent",
            Coupling::Ot => "ot",
            Coupling::UotCfm => "uot_cfm",
            Coupling::UotRfm => "uot_rfm",
        }
    }
}

impl std::fmt::Display for Coupling {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub coupling: Coupling,
    /// Correction order; ignored (treated as 0) unless `coupling` is `uot_rfm`.
    pub k: f64,
    /// Path bandwidth σ.
    pub sigma: f64,
    pub batch_size: usize,
    pub iterations: usize,
    pub uot: UotConfig,
    pub optimizer: AdamConfig,
    pub model: MlpConfig,
    /// Lower bound applied to scores before inversion.
    pub score_clamp: f64,
    /// Divide the batch weights by their mean (off by default).
    pub renormalize_weights: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            coupling: Coupling::UotRfm,
            k: 1.0,
            sigma: 0.05,
            batch_size: 256,
            iterations: 20_000,
            uot: UotConfig {
                tol: 1e-7,
                ..UotConfig::default()
            },
            optimizer: AdamConfig::default(),
            model: MlpConfig::default(),
            score_clamp: 1e-3,
            renormalize_weights: false,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.k >= 0.0 && self.k.is_finite()) {
            return Err(Error::Config(format!("k must be >= 0, got {}", self.k)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if !(self.score_clamp > 0.0) {
            return Err(Error::Config("score_clamp must be > 0".into()));
        }
        if matches!(self.coupling, Coupling::UotCfm | Coupling::UotRfm) {
            self.uot.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        self.optimizer.validate()
    }

    /// The correction order actually used by the loss.
    pub fn effective_k(&self) -> f64 {
        match self.coupling {
            Coupling::UotRfm => self.k,
            _ => 0.0,
        }
    }
}

/// One draw from the conditional Gaussian path between `x0` and `x1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    pub t: f64,
    pub x_t: Vec<f64>,
    pub u_target: Vec<f64>,
}

pub fn sample_path(x0: &[f64], x1: &[f64], t: f64, sigma: f64, rng: &mut RngState) -> PathSample {
    let x_t = x0
        .iter()
        .zip(x1)
        .map(|(a, b)| t * b + (1.0 - t) * a + sigma * rng.normal())
        .collect();
    let u_target = x0.iter().zip(x1).map(|(a, b)| b - a).collect();
    PathSample { t, x_t, u_target }
}

/// A batch of path samples laid out for the network.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBatch {
    pub t: Vec<f64>,
    pub x_t: Mat,
    pub u_target: Mat,
}

impl PathBatch {
    pub fn from_samples(samples: &[PathSample]) -> Result<Self> {
        let d = samples.first().map(|s| s.x_t.len()).unwrap_or(0);
        let n = samples.len();
        let mut x_t = Mat::zeros(n, d);
        let mut u = Mat::zeros(n, d);
        for (i, s) in samples.iter().enumerate() {
            if s.x_t.len() != d || s.u_target.len() != d {
                return Err(Error::Dimension("ragged path samples".into()));
            }
            x_t.row_mut(i).copy_from_slice(&s.x_t);
            u.row_mut(i).copy_from_slice(&s.u_target);
        }
        Ok(PathBatch {
            t: samples.iter().map(|s| s.t).collect(),
            x_t,
            u_target: u,
        })
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossReport {
    pub weighted_loss: f64,
    pub unweighted_loss: f64,
    pub mean_weight: f64,
    pub min_score: f64,
    pub max_score: f64,
}

/// `(1/B) Σ w_i ‖v_θ(t_i, x_t,i) − u_i‖²` and its parameter gradient.
///
/// The score fields of the report are left at 1; the trainer fills them in.
pub fn batch_loss(net: &MlpVectorField, batch: &PathBatch, weights: &[f64]) -> Result<(LossReport, Vec<f64>)> {
    let n = batch.len();
    if weights.len() != n {
        return Err(Error::Dimension(format!("{} weights for {n} samples", weights.len())));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
        return Err(Error::InvalidArgument("loss weights must be finite and > 0".into()));
    }
    let (pred, cache) = net.forward_cached(&batch.t, &batch.x_t)?;
    let d = net.dim();
    let mut upstream = Mat::zeros(n, d);
    let (mut weighted, mut unweighted) = (0.0, 0.0);
    let scale = 2.0 / n as f64;
    for i in 0..n {
        let mut sq = 0.0;
        for k in 0..d {
            let r = pred[(i, k)] - batch.u_target[(i, k)];
            sq += r * r;
            upstream[(i, k)] = scale * weights[i] * r;
        }
        weighted += weights[i] * sq;
        unweighted += sq;
    }
    let report = LossReport {
        weighted_loss: weighted / n as f64,
        unweighted_loss: unweighted / n as f64,
        mean_weight: weights.iter().sum::<f64>() / n as f64,
        min_score: 1.0,
        max_score: 1.0,
    };
    if !report.weighted_loss.is_finite() || !report.unweighted_loss.is_finite() {
        return Err(Error::NonFinite(format!(
            "flow matching loss (weighted {}, unweighted {}, mean weight {})",
            report.weighted_loss, report.unweighted_loss, report.mean_weight
        )));
    }
    let mut grad = vec![0.0; net.num_params()];
    net.backward_batch(&cache, &upstream, Some(&mut grad))?;
    Ok((report, grad))
}

/// `w_j = max(s_j, clamp)^{−k}`.
pub fn make_weights(scores: &MajorityScores, k: f64, clamp: f64) -> Vec<f64> {
    scores.as_slice().iter().map(|&s| s.max(clamp).powf(-k)).collect()
}

/// Coupled mini-batch: index pairs into the source and target batches, plus
/// per-target scores and solver diagnostics.
#[derive(Debug, Clone)]
pub struct CoupledBatch {
    pub pairs: Vec<(usize, usize)>,
    pub scores: MajorityScores,
    pub sinkhorn_iters: usize,
    pub converged: bool,
    pub plan: Option<TransportPlan>,
}

/// Build the coupling between `x0` and `x1` for one training step.
pub fn couple(coupling: Coupling, uot: &UotConfig, x0: &Mat, x1: &Mat, rng: &mut RngState) -> Result<CoupledBatch> {
    let n = x0.rows();
    if x1.rows() != n {
        return Err(Error::Dimension(format!(
            "source batch {n} vs target batch {}",
            x1.rows()
        )));
    }
    let ones = || MajorityScores(vec![1.0; n]);
    match coupling {
        Coupling::Independent => Ok(CoupledBatch {
            pairs: (0..n).map(|i| (i, i)).collect(),
            scores: ones(),
            sinkhorn_iters: 0,
            converged: true,
            plan: None,
        }),
        Coupling::Ot => {
            let c = cost_matrix(x0, x1)?;
            let plan = emd_exact(&c, &uniform(n), &uniform(n))?;
            Ok(CoupledBatch {
                pairs: sample_pairs_joint(&plan, n, rng)?,
                scores: ones(),
                sinkhorn_iters: 0,
                converged: true,
                plan: Some(plan),
            })
        }
        Coupling::UotCfm | Coupling::UotRfm => {
            let c = cost_matrix(x0, x1)?;
            let out = sinkhorn_unbalanced(&c, &uniform(n), &uniform(n), uot)?;
            let pairs = if coupling == Coupling::UotRfm {
                sample_pairs_rowwise(&out.plan, rng)?
            } else {
                sample_pairs_joint(&out.plan, n, rng)?
            };
            Ok(CoupledBatch {
                pairs,
                scores: majority_scores_lenient(&out.plan),
                sinkhorn_iters: out.iterations,
                converged: out.converged,
                plan: Some(out.plan),
            })
        }
    }
}

/// One row of the training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub loss: LossReport,
    pub sinkhorn_iters: usize,
    pub converged: bool,
    pub clamped_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainLog {
    pub coupling: Coupling,
    pub records: Vec<StepRecord>,
}

impl TrainLog {
    pub const HEADER: [&'static str; 10] = [
        "step",
        "weighted_loss",
        "unweighted_loss",
        "mean_weight",
        "sinkhorn_iters",
        "converged_flag",
        "min_score",
        "max_score",
        "clamped_fraction",
        "coupling",
    ];

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(Self::HEADER)?;
        for r in &self.records {
            w.write_record([
                r.step.to_string(),
                r.loss.weighted_loss.to_string(),
                r.loss.unweighted_loss.to_string(),
                r.loss.mean_weight.to_string(),
                r.sinkhorn_iters.to_string(),
                (r.converged as u8).to_string(),
                r.loss.min_score.to_string(),
                r.loss.max_score.to_string(),
                r.clamped_fraction.to_string(),
                self.coupling.name().to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// Mean unweighted loss over the last `n` steps.
    pub fn tail_loss(&self, n: usize) -> f64 {
        let tail = &self.records[self.records.len().saturating_sub(n)..];
        tail.iter().map(|r| r.loss.unweighted_loss).sum::<f64>() / tail.len().max(1) as f64
    }
}

/// Everything one training step needs besides the network and optimizer.
fn training_batch(cfg: &TrainConfig, data: &Mat, rng: &mut RngState) -> Result<(PathBatch, Vec<f64>, StepRecord)> {
    let (b, d) = (cfg.batch_size, data.cols());
    let x0 = gaussian_sample(rng, b, d);
    let idx: Vec<usize> = (0..b).map(|_| rng.index(data.rows())).collect();
    let x1 = data.select_rows(&idx);
    let coupled = couple(cfg.coupling, &cfg.uot, &x0, &x1, rng)?;
    let k = cfg.effective_k();
    let target_weights = make_weights(&coupled.scores, k, cfg.score_clamp);
    let mut weights: Vec<f64> = coupled.pairs.iter().map(|&(_, j)| target_weights[j]).collect();
    if cfg.renormalize_weights {
        let m = weights.iter().sum::<f64>() / weights.len() as f64;
        weights.iter_mut().for_each(|w| *w /= m);
    }
    let samples: Vec<PathSample> = coupled
        .pairs
        .iter()
        .map(|&(i, j)| {
            let t = rng.uniform();
            sample_path(x0.row(i), x1.row(j), t, cfg.sigma, rng)
        })
        .collect();
    let s = coupled.scores.as_slice();
    let record = StepRecord {
        step: 0,
        loss: LossReport {
            weighted_loss: 0.0,
            unweighted_loss: 0.0,
            mean_weight: 0.0,
            min_score: s.iter().copied().fold(f64::INFINITY, f64::min),
            max_score: s.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        },
        sinkhorn_iters: coupled.sinkhorn_iters,
        converged: coupled.converged,
        clamped_fraction: s.iter().filter(|&&v| v < cfg.score_clamp).count() as f64 / s.len() as f64,
    };
    Ok((PathBatch::from_samples(&samples)?, weights, record))
}

/// Train a fresh network on `data` (rows are target points).
///
/// Initialization and every step draw from forks of `rng`, so a run is a
/// function of `(cfg, data, rng seed)` only.
pub fn train(cfg: &TrainConfig, data: &Mat, rng: &RngState) -> Result<(MlpVectorField, TrainLog)> {
    train_with_progress(cfg, data, rng, |_| {})
}

/// [`train`] with a callback invoked after every step.
pub fn train_with_progress(
    cfg: &TrainConfig,
    data: &Mat,
    rng: &RngState,
    mut progress: impl FnMut(&StepRecord),
) -> Result<(MlpVectorField, TrainLog)> {
    cfg.validate()?;
    if data.rows() < cfg.batch_size {
        return Err(Error::InvalidArgument(format!(
            "dataset has {} points, fewer than batch size {}",
            data.rows(),
            cfg.batch_size
        )));
    }
    let mut net = MlpVectorField::new(data.cols(), cfg.model.clone(), &mut rng.fork("init"))?;
    let mut opt = AdamState::new(net.num_params(), cfg.optimizer);
    let mut records = Vec::with_capacity(cfg.iterations);
    for step in 0..cfg.iterations {
        let mut step_rng = rng.fork_indexed("step", step as u64);
        let (batch, weights, mut record) = training_batch(cfg, data, &mut step_rng)?;
        let (loss, grad) = batch_loss(&net, &batch, &weights)?;
        opt.step(net.params_mut(), &grad)?;
        record.step = step;
        record.loss = LossReport {
            min_score: record.loss.min_score,
            max_score: record.loss.max_score,
            ..loss
        };
        progress(&record);
        records.push(record);
    }
    Ok((
        net,
        TrainLog {
            coupling: cfg.coupling,
            records,
        },
    ))
}
