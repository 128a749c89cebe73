//! Mini-batch optimal transport: balanced assignment, entropic unbalanced
//! Sinkhorn, a dense reference minimizer, majority scores and pair sampling.
//!
//! All entropic problems here share one objective convention:
//!
//! ```text
//! <C, π> + ε·KL(π ‖ a⊗b) + τ₁·KL(π₀ ‖ a) + τ₂·KL(π₁ ‖ b)
//! ```
//!
//! with the generalized (unnormalized) KL `Σ p ln(p/q) − p + q`. A
//! source-fixed problem drops the `τ₁` term and constrains `π₀ = a`.

mod cost;
mod emd;
mod oracle;
mod plan;
mod sinkhorn;

pub use cost::{cost_matrix, CostMatrix};
pub use emd::{emd_exact, solve_assignment};
pub use oracle::{uot_oracle_dense, OracleOutput};
pub use plan::{
    majority_scores, majority_scores_lenient, read_plan_csv, sample_pairs_joint, sample_pairs_rowwise, write_plan_csv,
    write_scores_csv, MajorityScores, TransportPlan,
};
pub use sinkhorn::{sinkhorn_unbalanced, SinkhornOutput, SinkhornPotentials};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Entropic unbalanced transport settings. The marginal divergence is KL.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UotConfig {
    pub eps: f64,
    /// Target-marginal penalty τ₂ (also τ₁ when `source_fixed` is off).
    pub tau: f64,
    /// τ₁ = ∞: the source marginal is matched exactly.
    pub source_fixed: bool,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for UotConfig {
    fn default() -> Self {
        UotConfig {
            eps: 0.05,
            tau: 1.0,
            source_fixed: true,
            max_iter: 10_000,
            tol: 1e-9,
        }
    }
}

impl UotConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::InvalidArgument(format!("eps must be > 0, got {}", self.eps)));
        }
        if !(self.tau > 0.0) {
            return Err(Error::InvalidArgument(format!("tau must be > 0, got {}", self.tau)));
        }
        if self.max_iter < 1 {
            return Err(Error::InvalidArgument("max_iter must be >= 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tol must be > 0, got {}", self.tol)));
        }
        Ok(())
    }

    /// Exponent applied to the source scaling update.
    pub fn source_exponent(&self) -> f64 {
        if self.source_fixed {
            1.0
        } else {
            self.tau / (self.tau + self.eps)
        }
    }

    /// Exponent applied to the target scaling update.
    pub fn target_exponent(&self) -> f64 {
        if self.tau.is_infinite() {
            1.0
        } else {
            self.tau / (self.tau + self.eps)
        }
    }
}

/// Generalized KL divergence between nonnegative vectors, with `0 ln 0 = 0`.
pub fn kl_generalized(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(&pi, &qi)| {
            let log_term = if pi > 0.0 { pi * (pi / qi).ln() } else { 0.0 };
            log_term - pi + qi
        })
        .sum()
}

/// Entropic UOT objective of `pi` under the shared convention above.
pub fn uot_objective(c: &CostMatrix, a: &[f64], b: &[f64], cfg: &UotConfig, pi: &crate::Mat) -> f64 {
    let (n, m) = pi.shape();
    let mut transport = 0.0;
    let mut entropic = 0.0;
    for i in 0..n {
        for j in 0..m {
            let p = pi[(i, j)];
            let q = a[i] * b[j];
            transport += c.get(i, j) * p;
            entropic += if p > 0.0 { p * (p / q).ln() } else { 0.0 } - p + q;
        }
    }
    let rows = pi.row_sums();
    let cols = pi.col_sums();
    let mut obj = transport + cfg.eps * entropic;
    if !cfg.source_fixed {
        obj += cfg.tau * kl_generalized(&rows, a);
    }
    if cfg.tau.is_finite() {
        obj += cfg.tau * kl_generalized(&cols, b);
    }
    obj
}

pub fn uniform(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

pub(crate) fn check_marginals(c: &CostMatrix, a: &[f64], b: &[f64]) -> Result<()> {
    let (n, m) = c.shape();
    if a.len() != n || b.len() != m {
        return Err(Error::Dimension(format!(
            "marginals of length {}/{} for a {n}x{m} cost",
            a.len(),
            b.len()
        )));
    }
    if let Some(i) = a.iter().position(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "source weight {i} is not strictly positive"
        )));
    }
    if let Some(j) = b.iter().position(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "target weight {j} is not strictly positive"
        )));
    }
    Ok(())
}
