//! Dense reference minimizer for tiny entropic UOT instances.
//!
//! Entropic mirror descent directly on the plan: `ln π ← ln π − η ∇J(π)` with
//! `η = 1/(ε + τ₁ + τ₂)`, followed by a KL projection (row rescaling) when
//! the source is fixed. It shares no code with the Sinkhorn solver.

use super::{check_marginals, uot_objective, CostMatrix, TransportPlan, UotConfig};
use crate::error::{Error, Result};
use crate::numkit::Mat;

pub const ORACLE_MAX_SIZE: usize = 8;
const OBJECTIVE_TOL: f64 = 1e-12;
const MAX_ITERS: usize = 2_000_000;

#[derive(Debug, Clone)]
pub struct OracleOutput {
    pub plan: TransportPlan,
    pub objective: f64,
    pub iterations: usize,
}

pub fn uot_oracle_dense(c: &CostMatrix, a: &[f64], b: &[f64], cfg: &UotConfig) -> Result<OracleOutput> {
    cfg.validate()?;
    check_marginals(c, a, b)?;
    let (n, m) = c.shape();
    if n > ORACLE_MAX_SIZE || m > ORACLE_MAX_SIZE {
        return Err(Error::OracleTooLarge(n.max(m)));
    }
    let tau_src = if cfg.source_fixed { 0.0 } else { cfg.tau };
    let eta = 1.0 / (cfg.eps + tau_src + cfg.tau);

    let mut log_pi = Mat::zeros(n, m);
    for i in 0..n {
        for j in 0..m {
            log_pi[(i, j)] = (a[i] * b[j]).ln();
        }
    }
    if cfg.source_fixed {
        project_rows(&mut log_pi, a);
    }
    let mut pi = log_pi.map(f64::exp);
    let mut obj = uot_objective(c, a, b, cfg, &pi);
    let mut iterations = 0;
    let mut small_steps = 0;
    while iterations < MAX_ITERS {
        iterations += 1;
        let rows = pi.row_sums();
        let cols = pi.col_sums();
        for i in 0..n {
            for j in 0..m {
                let lp = log_pi[(i, j)];
                let mut grad = c.get(i, j) + cfg.eps * (lp - (a[i] * b[j]).ln());
                grad += cfg.tau * (cols[j] / b[j]).ln();
                if !cfg.source_fixed {
                    grad += cfg.tau * (rows[i] / a[i]).ln();
                }
                log_pi[(i, j)] = lp - eta * grad;
            }
        }
        if cfg.source_fixed {
            project_rows(&mut log_pi, a);
        }
        pi = log_pi.map(f64::exp);
        let next = uot_objective(c, a, b, cfg, &pi);
        if !next.is_finite() {
            return Err(Error::NonFinite("uot_oracle_dense objective".into()));
        }
        // several consecutive tiny changes, so a flat stretch does not stop early
        if (obj - next).abs() < OBJECTIVE_TOL {
            small_steps += 1;
            if small_steps >= 3 {
                obj = next;
                break;
            }
        } else {
            small_steps = 0;
        }
        obj = next;
    }
    Ok(OracleOutput {
        plan: TransportPlan::from_mat(pi),
        objective: obj,
        iterations,
    })
}

fn project_rows(log_pi: &mut Mat, a: &[f64]) {
    for (i, &ai) in a.iter().enumerate() {
        let row = log_pi.row_mut(i);
        let shift = ai.ln() - crate::numkit::logsumexp(row);
        row.iter_mut().for_each(|v| *v += shift);
    }
}
