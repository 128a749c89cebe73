//! Log-domain KL-unbalanced Sinkhorn with absorption.
//!
//! Potentials `f`, `g` define the plan
//! `π_ij = a_i b_j exp((f_i + g_j − c_ij)/ε)`. The updates are
//!
//! ```text
//! f_i ← −φ₁ ε LSE_j(ln b_j + (g_j − c_ij)/ε)
//! g_j ← −φ₂ ε LSE_i(ln a_i + (f_i − c_ij)/ε)
//! ```
//!
//! with `φ = τ/(τ+ε)` (`φ₁ = 1` when source-fixed). After a `g` update the
//! target marginal satisfies `π₁_j = b_j exp(−g_j/τ)` exactly.
//!
//! Iterations run in the linear domain on a kernel with the current
//! potentials absorbed, `K̃_ij = a_i b_j exp((F_i + G_j − c_ij)/ε)`, so each
//! sweep is two mat-vecs instead of `2B²` exponentials. Scalings are folded
//! back into `F`, `G` whenever they leave `[e^-ABSORB, e^ABSORB]`.

use super::{check_marginals, CostMatrix, TransportPlan, UotConfig};
use crate::error::{Error, Result};
use crate::numkit::{logsumexp, Mat};

const ABSORB: f64 = 100.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SinkhornPotentials {
    pub f: Vec<f64>,
    pub g: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SinkhornOutput {
    pub plan: TransportPlan,
    pub potentials: SinkhornPotentials,
    pub iterations: usize,
    pub converged: bool,
}

struct Problem<'a> {
    c: &'a CostMatrix,
    log_a: Vec<f64>,
    log_b: Vec<f64>,
    eps: f64,
    phi_src: f64,
    phi_tgt: f64,
}

impl Problem<'_> {
    fn log_f_update(&self, g: &[f64], f: &mut [f64], scratch: &mut Vec<f64>) {
        let (n, m) = self.c.shape();
        for i in 0..n {
            scratch.clear();
            scratch.extend((0..m).map(|j| self.log_b[j] + (g[j] - self.c.get(i, j)) / self.eps));
            f[i] = -self.phi_src * self.eps * logsumexp(scratch);
        }
    }

    fn log_g_update(&self, f: &[f64], g: &mut [f64], scratch: &mut Vec<f64>) {
        let (n, m) = self.c.shape();
        for j in 0..m {
            scratch.clear();
            scratch.extend((0..n).map(|i| self.log_a[i] + (f[i] - self.c.get(i, j)) / self.eps));
            g[j] = -self.phi_tgt * self.eps * logsumexp(scratch);
        }
    }

    fn kernel(&self, f: &[f64], g: &[f64], out: &mut Mat) {
        let (n, m) = self.c.shape();
        for i in 0..n {
            let row = out.row_mut(i);
            for j in 0..m {
                row[j] = (self.log_a[i] + self.log_b[j] + (f[i] + g[j] - self.c.get(i, j)) / self.eps).exp();
            }
        }
    }

    /// Kernel for the scaling iterations. Subnormal entries are flushed to
    /// zero: they carry no mass at double precision and make every
    /// multiply-add touching them very slow.
    fn scaling_kernel(&self, f: &[f64], g: &[f64], out: &mut Mat) {
        self.kernel(f, g, out);
        for v in out.as_mut_slice() {
            if *v < f64::MIN_POSITIVE {
                *v = 0.0;
            }
        }
    }
}

/// Solve the entropic KL-unbalanced problem by Sinkhorn scaling.
///
/// Non-convergence within `max_iter` is reported through
/// [`SinkhornOutput::converged`]; the last iterate is still returned.
pub fn sinkhorn_unbalanced(c: &CostMatrix, a: &[f64], b: &[f64], cfg: &UotConfig) -> Result<SinkhornOutput> {
    cfg.validate()?;
    check_marginals(c, a, b)?;
    let (n, m) = c.shape();
    let prob = Problem {
        c,
        log_a: a.iter().map(|v| v.ln()).collect(),
        log_b: b.iter().map(|v| v.ln()).collect(),
        eps: cfg.eps,
        phi_src: cfg.source_exponent(),
        phi_tgt: cfg.target_exponent(),
    };
    // exp(−X (1−φ)/ε) factors of the absorbed update; (1−φ)/ε = 1/(τ+ε).
    let damp_src = if cfg.source_fixed {
        0.0
    } else {
        1.0 / (cfg.tau + cfg.eps)
    };
    let damp_tgt = if cfg.tau.is_infinite() {
        0.0
    } else {
        1.0 / (cfg.tau + cfg.eps)
    };

    let mut scratch = Vec::with_capacity(n.max(m));
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; m];
    // One exact log-domain sweep puts the potentials on the right scale
    // before the kernel is formed.
    prob.log_f_update(&g, &mut f, &mut scratch);
    prob.log_g_update(&f, &mut g, &mut scratch);

    let mut big_f = f.clone();
    let mut big_g = g.clone();
    let mut kern = Mat::zeros(n, m);
    prob.scaling_kernel(&big_f, &big_g, &mut kern);
    // both products run row-wise: K̃ v uses the transpose
    let mut kern_t = kern.transpose();
    // exp(−F·damp) and exp(−G·damp) only change when potentials are absorbed
    let damping = |x: &[f64], damp: f64| -> Vec<f64> { x.iter().map(|v| (-v * damp).exp()).collect() };
    let mut e_src = damping(&big_f, damp_src);
    let mut e_tgt = damping(&big_g, damp_tgt);
    let mut u = vec![1.0; n];
    let mut v = vec![1.0; m];
    let mut v_prev = vec![1.0; m];
    let mut kv = vec![0.0; n];
    let mut ktu = vec![0.0; m];
    // |Δg| = ε |ln(v/v_prev)| < tol  ⇔  v/v_prev ∈ (lo, hi)
    let (ratio_lo, ratio_hi) = ((-cfg.tol / cfg.eps).exp(), (cfg.tol / cfg.eps).exp());
    let (absorb_lo, absorb_hi) = ((-ABSORB).exp(), ABSORB.exp());
    let pow = |x: f64, p: f64| if p == 1.0 { x } else { (p * x.ln()).exp() };

    let mut iterations = 1;
    let mut converged = false;
    while iterations < cfg.max_iter {
        iterations += 1;
        let mut restarted = false;

        // source half-step
        matvec_t(&kern_t, &v, &mut kv);
        let mut ok = true;
        for i in 0..n {
            let val = pow(a[i] / kv[i], prob.phi_src) * e_src[i];
            if !(val.is_finite() && val > 0.0) {
                ok = false;
                break;
            }
            u[i] = val;
        }
        if !ok {
            // kernel under/overflow: redo the half-step in the log domain
            for j in 0..m {
                g[j] = big_g[j] + cfg.eps * v[j].ln();
            }
            prob.log_f_update(&g, &mut f, &mut scratch);
            big_f.copy_from_slice(&f);
            big_g.copy_from_slice(&g);
            u.fill(1.0);
            v.fill(1.0);
            v_prev.fill(1.0);
            prob.scaling_kernel(&big_f, &big_g, &mut kern);
            kern_t = kern.transpose();
            e_src = damping(&big_f, damp_src);
            e_tgt = damping(&big_g, damp_tgt);
        }

        // target half-step
        matvec_t(&kern, &u, &mut ktu);
        let mut ok = true;
        for j in 0..m {
            let val = pow(b[j] / ktu[j], prob.phi_tgt) * e_tgt[j];
            if !(val.is_finite() && val > 0.0) {
                ok = false;
                break;
            }
            v[j] = val;
        }
        if !ok {
            for i in 0..n {
                f[i] = big_f[i] + cfg.eps * u[i].ln();
            }
            prob.log_g_update(&f, &mut g, &mut scratch);
            big_f.copy_from_slice(&f);
            big_g.copy_from_slice(&g);
            u.fill(1.0);
            v.fill(1.0);
            v_prev.fill(1.0);
            prob.scaling_kernel(&big_f, &big_g, &mut kern);
            kern_t = kern.transpose();
            e_src = damping(&big_f, damp_src);
            e_tgt = damping(&big_g, damp_tgt);
            restarted = true;
        }

        let small_step = !restarted
            && v.iter().zip(&v_prev).all(|(&x, &y)| {
                let r = x / y;
                r > ratio_lo && r < ratio_hi
            });
        v_prev.copy_from_slice(&v);

        if small_step {
            let done = if cfg.source_fixed {
                // row residual of the current iterate: u_i (K̃ v)_i vs a_i
                matvec_t(&kern_t, &v, &mut kv);
                (0..n).all(|i| (u[i] * kv[i] - a[i]).abs() < cfg.tol)
            } else {
                // f changes too; check it against the next exact update
                for j in 0..m {
                    g[j] = big_g[j] + cfg.eps * v[j].ln();
                }
                let f_now: Vec<f64> = (0..n).map(|i| big_f[i] + cfg.eps * u[i].ln()).collect();
                let mut f_next = vec![0.0; n];
                prob.log_f_update(&g, &mut f_next, &mut scratch);
                f_now.iter().zip(&f_next).all(|(x, y)| (x - y).abs() < cfg.tol)
            };
            if done {
                converged = true;
                break;
            }
        }

        let out_of_range = |s: &f64| *s > absorb_hi || *s < absorb_lo;
        if u.iter().any(out_of_range) || v.iter().any(out_of_range) {
            for i in 0..n {
                big_f[i] += cfg.eps * u[i].ln();
            }
            for j in 0..m {
                big_g[j] += cfg.eps * v[j].ln();
            }
            u.fill(1.0);
            v.fill(1.0);
            v_prev.fill(1.0);
            prob.scaling_kernel(&big_f, &big_g, &mut kern);
            kern_t = kern.transpose();
            e_src = damping(&big_f, damp_src);
            e_tgt = damping(&big_g, damp_tgt);
        }
    }

    for j in 0..m {
        g[j] = big_g[j] + cfg.eps * v[j].ln();
    }
    if cfg.source_fixed {
        // the source constraint is hard: finish on an exact row update
        prob.log_f_update(&g, &mut f, &mut scratch);
    } else {
        for i in 0..n {
            f[i] = big_f[i] + cfg.eps * u[i].ln();
        }
    }
    let mut pi = Mat::zeros(n, m);
    prob.kernel(&f, &g, &mut pi);
    if !pi.all_finite() {
        return Err(Error::NonFinite("sinkhorn_unbalanced plan".into()));
    }
    Ok(SinkhornOutput {
        plan: TransportPlan::from_mat(pi),
        potentials: SinkhornPotentials { f, g },
        iterations,
        converged,
    })
}

fn matvec_t(k: &Mat, x: &[f64], out: &mut [f64]) {
    #[cfg(target_arch = "x86_64")]
    if std::is_x86_feature_detected!("avx2") {
        // SAFETY: as above.
        return unsafe { matvec_t_avx2(k, x, out) };
    }
    matvec_t_generic(k, x, out)
}

// Wider registers only; no FMA, and the summation order is fixed in the
// source, so both paths give bit-identical results.
#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn matvec_t_avx2(k: &Mat, x: &[f64], out: &mut [f64]) {
    matvec_t_generic(k, x, out)
}

#[inline(always)]
fn matvec_t_generic(k: &Mat, x: &[f64], out: &mut [f64]) {
    out.fill(0.0);
    for (row, &xi) in k.iter_rows().zip(x) {
        if xi == 0.0 {
            continue;
        }
        for (o, kij) in out.iter_mut().zip(row) {
            *o += kij * xi;
        }
    }
}
