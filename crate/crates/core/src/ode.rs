//! ODE integration of a vector field: fixed-step Euler and RK4, and adaptive
//! Dormand–Prince 5(4). Sampling pushes source noise from `t = 0` to `t = 1`;
//! likelihoods integrate the state together with the Jacobian trace from
//! `t = 1` back to `t = 0`.
//!
//! All integrators work on batches. Every row carries its own time and, for
//! the adaptive method, its own step size, so a batched solve gives the same
//! trajectory per row as solving each row alone.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::MlpVectorField;
use crate::numkit::{gaussian_sample, Mat, RngState};

/// Time-dependent vector field evaluated on a batch, row `i` at time `t[i]`.
pub trait VectorField {
    fn dim(&self) -> usize;
    fn eval_batch(&self, t: &[f64], x: &Mat) -> Result<Mat>;
}

/// A field that can also report `tr(∂v/∂x)` at each row.
pub trait TraceField: VectorField {
    fn eval_with_trace(&self, t: &[f64], x: &Mat) -> Result<(Mat, Vec<f64>)>;
}

impl VectorField for MlpVectorField {
    fn dim(&self) -> usize {
        MlpVectorField::dim(self)
    }

    fn eval_batch(&self, t: &[f64], x: &Mat) -> Result<Mat> {
        self.forward_batch(t, x)
    }
}

impl TraceField for MlpVectorField {
    fn eval_with_trace(&self, t: &[f64], x: &Mat) -> Result<(Mat, Vec<f64>)> {
        self.forward_with_trace(t, x)
    }
}

/// `v(t, x) = A x + c`; time-independent, with constant trace `tr A`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineField {
    pub a: Mat,
    pub c: Vec<f64>,
}

impl AffineField {
    pub fn linear(a: Mat) -> Self {
        let c = vec![0.0; a.rows()];
        AffineField { a, c }
    }
}

impl VectorField for AffineField {
    fn dim(&self) -> usize {
        self.c.len()
    }

    fn eval_batch(&self, _t: &[f64], x: &Mat) -> Result<Mat> {
        let mut out = x.matmul(&self.a.transpose())?;
        for i in 0..out.rows() {
            for (o, c) in out.row_mut(i).iter_mut().zip(&self.c) {
                *o += c;
            }
        }
        Ok(out)
    }
}

impl TraceField for AffineField {
    fn eval_with_trace(&self, t: &[f64], x: &Mat) -> Result<(Mat, Vec<f64>)> {
        let tr: f64 = (0..self.a.rows()).map(|i| self.a[(i, i)]).sum();
        Ok((self.eval_batch(t, x)?, vec![tr; x.rows()]))
    }
}

/// State `(x, ℓ)` with `dℓ/dt = tr(∂v/∂x)`.
struct Augmented<'a, F: TraceField + ?Sized>(&'a F);

impl<F: TraceField + ?Sized> VectorField for Augmented<'_, F> {
    fn dim(&self) -> usize {
        self.0.dim() + 1
    }

    fn eval_batch(&self, t: &[f64], x: &Mat) -> Result<Mat> {
        let d = self.0.dim();
        let mut inner = Mat::zeros(x.rows(), d);
        for i in 0..x.rows() {
            inner.row_mut(i).copy_from_slice(&x.row(i)[..d]);
        }
        let (v, tr) = self.0.eval_with_trace(t, &inner)?;
        let mut out = Mat::zeros(x.rows(), d + 1);
        for i in 0..x.rows() {
            out.row_mut(i)[..d].copy_from_slice(v.row(i));
            out[(i, d)] = tr[i];
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Euler,
    Rk4,
    AdaptiveRk45,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub method: Method,
    /// Steps for the fixed-step methods.
    pub n_steps: usize,
    pub atol: f64,
    pub rtol: f64,
    /// Attempted-step budget per trajectory for the adaptive method.
    pub max_steps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self::sampling()
    }
}

impl SolverConfig {
    /// Adaptive, `atol = rtol = 1e-6`.
    pub fn sampling() -> Self {
        SolverConfig {
            method: Method::AdaptiveRk45,
            n_steps: 100,
            atol: 1e-6,
            rtol: 1e-6,
            max_steps: 100_000,
        }
    }

    /// Adaptive, `atol = rtol = 1e-8`.
    pub fn likelihood() -> Self {
        SolverConfig {
            atol: 1e-8,
            rtol: 1e-8,
            ..Self::sampling()
        }
    }

    pub fn fixed(method: Method, n_steps: usize) -> Self {
        SolverConfig {
            method,
            n_steps,
            ..Self::sampling()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_steps == 0 {
            return Err(Error::Config("n_steps must be >= 1".into()));
        }
        if !(self.atol > 0.0 && self.rtol > 0.0) {
            return Err(Error::Config("atol and rtol must be > 0".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::Config("max_steps must be >= 1".into()));
        }
        Ok(())
    }
}

/// Result of a batched solve.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub x: Mat,
    /// Accepted steps per row.
    pub steps: Vec<usize>,
}

/// Integrate one point from `t0` to `t1` (either direction).
pub fn integrate<F: VectorField + ?Sized>(
    field: &F,
    x_start: &[f64],
    t0: f64,
    t1: f64,
    cfg: &SolverConfig,
) -> Result<Vec<f64>> {
    let x = Mat::from_vec(1, x_start.len(), x_start.to_vec())?;
    Ok(integrate_batch(field, &x, t0, t1, cfg)?.x.into_vec())
}

/// Integrate every row of `x` from `t0` to `t1`.
pub fn integrate_batch<F: VectorField + ?Sized>(
    field: &F,
    x: &Mat,
    t0: f64,
    t1: f64,
    cfg: &SolverConfig,
) -> Result<Solution> {
    cfg.validate()?;
    if x.cols() != field.dim() {
        return Err(Error::Dimension(format!(
            "state dim {} vs field dim {}",
            x.cols(),
            field.dim()
        )));
    }
    if !(t0.is_finite() && t1.is_finite()) {
        return Err(Error::InvalidArgument("integration limits must be finite".into()));
    }
    if x.rows() == 0 || t0 == t1 {
        return Ok(Solution {
            x: x.clone(),
            steps: vec![0; x.rows()],
        });
    }
    let sol = match cfg.method {
        Method::Euler | Method::Rk4 => fixed_step(field, x, t0, t1, cfg)?,
        Method::AdaptiveRk45 => dopri5(field, x, t0, t1, cfg)?,
    };
    if !sol.x.all_finite() {
        return Err(Error::NonFinite("ODE state".into()));
    }
    Ok(sol)
}

/// `x + h · Σ_s w_s k_s`, row-wise with per-row step sizes.
fn combine(x: &Mat, h: &[f64], terms: &[(f64, &Mat)]) -> Mat {
    let mut out = x.clone();
    for i in 0..x.rows() {
        let row = out.row_mut(i);
        for (k, v) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for &(w, m) in terms {
                if w != 0.0 {
                    acc += w * m[(i, k)];
                }
            }
            *v += h[i] * acc;
        }
    }
    out
}

fn fixed_step<F: VectorField + ?Sized>(field: &F, x: &Mat, t0: f64, t1: f64, cfg: &SolverConfig) -> Result<Solution> {
    let n = cfg.n_steps;
    let dt = (t1 - t0) / n as f64;
    let rows = x.rows();
    let h = vec![dt; rows];
    let mut state = x.clone();
    for s in 0..n {
        let t = t0 + s as f64 * dt;
        let at = |tt: f64| vec![tt; rows];
        state = match cfg.method {
            Method::Euler => {
                let k1 = field.eval_batch(&at(t), &state)?;
                combine(&state, &h, &[(1.0, &k1)])
            }
            _ => {
                let k1 = field.eval_batch(&at(t), &state)?;
                let k2 = field.eval_batch(&at(t + 0.5 * dt), &combine(&state, &h, &[(0.5, &k1)]))?;
                let k3 = field.eval_batch(&at(t + 0.5 * dt), &combine(&state, &h, &[(0.5, &k2)]))?;
                let k4 = field.eval_batch(&at(t + dt), &combine(&state, &h, &[(1.0, &k3)]))?;
                combine(
                    &state,
                    &h,
                    &[(1.0 / 6.0, &k1), (1.0 / 3.0, &k2), (1.0 / 3.0, &k3), (1.0 / 6.0, &k4)],
                )
            }
        };
    }
    Ok(Solution {
        x: state,
        steps: vec![n; rows],
    })
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
/// Fifth-order weights minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

fn dopri5<F: VectorField + ?Sized>(field: &F, x: &Mat, t0: f64, t1: f64, cfg: &SolverConfig) -> Result<Solution> {
    let (rows, d) = x.shape();
    let dir = (t1 - t0).signum();
    let span = (t1 - t0).abs();
    let mut state = x.clone();
    let mut t = vec![t0; rows];
    let mut steps = vec![0usize; rows];
    let mut attempts = vec![0usize; rows];
    let mut k1 = field.eval_batch(&t, &state)?;

    // initial step from the scale of the state and the slope (Hairer's d0/d1 rule)
    let mut h = vec![0.0; rows];
    for i in 0..rows {
        let (mut d0, mut d1) = (0.0, 0.0);
        for k in 0..d {
            let sc = cfg.atol + cfg.rtol * state[(i, k)].abs();
            d0 += (state[(i, k)] / sc).powi(2);
            d1 += (k1[(i, k)] / sc).powi(2);
        }
        let (d0, d1) = ((d0 / d as f64).sqrt(), (d1 / d as f64).sqrt());
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h[i] = dir * h0.min(span);
    }

    let mut active: Vec<usize> = (0..rows).collect();
    while !active.is_empty() {
        for &i in &active {
            attempts[i] += 1;
            if attempts[i] > cfg.max_steps {
                return Err(Error::MaxStepsExceeded(cfg.max_steps));
            }
            // land exactly on t1
            let remaining = t1 - t[i];
            if (h[i] - remaining) * dir > 0.0 {
                h[i] = remaining;
            }
        }
        let xa = state.select_rows(&active);
        let ha: Vec<f64> = active.iter().map(|&i| h[i]).collect();
        let ta: Vec<f64> = active.iter().map(|&i| t[i]).collect();
        let mut ks: Vec<Mat> = Vec::with_capacity(7);
        ks.push(k1.select_rows(&active));
        for s in 1..7 {
            let terms: Vec<(f64, &Mat)> = (0..s).map(|j| (A[s][j], &ks[j])).collect();
            let xs = combine(&xa, &ha, &terms);
            let ts: Vec<f64> = ta.iter().zip(&ha).map(|(t, h)| t + C[s] * h).collect();
            ks.push(field.eval_batch(&ts, &xs)?);
        }
        // the last stage is evaluated at the fifth-order solution (FSAL)
        let terms: Vec<(f64, &Mat)> = (0..6).map(|j| (A[6][j], &ks[j])).collect();
        let x_new = combine(&xa, &ha, &terms);

        let mut still = Vec::with_capacity(active.len());
        for (r, &i) in active.iter().enumerate() {
            let mut err = 0.0;
            for k in 0..d {
                let e: f64 = ha[r] * (0..7).map(|s| E[s] * ks[s][(r, k)]).sum::<f64>();
                let sc = cfg.atol.max(cfg.rtol * xa[(r, k)].abs().max(x_new[(r, k)].abs()));
                err += (e / sc).powi(2);
            }
            let err = (err / d as f64).sqrt();
            if !err.is_finite() {
                return Err(Error::NonFinite("ODE error estimate".into()));
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            if err <= 1.0 {
                t[i] = if (t1 - (t[i] + ha[r])) * dir <= 0.0 {
                    t1
                } else {
                    t[i] + ha[r]
                };
                state.row_mut(i).copy_from_slice(x_new.row(r));
                k1.row_mut(i).copy_from_slice(ks[6].row(r));
                steps[i] += 1;
                if t[i] == t1 {
                    continue;
                }
            }
            h[i] = ha[r] * factor;
            still.push(i);
        }
        active = still;
    }
    Ok(Solution { x: state, steps })
}

/// Push `n` standard-normal draws through the flow from `t = 0` to `t = 1`.
pub fn sample_model<F: VectorField + ?Sized>(
    field: &F,
    n: usize,
    cfg: &SolverConfig,
    rng: &mut RngState,
) -> Result<Mat> {
    let x0 = gaussian_sample(rng, n, field.dim());
    Ok(integrate_chunked(field, &x0, 0.0, 1.0, cfg)?.x)
}

/// Rows are solved in fixed-size chunks to bound the working set.
const CHUNK: usize = 256;

fn integrate_chunked<F: VectorField + ?Sized>(
    field: &F,
    x: &Mat,
    t0: f64,
    t1: f64,
    cfg: &SolverConfig,
) -> Result<Solution> {
    let (n, d) = x.shape();
    let mut out = Mat::zeros(n, d);
    let mut steps = Vec::with_capacity(n);
    for start in (0..n).step_by(CHUNK) {
        let idx: Vec<usize> = (start..(start + CHUNK).min(n)).collect();
        let sol = integrate_batch(field, &x.select_rows(&idx), t0, t1, cfg)?;
        for (r, &i) in idx.iter().enumerate() {
            out.row_mut(i).copy_from_slice(sol.x.row(r));
        }
        steps.extend(sol.steps);
    }
    Ok(Solution { x: out, steps })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NllReport {
    /// `log p₁(x₁)` in nats.
    pub logp1: f64,
    /// `−logp1 / (ln 2 · d)`.
    pub bpd: f64,
    /// `∫₀¹ tr(∂v/∂x)(t, x_t) dt` along the trajectory through `x₁`.
    pub divergence_integral: f64,
    pub steps_used: usize,
}

pub fn standard_normal_logpdf(x: &[f64]) -> f64 {
    -0.5 * x.iter().map(|v| v * v).sum::<f64>() - 0.5 * x.len() as f64 * (2.0 * PI).ln()
}

/// Exact log-likelihood of `x1` under the flow with a standard-normal source:
/// `log p₁(x₁) = log p₀(x₀) − ∫₀¹ tr(∂v/∂x) dt`, with `x₀` obtained by
/// integrating backwards from `t = 1`.
pub fn nll<F: TraceField + ?Sized>(field: &F, x1: &[f64], cfg: &SolverConfig) -> Result<NllReport> {
    let x = Mat::from_vec(1, x1.len(), x1.to_vec())?;
    Ok(nll_batch(field, &x, cfg)?[0])
}

pub fn nll_batch<F: TraceField + ?Sized>(field: &F, x1: &Mat, cfg: &SolverConfig) -> Result<Vec<NllReport>> {
    let (n, d) = x1.shape();
    if d != field.dim() {
        return Err(Error::Dimension(format!("points have dim {d}, field {}", field.dim())));
    }
    let mut aug = Mat::zeros(n, d + 1);
    for i in 0..n {
        aug.row_mut(i)[..d].copy_from_slice(x1.row(i));
    }
    // ℓ(0) = ∫₁⁰ tr dt = −∫₀¹ tr dt
    let sol = integrate_chunked(&Augmented(field), &aug, 1.0, 0.0, cfg)?;
    (0..n)
        .map(|i| {
            let row = sol.x.row(i);
            let div = -row[d];
            if !div.is_finite() {
                return Err(Error::NonFinite("divergence integral".into()));
            }
            let logp1 = standard_normal_logpdf(&row[..d]) - div;
            Ok(NllReport {
                logp1,
                bpd: -logp1 / (LN_2 * d as f64),
                divergence_integral: div,
                steps_used: sol.steps[i],
            })
        })
        .collect()
}

/// CSV rows `x1..xd[,proxy_label][,bpd]`.
pub fn write_samples_csv(path: &std::path::Path, x: &Mat, labels: Option<&[usize]>, bpd: Option<&[f64]>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (1..=x.cols()).map(|k| format!("x{k}")).collect();
    if labels.is_some() {
        header.push("proxy_label".into());
    }
    if bpd.is_some() {
        header.push("bpd".into());
    }
    w.write_record(&header)?;
    for i in 0..x.rows() {
        let mut rec: Vec<String> = x.row(i).iter().map(|v| v.to_string()).collect();
        if let Some(l) = labels {
            rec.push(l[i].to_string());
        }
        if let Some(b) = bpd {
            rec.push(b[i].to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
