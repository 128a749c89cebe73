use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{gemm_slices, Mat, RngState};

/// Smooth elementwise nonlinearity for the hidden layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Silu,
}

/// `tanh` to within a few ulp in absolute terms, at about a third of the
/// cost of libm's.
fn fast_tanh(z: f64) -> f64 {
    let r = 1.0 - 2.0 / ((2.0 * z.abs()).exp() + 1.0);
    r.copysign(z)
}

impl Activation {
    /// `(σ(z), σ'(z))`.
    fn value_and_slope(self, z: f64) -> (f64, f64) {
        match self {
            Activation::Tanh => {
                let h = fast_tanh(z);
                (h, 1.0 - h * h)
            }
            Activation::Silu => {
                let s = 1.0 / (1.0 + (-z).exp());
                (z * s, s * (1.0 + z * (1.0 - s)))
            }
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Activation::Tanh => 0,
            Activation::Silu => 1,
        }
    }

    pub(crate) fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(Activation::Tanh),
            1 => Some(Activation::Silu),
            _ => None,
        }
    }
}

/// Sinusoidal features `[sin(ω_k t)…, cos(ω_k t)…]` with `ω` geometric from 1 to 1000.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeEmbedding {
    frequencies: Vec<f64>,
}

impl TimeEmbedding {
    pub const MAX_FREQUENCY: f64 = 1000.0;

    pub fn new(n_freq: usize) -> Self {
        let frequencies = match n_freq {
            0 => Vec::new(),
            1 => vec![1.0],
            n => (0..n)
                .map(|k| Self::MAX_FREQUENCY.powf(k as f64 / (n - 1) as f64))
                .collect(),
        };
        TimeEmbedding { frequencies }
    }

    pub fn n_freq(&self) -> usize {
        self.frequencies.len()
    }

    pub fn dim(&self) -> usize {
        2 * self.frequencies.len()
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn embed_into(&self, t: f64, out: &mut [f64]) {
        let n = self.frequencies.len();
        for (k, &w) in self.frequencies.iter().enumerate() {
            let (s, c) = (w * t).sin_cos();
            out[k] = s;
            out[n + k] = c;
        }
    }

    pub fn embed(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.embed_into(t, &mut out);
        out
    }
}

/// Architecture of the vector field network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MlpConfig {
    pub hidden: Vec<usize>,
    pub n_freq: usize,
    pub activation: Activation,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden: vec![128, 128, 128],
            n_freq: 8,
            activation: Activation::Tanh,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Layer {
    fan_in: usize,
    fan_out: usize,
    /// Offset of the `fan_in × fan_out` row-major weight block.
    w: usize,
    /// Offset of the bias vector.
    b: usize,
}

/// Fully connected `v_θ(t, x)`: input `[x, embed(t)]`, hidden layers with a
/// smooth activation, linear output of dimension `d`.
///
/// Parameters live in one flat vector (weights then bias, layer by layer).
#[derive(Debug, Clone, PartialEq)]
pub struct MlpVectorField {
    d: usize,
    config: MlpConfig,
    embedding: TimeEmbedding,
    layers: Vec<Layer>,
    params: Vec<f64>,
}

/// Activations saved by a batched forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    batch: usize,
    /// Input to each layer, `batch × fan_in`.
    inputs: Vec<Vec<f64>>,
    /// Activation derivative at each hidden pre-activation.
    slopes: Vec<Vec<f64>>,
}

impl MlpVectorField {
    /// Network with every parameter zero.
    pub fn zeros(d: usize, config: MlpConfig) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument("data dimension must be >= 1".into()));
        }
        if config.hidden.contains(&0) {
            return Err(Error::InvalidArgument("hidden widths must be >= 1".into()));
        }
        let embedding = TimeEmbedding::new(config.n_freq);
        let mut widths = vec![d + embedding.dim()];
        widths.extend(&config.hidden);
        widths.push(d);
        let mut layers = Vec::with_capacity(widths.len() - 1);
        let mut off = 0;
        for pair in widths.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            layers.push(Layer {
                fan_in,
                fan_out,
                w: off,
                b: off + fan_in * fan_out,
            });
            off += fan_in * fan_out + fan_out;
        }
        Ok(MlpVectorField {
            d,
            config,
            embedding,
            layers,
            params: vec![0.0; off],
        })
    }

    /// Uniform `±1/√fan_in` initialization for weights and biases.
    pub fn new(d: usize, config: MlpConfig, rng: &mut RngState) -> Result<Self> {
        let mut net = Self::zeros(d, config)?;
        for layer in net.layers.clone() {
            let bound = 1.0 / (layer.fan_in as f64).sqrt();
            let end = layer.b + layer.fan_out;
            for p in &mut net.params[layer.w..end] {
                *p = bound * (2.0 * rng.uniform() - 1.0);
            }
        }
        Ok(net)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn config(&self) -> &MlpConfig {
        &self.config
    }

    pub fn embedding(&self) -> &TimeEmbedding {
        &self.embedding
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: Vec<f64>) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::Dimension(format!(
                "expected {} parameters, got {}",
                self.params.len(),
                params.len()
            )));
        }
        self.params = params;
        Ok(())
    }

    fn check_batch(&self, t: &[f64], x: &Mat) -> Result<()> {
        if x.cols() != self.d {
            return Err(Error::Dimension(format!(
                "input has dim {}, net expects {}",
                x.cols(),
                self.d
            )));
        }
        if t.len() != x.rows() {
            return Err(Error::Dimension(format!("{} times for {} points", t.len(), x.rows())));
        }
        Ok(())
    }

    /// `v_θ(t_i, x_i)` for every row, keeping what the backward pass needs.
    pub fn forward_cached(&self, t: &[f64], x: &Mat) -> Result<(Mat, ForwardCache)> {
        self.check_batch(t, x)?;
        let n = x.rows();
        let in0 = self.layers[0].fan_in;
        let mut h = vec![0.0; n * in0];
        for i in 0..n {
            let row = &mut h[i * in0..(i + 1) * in0];
            row[..self.d].copy_from_slice(x.row(i));
            self.embedding.embed_into(t[i], &mut row[self.d..]);
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut slopes = Vec::with_capacity(self.layers.len() - 1);
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let z = self.affine(layer, &h, n);
            inputs.push(h);
            if l == last {
                let out = Mat::from_vec(n, self.d, z)?;
                return Ok((
                    out,
                    ForwardCache {
                        batch: n,
                        inputs,
                        slopes,
                    },
                ));
            }
            let act = self.config.activation;
            let mut slope = z;
            h = vec![0.0; slope.len()];
            for (hv, zv) in h.iter_mut().zip(slope.iter_mut()) {
                let (a, da) = act.value_and_slope(*zv);
                *hv = a;
                *zv = da;
            }
            slopes.push(slope);
        }
        unreachable!("network has at least one layer")
    }

    fn affine(&self, layer: &Layer, h: &[f64], n: usize) -> Vec<f64> {
        let bias = &self.params[layer.b..layer.b + layer.fan_out];
        let mut z: Vec<f64> = Vec::with_capacity(n * layer.fan_out);
        for _ in 0..n {
            z.extend_from_slice(bias);
        }
        let w = &self.params[layer.w..layer.b];
        gemm_slices(n, layer.fan_in, layer.fan_out, 1.0, h, false, w, false, 1.0, &mut z);
        z
    }

    pub fn forward_batch(&self, t: &[f64], x: &Mat) -> Result<Mat> {
        Ok(self.forward_cached(t, x)?.0)
    }

    /// Single-point evaluation.
    pub fn forward(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let xm = Mat::from_vec(1, x.len(), x.to_vec()).expect("row vector");
        self.forward_batch(&[t], &xm)
            .expect("dimension checked by caller")
            .into_vec()
    }

    /// Reverse pass for `Σ_i <upstream_i, v_θ(t_i, x_i)>`.
    ///
    /// Parameter gradients are added into `param_grad` when given; the return
    /// value holds the gradient with respect to each input row `x_i`.
    pub fn backward_batch(
        &self,
        cache: &ForwardCache,
        upstream: &Mat,
        mut param_grad: Option<&mut [f64]>,
    ) -> Result<Mat> {
        let n = cache.batch;
        if upstream.shape() != (n, self.d) {
            return Err(Error::Dimension(format!(
                "upstream {:?} for batch {n}x{}",
                upstream.shape(),
                self.d
            )));
        }
        if let Some(g) = param_grad.as_deref() {
            if g.len() != self.params.len() {
                return Err(Error::Dimension("parameter gradient buffer has wrong length".into()));
            }
        }
        let mut dz = upstream.as_slice().to_vec();
        for l in (0..self.layers.len()).rev() {
            let layer = self.layers[l];
            let h = &cache.inputs[l];
            if let Some(g) = param_grad.as_deref_mut() {
                let (gw, gb) = g[layer.w..layer.b + layer.fan_out].split_at_mut(layer.fan_in * layer.fan_out);
                gemm_slices(layer.fan_in, n, layer.fan_out, 1.0, h, true, &dz, false, 1.0, gw);
                for row in dz.chunks_exact(layer.fan_out) {
                    for (b, v) in gb.iter_mut().zip(row) {
                        *b += v;
                    }
                }
            }
            let w = &self.params[layer.w..layer.b];
            let mut dh = vec![0.0; n * layer.fan_in];
            gemm_slices(n, layer.fan_out, layer.fan_in, 1.0, &dz, false, w, true, 0.0, &mut dh);
            if l == 0 {
                let mut gx = Mat::zeros(n, self.d);
                for i in 0..n {
                    gx.row_mut(i)
                        .copy_from_slice(&dh[i * layer.fan_in..i * layer.fan_in + self.d]);
                }
                return Ok(gx);
            }
            for (v, s) in dh.iter_mut().zip(&cache.slopes[l - 1]) {
                *v *= s;
            }
            dz = dh;
        }
        unreachable!("network has at least one layer")
    }

    /// Gradients of `<upstream, v_θ(t, x)>`: `(parameter gradient, input gradient)`.
    pub fn backward(&self, t: f64, x: &[f64], upstream: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let xm = Mat::from_vec(1, x.len(), x.to_vec())?;
        let (_, cache) = self.forward_cached(&[t], &xm)?;
        let up = Mat::from_vec(1, upstream.len(), upstream.to_vec())?;
        let mut g = vec![0.0; self.params.len()];
        let gx = self.backward_batch(&cache, &up, Some(&mut g))?;
        Ok((g, gx.into_vec()))
    }

    /// `∂v/∂x` at one point, row `i` being the input gradient of output `i`.
    pub fn jacobian_x(&self, t: f64, x: &[f64]) -> Result<Mat> {
        let d = self.d;
        // d copies of the point, one unit upstream per copy
        let xm = Mat::from_vec(d, x.len(), x.repeat(d))?;
        let (_, cache) = self.forward_cached(&vec![t; d], &xm)?;
        self.backward_batch(&cache, &Mat::identity(d), None)
    }

    /// Values and Jacobian traces for a batch; used by likelihood evaluation.
    pub fn forward_with_trace(&self, t: &[f64], x: &Mat) -> Result<(Mat, Vec<f64>)> {
        self.check_batch(t, x)?;
        let (n, d) = x.shape();
        let mut rep = Mat::zeros(n * d, d);
        let mut tr = Vec::with_capacity(n * d);
        for i in 0..n {
            for k in 0..d {
                rep.row_mut(i * d + k).copy_from_slice(x.row(i));
                tr.push(t[i]);
            }
        }
        let (out, cache) = self.forward_cached(&tr, &rep)?;
        let mut up = Mat::zeros(n * d, d);
        for i in 0..n {
            for k in 0..d {
                up[(i * d + k, k)] = 1.0;
            }
        }
        let gx = self.backward_batch(&cache, &up, None)?;
        let mut values = Mat::zeros(n, d);
        let mut traces = vec![0.0; n];
        for i in 0..n {
            values.row_mut(i).copy_from_slice(out.row(i * d));
            traces[i] = (0..d).map(|k| gx[(i * d + k, k)]).sum();
        }
        Ok((values, traces))
    }
}
