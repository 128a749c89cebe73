//! Long-tailed Gaussian-mixture benchmarks.
//!
//! Class sizes decay exponentially, `w_i ∝ I^{i/(M−1)}`, with the head class
//! first. Labels are only used for evaluation; training sees raw points.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{gaussian_sample, Mat, RngState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mode {
    pub mean: Vec<f64>,
    pub sigma: f64,
}

/// Isotropic Gaussian mixture with non-increasing class weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GmmSpec {
    pub d: usize,
    pub modes: Vec<Mode>,
    pub weights: Vec<f64>,
}

impl GmmSpec {
    pub fn new(modes: Vec<Mode>, weights: Vec<f64>) -> Result<Self> {
        let d = modes.first().map(|m| m.mean.len()).unwrap_or(0);
        let spec = GmmSpec { d, modes, weights };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.modes.is_empty() {
            return Err(Error::Config("mixture needs at least one mode".into()));
        }
        if self.d == 0 {
            return Err(Error::Config("mixture dimension must be >= 1".into()));
        }
        if self.weights.len() != self.modes.len() {
            return Err(Error::Config(format!(
                "{} weights for {} modes",
                self.weights.len(),
                self.modes.len()
            )));
        }
        for (k, m) in self.modes.iter().enumerate() {
            if m.mean.len() != self.d {
                return Err(Error::Config(format!("mode {k} mean has dim {}", m.mean.len())));
            }
            if !(m.sigma > 0.0 && m.sigma.is_finite()) {
                return Err(Error::Config(format!("mode {k} sigma must be > 0")));
            }
        }
        if self.weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::Config("mixture weights must be > 0".into()));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("mixture weights sum to {total}")));
        }
        if self.weights.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::Config(
                "mixture weights must be non-increasing (head class first)".into(),
            ));
        }
        Ok(())
    }

    pub fn num_classes(&self) -> usize {
        self.modes.len()
    }

    /// Index of the smallest-weight (tail) class; the last one on ties.
    pub fn tail_class(&self) -> usize {
        self.modes.len() - 1
    }

    /// Log of the unnormalized posterior `w_k N(x; µ_k, σ_k² I)`.
    fn log_joint(&self, k: usize, x: &[f64]) -> f64 {
        let m = &self.modes[k];
        let sq: f64 = x.iter().zip(&m.mean).map(|(a, b)| (a - b) * (a - b)).sum();
        self.weights[k].ln() - self.d as f64 * m.sigma.ln() - sq / (2.0 * m.sigma * m.sigma)
    }

    /// Mixture log-density at `x`.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        let terms: Vec<f64> = (0..self.modes.len()).map(|k| self.log_joint(k, x)).collect();
        crate::numkit::logsumexp(&terms) - 0.5 * self.d as f64 * (2.0 * PI).ln()
    }
}

/// Exponentially decaying class weights with `w_last / w_first = imbalance`.
pub fn longtailed_weights(m: usize, imbalance: f64) -> Result<Vec<f64>> {
    if m == 0 {
        return Err(Error::Config("need at least one class".into()));
    }
    if !(imbalance > 0.0 && imbalance <= 1.0) {
        return Err(Error::Config(format!("imbalance must lie in (0, 1], got {imbalance}")));
    }
    if m == 1 {
        return Ok(vec![1.0]);
    }
    let raw: Vec<f64> = (0..m).map(|i| imbalance.powf(i as f64 / (m - 1) as f64)).collect();
    let z: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|w| w / z).collect())
}

/// Two modes at `(±4, 0)`, σ = 0.7, head on the left.
pub fn two_mode(minority_weight: f64) -> Result<GmmSpec> {
    if !(minority_weight > 0.0 && minority_weight <= 0.5) {
        return Err(Error::Config(format!(
            "two-mode minority weight must lie in (0, 0.5], got {minority_weight}"
        )));
    }
    GmmSpec::new(
        vec![
            Mode {
                mean: vec![-4.0, 0.0],
                sigma: 0.7,
            },
            Mode {
                mean: vec![4.0, 0.0],
                sigma: 0.7,
            },
        ],
        vec![1.0 - minority_weight, minority_weight],
    )
}

/// `m` modes evenly spaced on a circle, head class at angle 0.
pub fn ring(m: usize, radius: f64, sigma: f64, imbalance: f64) -> Result<GmmSpec> {
    let weights = longtailed_weights(m, imbalance)?;
    let modes = (0..m)
        .map(|k| {
            let ang = 2.0 * PI * k as f64 / m as f64;
            Mode {
                mean: vec![radius * ang.cos(), radius * ang.sin()],
                sigma,
            }
        })
        .collect();
    GmmSpec::new(modes, weights)
}

/// Resolve a named benchmark: `two_mode_<minority>`, `ring5_<imbalance>`,
/// `ring8_<imbalance>`, or the bare names for their defaults.
pub fn preset(name: &str) -> Result<GmmSpec> {
    let parse = |s: &str| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|_| Error::Config(format!("bad numeric suffix in preset `{name}`")))
    };
    if let Some(rest) = name.strip_prefix("two_mode") {
        let w = match rest.strip_prefix('_') {
            Some(s) => parse(s)?,
            None if rest.is_empty() => 0.1,
            None => return Err(Error::Config(format!("unknown preset `{name}`"))),
        };
        return two_mode(w);
    }
    for (prefix, m, sigma, default) in [("ring5", 5, 0.5, 0.1), ("ring8", 8, 0.5, 0.01)] {
        if let Some(rest) = name.strip_prefix(prefix) {
            let imb = match rest.strip_prefix('_') {
                Some(s) => parse(s)?,
                None if rest.is_empty() => default,
                None => return Err(Error::Config(format!("unknown preset `{name}`"))),
            };
            return ring(m, 5.0, sigma, imb);
        }
    }
    Err(Error::Config(format!("unknown preset `{name}`")))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample<'a> {
    pub x: &'a [f64],
    pub label: usize,
}

/// Points with their generating class.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    pub x: Mat,
    pub labels: Vec<usize>,
}

impl LabeledSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    pub fn iter(&self) -> impl Iterator<Item = LabeledSample<'_>> {
        self.x
            .iter_rows()
            .zip(&self.labels)
            .map(|(x, &label)| LabeledSample { x, label })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<String> = (1..=self.dim()).map(|k| format!("x{k}")).collect();
        header.push("label".into());
        w.write_record(&header)?;
        for s in self.iter() {
            let mut rec: Vec<String> = s.x.iter().map(|v| v.to_string()).collect();
            rec.push(s.label.to_string());
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let headers = r.headers()?.clone();
        let label_col = headers
            .iter()
            .position(|h| h == "label")
            .ok_or_else(|| Error::MissingColumn {
                column: "label".into(),
                path: path.into(),
            })?;
        let coord_cols: Vec<usize> = headers
            .iter()
            .enumerate()
            .filter(|(_, h)| h.starts_with('x'))
            .map(|(i, _)| i)
            .collect();
        if coord_cols.is_empty() {
            return Err(Error::MissingColumn {
                column: "x1".into(),
                path: path.into(),
            });
        }
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            for &c in &coord_cols {
                data.push(parse_field(&rec, c, path)?);
            }
            let l: usize = rec
                .get(label_col)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Config(format!("bad label in {}", path.display())))?;
            labels.push(l);
        }
        Ok(LabeledSet {
            x: Mat::from_vec(labels.len(), coord_cols.len(), data)?,
            labels,
        })
    }
}

pub(crate) fn parse_field(rec: &csv::StringRecord, col: usize, path: &Path) -> Result<f64> {
    rec.get(col)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Config(format!("bad numeric field in {}", path.display())))
}

/// `n` i.i.d. draws: class from the weights, point from that class's Gaussian.
pub fn sample_gmm(spec: &GmmSpec, n: usize, rng: &mut RngState) -> LabeledSet {
    let mut x = Mat::zeros(n, spec.d);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let k = rng.categorical(&spec.weights).expect("validated weights");
        let mode = &spec.modes[k];
        for (xi, mu) in x.row_mut(i).iter_mut().zip(&mode.mean) {
            *xi = mu + mode.sigma * rng.normal();
        }
        labels.push(k);
    }
    LabeledSet { x, labels }
}

/// Class maximizing the mixture posterior; ties go to the lowest index.
pub fn proxy_label(x: &[f64], spec: &GmmSpec) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for k in 0..spec.modes.len() {
        let v = spec.log_joint(k, x);
        if v > best_val {
            best_val = v;
            best = k;
        }
    }
    best
}

/// Standard normal source batch.
pub fn source_sample(n: usize, d: usize, rng: &mut RngState) -> Mat {
    gaussian_sample(rng, n, d)
}
