//! Dense row-major matrices and seeded random streams.
//!
//! Everything downstream works in `f64`. Matrix products go through
//! `matrixmultiply` (single-threaded, so results are reproducible for a given
//! build and machine).

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Mat {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Mat { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::Dimension(format!(
                    "row {i} has {} columns, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Mat {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact(0) panics, and a 0-column matrix has no meaningful rows
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.iter_rows().map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for r in self.iter_rows() {
            for (o, v) in out.iter_mut().zip(r) {
                *o += v;
            }
        }
        out
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Rows selected by index, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Mat {
        let mut out = Mat::zeros(idx.len(), self.cols);
        for (k, &i) in idx.iter().enumerate() {
            out.row_mut(k).copy_from_slice(self.row(i));
        }
        out
    }

    /// `self · other`.
    pub fn matmul(&self, other: &Mat) -> Result<Mat> {
        let mut out = Mat::zeros(self.rows, other.cols);
        gemm(1.0, self, false, other, false, 0.0, &mut out)?;
        Ok(out)
    }
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// `out ← alpha · op(a) · op(b) + beta · out`, where `op` optionally transposes.
pub fn gemm(alpha: f64, a: &Mat, trans_a: bool, b: &Mat, trans_b: bool, beta: f64, out: &mut Mat) -> Result<()> {
    let (m, k) = if trans_a { (a.cols, a.rows) } else { (a.rows, a.cols) };
    let (kb, n) = if trans_b { (b.cols, b.rows) } else { (b.rows, b.cols) };
    if k != kb || out.rows != m || out.cols != n {
        return Err(Error::Dimension(format!(
            "gemm {m}x{k} · {kb}x{n} into {}x{}",
            out.rows, out.cols
        )));
    }
    gemm_slices(m, k, n, alpha, &a.data, trans_a, &b.data, trans_b, beta, &mut out.data);
    Ok(())
}

/// Slice form of [`gemm`] on contiguous row-major buffers: `op(a)` is `m×k`,
/// `op(b)` is `k×n`, `out` is `m×n`. Panics if a buffer is too short.
#[allow(clippy::too_many_arguments)]
pub fn gemm_slices(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    trans_a: bool,
    b: &[f64],
    trans_b: bool,
    beta: f64,
    out: &mut [f64],
) {
    assert!(
        a.len() >= m * k && b.len() >= k * n && out.len() >= m * n,
        "gemm buffer too short"
    );
    if m == 0 || n == 0 {
        return;
    }
    // stored shapes: a is m×k (or k×m), b is k×n (or n×k)
    let (rsa, csa) = if trans_a { (1, m) } else { (k, 1) };
    let (rsb, csb) = if trans_b { (1, k) } else { (n, 1) };
    // SAFETY: the assertion above bounds every index the kernel touches.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            out.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Stable `ln Σ exp(v_i)`. Returns `-inf` for an empty slice or all `-inf` input.
pub fn logsumexp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let s: f64 = v.iter().map(|&x| (x - max).exp()).sum();
    max + s.ln()
}

/// Per-row log-sum-exp with max subtraction.
pub fn logsumexp_rows(m: &Mat) -> Vec<f64> {
    m.iter_rows().map(logsumexp).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

/// Seeded, forkable random stream (ChaCha8).
///
/// Two states built from the same seed produce identical draws. `fork` derives
/// a child stream from `(seed, label)` only, so forks do not depend on how many
/// values the parent has consumed.
#[derive(Debug, Clone)]
pub struct RngState {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        RngState {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn fork(&self, label: &str) -> RngState {
        RngState::new(derive_seed(self.seed, label.as_bytes()))
    }

    /// Fork keyed by a label and an integer, e.g. one stream per training step.
    pub fn fork_indexed(&self, label: &str, index: u64) -> RngState {
        let mut key = label.as_bytes().to_vec();
        key.push(0);
        key.extend_from_slice(&index.to_le_bytes());
        RngState::new(derive_seed(self.seed, &key))
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.gen_range(0..n)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Draw from unnormalized nonnegative weights by inverse CDF.
    /// Returns `None` when the total weight is not positive.
    pub fn categorical(&mut self, weights: &[f64]) -> Option<usize> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return None;
        }
        let u = self.uniform() * total;
        let mut acc = 0.0;
        let mut last_positive = None;
        for (i, &w) in weights.iter().enumerate() {
            if w > 0.0 {
                last_positive = Some(i);
                acc += w;
                if u < acc {
                    return Some(i);
                }
            }
        }
        // rounding can leave u == total
        last_positive
    }
}

fn derive_seed(seed: u64, key: &[u8]) -> u64 {
    // FNV-1a over the key, mixed with the parent seed through splitmix64.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in key {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(seed ^ splitmix64(h))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `n × d` matrix of i.i.d. standard normal draws.
pub fn gaussian_sample(rng: &mut RngState, n: usize, d: usize) -> Mat {
    let data = (0..n * d).map(|_| rng.normal()).collect();
    Mat { rows: n, cols: d, data }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logsumexp_examples() {
        let m = Mat::from_rows(&[vec![0.0, 0.0], vec![-1000.0, -1000.0], vec![3.5, f64::NEG_INFINITY]]).unwrap();
        let l = logsumexp_rows(&m);
        assert!((l[0] - 2f64.ln()).abs() < 1e-15);
        assert!((l[1] - (-1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(l[2], 3.5);
        let single = Mat::from_rows(&[vec![-7.25]]).unwrap();
        assert_eq!(logsumexp_rows(&single), vec![-7.25]);
    }

    #[test]
    fn gaussian_mean_and_determinism() {
        let mut rng = RngState::new(1);
        let x = gaussian_sample(&mut rng, 100_000, 2);
        let sums = x.col_sums();
        for s in sums {
            assert!((s / 1e5).abs() < 0.02);
        }
        let a = gaussian_sample(&mut RngState::new(99), 5, 3);
        let b = gaussian_sample(&mut RngState::new(99), 5, 3);
        assert_eq!(a, b);
    }

    #[test]
    fn forks_are_distinct_and_stable() {
        let parent = RngState::new(5);
        let mut f1 = parent.fork("source");
        let mut f2 = parent.fork("target");
        let a = gaussian_sample(&mut f1, 1, 1)[(0, 0)];
        let b = gaussian_sample(&mut f2, 1, 1)[(0, 0)];
        assert_ne!(a, b);

        let mut consumed = RngState::new(5);
        consumed.normal();
        let mut again = consumed.fork("source");
        assert_eq!(gaussian_sample(&mut again, 1, 1)[(0, 0)], a);
        assert_ne!(
            parent.fork_indexed("step", 0).seed(),
            parent.fork_indexed("step", 1).seed()
        );
    }

    #[test]
    fn gemm_transposes() {
        let a = Mat::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let b = Mat::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let ab = a.matmul(&b).unwrap();
        assert_eq!(ab.as_slice(), &[4.0, 5.0, 10.0, 11.0]);
        let mut atb = Mat::zeros(3, 3);
        gemm(1.0, &a, true, &a, false, 0.0, &mut atb).unwrap();
        assert_eq!(atb[(0, 0)], 17.0);
        assert_eq!(atb[(2, 1)], 3.0 * 2.0 + 6.0 * 5.0);
        let mut abt = Mat::zeros(2, 2);
        gemm(1.0, &a, false, &a, true, 0.0, &mut abt).unwrap();
        assert_eq!(abt.as_slice(), &[14.0, 32.0, 32.0, 77.0]);
        assert!(a.matmul(&a).is_err());
    }

    #[test]
    fn categorical_skips_zero_weights() {
        let mut rng = RngState::new(3);
        for _ in 0..100 {
            assert_eq!(rng.categorical(&[0.0, 0.0, 2.0, 0.0]), Some(2));
        }
        assert_eq!(rng.categorical(&[0.0, 0.0]), None);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn logsumexp_shift_invariance(
                row in proptest::collection::vec(-50.0f64..50.0, 1..12),
                c in -500.0f64..500.0,
            ) {
                let m = Mat::from_rows(std::slice::from_ref(&row)).unwrap();
                let shifted = m.map(|v| v + c);
                let l0 = logsumexp_rows(&m)[0];
                let l1 = logsumexp_rows(&shifted)[0];
                prop_assert!((l1 - (l0 + c)).abs() <= 1e-12 * (1.0 + l0.abs() + c.abs()));
            }
        }
    }
}
