use crate::error::{Error, Result};
use crate::numkit::Mat;

/// Half squared Euclidean cost between two point sets, `c_ij = ½‖x0_i − x1_j‖²`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix(Mat);

impl CostMatrix {
    /// Wraps an arbitrary nonnegative matrix (used by tests and the dense oracle).
    pub fn from_mat(m: Mat) -> Result<Self> {
        if m.as_slice().iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidArgument("cost entries must be finite and >= 0".into()));
        }
        Ok(CostMatrix(m))
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    pub fn mat(&self) -> &Mat {
        &self.0
    }

    pub fn max(&self) -> f64 {
        self.0.as_slice().iter().copied().fold(0.0, f64::max)
    }
}

pub fn cost_matrix(x0: &Mat, x1: &Mat) -> Result<CostMatrix> {
    if x0.cols() != x1.cols() {
        return Err(Error::Dimension(format!(
            "source dim {} vs target dim {}",
            x0.cols(),
            x1.cols()
        )));
    }
    let mut c = Mat::zeros(x0.rows(), x1.rows());
    for i in 0..x0.rows() {
        let xi = x0.row(i);
        let ci = c.row_mut(i);
        for (j, cij) in ci.iter_mut().enumerate() {
            let xj = x1.row(j);
            let mut s = 0.0;
            for k in 0..xi.len() {
                let d = xi[k] - xj[k];
                s += d * d;
            }
            *cij = 0.5 * s;
        }
    }
    Ok(CostMatrix(c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::{gaussian_sample, RngState};

    #[test]
    fn small_cases() {
        let p = Mat::from_rows(&[[1.5, -2.0]]).unwrap();
        assert_eq!(cost_matrix(&p, &p).unwrap().get(0, 0), 0.0);
        let x0 = Mat::from_rows(&[[0.0, 0.0]]).unwrap();
        let x1 = Mat::from_rows(&[[3.0, 4.0]]).unwrap();
        assert_eq!(cost_matrix(&x0, &x1).unwrap().get(0, 0), 12.5);
        let bad = Mat::zeros(1, 3);
        assert!(matches!(cost_matrix(&x0, &bad), Err(Error::Dimension(_))));
    }

    #[test]
    fn matches_naive_loop() {
        let mut rng = RngState::new(11);
        let x0 = gaussian_sample(&mut rng, 8, 2);
        let x1 = gaussian_sample(&mut rng, 8, 2);
        let c = cost_matrix(&x0, &x1).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let dx = x0[(i, 0)] - x1[(j, 0)];
                let dy = x0[(i, 1)] - x1[(j, 1)];
                assert!((c.get(i, j) - 0.5 * (dx * dx + dy * dy)).abs() < 1e-12);
                assert!(c.get(i, j) >= 0.0);
            }
        }
    }
}
