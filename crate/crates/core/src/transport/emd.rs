//! Exact balanced transport for square uniform batches via the linear
//! assignment problem (shortest augmenting paths with dual potentials).

use super::{CostMatrix, TransportPlan};
use crate::error::{Error, Result};
use crate::numkit::Mat;

/// Minimum-cost perfect matching on a square cost matrix.
/// Returns `assignment[i] = j`.
pub fn solve_assignment(c: &Mat) -> Result<Vec<usize>> {
    let (n, m) = c.shape();
    if n != m {
        return Err(Error::Dimension(format!("assignment needs a square cost, got {n}x{m}")));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    // 1-based arrays; index 0 is the virtual root of each augmenting tree.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut row_of_col = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        row_of_col[0] = row;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of_col[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = c[(i0 - 1, j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            if !delta.is_finite() {
                return Err(Error::NonFinite("assignment reduced costs".into()));
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of_col[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of_col[j0] = row_of_col[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        assignment[row_of_col[j] - 1] = j - 1;
    }
    Ok(assignment)
}

/// Exact optimal plan between two uniform measures of equal size: `(1/B)·P`
/// for the optimal permutation `P`.
pub fn emd_exact(c: &CostMatrix, a: &[f64], b: &[f64]) -> Result<TransportPlan> {
    let (n, m) = c.shape();
    if n != m || a.len() != n || b.len() != m {
        return Err(Error::InvalidArgument(format!(
            "emd_exact supports square uniform problems only ({n}x{m}, |a|={}, |b|={})",
            a.len(),
            b.len()
        )));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("empty transport problem".into()));
    }
    let w = 1.0 / n as f64;
    let uniform = |v: &[f64]| v.iter().all(|&x| (x - w).abs() <= 1e-12 * w.max(1.0));
    if !uniform(a) || !uniform(b) {
        return Err(Error::InvalidArgument("emd_exact requires uniform marginals".into()));
    }
    let assignment = solve_assignment(c.mat())?;
    let mut pi = Mat::zeros(n, n);
    for (i, &j) in assignment.iter().enumerate() {
        pi[(i, j)] = w;
    }
    Ok(TransportPlan::from_mat(pi))
}
