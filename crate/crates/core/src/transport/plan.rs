use std::path::Path;

use crate::error::{Error, Result};
use crate::numkit::{Mat, RngState};

/// Nonnegative coupling between two mini-batches, with cached marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pi: Mat,
    row_marginal: Vec<f64>,
    col_marginal: Vec<f64>,
    total_mass: f64,
}

impl TransportPlan {
    /// Panics on negative or non-finite entries; solvers never produce them.
    pub fn from_mat(pi: Mat) -> Self {
        assert!(
            pi.as_slice().iter().all(|&p| p >= 0.0 && p.is_finite()),
            "transport plan entries must be finite and nonnegative"
        );
        let row_marginal = pi.row_sums();
        let col_marginal = pi.col_sums();
        let total_mass = row_marginal.iter().sum();
        TransportPlan {
            pi,
            row_marginal,
            col_marginal,
            total_mass,
        }
    }

    pub fn try_from_mat(pi: Mat) -> Result<Self> {
        if pi.as_slice().iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidArgument("plan entries must be finite and >= 0".into()));
        }
        Ok(Self::from_mat(pi))
    }

    pub fn pi(&self) -> &Mat {
        &self.pi
    }

    pub fn row_marginal(&self) -> &[f64] {
        &self.row_marginal
    }

    pub fn col_marginal(&self) -> &[f64] {
        &self.col_marginal
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn shape(&self) -> (usize, usize) {
        self.pi.shape()
    }

    /// `Σ c_ij π_ij`.
    pub fn cost(&self, c: &super::CostMatrix) -> f64 {
        let (n, m) = self.shape();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..m {
                s += c.get(i, j) * self.pi[(i, j)];
            }
        }
        s
    }
}

/// Per-target density-ratio estimates `s_j = B · π₁_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct MajorityScores(pub Vec<f64>);

impl MajorityScores {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mean(&self) -> f64 {
        crate::numkit::mean(&self.0)
    }
}

/// Majority scores of a source-fixed plan with uniform source weights.
///
/// Errors on a zero column (the density ratio is undefined there) and on a
/// plan whose total mass is not 1.
pub fn majority_scores(plan: &TransportPlan) -> Result<MajorityScores> {
    if (plan.total_mass - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidArgument(format!(
            "majority scores need a unit-mass plan, got mass {}",
            plan.total_mass
        )));
    }
    if let Some(j) = plan.col_marginal.iter().position(|&m| !(m > 0.0)) {
        return Err(Error::ZeroMass {
            what: "column",
            index: j,
        });
    }
    Ok(majority_scores_lenient(plan))
}

/// Same formula without the positivity check; zero columns give zero scores
/// and must be clamped by the caller before inversion.
pub fn majority_scores_lenient(plan: &TransportPlan) -> MajorityScores {
    let b = plan.col_marginal.len() as f64;
    MajorityScores(plan.col_marginal.iter().map(|m| b * m).collect())
}

/// One target per source row, drawn from the normalized row.
pub fn sample_pairs_rowwise(plan: &TransportPlan, rng: &mut RngState) -> Result<Vec<(usize, usize)>> {
    let (n, _) = plan.shape();
    let mut pairs = Vec::with_capacity(n);
    for i in 0..n {
        let j = rng
            .categorical(plan.pi.row(i))
            .ok_or(Error::ZeroMass { what: "row", index: i })?;
        pairs.push((i, j));
    }
    Ok(pairs)
}

/// `n` i.i.d. index pairs from the plan normalized to a probability matrix.
pub fn sample_pairs_joint(plan: &TransportPlan, n: usize, rng: &mut RngState) -> Result<Vec<(usize, usize)>> {
    let cols = plan.pi.cols();
    let flat = plan.pi.as_slice();
    let mut cdf = Vec::with_capacity(flat.len());
    let mut acc = 0.0;
    for &p in flat {
        acc += p;
        cdf.push(acc);
    }
    if !(acc > 0.0) {
        return Err(Error::InvalidArgument("plan has no mass to sample".into()));
    }
    let mut pairs = Vec::with_capacity(n);
    for _ in 0..n {
        let u = rng.uniform() * acc;
        // first index whose cumulative mass exceeds u; zero cells are never chosen
        let mut k = cdf.partition_point(|&c| c <= u);
        if k >= flat.len() {
            k = flat.iter().rposition(|&p| p > 0.0).unwrap_or(0);
        }
        pairs.push((k / cols, k % cols));
    }
    Ok(pairs)
}

/// CSV with header `i,j,mass`, one row per entry.
pub fn write_plan_csv(path: &Path, plan: &TransportPlan) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["i", "j", "mass"])?;
    let (n, m) = plan.shape();
    for i in 0..n {
        for j in 0..m {
            w.write_record([i.to_string(), j.to_string(), plan.pi[(i, j)].to_string()])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_plan_csv(path: &Path) -> Result<TransportPlan> {
    let mut r = csv::Reader::from_path(path)?;
    let mut entries = Vec::new();
    let (mut n, mut m) = (0, 0);
    for rec in r.records() {
        let rec = rec?;
        let parse = |k: usize| -> Result<&str> {
            rec.get(k).ok_or_else(|| Error::MissingColumn {
                column: ["i", "j", "mass"][k].into(),
                path: path.into(),
            })
        };
        let i: usize = parse(0)?
            .parse()
            .map_err(|_| Error::Config("bad plan row index".into()))?;
        let j: usize = parse(1)?
            .parse()
            .map_err(|_| Error::Config("bad plan column index".into()))?;
        let v: f64 = parse(2)?.parse().map_err(|_| Error::Config("bad plan mass".into()))?;
        n = n.max(i + 1);
        m = m.max(j + 1);
        entries.push((i, j, v));
    }
    let mut pi = Mat::zeros(n, m);
    for (i, j, v) in entries {
        pi[(i, j)] = v;
    }
    TransportPlan::try_from_mat(pi)
}

/// CSV with header `j,score`.
pub fn write_scores_csv(path: &Path, scores: &MajorityScores) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["j", "score"])?;
    for (j, s) in scores.0.iter().enumerate() {
        w.write_record([j.to_string(), s.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
