//! Evaluation metrics: class proportions of generated samples, normalized
//! class-ratio error, k-NN precision/recall, and class-wise bits per dimension.

use std::path::Path;

use crate::datasets::{proxy_label, GmmSpec, LabeledSet};
use crate::error::{Error, Result};
use crate::numkit::{sq_dist, Mat};
use crate::ode::{nll_batch, SolverConfig, TraceField};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassHistogram {
    pub counts: Vec<usize>,
    pub total: usize,
}

impl ClassHistogram {
    pub fn from_labels(labels: &[usize], num_classes: usize) -> Result<Self> {
        let mut counts = vec![0; num_classes];
        for &l in labels {
            *counts
                .get_mut(l)
                .ok_or_else(|| Error::InvalidArgument(format!("label {l} outside {num_classes} classes")))? += 1;
        }
        Ok(ClassHistogram {
            counts,
            total: labels.len(),
        })
    }

    /// Normalized counts; all zeros for an empty histogram.
    pub fn proportions(&self) -> Vec<f64> {
        if self.total == 0 {
            return vec![0.0; self.counts.len()];
        }
        self.counts.iter().map(|&c| c as f64 / self.total as f64).collect()
    }

    /// `class,count,proportion`
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["class", "count", "proportion"])?;
        for (k, (c, p)) in self.counts.iter().zip(self.proportions()).enumerate() {
            w.write_record([k.to_string(), c.to_string(), p.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Proxy-label every row and tally.
pub fn class_histogram(points: &Mat, spec: &GmmSpec) -> ClassHistogram {
    let mut counts = vec![0; spec.num_classes()];
    for row in points.iter_rows() {
        counts[proxy_label(row, spec)] += 1;
    }
    ClassHistogram {
        counts,
        total: points.rows(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NcreReport {
    pub gen_proportions: Vec<f64>,
    pub data_weights: Vec<f64>,
    /// `(r_gen − r_data) / r_data` per class.
    pub signed: Vec<f64>,
    pub absolute: Vec<f64>,
    /// Unweighted class average of `absolute`.
    pub mean_abs: f64,
}

impl NcreReport {
    /// `class,data_weight,gen_proportion,signed_ncre,abs_ncre`
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["class", "data_weight", "gen_proportion", "signed_ncre", "abs_ncre"])?;
        for k in 0..self.signed.len() {
            w.write_record([
                k.to_string(),
                self.data_weights[k].to_string(),
                self.gen_proportions[k].to_string(),
                self.signed[k].to_string(),
                self.absolute[k].to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

pub fn ncre(gen: &ClassHistogram, data_weights: &[f64]) -> Result<NcreReport> {
    if gen.counts.len() != data_weights.len() {
        return Err(Error::Dimension(format!(
            "{} generated classes vs {} data weights",
            gen.counts.len(),
            data_weights.len()
        )));
    }
    if let Some(index) = data_weights.iter().position(|&w| !(w > 0.0)) {
        return Err(Error::ZeroMass {
            what: "data class weight",
            index,
        });
    }
    let total: f64 = data_weights.iter().sum();
    let r_data: Vec<f64> = data_weights.iter().map(|w| w / total).collect();
    let r_gen = gen.proportions();
    let signed: Vec<f64> = r_gen.iter().zip(&r_data).map(|(g, d)| (g - d) / d).collect();
    let absolute: Vec<f64> = signed.iter().map(|s| s.abs()).collect();
    let mean_abs = absolute.iter().sum::<f64>() / absolute.len() as f64;
    Ok(NcreReport {
        gen_proportions: r_gen,
        data_weights: r_data,
        signed,
        absolute,
        mean_abs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrfReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl PrfReport {
    pub fn new(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        PrfReport { precision, recall, f1 }
    }
}

/// Squared distance from each row to its `k`-th nearest other row.
fn knn_sq_radii(x: &Mat, k: usize) -> Vec<f64> {
    let n = x.rows();
    let mut d = vec![0.0; n - 1];
    (0..n)
        .map(|i| {
            let mut m = 0;
            for j in 0..n {
                if j != i {
                    d[m] = sq_dist(x.row(i), x.row(j));
                    m += 1;
                }
            }
            *d.select_nth_unstable_by(k - 1, |a, b| a.total_cmp(b)).1
        })
        .collect()
}

/// Fraction of `query` rows inside the union of balls around `support` rows.
fn coverage(query: &Mat, support: &Mat, sq_radii: &[f64]) -> f64 {
    let hits = query
        .iter_rows()
        .filter(|q| support.iter_rows().zip(sq_radii).any(|(s, &r)| sq_dist(q, s) <= r))
        .count();
    hits as f64 / query.rows() as f64
}

/// k-NN manifold precision and recall on raw coordinates. Precision is the
/// share of generated points inside some real point's k-NN ball; recall swaps
/// the roles.
pub fn knn_precision_recall(real: &Mat, gen: &Mat, k: usize) -> Result<PrfReport> {
    if real.cols() != gen.cols() {
        return Err(Error::Dimension(format!(
            "real dim {} vs generated dim {}",
            real.cols(),
            gen.cols()
        )));
    }
    if k == 0 || k >= real.rows() || k >= gen.rows() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} needs 1 <= k < min set size ({}, {})",
            real.rows(),
            gen.rows()
        )));
    }
    let r_real = knn_sq_radii(real, k);
    if r_real.contains(&0.0) {
        return Err(Error::DegenerateRadius("real"));
    }
    let r_gen = knn_sq_radii(gen, k);
    if r_gen.contains(&0.0) {
        return Err(Error::DegenerateRadius("generated"));
    }
    Ok(PrfReport::new(
        coverage(gen, real, &r_real),
        coverage(real, gen, &r_gen),
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClasswiseBpd {
    pub counts: Vec<usize>,
    /// `None` for classes absent from the test set.
    pub class_mean: Vec<Option<f64>>,
    pub overall_mean: f64,
}

impl ClasswiseBpd {
    pub fn from_values(labels: &[usize], bpd: &[f64], num_classes: usize) -> Result<Self> {
        if labels.len() != bpd.len() || labels.is_empty() {
            return Err(Error::Dimension(format!(
                "{} labels for {} values",
                labels.len(),
                bpd.len()
            )));
        }
        let mut sums = vec![0.0; num_classes];
        let mut counts = vec![0; num_classes];
        for (&l, &b) in labels.iter().zip(bpd) {
            if l >= num_classes {
                return Err(Error::InvalidArgument(format!(
                    "label {l} outside {num_classes} classes"
                )));
            }
            sums[l] += b;
            counts[l] += 1;
        }
        let class_mean = sums
            .iter()
            .zip(&counts)
            .map(|(&s, &c)| (c > 0).then(|| s / c as f64))
            .collect();
        let overall_mean = bpd.iter().sum::<f64>() / bpd.len() as f64;
        Ok(ClasswiseBpd {
            counts,
            class_mean,
            overall_mean,
        })
    }

    /// `class,count,mean_bpd`, then a final `all` row.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["class", "count", "mean_bpd"])?;
        for (k, (c, m)) in self.counts.iter().zip(&self.class_mean).enumerate() {
            w.write_record([
                k.to_string(),
                c.to_string(),
                m.map(|v| v.to_string()).unwrap_or_default(),
            ])?;
        }
        let total: usize = self.counts.iter().sum();
        w.write_record(["all".to_string(), total.to_string(), self.overall_mean.to_string()])?;
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Exact NLL of every test point, grouped by its true label.
pub fn classwise_bpd<F: TraceField + ?Sized>(
    field: &F,
    test: &LabeledSet,
    num_classes: usize,
    solver: &SolverConfig,
) -> Result<ClasswiseBpd> {
    let reports = nll_batch(field, &test.x, solver)?;
    let bpd: Vec<f64> = reports.iter().map(|r| r.bpd).collect();
    ClasswiseBpd::from_values(&test.labels, &bpd, num_classes)
}

/// `precision,recall,f1,k,n_real,n_gen`
pub fn write_prf_csv(path: &Path, r: &PrfReport, k: usize, n_real: usize, n_gen: usize) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["precision", "recall", "f1", "k", "n_real", "n_gen"])?;
    w.write_record([
        r.precision.to_string(),
        r.recall.to_string(),
        r.f1.to_string(),
        k.to_string(),
        n_real.to_string(),
        n_gen.to_string(),
    ])?;
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{preset, sample_gmm};
    use crate::numkit::{gaussian_sample, RngState};
    use crate::ode::{standard_normal_logpdf, VectorField};
    use proptest::prelude::*;

    #[test]
    fn ncre_arithmetic() {
        let h = ClassHistogram {
            counts: vec![95, 5],
            total: 100,
        };
        let r = ncre(&h, &[0.9, 0.1]).unwrap();
        assert!((r.signed[1] + 0.5).abs() < 1e-12);
        assert!((r.signed[0] - (0.95 - 0.9) / 0.9).abs() < 1e-12);
        assert!((r.mean_abs - (r.absolute[0] + r.absolute[1]) / 2.0).abs() < 1e-15);
        let exact = ncre(
            &ClassHistogram {
                counts: vec![9, 1],
                total: 10,
            },
            &[0.9, 0.1],
        )
        .unwrap();
        assert!(exact.absolute.iter().all(|&a| a < 1e-15));
        assert!(matches!(ncre(&h, &[1.0, 0.0]), Err(Error::ZeroMass { index: 1, .. })));
    }

    #[test]
    fn histograms() {
        let spec = preset("ring5").unwrap();
        let at_mode0 = Mat::from_rows(&vec![spec.modes[0].mean.clone(); 7]).unwrap();
        assert_eq!(class_histogram(&at_mode0, &spec).counts, vec![7, 0, 0, 0, 0]);
        let empty = class_histogram(&Mat::zeros(0, 2), &spec);
        assert_eq!((empty.counts, empty.total), (vec![0; 5], 0));
        assert!(ClassHistogram::from_labels(&[0, 5], 5).is_err());
    }

    #[test]
    fn gmm_histogram_concentrates() {
        let spec = preset("ring5").unwrap();
        let s = sample_gmm(&spec, 100_000, &mut RngState::new(11));
        let h = ClassHistogram::from_labels(&s.labels, 5).unwrap();
        for (p, w) in h.proportions().iter().zip(&spec.weights) {
            assert!((p - w).abs() < 0.01);
        }
    }

    #[test]
    fn identical_sets_have_full_coverage() {
        let x = gaussian_sample(&mut RngState::new(1), 300, 2);
        let r = knn_precision_recall(&x, &x, 5).unwrap();
        assert_eq!((r.precision, r.recall, r.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn shifted_set_has_zero_precision() {
        let x = gaussian_sample(&mut RngState::new(1), 300, 2);
        let y = x.map(|v| v + 100.0);
        let r = knn_precision_recall(&x, &y, 5).unwrap();
        assert_eq!((r.precision, r.recall, r.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn single_cluster_recall_matches_covered_mass() {
        // real: 70% near (−10, 0), 30% near (10, 0); generated covers only the first
        let mut rng = RngState::new(3);
        let n = 2000;
        let mut real = gaussian_sample(&mut rng, n, 2);
        for i in 0..n {
            real[(i, 0)] += if i < 1400 { -10.0 } else { 10.0 };
        }
        let mut gen = gaussian_sample(&mut rng, n, 2);
        for i in 0..n {
            gen[(i, 0)] -= 10.0;
        }
        let r = knn_precision_recall(&real, &gen, 5).unwrap();
        assert!((r.recall - 0.7).abs() < 0.05, "recall {}", r.recall);
        assert!(r.precision > 0.9);
    }

    #[test]
    fn duplicates_are_flagged() {
        let x = Mat::from_rows(&[[1.0, 2.0]; 10]).unwrap();
        let y = gaussian_sample(&mut RngState::new(1), 10, 2);
        assert!(matches!(
            knn_precision_recall(&x, &y, 3),
            Err(Error::DegenerateRadius("real"))
        ));
        assert!(matches!(
            knn_precision_recall(&y, &x, 3),
            Err(Error::DegenerateRadius("generated"))
        ));
        assert!(knn_precision_recall(&y, &y, 10).is_err());
    }

    struct Zero;
    impl VectorField for Zero {
        fn dim(&self) -> usize {
            2
        }
        fn eval_batch(&self, _t: &[f64], x: &Mat) -> Result<Mat> {
            Ok(Mat::zeros(x.rows(), 2))
        }
    }
    impl TraceField for Zero {
        fn eval_with_trace(&self, _t: &[f64], x: &Mat) -> Result<(Mat, Vec<f64>)> {
            Ok((Mat::zeros(x.rows(), 2), vec![0.0; x.rows()]))
        }
    }

    #[test]
    fn zero_field_classwise_bpd_is_gaussian() {
        let spec = preset("two_mode").unwrap();
        let test = sample_gmm(&spec, 60, &mut RngState::new(4));
        let cfg = SolverConfig::likelihood();
        let r = classwise_bpd(&Zero, &test, 2, &cfg).unwrap();
        for c in 0..2 {
            let vals: Vec<f64> = test
                .iter()
                .filter(|s| s.label == c)
                .map(|s| -standard_normal_logpdf(s.x) / (2.0 * std::f64::consts::LN_2))
                .collect();
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            assert!((r.class_mean[c].unwrap() - m).abs() < 1e-9);
        }
        assert_eq!(r, classwise_bpd(&Zero, &test, 2, &cfg).unwrap());
    }

    proptest! {
        #[test]
        fn ncre_mean_is_permutation_invariant(
            counts in prop::collection::vec(0usize..50, 5),
            weights in prop::collection::vec(0.01f64..1.0, 5),
            rot in 0usize..5,
        ) {
            let h = ClassHistogram { total: counts.iter().sum(), counts: counts.clone() };
            let a = ncre(&h, &weights).unwrap().mean_abs;
            let mut pc = counts.clone();
            let mut pw = weights.clone();
            pc.rotate_left(rot);
            pw.rotate_left(rot);
            let b = ncre(&ClassHistogram { total: h.total, counts: pc }, &pw).unwrap().mean_abs;
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn prf_is_symmetric_under_swap(seed in 0u64..1000, shift in -3.0f64..3.0) {
            let mut rng = RngState::new(seed);
            let x = gaussian_sample(&mut rng, 40, 2);
            let y = gaussian_sample(&mut rng, 30, 2).map(|v| v + shift);
            let a = knn_precision_recall(&x, &y, 3).unwrap();
            let b = knn_precision_recall(&y, &x, 3).unwrap();
            prop_assert_eq!(a.precision, b.recall);
            prop_assert_eq!(a.recall, b.precision);
            prop_assert!(a.f1 == 0.0 || (a.f1 - 2.0 * a.precision * a.recall / (a.precision + a.recall)).abs() < 1e-15);
        }

        #[test]
        fn overall_bpd_is_count_weighted(
            vals in prop::collection::vec((0usize..4, -5.0f64..5.0), 1..60),
        ) {
            let (labels, bpd): (Vec<usize>, Vec<f64>) = vals.into_iter().unzip();
            let r = ClasswiseBpd::from_values(&labels, &bpd, 4).unwrap();
            let n: usize = r.counts.iter().sum();
            let weighted: f64 = r
                .counts
                .iter()
                .zip(&r.class_mean)
                .filter_map(|(&c, m)| m.map(|m| m * c as f64))
                .sum::<f64>()
                / n as f64;
            prop_assert!((weighted - r.overall_mean).abs() < 1e-12);
        }
    }
}
