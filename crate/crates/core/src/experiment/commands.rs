use std::path::{Path, PathBuf};
use std::time::Instant;

use super::{ExperimentConfig, RunManifest};
use crate::datasets::{proxy_label, sample_gmm, GmmSpec, LabeledSet};
use crate::error::{Error, Result};
use crate::flowmatch::{train, TrainLog};
use crate::metrics::{
    classwise_bpd, knn_precision_recall, ncre, write_prf_csv, ClassHistogram, ClasswiseBpd, NcreReport, PrfReport,
};
use crate::model::{load_checkpoint, save_checkpoint, MlpVectorField};
use crate::numkit::{gaussian_sample, Mat, RngState};
use crate::ode::{sample_model, write_samples_csv};
use crate::transport::{cost_matrix, majority_scores_lenient, sinkhorn_unbalanced, uniform};

const TRAIN_CSV: &str = "data/train.csv";
const TEST_CSV: &str = "data/test.csv";
const SPEC_JSON: &str = "data/spec.json";
const CHECKPOINT: &str = "model.ckpt";
const TRAIN_LOG: &str = "train_log.csv";
const SAMPLES: &str = "samples.csv";

fn prepare_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir.join("data")).map_err(|e| Error::io(dir, e))
}

fn finish(cfg: &ExperimentConfig, command: &str, files: &[&str], started: Instant) -> Result<RunManifest> {
    let files: Vec<PathBuf> = files.iter().map(PathBuf::from).collect();
    let m = RunManifest::build(
        command,
        cfg.hash(),
        cfg.seed,
        &cfg.output_dir,
        &files,
        started.elapsed().as_secs_f64(),
    )?;
    m.write(&cfg.output_dir)?;
    Ok(m)
}

fn generate(cfg: &ExperimentConfig, spec: &GmmSpec) -> (LabeledSet, LabeledSet) {
    let root = RngState::new(cfg.seed);
    let train = sample_gmm(spec, cfg.n_train, &mut root.fork("data/train"));
    let test = sample_gmm(spec, cfg.n_test, &mut root.fork("data/test"));
    (train, test)
}

/// Write the training and test sets plus the resolved mixture.
pub fn gen_data(cfg: &ExperimentConfig) -> Result<RunManifest> {
    let started = Instant::now();
    cfg.validate()?;
    prepare_dir(&cfg.output_dir)?;
    let spec = cfg.dataset.resolve()?;
    let (train, test) = generate(cfg, &spec);
    let dir = &cfg.output_dir;
    train.write_csv(&dir.join(TRAIN_CSV))?;
    test.write_csv(&dir.join(TEST_CSV))?;
    let spec_path = dir.join(SPEC_JSON);
    std::fs::write(&spec_path, serde_json::to_string_pretty(&spec)?).map_err(|e| Error::io(&spec_path, e))?;
    finish(cfg, "gen-data", &[TRAIN_CSV, TEST_CSV, SPEC_JSON], started)
}

/// Read a data split, generating the dataset first if it is absent.
fn data_split(cfg: &ExperimentConfig, rel: &str) -> Result<LabeledSet> {
    let path = cfg.output_dir.join(rel);
    if !path.exists() {
        gen_data(cfg)?;
    }
    LabeledSet::read_csv(&path)
}

/// Train on `data/train.csv`; writes the checkpoint and the per-step log.
pub fn run_train(cfg: &ExperimentConfig) -> Result<RunManifest> {
    Ok(train_with_log(cfg)?.0)
}

fn train_with_log(cfg: &ExperimentConfig) -> Result<(RunManifest, TrainLog)> {
    let started = Instant::now();
    cfg.validate()?;
    prepare_dir(&cfg.output_dir)?;
    let data = data_split(cfg, TRAIN_CSV)?;
    let (net, log) = train(&cfg.train, &data.x, &RngState::new(cfg.train.seed))?;
    save_checkpoint(&net, &cfg.output_dir.join(CHECKPOINT))?;
    log.write_csv(&cfg.output_dir.join(TRAIN_LOG))?;
    Ok((finish(cfg, "train", &[CHECKPOINT, TRAIN_LOG], started)?, log))
}

fn load_net(cfg: &ExperimentConfig, checkpoint: Option<&Path>) -> Result<MlpVectorField> {
    let path = checkpoint
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cfg.output_dir.join(CHECKPOINT));
    load_checkpoint(&path)
}

fn generate_samples(cfg: &ExperimentConfig, net: &MlpVectorField, spec: &GmmSpec) -> Result<(Mat, Vec<usize>)> {
    if net.dim() != spec.d {
        return Err(Error::Dimension(format!(
            "checkpoint dim {} vs dataset dim {}",
            net.dim(),
            spec.d
        )));
    }
    let rng = &mut RngState::new(cfg.seed).fork("sample");
    let x = sample_model(net, cfg.eval.n_gen, &cfg.solver, rng)?;
    let labels = x.iter_rows().map(|r| proxy_label(r, spec)).collect();
    Ok((x, labels))
}

/// Draw `eval.n_gen` samples and write them with proxy labels.
pub fn run_sample(cfg: &ExperimentConfig, checkpoint: Option<&Path>) -> Result<RunManifest> {
    let started = Instant::now();
    cfg.validate()?;
    prepare_dir(&cfg.output_dir)?;
    let net = load_net(cfg, checkpoint)?;
    let spec = cfg.dataset.resolve()?;
    let (x, labels) = generate_samples(cfg, &net, &spec)?;
    write_samples_csv(&cfg.output_dir.join(SAMPLES), &x, Some(&labels), None)?;
    finish(cfg, "sample", &[SAMPLES], started)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub histogram: ClassHistogram,
    /// Generated share of the smallest-weight class.
    pub tail_fraction: f64,
    pub ncre: Option<NcreReport>,
    pub prf: Option<PrfReport>,
    pub bpd: Option<ClasswiseBpd>,
    pub tail_class: usize,
    pub score_mean: f64,
    pub score_variance: f64,
    /// Mean majority score of targets from each true class.
    pub class_score_means: Vec<Option<f64>>,
}

impl EvalSummary {
    pub fn tail_bpd(&self) -> Option<f64> {
        self.bpd.as_ref().and_then(|b| b.class_mean[self.tail_class])
    }

    /// `metric,value` pairs in a fixed order; disabled metrics are omitted.
    pub fn rows(&self) -> Vec<(String, f64)> {
        let mut rows = vec![("tail_fraction".to_string(), self.tail_fraction)];
        if let Some(n) = &self.ncre {
            rows.push(("mean_abs_ncre".into(), n.mean_abs));
        }
        if let Some(p) = &self.prf {
            rows.push(("precision".into(), p.precision));
            rows.push(("recall".into(), p.recall));
            rows.push(("f1".into(), p.f1));
        }
        if let Some(b) = &self.bpd {
            rows.push(("mean_bpd".into(), b.overall_mean));
            if let Some(t) = self.tail_bpd() {
                rows.push(("tail_bpd".into(), t));
            }
        }
        rows.push(("score_mean".into(), self.score_mean));
        rows.push(("score_variance".into(), self.score_variance));
        for (k, m) in self.class_score_means.iter().enumerate() {
            if let Some(m) = m {
                rows.push((format!("score_mean_class_{k}"), *m));
            }
        }
        rows
    }
}

/// The first `per_class` points of every class (all when 0), in file order.
fn stratified_head(set: &LabeledSet, num_classes: usize, per_class: usize) -> LabeledSet {
    let mut taken = vec![0usize; num_classes];
    let idx: Vec<usize> = (0..set.len())
        .filter(|&i| {
            let l = set.labels[i];
            let keep = per_class == 0 || taken[l] < per_class;
            taken[l] += keep as usize;
            keep
        })
        .collect();
    LabeledSet {
        x: set.x.select_rows(&idx),
        labels: idx.iter().map(|&i| set.labels[i]).collect(),
    }
}

struct ScoreStats {
    mean: f64,
    variance: f64,
    class_means: Vec<Option<f64>>,
    /// First batch of targets with labels and scores, for plotting.
    first: LabeledSet,
    first_scores: Vec<f64>,
}

/// Majority scores of training targets pooled over `eval.score_batches` batches.
fn score_statistics(cfg: &ExperimentConfig, data: &LabeledSet, num_classes: usize) -> Result<ScoreStats> {
    let b = cfg.train.batch_size;
    let root = RngState::new(cfg.seed);
    let mut pooled = Vec::new();
    let mut class_sum = vec![0.0; num_classes];
    let mut class_n = vec![0usize; num_classes];
    let mut first = None;
    for batch in 0..cfg.eval.score_batches {
        let rng = &mut root.fork_indexed("scores", batch as u64);
        let x0 = gaussian_sample(rng, b, data.dim());
        let idx: Vec<usize> = (0..b).map(|_| rng.index(data.len())).collect();
        let x1 = data.x.select_rows(&idx);
        let out = sinkhorn_unbalanced(&cost_matrix(&x0, &x1)?, &uniform(b), &uniform(b), &cfg.train.uot)?;
        let s = majority_scores_lenient(&out.plan);
        for (&i, &v) in idx.iter().zip(s.as_slice()) {
            class_sum[data.labels[i]] += v;
            class_n[data.labels[i]] += 1;
        }
        pooled.extend_from_slice(s.as_slice());
        if first.is_none() {
            first = Some((x1, idx.iter().map(|&i| data.labels[i]).collect::<Vec<_>>(), s.0));
        }
    }
    let n = pooled.len().max(1) as f64;
    let mean = pooled.iter().sum::<f64>() / n;
    let variance = pooled.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let class_means = class_sum
        .iter()
        .zip(&class_n)
        .map(|(&s, &c)| (c > 0).then(|| s / c as f64))
        .collect();
    let (x, labels, first_scores) = first.unwrap_or_else(|| (Mat::zeros(0, data.dim()), Vec::new(), Vec::new()));
    Ok(ScoreStats {
        mean,
        variance,
        class_means,
        first: LabeledSet { x, labels },
        first_scores,
    })
}

fn write_scores_csv(path: &Path, set: &LabeledSet, scores: &[f64]) -> Result<()> {
    let (x, labels) = (&set.x, &set.labels);
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (1..=x.cols()).map(|k| format!("x{k}")).collect();
    header.extend(["label".to_string(), "score".to_string()]);
    w.write_record(&header)?;
    for i in 0..x.rows() {
        let mut rec: Vec<String> = x.row(i).iter().map(|v| v.to_string()).collect();
        rec.push(labels[i].to_string());
        rec.push(scores[i].to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_summary_csv(path: &Path, rows: &[(String, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["metric", "value"])?;
    for (k, v) in rows {
        w.write_record([k.clone(), v.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Sample from the checkpoint and compute every enabled metric.
pub fn run_eval(cfg: &ExperimentConfig, checkpoint: Option<&Path>) -> Result<(EvalSummary, RunManifest)> {
    let started = Instant::now();
    cfg.validate()?;
    prepare_dir(&cfg.output_dir)?;
    let dir = &cfg.output_dir;
    let net = load_net(cfg, checkpoint)?;
    let spec = cfg.dataset.resolve()?;
    let m = spec.num_classes();
    let test = data_split(cfg, TEST_CSV)?;
    let train_set = data_split(cfg, TRAIN_CSV)?;
    let mut files = vec![SAMPLES];

    let (gen, labels) = generate_samples(cfg, &net, &spec)?;
    write_samples_csv(&dir.join(SAMPLES), &gen, Some(&labels), None)?;
    let histogram = ClassHistogram::from_labels(&labels, m)?;
    let tail_class = spec.tail_class();
    let tail_fraction = histogram.proportions()[tail_class];
    if cfg.eval.histogram {
        histogram.write_csv(&dir.join("histogram.csv"))?;
        files.push("histogram.csv");
    }
    let ncre_report = if cfg.eval.ncre {
        let r = ncre(&histogram, &spec.weights)?;
        r.write_csv(&dir.join("ncre.csv"))?;
        files.push("ncre.csv");
        Some(r)
    } else {
        None
    };
    let prf = if cfg.eval.prf {
        let real = test.x.select_rows(&(0..cfg.eval.n_real).collect::<Vec<_>>());
        let r = knn_precision_recall(&real, &gen, cfg.eval.knn_k)?;
        write_prf_csv(&dir.join("prf.csv"), &r, cfg.eval.knn_k, real.rows(), gen.rows())?;
        files.push("prf.csv");
        Some(r)
    } else {
        None
    };
    let bpd = if cfg.eval.bpd {
        let subset = stratified_head(&test, m, cfg.eval.bpd_per_class);
        let r = classwise_bpd(&net, &subset, m, &cfg.eval.bpd_solver)?;
        r.write_csv(&dir.join("bpd.csv"))?;
        files.push("bpd.csv");
        Some(r)
    } else {
        None
    };
    let scores = score_statistics(cfg, &train_set, m)?;
    write_scores_csv(&dir.join("scores.csv"), &scores.first, &scores.first_scores)?;
    files.push("scores.csv");

    let summary = EvalSummary {
        histogram,
        tail_fraction,
        ncre: ncre_report,
        prf,
        bpd,
        tail_class,
        score_mean: scores.mean,
        score_variance: scores.variance,
        class_score_means: scores.class_means,
    };
    write_summary_csv(&dir.join("summary.csv"), &summary.rows())?;
    files.push("summary.csv");
    let manifest = finish(cfg, "eval", &files, started)?;
    Ok((summary, manifest))
}

/// One line of `sweep.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub tau: f64,
    pub k: f64,
    pub seed: u64,
    pub cell: String,
    pub outcome: std::result::Result<(EvalSummary, f64), String>,
}

const SWEEP_HEADER: [&str; 16] = [
    "tau",
    "k",
    "seed",
    "cell",
    "status",
    "tail_fraction",
    "mean_abs_ncre",
    "precision",
    "recall",
    "f1",
    "mean_bpd",
    "tail_bpd",
    "final_loss",
    "score_mean",
    "score_variance",
    "error",
];

impl SweepRow {
    fn record(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut rec = vec![
            self.tau.to_string(),
            self.k.to_string(),
            self.seed.to_string(),
            self.cell.clone(),
        ];
        match &self.outcome {
            Ok((s, loss)) => {
                rec.push("ok".into());
                rec.push(s.tail_fraction.to_string());
                rec.push(opt(s.ncre.as_ref().map(|n| n.mean_abs)));
                rec.push(opt(s.prf.map(|p| p.precision)));
                rec.push(opt(s.prf.map(|p| p.recall)));
                rec.push(opt(s.prf.map(|p| p.f1)));
                rec.push(opt(s.bpd.as_ref().map(|b| b.overall_mean)));
                rec.push(opt(s.tail_bpd()));
                rec.push(loss.to_string());
                rec.push(s.score_mean.to_string());
                rec.push(s.score_variance.to_string());
                rec.push(String::new());
            }
            Err(msg) => {
                rec.push("failed".into());
                rec.extend(std::iter::repeat_n(String::new(), 10));
                rec.push(msg.clone());
            }
        }
        rec
    }
}

/// Final loss reported per sweep cell: mean unweighted loss of the last steps.
const LOSS_TAIL: usize = 100;

/// Configuration of one sweep cell.
pub fn sweep_cell(cfg: &ExperimentConfig, tau: f64, k: f64, seed: u64) -> (String, ExperimentConfig) {
    let name = format!("tau{tau}_k{k}_seed{seed}");
    let mut cell = cfg.clone().with_seed(seed);
    cell.train.uot.tau = tau;
    cell.train.k = k;
    cell.output_dir = cfg.output_dir.join("cells").join(&name);
    (name, cell)
}

fn run_cell(cell: &ExperimentConfig) -> Result<(EvalSummary, f64)> {
    let (_, log) = train_with_log(cell)?;
    let (summary, _) = run_eval(cell, None)?;
    Ok((summary, log.tail_loss(LOSS_TAIL)))
}

/// Train and evaluate every `(τ, k, seed)` cell; failures are recorded and
/// the sweep continues.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<(Vec<SweepRow>, RunManifest)> {
    let started = Instant::now();
    cfg.validate()?;
    prepare_dir(&cfg.output_dir)?;
    let mut rows = Vec::new();
    for &tau in &cfg.sweep.taus {
        for &k in &cfg.sweep.ks {
            for &seed in &cfg.sweep.seeds {
                let (name, cell) = sweep_cell(cfg, tau, k, seed);
                let outcome = run_cell(&cell).map_err(|e| format!("{}: {e}", e.kind()));
                rows.push(SweepRow {
                    tau,
                    k,
                    seed,
                    cell: name,
                    outcome,
                });
            }
        }
    }
    let path = cfg.output_dir.join("sweep.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(SWEEP_HEADER)?;
    for r in &rows {
        w.write_record(r.record())?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    let manifest = finish(cfg, "sweep", &["sweep.csv"], started)?;
    Ok((rows, manifest))
}
