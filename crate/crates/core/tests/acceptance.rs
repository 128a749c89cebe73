//! Acceptance suite. Runs every criterion at its stated tolerance, prints one
//! PASS/FAIL line per criterion and exits nonzero if any fails.
//!
//! Criteria run sequentially so the runtime budgets are measured without
//! interference. Artifacts land in `$CARGO_TARGET_TMPDIR/acceptance`.

use std::f64::consts::{LN_2, PI};
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use uot_rfm::datasets::{sample_gmm, two_mode};
use uot_rfm::experiment::{run_eval, run_train, DatasetSource, EvalSummary, ExperimentConfig};
use uot_rfm::flowmatch::{batch_loss, Coupling, PathBatch, PathSample};
use uot_rfm::model::{MlpConfig, MlpVectorField};
use uot_rfm::ode::{integrate, nll, AffineField, SolverConfig};
use uot_rfm::transport::{
    cost_matrix, emd_exact, majority_scores, sinkhorn_unbalanced, uniform, uot_objective, uot_oracle_dense, CostMatrix,
    UotConfig,
};
use uot_rfm::{Mat, RngState};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn log(line: &str) {
    println!("    {line}");
    let _ = std::io::stdout().flush();
}

fn root_dir() -> PathBuf {
    Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance")
}

// ---------------------------------------------------------------- transport

struct Instance {
    c: CostMatrix,
    b: Vec<f64>,
    cfg: UotConfig,
}

fn conformance_instances() -> Vec<Instance> {
    let mut rng = RngState::new(2024);
    (0..200)
        .map(|i| {
            let n = 2 + rng.index(7);
            let eps = [0.05, 0.1, 0.5][rng.index(3)];
            let tau = [0.5, 1.0, 2.0][rng.index(3)];
            let x0 = Mat::from_vec(n, 2, (0..2 * n).map(|_| rng.normal()).collect()).unwrap();
            let x1 = Mat::from_vec(n, 2, (0..2 * n).map(|_| 1.5 * rng.normal() + 0.5).collect()).unwrap();
            let cfg = UotConfig {
                eps,
                tau,
                source_fixed: i % 2 == 0,
                max_iter: 100_000,
                tol: 1e-12,
            };
            Instance {
                c: cost_matrix(&x0, &x1).unwrap(),
                b: uniform(n),
                cfg,
            }
        })
        .collect()
}

fn criterion_1_and_2() -> (Outcome, Outcome) {
    let started = Instant::now();
    let mut worst_obj: f64 = 0.0;
    let mut worst_row: f64 = 0.0;
    let mut worst_pot: f64 = 0.0;
    let mut failures = 0;
    for inst in conformance_instances() {
        let n = inst.b.len();
        let a = uniform(n);
        let sk = sinkhorn_unbalanced(&inst.c, &a, &inst.b, &inst.cfg).unwrap();
        let oracle = uot_oracle_dense(&inst.c, &a, &inst.b, &inst.cfg).unwrap();
        let j_sk = uot_objective(&inst.c, &a, &inst.b, &inst.cfg, sk.plan.pi());
        let gap = (j_sk - oracle.objective).abs();
        worst_obj = worst_obj.max(gap);
        if gap > 1e-6 {
            failures += 1;
        }
        if inst.cfg.source_fixed {
            for (r, ai) in sk.plan.row_marginal().iter().zip(&a) {
                worst_row = worst_row.max((r - ai).abs());
            }
        }
        for (j, col) in sk.plan.col_marginal().iter().enumerate() {
            let rhs = (-sk.potentials.g[j] / inst.cfg.tau).exp();
            worst_pot = worst_pot.max((col / inst.b[j] - rhs).abs());
        }
    }
    let secs = started.elapsed().as_secs_f64();
    let c1 = outcome(
        failures == 0 && worst_row <= 1e-9 && secs < 30.0,
        format!("max objective gap {worst_obj:.2e} (<= 1e-6), max row error {worst_row:.2e} (<= 1e-9), {secs:.1} s (< 30 s)"),
    );
    let c2 = outcome(
        worst_pot <= 1e-8,
        format!("max |col/b - exp(-g/tau)| = {worst_pot:.2e} (<= 1e-8)"),
    );
    (c1, c2)
}

fn criterion_3() -> Outcome {
    let mut rng = RngState::new(77);
    let spec = two_mode(0.1).unwrap();
    let mut worst: f64 = 0.0;
    let mut checked = 0usize;
    for _ in 0..100 {
        let b = [8, 16, 32, 64, 128, 256][rng.index(6)];
        let cfg = UotConfig {
            eps: [0.05, 0.1, 0.5][rng.index(3)],
            tau: [0.5, 1.0, 2.0][rng.index(3)],
            ..UotConfig::default()
        };
        let x0 = uot_rfm::numkit::gaussian_sample(&mut rng, b, 2);
        let x1 = sample_gmm(&spec, b, &mut rng).x;
        let out = sinkhorn_unbalanced(&cost_matrix(&x0, &x1).unwrap(), &uniform(b), &uniform(b), &cfg).unwrap();
        let scores = majority_scores(&out.plan).unwrap();
        for (s, col) in scores.as_slice().iter().zip(out.plan.col_marginal()) {
            if *s >= 1e-3 {
                worst = worst.max((col / s - 1.0 / b as f64).abs());
                checked += 1;
            }
        }
    }
    outcome(
        worst <= 1e-9,
        format!("max |col/s - 1/B| = {worst:.2e} over {checked} unclamped targets (<= 1e-9)"),
    )
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

fn criterion_4() -> Outcome {
    let mut rng = RngState::new(16);
    let mut worst_rel: f64 = 0.0;
    for _ in 0..10 {
        let x0 = uot_rfm::numkit::gaussian_sample(&mut rng, 16, 2);
        let x1 = uot_rfm::numkit::gaussian_sample(&mut rng, 16, 2).map(|v| v + 1.0);
        let c = cost_matrix(&x0, &x1).unwrap();
        let w = uniform(16);
        let cfg = UotConfig {
            eps: 1e-3,
            tau: 1e3,
            source_fixed: true,
            max_iter: 1_000_000,
            tol: 1e-9,
        };
        let sk = sinkhorn_unbalanced(&c, &w, &w, &cfg).unwrap();
        let exact = emd_exact(&c, &w, &w).unwrap().cost(&c);
        worst_rel = worst_rel.max((sk.plan.cost(&c) - exact).abs() / exact);
    }
    let perms = permutations(6);
    let mut worst_brute: f64 = 0.0;
    for _ in 0..20 {
        let x0 = uot_rfm::numkit::gaussian_sample(&mut rng, 6, 2);
        let x1 = uot_rfm::numkit::gaussian_sample(&mut rng, 6, 2);
        let c = cost_matrix(&x0, &x1).unwrap();
        let best = perms
            .iter()
            .map(|p| p.iter().enumerate().map(|(i, &j)| c.get(i, j)).sum::<f64>() / 6.0)
            .fold(f64::INFINITY, f64::min);
        let w = uniform(6);
        worst_brute = worst_brute.max((emd_exact(&c, &w, &w).unwrap().cost(&c) - best).abs());
    }
    outcome(
        worst_rel <= 0.01 && worst_brute <= 1e-12 && perms.len() == 720,
        format!("max relative cost gap {worst_rel:.2e} (<= 1%), emd vs 720-permutation search {worst_brute:.1e}"),
    )
}

fn criterion_5() -> Outcome {
    let started = Instant::now();
    let spec = two_mode(0.1).unwrap();
    let cfg = UotConfig {
        tau: 1.0,
        tol: 1e-7,
        ..UotConfig::default()
    };
    let mut sum = [0.0; 2];
    let mut count = [0usize; 2];
    let mut rng = RngState::new(5);
    for _ in 0..100 {
        let x0 = uot_rfm::numkit::gaussian_sample(&mut rng, 256, 2);
        let batch = sample_gmm(&spec, 256, &mut rng);
        let out =
            sinkhorn_unbalanced(&cost_matrix(&x0, &batch.x).unwrap(), &uniform(256), &uniform(256), &cfg).unwrap();
        let s = majority_scores(&out.plan).unwrap();
        for (v, &l) in s.as_slice().iter().zip(&batch.labels) {
            sum[l] += v;
            count[l] += 1;
        }
    }
    let (major, minor) = (sum[0] / count[0] as f64, sum[1] / count[1] as f64);
    let secs = started.elapsed().as_secs_f64();
    outcome(
        major >= 1.2 * minor && secs < 10.0,
        format!(
            "mean score dominant {major:.4}, minority {minor:.4}, ratio {:.3} (>= 1.2), {secs:.1} s (< 10 s)",
            major / minor
        ),
    )
}

// ---------------------------------------------------------------- end to end

struct Run {
    summary: EvalSummary,
    seconds: f64,
    dir: PathBuf,
}

fn base_config(preset: &str, dir: PathBuf) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(DatasetSource::Preset(preset.into()));
    cfg.output_dir = dir;
    cfg
}

/// Train and evaluate one configuration through the experiment pipeline.
fn run_cell(cfg: &ExperimentConfig) -> Run {
    let started = Instant::now();
    run_train(cfg).unwrap();
    let (summary, _) = run_eval(cfg, None).unwrap();
    Run {
        summary,
        seconds: started.elapsed().as_secs_f64(),
        dir: cfg.output_dir.clone(),
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

const SEEDS: [u64; 3] = [0, 1, 2];

fn criterion_6() -> Outcome {
    let variants: [(&str, Coupling, f64); 4] = [
        ("uot_cfm", Coupling::UotCfm, 0.0),
        ("uot_rfm_k1", Coupling::UotRfm, 1.0),
        ("uot_rfm_k2", Coupling::UotRfm, 2.0),
        ("uot_rfm_k4", Coupling::UotRfm, 4.0),
    ];
    let mut fractions = Vec::new();
    let mut slowest: f64 = 0.0;
    for (name, coupling, k) in variants {
        let mut per_seed = Vec::new();
        for seed in SEEDS {
            let mut cfg =
                base_config("two_mode_0.1", root_dir().join(format!("two_mode/{name}_seed{seed}"))).with_seed(seed);
            cfg.train.coupling = coupling;
            cfg.train.k = k;
            cfg.eval.n_gen = 10_000;
            cfg.eval.prf = false;
            cfg.eval.bpd = false;
            cfg.eval.score_batches = 0;
            let run = run_cell(&cfg);
            log(&format!(
                "two-mode {name} seed {seed}: minority fraction {:.4}, {:.0} s",
                run.summary.tail_fraction, run.seconds
            ));
            slowest = slowest.max(run.seconds);
            per_seed.push(run.summary.tail_fraction);
        }
        fractions.push(mean(&per_seed));
    }
    let monotone = fractions.windows(2).all(|w| w[1] >= w[0]);
    let pass = fractions[0] < 0.08 && (0.07..=0.13).contains(&fractions[1]) && monotone && slowest < 600.0;
    outcome(
        pass,
        format!(
            "minority fraction k=0 (UOT-CFM) {:.4} (< 0.08), k=1 {:.4} (in [0.07, 0.13]), k=2 {:.4}, k=4 {:.4}, non-decreasing: {monotone}; slowest run {slowest:.0} s (< 600 s)",
            fractions[0], fractions[1], fractions[2], fractions[3]
        ),
    )
}

struct RingResults {
    icfm: Vec<Run>,
    /// Indexed like `RING_KS`.
    rfm: Vec<Vec<Run>>,
}

const RING_KS: [f64; 3] = [1.0, 2.0, 4.0];

fn ring_config(name: &str, seed: u64) -> ExperimentConfig {
    let mut cfg = base_config("ring5_0.1", root_dir().join(format!("ring5/{name}_seed{seed}"))).with_seed(seed);
    cfg.eval.n_gen = 5_000;
    cfg.eval.n_real = 5_000;
    cfg.eval.knn_k = 5;
    cfg.eval.score_batches = 0;
    cfg
}

fn ring_runs() -> RingResults {
    let report = |name: &str, seed: u64, r: &Run| {
        let s = &r.summary;
        let prf = s.prf.unwrap();
        log(&format!(
            "ring5 {name} seed {seed}: mean |NCRE| {:.4}, recall {:.4}, F1 {:.4}, tail BPD {:.4}, {:.0} s",
            s.ncre.as_ref().unwrap().mean_abs,
            prf.recall,
            prf.f1,
            s.tail_bpd().unwrap(),
            r.seconds
        ));
    };
    let icfm = SEEDS
        .iter()
        .map(|&seed| {
            let mut cfg = ring_config("icfm", seed);
            cfg.train.coupling = Coupling::Independent;
            let r = run_cell(&cfg);
            report("I-CFM", seed, &r);
            r
        })
        .collect();
    let rfm = RING_KS
        .iter()
        .map(|&k| {
            SEEDS
                .iter()
                .map(|&seed| {
                    let mut cfg = ring_config(&format!("uot_rfm_k{k}"), seed);
                    cfg.train.coupling = Coupling::UotRfm;
                    cfg.train.uot.tau = 1.0;
                    cfg.train.k = k;
                    let r = run_cell(&cfg);
                    report(&format!("UOT-RFM k={k}"), seed, &r);
                    r
                })
                .collect()
        })
        .collect();
    RingResults { icfm, rfm }
}

fn seed_mean(runs: &[Run], f: impl Fn(&EvalSummary) -> f64) -> f64 {
    mean(&runs.iter().map(|r| f(&r.summary)).collect::<Vec<_>>())
}

fn ncre_of(s: &EvalSummary) -> f64 {
    s.ncre.as_ref().unwrap().mean_abs
}

/// Index into `RING_KS` with the lowest seed-averaged mean |NCRE|.
fn tuned_k(ring: &RingResults) -> usize {
    (0..RING_KS.len())
        .min_by(|&a, &b| seed_mean(&ring.rfm[a], ncre_of).total_cmp(&seed_mean(&ring.rfm[b], ncre_of)))
        .unwrap()
}

fn criterion_7(ring: &RingResults) -> Outcome {
    let icfm = seed_mean(&ring.icfm, ncre_of);
    let per_k: Vec<f64> = ring.rfm.iter().map(|runs| seed_mean(runs, ncre_of)).collect();
    let best = tuned_k(ring);
    outcome(
        per_k[best] <= icfm - 0.05,
        format!(
            "mean |NCRE| I-CFM {icfm:.4}; UOT-RFM k=1 {:.4}, k=2 {:.4}, k=4 {:.4}; tuned k={} margin {:.4} (>= 0.05)",
            per_k[0],
            per_k[1],
            per_k[2],
            RING_KS[best],
            icfm - per_k[best]
        ),
    )
}

fn criterion_8(ring: &RingResults) -> Outcome {
    let best = &ring.rfm[tuned_k(ring)];
    let recall = |s: &EvalSummary| s.prf.unwrap().recall;
    let f1 = |s: &EvalSummary| s.prf.unwrap().f1;
    let (ri, rr) = (seed_mean(&ring.icfm, recall), seed_mean(best, recall));
    let (fi, fr) = (seed_mean(&ring.icfm, f1), seed_mean(best, f1));
    outcome(
        rr >= ri && fr >= fi - 0.02,
        format!(
            "recall UOT-RFM {rr:.4} vs I-CFM {ri:.4}; F1 UOT-RFM {fr:.4} vs I-CFM {fi:.4} (drop <= 0.02); k={}",
            RING_KS[tuned_k(ring)]
        ),
    )
}

fn criterion_10(ring: &RingResults) -> Outcome {
    let best = &ring.rfm[tuned_k(ring)];
    let tail = |s: &EvalSummary| s.tail_bpd().unwrap();
    let (bi, br) = (seed_mean(&ring.icfm, tail), seed_mean(best, tail));
    outcome(
        br <= bi,
        format!(
            "tail-class BPD UOT-RFM {br:.4} vs I-CFM {bi:.4}; k={}",
            RING_KS[tuned_k(ring)]
        ),
    )
}

// ---------------------------------------------------------------- correctness

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// `exp(M)` by scaling and squaring of a truncated Taylor series.
fn expm(m: &Mat) -> Mat {
    let s = 8;
    let scaled = m.map(|v| v / f64::from(1 << s));
    let n = m.rows();
    let mut result = Mat::identity(n);
    let mut term = Mat::identity(n);
    for k in 1..25 {
        term = term.matmul(&scaled).unwrap().map(|v| v / k as f64);
        for (r, t) in result.as_mut_slice().iter_mut().zip(term.as_slice()) {
            *r += t;
        }
    }
    for _ in 0..s {
        result = result.matmul(&result).unwrap();
    }
    result
}

fn criterion_9() -> Outcome {
    let mut rng = RngState::new(9);
    // loss gradients against central differences
    let mut worst_grad: f64 = 0.0;
    for tuple in 0..20 {
        let cfg = MlpConfig {
            hidden: vec![24, 24],
            ..MlpConfig::default()
        };
        let mut net = MlpVectorField::new(2, cfg, &mut RngState::new(100 + tuple)).unwrap();
        let samples: Vec<PathSample> = (0..4)
            .map(|_| PathSample {
                t: rng.uniform(),
                x_t: vec![2.0 * rng.normal(), 2.0 * rng.normal()],
                u_target: vec![rng.normal(), rng.normal()],
            })
            .collect();
        let batch = PathBatch::from_samples(&samples).unwrap();
        let weights: Vec<f64> = (0..4).map(|_| 0.5 + rng.uniform()).collect();
        let (_, grad) = batch_loss(&net, &batch, &weights).unwrap();
        let h = 1e-5;
        for (p, &g) in grad.iter().enumerate() {
            let orig = net.params()[p];
            net.params_mut()[p] = orig + h;
            let lp = batch_loss(&net, &batch, &weights).unwrap().0.weighted_loss;
            net.params_mut()[p] = orig - h;
            let lm = batch_loss(&net, &batch, &weights).unwrap().0.weighted_loss;
            net.params_mut()[p] = orig;
            worst_grad = worst_grad.max(rel_err((lp - lm) / (2.0 * h), g));
        }
    }
    // linear field against the matrix exponential
    let mut worst_ode: f64 = 0.0;
    for _ in 0..20 {
        let a = Mat::from_vec(2, 2, (0..4).map(|_| rng.normal()).collect()).unwrap();
        let x0 = [rng.normal(), rng.normal()];
        let e = expm(&a);
        let got = integrate(&AffineField::linear(a), &x0, 0.0, 1.0, &SolverConfig::likelihood()).unwrap();
        for k in 0..2 {
            worst_ode = worst_ode.max((got[k] - (e[(k, 0)] * x0[0] + e[(k, 1)] * x0[1])).abs());
        }
    }
    let zero = MlpVectorField::zeros(2, MlpConfig::default()).unwrap();
    let bpd = nll(&zero, &[0.0, 0.0], &SolverConfig::likelihood()).unwrap().bpd;
    let bpd_err = (bpd - (2.0 * PI).ln() / (2.0 * LN_2)).abs();
    outcome(
        worst_grad < 1e-4 && worst_ode < 1e-6 && bpd_err <= 1e-6,
        format!("gradient max rel err {worst_grad:.2e} (< 1e-4), linear ODE err {worst_ode:.2e} (< 1e-6), zero-field BPD {bpd:.9} err {bpd_err:.1e} (<= 1e-6)"),
    )
}

fn csv_files(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.is_dir() {
            out.extend(csv_files(&p));
        } else if p.extension().is_some_and(|e| e == "csv") {
            out.push(p);
        }
    }
    out.sort();
    out
}

fn criterion_11(first: &Run) -> Outcome {
    let mut cfg = ring_config("icfm", 0);
    cfg.train.coupling = Coupling::Independent;
    cfg.output_dir = root_dir().join("rerun/icfm_seed0");
    let _ = std::fs::remove_dir_all(&cfg.output_dir);
    let again = run_cell(&cfg);
    let a = csv_files(&first.dir);
    let b = csv_files(&again.dir);
    let rel = |d: &Path, v: &[PathBuf]| {
        v.iter()
            .map(|p| p.strip_prefix(d).unwrap().to_path_buf())
            .collect::<Vec<_>>()
    };
    let same_set = rel(&first.dir, &a) == rel(&again.dir, &b);
    let differing: Vec<String> = a
        .iter()
        .zip(&b)
        .filter(|(x, y)| std::fs::read(x).unwrap() != std::fs::read(y).unwrap())
        .map(|(x, _)| x.strip_prefix(&first.dir).unwrap().display().to_string())
        .collect();
    outcome(
        same_set && differing.is_empty() && !a.is_empty(),
        format!(
            "{} CSV artifacts compared after a full rerun; differing: {:?}",
            a.len(),
            differing
        ),
    )
}

// ---------------------------------------------------------------- driver

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(o) => o,
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        }
    }
}

fn main() {
    let _ = std::fs::create_dir_all(root_dir());
    let started = Instant::now();
    let mut results: Vec<(u32, &str, Outcome, f64)> = Vec::new();
    let mut record = |id: u32, name: &'static str, o: Outcome, secs: f64| {
        println!(
            "criterion {id:>2} [{}] {name}: {} ({secs:.1} s)",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        let _ = std::io::stdout().flush();
        results.push((id, name, o, secs));
    };

    let t = Instant::now();
    let (c1, c2) = match catch_unwind(criterion_1_and_2) {
        Ok(pair) => pair,
        Err(_) => (outcome(false, "panicked".into()), outcome(false, "panicked".into())),
    };
    let secs = t.elapsed().as_secs_f64();
    record(1, "transport conformance", c1, secs);
    record(2, "potential relation", c2, secs);
    let t = Instant::now();
    record(3, "score identity", guarded(criterion_3), t.elapsed().as_secs_f64());
    let t = Instant::now();
    record(4, "limit consistency", guarded(criterion_4), t.elapsed().as_secs_f64());
    let t = Instant::now();
    record(
        5,
        "majority-score ordering",
        guarded(criterion_5),
        t.elapsed().as_secs_f64(),
    );
    let t = Instant::now();
    record(
        9,
        "gradient and solver correctness",
        guarded(criterion_9),
        t.elapsed().as_secs_f64(),
    );
    let t = Instant::now();
    record(
        6,
        "two-mode end to end",
        guarded(criterion_6),
        t.elapsed().as_secs_f64(),
    );

    let t = Instant::now();
    match catch_unwind(ring_runs) {
        Ok(ring) => {
            let secs = t.elapsed().as_secs_f64();
            record(7, "NCRE improvement", guarded(|| criterion_7(&ring)), secs);
            record(8, "coverage", guarded(|| criterion_8(&ring)), secs);
            record(10, "tail-class likelihood", guarded(|| criterion_10(&ring)), secs);
            let t = Instant::now();
            record(
                11,
                "reproducibility",
                guarded(|| criterion_11(&ring.icfm[0])),
                t.elapsed().as_secs_f64(),
            );
        }
        Err(_) => {
            let secs = t.elapsed().as_secs_f64();
            for (id, name) in [
                (7, "NCRE improvement"),
                (8, "coverage"),
                (10, "tail-class likelihood"),
                (11, "reproducibility"),
            ] {
                record(id, name, outcome(false, "ring benchmark runs panicked".into()), secs);
            }
        }
    }

    results.sort_by_key(|r| r.0);
    let failed: Vec<u32> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!();
    println!("acceptance summary ({:.0} s total):", started.elapsed().as_secs_f64());
    for (id, name, o, _) in &results {
        println!("  {id:>2} {:<32} {}", name, if o.pass { "PASS" } else { "FAIL" });
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
