//! Mini-batch transport and majority scores.
//!
//! Solves balanced and source-fixed unbalanced problems between a Gaussian
//! source batch and a long-tailed target batch, then averages the majority
//! score `s_j = B·π₁_j` per true class. Two geometries are shown: the
//! symmetric two-mode benchmark, and one where the minority mode sits far
//! from the source.
//!
//! ```bash
//! cargo run --release --example transport_scores
//! ```

use uot_rfm::datasets::{preset, sample_gmm, source_sample, GmmSpec, Mode};
use uot_rfm::transport::{cost_matrix, emd_exact, majority_scores, sinkhorn_unbalanced, uniform, UotConfig};
use uot_rfm::{Result, RngState};

fn class_means(spec: &GmmSpec, tau: f64, batches: u64) -> Result<Vec<f64>> {
    let b = 256;
    let cfg = UotConfig {
        tau,
        tol: 1e-7,
        ..UotConfig::default()
    };
    let mut sum = vec![0.0; spec.num_classes()];
    let mut count = vec![0usize; spec.num_classes()];
    let root = RngState::new(0);
    for k in 0..batches {
        let rng = &mut root.fork_indexed("batch", k);
        let x0 = source_sample(b, spec.d, rng);
        let target = sample_gmm(spec, b, rng);
        let out = sinkhorn_unbalanced(&cost_matrix(&x0, &target.x)?, &uniform(b), &uniform(b), &cfg)?;
        for (&label, &s) in target.labels.iter().zip(majority_scores(&out.plan)?.as_slice()) {
            sum[label] += s;
            count[label] += 1;
        }
    }
    Ok(sum.iter().zip(&count).map(|(s, &c)| s / c.max(1) as f64).collect())
}

fn main() -> Result<()> {
    // one small instance, balanced vs unbalanced
    let rng = &mut RngState::new(1);
    let spec = preset("two_mode_0.1")?;
    let x0 = source_sample(8, 2, rng);
    let x1 = sample_gmm(&spec, 8, rng);
    let c = cost_matrix(&x0, &x1.x)?;
    let ot = emd_exact(&c, &uniform(8), &uniform(8))?;
    let uot = sinkhorn_unbalanced(&c, &uniform(8), &uniform(8), &UotConfig::default())?;
    println!("8-point batch, target labels {:?}", x1.labels);
    println!("  exact OT cost          {:.4}", ot.cost(&c));
    println!(
        "  UOT cost (eps 0.05)    {:.4} after {} iterations",
        uot.plan.cost(&c),
        uot.iterations
    );
    println!(
        "  UOT column masses x B  {:.3?}",
        majority_scores(&uot.plan)?.as_slice()
    );

    println!("\nmean majority score per class (B=256, 20 batches)");
    for tau in [0.5, 1.0, 4.0] {
        println!("  two_mode_0.1   tau {tau:<4} {:.3?}", class_means(&spec, tau, 20)?);
    }
    let offset = GmmSpec::new(
        vec![
            Mode {
                mean: vec![-2.0, 0.0],
                sigma: 0.7,
            },
            Mode {
                mean: vec![6.0, 0.0],
                sigma: 0.7,
            },
        ],
        vec![0.9, 0.1],
    )?;
    println!("  offset modes   tau 1    {:.3?}", class_means(&offset, 1.0, 20)?);
    for name in ["ring5_0.1", "ring8_0.01"] {
        println!("  {name:<14} tau 1    {:.3?}", class_means(&preset(name)?, 1.0, 20)?);
    }
    Ok(())
}
