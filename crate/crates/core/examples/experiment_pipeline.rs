//! The full config-driven pipeline behind the `uot-rfm` binary:
//! gen-data, train, eval, a small (τ, k) sweep and SVG plots.
//!
//! ```bash
//! cargo run --release --example experiment_pipeline -- [output_dir]
//! ```

use std::path::PathBuf;

use uot_rfm::experiment::{gen_data, run_eval, run_plot, run_sweep, run_train, DatasetSource, ExperimentConfig};
use uot_rfm::model::MlpConfig;
use uot_rfm::Result;

fn main() -> Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("uot-rfm-demo"));
    let mut cfg = ExperimentConfig::new(DatasetSource::Preset("ring5_0.1".into())).with_seed(3);
    cfg.output_dir = out.clone();
    cfg.n_train = 5000;
    cfg.n_test = 2000;
    cfg.train.batch_size = 128;
    cfg.train.iterations = 500;
    cfg.train.model = MlpConfig {
        hidden: vec![64, 64],
        ..MlpConfig::default()
    };
    cfg.eval.n_gen = 2000;
    cfg.eval.n_real = 2000;
    cfg.eval.bpd_per_class = 10;
    cfg.sweep.taus = vec![0.5, 2.0];
    cfg.sweep.ks = vec![1.0];
    println!("config hash {}", cfg.hash());

    for m in [gen_data(&cfg)?, run_train(&cfg)?] {
        println!(
            "{:<8} wrote {:?}",
            m.command,
            m.files.iter().map(|f| &f.path).collect::<Vec<_>>()
        );
    }
    let (summary, _) = run_eval(&cfg, None)?;
    for (metric, value) in summary.rows() {
        println!("  {metric:<20} {value:.4}");
    }
    let (rows, _) = run_sweep(&cfg)?;
    for r in &rows {
        match &r.outcome {
            Ok((s, loss)) => println!(
                "  sweep {:<18} tail share {:.3}, score variance {:.3}, loss {loss:.3}",
                r.cell, s.tail_fraction, s.score_variance
            ),
            Err(e) => println!("  sweep {:<18} failed: {e}", r.cell),
        }
    }
    let plots = run_plot(&cfg)?;
    println!("plots: {:?}", plots.files.iter().map(|f| &f.path).collect::<Vec<_>>());
    println!("artifacts in {}", out.display());
    Ok(())
}
