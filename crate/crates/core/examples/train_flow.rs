//! Flow matching training with each coupling.
//!
//! Trains a small vector field on the two-mode benchmark with the
//! independent, OT, UOT-CFM and UOT-RFM couplings and reports the final loss,
//! the Sinkhorn effort and the generated minority share.
//!
//! ```bash
//! cargo run --release --example train_flow -- [iterations]
//! ```

use uot_rfm::datasets::{preset, proxy_label, sample_gmm};
use uot_rfm::flowmatch::{train, Coupling, TrainConfig};
use uot_rfm::model::MlpConfig;
use uot_rfm::ode::{sample_model, SolverConfig};
use uot_rfm::{Result, RngState};

fn main() -> Result<()> {
    let iterations: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1500);
    let spec = preset("two_mode_0.1")?;
    let data = sample_gmm(&spec, 20_000, &mut RngState::new(0));

    for (coupling, k) in [
        (Coupling::Independent, 0.0),
        (Coupling::Ot, 0.0),
        (Coupling::UotCfm, 0.0),
        (Coupling::UotRfm, 1.0),
        (Coupling::UotRfm, 2.0),
    ] {
        let cfg = TrainConfig {
            coupling,
            k,
            batch_size: 128,
            iterations,
            model: MlpConfig {
                hidden: vec![64, 64],
                ..MlpConfig::default()
            },
            ..TrainConfig::default()
        };
        let started = std::time::Instant::now();
        let (net, log) = train(&cfg, &data.x, &RngState::new(1))?;
        let iters: usize = log.records.iter().map(|r| r.sinkhorn_iters).sum();
        let x = sample_model(&net, 2000, &SolverConfig::sampling(), &mut RngState::new(2))?;
        let minority = x.iter_rows().filter(|r| proxy_label(r, &spec) == 1).count() as f64 / 2000.0;
        println!(
            "{:<12} k={k}: loss {:.4}, mean Sinkhorn iters {:>5.1}, minority share {:.3}, {:.1} s",
            coupling.name(),
            log.tail_loss(100),
            iters as f64 / iterations.max(1) as f64,
            minority,
            started.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
