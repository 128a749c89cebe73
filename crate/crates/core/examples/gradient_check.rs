//! Hand-written backpropagation against central finite differences.
//!
//! ```bash
//! cargo run --release --example gradient_check
//! ```

use uot_rfm::flowmatch::{batch_loss, sample_path, PathBatch};
use uot_rfm::model::{MlpConfig, MlpVectorField};
use uot_rfm::numkit::gaussian_sample;
use uot_rfm::{Result, RngState};

fn main() -> Result<()> {
    let rng = &mut RngState::new(7);
    let net = MlpVectorField::new(
        2,
        MlpConfig {
            hidden: vec![16, 16],
            ..MlpConfig::default()
        },
        rng,
    )?;
    let x0 = gaussian_sample(rng, 32, 2);
    let x1 = gaussian_sample(rng, 32, 2).map(|v| 3.0 * v);
    let samples: Vec<_> = (0..32)
        .map(|i| {
            let t = rng.uniform();
            sample_path(x0.row(i), x1.row(i), t, 0.05, rng)
        })
        .collect();
    let batch = PathBatch::from_samples(&samples)?;
    let weights: Vec<f64> = (0..32).map(|_| 0.5 + rng.uniform()).collect();

    let (_, grad) = batch_loss(&net, &batch, &weights)?;
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for p in (0..net.num_params()).step_by(net.num_params() / 25) {
        let mut plus = net.clone();
        plus.params_mut()[p] += h;
        let mut minus = net.clone();
        minus.params_mut()[p] -= h;
        let fd = (batch_loss(&plus, &batch, &weights)?.0.weighted_loss
            - batch_loss(&minus, &batch, &weights)?.0.weighted_loss)
            / (2.0 * h);
        let rel = (fd - grad[p]).abs() / fd.abs().max(grad[p].abs()).max(1e-8);
        worst = worst.max(rel);
        println!("param {p:>4}: analytic {:>12.6e}  finite diff {fd:>12.6e}", grad[p]);
    }
    println!("{} parameters, worst relative error {worst:.2e}", net.num_params());

    let j = net.jacobian_x(0.3, &[0.5, -1.0])?;
    println!("jacobian at t=0.3: {:.4?} / {:.4?}", j.row(0), j.row(1));
    Ok(())
}
