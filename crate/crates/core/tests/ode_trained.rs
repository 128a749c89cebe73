use uot_rfm::datasets::{preset, sample_gmm, LabeledSet};
use uot_rfm::flowmatch::{train, Coupling, TrainConfig};
use uot_rfm::metrics::classwise_bpd;
use uot_rfm::model::{MlpConfig, MlpVectorField};
use uot_rfm::ode::{integrate_batch, Method, SolverConfig};
use uot_rfm::{Mat, RngState};

fn trained(iterations: usize) -> (MlpVectorField, LabeledSet) {
    let spec = preset("two_mode").unwrap();
    let data = sample_gmm(&spec, 4000, &mut RngState::new(1));
    let cfg = TrainConfig {
        coupling: Coupling::UotRfm,
        batch_size: 128,
        iterations,
        model: MlpConfig {
            hidden: vec![32, 32],
            ..MlpConfig::default()
        },
        ..TrainConfig::default()
    };
    let (net, _) = train(&cfg, &data.x, &RngState::new(2)).unwrap();
    (net, sample_gmm(&spec, 40, &mut RngState::new(3)))
}

/// Local error control bounds the global error by roughly `atol` per
/// accepted step; the 1000-frequency time embedding needs hundreds of them.
#[test]
fn forward_then_backward_returns_the_start() {
    let (net, _) = trained(400);
    let cfg = SolverConfig::likelihood();
    let x0 = uot_rfm::numkit::gaussian_sample(&mut RngState::new(9), 64, 2);
    let fwd = integrate_batch(&net, &x0, 0.0, 1.0, &cfg).unwrap();
    let back = integrate_batch(&net, &fwd.x, 1.0, 0.0, &cfg).unwrap();
    for i in 0..x0.rows() {
        let err = x0
            .row(i)
            .iter()
            .zip(back.x.row(i))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let steps = fwd.steps[i] + back.steps[i];
        assert!(err < cfg.atol * steps as f64, "row {i}: {err:.3e} after {steps} steps");
    }
}

#[test]
fn fixed_step_methods_agree_with_adaptive_on_a_trained_net() {
    let (net, _) = trained(200);
    let x0 = Mat::from_rows(&[[0.3, -1.0], [1.5, 0.2], [-0.7, 0.9]]).unwrap();
    let reference = integrate_batch(&net, &x0, 0.0, 1.0, &SolverConfig::likelihood())
        .unwrap()
        .x;
    let rk4 = integrate_batch(&net, &x0, 0.0, 1.0, &SolverConfig::fixed(Method::Rk4, 4000))
        .unwrap()
        .x;
    for (a, b) in reference.as_slice().iter().zip(rk4.as_slice()) {
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }
}

#[test]
fn held_out_bpd_is_finite_and_improves_with_training() {
    let solver = SolverConfig {
        atol: 1e-6,
        rtol: 1e-6,
        ..SolverConfig::likelihood()
    };
    let mut means = Vec::new();
    for iterations in [0, 600] {
        let (net, test) = trained(iterations);
        let r = classwise_bpd(&net, &test, 2, &solver).unwrap();
        assert!(r.overall_mean.is_finite());
        means.push(r.overall_mean);
    }
    assert!(means[1] < means[0], "{means:?}");
}
