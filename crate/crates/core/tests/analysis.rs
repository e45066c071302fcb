use arc_core::analysis::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn adversarial_approx_zero_base() {
    let f = AdversarialApprox::new(|_| 0.0, |_| 0.0, 0.1, 5.0, 0.0).unwrap();
    assert!(f.grid_sup_error(-1.0, 1.0, 10_000) <= 0.1);
    assert!((f.grad(0.0).abs() - 10.0).abs() < 1e-12);
}

#[test]
fn adversarial_approx_identity_base() {
    let f = AdversarialApprox::new(|x| x, |_| 1.0, 0.01, 3.0, 0.7).unwrap();
    assert!((f.grad(0.7) - f.base_grad(0.7) - 6.0).abs() < 1e-12);
}

#[test]
fn adversarial_approx_random_configurations() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..20 {
        let eps = rng.random_range(1e-3..1.0);
        let d = rng.random_range(0.1..100.0);
        let x0 = rng.random_range(-2.0..2.0);
        let (c1, c2) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let f = AdversarialApprox::new(move |x| c1 * x * x + (c2 * x).sin(), move |x| 2.0 * c1 * x + c2 * (c2 * x).cos(), eps, d, x0).unwrap();
        let n = 100_000;
        let sup = f.grid_sup_error(x0 - 1.0, x0 + 1.0, n);
        assert!(sup <= eps);
        // the grid spacing bounds how far the sampled max can fall below ε
        let spacing = 2.0 / (n - 1) as f64;
        assert!(sup >= eps * (1.0 - 0.5 * (f.b * spacing).powi(2)), "{sup} vs {eps}");
        assert!((f.grad(x0) - f.base_grad(x0) - 2.0 * d).abs() < 1e-9 * (1.0 + d));
    }
}

fn snr(s_r: f64, s_c: f64, s_rc: f64, snr_c: f64) -> SnrInputs {
    SnrInputs { s_r, s_c, s_rc, snr_c, snr_q: 1.0 }
}

#[test]
fn monte_carlo_matches_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let m = monte_carlo_snr(&snr(1.0, 1.0, 0.0, 1.0), 1_000_000, &mut rng).unwrap();
    assert!((m - 2.0).abs() <= 0.05, "{m}");
    let case3 = snr(1.0, 1.0, -0.75, 1.0);
    let m3 = monte_carlo_snr(&case3, 1_000_000, &mut rng).unwrap();
    assert!(m3 < 1.0);
    assert!((m3 - net_snr(&case3).unwrap()).abs() / net_snr(&case3).unwrap() < 0.05);
}

#[test]
fn zero_noise_snr_is_effectively_infinite() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    assert!(monte_carlo_snr(&snr(1.0, 1.0, 0.0, f64::INFINITY), 10_000, &mut rng).unwrap() > 1e6);
}

#[test]
fn monte_carlo_preconditions() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    assert!(monte_carlo_snr(&snr(1.0, 1.0, 0.0, 1.0), 9_999, &mut rng).is_err());
    assert!(monte_carlo_snr(&snr(1.0, 1.0, 2.0, 1.0), 10_000, &mut rng).is_err());
}

#[test]
fn grad_accuracy_is_reproducible_and_validated() {
    let config = GradAccuracyConfig {
        seeds: vec![0, 1, 2],
        epochs: vec![0, 2],
        n_train: 128,
        n_test: 64,
        hidden: vec![8, 8],
        ..Default::default()
    };
    let a = grad_accuracy_csv(&config);
    assert_eq!(a, grad_accuracy_csv(&config));
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("estimator,seed,epoch,value_mae,grad_mae\n"));
    assert_eq!(text.lines().count(), 1 + 3 * 2 * 2);
    let bad = GradAccuracyConfig { seeds: vec![0, 1], ..config };
    assert!(gradient_accuracy_experiment(&bad).is_err());
}

fn grad_accuracy_csv(config: &GradAccuracyConfig) -> Vec<u8> {
    let report = gradient_accuracy_experiment(config).unwrap();
    let mut buf = Vec::new();
    report.write_csv(&mut buf).unwrap();
    buf
}

#[test]
fn untrained_estimators_start_with_comparable_errors() {
    let config = GradAccuracyConfig { epochs: vec![0], ..Default::default() };
    let report = gradient_accuracy_experiment(&config).unwrap();
    let m = report.epoch_means()[0];
    println!("{m:?} range {}", report.value_range);
    // identical initial nets: the value errors differ only through r
    assert!(m.q_value_mae > 0.05 * report.value_range);
    assert!(m.rc_value_mae < 10.0 * m.q_value_mae && m.q_value_mae < 10.0 * m.rc_value_mae);
}
