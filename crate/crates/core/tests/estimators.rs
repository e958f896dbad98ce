use mas_design::estimators::{
    advance_weight, apply_guided_sqrt, gp_estimate, guided_covariance, guided_sqrt, sample_guided, sample_isotropic,
    two_point_estimate, GuidedConfig,
};
use mas_design::SeedTree;
use proptest::prelude::*;

fn guided(weight: f64, surrogate: Vec<f64>) -> GuidedConfig {
    GuidedConfig {
        weight,
        surrogate,
        rho: 0.9,
    }
}

proptest! {
    #[test]
    fn covariance_is_symmetric_psd_with_unit_trace(
        w in 0.0..=1.0f64,
        phi in prop::collection::vec(-5.0..5.0f64, 1..8),
    ) {
        prop_assume!(phi.iter().any(|v| v.abs() > 1e-3));
        let d = phi.len();
        let sigma = guided_covariance(&guided(w, phi.clone()), d);
        prop_assert!((sigma.trace() - 1.0).abs() < 1e-12);
        prop_assert!((&sigma - sigma.transpose()).amax() < 1e-15);
        let eig = sigma.clone().symmetric_eigen().eigenvalues;
        prop_assert!(eig.iter().all(|&l| l >= -1e-12));
        let root = guided_sqrt(&guided(w, phi.clone()), d);
        prop_assert!((&root * &root - &sigma).amax() < 1e-12);
        let z: Vec<f64> = (0..d).map(|i| (i as f64 * 0.7).sin()).collect();
        let fast = apply_guided_sqrt(&guided(w, phi), &z);
        let dense = &root * nalgebra::DVector::from_vec(z);
        for i in 0..d {
            prop_assert!((fast[i] - dense[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn weight_update_moves_monotonically_to_one(w in 0.0..=1.0f64, rho in 0.0..1.0f64) {
        let next = advance_weight(&GuidedConfig { weight: w, surrogate: vec![1.0], rho });
        prop_assert!(next >= w - 1e-15 && next <= 1.0);
        prop_assert!((1.0 - next - rho * (1.0 - w)).abs() < 1e-15);
    }

    #[test]
    fn two_point_is_linear_in_the_difference(
        u in prop::collection::vec(-3.0..3.0f64, 1..6),
        delta in 1e-3..10.0f64,
        fp in -100.0..100.0f64,
        fm in -100.0..100.0f64,
    ) {
        let d = u.len();
        let g = two_point_estimate(d, &u, delta, fp, fm);
        let swapped = two_point_estimate(d, &u, delta, fm, fp);
        for i in 0..d {
            prop_assert!((g.g[i] + swapped.g[i]).abs() < 1e-9);
            prop_assert!((g.g[i] - d as f64 * (fp - fm) / (2.0 * delta) * u[i]).abs() < 1e-9);
        }
        prop_assert_eq!(g.evals_used, 2);
    }
}

#[test]
fn full_weight_guided_estimate_is_the_basic_estimate_over_d() {
    let d = 4;
    let cfg = guided(1.0, vec![1.0, -2.0, 0.5, 3.0]);
    let mut rng = SeedTree::new(9).stream("w1");
    for _ in 0..100 {
        let u = sample_guided(&cfg, d, &mut rng);
        let gp = gp_estimate(&u, 0.2, 3.0, 1.0);
        let basic = two_point_estimate(d, &u, 0.2, 3.0, 1.0);
        for i in 0..d {
            assert!((gp.g[i] - basic.g[i] / d as f64).abs() < 1e-12);
        }
    }
}

#[test]
fn zero_surrogate_falls_back_to_isotropic() {
    let sigma = guided_covariance(&guided(0.2, vec![0.0; 3]), 3);
    assert!((sigma - nalgebra::DMatrix::<f64>::identity(3, 3) / 3.0).amax() < 1e-15);
}

/// `f(θ) = ‖θ‖²`, deterministic.
fn sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn shifted(x: &[f64], u: &[f64], s: f64) -> Vec<f64> {
    x.iter().zip(u).map(|(a, b)| a + s * b).collect()
}

#[test]
fn guided_mean_is_a_descent_direction() {
    let d = 6;
    let x: Vec<f64> = (0..d).map(|i| 0.3 * i as f64 - 0.5).collect();
    let grad: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
    let mut rng = SeedTree::new(4).stream("descent");
    for (w, phi) in [(0.1, vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]), (0.5, grad.clone()), (0.9, vec![-1.0; d])] {
        let cfg = guided(w, phi);
        let n = 20_000;
        let mut mean = vec![0.0; d];
        for _ in 0..n {
            let u = sample_guided(&cfg, d, &mut rng);
            let g = gp_estimate(&u, 0.05, sq(&shifted(&x, &u, 0.05)), sq(&shifted(&x, &u, -0.05)));
            for i in 0..d {
                mean[i] += g.g[i] / n as f64;
            }
        }
        let inner: f64 = mean.iter().zip(&grad).map(|(a, b)| a * b).sum();
        assert!(inner > 0.0, "w = {w}: ⟨mean, ∇f⟩ = {inner}");
    }
}

/// Raw trace variance grows with the mean as mass moves onto `φ = ∇f`, so
/// the comparison is made relative to `‖E G‖²`: `d + 1` at `w = 1` and `2`
/// at `w = 0`.
#[test]
fn guided_relative_variance_falls_as_weight_shifts_to_the_surrogate() {
    let d = 10;
    let x = vec![1.0; d];
    let phi: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
    let delta = 0.01;
    let mut rng = SeedTree::new(12).stream("variance-ordering");
    let mut variances = Vec::new();
    for w in [1.0, 0.6, 0.2] {
        let cfg = guided(w, phi.clone());
        let n = 100_000;
        let mut sum = vec![0.0; d];
        let mut sum_sq = vec![0.0; d];
        for _ in 0..n {
            let u = sample_guided(&cfg, d, &mut rng);
            let g = gp_estimate(&u, delta, sq(&shifted(&x, &u, delta)), sq(&shifted(&x, &u, -delta)));
            for i in 0..d {
                sum[i] += g.g[i];
                sum_sq[i] += g.g[i] * g.g[i];
            }
        }
        let tv: f64 = (0..d).map(|i| sum_sq[i] / n as f64 - (sum[i] / n as f64).powi(2)).sum();
        let mean_sq: f64 = sum.iter().map(|s| (s / n as f64).powi(2)).sum();
        variances.push(tv / mean_sq);
    }
    assert!(variances[0] > variances[1] && variances[1] > variances[2], "{variances:?}");
    assert!((variances[0] - (d as f64 + 1.0)).abs() < 0.3, "{variances:?}");
}

#[test]
fn isotropic_draws_have_covariance_identity_over_d() {
    let d = 4;
    let mut rng = SeedTree::new(1).stream("iso");
    let n = 200_000;
    let mut diag = vec![0.0; d];
    for _ in 0..n {
        let u = sample_isotropic(d, &mut rng);
        for i in 0..d {
            diag[i] += u[i] * u[i] / n as f64;
        }
    }
    for v in diag {
        assert!((v - 0.25).abs() < 0.005, "{v}");
    }
}
