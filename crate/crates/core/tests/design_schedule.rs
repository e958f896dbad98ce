use mas_design::envs::supply_chain::SupplyChainEnv;
use mas_design::envs::synthetic::{SyntheticEnv, SyntheticParams};
use mas_design::{delta_at, eta_at, project, BoxDomain, DesignVector, Environment, ScheduleConfig, SeedTree};
use proptest::prelude::*;

fn unit_square_box() -> impl Strategy<Value = BoxDomain> {
    prop::collection::vec((-10.0..10.0f64, 0.0..5.0f64), 1..6).prop_map(|bounds| {
        let lower: Vec<f64> = bounds.iter().map(|b| b.0).collect();
        let upper: Vec<f64> = bounds.iter().map(|b| b.0 + b.1).collect();
        BoxDomain::new(lower, upper).unwrap()
    })
}

fn point_pair(dim: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (prop::collection::vec(-50.0..50.0f64, dim), prop::collection::vec(-50.0..50.0f64, dim))
}

fn norm(a: &DesignVector, b: &DesignVector) -> f64 {
    a.distance(b)
}

proptest! {
    #[test]
    fn projection_is_idempotent_and_nonexpansive(
        (domain, (x, y)) in unit_square_box().prop_flat_map(|d| {
            let n = d.dim();
            (Just(d), point_pair(n))
        })
    ) {
        let x = DesignVector::new(x).unwrap();
        let y = DesignVector::new(y).unwrap();
        let px = project(&x, &domain).unwrap();
        let py = project(&y, &domain).unwrap();
        prop_assert!(domain.contains(&px));
        prop_assert_eq!(project(&px, &domain).unwrap(), px.clone());
        prop_assert!(norm(&px, &py) <= norm(&x, &y) + 1e-12);
    }

    #[test]
    fn schedules_are_positive_and_strictly_decreasing(
        delta0 in 1e-3..1e3f64,
        alpha in 0.05..0.95f64,
        eta0 in 1e-3..1e3f64,
        beta in 0.05..1.0f64,
        k in 0u64..1_000_000,
    ) {
        let cfg = ScheduleConfig { delta0, alpha, eta0, beta, ..ScheduleConfig::default() };
        let (d0, d1) = (delta_at(&cfg, k), delta_at(&cfg, k + 1));
        let (e0, e1) = (eta_at(&cfg, k), eta_at(&cfg, k + 1));
        prop_assert!(d1 > 0.0 && e1 > 0.0);
        prop_assert!(d1 < d0 && e1 < e0);
    }

    #[test]
    fn stepsize_to_radius_ratio_shrinks_when_alpha_below_beta(
        alpha in 0.05..0.9f64,
        gap in 0.05..0.5f64,
    ) {
        let cfg = ScheduleConfig { delta0: 1.0, alpha, eta0: 1.0, beta: alpha + gap, ..ScheduleConfig::default() };
        let ratio = |k| eta_at(&cfg, k) / delta_at(&cfg, k);
        prop_assert!(ratio(100_000) < ratio(100));
    }
}

#[test]
fn schedule_reference_values() {
    let cfg = ScheduleConfig {
        delta0: 2.0,
        alpha: 0.5,
        eta0: 0.3,
        beta: 1.0,
        ..ScheduleConfig::default()
    };
    assert_eq!(delta_at(&cfg, 0), 2.0);
    assert!((delta_at(&cfg, 3) - 1.0).abs() < 1e-15);
    assert!((eta_at(&cfg, 2) - 0.1).abs() < 1e-15);
}

#[test]
fn replaying_a_step_with_the_same_seed_is_identical() {
    let chain = SupplyChainEnv::with_rules();
    let synthetic = SyntheticEnv::new(SyntheticParams::identity(3, 0.2, 0.7, 0.4)).unwrap();
    for seed in 0..20 {
        let tree = SeedTree::new(seed);
        let theta = DesignVector::new(vec![0.3, 1.2]).unwrap();
        let s0 = chain.initial_state(&mut tree.stream("init")).unwrap();
        let a = chain.step(&s0, &theta, &mut tree.stream("step")).unwrap();
        let b = chain.step(&s0, &theta, &mut tree.stream("step")).unwrap();
        assert_eq!(a, b);

        let theta = DesignVector::new(vec![0.1, 0.9, 0.4]).unwrap();
        let s0 = synthetic.initial_state(&mut tree.stream("init")).unwrap();
        let a = synthetic.step(&s0, &theta, &mut tree.stream("step")).unwrap();
        let b = synthetic.step(&s0, &theta, &mut tree.stream("step")).unwrap();
        assert_eq!(a.0, b.0);
    }
}

#[test]
fn box_rejects_inverted_or_nonfinite_bounds() {
    assert!(BoxDomain::new(vec![1.0], vec![0.0]).is_err());
    assert!(BoxDomain::new(vec![0.0, f64::NAN], vec![1.0, 1.0]).is_err());
    assert!(BoxDomain::new(vec![0.0], vec![1.0, 2.0]).is_err());
    let domain = BoxDomain::cube(2, 0.0, 1.0).unwrap();
    assert!(project(&DesignVector::zeros(3), &domain).is_err());
}
