use std::sync::Arc;

use mas_design::agents::{extract, ActionSchema, LlmBackend, ScriptedTransport, TransportConfig};
use mas_design::baselines::{
    bo_run, llm_designer_run_from, llm_solver_run, BoConfig, GaussianProcess, LlmBaselineConfig, SolverVariant,
};
use mas_design::envs::supply_chain::SupplyChainEnv;
use mas_design::envs::synthetic::{SyntheticEnv, SyntheticParams};
use mas_design::{DesignVector, Environment, SeedTree};
use proptest::prelude::*;

fn backend(replies: Vec<String>) -> (LlmBackend, Arc<ScriptedTransport>) {
    let t = Arc::new(ScriptedTransport::texts(replies));
    let cfg = TransportConfig {
        max_retries: 0,
        parse_retries: 0,
        ..TransportConfig::default()
    };
    (LlmBackend::new(cfg, t.clone()), t)
}

fn fenced(pairs: &[(&str, f64)]) -> String {
    let body: Vec<String> = pairs.iter().map(|(k, v)| format!("\"{k}\": {v:?}")).collect();
    format!("Here is my choice.\n```json\n{{{}}}\n```", body.join(", "))
}

proptest! {
    #[test]
    fn extraction_clamps_into_the_schema(
        values in prop::collection::vec(-1e4..1e4f64, 1..5),
        lows in prop::collection::vec(-50.0..50.0f64, 5),
        widths in prop::collection::vec(0.1..100.0f64, 5),
    ) {
        let names: Vec<String> = (0..values.len()).map(|i| format!("a{i}")).collect();
        let fields: Vec<(&str, f64, f64)> =
            names.iter().enumerate().map(|(i, n)| (n.as_str(), lows[i], lows[i] + widths[i])).collect();
        let schema = ActionSchema::clamped(&fields);
        let pairs: Vec<(&str, f64)> = names.iter().map(|n| n.as_str()).zip(values.iter().copied()).collect();
        let action = extract(&fenced(&pairs), &schema).unwrap();
        for (i, (name, lo, hi)) in fields.iter().enumerate() {
            let v = action.get(name);
            prop_assert!(*lo <= v && v <= *hi);
            if (*lo..=*hi).contains(&values[i]) {
                prop_assert_eq!(v, values[i]);
            }
        }
    }

    #[test]
    fn expected_improvement_is_nonnegative(
        points in prop::collection::vec((0.0..1.0f64, 0.0..1.0f64), 2..10),
        probe in (0.0..1.0f64, 0.0..1.0f64),
    ) {
        let x: Vec<Vec<f64>> = points.iter().map(|p| vec![p.0, p.1]).collect();
        let y: Vec<f64> = x.iter().map(|p| (p[0] - 0.3).powi(2) + (p[1] - 0.6).powi(2)).collect();
        if let Ok(gp) = GaussianProcess::fit(x, &y, 1.0, 1e-6) {
            let (_, best) = gp.incumbent();
            prop_assert!(gp.expected_improvement(&[probe.0, probe.1], best) >= 0.0);
        }
    }
}

#[test]
fn posterior_variance_collapses_at_observed_points() {
    let x: Vec<Vec<f64>> = vec![vec![0.1, 0.1], vec![0.9, 0.2], vec![0.4, 0.8], vec![0.6, 0.5]];
    let y: Vec<f64> = x.iter().map(|p| p[0] * p[1]).collect();
    let jitter = 1e-6;
    let gp = GaussianProcess::fit(x.clone(), &y, 1.0, jitter).unwrap();
    for (p, v) in x.iter().zip(&y) {
        let (mean, var) = gp.predict(p);
        assert!(var <= 10.0 * jitter, "{var}");
        assert!((mean - v).abs() < 1e-3);
    }
    let (_, far) = gp.predict(&[0.0, 1.0]);
    assert!(far > 100.0 * jitter);
}

fn noiseless() -> SyntheticEnv {
    SyntheticEnv::new(SyntheticParams::identity(2, 0.5, 0.8, 0.0).with_ridge(0.1)).unwrap()
}

#[test]
fn bo_is_reproducible_and_charges_whole_trajectories() {
    let env = noiseless();
    let cfg = BoConfig {
        horizon: 7,
        ..BoConfig::default()
    };
    let a = bo_run(&env, 12, &cfg, 3).unwrap();
    assert_eq!(a, bo_run(&env, 12, &cfg, 3).unwrap());
    assert_eq!(a.records.len(), 12);
    assert_eq!(a.total_env_steps, 12 * 7);
    assert!(a.records.iter().all(|r| env.domain().contains(&r.theta)));
}

#[test]
fn scripted_solver_proposals_are_projected_and_replayable() {
    let env = noiseless();
    let script = vec![
        fenced(&[("theta_0", 0.2), ("theta_1", 0.9)]),
        fenced(&[("theta_0", -4.0), ("theta_1", 0.5)]),
        fenced(&[("theta_0", 1.5), ("theta_1", 2.0)]),
    ];
    let cfg = LlmBaselineConfig {
        horizon: 3,
        history_limit: 10,
    };
    let run = || {
        let (b, t) = backend(script.clone());
        (llm_solver_run(&env, 3, &b, SolverVariant::Plain, &cfg, 8).unwrap(), t)
    };
    let (r, t) = run();
    let thetas: Vec<&[f64]> = r.records.iter().map(|rec| rec.theta.as_slice()).collect();
    assert_eq!(thetas, [&[0.2, 0.9][..], &[0.0, 0.5][..], &[1.0, 1.0][..]]);
    assert_eq!(t.calls(), 3);
    assert_eq!(r.total_queries, 3 * 3 + 3);
    assert_eq!(r, run().0);
}

#[test]
fn designer_holding_the_design_matches_a_plain_rollout() {
    let env = SupplyChainEnv::with_rules();
    let theta = [0.4, 1.1];
    let rounds = 25;
    let reply = fenced(&[("carbon_tax", theta[0]), ("subsidy", theta[1])]);
    assert_eq!(env.design_labels(), ["carbon_tax", "subsidy"]);
    let (b, t) = backend(vec![reply; rounds]);
    let seed = 13;
    let r = llm_designer_run_from(&env, rounds, &b, &LlmBaselineConfig::default(), Some(&theta), seed).unwrap();
    assert_eq!(t.calls(), rounds);

    let tree = SeedTree::new(seed);
    let mut state = env.initial_state(&mut tree.stream("initial")).unwrap();
    let mut trans = tree.stream("transition");
    let th = DesignVector::new(theta.to_vec()).unwrap();
    for rec in &r.records {
        state = env.step(&state, &th, &mut trans).unwrap();
        assert_eq!(rec.theta, th);
        assert_eq!(rec.objective, env.evaluate(&th, &state));
    }
    assert_eq!(r.total_env_steps, rounds as u64);
    assert_eq!(r.total_queries, 3 * rounds as u64 + rounds as u64);
}
