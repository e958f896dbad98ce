use mas_design::envs::contest::{self, resolve, BehavioralStub, ContestDesign, ContestEnv, ContestParams, PersonaPool};
use mas_design::envs::supply_chain::econ::{emission_step, fiscal_cost, EconParams};
use mas_design::envs::supply_chain::{SupplyChainEnv, ACTION_RANGES};
use mas_design::envs::synthetic::{SyntheticEnv, SyntheticParams};
use mas_design::validation::worked_supply_chain_state;
use mas_design::{DesignVector, Environment, SeedTree};
use proptest::prelude::*;
use rand::Rng;

fn rng(seed: u64) -> mas_design::StreamRng {
    SeedTree::new(seed).stream("environments")
}

// --- synthetic ---------------------------------------------------------------

#[test]
fn synthetic_optimum_matches_the_closed_form() {
    for ridge in [0.0, 0.1, 1.0] {
        let env = SyntheticEnv::new(SyntheticParams::identity(2, 0.5, 0.8, 0.3).with_ridge(ridge)).unwrap();
        let (theta, f) = env.optimum();
        let star = 0.5 / (1.0 + ridge);
        assert!((theta[0] - star).abs() < 1e-12 && (theta[1] - star).abs() < 1e-12);
        let noise = 2.0 * 0.09 / (1.0 - 0.64);
        let expected = 2.0 * (star - 0.5).powi(2) + 2.0 * ridge * star * star + noise;
        assert!((f - expected).abs() < 1e-12);
    }
}

#[test]
fn synthetic_optimum_on_the_boundary_is_projected() {
    // Unconstrained minimizer (2, -1) lies outside the unit square.
    let mut params = SyntheticParams::identity(2, 0.0, 0.5, 0.0);
    params.b = vec![-2.0, 1.0];
    let env = SyntheticEnv::new(params).unwrap();
    let (theta, _) = env.optimum();
    assert!((theta[0] - 1.0).abs() < 1e-9 && theta[1].abs() < 1e-9, "{theta:?}");
}

#[test]
fn synthetic_rejects_bad_parameters() {
    let mut p = SyntheticParams::identity(2, 0.5, 0.8, 0.3);
    p.rho_mix = 1.0;
    assert!(SyntheticEnv::new(p).is_err());
    let mut p = SyntheticParams::identity(2, 0.5, 0.8, 0.3);
    p.sigma_eps = -1.0;
    assert!(SyntheticEnv::new(p).is_err());
}

#[test]
fn synthetic_long_run_mean_of_the_state_is_the_affine_target() {
    let env = SyntheticEnv::new(SyntheticParams::identity(2, 0.5, 0.8, 0.3)).unwrap();
    let theta = DesignVector::new(vec![0.2, 0.9]).unwrap();
    let mut r = rng(3);
    let mut s = env.initial_state(&mut r).unwrap();
    let n = 200_000;
    let mut mean = [0.0; 2];
    for _ in 0..n {
        s = env.step(&s, &theta, &mut r).unwrap();
        mean[0] += s.0[0] / n as f64;
        mean[1] += s.0[1] / n as f64;
    }
    assert!((mean[0] + 0.3).abs() < 0.01 && (mean[1] - 0.4).abs() < 0.01, "{mean:?}");
}

// --- supply chain ------------------------------------------------------------

#[test]
fn rule_based_actions_stay_in_their_ranges() {
    let env = SupplyChainEnv::with_rules();
    let mut r = rng(8);
    let mut s = env.initial_state(&mut r).unwrap();
    for _ in 0..5_000 {
        let theta = DesignVector::new(vec![r.random_range(0.0..1.0), r.random_range(0.0..2.0)]).unwrap();
        s = env.step(&s, &theta, &mut r).unwrap();
        for (name, lo, hi) in ACTION_RANGES {
            let v = match name {
                "TECH" => s.tech,
                "WS" => s.ws,
                "MKT" => s.mkt,
                "RT" => s.rt,
                "WTP" => s.wtp,
                "QUT" => s.qut,
                _ => unreachable!(),
            };
            assert!((lo..=hi).contains(&v), "{name} = {v}");
        }
    }
}

#[test]
fn emissions_fall_strictly_under_maximal_technology_without_shocks() {
    let p = EconParams::default();
    let tech_max = ACTION_RANGES.iter().find(|r| r.0 == "TECH").unwrap().2;
    let mut ems = p.e_init;
    for _ in 0..200 {
        let next = emission_step(ems, tech_max, 0.0, &p);
        if ems - p.e_base < 1e-6 {
            break;
        }
        assert!(next < ems);
        assert!(next >= 0.0);
        ems = next;
    }
    // The decay stalls at the baseline level.
    assert!((ems - p.e_base).abs() < 1e-3, "{ems}");
}

#[test]
fn fiscal_cost_is_continuous_at_the_target() {
    let p = EconParams::default();
    let mut s = worked_supply_chain_state();
    s.ems = 5.0;
    // EXP = QUT (θ2 - 5 θ1) vanishes on θ2 = 5 θ1.
    let at = fiscal_cost(&[0.2, 1.0], &s, &p);
    assert_eq!(at, 0.0);
    for eps in [1e-3, 1e-6, 1e-9] {
        let above = fiscal_cost(&[0.2, 1.0 + eps], &s, &p);
        let below = fiscal_cost(&[0.2, 1.0 - eps], &s, &p);
        assert!(above > 0.0 && below > 0.0);
        assert!(above < 0.1 && below < 0.1, "{eps}: {above} {below}");
    }
}

#[test]
fn raising_the_subsidy_never_lowers_purchases() {
    let env = SupplyChainEnv::with_rules();
    for seed in 0..100 {
        let tree = SeedTree::new(seed);
        let s0 = env.initial_state(&mut tree.stream("init")).unwrap();
        let low = env.step(&s0, &DesignVector::new(vec![0.3, 0.0]).unwrap(), &mut tree.stream("step")).unwrap();
        let high = env.step(&s0, &DesignVector::new(vec![0.3, 1.0]).unwrap(), &mut tree.stream("step")).unwrap();
        assert!(high.qut >= low.qut, "seed {seed}: {} < {}", high.qut, low.qut);
    }
}

#[test]
fn supply_chain_charges_three_queries_per_round() {
    assert_eq!(SupplyChainEnv::with_rules().queries_per_step(), 3);
}

// --- contest -----------------------------------------------------------------

fn contest_case() -> impl Strategy<Value = (ContestDesign, Vec<bool>, Vec<f64>)> {
    (0.0..300.0f64, 0.0..1000.0f64, 0.0..300.0f64, prop::collection::vec((any::<bool>(), 0.0..1200.0f64), 2..6))
        .prop_map(|(e, r, s, players)| {
            let entered: Vec<bool> = players.iter().map(|p| p.0).collect();
            let efforts = players.iter().map(|p| if p.0 { p.1 } else { 0.0 }).collect();
            (ContestDesign::new(e, r, s), entered, efforts)
        })
}

proptest! {
    #[test]
    fn payoffs_balance_in_both_branches((design, entered, efforts) in contest_case(), seed in any::<u64>()) {
        let prize = 120.0;
        let res = resolve(&design, prize, &entered, &efforts, &mut rng(seed)).unwrap();
        let total: f64 = res.payoffs.iter().sum();
        let n = entered.iter().filter(|&&e| e).count() as f64;
        match res.winner {
            Some(w) => {
                prop_assert!((total - prize).abs() < 1e-9);
                prop_assert!(efforts[w] > design.reserve);
                prop_assert!(efforts.iter().all(|&e| e <= efforts[w]));
            }
            None => prop_assert!((total - n * (design.shared_prize - design.entry_fee)).abs() < 1e-9),
        }
        prop_assert!((res.total_effort - efforts.iter().sum::<f64>()).abs() < 1e-9);
        for i in 0..entered.len() {
            if !entered[i] {
                prop_assert_eq!(res.payoffs[i], 0.0);
            }
        }
    }

    #[test]
    fn cutoff_is_nondecreasing_in_the_liability(k in 0.0..500.0f64, dk in 0.0..100.0f64) {
        let p = ContestParams::default();
        prop_assert!(contest::cutoff(k + dk, &p) >= contest::cutoff(k, &p));
    }
}

#[test]
fn ties_at_the_top_are_split_uniformly() {
    let design = ContestDesign::new(0.0, 10.0, 0.0);
    let mut r = rng(21);
    let mut wins = [0usize; 3];
    for _ in 0..30_000 {
        let res = resolve(&design, 120.0, &[true, true, true], &[50.0, 50.0, 20.0], &mut r).unwrap();
        wins[res.winner.unwrap()] += 1;
    }
    assert_eq!(wins[2], 0);
    assert!((wins[0] as f64 / 30_000.0 - 0.5).abs() < 0.015, "{wins:?}");
}

#[test]
fn effort_equal_to_the_reserve_does_not_win() {
    let design = ContestDesign::new(5.0, 40.0, 30.0);
    let res = resolve(&design, 120.0, &[true, true], &[40.0, 12.0], &mut rng(0)).unwrap();
    assert_eq!(res.winner, None);
    assert_eq!(res.payoffs, vec![25.0, 25.0]);
    assert!(resolve(&design, 120.0, &[false, true], &[3.0, 0.0], &mut rng(0)).is_err());
    assert!(resolve(&design, 120.0, &[true], &[1.0, 2.0], &mut rng(0)).is_err());
}

#[test]
fn maximal_effort_is_nondecreasing_on_the_reference_grid() {
    let p = ContestParams::default();
    let grid = [0.0, 10.5, 40.0, 300.0];
    let r: Vec<f64> = grid.iter().map(|&k| contest::max_total_effort(k, &p)).collect();
    assert!(r.windows(2).all(|w| w[1] >= w[0]), "{r:?}");
}

#[test]
fn cutoff_without_liability_is_the_inverse_virtual_ability() {
    // J(t) = 2t - 2 on U[1, 2]; J⁻¹(t0) for t0 = 0.5 is 1.25.
    let p = ContestParams {
        designer_cost: 0.5,
        ..ContestParams::default()
    };
    assert!((contest::cutoff(0.0, &p) - 1.25).abs() < 1e-12);
    assert!((contest::cutoff(0.0, &ContestParams::default()) - 1.0).abs() < 1e-12);
}

#[test]
fn stub_entry_rates_are_interior_at_mid_abilities() {
    let p = ContestParams::default();
    let stub = BehavioralStub::default();
    let pool = PersonaPool::builtin();
    let design = ContestDesign::new(40.0, 136.5, 80.0);
    let mut r = rng(77);
    for ability in [1.4, 1.5, 1.6] {
        let n = 4_000;
        let mut entries = 0;
        for _ in 0..n {
            let persona = pool.draw(&mut r).clone();
            if stub.decide(&design, &p, ability, &persona, &mut r).enter {
                entries += 1;
            }
        }
        let rate = entries as f64 / n as f64;
        assert!(rate > 0.02 && rate < 0.98, "ability {ability}: entry rate {rate}");
    }
}

#[test]
fn contest_rounds_respect_the_endowment() {
    let env = ContestEnv::with_stub();
    let mut r = rng(5);
    let mut s = env.initial_state(&mut r).unwrap();
    for _ in 0..2_000 {
        let theta = DesignVector::new(vec![
            r.random_range(0.0..300.0),
            r.random_range(0.0..1000.0),
            r.random_range(0.0..300.0),
        ])
        .unwrap();
        s = env.step(&s, &theta, &mut r).unwrap();
        assert!(s.efforts.iter().all(|&e| (0.0..=300.0).contains(&e)));
        assert_eq!(env.evaluate(&theta, &s), -s.total_effort);
    }
}
