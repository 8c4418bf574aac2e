use glucoshield::patients::{default_cohort, prepare_patient, DiabetesType};
use glucoshield::reward::{
    carb_sensitivity, counterfactual_rollouts, delta_risk_reward, final_cost, gamma_kernel, risk_cost, shaping_terms,
    terminal_penalty, ProxyConfig, ProxyInputs, ProxyModel, RiskWeights, StepContext,
};
use proptest::prelude::*;

fn w() -> RiskWeights {
    RiskWeights::default()
}

fn proxy() -> ProxyModel {
    let raw = default_cohort().unwrap();
    let p = prepare_patient(&raw[24], DiabetesType::T1d, 0.65).unwrap();
    ProxyModel::for_patient(&p, &ProxyConfig::default())
}

fn ctx() -> StepContext {
    StepContext {
        bg: 100.0,
        bolus_cap: 8,
        meal_cap: 7,
        ..StepContext::default()
    }
}

#[test]
fn risk_cost_hand_values() {
    assert_eq!(risk_cost(120.0, 0.0, &w()), 0.0);
    let hand = 3.0 * (20.0 / 20.0) + 10.0 * ((54.0f64 - 50.0) / 20.0).powi(2);
    assert!((risk_cost(50.0, 0.0, &w()) - hand).abs() < 1e-12);
    assert!((risk_cost(50.0, 0.0, &w()) - 3.4).abs() < 1e-12);
    assert!((final_cost(50.0, 0.0, &w()) - 1.19).abs() < 1e-9);
    assert!((risk_cost(200.0, 2.0, &w()) - (20.0 / 50.0 + 0.015 * 40.0 * 2.0)).abs() < 1e-12);
    assert!(risk_cost(50.0, 0.0, &w()) > risk_cost(230.0, 0.0, &w()));
}

#[test]
fn risk_cost_monotone_outside_range() {
    let mut prev = f64::INFINITY;
    for k in 1..=540 {
        let bg = k as f64 * 0.1;
        let c = risk_cost(bg, 0.0, &w());
        assert!(c <= prev, "not non-increasing at {bg}");
        prev = c;
    }
    let mut prev = 0.0;
    for k in 2500..6000 {
        let bg = k as f64 * 0.1;
        let c = risk_cost(bg, 0.0, &w());
        assert!(c >= prev, "not non-decreasing at {bg}");
        prev = c;
    }
}

#[test]
fn proxy_examples() {
    assert!((carb_sensitivity(0.35, 70.0, 1.85) - 2.703).abs() < 5e-4);

    let m = ProxyModel {
        beta_func: 0.0,
        ..proxy()
    };
    let none = ProxyInputs {
        carb: &[],
        insulin: &[],
        now: 0,
    };
    let flat = m.rollout(150.0, &none);
    assert_eq!(flat.len(), m.horizon);
    assert!(flat.iter().all(|v| *v == 150.0));

    let m = proxy();
    let at_gb = m.rollout(m.gb, &none);
    assert!(at_gb.iter().all(|v| *v == m.gb));
}

#[test]
fn proxy_clips_to_range() {
    let m = proxy();
    let huge = vec![50.0; 600];
    let up = m.rollout(300.0, &ProxyInputs { carb: &huge, insulin: &[], now: 300 });
    assert!(up.iter().all(|v| *v <= 600.0) && up.contains(&600.0));
    let down = m.rollout(100.0, &ProxyInputs { carb: &[], insulin: &huge, now: 300 });
    assert!(down.iter().all(|v| *v >= 40.0) && down.contains(&40.0));
}

#[test]
fn kernels_are_normalized_and_non_negative() {
    let cfg = ProxyConfig::default();
    for (a, b) in [(cfg.carb_alpha, cfg.carb_beta), (cfg.ins_alpha, cfg.ins_beta)] {
        let k = gamma_kernel(a, b, cfg.kernel_len);
        assert_eq!(k.len(), 300);
        assert!(k.iter().all(|v| *v >= 0.0));
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    let kc = gamma_kernel(cfg.carb_alpha, cfg.carb_beta, cfg.kernel_len);
    let peak = (0..kc.len()).max_by(|a, b| kc[*a].total_cmp(&kc[*b])).unwrap();
    assert!((15..=45).contains(&peak), "carb peak {peak}");
}

#[test]
fn delta_risk_examples() {
    let m = proxy();
    let zeros = vec![0.0; m.horizon];
    let (b, a) = counterfactual_rollouts(&m, 150.0, &zeros, &zeros, 0.0, 0.0, 10.0);
    assert_eq!(b, a);
    assert_eq!(delta_risk_reward(150.0, &b, &a, &w()), 0.0);

    let (b, a) = counterfactual_rollouts(&m, 300.0, &zeros, &zeros, 3.0, 0.0, 10.0);
    assert!(a.last() < b.last());
    assert!(delta_risk_reward(300.0, &b, &a, &w()) > 0.0);

    let (b, a) = counterfactual_rollouts(&m, 110.0, &zeros, &zeros, 15.0, 0.0, 10.0);
    assert!(a.iter().any(|v| *v < 54.0), "min {:?}", a.iter().copied().fold(f64::INFINITY, f64::min));
    assert!(delta_risk_reward(110.0, &b, &a, &w()) < 0.0);
}

#[test]
fn shaping_hand_values() {
    assert_eq!(shaping_terms(&ctx()).survival, 0.2);
    assert_eq!(shaping_terms(&StepContext { bg: 75.0, ..ctx() }).survival, 0.1);
    assert_eq!(shaping_terms(&StepContext { bg: 200.0, ..ctx() }).survival, 0.0);
    let t = shaping_terms(&StepContext { frac_day: 0.0, n_bolus: 3, ..ctx() });
    assert!((t.progressive - 0.001 * 4.0).abs() < 1e-15);
    let t = shaping_terms(&StepContext { bolus_u: 1.0, since_last_bolus: Some(20.0), ..ctx() });
    assert_eq!(t.spacing, 0.01);
    let t = shaping_terms(&StepContext { bolus_u: 1.0, since_last_bolus: Some(30.0), ..ctx() });
    assert_eq!(t.spacing, 0.0);
    let t = shaping_terms(&StepContext { n_bolus: 10, frac_day: 1.0, ..ctx() });
    assert!((t.structural - 0.1 * 4.0).abs() < 1e-12);
    let t = shaping_terms(&StepContext { bg: 220.0, ..ctx() });
    assert!((t.inaction - 0.005 * 40.0).abs() < 1e-12);
}

#[test]
fn terminal_penalty_values() {
    assert_eq!(terminal_penalty(100), 200.0);
    assert_eq!(terminal_penalty(0), 0.0);
}

proptest! {
    #[test]
    fn zero_cost_in_range(bg in 70.0f64..=180.0) {
        prop_assert_eq!(risk_cost(bg, 0.0, &w()), 0.0);
    }

    #[test]
    fn risk_cost_non_negative(bg in 1.0f64..700.0, dbg in -50.0f64..50.0) {
        prop_assert!(risk_cost(bg, dbg, &w()) >= 0.0);
    }

    #[test]
    fn survival_only_when_inactive(bg in 40.0f64..400.0, bolus in 0.0f64..6.0, meal in 0.0f64..100.0, iob in 0.0f64..3.5) {
        let t = shaping_terms(&StepContext { bg, bolus_u: bolus, meal_g: meal, iob_total: iob, ..ctx() });
        if bolus > 0.0 || meal > 0.0 {
            prop_assert_eq!(t.survival, 0.0);
        } else {
            prop_assert_eq!(t.friction, 0.0);
        }
    }

    #[test]
    fn noop_reward_is_zero(bg in 40.0f64..600.0, c in proptest::collection::vec(0.0f64..20.0, 24), i in proptest::collection::vec(0.0f64..2.0, 24)) {
        let m = proxy();
        let (b, a) = counterfactual_rollouts(&m, bg, &c, &i, 0.0, 0.0, 10.0);
        prop_assert_eq!(delta_risk_reward(bg, &b, &a, &w()), 0.0);
    }
}
