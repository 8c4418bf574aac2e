use glucoshield::environment::ScenarioConfig;
use glucoshield::patients::{default_cohort, prepare_patient, DiabetesType, PatientParams};
use glucoshield::reward::ProxyModel;
use glucoshield_bench::policy::{calibrate_dosing, Policy, PolicyKind, PolicySpec};
use glucoshield_bench::runner::{run_episode, EpisodeResult, ShieldKind, ShieldSettings};

fn patient(id: &str, ty: DiabetesType) -> PatientParams {
    let raw = default_cohort().unwrap();
    prepare_patient(raw.iter().find(|p| p.id == id).unwrap(), ty, 0.65).unwrap()
}

fn run(id: &str, ty: DiabetesType, kind: PolicyKind, shield: ShieldKind, seed: u64, days: usize) -> EpisodeResult {
    let cohort = id.split('#').next().unwrap();
    let train = patient(&format!("{cohort}#001"), ty);
    let sc = ScenarioConfig {
        seed,
        patient_id: id.into(),
        diabetes_type: ty,
        horizon_days: days,
        ..ScenarioConfig::default()
    };
    let cal = calibrate_dosing(&train, &sc).unwrap();
    let basis = cal.anchor(&ProxyModel::for_patient(&train, &sc.proxy));
    let p = patient(id, ty);
    let spec = PolicySpec {
        kind,
        ..PolicySpec::default()
    };
    let policy = Policy::new(spec, cal, &p);
    run_episode(p, &basis, &policy, shield, sc, &ShieldSettings::default()).unwrap()
}

#[test]
fn same_seed_same_summary() {
    for shield in ShieldKind::ALL {
        let a = run("adult#004", DiabetesType::T1d, PolicyKind::Heuristic, shield, 5, 1);
        let b = run("adult#004", DiabetesType::T1d, PolicyKind::Heuristic, shield, 5, 1);
        assert_eq!(a.summary, b.summary, "{}", shield.as_str());
        assert_eq!(a.first_intervention, b.first_intervention);
    }
    let a = run("child#003", DiabetesType::T2dPump, PolicyKind::Random, ShieldKind::Predictive, 2, 1);
    let b = run("child#003", DiabetesType::T2dPump, PolicyKind::Random, ShieldKind::Predictive, 2, 1);
    assert_eq!(a.summary, b.summary);
}

#[test]
fn shielded_run_matches_unshielded_until_first_intervention() {
    let mut checked = 0;
    for (id, ty) in [
        ("adult#004", DiabetesType::T1d),
        ("adolescent#006", DiabetesType::T2dPump),
        ("child#008", DiabetesType::T2dNoPump),
    ] {
        let none = run(id, ty, PolicyKind::Heuristic, ShieldKind::None, 1, 2);
        assert_eq!(none.first_intervention, None);
        for shield in [ShieldKind::Predictive, ShieldKind::RuleBased] {
            let other = run(id, ty, PolicyKind::Heuristic, shield, 1, 2);
            let Some(k) = other.first_intervention else {
                assert_eq!(none.record.bg_trace(), other.record.bg_trace());
                continue;
            };
            checked += 1;
            for (a, b) in none.record.steps[..k].iter().zip(&other.record.steps[..k]) {
                assert_eq!(a.bg.to_bits(), b.bg.to_bits(), "{id} {} step {}", shield.as_str(), a.step);
                assert_eq!(a.action, b.action);
                assert_eq!(a.reward.to_bits(), b.reward.to_bits());
            }
            // a modified distribution need not change the argmax at once, but the
            // traces cannot diverge before it
            let first_diff = none
                .record
                .steps
                .iter()
                .zip(&other.record.steps)
                .position(|(a, b)| a.action != b.action || a.bg != b.bg);
            if let Some(d) = first_diff {
                assert!(d >= k, "{id} {}: diverged at {d}, first intervention {k}", shield.as_str());
            }
        }
    }
    assert!(checked > 0);
}

#[test]
fn week_long_episode_has_2016_steps() {
    let r = run("adult#002", DiabetesType::T1d, PolicyKind::Heuristic, ShieldKind::Predictive, 1, 7);
    let n = r.record.steps.len();
    match r.record.termination.map(|t| t.as_str()) {
        Some("time_limit") => assert_eq!(n, 2016),
        other => assert!(n < 2016, "{other:?} after {n} steps"),
    }
    assert_eq!(r.decisions.len(), n);
    assert!(r.record.steps.iter().all(|s| !s.shield_mode.is_empty()));
}

#[test]
fn unshielded_runs_log_no_decisions() {
    let r = run("adolescent#002", DiabetesType::T1d, PolicyKind::Heuristic, ShieldKind::None, 1, 1);
    assert!(r.decisions.is_empty());
    assert!(r.record.steps.iter().all(|s| s.shield_mode == "none"));
    let r = run("adolescent#002", DiabetesType::T1d, PolicyKind::Heuristic, ShieldKind::RuleBased, 1, 1);
    assert!(r.decisions.is_empty());
    assert!(r.record.steps.iter().all(|s| s.shield_mode == "pass" || s.shield_mode.starts_with("rule_")));
}

#[test]
fn predictive_decisions_are_distributions() {
    let r = run("child#005", DiabetesType::T1d, PolicyKind::Random, ShieldKind::Predictive, 3, 1);
    for d in &r.decisions {
        assert!((d.distribution.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(d.mask.iter().all(|m| *m == 0.0 || *m == -10.0 || *m == 10.0));
    }
    assert!(r.decisions.iter().any(|d| d.fallback_static));
    assert!(r.decisions.iter().any(|d| !d.fallback_static));
}
