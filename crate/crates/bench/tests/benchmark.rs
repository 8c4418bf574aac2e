use glucoshield::patients::{Cohort, DiabetesType};
use glucoshield_bench::benchmark::{content_hash, evaluate, run_benchmark, BenchmarkConfig, Split};
use glucoshield_bench::policy::{PolicyKind, PolicySpec};
use glucoshield_bench::runner::ShieldKind;

fn small() -> BenchmarkConfig {
    BenchmarkConfig {
        types: vec![DiabetesType::T1d],
        cohorts: vec![Cohort::Adult],
        shields: vec![ShieldKind::None],
        horizon_days: 1,
        ..BenchmarkConfig::default()
    }
}

#[test]
fn one_policy_one_type_three_seeds_gives_30_runs() {
    let cfg = small();
    assert_eq!(cfg.n_runs(), 30);
    let report = evaluate(&cfg).unwrap();
    assert_eq!(report.runs.len(), 30);
    assert_eq!(report.runs.iter().filter(|r| r.split == Split::Id).count(), 3);
    assert_eq!(report.runs.iter().filter(|r| r.split == Split::Ood).count(), 27);
    assert!(report.runs.iter().all(|r| r.split == Split::Ood || r.patient == "adult#001"));
    assert_eq!(report.failures(), 0);
    assert_eq!(report.groups.len(), 2);
    for agg in report.groups.values() {
        assert_eq!(agg.failed, 0);
        assert!(agg.mean.tir_pct.is_finite() && agg.std.tir_pct >= 0.0);
    }
    let c = &report.correlations[0];
    assert_eq!((c.scope.as_str(), c.n), ("all", 30));
}

#[test]
fn shield_deltas_are_shielded_minus_unshielded() {
    let cfg = BenchmarkConfig {
        eval_indices: vec![2, 3],
        seeds: vec![1],
        shields: ShieldKind::ALL.to_vec(),
        ..small()
    };
    let report = evaluate(&cfg).unwrap();
    let deltas = report.shield_deltas();
    assert_eq!(deltas.len(), 4);
    for d in &deltas {
        assert_ne!(d.key.shield, ShieldKind::None);
        let base_key = glucoshield_bench::benchmark::GroupKey {
            shield: ShieldKind::None,
            ..d.key.clone()
        };
        let shielded = &report.groups[&d.key].mean;
        let base = &report.groups[&base_key].mean;
        assert_eq!(d.d_tir, shielded.tir_pct - base.tir_pct);
        assert_eq!(d.d_risk, shielded.mean_risk_index - base.mean_risk_index);
        assert_eq!(d.d_hypo, shielded.hypo_event_pct - base.hypo_event_pct);
    }
    let gaps = report.generalization_gaps();
    assert_eq!(gaps.len(), 3);
    for g in &gaps {
        let want = glucoshield::metrics::generalization_gap(&g.id, &g.ood);
        assert!(want.0.is_finite() && want.1.is_finite());
    }
}

#[test]
fn written_report_is_complete_and_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = BenchmarkConfig {
        eval_indices: vec![2],
        seeds: vec![4],
        shields: vec![ShieldKind::None, ShieldKind::Predictive],
        policies: vec![
            PolicySpec::default(),
            PolicySpec {
                kind: PolicyKind::Random,
                ..PolicySpec::default()
            },
        ],
        ..small()
    };
    cfg.output_dir = tmp.path().join("one");
    let report = run_benchmark(&cfg).unwrap();
    assert_eq!(report.runs.len(), 8);
    for f in [
        "runs.csv",
        "summary.csv",
        "generalization_gap.csv",
        "shield_delta.csv",
        "correlations.csv",
        "config.toml",
        "patient_table.sha256",
        "summary.txt",
    ] {
        assert!(cfg.output_dir.join(f).is_file(), "missing {f}");
    }
    let hash = std::fs::read_to_string(cfg.output_dir.join("patient_table.sha256")).unwrap();
    assert_eq!(hash.split_whitespace().next().unwrap(), content_hash(glucoshield::patients::DEFAULT_TABLE.as_bytes()));
    let snapshot = BenchmarkConfig::load(&cfg.output_dir.join("config.toml")).unwrap();
    assert_eq!(snapshot.n_runs(), cfg.n_runs());
    assert_eq!(report.correlations.len(), 3);

    let runs = std::fs::read_to_string(cfg.output_dir.join("runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 9);

    let first = cfg.output_dir.clone();
    cfg.output_dir = tmp.path().join("two");
    cfg.workers = 1;
    run_benchmark(&cfg).unwrap();
    for f in ["runs.csv", "summary.csv", "generalization_gap.csv", "shield_delta.csv", "correlations.csv"] {
        assert_eq!(
            std::fs::read(first.join(f)).unwrap(),
            std::fs::read(cfg.output_dir.join(f)).unwrap(),
            "{f} differs"
        );
    }
}

#[test]
fn missing_patients_are_recorded_as_failures() {
    let cfg = BenchmarkConfig {
        eval_indices: vec![11],
        seeds: vec![1],
        ..small()
    };
    let report = evaluate(&cfg).unwrap();
    assert_eq!(report.runs.len(), 2);
    assert_eq!(report.failures(), 2);
    assert!(report.runs.iter().all(|r| r.error.is_some() && r.summary.is_none()));
    assert!(report.text_summary().contains("fail"));
}

#[test]
fn invalid_configs_are_rejected() {
    let overlap = BenchmarkConfig {
        eval_indices: vec![1, 2],
        ..small()
    };
    assert!(evaluate(&overlap).is_err());
    assert!(BenchmarkConfig::from_toml_str("seeds = []").is_err());
    assert!(BenchmarkConfig::from_toml_str("horizon_days = 0").is_err());
    let cfg = BenchmarkConfig::from_toml_str("types = [\"t2d_pump\"]\nseeds = [7]\n").unwrap();
    assert_eq!((cfg.types.as_slice(), cfg.seeds.as_slice()), ([DiabetesType::T2dPump].as_slice(), [7].as_slice()));
}

#[test]
fn shipped_config_parses() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/benchmark.toml");
    let cfg = BenchmarkConfig::load(&path).unwrap();
    assert_eq!(cfg.eval_indices, (2..=10).collect::<Vec<_>>());
    assert_eq!(cfg.horizon_days, 7);
}
