use glucoshield::environment::{Environment, ScenarioConfig};
use glucoshield::patients::adapt::T1D_BASAL_U_PER_KG_H;
use glucoshield::patients::balance::equilibrium_residual;
use glucoshield::patients::{
    adapt, apply_global_tuning, auto_balance_with_report, cohort_stats, default_cohort, parse_cohort,
    prepare_patient, Cohort, DiabetesType,
};

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn cohort_statistics_match_published_values() {
    let ps = default_cohort().unwrap();
    assert_eq!(ps.len(), 30);
    let stats = cohort_stats(&ps);
    assert_eq!(stats.len(), 3);
    // (cohort, BW mean, BW min, BW max, Gb, Ib)
    let want = [
        (Cohort::Child, 35.9, 23.7, 45.5, 139.0, 107.0),
        (Cohort::Adolescent, 47.7, 37.9, 68.7, 144.0, 104.0),
        (Cohort::Adult, 86.1, 63.0, 111.1, 143.0, 108.0),
    ];
    for (s, w) in stats.iter().zip(want) {
        assert_eq!(s.cohort, w.0);
        assert_eq!(s.n, 10);
        assert!(close(s.bw.mean, w.1, 0.05), "{:?} BW mean {}", s.cohort, s.bw.mean);
        assert!(close(s.bw.min, w.2, 0.05) && close(s.bw.max, w.3, 0.05), "{:?} BW range", s.cohort);
        assert!(s.bw.min <= s.bw.mean && s.bw.mean <= s.bw.max);
        assert!(close(s.gb.mean, w.4, 0.5), "{:?} Gb {}", s.cohort, s.gb.mean);
        assert!(close(s.ib.mean, w.5, 0.5), "{:?} Ib {}", s.cohort, s.ib.mean);
        assert!((1.845..=1.865).contains(&s.vg.mean), "{:?} Vg {}", s.cohort, s.vg.mean);
        assert!((0.0505..=0.0565).contains(&s.vi.mean), "{:?} Vi {}", s.cohort, s.vi.mean);
    }
    assert!(close(stats[0].egpb.mean, 2.96, 0.005));
    assert!(close(stats[2].egpb.mean, 2.51, 0.005));
    assert!(stats[0].egpb.mean > stats[1].egpb.mean && stats[1].egpb.mean > stats[2].egpb.mean);
}

#[test]
fn degenerate_tables_fail() {
    assert!(parse_cohort("").is_err());
    let text = glucoshield::patients::DEFAULT_TABLE;
    let header = text.lines().next().unwrap();
    assert!(parse_cohort(header).is_err());
    let row = text.lines().nth(1).unwrap();
    let bad = row.replacen(",child,", ",toddler,", 1);
    assert!(parse_cohort(&format!("{header}\n{bad}\n")).is_err());
}

#[test]
fn tuning_example() {
    let mut p = default_cohort().unwrap()[0].clone();
    p.vg = 1.86;
    let q = apply_global_tuning(&p, 0.65).unwrap();
    assert!(close(q.vg, 1.209, 1e-12));
    let same = apply_global_tuning(&p, 1.0).unwrap();
    assert_eq!(same.vg, p.vg);
    assert!(apply_global_tuning(&q, 0.65).is_err());
}

#[test]
fn type_adaptation_examples() {
    let raw = default_cohort().unwrap();
    let tuned = apply_global_tuning(&raw[25], 0.65).unwrap();
    let t1 = adapt(&tuned, DiabetesType::T1d).unwrap();
    assert!(close(t1.basal_rate, T1D_BASAL_U_PER_KG_H * tuned.bw, 1e-12));
    assert!(close(0.011 * 86.1, 0.947, 1e-3));
    assert_eq!(t1.k_abs, 2.0 * tuned.k_abs);
    assert!(close(t1.v_mx, 0.8 * tuned.v_mx, 1e-12));
    assert_eq!((t1.s_b_kg, t1.beta_cell), (0.0, 0.0));

    let pump = adapt(&tuned, DiabetesType::T2dPump).unwrap();
    assert!(close(pump.si1, tuned.si1 / 2.5, 1e-15));
    assert!(close(pump.bw, tuned.bw * 1.15, 1e-12));
    assert!(close(pump.m30, tuned.m30 * 0.85, 1e-12));
    assert!(pump.basal_rate > 0.0);

    let np = adapt(&tuned, DiabetesType::T2dNoPump).unwrap();
    assert_eq!(np.basal_rate, 0.0);
    assert_eq!(np.k_deriv, 30.0);
    assert!(close(np.si3, tuned.si3 / 2.8, 1e-15));

    assert!(adapt(&t1, DiabetesType::T2dPump).is_err());
}

#[test]
fn every_patient_balances_and_reads_basal() {
    for ty in DiabetesType::ALL {
        for raw in default_cohort().unwrap() {
            let p = prepare_patient(&raw, ty, 0.65).unwrap();
            let r = equilibrium_residual(&p).unwrap();
            assert!(r.iter().all(|v| v.abs() < 1e-8), "{} {ty}: residual {r:?}", p.id);
            assert!(r[3].abs() < 1e-6 && r[4].abs() < 1e-6);

            let (q, rep) = auto_balance_with_report(&p).unwrap();
            assert!(rep.iterations <= 1, "{} {ty}: re-balance took {}", p.id, rep.iterations);
            assert!(close(q.v_m0, p.v_m0, 1e-10) && close(q.k_p1, p.k_p1, 1e-10) && close(q.egp0, p.egp0, 1e-10));

            let env = Environment::new(p.clone(), ScenarioConfig::default().quiet()).unwrap();
            assert!((env.cgm() - p.gb).abs() <= 5.0, "{} {ty}: cgm {} gb {}", p.id, env.cgm(), p.gb);
        }
    }
}

#[test]
fn infeasible_balance_fails() {
    let raw = default_cohort().unwrap();
    let mut p = prepare_patient(&raw[4], DiabetesType::T1d, 0.65).unwrap();
    p.k_p2 = 1e6;
    assert!(auto_balance_with_report(&p).is_err());
}

#[test]
fn hr_max_and_invariants() {
    for p in default_cohort().unwrap() {
        assert_eq!(p.hr_max(), 220.0 - p.age);
        p.validate().unwrap();
        assert!(p.f > 0.0 && p.f <= 1.0);
    }
}
