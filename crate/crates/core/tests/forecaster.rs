use glucoshield::forecaster::{
    adaptation_comparison, basis_outputs, coefficient_consistency, predict, ridge_solve,
    BasisBank, BasisMatrix, Coefficients, ContextPair, ContextSet, ForecastContext, PatientWindows, QueryWindow,
};
use glucoshield::patients::{default_cohort, prepare_patient, DiabetesType};
use glucoshield::reward::{ProxyConfig, ProxyModel};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn random_design(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect()
}

fn oracle(g: &[f64], rows: usize, cols: usize, y: &[f64], lambda: f64) -> DVector<f64> {
    let gm = DMatrix::from_row_slice(rows, cols, g);
    let a = gm.transpose() * &gm + DMatrix::identity(cols, cols) * lambda;
    let b = gm.transpose() * DVector::from_column_slice(y);
    a.cholesky().expect("spd").solve(&b)
}

#[test]
fn ridge_matches_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..50 {
        let cols = 1 + trial % 7;
        let rows = cols + 3 + trial;
        let g = random_design(rows, cols, &mut rng);
        let y: Vec<f64> = (0..rows).map(|_| rng.sample(StandardNormal)).collect();
        let lambda = [0.0, 1e-3, 0.5, 10.0][trial % 4];
        let ours = ridge_solve(&g, rows, cols, &y, lambda).unwrap();
        let want = oracle(&g, rows, cols, &y, lambda);
        for (a, b) in ours.w.iter().zip(want.iter()) {
            assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()), "trial {trial}: {a} vs {b}");
        }
    }
}

#[test]
fn exact_recovery_without_ridge() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (rows, cols) = (8 * 24, 6);
    let g = random_design(rows, cols, &mut rng);
    let w0: Vec<f64> = (0..cols).map(|i| 0.3 * i as f64 - 0.7).collect();
    let gm = DMatrix::from_row_slice(rows, cols, &g);
    let y = (gm * DVector::from_column_slice(&w0)).as_slice().to_vec();
    let w = ridge_solve(&g, rows, cols, &y, 0.0).unwrap();
    for (a, b) in w.w.iter().zip(&w0) {
        assert!((a - b).abs() < 1e-8);
    }
}

#[test]
fn single_column_identity_and_singular_guard() {
    let y = vec![1.0, -2.0, 0.5];
    let w = ridge_solve(&y, 3, 1, &y, 0.0).unwrap();
    assert!((w.w[0] - 1.0).abs() < 1e-12);
    assert!(ridge_solve(&[1.0, 1.0], 1, 2, &[1.0], 0.0).is_err());
    assert!(ridge_solve(&[1.0, 1.0, 1.0, 1.0], 2, 2, &[1.0, 1.0], 0.0).is_err());
    assert!(ridge_solve(&[1.0, 1.0, 1.0, 1.0], 2, 2, &[1.0, 1.0], 1e-3).is_ok());
}

#[test]
fn ridge_path_shrinks_and_is_continuous() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (rows, cols) = (60, 5);
    let g = random_design(rows, cols, &mut rng);
    let y: Vec<f64> = (0..rows).map(|_| rng.sample(StandardNormal)).collect();
    let norm = |w: &[f64]| w.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut prev: Option<Vec<f64>> = None;
    for e in 0..=40 {
        let lambda = 10f64.powf(-4.0 + 0.25 * e as f64);
        let w = ridge_solve(&g, rows, cols, &y, lambda).unwrap().w;
        if let Some(p) = &prev {
            assert!(norm(&w) <= norm(p) + 1e-12, "norm grew at lambda {lambda}");
            let jump = norm(&w.iter().zip(p).map(|(a, b)| a - b).collect::<Vec<_>>());
            // one quarter decade can move w by at most the full previous norm
            assert!(jump <= norm(p) + 1e-12);
        }
        prev = Some(w);
    }
    assert!(norm(prev.as_ref().unwrap()) < 1e-3);
}

fn matrix_strategy() -> impl Strategy<Value = (usize, usize, Vec<f64>, Vec<f64>, f64)> {
    (1usize..6, 0usize..20, 0.0f64..5.0).prop_flat_map(|(cols, extra, lambda)| {
        let rows = cols + extra + 1;
        (
            Just(rows),
            Just(cols),
            prop::collection::vec(-3.0f64..3.0, rows * cols),
            prop::collection::vec(-10.0f64..10.0, rows),
            Just(lambda + 1e-6),
        )
    })
}

proptest! {
    #[test]
    fn normal_equations_hold((rows, cols, g, y, lambda) in matrix_strategy()) {
        let w = ridge_solve(&g, rows, cols, &y, lambda).unwrap().w;
        let gm = DMatrix::from_row_slice(rows, cols, &g);
        let wv = DVector::from_column_slice(&w);
        let yv = DVector::from_column_slice(&y);
        let resid = gm.transpose() * (&gm * &wv - &yv) + &wv * lambda;
        let scale = (gm.transpose() * &yv).amax().max(1.0);
        prop_assert!(resid.amax() <= 1e-8 * scale, "residual {}", resid.amax());
    }

    #[test]
    fn predict_is_linear_in_weights(
        data in prop::collection::vec(-5.0f64..5.0, 24 * 3),
        w1 in prop::collection::vec(-2.0f64..2.0, 3),
        w2 in prop::collection::vec(-2.0f64..2.0, 3),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        y0 in 40.0f64..400.0,
    ) {
        let g = BasisMatrix::new(24, 3, data).unwrap();
        let mix: Vec<f64> = w1.iter().zip(&w2).map(|(x, z)| a * x + b * z).collect();
        let c = |w: &[f64]| Coefficients { w: w.to_vec(), lambda: 0.0 };
        let p1 = predict(y0, &g, &c(&w1)).unwrap();
        let p2 = predict(y0, &g, &c(&w2)).unwrap();
        let pm = predict(y0, &g, &c(&mix)).unwrap();
        for i in 0..24 {
            let want = a * (p1[i] - y0) + b * (p2[i] - y0);
            prop_assert!((pm[i] - y0 - want).abs() < 1e-9 * (1.0 + want.abs()));
        }
        let total: f64 = g.mul_vec(&mix).unwrap().iter().sum();
        prop_assert!((pm[23] - (y0 + total)).abs() < 1e-9 * (1.0 + total.abs()));
    }
}

#[test]
fn predict_examples() {
    let g = BasisMatrix::from_columns(&[vec![1.0, 2.0, -0.5], vec![3.0, 3.0, 3.0]]).unwrap();
    let flat = predict(110.0, &g, &Coefficients::zeros(2)).unwrap();
    assert_eq!(flat, vec![110.0; 3]);
    let one = BasisMatrix::from_columns(&[vec![1.0, 2.0, -0.5]]).unwrap();
    let p = predict(100.0, &one, &Coefficients { w: vec![1.0], lambda: 0.0 }).unwrap();
    assert_eq!(p, vec![101.0, 103.0, 102.5]);
}

#[test]
fn random_unit_vectors_are_nearly_orthogonal() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let dim = 256;
    let samples: Vec<Vec<Vec<f64>>> = (0..6)
        .map(|_| {
            (0..10)
                .map(|_| (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
                .collect()
        })
        .collect();
    let s = coefficient_consistency(&samples).unwrap();
    assert!(s.between_mean.abs() < 0.1, "between {}", s.between_mean);
    assert!(s.within_mean > s.between_mean);
}

fn base_model() -> ProxyModel {
    let cohort = default_cohort().unwrap();
    let p = prepare_patient(&cohort[14], DiabetesType::T1d, 0.65).unwrap();
    ProxyModel::for_patient(&p, &ProxyConfig::default())
}

#[test]
fn default_bank_shape() {
    let bank = BasisBank::default_for(&base_model()).unwrap();
    let ctx = ForecastContext {
        history: vec![130.0; 24],
        carb_drive: vec![0.5; 24],
        ins_drive: vec![0.02; 24],
    };
    let g = basis_outputs(&ctx, &bank).unwrap();
    assert_eq!((g.rows(), g.cols()), (24, 6));
    assert!(g.as_slice().iter().all(|v| v.is_finite()));
}

/// Windows generated by `truth` with random inputs, in the bank's basis.
fn windows(id: &str, truth: &ProxyModel, bank: &BasisBank, seed: u64) -> PatientWindows {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| {
        let start = rng.random_range(0..12);
        let carb: Vec<f64> = (0..24)
            .map(|k| if k >= start && k < start + 4 { rng.random_range(0.5..3.0) } else { 0.1 })
            .collect();
        let ins: Vec<f64> = (0..24).map(|_| rng.random_range(0.0..0.08)).collect();
        let last = rng.random_range(90.0..220.0);
        let ctx = ForecastContext {
            history: vec![last; 24],
            carb_drive: carb,
            ins_drive: ins,
        };
        let traj = truth.rollout_from_drives(last, &ctx.carb_drive, &ctx.ins_drive);
        (ctx, traj)
    };
    let mut contexts = ContextSet::new();
    for _ in 0..8 {
        let (ctx, traj) = draw(&mut rng);
        let mut prev = ctx.history[23];
        let deltas = traj
            .iter()
            .map(|v| {
                let d = v - prev;
                prev = *v;
                d
            })
            .collect();
        contexts
            .push(ContextPair::new(ctx.history.clone(), basis_outputs(&ctx, bank).unwrap(), deltas).unwrap())
            .unwrap();
    }
    let queries = (0..6)
        .map(|_| {
            let (ctx, traj) = draw(&mut rng);
            QueryWindow {
                last_y: ctx.history[23],
                basis: basis_outputs(&ctx, bank).unwrap(),
                truth: traj,
            }
        })
        .collect();
    PatientWindows {
        id: id.into(),
        contexts,
        queries,
    }
}

#[test]
fn adaptation_beats_population_mean_on_heterogeneous_patients() {
    let base = base_model();
    let bank = BasisBank::default_for(&base).unwrap();
    let a = windows("a", &base.scaled(0.6, 1.3), &bank, 1);
    let b = windows("b", &base.scaled(1.4, 0.7), &bank, 2);
    let res = adaptation_comparison(&[a, b], 1e-3).unwrap();
    for r in &res {
        assert!(r.adapted_mae < r.static_mae, "{}: adapted {} static {}", r.id, r.adapted_mae, r.static_mae);
    }
}

#[test]
fn identical_patients_gain_nothing() {
    let base = base_model();
    let bank = BasisBank::default_for(&base).unwrap();
    let w = windows("a", &base.scaled(1.2, 0.9), &bank, 4);
    let res = adaptation_comparison(&[w.clone(), PatientWindows { id: "b".into(), ..w }], 1e-3).unwrap();
    for r in &res {
        assert!((r.adapted_mae - r.static_mae).abs() < 1e-9);
    }
}

#[test]
fn huge_ridge_degrades_adaptation() {
    let base = base_model();
    let bank = BasisBank::default_for(&base).unwrap();
    let pw = windows("a", &base.scaled(0.8, 1.2), &bank, 6);
    let small = adaptation_comparison(std::slice::from_ref(&pw), 1e-3).unwrap()[0].adapted_mae;
    let big = adaptation_comparison(std::slice::from_ref(&pw), 1e12).unwrap();
    assert!(big[0].adapted_mae > small);
    assert!(big[0].adapted.w.iter().all(|v| v.abs() < 1e-6));
}
