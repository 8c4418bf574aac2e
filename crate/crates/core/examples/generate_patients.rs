//! Regenerates `data/patients.csv`.
//!
//! Basal physiology per cohort is drawn so that means and ranges hit the
//! target demographics exactly; rate constants get a seeded log-uniform
//! jitter around literature defaults. Every record is checked to balance
//! under all three diabetes types before the table is written.
//!
//! Usage: `cargo run -p glucoshield --example generate_patients [OUT]`

use std::path::PathBuf;

use glucoshield::patients::{prepare_patient, Cohort, DiabetesType, PatientParams, GLOBAL_TUNING};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Target {
    cohort: Cohort,
    age: (f64, f64),
    hr0: f64,
    bw: (f64, f64, f64),
    gb: f64,
    ib: f64,
    egpb: f64,
    vg: f64,
    vi: f64,
    b_max: f64,
    m_max: f64,
}

const TARGETS: [Target; 3] = [
    Target {
        cohort: Cohort::Child,
        age: (7.0, 12.0),
        hr0: 85.0,
        bw: (23.7, 35.9, 45.5),
        gb: 139.0,
        ib: 107.0,
        egpb: 2.96,
        vg: 1.86,
        vi: 0.056,
        b_max: 5.0,
        m_max: 60.0,
    },
    Target {
        cohort: Cohort::Adolescent,
        age: (13.0, 19.0),
        hr0: 75.0,
        bw: (37.9, 47.7, 68.7),
        gb: 144.0,
        ib: 104.0,
        egpb: 2.74,
        vg: 1.855,
        vi: 0.053,
        b_max: 8.0,
        m_max: 80.0,
    },
    Target {
        cohort: Cohort::Adult,
        age: (20.0, 68.0),
        hr0: 70.0,
        bw: (63.0, 86.1, 111.1),
        gb: 143.0,
        ib: 108.0,
        egpb: 2.51,
        vg: 1.85,
        vi: 0.051,
        b_max: 10.0,
        m_max: 100.0,
    },
];

const N: usize = 10;

fn round(x: f64, decimals: i32) -> f64 {
    let s = 10f64.powi(decimals);
    (x * s).round() / s
}

/// `N` values with exact `mean`, both extremes attained, rounded to `decimals`.
fn exact_mean(rng: &mut ChaCha8Rng, lo: f64, mean: f64, hi: f64, decimals: i32) -> Vec<f64> {
    let (lo, hi) = (round(lo, decimals), round(hi, decimals));
    let mut v: Vec<f64> = (0..N).map(|_| rng.random_range(lo..hi)).collect();
    v[0] = lo;
    v[N - 1] = hi;
    let interior_target = N as f64 * mean - lo - hi;
    for _ in 0..50 {
        let sum: f64 = v[1..N - 1].iter().sum();
        let shift = (interior_target - sum) / (N - 2) as f64;
        for x in &mut v[1..N - 1] {
            *x = (*x + shift).clamp(lo, hi);
        }
    }
    for x in &mut v {
        *x = round(*x, decimals);
    }
    let residual = round(N as f64 * mean - v.iter().sum::<f64>(), decimals);
    let mid = (1..N - 1)
        .max_by(|&a, &b| {
            let da = (v[a] - lo).min(hi - v[a]);
            let db = (v[b] - lo).min(hi - v[b]);
            da.total_cmp(&db)
        })
        .unwrap();
    v[mid] = round(v[mid] + residual, decimals);
    assert!(v.iter().all(|x| (lo..=hi).contains(x)));
    v.shuffle(rng);
    v
}

fn jitter(rng: &mut ChaCha8Rng, base: f64, spread: f64) -> f64 {
    let u: f64 = rng.random_range(-1.0..1.0);
    round(base * (spread * u).exp(), 6)
}

fn main() {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/patients.csv"));
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    let mut rows: Vec<PatientParams> = Vec::new();

    for t in &TARGETS {
        let bw = exact_mean(&mut rng, t.bw.0, t.bw.1, t.bw.2, 1);
        let gb = exact_mean(&mut rng, t.gb - 14.0, t.gb, t.gb + 14.0, 1);
        let ib = exact_mean(&mut rng, t.ib - 22.0, t.ib, t.ib + 22.0, 1);
        let egpb = exact_mean(&mut rng, t.egpb - 0.3, t.egpb, t.egpb + 0.3, 3);
        let vg = exact_mean(&mut rng, t.vg - 0.04, t.vg, t.vg + 0.04, 4);
        let vi = exact_mean(&mut rng, t.vi - 0.005, t.vi, t.vi + 0.005, 4);

        for i in 0..N {
            let age = round(rng.random_range(t.age.0..=t.age.1), 0);
            let k1 = jitter(&mut rng, 0.065, 0.15);
            let k2 = jitter(&mut rng, 0.079, 0.15);
            let k_p2 = jitter(&mut rng, 0.0021, 0.2);
            let k_p3 = jitter(&mut rng, 0.009, 0.25);
            let k_m0 = jitter(&mut rng, 225.0, 0.1);
            let v_mx = jitter(&mut rng, 0.047, 0.25);
            let f_snc = 1.0;
            let gpb = round(gb[i] * vg[i], 6);
            let gtb = round((f_snc - egpb[i] + k1 * gpb) / k2, 6);
            let k_p1 = round(egpb[i] + k_p2 * gpb + k_p3 * ib[i], 6);
            let v_m0 = round((egpb[i] - f_snc) * (k_m0 + gtb) / gtb, 6);
            let k_max = jitter(&mut rng, 0.0465, 0.25);
            let ka_r = [0.006, 0.06, 0.03];
            let p = PatientParams {
                id: format!("{}#{:03}", t.cohort, i + 1),
                cohort: t.cohort,
                age,
                bw: bw[i],
                gb: gb[i],
                ib: ib[i],
                egpb: egpb[i],
                vg: vg[i],
                vi: vi[i],
                gpb,
                gtb,
                k_gri: k_max,
                k_min: jitter(&mut rng, 0.0076, 0.2),
                k_max,
                k_abs: jitter(&mut rng, 0.057, 0.3),
                b_gut: jitter(&mut rng, 0.82, 0.05),
                d_gut: jitter(&mut rng, 0.01, 0.1),
                f: 0.9,
                k1,
                k2,
                k_p1,
                k_p2,
                k_p3,
                k_e1: 0.0005,
                k_e2: 339.0,
                v_m0,
                v_mx,
                k_m0,
                f_snc,
                ka1: jitter(&mut rng, 0.0018, 0.25),
                ka2: jitter(&mut rng, 0.0182, 0.25),
                kd: jitter(&mut rng, 0.0164, 0.25),
                m1: jitter(&mut rng, 0.15, 0.15),
                m2: jitter(&mut rng, 0.25, 0.15),
                m30: jitter(&mut rng, 0.23, 0.15),
                m4: jitter(&mut rng, 0.1, 0.15),
                p_2u: jitter(&mut rng, 0.0331, 0.25),
                k_i: jitter(&mut rng, 0.0079, 0.2),
                si1: round(2.0 * ka_r[0], 6),
                si2: round(2.0 * ka_r[1], 6),
                si3: round(0.0333 * ka_r[2], 6),
                ka_r1: ka_r[0],
                ka_r2: ka_r[1],
                ka_r3: ka_r[2],
                s_b_kg: jitter(&mut rng, 0.25, 0.15),
                alpha_s: 0.05,
                beta_s: round(0.0055 * bw[i], 6),
                h: jitter(&mut rng, 5.2, 0.04),
                k_deriv: 10.0,
                tau_dg: 10.0,
                beta_cell: 1.0,
                tau_hr: 5.0,
                alpha_hr: 0.2,
                n_hr: 4.0,
                c1: 500.0,
                c2: 100.0,
                tau_ex: 200.0,
                tau_in: 1.0,
                beta_ex: 1.0,
                alpha_qe: 3.0,
                k_m_ex: 200.0,
                c_cap: 0.01,
                hr0: t.hr0,
                k_sc: jitter(&mut rng, 0.1, 0.2),
                b_max: t.b_max,
                m_max: t.m_max,
                w_meal: 60.0,
                w_bolus: 60.0,
                max_meals_day: 7,
                max_boluses_day: 8,
                basal_rate: 0.0,
                tuned: false,
                diabetes_type: None,
                egp0: 0.0,
                fcns0: 0.0,
                insulin_resistance: 0.0,
            };
            p.validate().expect("generated record invalid");
            for ty in DiabetesType::ALL {
                prepare_patient(&p, ty, GLOBAL_TUNING)
                    .unwrap_or_else(|e| panic!("{} does not balance as {ty}: {e}", p.id));
            }
            rows.push(p);
        }
    }

    let mut w = csv::Writer::from_path(&out).expect("open output");
    for p in &rows {
        w.serialize(p).expect("write record");
    }
    w.flush().expect("flush");
    println!("wrote {} patients to {}", rows.len(), out.display());
}
