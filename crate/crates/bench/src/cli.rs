//! Command implementations behind the `glucoshield` binary.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use glucoshield::environment::ScenarioConfig;
use glucoshield::forecaster::{coefficient_consistency, read_coefficients_csv, ConsistencyStats};
use glucoshield::patients::{default_cohort, find_patient, load_cohort, prepare_patient, DiabetesType, PatientParams};
use glucoshield::reward::ProxyModel;
use glucoshield::shield::{
    verify_reliability_bound, BoundSide, PredictorKind, ReliabilityConfig, ReliabilityReport, SyntheticOracle,
};
use glucoshield::{Result, SimError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::policy::{calibrate_dosing, Policy, PolicySpec};
use crate::runner::{run_episode, EpisodeResult, ShieldKind, ShieldSettings};

/// Directory holding `patients.csv`, overriding the bundled table.
pub const DATA_DIR_VAR: &str = "GLUCO_DATA_DIR";

pub fn table_from_env() -> Option<PathBuf> {
    std::env::var_os(DATA_DIR_VAR).map(|d| PathBuf::from(d).join("patients.csv"))
}

pub fn load_table(path: Option<&Path>) -> Result<Vec<PatientParams>> {
    match path {
        Some(p) => load_cohort(p),
        None => default_cohort(),
    }
}

#[derive(Debug, Clone)]
pub struct SimulateOptions {
    pub patient: String,
    /// Patient the dosing and forecaster are calibrated on; `<cohort>#001` by default.
    pub train: Option<String>,
    pub diabetes_type: DiabetesType,
    pub policy: PolicySpec,
    pub shield: ShieldKind,
    pub days: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub table: Option<PathBuf>,
}

/// Runs one episode and, when `out` is set, writes `episode.csv`,
/// `shield.jsonl` and `summary.json` there.
pub fn simulate(opts: &SimulateOptions) -> Result<EpisodeResult> {
    let table = load_table(opts.table.as_deref())?;
    let train_id = match &opts.train {
        Some(t) => t.clone(),
        None => {
            let cohort = opts.patient.split('#').next().unwrap_or_default();
            format!("{cohort}#001")
        }
    };
    let sc = ScenarioConfig {
        seed: opts.seed,
        patient_id: opts.patient.clone(),
        diabetes_type: opts.diabetes_type,
        horizon_days: opts.days,
        ..ScenarioConfig::default()
    };
    sc.validate()?;
    opts.policy.validate().map_err(SimError::Config)?;
    let p = prepare_patient(find_patient(&table, &opts.patient)?, opts.diabetes_type, sc.tuning)?;
    let train = prepare_patient(find_patient(&table, &train_id)?, opts.diabetes_type, sc.tuning)?;
    let cal = calibrate_dosing(&train, &sc)?;
    let basis = cal.anchor(&ProxyModel::for_patient(&train, &sc.proxy));
    let policy = Policy::new(opts.policy.clone(), cal, &p);
    let result = run_episode(p, &basis, &policy, opts.shield, sc, &ShieldSettings::default())?;

    if let Some(dir) = &opts.out {
        std::fs::create_dir_all(dir)?;
        result.record.write_csv(BufWriter::new(File::create(dir.join("episode.csv"))?))?;
        let mut log = BufWriter::new(File::create(dir.join("shield.jsonl"))?);
        for d in &result.decisions {
            writeln!(log, "{}", d.to_json_line())?;
        }
        log.flush()?;
        std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&result.summary)?)?;
    }
    Ok(result)
}

/// Reliability reports: hypo and hyper sides with a reliable predictor, then
/// the hypo side with an adversarial predictor as a negative control.
pub fn verify_theorem(epsilon: f64, alpha: f64, trials: usize, seed: u64) -> Result<Vec<(String, ReliabilityReport)>> {
    let oracle = SyntheticOracle::default();
    let reliable = PredictorKind::Reliable { excess: 40.0 };
    let cases = [
        ("hypo", reliable, BoundSide::Hypo),
        ("hyper", reliable, BoundSide::Hyper),
        ("adversarial", PredictorKind::Adversarial { bias: epsilon + 40.0 }, BoundSide::Hypo),
    ];
    cases
        .into_iter()
        .map(|(name, predictor, side)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cfg = ReliabilityConfig::new(epsilon, alpha, trials, side);
            Ok((name.to_string(), verify_reliability_bound(&oracle, predictor, &cfg, &mut rng)?))
        })
        .collect()
}

pub fn analyze_coeffs(input: &Path) -> Result<ConsistencyStats> {
    let groups = read_coefficients_csv(File::open(input)?)?;
    let samples: Vec<Vec<Vec<f64>>> = groups.into_iter().map(|(_, v)| v).collect();
    coefficient_consistency(&samples)
}
