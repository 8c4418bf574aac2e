//! ID-vs-OOD benchmark: every (type, cohort, policy, shield, seed) on the
//! training patient and the evaluation patients, then aggregate tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use glucoshield::environment::ScenarioConfig;
use glucoshield::metrics::{generalization_gap, mean_std, pearson, ClinicalSummary};
use glucoshield::patients::{
    find_patient, parse_cohort, prepare_patient, Cohort, DiabetesType, PatientParams, DEFAULT_TABLE,
};
use glucoshield::reward::ProxyModel;
use glucoshield::{Result, SimError};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::policy::{calibrate_dosing, DosingCalibration, Policy, PolicySpec};
use crate::runner::{run_episode, ShieldKind, ShieldSettings};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkConfig {
    pub types: Vec<DiabetesType>,
    pub cohorts: Vec<Cohort>,
    /// Patient number within each cohort used as the in-distribution patient.
    pub train_index: u32,
    pub eval_indices: Vec<u32>,
    pub seeds: Vec<u64>,
    pub shields: Vec<ShieldKind>,
    pub policies: Vec<PolicySpec>,
    pub horizon_days: usize,
    pub output_dir: PathBuf,
    /// Worker threads; 0 uses the available parallelism.
    pub workers: usize,
    /// Patient table CSV; the bundled table when unset.
    pub patient_table: Option<PathBuf>,
    /// Base scenario; seed, patient, type and horizon are set per run.
    pub scenario: ScenarioConfig,
    pub shield: ShieldSettings,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            types: DiabetesType::ALL.to_vec(),
            cohorts: Cohort::ALL.to_vec(),
            train_index: 1,
            eval_indices: (2..=10).collect(),
            seeds: vec![1, 2, 3],
            shields: ShieldKind::ALL.to_vec(),
            policies: vec![PolicySpec::default()],
            horizon_days: 7,
            output_dir: PathBuf::from("bench_out"),
            workers: 0,
            patient_table: None,
            scenario: ScenarioConfig::default(),
            shield: ShieldSettings::default(),
        }
    }
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SimError::Config(m));
        if self.eval_indices.contains(&self.train_index) {
            return bad(format!("train patient {} is also an eval patient", self.train_index));
        }
        if self.seeds.is_empty() {
            return bad("seeds must be non-empty".into());
        }
        if self.types.is_empty() || self.cohorts.is_empty() || self.shields.is_empty() || self.policies.is_empty() {
            return bad("types, cohorts, shields and policies must be non-empty".into());
        }
        if self.horizon_days == 0 {
            return bad("horizon_days must be at least 1".into());
        }
        for p in &self.policies {
            p.validate().map_err(SimError::Config)?;
        }
        self.scenario.validate()?;
        self.shield.predictive.validate()?;
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| SimError::Config(e.to_string()))
    }

    /// Labels used in the tables: the policy kind, suffixed with its position
    /// when a kind appears more than once.
    pub fn policy_labels(&self) -> Vec<String> {
        self.policies
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let k = p.kind.as_str();
                if self.policies.iter().filter(|q| q.kind == p.kind).count() > 1 {
                    format!("{k}{i}")
                } else {
                    k.to_string()
                }
            })
            .collect()
    }

    /// Number of episodes the benchmark will run.
    pub fn n_runs(&self) -> usize {
        self.types.len()
            * self.cohorts.len()
            * self.policies.len()
            * self.shields.len()
            * self.seeds.len()
            * (1 + self.eval_indices.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Id,
    Ood,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Id => "id",
            Split::Ood => "ood",
        }
    }
}

pub fn patient_id(cohort: Cohort, index: u32) -> String {
    format!("{}#{index:03}", cohort.as_str())
}

/// Hash of the bytes as a git blob object, with SHA-256.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub diabetes_type: DiabetesType,
    pub cohort: Cohort,
    pub policy: String,
    pub shield: ShieldKind,
    pub split: Split,
    pub patient: String,
    pub seed: u64,
    pub steps: usize,
    pub termination: String,
    pub first_intervention: Option<usize>,
    pub summary: Option<ClinicalSummary>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct GroupKey {
    pub diabetes_type: DiabetesType,
    pub cohort: Cohort,
    pub policy: String,
    pub shield: ShieldKind,
    pub split: Split,
}

impl GroupKey {
    fn of(r: &RunRow) -> Self {
        Self {
            diabetes_type: r.diabetes_type,
            cohort: r.cohort,
            policy: r.policy.clone(),
            shield: r.shield,
            split: r.split,
        }
    }
}

/// Metric means and standard deviations across seeds. Each seed contributes
/// the mean over the group's patients.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Aggregate {
    pub runs: usize,
    pub failed: usize,
    pub mean: ClinicalSummary,
    pub std: ClinicalSummary,
}

const METRICS: [&str; 7] = ["tir", "cv", "risk", "hypo", "hyper", "reward", "cost"];

fn fields(s: &ClinicalSummary) -> [f64; 7] {
    [
        s.tir_pct,
        s.cv_pct,
        s.mean_risk_index,
        s.hypo_event_pct,
        s.hyper_event_pct,
        s.reward_sum,
        s.cost_sum,
    ]
}

fn from_fields(v: [f64; 7]) -> ClinicalSummary {
    ClinicalSummary {
        tir_pct: v[0],
        cv_pct: v[1],
        mean_risk_index: v[2],
        hypo_event_pct: v[3],
        hyper_event_pct: v[4],
        reward_sum: v[5],
        cost_sum: v[6],
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Correlation {
    pub scope: String,
    pub n: usize,
    pub reward_tir: Option<f64>,
    pub cost_risk: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct BenchmarkReport {
    pub config: BenchmarkConfig,
    pub table_hash: String,
    pub runs: Vec<RunRow>,
    pub groups: BTreeMap<GroupKey, Aggregate>,
    pub correlations: Vec<Correlation>,
}

struct Job {
    ty: DiabetesType,
    cohort: Cohort,
    policy: usize,
    shield: ShieldKind,
    split: Split,
    index: u32,
    seed: u64,
}

struct Prepared {
    basis: ProxyModel,
    cal: DosingCalibration,
    patients: BTreeMap<u32, PatientParams>,
}

fn prepare(
    table: &[PatientParams],
    cfg: &BenchmarkConfig,
    ty: DiabetesType,
    cohort: Cohort,
) -> Result<Prepared> {
    let mut patients = BTreeMap::new();
    for &i in std::iter::once(&cfg.train_index).chain(&cfg.eval_indices) {
        let raw = find_patient(table, &patient_id(cohort, i))?;
        patients.insert(i, prepare_patient(raw, ty, cfg.scenario.tuning)?);
    }
    let train = &patients[&cfg.train_index];
    let mut sc = cfg.scenario.clone();
    sc.diabetes_type = ty;
    let cal = calibrate_dosing(train, &sc)?;
    let basis = cal.anchor(&ProxyModel::for_patient(train, &sc.proxy));
    Ok(Prepared { basis, cal, patients })
}

fn execute(job: &Job, prep: &Result<Prepared>, cfg: &BenchmarkConfig, label: &str) -> RunRow {
    let mut row = RunRow {
        diabetes_type: job.ty,
        cohort: job.cohort,
        policy: label.to_string(),
        shield: job.shield,
        split: job.split,
        patient: patient_id(job.cohort, job.index),
        seed: job.seed,
        steps: 0,
        termination: String::new(),
        first_intervention: None,
        summary: None,
        error: None,
    };
    let run = || -> Result<_> {
        let prep = prep.as_ref().map_err(|e| SimError::Config(format!("setup failed: {e}")))?;
        let p = &prep.patients[&job.index];
        let policy = Policy::new(cfg.policies[job.policy].clone(), prep.cal, p);
        let mut sc = cfg.scenario.clone();
        sc.seed = job.seed;
        sc.patient_id = row.patient.clone();
        sc.diabetes_type = job.ty;
        sc.horizon_days = cfg.horizon_days;
        run_episode(p.clone(), &prep.basis, &policy, job.shield, sc, &cfg.shield)
    };
    match run() {
        Ok(r) => {
            row.steps = r.record.steps.len();
            row.termination = r.record.termination.map(|t| t.as_str().to_string()).unwrap_or_default();
            row.first_intervention = r.first_intervention;
            row.summary = Some(r.summary);
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

fn worker_count(cfg: &BenchmarkConfig) -> usize {
    if cfg.workers > 0 {
        cfg.workers
    } else {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    }
}

/// Runs every episode and aggregates; writes nothing.
pub fn evaluate(cfg: &BenchmarkConfig) -> Result<BenchmarkReport> {
    cfg.validate()?;
    let text = match &cfg.patient_table {
        Some(p) => std::fs::read_to_string(p)?,
        None => DEFAULT_TABLE.to_string(),
    };
    let table = parse_cohort(&text)?;
    let labels = cfg.policy_labels();

    let mut prepared = BTreeMap::new();
    for &ty in &cfg.types {
        for &c in &cfg.cohorts {
            prepared.insert((ty, c), prepare(&table, cfg, ty, c));
        }
    }

    let mut jobs = Vec::with_capacity(cfg.n_runs());
    for &ty in &cfg.types {
        for &cohort in &cfg.cohorts {
            for policy in 0..cfg.policies.len() {
                for &shield in &cfg.shields {
                    let split_of = |i: u32| if i == cfg.train_index { Split::Id } else { Split::Ood };
                    for &index in std::iter::once(&cfg.train_index).chain(&cfg.eval_indices) {
                        for &seed in &cfg.seeds {
                            jobs.push(Job {
                                ty,
                                cohort,
                                policy,
                                shield,
                                split: split_of(index),
                                index,
                                seed,
                            });
                        }
                    }
                }
            }
        }
    }

    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<RunRow>>> = Mutex::new(vec![None; jobs.len()]);
    std::thread::scope(|s| {
        for _ in 0..worker_count(cfg).min(jobs.len()) {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = jobs.get(k) else { break };
                let row = execute(job, &prepared[&(job.ty, job.cohort)], cfg, &labels[job.policy]);
                slots.lock().expect("result slots poisoned")[k] = Some(row);
            });
        }
    });
    let runs: Vec<RunRow> = slots
        .into_inner()
        .expect("result slots poisoned")
        .into_iter()
        .map(|r| r.expect("every job yields a row"))
        .collect();

    let groups = aggregate(&runs);
    let correlations = correlations(&runs, &labels);
    Ok(BenchmarkReport {
        config: cfg.clone(),
        table_hash: content_hash(text.as_bytes()),
        runs,
        groups,
        correlations,
    })
}

fn aggregate(runs: &[RunRow]) -> BTreeMap<GroupKey, Aggregate> {
    let mut by_group: BTreeMap<GroupKey, BTreeMap<u64, Vec<[f64; 7]>>> = BTreeMap::new();
    let mut counts: BTreeMap<GroupKey, (usize, usize)> = BTreeMap::new();
    for r in runs {
        let key = GroupKey::of(r);
        let c = counts.entry(key.clone()).or_default();
        c.0 += 1;
        match &r.summary {
            Some(s) => by_group.entry(key).or_default().entry(r.seed).or_default().push(fields(s)),
            None => c.1 += 1,
        }
    }
    counts
        .into_iter()
        .map(|(key, (n, failed))| {
            let mut mean = [f64::NAN; 7];
            let mut std = [f64::NAN; 7];
            if let Some(seeds) = by_group.get(&key) {
                for j in 0..7 {
                    let per_seed: Vec<f64> = seeds
                        .values()
                        .map(|v| v.iter().map(|f| f[j]).sum::<f64>() / v.len() as f64)
                        .collect();
                    (mean[j], std[j]) = mean_std(&per_seed);
                }
            }
            let agg = Aggregate {
                runs: n,
                failed,
                mean: from_fields(mean),
                std: from_fields(std),
            };
            (key, agg)
        })
        .collect()
}

fn correlations(runs: &[RunRow], labels: &[String]) -> Vec<Correlation> {
    let mut scopes: Vec<String> = vec!["all".into()];
    let mut uniq = labels.to_vec();
    uniq.sort();
    uniq.dedup();
    if uniq.len() > 1 {
        scopes.extend(uniq);
    }
    scopes
        .into_iter()
        .map(|scope| {
            let done: Vec<&ClinicalSummary> = runs
                .iter()
                .filter(|r| scope == "all" || r.policy == scope)
                .filter_map(|r| r.summary.as_ref())
                .collect();
            let col = |f: fn(&ClinicalSummary) -> f64| done.iter().map(|s| f(s)).collect::<Vec<_>>();
            Correlation {
                n: done.len(),
                reward_tir: pearson(&col(|s| s.reward_sum), &col(|s| s.tir_pct)).ok(),
                cost_risk: pearson(&col(|s| s.cost_sum), &col(|s| s.mean_risk_index)).ok(),
                scope,
            }
        })
        .collect()
}

fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.6}")
    }
}

fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_else(|| "nan".into())
}

/// A shielded group paired with the unshielded group sharing its other keys.
#[derive(Debug, Clone, PartialEq)]
pub struct ShieldDelta {
    pub key: GroupKey,
    pub d_tir: f64,
    pub d_risk: f64,
    pub d_cv: f64,
    pub d_hypo: f64,
    pub d_hyper: f64,
}

/// ID and OOD summaries of one (type, cohort, policy, shield).
#[derive(Debug, Clone, PartialEq)]
pub struct GapRow {
    pub key: GroupKey,
    pub id: ClinicalSummary,
    pub ood: ClinicalSummary,
    pub d_tir: f64,
    pub d_risk: f64,
}

impl BenchmarkReport {
    pub fn failures(&self) -> usize {
        self.runs.iter().filter(|r| r.error.is_some()).count()
    }

    pub fn shield_deltas(&self) -> Vec<ShieldDelta> {
        self.groups
            .iter()
            .filter(|(k, _)| k.shield != ShieldKind::None)
            .filter_map(|(k, a)| {
                let base = self.groups.get(&GroupKey {
                    shield: ShieldKind::None,
                    ..k.clone()
                })?;
                let (s, b) = (&a.mean, &base.mean);
                Some(ShieldDelta {
                    key: k.clone(),
                    d_tir: s.tir_pct - b.tir_pct,
                    d_risk: s.mean_risk_index - b.mean_risk_index,
                    d_cv: s.cv_pct - b.cv_pct,
                    d_hypo: s.hypo_event_pct - b.hypo_event_pct,
                    d_hyper: s.hyper_event_pct - b.hyper_event_pct,
                })
            })
            .collect()
    }

    pub fn generalization_gaps(&self) -> Vec<GapRow> {
        self.groups
            .iter()
            .filter(|(k, _)| k.split == Split::Id)
            .filter_map(|(k, a)| {
                let ood = self.groups.get(&GroupKey {
                    split: Split::Ood,
                    ..k.clone()
                })?;
                let (d_tir, d_risk) = generalization_gap(&a.mean, &ood.mean);
                Some(GapRow {
                    key: k.clone(),
                    id: a.mean,
                    ood: ood.mean,
                    d_tir,
                    d_risk,
                })
            })
            .collect()
    }

    pub fn runs_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec![
            "type", "cohort", "policy", "shield", "split", "patient", "seed", "steps", "termination",
            "first_intervention",
        ];
        header.extend(["tir_pct", "cv_pct", "mean_risk_index", "hypo_event_pct", "hyper_event_pct"]);
        header.extend(["reward_sum", "cost_sum", "status", "error"]);
        w.write_record(&header)?;
        for r in &self.runs {
            let mut rec = vec![
                r.diabetes_type.as_str().to_string(),
                r.cohort.as_str().to_string(),
                r.policy.clone(),
                r.shield.as_str().to_string(),
                r.split.as_str().to_string(),
                r.patient.clone(),
                r.seed.to_string(),
                r.steps.to_string(),
                r.termination.clone(),
                r.first_intervention.map(|v| v.to_string()).unwrap_or_default(),
            ];
            match &r.summary {
                Some(s) => rec.extend(fields(s).iter().map(|v| num(*v))),
                None => rec.extend(std::iter::repeat_n(String::new(), 7)),
            }
            rec.push(if r.error.is_some() { "failed" } else { "ok" }.into());
            rec.push(r.error.clone().unwrap_or_default());
            w.write_record(&rec)?;
        }
        finish(w)
    }

    pub fn summary_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = ["type", "cohort", "policy", "shield", "split", "runs", "failed"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        for m in METRICS {
            header.push(format!("{m}_mean"));
            header.push(format!("{m}_std"));
        }
        w.write_record(&header)?;
        for (k, a) in &self.groups {
            let mut rec = key_fields(k);
            rec.push(k.split.as_str().into());
            rec.push(a.runs.to_string());
            rec.push(a.failed.to_string());
            for (m, s) in fields(&a.mean).iter().zip(fields(&a.std)) {
                rec.push(num(*m));
                rec.push(num(s));
            }
            w.write_record(&rec)?;
        }
        finish(w)
    }

    pub fn gap_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "type", "cohort", "policy", "shield", "id_tir", "ood_tir", "delta_tir", "id_risk", "ood_risk", "delta_risk",
        ])?;
        for g in self.generalization_gaps() {
            let mut rec = key_fields(&g.key);
            rec.extend([g.id.tir_pct, g.ood.tir_pct, g.d_tir, g.id.mean_risk_index, g.ood.mean_risk_index, g.d_risk].map(num));
            w.write_record(&rec)?;
        }
        finish(w)
    }

    pub fn shield_delta_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "type", "cohort", "policy", "shield", "split", "delta_tir", "delta_risk", "delta_cv", "delta_hypo",
            "delta_hyper",
        ])?;
        for d in self.shield_deltas() {
            let mut rec = key_fields(&d.key);
            rec.push(d.key.split.as_str().into());
            rec.extend([d.d_tir, d.d_risk, d.d_cv, d.d_hypo, d.d_hyper].map(num));
            w.write_record(&rec)?;
        }
        finish(w)
    }

    pub fn correlations_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["scope", "episodes", "reward_tir_r", "cost_risk_r"])?;
        for c in &self.correlations {
            w.write_record([c.scope.clone(), c.n.to_string(), opt_num(c.reward_tir), opt_num(c.cost_risk)])?;
        }
        finish(w)
    }

    pub fn text_summary(&self) -> String {
        let mut s = String::new();
        let cfg = &self.config;
        let _ = writeln!(s, "runs: {} ({} failed)", self.runs.len(), self.failures());
        let _ = writeln!(s, "horizon: {} days, seeds: {:?}", cfg.horizon_days, cfg.seeds);
        let _ = writeln!(s, "patient table: sha256 {}", self.table_hash);
        let _ = writeln!(s);
        let _ = writeln!(s, "{:<12} {:<11} {:<10} {:<11} {:<4} {:>14} {:>8} {:>8} {:>8}", "type", "cohort", "policy", "shield", "split", "tir", "hypo", "hyper", "risk");
        for (k, a) in &self.groups {
            let _ = writeln!(
                s,
                "{:<12} {:<11} {:<10} {:<11} {:<4} {:>7.2} ± {:<4.2} {:>8.3} {:>8.2} {:>8.2}",
                k.diabetes_type.as_str(),
                k.cohort.as_str(),
                k.policy,
                k.shield.as_str(),
                k.split.as_str(),
                a.mean.tir_pct,
                a.std.tir_pct,
                a.mean.hypo_event_pct,
                a.mean.hyper_event_pct,
                a.mean.mean_risk_index,
            );
        }
        let _ = writeln!(s);
        for c in &self.correlations {
            let _ = writeln!(
                s,
                "correlation [{}] over {} episodes: reward~tir {}, cost~risk {}",
                c.scope,
                c.n,
                opt_num(c.reward_tir),
                opt_num(c.cost_risk)
            );
        }
        for r in self.runs.iter().filter(|r| r.error.is_some()) {
            let _ = writeln!(
                s,
                "FAILED {} {} {} {} seed {}: {}",
                r.diabetes_type.as_str(),
                r.patient,
                r.policy,
                r.shield.as_str(),
                r.seed,
                r.error.as_deref().unwrap_or_default()
            );
        }
        s
    }

    /// Writes all tables, the config snapshot and the table hash into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let files = [
            ("runs.csv", self.runs_csv()?),
            ("summary.csv", self.summary_csv()?),
            ("generalization_gap.csv", self.gap_csv()?),
            ("shield_delta.csv", self.shield_delta_csv()?),
            ("correlations.csv", self.correlations_csv()?),
            ("config.toml", self.config.to_toml_string()?),
            ("patient_table.sha256", format!("{}  patients.csv\n", self.table_hash)),
            ("summary.txt", self.text_summary()),
        ];
        for (name, body) in files {
            std::fs::write(dir.join(name), body)?;
        }
        Ok(())
    }
}

fn key_fields(k: &GroupKey) -> Vec<String> {
    vec![
        k.diabetes_type.as_str().into(),
        k.cohort.as_str().into(),
        k.policy.clone(),
        k.shield.as_str().into(),
    ]
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| SimError::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| SimError::InvalidInput(e.to_string()))
}

/// Runs the benchmark and writes the report into `cfg.output_dir`.
pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<BenchmarkReport> {
    let report = evaluate(cfg)?;
    report.write(&cfg.output_dir)?;
    Ok(report)
}
