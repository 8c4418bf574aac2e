//! Patient table loading and cohort statistics.

use std::path::Path;

use serde::Serialize;

use super::params::{Cohort, PatientParams};
use crate::error::{Result, SimError};

/// The bundled 30-patient table (10 per cohort).
pub const DEFAULT_TABLE: &str = include_str!("../../../../data/patients.csv");

/// Parses and validates a delimited patient table with a header row.
pub fn parse_cohort(text: &str) -> Result<Vec<PatientParams>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = rdr.headers()?.clone();
    let id_col = headers.iter().position(|h| h == "id");
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let id = id_col
            .and_then(|c| rec.get(c))
            .unwrap_or("<unknown>")
            .to_string();
        let p: PatientParams = rec.deserialize(Some(&headers)).map_err(|e| {
            SimError::Load(format!("record {} (`{id}`): {e}", row + 1))
        })?;
        p.validate()?;
        out.push(p);
    }
    if out.is_empty() {
        return Err(SimError::Load("table contains no patient records".into()));
    }
    Ok(out)
}

pub fn load_cohort(path: &Path) -> Result<Vec<PatientParams>> {
    let text = std::fs::read_to_string(path)?;
    parse_cohort(&text)
}

pub fn default_cohort() -> Result<Vec<PatientParams>> {
    parse_cohort(DEFAULT_TABLE)
}

/// Looks up a record by id.
pub fn find_patient<'a>(patients: &'a [PatientParams], id: &str) -> Result<&'a PatientParams> {
    patients
        .iter()
        .find(|p| p.id == id)
        .ok_or_else(|| SimError::InvalidInput(format!("unknown patient `{id}`")))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldStats {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl FieldStats {
    fn of(values: impl Iterator<Item = f64>) -> Self {
        let (mut n, mut sum, mut min, mut max) = (0usize, 0.0, f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            n += 1;
            sum += v;
            min = min.min(v);
            max = max.max(v);
        }
        Self {
            mean: sum / n as f64,
            min,
            max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CohortStats {
    pub cohort: Cohort,
    pub n: usize,
    pub bw: FieldStats,
    pub gb: FieldStats,
    pub ib: FieldStats,
    pub egpb: FieldStats,
    pub vg: FieldStats,
    pub vi: FieldStats,
}

/// Per-cohort summary of the basal physiology, in cohort order.
/// Cohorts without records are omitted.
pub fn cohort_stats(patients: &[PatientParams]) -> Vec<CohortStats> {
    Cohort::ALL
        .iter()
        .filter_map(|&c| {
            let members: Vec<&PatientParams> = patients.iter().filter(|p| p.cohort == c).collect();
            if members.is_empty() {
                return None;
            }
            let field = |f: fn(&PatientParams) -> f64| FieldStats::of(members.iter().map(|p| f(p)));
            Some(CohortStats {
                cohort: c,
                n: members.len(),
                bw: field(|p| p.bw),
                gb: field(|p| p.gb),
                ib: field(|p| p.ib),
                egpb: field(|p| p.egpb),
                vg: field(|p| p.vg),
                vi: field(|p| p.vi),
            })
        })
        .collect()
}
