use std::io::Write;

use serde::Serialize;

use super::basis::BasisMatrix;
use super::solve::{predict, solve_coefficients, Coefficients, ContextSet};
use crate::error::{Result, SimError};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity; `None` when either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 || !na.is_finite() || !nb.is_finite() {
        return None;
    }
    Some(dot(a, b) / (na * nb))
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyStats {
    pub within_mean: f64,
    pub within_median: f64,
    pub between_mean: f64,
    pub between_median: f64,
    /// Fraction of samples whose most similar patient mean is their own.
    pub accuracy: f64,
    pub n_samples: usize,
    /// Zero-norm samples left out of every statistic.
    pub excluded: usize,
}

/// Within- and between-patient cosine similarity of coefficient samples.
/// `samples[i]` holds patient i's coefficient vectors.
pub fn coefficient_consistency(samples: &[Vec<Vec<f64>>]) -> Result<ConsistencyStats> {
    if samples.len() < 2 {
        return Err(SimError::InvalidInput("need at least two patients".into()));
    }
    if samples.iter().any(|s| s.len() < 2) {
        return Err(SimError::InvalidInput("need at least two samples per patient".into()));
    }
    let k = samples[0][0].len();
    if samples.iter().flatten().any(|w| w.len() != k) {
        return Err(SimError::Shape("coefficient vectors differ in length".into()));
    }
    let mut excluded = 0;
    let kept: Vec<Vec<&Vec<f64>>> = samples
        .iter()
        .map(|s| {
            s.iter()
                .filter(|w| {
                    let ok = norm(w) > 0.0 && w.iter().all(|v| v.is_finite());
                    if !ok {
                        excluded += 1;
                    }
                    ok
                })
                .collect()
        })
        .collect();
    let means: Vec<Vec<f64>> = kept
        .iter()
        .map(|s| {
            let mut m = vec![0.0; k];
            for w in s {
                for (a, b) in m.iter_mut().zip(w.iter()) {
                    *a += b;
                }
            }
            let n = s.len().max(1) as f64;
            m.iter_mut().for_each(|a| *a /= n);
            m
        })
        .collect();

    let mut within = Vec::new();
    let mut between = Vec::new();
    let mut correct = 0usize;
    let mut total = 0usize;
    for (i, s) in kept.iter().enumerate() {
        for w in s {
            total += 1;
            let mut best: Option<(usize, f64)> = None;
            for (j, mu) in means.iter().enumerate() {
                let Some(c) = cosine(w, mu) else { continue };
                if i == j {
                    within.push(c);
                } else {
                    between.push(c);
                }
                if best.is_none_or(|(_, b)| c > b) {
                    best = Some((j, c));
                }
            }
            if best.is_some_and(|(j, _)| j == i) {
                correct += 1;
            }
        }
    }
    Ok(ConsistencyStats {
        within_mean: mean(&within),
        within_median: median(&mut within),
        between_mean: mean(&between),
        between_median: median(&mut between),
        accuracy: if total == 0 { f64::NAN } else { correct as f64 / total as f64 },
        n_samples: total,
        excluded,
    })
}

/// A held-out query: basis evaluated at the origin, the observed value there
/// and the observed trajectory that followed.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryWindow {
    pub last_y: f64,
    pub basis: BasisMatrix,
    pub truth: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct PatientWindows {
    pub id: String,
    pub contexts: ContextSet,
    pub queries: Vec<QueryWindow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdaptationResult {
    pub id: String,
    pub static_mae: f64,
    pub adapted_mae: f64,
    pub adapted: Coefficients,
}

fn query_mae(queries: &[QueryWindow], w: &Coefficients) -> Result<f64> {
    let mut err = 0.0;
    let mut n = 0usize;
    for q in queries {
        let pred = predict(q.last_y, &q.basis, w)?;
        if pred.len() != q.truth.len() {
            return Err(SimError::Shape("query truth length differs from horizon".into()));
        }
        err += pred.iter().zip(&q.truth).map(|(a, b)| (a - b).abs()).sum::<f64>();
        n += pred.len();
    }
    Ok(if n == 0 { f64::NAN } else { err / n as f64 })
}

/// Static (population-mean coefficients) versus adapted (per-patient solve)
/// forecast error on each patient's query windows. The population should be
/// one diabetes type.
pub fn adaptation_comparison(patients: &[PatientWindows], lambda: f64) -> Result<Vec<AdaptationResult>> {
    if patients.is_empty() {
        return Ok(Vec::new());
    }
    let solved: Vec<Coefficients> = patients
        .iter()
        .map(|p| solve_coefficients(&p.contexts, lambda))
        .collect::<Result<_>>()?;
    let k = solved[0].w.len();
    let mut mean_w = vec![0.0; k];
    for c in &solved {
        for (m, v) in mean_w.iter_mut().zip(&c.w) {
            *m += v / solved.len() as f64;
        }
    }
    let global = Coefficients { w: mean_w, lambda };
    patients
        .iter()
        .zip(solved)
        .map(|(p, w)| {
            Ok(AdaptationResult {
                id: p.id.clone(),
                static_mae: query_mae(&p.queries, &global)?,
                adapted_mae: query_mae(&p.queries, &w)?,
                adapted: w,
            })
        })
        .collect()
}

/// One exported coefficient sample.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSample {
    pub patient_id: String,
    pub sample: usize,
    pub w: Vec<f64>,
}

/// Writes `patient_id,sample,w0..w{K-1}` rows.
pub fn write_coefficients_csv<W: Write>(out: W, rows: &[CoefficientSample]) -> Result<()> {
    let k = rows.first().map_or(0, |r| r.w.len());
    let mut wtr = csv::Writer::from_writer(out);
    let mut header = vec!["patient_id".to_string(), "sample".to_string()];
    header.extend((0..k).map(|j| format!("w{j}")));
    wtr.write_record(&header)?;
    for r in rows {
        if r.w.len() != k {
            return Err(SimError::Shape("coefficient rows differ in length".into()));
        }
        let mut rec = vec![r.patient_id.clone(), r.sample.to_string()];
        rec.extend(r.w.iter().map(|v| v.to_string()));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Groups rows written by [`write_coefficients_csv`] per patient, preserving
/// first-appearance order.
pub fn read_coefficients_csv<R: std::io::Read>(input: R) -> Result<Vec<(String, Vec<Vec<f64>>)>> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut out: Vec<(String, Vec<Vec<f64>>)> = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let id = rec.get(0).unwrap_or_default().to_string();
        let w = rec
            .iter()
            .skip(2)
            .map(|s| {
                s.trim().parse::<f64>().map_err(|e| SimError::InvalidRecord {
                    id: id.clone(),
                    reason: format!("row {}: {e}", line + 1),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        match out.iter_mut().find(|(p, _)| *p == id) {
            Some((_, v)) => v.push(w),
            None => out.push((id, vec![w])),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_patients() {
        let s = vec![
            vec![vec![1.0, 0.0, 0.0]; 3],
            vec![vec![0.0, 2.0, 0.0]; 3],
            vec![vec![0.0, 0.0, 0.5]; 3],
        ];
        let r = coefficient_consistency(&s).unwrap();
        assert!((r.within_mean - 1.0).abs() < 1e-12);
        assert!(r.between_mean.abs() < 1e-12);
        assert_eq!(r.accuracy, 1.0);
    }

    #[test]
    fn shared_vector_ties_to_first() {
        let s = vec![vec![vec![1.0, 1.0]; 4]; 5];
        let r = coefficient_consistency(&s).unwrap();
        assert!((r.within_mean - 1.0).abs() < 1e-12);
        assert!((r.between_mean - 1.0).abs() < 1e-12);
        assert!((r.accuracy - 0.2).abs() < 1e-12);
    }

    #[test]
    fn zero_vectors_excluded() {
        let s = vec![
            vec![vec![1.0, 0.0], vec![0.0, 0.0], vec![1.0, 0.1]],
            vec![vec![0.0, 1.0], vec![0.1, 1.0]],
        ];
        let r = coefficient_consistency(&s).unwrap();
        assert_eq!(r.excluded, 1);
        assert_eq!(r.n_samples, 4);
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![
            CoefficientSample { patient_id: "a".into(), sample: 0, w: vec![1.0, -0.5] },
            CoefficientSample { patient_id: "a".into(), sample: 1, w: vec![0.25, 2.0] },
            CoefficientSample { patient_id: "b".into(), sample: 0, w: vec![3.0, 0.0] },
        ];
        let mut buf = Vec::new();
        write_coefficients_csv(&mut buf, &rows).unwrap();
        let back = read_coefficients_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].1, vec![vec![1.0, -0.5], vec![0.25, 2.0]]);
    }
}
