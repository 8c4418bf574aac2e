//! Clinical outcome metrics and benchmark statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

pub const RANGE_LO: f64 = 70.0;
pub const RANGE_HI: f64 = 180.0;

fn non_empty(trace: &[f64]) -> Result<()> {
    if trace.is_empty() {
        Err(SimError::InvalidInput("empty glucose trace".into()))
    } else {
        Ok(())
    }
}

fn pct(trace: &[f64], pred: impl Fn(f64) -> bool) -> f64 {
    100.0 * trace.iter().filter(|&&g| pred(g)).count() as f64 / trace.len() as f64
}

/// Percentage of samples in the closed interval [70, 180].
pub fn tir(trace: &[f64]) -> Result<f64> {
    non_empty(trace)?;
    Ok(pct(trace, |g| (RANGE_LO..=RANGE_HI).contains(&g)))
}

/// Percentage of samples below 70.
pub fn hypo_pct(trace: &[f64]) -> Result<f64> {
    non_empty(trace)?;
    Ok(pct(trace, |g| g < RANGE_LO))
}

/// Percentage of samples above 180.
pub fn hyper_pct(trace: &[f64]) -> Result<f64> {
    non_empty(trace)?;
    Ok(pct(trace, |g| g > RANGE_HI))
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation.
pub fn std_pop(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Coefficient of variation in percent, population sigma.
pub fn cv(trace: &[f64]) -> Result<f64> {
    non_empty(trace)?;
    let m = mean(trace);
    if m <= 0.0 {
        return Err(SimError::InvalidInput(format!("CV needs a positive mean, got {m}")));
    }
    Ok(100.0 * std_pop(trace) / m)
}

/// Symmetrising transform `1.509 (ln(G)^1.084 - 5.381)`.
pub fn risk_transform(g: f64) -> f64 {
    1.509 * (g.ln().powf(1.084) - 5.381)
}

/// Per-sample risk `10 f(G)^2`.
pub fn risk_value(g: f64) -> f64 {
    let f = risk_transform(g);
    10.0 * f * f
}

/// Mean risk over the trace.
pub fn risk_index(trace: &[f64]) -> Result<f64> {
    non_empty(trace)?;
    if let Some(g) = trace.iter().find(|&&g| !(g > 1.0)) {
        return Err(SimError::InvalidInput(format!("risk index needs BG > 1, got {g}")));
    }
    Ok(mean(&trace.iter().map(|&g| risk_value(g)).collect::<Vec<_>>()))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClinicalSummary {
    pub tir_pct: f64,
    pub cv_pct: f64,
    pub mean_risk_index: f64,
    pub hypo_event_pct: f64,
    pub hyper_event_pct: f64,
    pub reward_sum: f64,
    pub cost_sum: f64,
}

impl ClinicalSummary {
    pub fn from_trace(trace: &[f64], reward_sum: f64, cost_sum: f64) -> Result<Self> {
        Ok(Self {
            tir_pct: tir(trace)?,
            cv_pct: cv(trace)?,
            mean_risk_index: risk_index(trace)?,
            hypo_event_pct: hypo_pct(trace)?,
            hyper_event_pct: hyper_pct(trace)?,
            reward_sum,
            cost_sum,
        })
    }
}

/// `(ood.tir - id.tir, ood.risk - id.risk)`; negative TIR change is degradation.
pub fn generalization_gap(id: &ClinicalSummary, ood: &ClinicalSummary) -> (f64, f64) {
    (
        ood.tir_pct - id.tir_pct,
        ood.mean_risk_index - id.mean_risk_index,
    )
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(SimError::InvalidInput(format!(
            "pearson needs equal lengths >= 3, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    let (mx, my) = (mean(xs), mean(ys));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(SimError::InvalidInput("pearson needs non-zero variance".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Mean and population standard deviation of a sample.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    (mean(xs), std_pop(xs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tir_and_cv() {
        assert_eq!(tir(&[120.0; 10]).unwrap(), 100.0);
        assert_eq!(tir(&[60.0, 120.0]).unwrap(), 50.0);
        assert_eq!(tir(&[70.0, 180.0]).unwrap(), 100.0);
        assert!(tir(&[]).is_err());
        assert_eq!(cv(&[5.0; 4]).unwrap(), 0.0);
        assert!((cv(&[100.0, 140.0]).unwrap() - 100.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn risk_values() {
        assert!((risk_value(50.0) - 22.5).abs() < 0.2);
        assert!((risk_value(180.0) - 7.7).abs() < 0.2);
        assert!(risk_index(&[1.0]).is_err());
    }

    #[test]
    fn gap_and_pearson() {
        let id = ClinicalSummary { tir_pct: 87.28, mean_risk_index: 4.09, ..Default::default() };
        let ood = ClinicalSummary { tir_pct: 76.73, mean_risk_index: 5.72, ..Default::default() };
        let (dt, dr) = generalization_gap(&id, &ood);
        assert!((dt + 10.55).abs() < 1e-9);
        assert!((dr - 1.63).abs() < 0.011);
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        assert!((pearson(&xs, &ys).unwrap() - 1.0).abs() < 1e-12);
        assert!(pearson(&xs, &[1.0; 4]).is_err());
    }
}
