//! Global tuning and diabetes-type adaptations.

use super::balance::{auto_balance, solve_pump_basal};
use super::params::{DiabetesType, PatientParams};
use crate::error::{Result, SimError};

/// Default scale applied to Vg and the basal glucose masses.
pub const GLOBAL_TUNING: f64 = 0.65;

pub const T1D_BASAL_U_PER_KG_H: f64 = 0.011;
pub const T1D_ABSORPTION_SCALE: f64 = 2.0;
pub const T1D_VMX_SCALE: f64 = 0.8;

pub const T2D_BW_SCALE: f64 = 1.15;
pub const T2D_POOL_SCALE: f64 = 1.25;
pub const T2D_HEPATIC_SCALE: f64 = 0.85;

/// Residual beta-cell fraction and insulin resistance per therapy.
pub const T2D_PUMP_BETA: f64 = 0.25;
pub const T2D_PUMP_RESISTANCE: f64 = 2.5;
pub const T2D_NO_PUMP_BETA: f64 = 0.30;
pub const T2D_NO_PUMP_RESISTANCE: f64 = 2.8;
pub const T2D_NO_PUMP_K_DERIV: f64 = 30.0;

/// Scales Vg, `gpb` and `gtb` by `factor`. Fails on an already tuned record.
pub fn apply_global_tuning(p: &PatientParams, factor: f64) -> Result<PatientParams> {
    if p.tuned {
        return Err(SimError::Adaptation(format!(
            "patient `{}` is already tuned",
            p.id
        )));
    }
    if !(factor.is_finite() && factor > 0.0) {
        return Err(SimError::Config(format!("tuning factor must be positive, got {factor}")));
    }
    let mut q = p.clone();
    q.vg *= factor;
    q.gpb *= factor;
    q.gtb *= factor;
    q.tuned = true;
    Ok(q)
}

fn ensure_unadapted(p: &PatientParams) -> Result<()> {
    match p.diabetes_type {
        Some(t) => Err(SimError::Adaptation(format!(
            "patient `{}` is already adapted as {t}",
            p.id
        ))),
        None => Ok(()),
    }
}

/// Type 1: no secretion, faster absorption, reduced uptake slope,
/// weight-based basal, then balanced.
pub fn adapt_t1d(p: &PatientParams) -> Result<PatientParams> {
    ensure_unadapted(p)?;
    let mut q = p.clone();
    q.diabetes_type = Some(DiabetesType::T1d);
    q.insulin_resistance = 1.0;
    q.s_b_kg = 0.0;
    q.beta_cell = 0.0;
    q.k_max *= T1D_ABSORPTION_SCALE;
    q.k_abs *= T1D_ABSORPTION_SCALE;
    q.v_mx *= T1D_VMX_SCALE;
    q.basal_rate = T1D_BASAL_U_PER_KG_H * q.bw;
    let q = auto_balance(&q)?;
    q.validate()?;
    Ok(q)
}

/// Type 2 with (`pump = true`) or without exogenous basal delivery.
pub fn adapt_t2d(p: &PatientParams, pump: bool) -> Result<PatientParams> {
    ensure_unadapted(p)?;
    let mut q = p.clone();
    q.bw *= T2D_BW_SCALE;
    q.vi *= T2D_POOL_SCALE;
    q.m30 *= T2D_HEPATIC_SCALE;

    let (ty, beta, resistance) = if pump {
        (DiabetesType::T2dPump, T2D_PUMP_BETA, T2D_PUMP_RESISTANCE)
    } else {
        (DiabetesType::T2dNoPump, T2D_NO_PUMP_BETA, T2D_NO_PUMP_RESISTANCE)
    };
    q.diabetes_type = Some(ty);
    q.insulin_resistance = resistance;
    q.beta_cell = beta;
    q.s_b_kg *= beta;
    q.si1 /= resistance;
    q.si2 /= resistance;
    q.si3 /= resistance;
    if !pump {
        q.k_deriv = T2D_NO_PUMP_K_DERIV;
    }
    q.egp0 = q.egpb * q.bw / 180.0;
    q.fcns0 = q.f_snc * q.bw / 180.0;
    q.basal_rate = if pump { solve_pump_basal(&q) } else { 0.0 };

    let q = auto_balance(&q)?;
    q.validate()?;
    Ok(q)
}

pub fn adapt(p: &PatientParams, ty: DiabetesType) -> Result<PatientParams> {
    match ty {
        DiabetesType::T1d => adapt_t1d(p),
        DiabetesType::T2dPump => adapt_t2d(p, true),
        DiabetesType::T2dNoPump => adapt_t2d(p, false),
    }
}

/// Table record to simulation-ready patient: tuning followed by adaptation.
pub fn prepare_patient(p: &PatientParams, ty: DiabetesType, tuning: f64) -> Result<PatientParams> {
    adapt(&apply_global_tuning(p, tuning)?, ty)
}
