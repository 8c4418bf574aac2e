//! Steady-state equilibrium and auto-balancing.

use super::params::PatientParams;
use crate::error::{Result, SimError};
use crate::physiology::dynamics::{derivatives, endogenous_secretion, CircadianConfig, PMOL_PER_UNIT};
use crate::physiology::state::{ControlInput, SimState, STATE_DIM};

/// Residual (max-abs derivative) below which the balance is accepted.
pub const BALANCE_TOL: f64 = 1e-10;
pub const MAX_ITERATIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalanceReport {
    /// Newton steps taken; 0 when the input was already balanced.
    pub iterations: usize,
    /// Max-abs derivative at the equilibrium after balancing.
    pub residual: f64,
}

/// Basal insulin delivery in U/min.
pub fn basal_input(p: &PatientParams) -> ControlInput {
    ControlInput::basal(p.basal_rate / 60.0)
}

/// Steady-state secretion drive Y (mU/min) and portal flux (pmol/kg/min) at basal glucose.
pub fn basal_secretion(p: &PatientParams) -> (f64, f64) {
    if !p.is_t2d() {
        return (0.0, 0.0);
    }
    let g = p.gpb / p.vg / 18.0;
    let y = p.beta_s * (g - p.h).max(0.0) / p.alpha_s;
    let (_, s) = endogenous_secretion(y, p);
    (y, s)
}

/// Steady-state plasma and liver insulin masses (pmol/kg) for a given
/// subcutaneous appearance rate and portal secretion (both pmol/kg/min).
pub fn insulin_steady_state(p: &PatientParams, iir: f64, secretion: f64) -> (f64, f64) {
    let a = p.m1 + p.m30;
    let ip = (iir + p.m1 * secretion / a) / (p.m2 + p.m4 - p.m1 * p.m2 / a);
    let il = (p.m2 * ip + secretion) / a;
    (ip, il)
}

/// The state held fixed by basal inputs: empty gut, resting exercise block,
/// glucose at the basal masses and insulin at its basal steady state.
pub fn equilibrium_state(p: &PatientParams) -> SimState {
    let iir = basal_input(p).ins * PMOL_PER_UNIT / p.bw;
    let (y, s) = basal_secretion(p);
    let (ip, il) = insulin_steady_state(p, iir, s);
    let isc1 = iir / (p.ka1 + p.kd);
    let isc2 = p.kd * isc1 / p.ka2;
    let insulin = ip / p.vi;

    let (x1, x2, x3) = if p.is_t2d() {
        let i_mu = insulin / 6.0;
        (
            p.si1 * i_mu / p.ka_r1,
            p.si2 * i_mu / p.ka_r2,
            p.si3 * i_mu / p.ka_r3,
        )
    } else {
        (insulin - p.ib, insulin, insulin)
    };

    SimState {
        gp: p.gpb,
        gt: p.gtb,
        x1,
        x2,
        x3,
        ip,
        il,
        isc1,
        isc2,
        gsc: p.gpb,
        te: p.c2.clamp(1.0, 600.0),
        y,
        gf: p.gpb / p.vg / 18.0,
        ..SimState::default()
    }
}

/// Derivatives at the equilibrium state under basal input, circadian off.
pub fn equilibrium_residual(p: &PatientParams) -> Result<[f64; STATE_DIM]> {
    let x = equilibrium_state(p);
    let d = derivatives(&x, &basal_input(p), p, 0.0, &CircadianConfig::disabled())?;
    Ok(d.to_array())
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn unknowns(p: &PatientParams) -> [f64; 2] {
    if p.is_t2d() {
        [p.v_m0, p.egp0]
    } else {
        [p.v_m0, p.k_p1]
    }
}

fn set_unknowns(p: &mut PatientParams, z: [f64; 2]) {
    p.v_m0 = z[0];
    if p.is_t2d() {
        p.egp0 = z[1];
    } else {
        p.k_p1 = z[1];
    }
}

fn glucose_residual(p: &PatientParams, z: [f64; 2]) -> Result<[f64; 2]> {
    let mut q = p.clone();
    set_unknowns(&mut q, z);
    let r = equilibrium_residual(&q)?;
    Ok([r[3], r[4]])
}

/// Recomputes the peripheral uptake offset `v_m0` and the production offset
/// (`k_p1`, or `egp0` for type 2) so that the basal state is a fixed point.
pub fn auto_balance(p: &PatientParams) -> Result<PatientParams> {
    auto_balance_with_report(p).map(|(q, _)| q)
}

pub fn auto_balance_with_report(p: &PatientParams) -> Result<(PatientParams, BalanceReport)> {
    if p.diabetes_type.is_none() {
        return Err(SimError::Adaptation(format!(
            "patient `{}` must be adapted before balancing",
            p.id
        )));
    }
    let mut q = p.clone();
    let mut z = unknowns(&q);
    let mut iterations = 0;
    loop {
        let full = max_abs(&equilibrium_residual(&q)?);
        if full < BALANCE_TOL {
            if z[0] <= 0.0 || z[1] <= 0.0 {
                return Err(SimError::Calibration {
                    iterations,
                    residual: full,
                    reason: format!("balanced offsets are not positive (v_m0 = {}, production = {})", z[0], z[1]),
                });
            }
            return Ok((q, BalanceReport { iterations, residual: full }));
        }
        if iterations >= MAX_ITERATIONS {
            return Err(SimError::Calibration {
                iterations,
                residual: full,
                reason: "no convergence".into(),
            });
        }
        iterations += 1;

        let r = glucose_residual(&q, z)?;
        let mut jac = [[0.0; 2]; 2];
        for j in 0..2 {
            let h = 1e-6 * z[j].abs().max(1.0);
            let mut zp = z;
            let mut zm = z;
            zp[j] += h;
            zm[j] -= h;
            let rp = glucose_residual(&q, zp)?;
            let rm = glucose_residual(&q, zm)?;
            for i in 0..2 {
                jac[i][j] = (rp[i] - rm[i]) / (2.0 * h);
            }
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let scale = max_abs(&[jac[0][0], jac[0][1], jac[1][0], jac[1][1]]).max(1e-300);
        if !det.is_finite() || det.abs() < 1e-12 * scale * scale {
            return Err(SimError::Calibration {
                iterations,
                residual: full,
                reason: "singular Jacobian (production clipped at zero?)".into(),
            });
        }
        let dz = [
            (jac[1][1] * r[0] - jac[0][1] * r[1]) / det,
            (-jac[1][0] * r[0] + jac[0][0] * r[1]) / det,
        ];

        let norm0 = max_abs(&r);
        let mut lambda = 1.0;
        let mut next = [z[0] - dz[0], z[1] - dz[1]];
        while lambda > 1e-6 {
            next = [z[0] - lambda * dz[0], z[1] - lambda * dz[1]];
            if max_abs(&glucose_residual(&q, next)?) < norm0 {
                break;
            }
            lambda *= 0.5;
        }
        z = next;
        set_unknowns(&mut q, z);
    }
}

/// Basal rate (U/h) that makes plasma insulin stationary at `ib` given the
/// basal secretion. Bisection; clamps to 0 when secretion alone suffices.
pub fn solve_pump_basal(p: &PatientParams) -> f64 {
    let (_, s) = basal_secretion(p);
    let ip = p.ib * p.vi;
    let il = (p.m2 * ip + s) / (p.m1 + p.m30);
    let dip = |rate_u_h: f64| {
        let iir = rate_u_h / 60.0 * PMOL_PER_UNIT / p.bw;
        -(p.m2 + p.m4) * ip + p.m1 * il + iir
    };
    if dip(0.0) >= 0.0 {
        return 0.0;
    }
    let mut hi = 1.0;
    while dip(hi) < 0.0 && hi < 1e4 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if dip(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    0.5 * (lo + hi)
}
