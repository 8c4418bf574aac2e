//! Clinical risk cost, the auxiliary proxy forecaster, delta-risk reward,
//! shaping terms and the terminal penalty.

use serde::{Deserialize, Serialize};

use crate::patients::PatientParams;

/// Proxy glucose clip range (mg/dL).
pub const PROXY_RANGE: (f64, f64) = (40.0, 600.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RiskWeights {
    pub w_hypo_mild: f64,
    pub w_hypo_severe: f64,
    pub w_hyper_mild: f64,
    pub w_hyper_severe: f64,
    pub w_mom: f64,
    pub w_lowvel: f64,
    pub final_scale: f64,
}

impl Default for RiskWeights {
    fn default() -> Self {
        Self {
            w_hypo_mild: 3.0,
            w_hypo_severe: 10.0,
            w_hyper_mild: 1.0,
            w_hyper_severe: 4.0,
            w_mom: 0.015,
            w_lowvel: 0.1,
            final_scale: 0.35,
        }
    }
}

/// Six-term risk cost for glucose `bg` (mg/dL) and per-step change `dbg`.
pub fn risk_cost(bg: f64, dbg: f64, w: &RiskWeights) -> f64 {
    let hypo_mild = (70.0 - bg).max(0.0) / 20.0;
    let hypo_severe = (54.0 - bg).max(0.0) / 20.0;
    let hyper_mild = (bg - 180.0).max(0.0) / 50.0;
    let hyper_severe = (bg - 250.0).max(0.0) / 50.0;
    w.w_hypo_mild * hypo_mild
        + w.w_hypo_severe * hypo_severe * hypo_severe
        + w.w_hyper_mild * hyper_mild
        + w.w_hyper_severe * hyper_severe * hyper_severe
        + w.w_mom * (bg - 160.0).max(0.0) * dbg.max(0.0)
        + w.w_lowvel * (-(dbg + 2.0)).max(0.0)
}

/// Scaled cost reported to the constrained learner.
pub fn final_cost(bg: f64, dbg: f64, w: &RiskWeights) -> f64 {
    w.final_scale * risk_cost(bg, dbg, w)
}

/// Sum of risk costs along a trajectory starting after `bg0`.
pub fn trajectory_risk(bg0: f64, traj: &[f64], w: &RiskWeights) -> f64 {
    let mut prev = bg0;
    traj.iter()
        .map(|&bg| {
            let c = risk_cost(bg, bg - prev, w);
            prev = bg;
            c
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProxyConfig {
    /// Carbohydrate absorption efficiency in the sensitivity factor.
    pub phi: f64,
    pub k_endo: f64,
    /// Rollout horizon in control steps.
    pub horizon: usize,
    pub step_min: usize,
    pub kernel_len: usize,
    pub carb_alpha: f64,
    pub carb_beta: f64,
    pub ins_alpha: f64,
    pub ins_beta: f64,
}

impl Default for ProxyConfig {
    fn default() -> Self {
        Self {
            phi: 0.35,
            k_endo: 0.02,
            horizon: 24,
            step_min: 5,
            kernel_len: 300,
            carb_alpha: 2.0,
            carb_beta: 20.0,
            // peak at (alpha - 1) * beta = 75 min
            ins_alpha: 3.0,
            ins_beta: 37.5,
        }
    }
}

/// Normalized gamma-shaped kernel sampled at integer minutes `0..len`.
pub fn gamma_kernel(alpha: f64, beta: f64, len: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..len)
        .map(|j| {
            let tau = j as f64;
            tau.powf(alpha - 1.0) * (-tau / beta).exp()
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Minute-resolved input streams for the proxy.
///
/// `carb` holds ingested carbohydrate (g/min) and `insulin` holds insulin in
/// excess of the basal rate (U/min); both are indexed by absolute minute and
/// may extend past `now` when future inputs are known.
#[derive(Debug, Clone, Copy)]
pub struct ProxyInputs<'a> {
    pub carb: &'a [f64],
    pub insulin: &'a [f64],
    /// First minute of the interval being forecast.
    pub now: usize,
}

/// Lightweight convolution forecaster used for reward shaping and as the
/// basis generator of the forecaster bank.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxyModel {
    pub k_carb: Vec<f64>,
    pub k_ins: Vec<f64>,
    /// mg/dL per g.
    pub csf: f64,
    /// mg/dL per U.
    pub isf: f64,
    pub k_endo: f64,
    pub beta_func: f64,
    pub gb: f64,
    pub horizon: usize,
    pub step_min: usize,
}

impl ProxyModel {
    pub fn for_patient(p: &PatientParams, cfg: &ProxyConfig) -> Self {
        Self {
            k_carb: gamma_kernel(cfg.carb_alpha, cfg.carb_beta, cfg.kernel_len),
            k_ins: gamma_kernel(cfg.ins_alpha, cfg.ins_beta, cfg.kernel_len),
            csf: carb_sensitivity(cfg.phi, p.bw, p.vg),
            isf: p.isf(),
            k_endo: cfg.k_endo,
            beta_func: p.beta_func(),
            gb: p.gb,
            horizon: cfg.horizon,
            step_min: cfg.step_min,
        }
    }

    /// Copy with scaled carbohydrate and insulin sensitivities.
    pub fn scaled(&self, csf_mult: f64, isf_mult: f64) -> Self {
        Self {
            csf: self.csf * csf_mult,
            isf: self.isf * isf_mult,
            ..self.clone()
        }
    }

    /// Per-step kernel-weighted sums of `stream` over the horizon, before
    /// sensitivity scaling.
    pub fn convolve_steps(&self, kernel: &[f64], stream: &[f64], now: usize) -> Vec<f64> {
        let len = self.horizon * self.step_min;
        let mut minute = vec![0.0; len];
        let start = now.saturating_sub(kernel.len() - 1);
        let end = (now + len).min(stream.len());
        for (src, &v) in stream.iter().enumerate().take(end).skip(start) {
            if v == 0.0 {
                continue;
            }
            // source minute `src` contributes v * K[m - src] at minute m >= now
            let first = now.max(src);
            for m in first..now + len {
                let lag = m - src;
                if lag >= kernel.len() {
                    break;
                }
                minute[m - now] += v * kernel[lag];
            }
        }
        minute
            .chunks(self.step_min)
            .map(|c| c.iter().sum())
            .collect()
    }

    /// Raw per-step carbohydrate and insulin drives (g and U per step).
    pub fn drives(&self, inputs: &ProxyInputs) -> (Vec<f64>, Vec<f64>) {
        (
            self.convolve_steps(&self.k_carb, inputs.carb, inputs.now),
            self.convolve_steps(&self.k_ins, inputs.insulin, inputs.now),
        )
    }

    /// Rolls out from `bg0` given raw per-step drives.
    pub fn rollout_from_drives(&self, bg0: f64, carb: &[f64], ins: &[f64]) -> Vec<f64> {
        let mut bg = bg0;
        let dt = self.step_min as f64;
        (0..self.horizon)
            .map(|k| {
                let d_carb = carb.get(k).copied().unwrap_or(0.0) * self.csf;
                let d_ins = ins.get(k).copied().unwrap_or(0.0) * self.isf;
                let d_endo = self.beta_func * self.k_endo * (bg - self.gb).max(0.0) * dt;
                bg = (bg + d_carb - d_ins - d_endo).clamp(PROXY_RANGE.0, PROXY_RANGE.1);
                bg
            })
            .collect()
    }

    pub fn rollout(&self, bg0: f64, inputs: &ProxyInputs) -> Vec<f64> {
        let (c, i) = self.drives(inputs);
        self.rollout_from_drives(bg0, &c, &i)
    }

    /// Raw per-step drive of a bolus of 1 U given at the first forecast minute.
    pub fn unit_bolus_drive(&self) -> Vec<f64> {
        self.convolve_steps(&self.k_ins, &[1.0], 0)
    }

    /// Raw per-step drive of `grams` ingested from the first forecast minute
    /// at `rate` g/min.
    pub fn meal_drive(&self, grams: f64, rate: f64) -> Vec<f64> {
        let mut stream = Vec::new();
        let mut left = grams;
        while left > 1e-12 {
            let g = left.min(rate);
            stream.push(g);
            left -= g;
        }
        self.convolve_steps(&self.k_carb, &stream, 0)
    }
}

/// Carbohydrate sensitivity factor (mg/dL per g).
pub fn carb_sensitivity(phi: f64, bw: f64, vg: f64) -> f64 {
    phi * 1000.0 / (bw * vg)
}

/// Baseline and action proxy trajectories for a candidate intervention.
pub fn counterfactual_rollouts(
    m: &ProxyModel,
    bg0: f64,
    base_carb: &[f64],
    base_ins: &[f64],
    bolus_u: f64,
    meal_g: f64,
    carb_rate: f64,
) -> (Vec<f64>, Vec<f64>) {
    let baseline = m.rollout_from_drives(bg0, base_carb, base_ins);
    if bolus_u == 0.0 && meal_g == 0.0 {
        return (baseline.clone(), baseline);
    }
    let unit = m.unit_bolus_drive();
    let meal = m.meal_drive(meal_g, carb_rate);
    let carb: Vec<f64> = base_carb.iter().zip(&meal).map(|(a, b)| a + b).collect();
    let ins: Vec<f64> = base_ins.iter().zip(&unit).map(|(a, u)| a + bolus_u * u).collect();
    let action = m.rollout_from_drives(bg0, &carb, &ins);
    (baseline, action)
}

/// Sum over the horizon of baseline risk minus action risk.
pub fn delta_risk_reward(bg0: f64, baseline: &[f64], action: &[f64], w: &RiskWeights) -> f64 {
    trajectory_risk(bg0, baseline, w) - trajectory_risk(bg0, action, w)
}

/// Inputs to the shaping terms for one control step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepContext {
    pub bg: f64,
    /// Executed bolus (U) and meal (g).
    pub bolus_u: f64,
    pub meal_g: f64,
    pub exercise: bool,
    /// Total insulin on board, basal included (U).
    pub iob_total: f64,
    /// Post-action daily counts.
    pub n_bolus: u32,
    pub n_meal: u32,
    /// Minutes into the day / 1440.
    pub frac_day: f64,
    /// Minutes since the previous bolus, if any.
    pub since_last_bolus: Option<f64>,
    pub bolus_cap: u32,
    pub meal_cap: u32,
}

impl StepContext {
    pub fn inactive(&self) -> bool {
        self.bolus_u <= 0.0 && self.meal_g <= 0.0 && !self.exercise
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ShapingTerms {
    pub survival: f64,
    pub friction: f64,
    pub progressive: f64,
    pub spacing: f64,
    pub inaction: f64,
    pub structural: f64,
}

impl ShapingTerms {
    /// `survival - friction - progressive - spacing - inaction - structural`.
    pub fn net(&self) -> f64 {
        self.survival - self.friction - self.progressive - self.spacing - self.inaction - self.structural
    }
}

pub fn shaping_terms(ctx: &StepContext) -> ShapingTerms {
    let inactive = ctx.inactive();
    let bolus = ctx.bolus_u > 0.0;
    let meal = ctx.meal_g > 0.0;
    let bg = ctx.bg;

    let survival = if !inactive {
        0.0
    } else if (90.0..=140.0).contains(&bg) {
        0.2
    } else if (70.0..=180.0).contains(&bg) {
        0.1
    } else {
        0.0
    };

    let mut friction = 0.005 * ctx.bolus_u + 0.001 * ctx.meal_g;
    if bolus {
        friction += 0.005;
        if ctx.iob_total > 3.5 {
            friction += 0.03 * (ctx.iob_total - 3.5);
        }
    }
    if meal {
        friction += 0.005;
    }

    let t_b = 5.0 * ctx.frac_day + 1.0;
    let t_m = 3.0 * ctx.frac_day + 1.0;
    let sq = |x: f64| x * x;
    let progressive =
        0.001 * (sq((ctx.n_bolus as f64 - t_b).max(0.0)) + sq((ctx.n_meal as f64 - t_m).max(0.0)));

    let spacing = match ctx.since_last_bolus {
        Some(dt) if bolus && dt < 30.0 => 0.01,
        _ => 0.0,
    };

    let inaction = if inactive && bg > 180.0 {
        0.005 * (bg - 180.0)
    } else {
        0.0
    };

    let structural = 0.1
        * (sq((ctx.n_bolus as f64 - ctx.bolus_cap as f64).max(0.0))
            + sq((ctx.n_meal as f64 - ctx.meal_cap as f64).max(0.0)));

    ShapingTerms {
        survival,
        friction,
        progressive,
        spacing,
        inaction,
        structural,
    }
}

/// Penalty for ending `remaining_steps` early.
pub fn terminal_penalty(remaining_steps: usize) -> f64 {
    2.0 * remaining_steps as f64
}
