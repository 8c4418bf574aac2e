use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::basis::{basis_outputs, BasisBank, ForecastContext};
use super::solve::{predict, solve_coefficients, Coefficients, ContextPair, ContextSet};
use crate::error::{Result, SimError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OnlineConfig {
    /// Context windows kept for the solve.
    pub n_contexts: usize,
    /// Steps between consecutive context origins.
    pub stride: usize,
    /// Steps between re-solves.
    pub refit_every: usize,
    pub lambda: f64,
    /// Shrink toward the equal-weight bank mixture instead of zero.
    pub shrink_to_mean: bool,
}

impl Default for OnlineConfig {
    fn default() -> Self {
        Self {
            n_contexts: 8,
            stride: 6,
            refit_every: 12,
            lambda: 1e-3,
            shrink_to_mean: false,
        }
    }
}

/// Sliding-window coefficient adaptation for one patient.
#[derive(Debug, Clone)]
pub struct OnlineForecaster {
    bank: BasisBank,
    cfg: OnlineConfig,
    contexts: VecDeque<ContextPair>,
    coef: Option<Coefficients>,
    since_fit: usize,
    fits: usize,
}

impl OnlineForecaster {
    pub fn new(bank: BasisBank, cfg: OnlineConfig) -> Result<Self> {
        if cfg.n_contexts == 0 || cfg.stride == 0 || cfg.refit_every == 0 {
            return Err(SimError::Config("online forecaster counts must be positive".into()));
        }
        Ok(Self {
            bank,
            cfg,
            contexts: VecDeque::new(),
            coef: None,
            since_fit: 0,
            fits: 0,
        })
    }

    pub fn bank(&self) -> &BasisBank {
        &self.bank
    }

    pub fn config(&self) -> &OnlineConfig {
        &self.cfg
    }

    pub fn coefficients(&self) -> Option<&Coefficients> {
        self.coef.as_ref()
    }

    pub fn n_contexts(&self) -> usize {
        self.contexts.len()
    }

    pub fn fits(&self) -> usize {
        self.fits
    }

    pub fn ready(&self) -> bool {
        self.coef.is_some()
    }

    /// Adds a completed window: `ctx` as it would have been seen at the origin
    /// (with realised inputs) and the `observed` readings over the horizon.
    pub fn add_context(&mut self, ctx: &ForecastContext, observed: &[f64]) -> Result<()> {
        let g = basis_outputs(ctx, &self.bank)?;
        if observed.len() != g.rows() {
            return Err(SimError::Shape(format!(
                "{} observed readings for horizon {}",
                observed.len(),
                g.rows()
            )));
        }
        let mut prev = ctx.history[ctx.history.len() - 1];
        let targets = observed
            .iter()
            .map(|&v| {
                let d = v - prev;
                prev = v;
                d
            })
            .collect();
        let pair = ContextPair::new(ctx.history.clone(), g, targets)?;
        self.contexts.push_back(pair);
        while self.contexts.len() > self.cfg.n_contexts {
            self.contexts.pop_front();
        }
        Ok(())
    }

    /// Advances one control step, re-solving when due and enough windows exist.
    pub fn tick(&mut self) -> Result<bool> {
        self.since_fit += 1;
        let due = self.coef.is_none() || self.since_fit >= self.cfg.refit_every;
        if due && self.contexts.len() >= self.cfg.n_contexts {
            self.refit()?;
            return Ok(true);
        }
        Ok(false)
    }

    /// Equal weights summing to one.
    pub fn prior(&self) -> Vec<f64> {
        vec![1.0 / self.bank.len() as f64; self.bank.len()]
    }

    pub fn refit(&mut self) -> Result<()> {
        let coef = if self.cfg.shrink_to_mean {
            // solve for the offset from the prior on the prior's residuals
            let w0 = self.prior();
            let pairs = self
                .contexts
                .iter()
                .map(|c| {
                    let fit = c.basis.mul_vec(&w0)?;
                    let resid = c.targets.iter().zip(&fit).map(|(y, f)| y - f).collect();
                    ContextPair::new(c.history.clone(), c.basis.clone(), resid)
                })
                .collect::<Result<Vec<_>>>()?;
            let mut d = solve_coefficients(&ContextSet::from_pairs(pairs)?, self.cfg.lambda)?;
            d.w.iter_mut().zip(&w0).for_each(|(a, b)| *a += b);
            d
        } else {
            let set = ContextSet::from_pairs(self.contexts.iter().cloned().collect())?;
            solve_coefficients(&set, self.cfg.lambda)?
        };
        self.coef = Some(coef);
        self.since_fit = 0;
        self.fits += 1;
        Ok(())
    }

    /// Predicted trajectory over the horizon; errors until the first solve.
    pub fn forecast(&self, ctx: &ForecastContext) -> Result<Vec<f64>> {
        let Some(w) = &self.coef else {
            return Err(SimError::InsufficientHistory {
                needed: self.cfg.n_contexts,
                available: self.contexts.len(),
            });
        };
        let g = basis_outputs(ctx, &self.bank)?;
        predict(ctx.history[ctx.history.len() - 1], &g, w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patients::{default_cohort, prepare_patient, DiabetesType};
    use crate::reward::{ProxyConfig, ProxyModel};

    #[test]
    fn recovers_mixture_from_generated_windows() {
        let cohort = default_cohort().unwrap();
        let p = prepare_patient(&cohort[20], DiabetesType::T1d, 0.65).unwrap();
        let base = ProxyModel::for_patient(&p, &ProxyConfig::default());
        let bank = BasisBank::default_for(&base).unwrap();
        let truth = base.scaled(1.4, 1.3);
        let mut f = OnlineForecaster::new(bank, OnlineConfig::default()).unwrap();
        assert!(!f.ready());
        for i in 0..8 {
            let ctx = ForecastContext {
                history: vec![140.0 + i as f64; 24],
                carb_drive: (0..24).map(|k| if k > i { 1.5 } else { 0.2 }).collect(),
                ins_drive: (0..24).map(|k| 0.02 * (k % (i + 2)) as f64).collect(),
            };
            let obs = truth.rollout_from_drives(ctx.history[23], &ctx.carb_drive, &ctx.ins_drive);
            f.add_context(&ctx, &obs).unwrap();
            let fitted = f.tick().unwrap();
            assert_eq!(fitted, i == 7);
        }
        let ctx = ForecastContext {
            history: vec![150.0; 24],
            carb_drive: vec![0.8; 24],
            ins_drive: vec![0.03; 24],
        };
        let want = truth.rollout_from_drives(150.0, &ctx.carb_drive, &ctx.ins_drive);
        let got = f.forecast(&ctx).unwrap();
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 0.5, "{a} vs {b}");
        }
    }
}
