use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::reward::ProxyModel;

/// P×K matrix of per-step glucose deltas, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl BasisMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(SimError::Shape(format!("basis matrix must be non-empty, got {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(SimError::Shape(format!(
                "expected {} entries for {rows}x{cols}, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(SimError::InvalidInput(format!("non-finite basis entry {v}")));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds from column vectors of equal length.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let cols = columns.len();
        let rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != rows) {
            return Err(SimError::Shape("basis columns differ in length".into()));
        }
        let mut data = vec![0.0; rows * cols];
        for (j, c) in columns.iter().enumerate() {
            for (i, v) in c.iter().enumerate() {
                data[i * cols + j] = *v;
            }
        }
        Self::new(rows, cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Matrix-vector product `G w`.
    pub fn mul_vec(&self, w: &[f64]) -> Result<Vec<f64>> {
        if w.len() != self.cols {
            return Err(SimError::Shape(format!(
                "coefficient length {} does not match {} bases",
                w.len(),
                self.cols
            )));
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(w).map(|(g, c)| g * c).sum())
            .collect())
    }
}

/// Inputs for one forecast: recent CGM and the raw proxy drives expected
/// over the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastContext {
    /// CGM history, oldest first. The last entry is the forecast origin.
    pub history: Vec<f64>,
    /// Raw carbohydrate drive per step (g).
    pub carb_drive: Vec<f64>,
    /// Raw insulin drive per step (U).
    pub ins_drive: Vec<f64>,
}

impl ForecastContext {
    pub fn last(&self) -> Option<f64> {
        self.history.last().copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BankConfig {
    pub csf_scales: Vec<f64>,
    pub isf_scales: Vec<f64>,
    /// Required history length in steps.
    pub history: usize,
}

impl Default for BankConfig {
    fn default() -> Self {
        Self {
            csf_scales: vec![0.6, 1.0, 1.4],
            isf_scales: vec![0.7, 1.3],
            history: 24,
        }
    }
}

/// Set of proxy-model variants whose delta rollouts form the basis columns.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisBank {
    models: Vec<ProxyModel>,
    history: usize,
}

impl BasisBank {
    pub fn new(models: Vec<ProxyModel>, history: usize) -> Result<Self> {
        let Some(first) = models.first() else {
            return Err(SimError::Config("basis bank needs at least one model".into()));
        };
        if first.horizon == 0 {
            return Err(SimError::Config("basis horizon must be positive".into()));
        }
        if models.iter().any(|m| m.horizon != first.horizon) {
            return Err(SimError::Config("basis models must share a horizon".into()));
        }
        Ok(Self { models, history: history.max(1) })
    }

    /// CSF × ISF grid of scaled copies of `base`, CSF varying slowest.
    pub fn from_config(base: &ProxyModel, cfg: &BankConfig) -> Result<Self> {
        let mut models = Vec::with_capacity(cfg.csf_scales.len() * cfg.isf_scales.len());
        for &c in &cfg.csf_scales {
            for &i in &cfg.isf_scales {
                if !(c > 0.0 && i > 0.0) {
                    return Err(SimError::Config(format!("bank scales must be positive, got {c}, {i}")));
                }
                models.push(base.scaled(c, i));
            }
        }
        Self::new(models, cfg.history)
    }

    pub fn default_for(base: &ProxyModel) -> Result<Self> {
        Self::from_config(base, &BankConfig::default())
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn horizon(&self) -> usize {
        self.models[0].horizon
    }

    pub fn history(&self) -> usize {
        self.history
    }

    pub fn models(&self) -> &[ProxyModel] {
        &self.models
    }
}

/// Evaluates every bank member on `ctx`; column k holds the per-step deltas of
/// the k-th rollout.
pub fn basis_outputs(ctx: &ForecastContext, bank: &BasisBank) -> Result<BasisMatrix> {
    if ctx.history.len() < bank.history {
        return Err(SimError::InsufficientHistory {
            needed: bank.history,
            available: ctx.history.len(),
        });
    }
    let bg0 = ctx.history[ctx.history.len() - 1];
    if !bg0.is_finite() {
        return Err(SimError::InvalidInput(format!("non-finite forecast origin {bg0}")));
    }
    let columns: Vec<Vec<f64>> = bank
        .models
        .iter()
        .map(|m| {
            let traj = m.rollout_from_drives(bg0, &ctx.carb_drive, &ctx.ins_drive);
            let mut prev = bg0;
            traj.into_iter()
                .map(|v| {
                    let d = v - prev;
                    prev = v;
                    d
                })
                .collect()
        })
        .collect();
    BasisMatrix::from_columns(&columns)
}
