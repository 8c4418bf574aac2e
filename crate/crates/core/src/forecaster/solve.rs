use serde::{Deserialize, Serialize};

use super::basis::BasisMatrix;
use crate::error::{Result, SimError};

/// One training window: the history it was formed from, the basis matrix
/// evaluated at its origin and the observed per-step deltas.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextPair {
    pub history: Vec<f64>,
    pub basis: BasisMatrix,
    pub targets: Vec<f64>,
}

impl ContextPair {
    pub fn new(history: Vec<f64>, basis: BasisMatrix, targets: Vec<f64>) -> Result<Self> {
        if targets.len() != basis.rows() {
            return Err(SimError::Shape(format!(
                "{} targets for a {}-row basis",
                targets.len(),
                basis.rows()
            )));
        }
        if let Some(v) = targets.iter().find(|v| !v.is_finite()) {
            return Err(SimError::InvalidInput(format!("non-finite target {v}")));
        }
        Ok(Self { history, basis, targets })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ContextSet {
    pairs: Vec<ContextPair>,
}

impl ContextSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs(pairs: Vec<ContextPair>) -> Result<Self> {
        let mut s = Self::new();
        for p in pairs {
            s.push(p)?;
        }
        Ok(s)
    }

    /// Adds a pair; all pairs must share history length and basis shape.
    pub fn push(&mut self, pair: ContextPair) -> Result<()> {
        if let Some(first) = self.pairs.first() {
            if first.history.len() != pair.history.len()
                || first.basis.rows() != pair.basis.rows()
                || first.basis.cols() != pair.basis.cols()
            {
                return Err(SimError::Shape("context windows differ in shape".into()));
            }
        }
        self.pairs.push(pair);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[ContextPair] {
        &self.pairs
    }

    pub fn n_bases(&self) -> usize {
        self.pairs.first().map_or(0, |p| p.basis.cols())
    }

    /// Stacked design matrix (row-major, NP×K) and targets (NP).
    pub fn stacked(&self) -> (Vec<f64>, Vec<f64>) {
        let mut g = Vec::new();
        let mut y = Vec::new();
        for p in &self.pairs {
            g.extend_from_slice(p.basis.as_slice());
            y.extend_from_slice(&p.targets);
        }
        (g, y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub w: Vec<f64>,
    pub lambda: f64,
}

impl Coefficients {
    pub fn zeros(k: usize) -> Self {
        Self { w: vec![0.0; k], lambda: 0.0 }
    }
}

/// In-place Cholesky factor of a symmetric matrix (lower triangle). Returns
/// `false` when a pivot is not safely positive.
fn cholesky(a: &mut [f64], n: usize) -> bool {
    let scale = (0..n).map(|i| a[i * n + i].abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > 1e-13 * scale) {
            return false;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    true
}

fn cholesky_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Ridge solve of `g w ≈ y` for a row-major `rows×cols` design matrix.
pub fn ridge_solve(g: &[f64], rows: usize, cols: usize, y: &[f64], lambda: f64) -> Result<Coefficients> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(SimError::InvalidInput(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    if cols == 0 || g.len() != rows * cols || y.len() != rows {
        return Err(SimError::Shape(format!(
            "design {} entries for {rows}x{cols}, {} targets",
            g.len(),
            y.len()
        )));
    }
    if rows < cols && lambda == 0.0 {
        return Err(SimError::Singular { lambda });
    }
    let mut a = vec![0.0; cols * cols];
    let mut b = vec![0.0; cols];
    for r in 0..rows {
        let row = &g[r * cols..(r + 1) * cols];
        for i in 0..cols {
            b[i] += row[i] * y[r];
            for j in 0..=i {
                a[i * cols + j] += row[i] * row[j];
            }
        }
    }
    for i in 0..cols {
        for j in 0..i {
            a[j * cols + i] = a[i * cols + j];
        }
        a[i * cols + i] += lambda;
    }
    if !cholesky(&mut a, cols) {
        return Err(SimError::Singular { lambda });
    }
    cholesky_solve(&a, cols, &mut b);
    if b.iter().any(|v| !v.is_finite()) {
        return Err(SimError::Singular { lambda });
    }
    Ok(Coefficients { w: b, lambda })
}

/// Regularized least-squares mixing weights over all contexts.
pub fn solve_coefficients(ctx: &ContextSet, lambda: f64) -> Result<Coefficients> {
    if ctx.is_empty() {
        return Err(SimError::InsufficientHistory { needed: 1, available: 0 });
    }
    let (g, y) = ctx.stacked();
    ridge_solve(&g, y.len(), ctx.n_bases(), &y, lambda)
}

/// Cumulates the mixed deltas from `last_y`.
pub fn predict(last_y: f64, g: &BasisMatrix, w: &Coefficients) -> Result<Vec<f64>> {
    let deltas = g.mul_vec(&w.w)?;
    let mut acc = last_y;
    Ok(deltas
        .into_iter()
        .map(|d| {
            acc += d;
            acc
        })
        .collect())
}
