use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

pub const STATE_DIM: usize = 18;

/// Names in vector order, used for diagnostics.
pub const STATE_NAMES: [&str; STATE_DIM] = [
    "D1", "D2", "D3", "Gp", "Gt", "x1", "x2", "x3", "Ip", "Il", "Isc1", "Isc2", "Gsc", "E1", "TE",
    "E2", "Y", "Gf",
];

/// Vector indices of the states kept non-negative by the derivative guard
/// and the post-step projection.
pub const GUARDED: [usize; 7] = [3, 4, 8, 9, 10, 11, 12];

pub const TE_INDEX: usize = 14;

/// Full ODE state.
///
/// Gut masses in mg, glucose masses in mg/kg, insulin masses in pmol/kg.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SimState {
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub gp: f64,
    pub gt: f64,
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
    pub ip: f64,
    pub il: f64,
    pub isc1: f64,
    pub isc2: f64,
    pub gsc: f64,
    pub e1: f64,
    pub te: f64,
    pub e2: f64,
    pub y: f64,
    pub gf: f64,
}

impl SimState {
    pub fn to_array(&self) -> [f64; STATE_DIM] {
        [
            self.d1, self.d2, self.d3, self.gp, self.gt, self.x1, self.x2, self.x3, self.ip,
            self.il, self.isc1, self.isc2, self.gsc, self.e1, self.te, self.e2, self.y, self.gf,
        ]
    }

    pub fn from_array(a: &[f64; STATE_DIM]) -> Self {
        Self {
            d1: a[0],
            d2: a[1],
            d3: a[2],
            gp: a[3],
            gt: a[4],
            x1: a[5],
            x2: a[6],
            x3: a[7],
            ip: a[8],
            il: a[9],
            isc1: a[10],
            isc2: a[11],
            gsc: a[12],
            e1: a[13],
            te: a[14],
            e2: a[15],
            y: a[16],
            gf: a[17],
        }
    }

    /// Rejects NaN or infinite components, naming the first offender.
    pub fn check_finite(&self) -> Result<()> {
        check_finite(&self.to_array())
    }

    /// Plasma glucose concentration (mg/dL).
    pub fn plasma_glucose(&self, vg: f64) -> f64 {
        self.gp / vg
    }

    /// Carbohydrate mass still in the gut (g).
    pub fn gut_carbs(&self) -> f64 {
        (self.d1 + self.d2 + self.d3) / 1000.0
    }
}

pub(crate) fn check_finite(a: &[f64; STATE_DIM]) -> Result<()> {
    match a.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(SimError::NonFinite {
            state: STATE_NAMES[i],
            value: a[i],
        }),
        None => Ok(()),
    }
}

/// Per-minute driving inputs.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    /// Carbohydrate inflow (g/min).
    pub cho: f64,
    /// Exogenous insulin (U/min).
    pub ins: f64,
    /// Relative heart-rate intensity in [0, 1].
    pub hr_rel: f64,
    /// Reference ingested mass for gastric emptying (mg): stomach content
    /// at the start of the latest meal plus that meal. Zero selects `k_max`.
    pub d_bar: f64,
}

impl ControlInput {
    pub fn basal(ins_u_per_min: f64) -> Self {
        Self {
            ins: ins_u_per_min,
            ..Self::default()
        }
    }
}
