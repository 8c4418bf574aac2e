//! Basis-adaptive forecasting: a bank of proxy-model variants produces basis
//! delta trajectories, a ridge solve mixes them per patient, and predictions
//! cumulate the mixed deltas from the last reading.

mod analysis;
mod basis;
mod online;
mod solve;

pub use analysis::{
    adaptation_comparison, coefficient_consistency, cosine, read_coefficients_csv, write_coefficients_csv,
    AdaptationResult, CoefficientSample, ConsistencyStats, PatientWindows, QueryWindow,
};
pub use basis::{basis_outputs, BankConfig, BasisBank, BasisMatrix, ForecastContext};
pub use online::{OnlineConfig, OnlineForecaster};
pub use solve::{predict, ridge_solve, solve_coefficients, Coefficients, ContextPair, ContextSet};
