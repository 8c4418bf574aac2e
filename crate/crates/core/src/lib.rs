//! Deterministic glucose-insulin simulation with a constrained-MDP interface,
//! rule-based and predictive safety shields, and a basis-adaptive glucose
//! forecaster.
//!
//! The crate is organised bottom-up:
//!
//! - [`physiology`]: T1D / T2D compartmental ODEs, RK4, circadian and noise wrappers, CGM model
//! - [`patients`]: virtual patient records, diabetes-type adaptations and steady-state balancing
//! - [`reward`]: clinical risk cost, auxiliary proxy forecaster, delta-risk reward and shaping
//! - [`environment`]: observation, action gating, meal scheduling and the 5-minute control step
//! - [`forecaster`]: basis bank, ridge coefficient solve, cumulative prediction, coefficient analytics
//! - [`shield`]: rule-based and predictive shields, logit masking, reliability-bound harness
//! - [`metrics`]: TIR, CV, risk index, event rates, correlation and generalization gap

pub mod environment;
pub mod error;
pub mod forecaster;
pub mod metrics;
pub mod patients;
pub mod physiology;
pub mod reward;
pub mod shield;

pub use error::{Result, SimError};
