//! Runtime action filtering over the discrete bolus × meal grid.

mod config;
mod predictive;
mod reliability;
mod rules;

pub use config::{RuleConfig, ShieldConfig};
pub use predictive::{
    predictive_shield, softmax, top_bolus_indices, trajectory_extremes, CandidateEval, CandidateForecast,
    ShieldDecision, ShieldMode,
};
pub use reliability::{
    verify_reliability_bound, BoundSide, PredictorKind, ReliabilityConfig, ReliabilityReport, SyntheticOracle,
    SyntheticState,
};
pub use rules::{rule_based_shield, rule_for, RuleFired, ShieldInput};
