//! Virtual patients: parameter records, cohort loading, type adaptations
//! and steady-state calibration.

pub mod adapt;
pub mod balance;
pub mod cohort;
pub mod params;

pub use adapt::{adapt, adapt_t1d, adapt_t2d, apply_global_tuning, prepare_patient, GLOBAL_TUNING};
pub use balance::{auto_balance, auto_balance_with_report, equilibrium_state, BalanceReport};
pub use cohort::{cohort_stats, default_cohort, find_patient, DEFAULT_TABLE, load_cohort, parse_cohort, CohortStats, FieldStats};
pub use params::{Cohort, DiabetesType, PatientParams};
