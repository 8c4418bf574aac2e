//! Constrained-MDP environment: observations, action gating, meal schedules
//! and the 5-minute control step.

pub mod action;
pub mod config;
#[allow(clippy::module_inception)]
pub mod env;
pub mod observation;
pub mod record;
pub mod schedule;

pub use action::{accept_action, ActionGrid, ActionPair, BlockReason, ExecutionNoise, GateContext};
pub use config::{ExerciseBout, ScenarioConfig};
pub use env::{check_termination, Environment, StepOutcome, STEPS_PER_DAY, STEP_MIN};
pub use observation::{build_observation, Observation, ObservationInputs, OBS_DIM, OBS_NAMES};
pub use record::{EpisodeRecord, StepRecord, TerminationReason};
pub use schedule::{generate_meal_schedule, MealEvent, ScheduleConfig};
