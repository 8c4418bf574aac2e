//! Continuous-time glucose-insulin physiology.

pub mod dynamics;
pub mod integrator;
pub mod noise;
pub mod sensor;
pub mod state;

pub use dynamics::{
    circadian_rate, derivatives, derivatives_t1d, derivatives_t2d, nn_guard, CircadianConfig,
};
pub use integrator::{rk4_array, rk4_step, TE_RANGE};
pub use noise::{ou_step, OuConfig};
pub use sensor::{cgm_read, SensorConfig, SensorState};
pub use state::{ControlInput, SimState, STATE_DIM, STATE_NAMES};
