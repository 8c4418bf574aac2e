//! Fixed-step fourth-order Runge-Kutta integration.

use super::state::{check_finite, SimState, GUARDED, STATE_DIM, TE_INDEX};
use crate::error::Result;

/// Valid range for the exercise time constant TE (minutes).
pub const TE_RANGE: (f64, f64) = (1.0, 600.0);

/// One classic RK4 step for an arbitrary fixed-size system.
pub fn rk4_array<const N: usize, F>(mut f: F, t: f64, x: &[f64; N], dt: f64) -> [f64; N]
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let k1 = f(t, x);
    let k2 = f(t + 0.5 * dt, &axpy(x, 0.5 * dt, &k1));
    let k3 = f(t + 0.5 * dt, &axpy(x, 0.5 * dt, &k2));
    let k4 = f(t + dt, &axpy(x, dt, &k3));
    let mut out = *x;
    for i in 0..N {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

fn axpy<const N: usize>(x: &[f64; N], a: f64, y: &[f64; N]) -> [f64; N] {
    let mut out = *x;
    for i in 0..N {
        out[i] += a * y[i];
    }
    out
}

/// Clamps guarded states at zero and TE into [`TE_RANGE`].
pub fn project(x: &mut [f64; STATE_DIM]) {
    for &i in &GUARDED {
        if x[i] < 0.0 {
            x[i] = 0.0;
        }
    }
    x[TE_INDEX] = x[TE_INDEX].clamp(TE_RANGE.0, TE_RANGE.1);
}

/// Advances the simulator state by `dt` minutes, then projects.
///
/// `f` evaluates the vector field at `(t, state)`. Errors from `f` propagate,
/// and a non-finite result is reported with the first offending state name.
pub fn rk4_step<F>(mut f: F, t: f64, x: &SimState, dt: f64) -> Result<SimState>
where
    F: FnMut(f64, &SimState) -> Result<SimState>,
{
    let x0 = x.to_array();
    let mut eval = |tt: f64, a: &[f64; STATE_DIM]| -> Result<[f64; STATE_DIM]> {
        Ok(f(tt, &SimState::from_array(a))?.to_array())
    };
    let k1 = eval(t, &x0)?;
    let k2 = eval(t + 0.5 * dt, &axpy(&x0, 0.5 * dt, &k1))?;
    let k3 = eval(t + 0.5 * dt, &axpy(&x0, 0.5 * dt, &k2))?;
    let k4 = eval(t + dt, &axpy(&x0, dt, &k3))?;
    let mut out = x0;
    for i in 0..STATE_DIM {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    check_finite(&out)?;
    project(&mut out);
    Ok(SimState::from_array(&out))
}
