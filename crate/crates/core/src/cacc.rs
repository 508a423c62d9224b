//! Linear cooperative adaptive cruise control.
//!
//! The law produces a target velocity from the latest ego velocity plus
//! gain-weighted spacing and velocity errors to both the predecessor and the
//! leader:
//!
//! ```text
//! v_cmd = v_last + k1·e_gap_pred + k2·e_v_pred + k3·e_gap_lead + k4·e_v_lead
//! ```
//!
//! and converts it to the acceleration that reaches `v_cmd` in one step.

use crate::environment::Observation;
use crate::error::{Error, Result};
use crate::kinematics::clamp_accel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaccGains {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
}

impl Default for CaccGains {
    fn default() -> Self {
        Self {
            k1: 0.01,
            k2: 0.01,
            k3: 0.02,
            k4: 0.9,
        }
    }
}

impl CaccGains {
    pub fn validate(&self) -> Result<()> {
        for (name, k) in [
            ("cacc.k1", self.k1),
            ("cacc.k2", self.k2),
            ("cacc.k3", self.k3),
            ("cacc.k4", self.k4),
        ] {
            if !(k.is_finite() && k > 0.0) {
                return Err(Error::Config(format!("{name} must be > 0, got {k}")));
            }
        }
        Ok(())
    }

    /// Velocity correction `v_cmd - v_last` (m/s).
    pub fn velocity_correction(&self, obs: &Observation) -> f64 {
        self.k1 * obs.e_gap_pred
            + self.k2 * obs.e_v_pred
            + self.k3 * obs.e_gap_lead
            + self.k4 * obs.e_v_lead
    }
}

/// Acceleration before saturation.
pub fn cacc_command_unclamped(obs: &Observation, gains: &CaccGains, v_last: f64, dt: f64) -> f64 {
    let v_cmd = v_last + gains.velocity_correction(obs);
    (v_cmd - v_last) / dt
}

/// Acceleration command saturated to `±a_max`. The jerk clamp is left to the
/// caller.
pub fn cacc_command(obs: &Observation, gains: &CaccGains, v_last: f64, dt: f64, a_max: f64) -> f64 {
    clamp_accel(cacc_command_unclamped(obs, gains, v_last, dt), a_max)
}
