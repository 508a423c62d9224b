//! Point-mass longitudinal motion and the actuation clamps shared by every
//! strategy.
//!
//! Vehicles move on a single lane. Each frame a follower receives one
//! acceleration command, held constant for `dt` seconds. Velocity never goes
//! below zero: a braking vehicle that would reverse within a step instead
//! stops part way through it and stays put for the remainder.

use crate::error::{ensure_finite, Error, Result};

/// Position, velocity and acceleration of one vehicle at one frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VehicleState {
    /// Position along the lane (m).
    pub x: f64,
    /// Velocity (m/s), never negative.
    pub v: f64,
    /// Acceleration applied during the step that produced this state (m/s²).
    pub a: f64,
}

impl VehicleState {
    pub fn new(x: f64, v: f64, a: f64) -> Self {
        Self { x, v, a }
    }
}

/// Geometry, actuation limits and communication delay of a platoon.
#[derive(Debug, Clone, PartialEq)]
pub struct PlatoonConfig {
    pub n_followers: usize,
    /// Simulation time step (s).
    pub dt: f64,
    /// Vehicle length (m).
    pub vehicle_length: f64,
    /// Standstill safety margin added to the vehicle length (m).
    pub headway: f64,
    /// Acceleration bound (m/s²).
    pub a_max: f64,
    /// Maximum velocity (m/s); also the reward's velocity normalizer.
    pub v_max: f64,
    /// Jerk bound (m/s³).
    pub jerk_max: f64,
    /// Age of neighbor states received over V2V (s).
    pub v2v_delay: f64,
}

impl Default for PlatoonConfig {
    fn default() -> Self {
        let dt = 0.2;
        let a_max = 3.0;
        Self {
            n_followers: 6,
            dt,
            vehicle_length: 5.0,
            headway: 2.0,
            a_max,
            v_max: 100.0 / 3.6,
            jerk_max: default_jerk_max(a_max, dt),
            v2v_delay: 0.005,
        }
    }
}

/// The comfort bound `2·a_max/dt`: the largest change that can occur between
/// two commands that both respect `±a_max`.
pub fn default_jerk_max(a_max: f64, dt: f64) -> f64 {
    2.0 * a_max / dt
}

impl PlatoonConfig {
    /// Desired bumper-to-bumper offset between adjacent vehicles (L + h).
    pub fn spacing(&self) -> f64 {
        self.vehicle_length + self.headway
    }

    /// Largest allowed change of acceleration between consecutive frames.
    pub fn jerk_band(&self) -> f64 {
        self.jerk_max * self.dt
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("platoon.dt", self.dt),
            ("platoon.vehicle_length", self.vehicle_length),
            ("platoon.headway", self.headway),
            ("platoon.a_max", self.a_max),
            ("platoon.v_max", self.v_max),
            ("platoon.jerk_max", self.jerk_max),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Config(format!("{name} must be > 0, got {value}")));
            }
        }
        if !(self.v2v_delay.is_finite() && self.v2v_delay >= 0.0) {
            return Err(Error::Config(format!(
                "platoon.v2v_delay must be >= 0, got {}",
                self.v2v_delay
            )));
        }
        if self.n_followers == 0 {
            return Err(Error::Config("platoon.n_followers must be >= 1".into()));
        }
        Ok(())
    }
}

/// Advances one vehicle by `dt` under a constant, already clamped command.
///
/// When the command would drive the velocity negative, the vehicle stops at
/// `t* = -v/a` and the position integrates only over `[0, t*]`.
pub fn step_vehicle(state: VehicleState, a_cmd: f64, dt: f64) -> Result<VehicleState> {
    ensure_finite("x", state.x)?;
    ensure_finite("v", state.v)?;
    ensure_finite("a_cmd", a_cmd)?;
    ensure_finite("dt", dt)?;
    if dt <= 0.0 {
        return Err(Error::NumericDomain(format!("dt must be > 0, got {dt}")));
    }
    let v_next = state.v + a_cmd * dt;
    if v_next >= 0.0 {
        Ok(VehicleState {
            x: state.x + state.v * dt + 0.5 * a_cmd * dt * dt,
            v: v_next,
            a: a_cmd,
        })
    } else {
        // a_cmd < 0 here, otherwise v_next could not be negative.
        let t_stop = -state.v / a_cmd;
        Ok(VehicleState {
            x: state.x + state.v * t_stop + 0.5 * a_cmd * t_stop * t_stop,
            v: 0.0,
            a: a_cmd,
        })
    }
}

/// What an ego vehicle perceives of a neighbor whose state is `delay` seconds
/// old, together with the staleness offset `η = v·delay`.
///
/// The perceived position lags the true one by `η`; velocity and acceleration
/// are passed through. `perceived.x + η` recovers the true position.
pub fn delayed_view(neighbor: VehicleState, delay: f64) -> (VehicleState, f64) {
    let eta = neighbor.v * delay;
    (
        VehicleState {
            x: neighbor.x - eta,
            ..neighbor
        },
        eta,
    )
}

/// Restricts a command to `[a_prev - jerk_max·dt, a_prev + jerk_max·dt]`.
pub fn clamp_jerk(a_cmd: f64, a_prev: f64, jerk_max: f64, dt: f64) -> f64 {
    let band = jerk_max * dt;
    a_cmd.clamp(a_prev - band, a_prev + band)
}

pub fn clamp_accel(a: f64, a_max: f64) -> f64 {
    a.clamp(-a_max, a_max)
}
