//! Deterministic longitudinal platoon simulation with a linear CACC law, a
//! DDPG-trained policy, and a hybrid arbiter that picks between them frame by
//! frame under a hard jerk bound.
//!
//! The crate is organised bottom-up:
//!
//! - [`kinematics`]: point-mass vehicle update, communication delay, clamps.
//! - [`environment`]: observations, reward, platoon stepping, one-step prediction.
//! - [`profiles`]: leader velocity profiles (CSV and synthetic stop-and-go).
//! - [`cacc`]: the linear controller.
//! - [`nn`] and [`ddpg`]: networks, Adam, replay buffer, training.
//! - [`hybrid`]: the arbiter and the jerk-bound checker.
//! - [`evaluation`]: held-out cases and comparison metrics.
//! - [`config`] and [`cli`]: run configuration and the `hcfs` command line.

pub mod cacc;
pub mod cli;
pub mod config;
pub mod ddpg;
pub mod environment;
pub mod error;
pub mod evaluation;
pub mod hybrid;
pub mod kinematics;
pub mod nn;
pub mod profiles;
pub mod rng;

pub use error::{Error, Result};
