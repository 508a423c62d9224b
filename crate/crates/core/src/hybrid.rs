//! Per-frame arbitration between the CACC law and the learned policy.
//!
//! Both controllers propose an action from the same observation. Each
//! proposal is saturated and jerk-clamped against the one shared previous
//! acceleration, scored by a one-step model prediction, and the better one is
//! executed. On frames where the winning controller changes, the executed
//! action is the `β`-blend of the two proposals instead.
//!
//! Because both clamped proposals lie in the band
//! `[a_prev - jerk_max·dt, a_prev + jerk_max·dt]` and the band is convex,
//! every blend of them lies in it too. That is the whole jerk guarantee, and
//! [`verify_jerk_bound`] checks it on recorded trajectories.

use crate::cacc::{cacc_command, CaccGains};
use crate::ddpg::{actor_action, ModelParams};
use crate::environment::{predict_reward, Observation, RewardConfig};
use crate::error::{Error, Result};
use crate::kinematics::{clamp_accel, clamp_jerk, PlatoonConfig};

/// Slack allowed when checking the jerk bound in floating point.
pub const JERK_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Source {
    Cacc,
    Ddpg,
}

/// Everything decided on one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridDecision {
    pub a_ddpg: f64,
    pub a_cacc: f64,
    pub r_ddpg: f64,
    pub r_cacc: f64,
    /// Controller with the higher predicted reward (CACC on ties).
    pub source: Source,
    /// The winner differs from the previous frame's winner.
    pub switched: bool,
    pub beta: f64,
    pub a_exec: f64,
}

impl HybridDecision {
    /// 1 on switch frames, 0 otherwise.
    pub fn alpha(&self) -> u8 {
        u8::from(self.switched)
    }

    pub fn chosen_action(&self) -> f64 {
        match self.source {
            Source::Ddpg => self.a_ddpg,
            Source::Cacc => self.a_cacc,
        }
    }
}

/// What the arbiter carries between frames of one follower.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HybridState {
    /// `None` before the first decision of an episode.
    pub prev_source: Option<Source>,
    pub a_prev: f64,
}

impl HybridState {
    pub fn new(a_prev: f64) -> Self {
        Self {
            prev_source: None,
            a_prev,
        }
    }
}

/// Static inputs of the arbiter.
#[derive(Debug, Clone, Copy)]
pub struct HybridContext<'a> {
    pub platoon: &'a PlatoonConfig,
    pub reward: &'a RewardConfig,
    pub gains: &'a CaccGains,
    /// Blend weight applied to the losing proposal on switch frames.
    pub beta_switch: f64,
}

/// Neighbor accelerations assumed by the one-step prediction.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NeighborEstimate {
    pub leader_a: f64,
    pub predecessor_a: f64,
}

/// Arbitration for already computed raw proposals.
pub fn arbitrate(
    raw_ddpg: f64,
    raw_cacc: f64,
    obs: &Observation,
    state: HybridState,
    est: NeighborEstimate,
    ctx: &HybridContext<'_>,
) -> Result<(HybridDecision, HybridState)> {
    let p = ctx.platoon;
    let shared_clamp = |a: f64| clamp_jerk(clamp_accel(a, p.a_max), state.a_prev, p.jerk_max, p.dt);
    let a_ddpg = shared_clamp(raw_ddpg);
    let a_cacc = shared_clamp(raw_cacc);
    let score = |a: f64| predict_reward(obs, a, est.leader_a, est.predecessor_a, p, ctx.reward);
    let r_ddpg = score(a_ddpg)?;
    let r_cacc = score(a_cacc)?;
    let source = if r_ddpg > r_cacc { Source::Ddpg } else { Source::Cacc };
    let switched = state.prev_source.is_some_and(|prev| prev != source);
    let beta = if switched { ctx.beta_switch } else { 0.0 };
    let (chosen, other) = match source {
        Source::Ddpg => (a_ddpg, a_cacc),
        Source::Cacc => (a_cacc, a_ddpg),
    };
    let a_exec = if beta == 0.0 {
        chosen
    } else {
        (1.0 - beta) * chosen + beta * other
    };
    Ok((
        HybridDecision {
            a_ddpg,
            a_cacc,
            r_ddpg,
            r_cacc,
            source,
            switched,
            beta,
            a_exec,
        },
        HybridState {
            prev_source: Some(source),
            a_prev: a_exec,
        },
    ))
}

/// Full hybrid step: query both controllers, then [`arbitrate`].
pub fn hcfs_select(
    obs: &Observation,
    state: HybridState,
    model: &ModelParams,
    est: NeighborEstimate,
    ctx: &HybridContext<'_>,
) -> Result<(HybridDecision, HybridState)> {
    let raw_ddpg = actor_action(model, obs, ctx.platoon)?;
    let raw_cacc = cacc_command(obs, ctx.gains, obs.v, ctx.platoon.dt, ctx.platoon.a_max);
    arbitrate(raw_ddpg, raw_cacc, obs, state, est, ctx)
}

/// First frame whose acceleration change exceeds the bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JerkViolation {
    pub frame: usize,
    pub delta: f64,
}

/// Checks `|a[k] - a[k-1]| ≤ jerk_max·dt + 1e-9` for every consecutive pair.
pub fn verify_jerk_bound(accels: &[f64], jerk_max: f64, dt: f64) -> std::result::Result<(), JerkViolation> {
    let band = jerk_max * dt + JERK_TOLERANCE;
    for (k, w) in accels.windows(2).enumerate() {
        let delta = (w[1] - w[0]).abs();
        if !(delta <= band) {
            return Err(JerkViolation { frame: k + 1, delta });
        }
    }
    Ok(())
}

impl HybridContext<'_> {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.beta_switch) {
            return Err(Error::Config(format!(
                "hybrid.beta_switch must be in [0, 1], got {}",
                self.beta_switch
            )));
        }
        Ok(())
    }
}
