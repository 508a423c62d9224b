//! The car-following decision process: observations, rewards and the platoon
//! transition.
//!
//! Errors are measured as "neighbor minus ego minus desired offset", so a
//! positive error always means the ego should speed up.

use crate::error::{Error, Result};
use crate::kinematics::{delayed_view, step_vehicle, PlatoonConfig, VehicleState};

/// Scale applied to spacing errors before they reach a network (m).
pub const GAP_SCALE: f64 = 100.0;

/// Six-feature state of one follower.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Observation {
    /// Spacing error to the predecessor (m).
    pub e_gap_pred: f64,
    /// Velocity error to the predecessor (m/s).
    pub e_v_pred: f64,
    /// Spacing error to the leader (m).
    pub e_gap_lead: f64,
    /// Velocity error to the leader (m/s).
    pub e_v_lead: f64,
    /// Ego velocity (m/s).
    pub v: f64,
    /// Ego acceleration (m/s²).
    pub a: f64,
}

impl Observation {
    pub const LEN: usize = 6;

    pub fn to_array(&self) -> [f64; Self::LEN] {
        [
            self.e_gap_pred,
            self.e_v_pred,
            self.e_gap_lead,
            self.e_v_lead,
            self.v,
            self.a,
        ]
    }

    /// Fixed-scale features for network input.
    pub fn normalized(&self, cfg: &PlatoonConfig) -> [f64; Self::LEN] {
        [
            self.e_gap_pred / GAP_SCALE,
            self.e_v_pred / cfg.v_max,
            self.e_gap_lead / GAP_SCALE,
            self.e_v_lead / cfg.v_max,
            self.v / cfg.v_max,
            self.a / cfg.a_max,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Weights and normalizers of the per-step reward.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardConfig {
    pub omega1: f64,
    pub omega2: f64,
    pub v_max: f64,
    pub a_max: f64,
    pub dt: f64,
}

impl RewardConfig {
    pub fn new(omega1: f64, omega2: f64, platoon: &PlatoonConfig) -> Self {
        Self {
            omega1,
            omega2,
            v_max: platoon.v_max,
            a_max: platoon.a_max,
            dt: platoon.dt,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [("reward.omega1", self.omega1), ("reward.omega2", self.omega2)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Config(format!("{name} must be > 0, got {value}")));
            }
        }
        Ok(())
    }
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self::new(10.0, 0.1, &PlatoonConfig::default())
    }
}

/// Leader plus ordered followers at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct PlatoonFrame {
    pub leader: VehicleState,
    /// Index 0 is the first follower (k = 1).
    pub followers: Vec<VehicleState>,
    pub time: f64,
}

impl PlatoonFrame {
    /// Followers at the desired spacing behind `leader`, all moving at the
    /// leader's velocity with zero acceleration.
    pub fn at_equilibrium(leader: VehicleState, n_followers: usize, cfg: &PlatoonConfig) -> Self {
        let followers = (1..=n_followers)
            .map(|k| VehicleState::new(leader.x - k as f64 * cfg.spacing(), leader.v, 0.0))
            .collect();
        Self {
            leader,
            followers,
            time: 0.0,
        }
    }

    /// State of vehicle `k`, where 0 is the leader.
    pub fn vehicle(&self, k: usize) -> Option<&VehicleState> {
        if k == 0 {
            Some(&self.leader)
        } else {
            self.followers.get(k - 1)
        }
    }

    /// True when some follower is within one vehicle length of the vehicle
    /// ahead of it.
    pub fn has_collision(&self, cfg: &PlatoonConfig) -> bool {
        let mut ahead = self.leader.x;
        for f in &self.followers {
            if ahead - f.x <= cfg.vehicle_length {
                return true;
            }
            ahead = f.x;
        }
        false
    }
}

/// Observation of follower `k` (1-based), with neighbor states seen through
/// the V2V delay. The ego's own state is known without delay.
pub fn build_observation(k: usize, frame: &PlatoonFrame, cfg: &PlatoonConfig) -> Result<Observation> {
    if k == 0 || k > frame.followers.len() {
        return Err(Error::Structural(format!(
            "follower index {k} outside 1..={}",
            frame.followers.len()
        )));
    }
    let ego = frame.followers[k - 1];
    let (pred, _) = delayed_view(*frame.vehicle(k - 1).expect("k - 1 < len"), cfg.v2v_delay);
    let (lead, _) = delayed_view(frame.leader, cfg.v2v_delay);
    Ok(Observation {
        e_gap_pred: (pred.x - ego.x) - cfg.spacing(),
        e_v_pred: pred.v - ego.v,
        e_gap_lead: (lead.x - ego.x) - k as f64 * cfg.spacing(),
        e_v_lead: lead.v - ego.v,
        v: ego.v,
        a: ego.a,
    })
}

/// Velocity-tracking penalty plus comfort penalty, each normalized by its
/// natural scale. Never positive.
pub fn compute_reward(e_v_lead: f64, jerk: f64, cfg: &RewardConfig) -> f64 {
    let velocity_term = cfg.omega1 * e_v_lead.abs() / cfg.v_max;
    let jerk_term = cfg.omega2 * jerk.abs() / (2.0 * cfg.a_max / cfg.dt);
    -velocity_term - jerk_term
}

/// One-step model prediction of a candidate action's consequences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub ego: VehicleState,
    pub e_v_lead: f64,
    pub e_v_pred: f64,
    pub jerk: f64,
    pub reward: f64,
}

/// Rolls the ego forward with `a_cand` and its neighbors with their estimated
/// accelerations, then scores the predicted frame.
pub fn predict_step(
    obs: &Observation,
    a_cand: f64,
    leader_a_est: f64,
    pred_a_est: f64,
    platoon: &PlatoonConfig,
    reward: &RewardConfig,
) -> Result<Prediction> {
    let dt = platoon.dt;
    let ego = step_vehicle(VehicleState::new(0.0, obs.v, obs.a), a_cand, dt)?;
    let v_lead = obs.v + obs.e_v_lead + leader_a_est * dt;
    let v_pred = (obs.v + obs.e_v_pred + pred_a_est * dt).max(0.0);
    let e_v_lead = v_lead.max(0.0) - ego.v;
    let jerk = (a_cand - obs.a) / dt;
    Ok(Prediction {
        ego,
        e_v_lead,
        e_v_pred: v_pred - ego.v,
        jerk,
        reward: compute_reward(e_v_lead, jerk, reward),
    })
}

/// Predicted reward of executing `a_cand` from `obs`.
pub fn predict_reward(
    obs: &Observation,
    a_cand: f64,
    leader_a_est: f64,
    pred_a_est: f64,
    platoon: &PlatoonConfig,
    reward: &RewardConfig,
) -> Result<f64> {
    predict_step(obs, a_cand, leader_a_est, pred_a_est, platoon, reward).map(|p| p.reward)
}

/// Result of advancing the platoon one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub frame: PlatoonFrame,
    /// Observation of each follower in the new frame.
    pub observations: Vec<Observation>,
    pub rewards: Vec<f64>,
    /// Velocity error to the leader realized in the new frame, per follower.
    pub e_v_lead: Vec<f64>,
    /// Executed jerk per follower (m/s³).
    pub jerks: Vec<f64>,
    pub collision: bool,
}

/// Leader state one step after `leader`, given the next sampled velocity.
pub fn advance_leader(leader: VehicleState, next_v: f64, dt: f64) -> VehicleState {
    VehicleState {
        x: leader.x + leader.v * dt + 0.5 * leader.a * dt * dt,
        v: next_v,
        a: (next_v - leader.v) / dt,
    }
}

/// Applies one already clamped action per follower and replays the leader to
/// `leader_next_v`.
pub fn step_platoon(
    frame: &PlatoonFrame,
    actions: &[f64],
    leader_next_v: f64,
    platoon: &PlatoonConfig,
    reward: &RewardConfig,
) -> Result<StepOutcome> {
    if actions.len() != frame.followers.len() {
        return Err(Error::Structural(format!(
            "{} actions for {} followers",
            actions.len(),
            frame.followers.len()
        )));
    }
    let dt = platoon.dt;
    let leader = advance_leader(frame.leader, leader_next_v, dt);
    let followers = frame
        .followers
        .iter()
        .zip(actions)
        .map(|(f, &a)| step_vehicle(*f, a, dt))
        .collect::<Result<Vec<_>>>()?;
    let jerks: Vec<f64> = frame
        .followers
        .iter()
        .zip(actions)
        .map(|(f, &a)| (a - f.a) / dt)
        .collect();
    let next = PlatoonFrame {
        leader,
        followers,
        time: frame.time + dt,
    };
    let e_v_lead: Vec<f64> = next.followers.iter().map(|f| leader.v - f.v).collect();
    let rewards = e_v_lead
        .iter()
        .zip(&jerks)
        .map(|(&e, &j)| compute_reward(e, j, reward))
        .collect();
    let observations = (1..=next.followers.len())
        .map(|k| build_observation(k, &next, platoon))
        .collect::<Result<Vec<_>>>()?;
    let collision = next.has_collision(platoon);
    Ok(StepOutcome {
        frame: next,
        observations,
        rewards,
        e_v_lead,
        jerks,
        collision,
    })
}
