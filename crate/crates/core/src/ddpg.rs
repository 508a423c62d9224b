//! Deterministic policy-gradient actor-critic training.
//!
//! One policy is shared by every follower and learns from the union of their
//! transitions. The actor maps a normalized observation to a normalized
//! action in (-1, 1) (scaled by `a_max` on execution); the critic scores the
//! normalized observation concatenated with the normalized action.

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::environment::{build_observation, step_platoon, Observation, PlatoonFrame, RewardConfig};
use crate::error::{Error, Result};
use crate::kinematics::{clamp_accel, PlatoonConfig};
use crate::nn::{next_line, Activation, AdamState, Gradients, Mlp};
use crate::profiles::{derive_leader_trace, VelocityProfile};
use crate::rng::{stream, StreamRng};

const OBS_DIM: usize = Observation::LEN;
const MODEL_MAGIC: &str = "hcfs-model v1";
/// Range multiplier for the final layer of both networks at initialization.
pub const FINAL_LAYER_SCALE: f64 = 3e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct DdpgConfig {
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    pub tau: f64,
    pub gamma: f64,
    pub ou_theta: f64,
    /// Initial exploration noise scale (m/s²).
    pub ou_sigma: f64,
    /// Per-episode multiplier applied to `ou_sigma`.
    pub sigma_decay: f64,
    pub episodes: usize,
    /// Length of one training episode (s).
    pub episode_seconds: f64,
    /// Width of both hidden layers.
    pub hidden: usize,
    /// End a training episode at the first collision. When false the
    /// collision is only counted and the slice runs to its end.
    pub terminate_on_collision: bool,
}

impl Default for DdpgConfig {
    fn default() -> Self {
        Self {
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            buffer_capacity: 500_000,
            batch_size: 32,
            tau: 1e-3,
            gamma: 0.99,
            ou_theta: 0.15,
            ou_sigma: 0.2 * 3.0,
            sigma_decay: 0.999,
            episodes: 2000,
            episode_seconds: 60.0,
            hidden: 64,
            terminate_on_collision: false,
        }
    }
}

impl DdpgConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return fail(format!("ddpg.tau must be in (0, 1], got {}", self.tau));
        }
        if !(self.gamma >= 0.0 && self.gamma < 1.0) {
            return fail(format!("ddpg.gamma must be in [0, 1), got {}", self.gamma));
        }
        if self.batch_size == 0 || self.batch_size > self.buffer_capacity {
            return fail(format!(
                "ddpg.batch_size must be in 1..=buffer_capacity ({}), got {}",
                self.buffer_capacity, self.batch_size
            ));
        }
        if !(self.ou_theta > 0.0 && self.ou_theta < 1.0) {
            return fail(format!("ddpg.ou_theta must be in (0, 1), got {}", self.ou_theta));
        }
        for (name, v) in [
            ("ddpg.actor_lr", self.actor_lr),
            ("ddpg.critic_lr", self.critic_lr),
            ("ddpg.ou_sigma", self.ou_sigma),
            ("ddpg.sigma_decay", self.sigma_decay),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return fail(format!("{name} must be >= 0, got {v}"));
            }
        }
        if !(self.episode_seconds > 0.0) {
            return fail(format!("ddpg.episode_seconds must be > 0, got {}", self.episode_seconds));
        }
        if self.hidden == 0 {
            return fail("ddpg.hidden must be >= 1".into());
        }
        Ok(())
    }
}

/// One experience sample. Observations are stored normalized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub s: [f64; OBS_DIM],
    /// Executed acceleration (m/s²).
    pub a: f64,
    pub r: f64,
    pub s_next: [f64; OBS_DIM],
    pub done: bool,
}

/// Fixed-capacity FIFO ring with uniform sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<T> {
    items: Vec<T>,
    capacity: usize,
    inserted: usize,
}

impl<T: Clone> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            items: Vec::with_capacity(capacity.min(1 << 16)),
            capacity,
            inserted: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Total number of pushes, including overwritten ones.
    pub fn inserted(&self) -> usize {
        self.inserted
    }

    pub fn push(&mut self, item: T) {
        if self.items.len() < self.capacity {
            self.items.push(item);
        } else {
            self.items[self.inserted % self.capacity] = item;
        }
        self.inserted += 1;
    }

    /// Stored items from oldest to newest.
    pub fn iter_oldest_first(&self) -> impl Iterator<Item = &T> {
        let split = if self.items.len() < self.capacity {
            0
        } else {
            self.inserted % self.capacity
        };
        self.items[split..].iter().chain(self.items[..split].iter())
    }

    /// `m` items drawn uniformly with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> Result<Vec<T>> {
        if self.items.len() < m || self.items.is_empty() {
            return Err(Error::NotReady {
                have: self.items.len(),
                want: m,
            });
        }
        Ok((0..m)
            .map(|_| self.items[rng.random_range(0..self.items.len())].clone())
            .collect())
    }
}

/// Mean-reverting exploration noise: `n ← n - θ·n + σ·ξ`, `ξ ~ N(0, 1)`.
pub fn ou_noise_step<R: Rng + ?Sized>(n_prev: f64, theta: f64, sigma: f64, rng: &mut R) -> f64 {
    let xi: f64 = rng.sample(StandardNormal);
    n_prev + theta * (0.0 - n_prev) + sigma * xi
}

/// One-step bootstrapped critic target.
pub fn td_target(r: f64, q_next: f64, gamma: f64, done: bool) -> f64 {
    let live = if done { 0.0 } else { 1.0 };
    r + gamma * q_next * live
}

/// Actor, critic, their slowly tracking targets, and both optimizers.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub actor: Mlp,
    pub critic: Mlp,
    pub target_actor: Mlp,
    pub target_critic: Mlp,
    pub actor_opt: AdamState,
    pub critic_opt: AdamState,
}

impl ModelParams {
    /// Actor `6 → h → h → 1` (tanh output) and critic `7 → h → h → 1`.
    pub fn init<R: Rng + ?Sized>(hidden: usize, rng: &mut R) -> Self {
        let actor = Mlp::init(
            &[OBS_DIM, hidden, hidden, 1],
            Activation::Relu,
            Activation::Tanh,
            FINAL_LAYER_SCALE,
            rng,
        );
        let critic = Mlp::init(
            &[OBS_DIM + 1, hidden, hidden, 1],
            Activation::Relu,
            Activation::Identity,
            FINAL_LAYER_SCALE,
            rng,
        );
        Self::from_networks(actor, critic)
    }

    /// Targets start as exact copies; optimizer moments start at zero.
    pub fn from_networks(actor: Mlp, critic: Mlp) -> Self {
        Self {
            actor_opt: AdamState::new(&actor),
            critic_opt: AdamState::new(&critic),
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor,
            critic,
        }
    }

    /// Plain-text model file. Optimizer moments are not persisted.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(MODEL_MAGIC);
        out.push('\n');
        let dims = |name: &str, net: &Mlp| {
            let d: Vec<String> = net.dims().iter().map(|d| d.to_string()).collect();
            format!("{name} {}", d.join(" "))
        };
        out.push_str(&format!("{} {}\n", dims("actor", &self.actor), dims("critic", &self.critic)));
        for (name, net) in self.blocks() {
            out.push_str(name);
            out.push('\n');
            net.write_text(&mut out);
        }
        out
    }

    fn blocks(&self) -> [(&'static str, &Mlp); 4] {
        [
            ("actor", &self.actor),
            ("critic", &self.critic),
            ("target-actor", &self.target_actor),
            ("target-critic", &self.target_critic),
        ]
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (ln, magic) = next_line(&mut lines)?;
        if magic.trim() != MODEL_MAGIC {
            return Err(Error::Format {
                line: ln,
                msg: format!("expected {MODEL_MAGIC:?}, found {magic:?}"),
            });
        }
        let (ln, dims_line) = next_line(&mut lines)?;
        let (actor_dims, critic_dims) = parse_dims_line(ln, dims_line)?;
        let mut nets = Vec::with_capacity(4);
        for (name, dims) in [
            ("actor", &actor_dims),
            ("critic", &critic_dims),
            ("target-actor", &actor_dims),
            ("target-critic", &critic_dims),
        ] {
            let (ln, block) = next_line(&mut lines)?;
            if block.trim() != name {
                return Err(Error::Format {
                    line: ln,
                    msg: format!("expected block {name:?}, found {block:?}"),
                });
            }
            let net = Mlp::read_text(&mut lines, dims.len() - 1)?;
            if &net.dims() != dims {
                return Err(Error::Format {
                    line: ln,
                    msg: format!("block {name} has dims {:?}, header says {dims:?}", net.dims()),
                });
            }
            nets.push(net);
        }
        let mut it = nets.into_iter();
        let (actor, critic) = (it.next().unwrap(), it.next().unwrap());
        let (target_actor, target_critic) = (it.next().unwrap(), it.next().unwrap());
        if actor.input_dim() != OBS_DIM || critic.input_dim() != OBS_DIM + 1 {
            return Err(Error::Format {
                line: 2,
                msg: format!("actor must take {OBS_DIM} inputs and critic {}", OBS_DIM + 1),
            });
        }
        Ok(Self {
            actor_opt: AdamState::new(&actor),
            critic_opt: AdamState::new(&critic),
            actor,
            critic,
            target_actor,
            target_critic,
        })
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

fn parse_dims_line(ln: usize, line: &str) -> Result<(Vec<usize>, Vec<usize>)> {
    let bad = |msg: String| Error::Format { line: ln, msg };
    let mut actor = Vec::new();
    let mut critic = Vec::new();
    let mut current: Option<&mut Vec<usize>> = None;
    for tok in line.split_whitespace() {
        match tok {
            "actor" => current = Some(&mut actor),
            "critic" => current = Some(&mut critic),
            _ => {
                let d: usize = tok
                    .parse()
                    .map_err(|_| bad(format!("bad dimension {tok:?} in {line:?}")))?;
                current
                    .as_mut()
                    .ok_or_else(|| bad(format!("dimension before network name in {line:?}")))?
                    .push(d);
            }
        }
    }
    if actor.len() < 2 || critic.len() < 2 {
        return Err(bad(format!("expected actor and critic dimension lists, found {line:?}")));
    }
    Ok((actor, critic))
}

/// Greedy action (m/s²) for an observation; always within `±a_max`.
pub fn actor_action(model: &ModelParams, obs: &Observation, platoon: &PlatoonConfig) -> Result<f64> {
    let out = model.actor.predict(&obs.normalized(platoon))?;
    Ok(platoon.a_max * out[0])
}

/// Greedy actions for several observations at once.
pub fn actor_actions(model: &ModelParams, obs: &[Observation], platoon: &PlatoonConfig) -> Result<Vec<f64>> {
    let mut x = Array2::zeros((obs.len(), OBS_DIM));
    for (mut row, o) in x.rows_mut().into_iter().zip(obs) {
        row.assign(&ndarray::arr1(&o.normalized(platoon)));
    }
    let cache = model.actor.forward(x.view())?;
    Ok(cache.output().column(0).iter().map(|u| platoon.a_max * u).collect())
}

fn stack_states(batch: &[Transition], next: bool) -> Array2<f64> {
    Array2::from_shape_fn((batch.len(), OBS_DIM), |(i, j)| {
        if next {
            batch[i].s_next[j]
        } else {
            batch[i].s[j]
        }
    })
}

/// `[states | actions]` as critic input.
fn critic_input(states: ArrayView2<f64>, actions: ArrayView2<f64>) -> Array2<f64> {
    ndarray::concatenate(ndarray::Axis(1), &[states, actions]).expect("row counts match")
}

/// Mean squared TD error and its gradient for the current critic. Targets
/// come from the target networks and are constants.
pub fn critic_loss_and_grad(
    model: &ModelParams,
    batch: &[Transition],
    gamma: f64,
    a_max: f64,
) -> Result<(f64, Gradients)> {
    let m = batch.len();
    let s = stack_states(batch, false);
    let s_next = stack_states(batch, true);
    let mu_next = model.target_actor.forward(s_next.view())?;
    let q_next = model
        .target_critic
        .forward(critic_input(s_next.view(), mu_next.output().view()).view())?;
    let actions = Array2::from_shape_fn((m, 1), |(i, _)| batch[i].a / a_max);
    let cache = model.critic.forward(critic_input(s.view(), actions.view()).view())?;
    let q = cache.output();
    let mut diff = Array2::zeros((m, 1));
    for (i, t) in batch.iter().enumerate() {
        let y = td_target(t.r, q_next.output()[[i, 0]], gamma, t.done);
        diff[[i, 0]] = q[[i, 0]] - y;
    }
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / m as f64;
    let upstream = diff.mapv(|d| 2.0 * d / m as f64);
    let (grads, _) = model.critic.backward(&cache, upstream.view())?;
    Ok((loss, grads))
}

/// Mean critic value of the actor's own actions, and the gradient of that
/// mean with respect to the actor parameters (the ascent direction).
pub fn actor_objective_and_grad(
    actor: &Mlp,
    critic: &Mlp,
    states: ArrayView2<f64>,
) -> Result<(f64, Gradients)> {
    let m = states.nrows();
    let actor_cache = actor.forward(states)?;
    let critic_cache = critic.forward(critic_input(states, actor_cache.output().view()).view())?;
    let objective = critic_cache.output().sum() / m as f64;
    let upstream = Array2::from_elem((m, 1), 1.0 / m as f64);
    let (_, d_input) = critic.backward(&critic_cache, upstream.view())?;
    let d_action = d_input.slice(ndarray::s![.., OBS_DIM..]).to_owned();
    let (grads, _) = actor.backward(&actor_cache, d_action.view())?;
    Ok((objective, grads))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    pub critic_loss: f64,
    pub actor_objective: f64,
}

/// Critic step, actor step through the updated critic, then soft target
/// updates `θ' ← τθ + (1 - τ)θ'`.
pub fn update_step(
    model: &mut ModelParams,
    batch: &[Transition],
    cfg: &DdpgConfig,
    a_max: f64,
) -> Result<UpdateStats> {
    if batch.is_empty() {
        return Err(Error::Structural("empty training batch".into()));
    }
    let (critic_loss, critic_grads) = critic_loss_and_grad(model, batch, cfg.gamma, a_max)?;
    if !critic_loss.is_finite() {
        return Err(divergence(format!("critic loss {critic_loss}")));
    }
    model
        .critic_opt
        .step(&mut model.critic, &critic_grads, cfg.critic_lr)?;

    let states = stack_states(batch, false);
    let (actor_objective, mut actor_grads) =
        actor_objective_and_grad(&model.actor, &model.critic, states.view())?;
    if !actor_objective.is_finite() {
        return Err(divergence(format!("actor objective {actor_objective}")));
    }
    // The optimizer descends, so hand it the negated ascent direction.
    for (w, b) in &mut actor_grads.layers {
        w.mapv_inplace(|g| -g);
        b.mapv_inplace(|g| -g);
    }
    model
        .actor_opt
        .step(&mut model.actor, &actor_grads, cfg.actor_lr)?;

    soft_update(model, cfg.tau);
    if !(model.actor.all_finite() && model.critic.all_finite()) {
        return Err(divergence("non-finite network parameters".into()));
    }
    Ok(UpdateStats {
        critic_loss,
        actor_objective,
    })
}

pub fn soft_update(model: &mut ModelParams, tau: f64) {
    model.target_critic.soft_update_from(&model.critic, tau);
    model.target_actor.soft_update_from(&model.actor, tau);
}

fn divergence(detail: String) -> Error {
    Error::Divergence {
        episode: 0,
        detail,
        checkpoint: None,
    }
}

/// Per-episode training record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeStats {
    pub episode: usize,
    /// Sum of rewards over all followers and frames.
    pub episode_return: f64,
    /// Mean critic loss over the episode's updates (0 before updates start).
    pub critic_loss: f64,
    /// Simulated frames; shorter than the slice when a collision ended it.
    pub frames: usize,
    pub collision: bool,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: ModelParams,
    pub curve: Vec<EpisodeStats>,
}

pub fn curve_csv(curve: &[EpisodeStats]) -> String {
    let mut out = String::from("episode,return,critic_loss\n");
    for e in curve {
        out.push_str(&format!("{},{},{}\n", e.episode, e.episode_return, e.critic_loss));
    }
    out
}

/// What the agent trains against.
#[derive(Debug, Clone, Copy)]
pub struct TrainEnv<'a> {
    pub platoon: &'a PlatoonConfig,
    pub reward: &'a RewardConfig,
    pub profile: &'a VelocityProfile,
    /// Time windows (s) that episodes must not overlap, e.g. held-out test
    /// slices.
    pub exclude: &'a [(f64, f64)],
}

/// Episode start indices whose whole window avoids every excluded range.
fn episode_starts(env: &TrainEnv<'_>, frames: usize) -> Vec<usize> {
    let dt = env.profile.dt;
    let last = env.profile.len().saturating_sub(frames + 1);
    (0..=last)
        .filter(|&i| {
            let (t0, t1) = (i as f64 * dt, (i + frames) as f64 * dt);
            env.exclude.iter().all(|&(a, b)| t1 <= a || t0 >= b)
        })
        .collect()
}

pub fn train(env: &TrainEnv<'_>, cfg: &DdpgConfig, seed: u64) -> Result<TrainOutcome> {
    train_with_progress(env, cfg, seed, |_| {})
}

/// Runs `cfg.episodes` episodes on random slices of the profile. Fully
/// determined by `(env, cfg, seed)`.
pub fn train_with_progress(
    env: &TrainEnv<'_>,
    cfg: &DdpgConfig,
    seed: u64,
    mut on_episode: impl FnMut(&EpisodeStats),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    env.platoon.validate()?;
    let platoon = env.platoon;
    let n = platoon.n_followers;
    let frames = (cfg.episode_seconds / env.profile.dt).round() as usize;
    let mut init_rng = stream(seed, "init");
    let mut model = ModelParams::init(cfg.hidden, &mut init_rng);
    let mut curve = Vec::with_capacity(cfg.episodes);
    if cfg.episodes == 0 {
        return Ok(TrainOutcome { model, curve });
    }
    let starts = episode_starts(env, frames);
    if starts.is_empty() {
        return Err(Error::Config(format!(
            "profile of {} s has no {} s window outside the excluded ranges",
            env.profile.duration(),
            cfg.episode_seconds
        )));
    }
    let trace = derive_leader_trace(env.profile, 0.0);
    let mut train_rng = stream(seed, "train");
    let mut noise_rngs: Vec<StreamRng> = (1..=n).map(|k| stream(seed, &format!("noise/{k}"))).collect();
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity);

    for episode in 0..cfg.episodes {
        let checkpoint = model.clone();
        let sigma = cfg.ou_sigma * cfg.sigma_decay.powi(episode as i32);
        let start = starts[train_rng.random_range(0..starts.len())];
        let mut leader = trace[start];
        leader.x = n as f64 * platoon.spacing();
        let mut frame = PlatoonFrame::at_equilibrium(leader, n, platoon);
        let mut obs = (1..=n)
            .map(|k| build_observation(k, &frame, platoon))
            .collect::<Result<Vec<_>>>()?;
        let mut noise = vec![0.0; n];
        let mut ret = 0.0;
        let mut loss_sum = 0.0;
        let mut updates = 0usize;
        let mut simulated = 0;
        let mut collided = false;

        for j in 0..frames {
            simulated += 1;
            let greedy = actor_actions(&model, &obs, platoon)?;
            let actions: Vec<f64> = greedy
                .iter()
                .zip(noise.iter_mut())
                .zip(noise_rngs.iter_mut())
                .map(|((&a, nz), rng)| {
                    *nz = ou_noise_step(*nz, cfg.ou_theta, sigma, rng);
                    clamp_accel(a + *nz, platoon.a_max)
                })
                .collect();
            let out = step_platoon(&frame, &actions, trace[start + j + 1].v, platoon, env.reward)?;
            let stop = out.collision && cfg.terminate_on_collision;
            collided |= out.collision;
            let done = j + 1 == frames || stop;
            for k in 0..n {
                buffer.push(Transition {
                    s: obs[k].normalized(platoon),
                    a: actions[k],
                    r: out.rewards[k],
                    s_next: out.observations[k].normalized(platoon),
                    done,
                });
                ret += out.rewards[k];
            }
            if buffer.len() >= cfg.batch_size {
                let batch = buffer.sample(cfg.batch_size, &mut train_rng)?;
                match update_step(&mut model, &batch, cfg, platoon.a_max) {
                    Ok(stats) => {
                        loss_sum += stats.critic_loss;
                        updates += 1;
                    }
                    Err(Error::Divergence { detail, .. }) => {
                        return Err(Error::Divergence {
                            episode,
                            detail,
                            checkpoint: Some(Box::new(checkpoint)),
                        });
                    }
                    Err(e) => return Err(e),
                }
            }
            obs = out.observations;
            frame = out.frame;
            if stop {
                break;
            }
        }
        let stats = EpisodeStats {
            episode,
            episode_return: ret,
            critic_loss: if updates > 0 { loss_sum / updates as f64 } else { 0.0 },
            frames: simulated,
            collision: collided,
        };
        on_episode(&stats);
        curve.push(stats);
    }
    Ok(TrainOutcome { model, curve })
}
