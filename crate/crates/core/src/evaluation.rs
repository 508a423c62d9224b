//! Test-case runner and the aggregate comparison metrics.
//!
//! A case replays a slice of the leader profile behind a platoon started at
//! equilibrium, with every follower driven by one strategy. All strategies
//! share the same actuation path: saturation to `±a_max`, then the jerk
//! clamp against the follower's previous acceleration.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::cacc::{cacc_command, CaccGains};
use crate::ddpg::{actor_actions, ModelParams};
use crate::environment::{build_observation, step_platoon, PlatoonFrame, RewardConfig};
use crate::error::{Error, Result};
use crate::hybrid::{arbitrate, HybridContext, HybridDecision, HybridState, NeighborEstimate, Source};
use crate::kinematics::{clamp_accel, clamp_jerk, PlatoonConfig};
use crate::profiles::{derive_leader_trace, VelocityProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    Cacc,
    Ddpg,
    Hcfs,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Cacc, Strategy::Ddpg, Strategy::Hcfs];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Cacc => "CACC",
            Strategy::Ddpg => "DDPG",
            Strategy::Hcfs => "HCFS",
        }
    }

    pub fn needs_model(self) -> bool {
        !matches!(self, Strategy::Cacc)
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cacc" => Ok(Strategy::Cacc),
            "ddpg" => Ok(Strategy::Ddpg),
            "hcfs" => Ok(Strategy::Hcfs),
            other => Err(Error::Config(format!("unknown strategy {other:?}"))),
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Everything a case run needs besides the profile and the model.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub platoon: PlatoonConfig,
    pub reward: RewardConfig,
    pub gains: CaccGains,
    pub beta_switch: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        let platoon = PlatoonConfig::default();
        Self {
            reward: RewardConfig::new(10.0, 0.1, &platoon),
            platoon,
            gains: CaccGains::default(),
            beta_switch: 0.5,
        }
    }
}

/// A profile slice and platoon size.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseDef {
    pub name: String,
    pub start: f64,
    pub end: f64,
    pub n_followers: usize,
}

impl CaseDef {
    pub fn new(name: impl Into<String>, start: f64, end: f64, n_followers: usize) -> Self {
        Self {
            name: name.into(),
            start,
            end,
            n_followers,
        }
    }

    /// The three held-out slices with 8, 6 and 4 followers.
    pub fn standard_cases() -> Vec<CaseDef> {
        vec![
            CaseDef::new("case1", 200.0, 220.0, 8),
            CaseDef::new("case2", 620.0, 640.0, 6),
            CaseDef::new("case3", 1020.0, 1040.0, 4),
        ]
    }

    /// Parses `start:end:n_followers`.
    pub fn parse(name: &str, text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(':').collect();
        let bad = || Error::Config(format!("case {text:?} is not start:end:n_followers"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let start: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let end: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
        if !(end > start && start >= 0.0) || n == 0 {
            return Err(bad());
        }
        Ok(Self::new(name, start, end, n))
    }

    pub fn format(&self) -> String {
        format!("{}:{}:{}", self.start, self.end, self.n_followers)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseSpec {
    pub case: CaseDef,
    pub strategy: Strategy,
}

/// One follower at one recorded frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    /// Seconds since the slice start.
    pub t: f64,
    /// 1-based follower index.
    pub vehicle_id: usize,
    pub x: f64,
    pub v: f64,
    pub a: f64,
    pub jerk: f64,
    pub e_v_lead: f64,
    /// 0 = CACC, 1 = DDPG, 2 = blended switch frame.
    pub source: u8,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub rows: Vec<TrajectoryRow>,
    /// Row-aligned arbitration records; empty unless the strategy is HCFS.
    pub decisions: Vec<HybridDecision>,
    pub n_followers: usize,
    pub n_frames: usize,
    pub collision: bool,
}

pub const TRAJECTORY_HEADER: &str = "t,vehicle_id,x,v,a,jerk,e_v_lead,source,reward";

impl Trajectory {
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.rows.len() * 96);
        out.push_str(TRAJECTORY_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.t, r.vehicle_id, r.x, r.v, r.a, r.jerk, r.e_v_lead, r.source, r.reward
            );
        }
        out
    }

    /// Executed accelerations of follower `k`, starting from its initial
    /// acceleration.
    pub fn accelerations(&self, k: usize, initial: f64) -> Vec<f64> {
        std::iter::once(initial)
            .chain(self.rows.iter().filter(|r| r.vehicle_id == k).map(|r| r.a))
            .collect()
    }
}

fn source_code(source: Source) -> u8 {
    match source {
        Source::Cacc => 0,
        Source::Ddpg => 1,
    }
}

/// Simulates one case. Followers start at the desired spacing, at the
/// leader's initial velocity, with zero acceleration. The run stops after the
/// first frame with a collision.
pub fn run_case(
    spec: &CaseSpec,
    profile: &VelocityProfile,
    model: Option<&ModelParams>,
    cfg: &EvalConfig,
) -> Result<Trajectory> {
    let strategy = spec.strategy;
    let model = match (strategy.needs_model(), model) {
        (true, None) => {
            return Err(Error::Config(format!("strategy {strategy} needs a trained model")));
        }
        (_, m) => m,
    };
    let platoon = PlatoonConfig {
        n_followers: spec.case.n_followers,
        ..cfg.platoon.clone()
    };
    platoon.validate()?;
    if (profile.dt - platoon.dt).abs() > 1e-12 {
        return Err(Error::Config(format!(
            "profile dt {} differs from platoon.dt {}",
            profile.dt, platoon.dt
        )));
    }
    let n = platoon.n_followers;
    let (i0, i1) = (profile.index_at(spec.case.start), profile.index_at(spec.case.end));
    if i1 <= i0 || i1 >= profile.len() {
        return Err(Error::Config(format!(
            "case {} slice {}..{} s is outside the {} s profile",
            spec.case.name,
            spec.case.start,
            spec.case.end,
            profile.duration()
        )));
    }
    let ctx = HybridContext {
        platoon: &platoon,
        reward: &cfg.reward,
        gains: &cfg.gains,
        beta_switch: cfg.beta_switch,
    };
    ctx.validate()?;

    let trace = derive_leader_trace(profile, 0.0);
    let mut leader = trace[i0];
    leader.x = n as f64 * platoon.spacing();
    let mut frame = PlatoonFrame::at_equilibrium(leader, n, &platoon);
    let mut hybrid_states: Vec<HybridState> =
        frame.followers.iter().map(|f| HybridState::new(f.a)).collect();

    let n_frames = i1 - i0;
    let mut rows = Vec::with_capacity(n_frames * n);
    let mut decisions = Vec::new();
    let mut collision = false;
    let mut recorded = 0;
    for step in 0..n_frames {
        let obs = (1..=n)
            .map(|k| build_observation(k, &frame, &platoon))
            .collect::<Result<Vec<_>>>()?;
        let raw_ddpg = match model {
            Some(m) if strategy.needs_model() => actor_actions(m, &obs, &platoon)?,
            _ => vec![0.0; n],
        };
        let mut actions = Vec::with_capacity(n);
        let mut sources = Vec::with_capacity(n);
        for k in 0..n {
            let o = &obs[k];
            let a_prev = frame.followers[k].a;
            let raw_cacc = cacc_command(o, &cfg.gains, o.v, platoon.dt, platoon.a_max);
            let shared = |a: f64| clamp_jerk(clamp_accel(a, platoon.a_max), a_prev, platoon.jerk_max, platoon.dt);
            match strategy {
                Strategy::Cacc => {
                    actions.push(shared(raw_cacc));
                    sources.push(0);
                }
                Strategy::Ddpg => {
                    actions.push(shared(raw_ddpg[k]));
                    sources.push(1);
                }
                Strategy::Hcfs => {
                    let est = NeighborEstimate {
                        leader_a: frame.leader.a,
                        predecessor_a: frame.vehicle(k).expect("k < n").a,
                    };
                    let (d, next) = arbitrate(raw_ddpg[k], raw_cacc, o, hybrid_states[k], est, &ctx)?;
                    hybrid_states[k] = next;
                    actions.push(d.a_exec);
                    sources.push(if d.switched { 2 } else { source_code(d.source) });
                    decisions.push(d);
                }
            }
        }
        let out = step_platoon(&frame, &actions, trace[i0 + step + 1].v, &platoon, &cfg.reward)?;
        let t = (step + 1) as f64 * platoon.dt;
        for k in 0..n {
            let f = out.frame.followers[k];
            rows.push(TrajectoryRow {
                t,
                vehicle_id: k + 1,
                x: f.x,
                v: f.v,
                a: f.a,
                jerk: out.jerks[k],
                e_v_lead: out.e_v_lead[k],
                source: sources[k],
                reward: out.rewards[k],
            });
        }
        recorded += 1;
        frame = out.frame;
        if out.collision {
            collision = true;
            break;
        }
    }
    Ok(Trajectory {
        rows,
        decisions,
        n_followers: n,
        n_frames: recorded,
        collision,
    })
}

/// Aggregate statistics of one strategy on one case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseMetrics {
    pub sum_reward: f64,
    /// Σ|e_v_lead| (m/s).
    pub sum_abs_ev: f64,
    /// Σ|jerk| (m/s³).
    pub sum_abs_jerk: f64,
    /// Population standard deviation of |e_v_lead| samples (m/s).
    pub std_ev: f64,
    /// Population standard deviation of |jerk| samples (m/s³).
    pub std_jerk: f64,
    pub collision: bool,
}

fn population_std(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    (samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt()
}

pub fn case_metrics(traj: &Trajectory) -> Result<CaseMetrics> {
    if traj.rows.is_empty() {
        return Err(Error::Structural("cannot compute metrics of an empty trajectory".into()));
    }
    let abs_ev: Vec<f64> = traj.rows.iter().map(|r| r.e_v_lead.abs()).collect();
    let abs_jerk: Vec<f64> = traj.rows.iter().map(|r| r.jerk.abs()).collect();
    Ok(CaseMetrics {
        sum_reward: traj.rows.iter().map(|r| r.reward).sum(),
        sum_abs_ev: abs_ev.iter().sum(),
        sum_abs_jerk: abs_jerk.iter().sum(),
        std_ev: population_std(&abs_ev),
        std_jerk: population_std(&abs_jerk),
        collision: traj.collision,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportEntry {
    pub case: CaseDef,
    pub strategy: Strategy,
    pub metrics: CaseMetrics,
    pub trajectory: Trajectory,
}

/// Metrics for every (case, strategy) pair, ordered by case then by the
/// fixed strategy order CACC, DDPG, HCFS.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub entries: Vec<ReportEntry>,
}

pub const REPORT_HEADER: &str = "case,strategy,sum_reward,sum_abs_ev,sum_abs_jerk,std_ev,std_jerk,collision";

impl Report {
    pub fn get(&self, case: &str, strategy: Strategy) -> Option<&CaseMetrics> {
        self.entries
            .iter()
            .find(|e| e.case.name == case && e.strategy == strategy)
            .map(|e| &e.metrics)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(REPORT_HEADER);
        out.push('\n');
        for e in &self.entries {
            let m = &e.metrics;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                e.case.name,
                e.strategy.name(),
                m.sum_reward,
                m.sum_abs_ev,
                m.sum_abs_jerk,
                m.std_ev,
                m.std_jerk,
                u8::from(m.collision)
            );
        }
        out
    }
}

pub fn compare_report(
    cases: &[CaseDef],
    strategies: &[Strategy],
    profile: &VelocityProfile,
    model: Option<&ModelParams>,
    cfg: &EvalConfig,
) -> Result<Report> {
    let mut ordered: Vec<Strategy> = strategies.to_vec();
    ordered.sort();
    ordered.dedup();
    let mut entries = Vec::with_capacity(cases.len() * ordered.len());
    for case in cases {
        for &strategy in &ordered {
            let spec = CaseSpec {
                case: case.clone(),
                strategy,
            };
            let trajectory = run_case(&spec, profile, model, cfg)?;
            entries.push(ReportEntry {
                case: case.clone(),
                strategy,
                metrics: case_metrics(&trajectory)?,
                trajectory,
            });
        }
    }
    Ok(Report { entries })
}
