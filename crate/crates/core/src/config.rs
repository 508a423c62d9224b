//! Flat `key = value` run configuration.
//!
//! Keys are dotted (`platoon.dt`, `ddpg.tau`, `cacc.k4`, ...). Blank lines and
//! lines starting with `#` are ignored. Unknown keys are rejected, and the
//! whole configuration is validated before anything runs. Two keys accept
//! `auto`: `platoon.jerk_max` (then `2·a_max/dt`) and `ddpg.ou_sigma` (then
//! `0.2·a_max`).
//!
//! [`RunConfig::to_text`] writes every key, so a dumped file reloads to the
//! same run.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::cacc::CaccGains;
use crate::ddpg::DdpgConfig;
use crate::environment::RewardConfig;
use crate::error::{Error, Result};
use crate::evaluation::{CaseDef, EvalConfig, Strategy};
use crate::kinematics::{default_jerk_max, PlatoonConfig};
use crate::profiles::SynthParams;

/// Where the leader profile comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum ProfileSource {
    Synthetic,
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub platoon: PlatoonConfig,
    /// `None` means `2·a_max/dt`.
    pub jerk_max: Option<f64>,
    pub omega1: f64,
    pub omega2: f64,
    pub gains: CaccGains,
    pub ddpg: DdpgConfig,
    /// `None` means `0.2·a_max`.
    pub ou_sigma: Option<f64>,
    pub beta_switch: f64,
    pub profile: ProfileSource,
    pub synth: SynthParams,
    pub cases: Vec<CaseDef>,
    pub strategies: Vec<Strategy>,
    pub seed: u64,
    pub model_path: PathBuf,
    pub curve_path: PathBuf,
    pub out_dir: PathBuf,
    pub profile_out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            platoon: PlatoonConfig::default(),
            jerk_max: None,
            omega1: 10.0,
            omega2: 0.1,
            gains: CaccGains::default(),
            ddpg: DdpgConfig::default(),
            ou_sigma: None,
            beta_switch: 0.5,
            profile: ProfileSource::Synthetic,
            synth: SynthParams::default(),
            cases: CaseDef::standard_cases(),
            strategies: Strategy::ALL.to_vec(),
            seed: 1,
            model_path: "model.txt".into(),
            curve_path: "curve.csv".into(),
            out_dir: "out".into(),
            profile_out: "profile.csv".into(),
        }
    }
}

/// Every accepted key, in dump order.
pub const KEYS: &[&str] = &[
    "seed",
    "platoon.n_followers",
    "platoon.dt",
    "platoon.vehicle_length",
    "platoon.headway",
    "platoon.a_max",
    "platoon.v_max",
    "platoon.jerk_max",
    "platoon.v2v_delay",
    "reward.omega1",
    "reward.omega2",
    "cacc.k1",
    "cacc.k2",
    "cacc.k3",
    "cacc.k4",
    "ddpg.actor_lr",
    "ddpg.critic_lr",
    "ddpg.buffer_capacity",
    "ddpg.batch_size",
    "ddpg.tau",
    "ddpg.gamma",
    "ddpg.ou_theta",
    "ddpg.ou_sigma",
    "ddpg.sigma_decay",
    "ddpg.episodes",
    "ddpg.episode_seconds",
    "ddpg.hidden",
    "ddpg.terminate_on_collision",
    "hybrid.beta_switch",
    "profile.path",
    "profile.duration",
    "profile.v_mean",
    "profile.amp",
    "profile.period",
    "profile.noise_sigma",
    "eval.cases",
    "eval.strategies",
    "output.model",
    "output.curve",
    "output.dir",
    "output.profile",
];

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_auto(key: &str, value: &str) -> Result<Option<f64>> {
    if value.eq_ignore_ascii_case("auto") {
        Ok(None)
    } else {
        parse_num(key, value).map(Some)
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false, got {value:?}"))),
    }
}

fn fmt_auto(v: Option<f64>) -> String {
    v.map_or_else(|| "auto".to_string(), |v| v.to_string())
}

impl RunConfig {
    /// Resolves a full key or an unambiguous last segment (`tau` for
    /// `ddpg.tau`).
    pub fn resolve_key(name: &str) -> Result<&'static str> {
        if let Some(k) = KEYS.iter().find(|k| **k == name) {
            return Ok(k);
        }
        let matches: Vec<&'static str> = KEYS
            .iter()
            .copied()
            .filter(|k| k.rsplit('.').next() == Some(name))
            .collect();
        match matches.as_slice() {
            [one] => Ok(one),
            [] => Err(Error::Config(format!("unknown config key {name:?}"))),
            many => Err(Error::Config(format!("ambiguous key {name:?}: one of {}", many.join(", ")))),
        }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = Self::resolve_key(key)?;
        let value = value.trim();
        let p = &mut self.platoon;
        let d = &mut self.ddpg;
        let s = &mut self.synth;
        match key {
            "seed" => self.seed = parse_num(key, value)?,
            "platoon.n_followers" => p.n_followers = parse_num(key, value)?,
            "platoon.dt" => p.dt = parse_num(key, value)?,
            "platoon.vehicle_length" => p.vehicle_length = parse_num(key, value)?,
            "platoon.headway" => p.headway = parse_num(key, value)?,
            "platoon.a_max" => p.a_max = parse_num(key, value)?,
            "platoon.v_max" => p.v_max = parse_num(key, value)?,
            "platoon.jerk_max" => self.jerk_max = parse_auto(key, value)?,
            "platoon.v2v_delay" => p.v2v_delay = parse_num(key, value)?,
            "reward.omega1" => self.omega1 = parse_num(key, value)?,
            "reward.omega2" => self.omega2 = parse_num(key, value)?,
            "cacc.k1" => self.gains.k1 = parse_num(key, value)?,
            "cacc.k2" => self.gains.k2 = parse_num(key, value)?,
            "cacc.k3" => self.gains.k3 = parse_num(key, value)?,
            "cacc.k4" => self.gains.k4 = parse_num(key, value)?,
            "ddpg.actor_lr" => d.actor_lr = parse_num(key, value)?,
            "ddpg.critic_lr" => d.critic_lr = parse_num(key, value)?,
            "ddpg.buffer_capacity" => d.buffer_capacity = parse_num(key, value)?,
            "ddpg.batch_size" => d.batch_size = parse_num(key, value)?,
            "ddpg.tau" => d.tau = parse_num(key, value)?,
            "ddpg.gamma" => d.gamma = parse_num(key, value)?,
            "ddpg.ou_theta" => d.ou_theta = parse_num(key, value)?,
            "ddpg.ou_sigma" => self.ou_sigma = parse_auto(key, value)?,
            "ddpg.sigma_decay" => d.sigma_decay = parse_num(key, value)?,
            "ddpg.episodes" => d.episodes = parse_num(key, value)?,
            "ddpg.episode_seconds" => d.episode_seconds = parse_num(key, value)?,
            "ddpg.hidden" => d.hidden = parse_num(key, value)?,
            "ddpg.terminate_on_collision" => d.terminate_on_collision = parse_bool(key, value)?,
            "hybrid.beta_switch" => self.beta_switch = parse_num(key, value)?,
            "profile.path" => {
                self.profile = if value.is_empty() || value == "synthetic" {
                    ProfileSource::Synthetic
                } else {
                    ProfileSource::File(value.into())
                }
            }
            "profile.duration" => s.duration = parse_num(key, value)?,
            "profile.v_mean" => s.v_mean = parse_num(key, value)?,
            "profile.amp" => s.amp = parse_num(key, value)?,
            "profile.period" => s.period = parse_num(key, value)?,
            "profile.noise_sigma" => s.noise_sigma = parse_num(key, value)?,
            "eval.cases" => self.cases = parse_cases(value)?,
            "eval.strategies" => {
                self.strategies = value
                    .split(',')
                    .map(str::parse)
                    .collect::<Result<Vec<Strategy>>>()?;
            }
            "output.model" => self.model_path = value.into(),
            "output.curve" => self.curve_path = value.into(),
            "output.dir" => self.out_dir = value.into(),
            "output.profile" => self.profile_out = value.into(),
            other => unreachable!("key {other} listed but not handled"),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Result<String> {
        let key = Self::resolve_key(key)?;
        let p = &self.platoon;
        let d = &self.ddpg;
        let s = &self.synth;
        Ok(match key {
            "seed" => self.seed.to_string(),
            "platoon.n_followers" => p.n_followers.to_string(),
            "platoon.dt" => p.dt.to_string(),
            "platoon.vehicle_length" => p.vehicle_length.to_string(),
            "platoon.headway" => p.headway.to_string(),
            "platoon.a_max" => p.a_max.to_string(),
            "platoon.v_max" => p.v_max.to_string(),
            "platoon.jerk_max" => fmt_auto(self.jerk_max),
            "platoon.v2v_delay" => p.v2v_delay.to_string(),
            "reward.omega1" => self.omega1.to_string(),
            "reward.omega2" => self.omega2.to_string(),
            "cacc.k1" => self.gains.k1.to_string(),
            "cacc.k2" => self.gains.k2.to_string(),
            "cacc.k3" => self.gains.k3.to_string(),
            "cacc.k4" => self.gains.k4.to_string(),
            "ddpg.actor_lr" => d.actor_lr.to_string(),
            "ddpg.critic_lr" => d.critic_lr.to_string(),
            "ddpg.buffer_capacity" => d.buffer_capacity.to_string(),
            "ddpg.batch_size" => d.batch_size.to_string(),
            "ddpg.tau" => d.tau.to_string(),
            "ddpg.gamma" => d.gamma.to_string(),
            "ddpg.ou_theta" => d.ou_theta.to_string(),
            "ddpg.ou_sigma" => fmt_auto(self.ou_sigma),
            "ddpg.sigma_decay" => d.sigma_decay.to_string(),
            "ddpg.episodes" => d.episodes.to_string(),
            "ddpg.episode_seconds" => d.episode_seconds.to_string(),
            "ddpg.hidden" => d.hidden.to_string(),
            "ddpg.terminate_on_collision" => d.terminate_on_collision.to_string(),
            "hybrid.beta_switch" => self.beta_switch.to_string(),
            "profile.path" => match &self.profile {
                ProfileSource::Synthetic => "synthetic".to_string(),
                ProfileSource::File(path) => path.display().to_string(),
            },
            "profile.duration" => s.duration.to_string(),
            "profile.v_mean" => s.v_mean.to_string(),
            "profile.amp" => s.amp.to_string(),
            "profile.period" => s.period.to_string(),
            "profile.noise_sigma" => s.noise_sigma.to_string(),
            "eval.cases" => self.cases.iter().map(CaseDef::format).collect::<Vec<_>>().join(","),
            "eval.strategies" => self.strategies.iter().map(|s| s.name()).collect::<Vec<_>>().join(","),
            "output.model" => self.model_path.display().to_string(),
            "output.curve" => self.curve_path.display().to_string(),
            "output.dir" => self.out_dir.display().to_string(),
            "output.profile" => self.profile_out.display().to_string(),
            other => unreachable!("key {other} listed but not handled"),
        })
    }

    /// Applies `text` on top of `self`. Errors name the offending line.
    pub fn apply_text(&mut self, text: &str, source: &Path) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: source.to_path_buf(),
                line: i + 1,
                msg: format!("expected key = value, got {line:?}"),
            })?;
            self.set(key.trim(), value).map_err(|e| match e {
                Error::Config(msg) => Error::Config(format!("{}:{}: {msg}", source.display(), i + 1)),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn from_text(text: &str, source: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text, source)?;
        Ok(cfg)
    }

    /// Loads a file, or the defaults when `path` is the literal `default`.
    pub fn load(path: &Path) -> Result<Self> {
        if path.as_os_str() == "default" {
            return Ok(Self::default());
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, path)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let _ = writeln!(out, "{key} = {}", self.get(key).expect("listed key"));
        }
        out
    }

    /// Platoon settings with `auto` values filled in.
    pub fn effective_platoon(&self) -> PlatoonConfig {
        let mut p = self.platoon.clone();
        p.jerk_max = self.jerk_max.unwrap_or_else(|| default_jerk_max(p.a_max, p.dt));
        p
    }

    pub fn effective_ddpg(&self) -> DdpgConfig {
        let mut d = self.ddpg.clone();
        d.ou_sigma = self.ou_sigma.unwrap_or(0.2 * self.platoon.a_max);
        d
    }

    pub fn reward(&self) -> RewardConfig {
        RewardConfig::new(self.omega1, self.omega2, &self.effective_platoon())
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            platoon: self.effective_platoon(),
            reward: self.reward(),
            gains: self.gains,
            beta_switch: self.beta_switch,
        }
    }

    pub fn synth_params(&self) -> SynthParams {
        SynthParams {
            dt: self.platoon.dt,
            v_max: self.platoon.v_max,
            ..self.synth.clone()
        }
    }

    /// Held-out time windows that training must avoid.
    pub fn excluded_windows(&self) -> Vec<(f64, f64)> {
        self.cases.iter().map(|c| (c.start, c.end)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.effective_platoon().validate()?;
        self.reward().validate()?;
        self.gains.validate()?;
        self.effective_ddpg().validate()?;
        if !(0.0..=1.0).contains(&self.beta_switch) {
            return Err(Error::Config(format!(
                "hybrid.beta_switch must be in [0, 1], got {}",
                self.beta_switch
            )));
        }
        if self.profile == ProfileSource::Synthetic {
            self.synth_params().validate()?;
        }
        if self.strategies.is_empty() {
            return Err(Error::Config("eval.strategies is empty".into()));
        }
        Ok(())
    }
}

/// Parses `start:end:n,start:end:n,...`; cases are named `case1`, `case2`, ...
pub fn parse_cases(text: &str) -> Result<Vec<CaseDef>> {
    let cases = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .enumerate()
        .map(|(i, s)| CaseDef::parse(&format!("case{}", i + 1), s))
        .collect::<Result<Vec<_>>>()?;
    if cases.is_empty() {
        return Err(Error::Config("eval.cases is empty".into()));
    }
    Ok(cases)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_resolve_auto() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.effective_platoon().jerk_max, 30.0);
        assert_eq!(cfg.effective_ddpg().ou_sigma, 0.6000000000000001);
    }

    #[test]
    fn dump_reload_roundtrip() {
        let mut cfg = RunConfig::default();
        cfg.set("tau", "0.01").unwrap();
        cfg.set("platoon.jerk_max", "12.5").unwrap();
        cfg.set("eval.cases", "0:20:3,40:60:2").unwrap();
        cfg.set("profile.path", "data/leader.csv").unwrap();
        let text = cfg.to_text();
        let back = RunConfig::from_text(&text, Path::new("dump")).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn unknown_and_ambiguous_keys() {
        let mut cfg = RunConfig::default();
        assert!(matches!(cfg.set("ddpg.taus", "1"), Err(Error::Config(_))));
        let err = RunConfig::from_text("seed = 3\nbogus = 1\n", Path::new("c.cfg")).unwrap_err();
        assert!(err.to_string().contains("c.cfg:2"), "{err}");
        assert!(RunConfig::from_text("seed 3\n", Path::new("c.cfg")).is_err());
        // `a_max` only exists under `platoon.`, `dt` likewise.
        assert_eq!(RunConfig::resolve_key("a_max").unwrap(), "platoon.a_max");
    }

    #[test]
    fn out_of_range_values_rejected() {
        for (k, v) in [("tau", "1.5"), ("gamma", "1"), ("beta_switch", "2"), ("amp", "7")] {
            let mut cfg = RunConfig::default();
            cfg.set(k, v).unwrap();
            assert!(cfg.validate().is_err(), "{k}={v}");
        }
    }
}
