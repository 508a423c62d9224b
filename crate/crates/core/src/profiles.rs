//! Leader velocity traces.
//!
//! A trace either comes from a `t,v` CSV file or from a synthetic stop-and-go
//! generator (a sinusoid plus smoothed Gaussian noise). Either way it is
//! stored on a uniform time grid starting at t = 0.

use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::kinematics::VehicleState;

/// Velocities sampled every `dt` seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityProfile {
    pub dt: f64,
    pub v: Vec<f64>,
}

impl VelocityProfile {
    pub fn new(dt: f64, v: Vec<f64>) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Config(format!("profile dt must be > 0, got {dt}")));
        }
        if v.len() < 2 {
            return Err(Error::Config("a profile needs at least 2 samples".into()));
        }
        if let Some(bad) = v.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
            return Err(Error::Config(format!("profile velocity {bad} is not >= 0")));
        }
        Ok(Self { dt, v })
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    /// Covered time span (s).
    pub fn duration(&self) -> f64 {
        (self.v.len() - 1) as f64 * self.dt
    }

    /// Index of the sample nearest to time `t`.
    pub fn index_at(&self, t: f64) -> usize {
        (t / self.dt).round().max(0.0) as usize
    }

    /// Samples `start..=end` (seconds, both rounded to the grid).
    pub fn slice(&self, start: f64, end: f64) -> Result<VelocityProfile> {
        let (i0, i1) = (self.index_at(start), self.index_at(end));
        if i1 <= i0 || i1 >= self.v.len() {
            return Err(Error::Config(format!(
                "slice {start}..{end} s outside profile of {} s",
                self.duration()
            )));
        }
        Ok(VelocityProfile {
            dt: self.dt,
            v: self.v[i0..=i1].to_vec(),
        })
    }

    /// Serialized as `t,v` CSV with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,v\n");
        for (i, v) in self.v.iter().enumerate() {
            let _ = writeln!(out, "{},{}", grid_time(i, self.dt), v);
        }
        out
    }
}

fn grid_time(i: usize, dt: f64) -> f64 {
    i as f64 * dt
}

/// Parses `t,v` rows (optional `t,v` header) and resamples them linearly onto
/// a `target_dt` grid starting at the first timestamp. Velocities are clamped
/// to `[0, v_max]`.
pub fn parse_profile(text: &str, source: &Path, target_dt: f64, v_max: f64) -> Result<VelocityProfile> {
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: source.to_path_buf(),
        line,
        msg,
    };
    let mut rows: Vec<(f64, f64)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || (rows.is_empty() && line.replace(' ', "") == "t,v") {
            continue;
        }
        let mut fields = line.split(',');
        let (Some(t), Some(v), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(parse_err(line_no, format!("expected two fields, got {line:?}")));
        };
        let t: f64 = t
            .trim()
            .parse()
            .map_err(|_| parse_err(line_no, format!("time {t:?} is not a number")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| parse_err(line_no, format!("velocity {v:?} is not a number")))?;
        if !(t.is_finite() && v.is_finite()) {
            return Err(parse_err(line_no, "non-finite value".into()));
        }
        if let Some(&(t_prev, _)) = rows.last() {
            if t <= t_prev {
                return Err(parse_err(
                    line_no,
                    format!("time {t} does not increase past {t_prev}"),
                ));
            }
        }
        rows.push((t, v));
    }
    if rows.len() < 2 {
        return Err(parse_err(
            text.lines().count().max(1),
            format!("need at least 2 data rows, found {}", rows.len()),
        ));
    }
    resample(&rows, target_dt, v_max)
}

pub fn load_profile(path: impl AsRef<Path>, target_dt: f64, v_max: f64) -> Result<VelocityProfile> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_profile(&text, path, target_dt, v_max)
}

fn resample(rows: &[(f64, f64)], dt: f64, v_max: f64) -> Result<VelocityProfile> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Config(format!("target dt must be > 0, got {dt}")));
    }
    let t0 = rows[0].0;
    let span = rows[rows.len() - 1].0 - t0;
    let n = (span / dt + 1e-9).floor() as usize + 1;
    let mut seg = 0;
    let v = (0..n)
        .map(|i| {
            let t = t0 + grid_time(i, dt);
            while seg + 2 < rows.len() && rows[seg + 1].0 < t {
                seg += 1;
            }
            let (ta, va) = rows[seg];
            let (tb, vb) = rows[seg + 1];
            let w = ((t - ta) / (tb - ta)).clamp(0.0, 1.0);
            let v = if w >= 1.0 { vb } else { va + w * (vb - va) };
            v.clamp(0.0, v_max)
        })
        .collect();
    VelocityProfile::new(dt, v)
}

/// Parameters of the synthetic stop-and-go trace.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub duration: f64,
    pub dt: f64,
    pub v_mean: f64,
    pub amp: f64,
    pub period: f64,
    pub noise_sigma: f64,
    pub v_max: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            duration: 1200.0,
            dt: 0.2,
            v_mean: 6.0,
            amp: 5.5,
            period: 60.0,
            noise_sigma: 0.02,
            v_max: 100.0 / 3.6,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("profile.duration > 0", self.duration > 0.0),
            ("profile.dt > 0", self.dt > 0.0),
            ("profile.period > 0", self.period > 0.0),
            ("profile.amp >= 0", self.amp >= 0.0),
            ("profile.amp <= profile.v_mean", self.amp <= self.v_mean),
            ("profile.noise_sigma >= 0", self.noise_sigma >= 0.0),
            ("platoon.v_max > 0", self.v_max > 0.0),
        ];
        for (rule, ok) in checks {
            if !ok {
                return Err(Error::Config(format!("synthetic profile requires {rule}")));
            }
        }
        Ok(())
    }
}

/// `v(t) = clamp(v_mean + amp·sin(2πt/period) + noise, 0, v_max)` where the
/// noise is white Gaussian smoothed by a centered 3-sample moving average.
pub fn synth_stop_and_go(params: &SynthParams, seed: u64) -> Result<VelocityProfile> {
    params.validate()?;
    let n = (params.duration / params.dt).round() as usize + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let white: Vec<f64> = if params.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, params.noise_sigma)
            .map_err(|e| Error::Config(format!("noise: {e}")))?;
        (0..n).map(|_| normal.sample(&mut rng)).collect()
    } else {
        vec![0.0; n]
    };
    let v = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(n - 1);
            let noise = white[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64;
            let t = grid_time(i, params.dt);
            let wave = params.amp * (2.0 * std::f64::consts::PI * t / params.period).sin();
            (params.v_mean + wave + noise).clamp(0.0, params.v_max)
        })
        .collect();
    VelocityProfile::new(params.dt, v)
}

/// Leader states replaying `profile`: acceleration by backward difference
/// (zero at the first sample) and position by
/// `x[k+1] = x[k] + v[k]·dt + a[k]·dt²/2`.
pub fn derive_leader_trace(profile: &VelocityProfile, x0: f64) -> Vec<VehicleState> {
    let dt = profile.dt;
    let mut trace = Vec::with_capacity(profile.len());
    let mut state = VehicleState::new(x0, profile.v[0], 0.0);
    trace.push(state);
    for w in profile.v.windows(2) {
        state = crate::environment::advance_leader(state, w[1], dt);
        trace.push(state);
    }
    trace
}
