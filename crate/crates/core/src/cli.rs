//! The `hcfs` command line.
//!
//! ```text
//! hcfs train          [--config FILE] [--KEY VALUE]...
//! hcfs eval           [--config FILE] [--KEY VALUE]...
//! hcfs compare        [--config FILE] [--KEY VALUE]...
//! hcfs synth-profile  [--config FILE] [--KEY VALUE]...
//! hcfs dump-config    [--config FILE] [--KEY VALUE]...
//! ```
//!
//! Any configuration key can follow the subcommand as a flag, either in full
//! (`--ddpg.tau 0.01`) or by its last segment when that is unambiguous
//! (`--tau 0.01`, `--episodes 0`, `--model m.txt`). `--config default`, the
//! default, starts from the built-in values.
//!
//! Exit status: 0 on success, 2 for configuration errors, 3 for I/O, parse
//! and model-format errors, 4 when training diverges.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{ProfileSource, RunConfig};
use crate::ddpg::{curve_csv, train_with_progress, ModelParams, TrainEnv};
use crate::error::{Error, Result};
use crate::evaluation::{compare_report, Report, Strategy};
use crate::profiles::{load_profile, synth_stop_and_go, VelocityProfile};
use crate::rng::stream_seed;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_DIVERGENCE: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "hcfs", version, about = "Platoon car-following: CACC, DDPG and the hybrid strategy")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train the shared DDPG policy; writes output.model and output.curve.
    Train(CommonArgs),
    /// Evaluate eval.strategies on eval.cases and print the report CSV.
    Eval(CommonArgs),
    /// Like eval, but write report.csv and one trajectory CSV per case and
    /// strategy into output.dir.
    Compare(CommonArgs),
    /// Write the synthetic stop-and-go leader profile to output.profile.
    SynthProfile(CommonArgs),
    /// Print the effective configuration, one `key = value` per line.
    DumpConfig(CommonArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Configuration file, or `default` for the built-in values.
    #[arg(long, default_value = "default")]
    config: PathBuf,
    /// Configuration overrides as `--KEY VALUE` or `--KEY=VALUE`.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "--KEY VALUE")]
    overrides: Vec<String>,
}

/// Maps an error to the process exit status.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io { .. } | Error::Parse { .. } | Error::Format { .. } => EXIT_IO,
        Error::Divergence { .. } => EXIT_DIVERGENCE,
        Error::Config(_) | Error::NumericDomain(_) | Error::Structural(_) | Error::NotReady { .. } => {
            EXIT_CONFIG
        }
    }
}

/// Applies `--key value` / `--key=value` pairs.
pub fn apply_overrides(cfg: &mut RunConfig, args: &[String]) -> Result<()> {
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let flag = arg
            .strip_prefix("--")
            .ok_or_else(|| Error::Config(format!("expected --KEY VALUE, got {arg:?}")))?;
        let (key, value) = match flag.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                let v = it
                    .next()
                    .ok_or_else(|| Error::Config(format!("--{flag} needs a value")))?;
                (flag.to_string(), v.clone())
            }
        };
        cfg.set(&key.replace('-', "_"), &value)?;
    }
    Ok(())
}

fn build_config(args: &CommonArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(&args.config)?;
    apply_overrides(&mut cfg, &args.overrides)?;
    cfg.validate()?;
    Ok(cfg)
}

/// The leader profile a run uses: the configured file, or the synthetic
/// trace drawn from the `profile-synth` stream of the root seed.
pub fn run_profile(cfg: &RunConfig) -> Result<VelocityProfile> {
    match &cfg.profile {
        ProfileSource::File(path) => load_profile(path, cfg.platoon.dt, cfg.platoon.v_max),
        ProfileSource::Synthetic => {
            synth_stop_and_go(&cfg.synth_params(), stream_seed(cfg.seed, "profile-synth"))
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn cmd_train(cfg: &RunConfig) -> Result<()> {
    let profile = run_profile(cfg)?;
    let platoon = cfg.effective_platoon();
    let reward = cfg.reward();
    let exclude = cfg.excluded_windows();
    let env = TrainEnv {
        platoon: &platoon,
        reward: &reward,
        profile: &profile,
        exclude: &exclude,
    };
    let ddpg = cfg.effective_ddpg();
    let report_every = (ddpg.episodes / 20).max(1);
    let result = train_with_progress(&env, &ddpg, cfg.seed, |e| {
        if (e.episode + 1) % report_every == 0 {
            eprintln!(
                "episode {:>5}  return {:>10.3}  critic_loss {:.3e}",
                e.episode + 1,
                e.episode_return,
                e.critic_loss
            );
        }
    });
    match result {
        Ok(out) => {
            write_file(&cfg.model_path, &out.model.to_text())?;
            write_file(&cfg.curve_path, &curve_csv(&out.curve))?;
            eprintln!(
                "wrote {} and {}",
                cfg.model_path.display(),
                cfg.curve_path.display()
            );
            Ok(())
        }
        Err(Error::Divergence {
            episode,
            detail,
            checkpoint,
        }) => {
            if let Some(model) = &checkpoint {
                let mut path = cfg.model_path.clone().into_os_string();
                path.push(".checkpoint");
                let path = PathBuf::from(path);
                write_file(&path, &model.to_text())?;
                eprintln!("last good parameters written to {}", path.display());
            }
            Err(Error::Divergence {
                episode,
                detail,
                checkpoint,
            })
        }
        Err(e) => Err(e),
    }
}

fn load_model_if_needed(cfg: &RunConfig) -> Result<Option<ModelParams>> {
    let needs: Vec<Strategy> = cfg.strategies.iter().copied().filter(|s| s.needs_model()).collect();
    if needs.is_empty() {
        return Ok(None);
    }
    if !cfg.model_path.exists() {
        let names: Vec<&str> = needs.iter().map(|s| s.name()).collect();
        return Err(Error::Config(format!(
            "strategy {} needs a trained model, but {} does not exist",
            names.join("/"),
            cfg.model_path.display()
        )));
    }
    ModelParams::load(&cfg.model_path).map(Some)
}

pub fn evaluate(cfg: &RunConfig) -> Result<Report> {
    let model = load_model_if_needed(cfg)?;
    let profile = run_profile(cfg)?;
    compare_report(&cfg.cases, &cfg.strategies, &profile, model.as_ref(), &cfg.eval_config())
}

/// File name of the trajectory written for one case and strategy.
pub fn trajectory_file_name(case: &str, strategy: Strategy) -> String {
    format!("{case}_{}.csv", strategy.name().to_ascii_lowercase())
}

pub fn cmd_compare(cfg: &RunConfig) -> Result<Report> {
    let report = evaluate(cfg)?;
    write_file(&cfg.out_dir.join("report.csv"), &report.to_csv())?;
    for e in &report.entries {
        let path = cfg.out_dir.join(trajectory_file_name(&e.case.name, e.strategy));
        write_file(&path, &e.trajectory.to_csv())?;
    }
    Ok(report)
}

pub fn cmd_synth_profile(cfg: &RunConfig) -> Result<()> {
    let profile = run_profile(&RunConfig {
        profile: ProfileSource::Synthetic,
        ..cfg.clone()
    })?;
    write_file(&cfg.profile_out, &profile.to_csv())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(args) => cmd_train(&build_config(&args)?),
        Command::Eval(args) => {
            print!("{}", evaluate(&build_config(&args)?)?.to_csv());
            Ok(())
        }
        Command::Compare(args) => {
            let cfg = build_config(&args)?;
            let report = cmd_compare(&cfg)?;
            eprintln!(
                "wrote {} trajectories and report.csv to {}",
                report.entries.len(),
                cfg.out_dir.display()
            );
            Ok(())
        }
        Command::SynthProfile(args) => cmd_synth_profile(&build_config(&args)?),
        Command::DumpConfig(args) => {
            print!("{}", build_config(&args)?.to_text());
            Ok(())
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the exit
/// status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("hcfs: {e}");
            exit_code(&e)
        }
    }
}
