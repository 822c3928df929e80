mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Arg, ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand};

use crate::config::{keys_in, RunConfig, Source};
use crate::error::{exit, CliError};
use crate::output::{Format, Manifest, Sink};

const AFTER_HELP: &str = "\
Settings are layered: built-in defaults, then --config FILE (TOML tables named
after the key prefix), then environment variables WANDERODE_<SECTION>__<KEY>
(for example WANDERODE_MODEL__K=60), then flags. Unknown keys are rejected.

Exit codes:
  0  success
  2  usage or configuration error
  3  file or table I/O error
  4  invalid model parameters
  5  integration failure
  6  random walk failure
  7  spectral analysis failure
  8  canard measurement failure";

#[derive(Debug, Parser)]
#[command(name = "wanderode", version, about = "Slow-fast E/I conductance oscillator toolkit", after_help = AFTER_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
struct Common {
    /// TOML file with settings.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Write the table here, with a manifest at <FILE>.manifest.json.
    #[arg(short, long, value_name = "FILE")]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Clone, Args)]
struct TEnd {
    /// Shorthand for --integrate.t_end.
    #[arg(long, value_name = "MS")]
    t_end: Option<f64>,
}

#[derive(Debug, Clone, Args)]
struct Walk {
    /// Shorthand for --walk.seed.
    #[arg(long)]
    seed: Option<i64>,
    /// Shorthand for --walk.runs.
    #[arg(long)]
    runs: Option<i64>,
}

#[derive(Debug, Clone, Args)]
struct SignalSource {
    /// Trajectory CSV (t_ms,u,v,...) to analyse; `-` reads stdin.
    #[arg(long, value_name = "FILE", conflicts_with = "inline")]
    input: Option<PathBuf>,
    /// Run a stochastic simulation instead of reading a trajectory.
    #[arg(long)]
    inline: bool,
    /// Peak search band in Hz, shorthand for --spectral.band_lo/band_hi.
    #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
    band: Option<Vec<f64>>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// The four equilibria with their eigenvalues.
    FixedPoints {
        #[command(flatten)]
        common: Common,
    },
    /// Deterministic trajectory.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        t_end: TEnd,
    },
    /// Limit-cycle period from section crossings.
    Period {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        t_end: TEnd,
    },
    /// Hopf value of εγ as a function of K.
    Hopf {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        k_min: Option<f64>,
        #[arg(long)]
        k_max: Option<f64>,
        #[arg(long)]
        samples: Option<i64>,
    },
    /// Attractor kind, period and extrema over an (ε, K) grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        t_end: TEnd,
    },
    /// Trajectory with randomly wandering K, ε and γ.
    Stochastic {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        t_end: TEnd,
        #[command(flatten)]
        walk: Walk,
        /// Also write the conductance table (t_ms,u_bar,e_current_3p5,v).
        #[arg(long, value_name = "FILE")]
        conductance: Option<PathBuf>,
    },
    /// Window-averaged power spectrum and its peak.
    Psd {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        source: SignalSource,
        #[command(flatten)]
        t_end: TEnd,
        #[command(flatten)]
        walk: Walk,
    },
    /// Power per window and frequency.
    Spectrogram {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        source: SignalSource,
        #[command(flatten)]
        t_end: TEnd,
        #[command(flatten)]
        walk: Walk,
    },
    /// Exit ordinate near the fold against its small-ε limit.
    Canard {
        #[command(flatten)]
        common: Common,
    },
}

/// Setting sections each subcommand accepts as `--section.key` flags.
const SECTIONS: &[(&str, &[&str])] = &[
    ("fixed-points", &["model"]),
    ("simulate", &["model", "integrate"]),
    ("period", &["model", "integrate", "period"]),
    ("hopf", &["model", "hopf"]),
    ("sweep", &["model", "integrate", "period", "sweep"]),
    ("stochastic", &["model", "integrate", "walk"]),
    ("psd", &["model", "integrate", "walk", "spectral"]),
    ("spectrogram", &["model", "integrate", "walk", "spectral"]),
    ("canard", &["model", "canard"]),
];

fn sections_of(name: &str) -> &'static [&'static str] {
    SECTIONS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, s)| *s)
        .unwrap_or(&[])
}

fn command() -> clap::Command {
    let mut cmd = Cli::command();
    for (name, sections) in SECTIONS {
        cmd = cmd.mut_subcommand(*name, |mut sub| {
            for k in keys_in(sections) {
                let help = match k.default {
                    Some(d) => format!("{} [default: {d}]", k.help),
                    None => k.help.to_string(),
                };
                sub = sub.arg(
                    Arg::new(k.key)
                        .long(k.key)
                        .value_name("VALUE")
                        .allow_negative_numbers(true)
                        .help(help)
                        .help_heading("Settings"),
                );
            }
            sub
        });
    }
    cmd
}

/// Defaults, file, environment, then dotted flags and shorthands.
fn layered(common: &Common, sub: &ArgMatches, sections: &[&str]) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::defaults();
    if let Some(path) = &common.config {
        cfg.merge_file(path)?;
    }
    cfg.merge_env(std::env::vars())?;
    for k in keys_in(sections) {
        if let Some(raw) = sub.get_one::<String>(k.key) {
            cfg.set_raw(k.key, raw, Source::Flag)?;
        }
    }
    Ok(cfg)
}

fn set_flag<T: ToString>(cfg: &mut RunConfig, key: &str, v: Option<T>) -> Result<(), CliError> {
    match v {
        Some(v) => cfg.set_raw(key, &v.to_string(), Source::Flag),
        None => Ok(()),
    }
}

fn apply_walk(cfg: &mut RunConfig, w: &Walk) -> Result<(), CliError> {
    set_flag(cfg, "walk.seed", w.seed)?;
    set_flag(cfg, "walk.runs", w.runs)
}

fn apply_source(cfg: &mut RunConfig, s: &SignalSource) -> Result<(), CliError> {
    if let Some(b) = &s.band {
        set_flag(cfg, "spectral.band_lo", Some(b[0]))?;
        set_flag(cfg, "spectral.band_hi", Some(b[1]))?;
    }
    Ok(())
}

fn run(matches: &ArgMatches) -> Result<(), CliError> {
    let cli = Cli::from_arg_matches(matches).map_err(|e| CliError::Usage(e.to_string()))?;
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let sections = sections_of(name);
    let manifest = Manifest::start();

    let (common, default_format) = match &cli.command {
        Command::FixedPoints { common }
        | Command::Period { common, .. }
        | Command::Hopf { common, .. }
        | Command::Sweep { common, .. }
        | Command::Psd { common, .. }
        | Command::Canard { common } => (common, Format::Table),
        Command::Simulate { common, .. }
        | Command::Stochastic { common, .. }
        | Command::Spectrogram { common, .. } => (common, Format::Csv),
    };
    let mut cfg = layered(common, sub, sections)?;
    let sink = Sink {
        output: common.output.clone(),
        format: common.format.unwrap_or(default_format),
    };

    let report = match &cli.command {
        Command::FixedPoints { .. } => commands::fixed_points(&cfg, &sink)?,
        Command::Simulate { t_end, .. } => {
            set_flag(&mut cfg, "integrate.t_end", t_end.t_end)?;
            commands::simulate(&cfg, &sink)?
        }
        Command::Period { t_end, .. } => {
            set_flag(&mut cfg, "integrate.t_end", t_end.t_end)?;
            commands::period(&cfg, &sink)?
        }
        Command::Hopf {
            k_min,
            k_max,
            samples,
            ..
        } => {
            set_flag(&mut cfg, "hopf.K_min", *k_min)?;
            set_flag(&mut cfg, "hopf.K_max", *k_max)?;
            set_flag(&mut cfg, "hopf.samples", *samples)?;
            commands::hopf(&cfg, &sink)?
        }
        Command::Sweep { t_end, .. } => {
            set_flag(&mut cfg, "integrate.t_end", t_end.t_end)?;
            commands::sweep(&cfg, &sink)?
        }
        Command::Stochastic {
            t_end,
            walk,
            conductance,
            ..
        } => {
            set_flag(&mut cfg, "integrate.t_end", t_end.t_end)?;
            apply_walk(&mut cfg, walk)?;
            commands::stochastic(&cfg, &sink, conductance.as_deref())?
        }
        Command::Psd {
            source,
            t_end,
            walk,
            ..
        } => {
            set_flag(&mut cfg, "integrate.t_end", t_end.t_end)?;
            apply_walk(&mut cfg, walk)?;
            apply_source(&mut cfg, source)?;
            let input = commands::Input::choose(source.input.as_deref(), source.inline);
            commands::psd(&cfg, &sink, input)?
        }
        Command::Spectrogram {
            source,
            t_end,
            walk,
            ..
        } => {
            set_flag(&mut cfg, "integrate.t_end", t_end.t_end)?;
            apply_walk(&mut cfg, walk)?;
            apply_source(&mut cfg, source)?;
            let input = commands::Input::choose(source.input.as_deref(), source.inline);
            commands::spectrogram(&cfg, &sink, input)?
        }
        Command::Canard { .. } => commands::canard(&cfg, &sink)?,
    };

    if let Some(out) = &sink.output {
        let mut outputs = vec![out.clone()];
        outputs.extend(report.extra_outputs.iter().cloned());
        manifest.write(
            out,
            name,
            report.seed,
            serde_json::to_value(cfg.echo(sections)).expect("config serialises"),
            &outputs,
            report.summary,
        )?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let matches = command().get_matches();
    match run(&matches) {
        Ok(()) => ExitCode::from(exit::OK as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
