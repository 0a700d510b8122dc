//! Command-line harness: config files, figure-style commands, CSV output
//! and replayable run manifests.

pub mod commands;
pub mod config;
pub mod error;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use commands::{FitIvArgs, S21Args, SweepArgs};
use config::{Axis, RunConfig, Spacing, Stage};
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "cryoamp", version, about = "Cryogenic HBT readout simulator for Rydberg-state electrons on helium")]
pub struct Cli {
    /// Run configuration (INI; keys carry their units, e.g. v_teff_V)
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// RNG seed for noise synthesis (overrides [run] seed)
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Output directory (overrides [run] output_dir)
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit IV data (bundled synthetic data by default) and screen the device
    FitIv(FitIvCmd),
    /// DC operating point, dissipation and thermal margins
    Opp,
    /// Amplifier S21 magnitude on a log frequency grid
    S21(S21Cmd),
    /// Lock-in amplitude against V_BC or modulation frequency
    Sweep(SweepCmd),
}

#[derive(Debug, Args)]
pub struct FitIvCmd {
    /// Output characteristics CSV: i_b_A,v_ce_V,i_c_A[,direction]
    #[arg(long, value_name = "PATH")]
    pub output_csv: Option<PathBuf>,
    /// Input characteristics CSV: v_be_V,i_b_A
    #[arg(long, value_name = "PATH")]
    pub input_csv: Option<PathBuf>,
    /// Backward sweeps of the output family, for the hysteresis check
    #[arg(long, value_name = "PATH")]
    pub backward_csv: Option<PathBuf>,
    /// Output CSV holds a descending and an ascending run per label
    #[arg(long)]
    pub both: bool,
    /// Early-fit window start (V) [default: 0.5]
    #[arg(long, value_name = "V")]
    pub window_min_v: Option<f64>,
    /// Early-fit window end (V) [default: largest V_ce]
    #[arg(long, value_name = "V")]
    pub window_max_v: Option<f64>,
    /// NDR threshold on the smoothed slope dI_c/dV_ce (S)
    #[arg(long, value_name = "S", default_value_t = cryoamp::ivfit::DEFAULT_NDR_THRESHOLD)]
    pub ndr_threshold_s: f64,
    /// Hysteresis threshold, relative to the largest current (fraction)
    #[arg(long, value_name = "FRAC", default_value_t = cryoamp::ivfit::DEFAULT_HYSTERESIS_THRESHOLD)]
    pub hysteresis_threshold: f64,
    /// Collector current where beta is read (A)
    #[arg(long, value_name = "A", default_value_t = 1e-4)]
    pub near_ic_a: f64,
    /// Collector-emitter voltage where beta is read (V)
    #[arg(long, value_name = "V", default_value_t = 0.9)]
    pub near_vce_v: f64,
}

#[derive(Debug, Args)]
pub struct S21Cmd {
    /// Lowest frequency (Hz) [default: [s21] f_min_Hz]
    #[arg(long, value_name = "HZ")]
    pub f_min_hz: Option<f64>,
    /// Highest frequency (Hz) [default: [s21] f_max_Hz]
    #[arg(long, value_name = "HZ")]
    pub f_max_hz: Option<f64>,
    /// Number of log-spaced points [default: [s21] points]
    #[arg(long, value_name = "N")]
    pub points: Option<usize>,
    /// HBT stage alone or both stages [default: [s21] stage]
    #[arg(long, value_enum)]
    pub stage: Option<Stage>,
}

#[derive(Debug, Args)]
pub struct SweepCmd {
    /// Swept quantity: cell bias V_BC (V) or modulation frequency f_m (Hz)
    #[arg(long, value_enum)]
    pub axis: Option<Axis>,
    /// First grid value (V for vbc, Hz for fm)
    #[arg(long, value_name = "X")]
    pub start: Option<f64>,
    /// Last grid value (V for vbc, Hz for fm)
    #[arg(long, value_name = "X")]
    pub stop: Option<f64>,
    /// Number of grid points
    #[arg(long, value_name = "N")]
    pub points: Option<usize>,
    /// Grid spacing
    #[arg(long, value_enum)]
    pub spacing: Option<Spacing>,
    /// Also write one period of source and output per point (t_s,value)
    #[arg(long)]
    pub dump_waveforms: bool,
}

/// Load the config and apply global overrides.
pub fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.run.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.run.output_dir = o.clone();
    }
    if cfg.run.version != env!("CARGO_PKG_VERSION") {
        log::warn!("config written by version {}, running {}", cfg.run.version, env!("CARGO_PKG_VERSION"));
        cfg.run.version = env!("CARGO_PKG_VERSION").into();
    }
    Ok(cfg)
}

/// Execute a parsed command line; returns the exit status.
pub fn run(cli: &Cli) -> Result<i32, CliError> {
    let mut cfg = load_config(cli)?;
    let out = cfg.run.output_dir.clone();
    match &cli.command {
        Command::FitIv(c) => commands::fit_iv(
            &FitIvArgs {
                output_csv: c.output_csv.clone(),
                input_csv: c.input_csv.clone(),
                backward_csv: c.backward_csv.clone(),
                both: c.both,
                window_min_v: c.window_min_v,
                window_max_v: c.window_max_v,
                ndr_threshold_s: c.ndr_threshold_s,
                hysteresis_threshold: c.hysteresis_threshold,
                near_ic_a: c.near_ic_a,
                near_vce_v: c.near_vce_v,
            },
            &out,
        ),
        Command::Opp => commands::opp(&cfg, &out),
        Command::S21(c) => commands::s21(
            &cfg,
            &S21Args {
                f_min_hz: c.f_min_hz,
                f_max_hz: c.f_max_hz,
                points: c.points,
                stage: c.stage,
            },
            &out,
        ),
        Command::Sweep(c) => {
            commands::apply_sweep_args(
                &mut cfg,
                &SweepArgs {
                    axis: c.axis,
                    start: c.start,
                    stop: c.stop,
                    points: c.points,
                    spacing: c.spacing,
                    dump_waveforms: c.dump_waveforms,
                },
            );
            commands::sweep(&cfg, c.dump_waveforms, &out)
        }
    }
}
