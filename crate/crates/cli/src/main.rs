//! Command-line driver for the solar-harvest modeling pipeline.
//!
//! Subcommands: `fit` (data -> per-month model files), `generate` (model ->
//! synthetic trace CSV), `validate` (model vs data: KS, ACF, summary
//! tables), `sweep` (panel-size or site sweeps), `fixture` (emit the
//! bundled synthetic dataset).
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 model or validation error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    App(solar_harvest::Error),
}

impl From<solar_harvest::Error> for CliError {
    fn from(e: solar_harvest::Error) -> Self {
        CliError::App(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::App(e) if e.is_data_error() => 2,
            CliError::App(_) => 3,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Usage(m) => m.clone(),
            CliError::App(e) => e.to_string(),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "solar-harvest",
    version,
    about = "Fit semi-Markov solar energy-harvest models from hourly irradiance data"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Fit one semi-Markov model per selected month and write model files.
    Fit {
        /// Run-configuration TOML.
        #[arg(long)]
        config: PathBuf,
        /// Hourly irradiance CSV (date,hour,ghi_wm2,temp_c).
        #[arg(long)]
        data: PathBuf,
        /// Months to fit: "all" or e.g. "1,7,12". Default: all present.
        #[arg(long)]
        months: Option<String>,
        /// Clustering scheme override: night-day or slot.
        #[arg(long)]
        scheme: Option<String>,
        /// Number of slots for the slot scheme.
        #[arg(long)]
        slots: Option<usize>,
        /// Random seed (recorded; fitting itself is deterministic).
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for model files.
        #[arg(long)]
        out: PathBuf,
        /// Also write the per-month harvested series CSVs.
        #[arg(long)]
        emit_harvest: bool,
        /// Also write the per-month visit tables.
        #[arg(long)]
        emit_visits: bool,
    },
    /// Generate a synthetic trace from a fitted model.
    Generate {
        /// Model file written by `fit`.
        #[arg(long)]
        model: PathBuf,
        /// Trace length in hours.
        #[arg(long)]
        horizon_h: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory (writes trace.csv).
        #[arg(long)]
        out: PathBuf,
    },
    /// Validate a fitted model against data: KS tests, ACF comparison and
    /// summary statistics.
    Validate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// ACF lag horizon in hours.
        #[arg(long, default_value_t = 72)]
        max_lag_h: usize,
        /// Output directory for report files.
        #[arg(long)]
        out: PathBuf,
    },
    /// Summary-statistics sweep over module sizes or sites (night-day
    /// clustering, day state), one CSV row per configuration and month.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Data CSV for a `--sizes` sweep.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Module sizes like "2x2,4x4,6x6".
        #[arg(long)]
        sizes: Option<String>,
        /// Sites TOML for a location sweep (each entry names its own data).
        #[arg(long)]
        sites: Option<PathBuf>,
        #[arg(long)]
        months: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Emit the bundled clear-sky-plus-noise synthetic dataset.
    Fixture {
        /// Run-configuration TOML (only [site] is used).
        #[arg(long)]
        config: PathBuf,
        /// First day, YYYY-MM-DD.
        #[arg(long)]
        start: String,
        #[arg(long)]
        days: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Day-to-day multiplicative dimming in [0, 1).
        #[arg(long, default_value_t = 0.3)]
        noise: f64,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    let result = match cli.cmd {
        Cmd::Fit {
            config,
            data,
            months,
            scheme,
            slots,
            seed,
            out,
            emit_harvest,
            emit_visits,
        } => commands::fit(
            &config,
            &data,
            months.as_deref(),
            scheme.as_deref(),
            slots,
            seed,
            &out,
            emit_harvest,
            emit_visits,
        ),
        Cmd::Generate {
            model,
            horizon_h,
            seed,
            out,
        } => commands::generate(&model, horizon_h, seed, &out),
        Cmd::Validate {
            model,
            data,
            seed,
            max_lag_h,
            out,
        } => commands::validate(&model, &data, seed, max_lag_h, &out),
        Cmd::Sweep {
            config,
            data,
            sizes,
            sites,
            months,
            out,
        } => commands::sweep(
            &config,
            data.as_deref(),
            sizes.as_deref(),
            sites.as_deref(),
            months.as_deref(),
            &out,
        ),
        Cmd::Fixture {
            config,
            start,
            days,
            seed,
            noise,
            out,
        } => commands::fixture(&config, &start, days, seed, noise, &out),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
