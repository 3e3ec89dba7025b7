//! `spectral-pi`: spectral-abscissa PI tuning from the command line.
//!
//! Every subcommand prints a short summary to stdout and, with `--out`,
//! writes its data as CSV or as a JSON envelope
//! `{"version": 1, "config": {...}, "result": {...}}`.
//!
//! Exit codes: 0 success, 1 invalid flags or I/O, 2 infeasible or empty
//! result, 3 numerical failure.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use spectral_pi::{Error, PlantParams};

#[derive(Debug, Parser)]
#[command(
    name = "spectral-pi",
    version,
    about = "PI tuning for integrating-plus-dead-time plants"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Plant gain K.
    #[arg(long, default_value_t = 1.0, global = true, allow_negative_numbers = true)]
    pub gain: f64,
    /// Plant dead time L.
    #[arg(long, default_value_t = 1.0, global = true, allow_negative_numbers = true)]
    pub delay: f64,
    /// Delay segments M of the semi-discrete model.
    #[arg(long, default_value_t = spectral_pi::DEFAULT_SEGMENTS, global = true)]
    pub segments: usize,
    /// Output file for the command's data.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv, global = true)]
    pub format: Format,
    /// Seed for differential evolution.
    #[arg(long, default_value_t = 42, global = true)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct DeArgs {
    #[arg(long, default_value_t = 30)]
    pub population: usize,
    #[arg(long, default_value_t = 200)]
    pub generations: usize,
    /// Differential weight F.
    #[arg(long = "weight-f", default_value_t = 0.7)]
    pub weight_f: f64,
    /// Crossover probability CR.
    #[arg(long = "crossover-cr", default_value_t = 0.9)]
    pub crossover_cr: f64,
    /// Normalized K_P search interval.
    #[arg(long = "bounds-kp", default_value = "0.01,1.5", value_parser = parse_range)]
    pub bounds_kp: (f64, f64),
    /// Normalized K_I search interval.
    #[arg(long = "bounds-ki", default_value = "0.001,0.6", value_parser = parse_range)]
    pub bounds_ki: (f64, f64),
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    #[arg(long = "kp-range", value_parser = parse_range)]
    pub kp_range: Option<(f64, f64)>,
    #[arg(long = "ki-range", value_parser = parse_range)]
    pub ki_range: Option<(f64, f64)>,
    /// Points per axis.
    #[arg(long)]
    pub resolution: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScenarioArg {
    Tracking,
    Disturbance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OrderArg {
    First,
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IndexArg {
    Iae,
    Itae,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    SemiDiscrete,
    FirstOrder,
    Pade2,
    Pade3,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Minimize the spectral abscissa over (K_P, K_I).
    Tune {
        #[command(flatten)]
        de: DeArgs,
    },
    /// Optimal K_I and its abscissa for each K_P in a range.
    Sweep {
        #[arg(long = "kp-range", default_value = "0.2,0.9", value_parser = parse_range)]
        kp_range: (f64, f64),
        #[arg(long, default_value_t = 20)]
        points: usize,
    },
    /// Spectral abscissa and dominant-root type over a gain grid.
    Grid {
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Time response of the semi-discrete closed loop.
    Simulate {
        #[arg(long, allow_negative_numbers = true)]
        kp: f64,
        #[arg(long, allow_negative_numbers = true)]
        ki: f64,
        #[arg(long, value_enum, default_value_t = ScenarioArg::Tracking)]
        scenario: ScenarioArg,
        /// Input disturbance step for the disturbance scenario.
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        disturbance: f64,
        /// Simulated time; defaults to 40 L.
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long, value_enum, default_value_t = OrderArg::Second)]
        order: OrderArg,
    },
    /// Gain and phase margins of one gain pair.
    Margins {
        #[arg(long, allow_negative_numbers = true)]
        kp: f64,
        #[arg(long, allow_negative_numbers = true)]
        ki: f64,
    },
    /// Phase and gain margins over a gain grid.
    MarginGrid {
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Stability boundary in the gain plane from Δ(jω) = 0.
    Boundary {
        #[arg(long, default_value_t = 200)]
        points: usize,
    },
    /// Classical tuning rules next to the spectral optimum.
    Baselines {
        /// Also tune the IAE and ITAE criteria at --alpha.
        #[arg(long)]
        indices: bool,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[command(flatten)]
        de: DeArgs,
    },
    /// Integral-index optimal gains along a list of weights α.
    PerfOpt {
        #[arg(long, value_enum, default_value_t = IndexArg::Iae)]
        index: IndexArg,
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1"
        )]
        alpha: Vec<f64>,
        /// Segments of the simulation model.
        #[arg(long = "index-segments", default_value_t = 50)]
        index_segments: usize,
        /// Simulated time; defaults to 50 L.
        #[arg(long)]
        horizon: Option<f64>,
        #[command(flatten)]
        de: DeArgs,
    },
    /// Dominant-pole error of approximate models against the refined poles.
    ModelError {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(
            long,
            value_enum,
            value_delimiter = ',',
            default_value = "semi-discrete,first-order,pade2,pade3"
        )]
        methods: Vec<MethodArg>,
    },
    /// Continuous, semi-discrete and Padé poles of one gain pair.
    PadeCompare {
        #[arg(long, allow_negative_numbers = true)]
        kp: f64,
        #[arg(long, allow_negative_numbers = true)]
        ki: f64,
    },
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected LO,HI, got {s:?}"))?;
    let lo: f64 = a.trim().parse().map_err(|e| format!("{a:?}: {e}"))?;
    let hi: f64 = b.trim().parse().map_err(|e| format!("{b:?}: {e}"))?;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(format!("range must satisfy LO < HI, got {s:?}"));
    }
    Ok((lo, hi))
}

/// Failure of one command, with its process exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Infeasible(String),
    Numerical(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Infeasible(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Infeasible(m) | Failure::Numerical(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NoStabilizingGains | Error::MissingCrossover(_) => Failure::Infeasible(e.to_string()),
            e if e.is_numerical() => Failure::Numerical(e.to_string()),
            e => Failure::Usage(e.to_string()),
        }
    }
}

fn validate(global: &GlobalArgs) -> Result<PlantParams, Failure> {
    if global.segments < 2 {
        return Err(Failure::Usage(format!(
            "--segments must be >= 2, got {}",
            global.segments
        )));
    }
    PlantParams::new(global.gain, global.delay).map_err(|e| Failure::Usage(e.to_string()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = validate(&cli.global).and_then(|plant| commands::run(&cli.global, plant, &cli.command));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
