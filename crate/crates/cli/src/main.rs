//! `backret`: timing, linearity budgets, electrode design and simulations
//! for backward retrieval in field-controlled optical memories.
//!
//! Every subcommand prints a short report and writes its tables (CSV) and
//! a JSON summary into the output directory, which defaults to
//! `$BACKRET_OUT` or `./backret-out`.

mod commands;
mod units;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use backret_core::reproduce::DEFAULT_SEED;
use units::{Frequency, Length, Time, Voltage};

#[derive(Parser, Debug)]
#[command(name = "backret", version, about = "Backward retrieval in field-controlled optical quantum memories")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Directory receiving CSV tables and the JSON summary.
    #[arg(long, global = true, env = "BACKRET_OUT", default_value = "backret-out")]
    pub out: PathBuf,
    /// JSON registry of extra material presets.
    #[arg(long, global = true)]
    pub registry: Option<PathBuf>,
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Reversal time, subradiance times and switching tolerance.
    Timing(TimingArgs),
    /// Allowed field nonlinearity for a target efficiency.
    Bound(BoundArgs),
    /// Solve an electrode array and report the linearity of its shift profile.
    Field(FieldArgs),
    /// Optimize electrode potentials for a linear core profile.
    Optimize(OptimizeArgs),
    /// Phased-array emission of the stored ensemble.
    Ensemble(EnsembleArgs),
    /// Storage and retrieval with propagation through the medium.
    Propagate(PropagateArgs),
    /// Recompute every headline number and print a claim-by-claim table.
    ReproducePaper,
}

#[derive(Args, Debug)]
pub struct TimingArgs {
    #[arg(long, default_value = "pr-yso")]
    pub preset: String,
    /// Sample length along the storage axis.
    #[arg(long)]
    pub lx: Length,
    /// Edge shift Δν. Alternatively give the control field with --field.
    #[arg(long, required_unless_present = "field")]
    pub delta_nu: Option<Frequency>,
    /// Peak control field, e.g. `1e4V/cm` or `70G`.
    #[arg(long, conflicts_with = "delta_nu")]
    pub field: Option<String>,
    /// Highest subradiance order listed.
    #[arg(long, default_value_t = 4)]
    pub m_max: usize,
}

#[derive(Args, Debug)]
pub struct BoundArgs {
    /// Target efficiency; omit for the quarter-cycle rule.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Sample length in vacuum wavelengths (L/λ).
    #[arg(long, conflicts_with_all = ["preset", "lx"])]
    pub lx_over_lambda: Option<f64>,
    #[arg(long, default_value_t = 1.0, requires = "lx_over_lambda")]
    pub n: f64,
    #[arg(long, requires = "lx")]
    pub preset: Option<String>,
    #[arg(long, requires = "preset")]
    pub lx: Option<Length>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyKind {
    Quadrupole,
    Eight,
    Twelve,
}

#[derive(Args, Debug)]
pub struct FamilyArgs {
    /// Electrode family; ignored when --layout is given.
    #[arg(long, value_enum, default_value = "eight")]
    pub family: FamilyKind,
    /// Region-A length (half the array period).
    #[arg(long, default_value = "80.8um")]
    pub lx: Length,
    /// Slab thickness; defaults to 0.75 Lx (1.0 Lx for the quadrupole).
    #[arg(long)]
    pub ly: Option<Length>,
    /// Electrode side; defaults to 0.05 Lx.
    #[arg(long)]
    pub d: Option<Length>,
    /// Potentials outward from the centre, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub u: Vec<Voltage>,
}

#[derive(Args, Debug)]
pub struct FieldArgs {
    #[command(flatten)]
    pub family: FamilyArgs,
    /// Layout JSON (micrometre units) instead of a family.
    #[arg(long)]
    pub layout: Option<PathBuf>,
    #[arg(long, default_value = "pr-yso")]
    pub preset: String,
    /// Grid cells per period.
    #[arg(long, default_value_t = 256)]
    pub cells: usize,
    /// Core half-width as a fraction of Ly; 0 samples the axis only.
    #[arg(long, default_value_t = 0.1)]
    pub core: f64,
    /// Also write the full field map.
    #[arg(long)]
    pub map: bool,
}

#[derive(Args, Debug)]
pub struct OptimizeArgs {
    #[arg(long, value_enum, default_value = "eight")]
    pub family: FamilyKind,
    #[arg(long, default_value_t = 8)]
    pub restarts: usize,
    #[arg(long, default_value_t = 400)]
    pub max_evals: usize,
    #[arg(long, default_value_t = 256)]
    pub cells: usize,
    #[arg(long, default_value_t = 512)]
    pub verify_cells: usize,
    /// Core half-width as a fraction of Ly.
    #[arg(long, default_value_t = 0.1)]
    pub core: f64,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlacementKind {
    Equispaced,
    Uniform,
}

#[derive(Args, Debug)]
pub struct EnsembleArgs {
    /// `ideal-linear` or a CSV file with columns x_m,shift_hz.
    #[arg(long, default_value = "ideal-linear")]
    pub profile: String,
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    #[arg(long, default_value = "pr-yso")]
    pub preset: String,
    #[arg(long, default_value = "1mm")]
    pub lx: Length,
    #[arg(long, default_value = "1.11GHz")]
    pub delta_nu: Frequency,
    #[arg(long, value_enum, default_value = "equispaced")]
    pub placement: PlacementKind,
    /// Apply T2 decay with this coherence time.
    #[arg(long)]
    pub t2: Option<Time>,
    /// Use the preset's T2.
    #[arg(long, conflicts_with = "t2")]
    pub preset_t2: bool,
    #[arg(long, default_value_t = 101)]
    pub samples: usize,
    #[arg(long, default_value_t = 4)]
    pub m_max: usize,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeKind {
    Forward,
    Backward,
    Ramp,
}

#[derive(Args, Debug)]
pub struct PropagateArgs {
    /// Optical depth αL.
    #[arg(long, default_value_t = 2.0)]
    pub od: f64,
    #[arg(long, value_enum, default_value = "backward")]
    pub mode: ModeKind,
    /// Hold time of the gradient ramp (ramp mode).
    #[arg(long, default_value = "0s")]
    pub ramp_time: Time,
    /// Sweep these optical depths instead of a single run.
    #[arg(long, value_delimiter = ',')]
    pub sweep: Vec<f64>,
    #[arg(long)]
    pub nx: Option<usize>,
    #[arg(long)]
    pub nt: Option<usize>,
    /// Full configuration as JSON; overrides the other flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { commands::EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::execute(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
