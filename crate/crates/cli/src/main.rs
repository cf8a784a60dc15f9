//! `gexp`: sublinear expectations, path simulation and theorem checks.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::RunConfig;

/// Exit statuses.
pub const EXIT_FAILURES: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "gexp", version, about = "Sublinear expectations of G-Brownian functionals")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

/// Overrides applied on top of the config file, which overrides the defaults.
#[derive(Args, Debug, Default)]
struct Global {
    /// Flat `key = value` config file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Lower variance rate; the upper one defaults to 1.
    #[arg(long = "sigma0-sq", global = true, value_name = "X")]
    sigma0_sq: Option<f64>,
    #[arg(long = "n-steps", global = true, value_name = "N")]
    n_steps: Option<usize>,
    #[arg(long = "n-paths", global = true, value_name = "N")]
    n_paths: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// PDE grid nodes.
    #[arg(long, global = true, value_name = "N")]
    nx: Option<usize>,
    /// PDE half-width in units of `sqrt(sigma_upper_sq * t)`.
    #[arg(long = "x-span", global = true, value_name = "X")]
    x_span: Option<f64>,
    #[arg(long = "cfl-safety", global = true, value_name = "X")]
    cfl_safety: Option<f64>,
    /// Significant digits of printed values.
    #[arg(long, global = true, value_name = "N")]
    precision: Option<usize>,
    /// Any config key, e.g. `--set tol_dp=1e-9`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sublinear expectation of a payoff.
    Expect(ExpectArgs),
    /// Conditional expectation on the nodes of one lattice level, as CSV.
    Conditional(ConditionalArgs),
    /// Sample paths under a named or worst-case volatility policy, as CSV.
    Simulate(SimulateArgs),
    /// Run theorem checks and write a JSON report.
    Verify(VerifyArgs),
    /// Render a saved JSON report.
    Report(ReportArgs),
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendChoice {
    Pde,
    Lattice,
    Both,
}

#[derive(Args, Debug)]
pub struct Functional {
    /// Payoff in `x1, x2, ...`.
    #[arg(long, allow_hyphen_values = true)]
    phi: String,
    /// Single evaluation time (defaults to the horizon).
    #[arg(long, conflicts_with = "times")]
    t: Option<f64>,
    /// Comma-separated observation times.
    #[arg(long, value_delimiter = ',')]
    times: Vec<f64>,
    /// Variables are levels `B_{t_j}` instead of increments.
    #[arg(long)]
    levels: bool,
    /// Admit `exp` in payoffs.
    #[arg(long)]
    allow_exp: bool,
}

#[derive(Args, Debug)]
pub struct ExpectArgs {
    #[command(flatten)]
    f: Functional,
    /// Defaults to `both` for a single time and `lattice` otherwise.
    #[arg(long, value_enum)]
    backend: Option<BackendChoice>,
    /// Also write the PDE solution `(x, u)` to `<out>/expect_pde.csv`.
    #[arg(long)]
    save: bool,
}

#[derive(Args, Debug)]
pub struct ConditionalArgs {
    #[command(flatten)]
    f: Functional,
    /// Lattice level index, or `mid`.
    #[arg(long)]
    j: String,
    /// Write to `<out>/conditional.csv` instead of stdout.
    #[arg(long)]
    save: bool,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// const-min, const-max, switch-up, switch-down, alternate, mid or `worst:<payoff>`.
    #[arg(long, allow_hyphen_values = true)]
    policy: String,
    /// Write to `<out>/paths.csv` (and `<out>/policy.csv` for worst-case policies) instead of stdout.
    #[arg(long)]
    save: bool,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Comma-separated check ids (default: all).
    #[arg(long, value_delimiter = ',')]
    only: Vec<String>,
    /// Process replacing the built-in ones, e.g. `2B`, `int:x1`.
    #[arg(long)]
    m: Option<String>,
    /// Integrand replacing the built-in ones, e.g. `2`, `abs(x1)+1`.
    #[arg(long, allow_hyphen_values = true)]
    f: Option<String>,
    /// Lower bound on |f| for the representation check.
    #[arg(long = "f-lower", default_value_t = 0.5)]
    f_lower: f64,
    /// The custom process or integrand is expected to fail.
    #[arg(long)]
    negative: bool,
    /// Record wall-clock times in the report.
    #[arg(long)]
    timings: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    Json,
    Summary,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Report file (default `<out>/report.json`).
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "table")]
    format: ReportFormat,
}

fn resolve(global: &Global) -> anyhow::Result<RunConfig> {
    let mut cfg = match &global.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    for kv in &global.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| anyhow::anyhow!("--set expects KEY=VALUE, got `{kv}`"))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(v) = global.seed {
        cfg.seed = v;
    }
    if let Some(v) = global.sigma0_sq {
        cfg.params.sigma_lower_sq = v;
    }
    if let Some(v) = global.n_steps {
        cfg.n_steps = v;
    }
    if let Some(v) = global.n_paths {
        cfg.n_paths = v;
    }
    if let Some(v) = &global.out {
        cfg.out = v.clone();
    }
    if let Some(v) = global.nx {
        cfg.nx = v;
    }
    if let Some(v) = global.x_span {
        cfg.x_span = v;
    }
    if let Some(v) = global.cfl_safety {
        cfg.cfl_safety = v;
    }
    if let Some(v) = global.precision {
        cfg.precision = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use gexp_core::Error as E;
    match err.chain().find_map(|e| e.downcast_ref::<E>()) {
        Some(
            E::Cfl { .. }
            | E::NonFinite { .. }
            | E::StateSpaceBlowup { .. }
            | E::DivisionByZero(_)
            | E::Dominance { .. }
            | E::IntegrandBound { .. }
            | E::Negative(_)
            | E::NotIncreasing(_)
            | E::LengthMismatch(_)
            | E::DegenerateLowerVolatility,
        ) => EXIT_NUMERIC,
        _ => EXIT_USAGE,
    }
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    let cfg = resolve(&cli.global)?;
    match cli.command {
        Command::Expect(a) => commands::expect(&cfg, &a),
        Command::Conditional(a) => commands::conditional(&cfg, &a),
        Command::Simulate(a) => commands::simulate(&cfg, &a),
        Command::Verify(a) => commands::verify(&cfg, &a),
        Command::Report(a) => commands::report(&cfg, &a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
