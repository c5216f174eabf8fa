use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use spectral_control_cli::commands::{cmd_filter, cmd_run, emit_filter_report, CutoffSource};
use spectral_control_cli::config::{parse_config, ConfigOverrides, DeltaSpec};
use spectral_control_cli::selftest::{default_checks, verdict};
use spectral_control_cli::{CliError, Result};

#[derive(Parser)]
#[command(name = "spectral-control", version, about = "Spectrally constrained pulse synthesis for Heisenberg spin chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize an ensemble of seeded runs and write result tables.
    Run(RunArgs),
    /// Low-pass filter a control dump and recompute its fidelity.
    Filter(FilterArgs),
    /// Check gradients, transforms and special functions against oracles.
    Selftest,
}

#[derive(Args)]
struct RunArgs {
    /// TOML file with any of the settings below; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    qubits: Option<usize>,
    /// Target gate: not or swap.
    #[arg(long)]
    target: Option<String>,
    /// Number of time slices n.
    #[arg(long)]
    slices: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    /// Fidelity weight in G = (1−mu)P − mu·F.
    #[arg(long, allow_negative_numbers = true)]
    mu: Option<f64>,
    /// Band half-width: an integer or "n/4".
    #[arg(long)]
    delta: Option<String>,
    #[arg(long, visible_alias = "n-runs")]
    runs: Option<usize>,
    /// Seed of the first run; run j uses seed + j.
    #[arg(long)]
    seed: Option<u64>,
    /// Sub-slices per slice when evolving filtered controls.
    #[arg(long)]
    oversample: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    grad_tolerance: Option<f64>,
    /// Half-width of the uniform initial control distribution.
    #[arg(long)]
    init_amplitude: Option<f64>,
    /// Suppress per-run progress on stderr.
    #[arg(long)]
    quiet: bool,
}

impl RunArgs {
    fn overrides(&self) -> ConfigOverrides {
        ConfigOverrides {
            qubits: self.qubits,
            target: self.target.clone(),
            n_slices: self.slices,
            dt: self.dt,
            mu: self.mu,
            delta: self.delta.clone(),
            n_runs: self.runs,
            seed: self.seed,
            oversample: self.oversample,
            out: self.out.clone(),
            max_iterations: self.max_iterations,
            grad_tolerance: self.grad_tolerance,
            init_amplitude: self.init_amplitude,
        }
    }
}

#[derive(Args)]
struct FilterArgs {
    /// Control dump written by `run`.
    dump: PathBuf,
    /// Cutoff angular frequency.
    #[arg(long, conflicts_with = "delta")]
    omega0: Option<f64>,
    /// Band half-width defining the cutoff; defaults to the dump's.
    #[arg(long)]
    delta: Option<String>,
    #[arg(long, default_value_t = spectral_control::filter::DEFAULT_OVERSAMPLE)]
    oversample: usize,
    /// Output file for the filtered samples; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => {
            let config = parse_config(args.config.as_deref(), args.overrides())?;
            for (k, v) in config.echo() {
                eprintln!("{k} = {v}");
            }
            let summary = cmd_run(&config, !args.quiet)?;
            println!("runs = {}", summary.runs);
            println!("mean_F_post = {:.6}", summary.mean);
            println!("median_F_post = {:.6}", summary.median);
            println!("fraction_above_0.96 = {:.4}", summary.fraction_above);
            println!("output = {}", config.out.display());
            Ok(())
        }
        Command::Filter(args) => {
            let cutoff = match (args.omega0, args.delta.as_deref()) {
                (Some(w), _) => CutoffSource::Omega0(w),
                (None, Some(d)) => CutoffSource::Delta(d.parse::<DeltaSpec>().map_err(|e| {
                    CliError::Validation(format!("invalid value for delta: {d} ({e})"))
                })?),
                (None, None) => CutoffSource::FromDump,
            };
            let report = cmd_filter(&args.dump, cutoff, args.oversample)?;
            emit_filter_report(&report, args.out.as_deref())?;
            eprintln!("omega0 = {}", report.omega0);
            eprintln!("F_pre = {:.16e}", report.f_pre);
            eprintln!("F_post = {:.16e}", report.f_post);
            Ok(())
        }
        Command::Selftest => {
            let checks = default_checks();
            for c in &checks {
                println!("{c}");
            }
            verdict(&checks)
        }
    }
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
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
