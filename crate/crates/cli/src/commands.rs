//! The `run` and `filter` subcommands.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use spectral_control::dynamics::{gate_fidelity, total_propagator};
use spectral_control::filter::{filtered_fidelity, filtered_sequence, FilterSpec};
use spectral_control::model::{SpinChainSystem, TargetGate};
use spectral_control::optimize::{run_experiment, RunResult};
use spectral_control::spectral::{ObjectiveSpec, SpectralBand};

use crate::config::{DeltaSpec, ExperimentConfig};
use crate::error::{CliError, Result};
use crate::tables::{
    control_dump, fmt_f64, histogram_table, parse_control_dump, results_table, summarize,
    summary_table, Summary, FILTERED_COLUMNS,
};

pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const HISTOGRAM_FILE: &str = "histogram.csv";
pub const CONTROLS_DIR: &str = "controls";

pub fn objective_spec(config: &ExperimentConfig) -> Result<ObjectiveSpec> {
    let system = SpinChainSystem::with_unit_coupling(config.qubits)?;
    let target = TargetGate::build(config.target, config.qubits)?;
    Ok(ObjectiveSpec::new(config.mu, config.band()?, system, target, config.dt)?)
}

pub fn filter_spec(config: &ExperimentConfig) -> Result<FilterSpec> {
    Ok(FilterSpec::from_band(config.band()?, config.dt, config.oversample)?)
}

/// Runs the configured ensemble without touching the filesystem.
pub fn run_ensemble(
    config: &ExperimentConfig,
    on_done: impl Fn(&RunResult) + Sync,
) -> Result<Vec<RunResult>> {
    let spec = objective_spec(config)?;
    let filter = filter_spec(config)?;
    Ok(run_experiment(&spec, &config.optimizer(), filter, config.n_runs, on_done)?)
}

pub fn dump_path(out: &Path, seed: u64) -> PathBuf {
    out.join(CONTROLS_DIR).join(format!("seed_{seed}.csv"))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

/// Creates the output tree and proves it is writable.
fn prepare_output(out: &Path) -> Result<()> {
    let controls = out.join(CONTROLS_DIR);
    fs::create_dir_all(&controls).map_err(|e| CliError::io(&controls, e))?;
    let probe = out.join(".write-probe");
    fs::File::create(&probe)
        .and_then(|mut f| f.write_all(b"ok"))
        .map_err(|e| CliError::io(&probe, e))?;
    fs::remove_file(&probe).map_err(|e| CliError::io(&probe, e))
}

fn dump_provenance(config: &ExperimentConfig, seed: u64) -> Vec<(String, String)> {
    vec![
        ("qubits".into(), config.qubits.to_string()),
        ("target".into(), config.target.name().into()),
        ("dt".into(), fmt_f64(config.dt)),
        ("n_slices".into(), config.n_slices.to_string()),
        ("delta".into(), config.delta.resolve(config.n_slices).to_string()),
        ("mu".into(), fmt_f64(config.mu)),
        ("seed".into(), seed.to_string()),
    ]
}

/// Runs the ensemble and writes results, summary, histogram and one control
/// dump per run under `config.out`.
pub fn cmd_run(config: &ExperimentConfig, progress: bool) -> Result<Summary> {
    prepare_output(&config.out)?;
    let total = config.n_runs;
    let done = AtomicUsize::new(0);
    let runs = run_ensemble(config, |r| {
        let k = done.fetch_add(1, Ordering::Relaxed) + 1;
        if progress {
            eprintln!(
                "[{k}/{total}] seed {} {} after {} iterations: F_pre = {:.6}, F_post = {:.6}",
                r.seed, r.status, r.iterations, r.pre_filter_fidelity, r.post_filter_fidelity
            );
        }
    })?;

    let echo = config.echo();
    write_file(&config.out.join(RESULTS_FILE), &results_table(&echo, &runs))?;
    let summary = summarize(&runs);
    write_file(&config.out.join(SUMMARY_FILE), &summary_table(&echo, &summary))?;
    let post: Vec<f64> = runs.iter().map(|r| r.post_filter_fidelity).collect();
    write_file(&config.out.join(HISTOGRAM_FILE), &histogram_table(&echo, &post))?;
    for r in &runs {
        let text = control_dump(&dump_provenance(config, r.seed), &r.controls);
        write_file(&dump_path(&config.out, r.seed), &text)?;
    }
    Ok(summary)
}

/// Where the filter cutoff comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CutoffSource {
    Omega0(f64),
    Delta(DeltaSpec),
    /// The band recorded in the dump, or `n/4` if there is none.
    FromDump,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterReport {
    pub omega0: f64,
    pub f_pre: f64,
    pub f_post: f64,
    /// Provenance, header and dense samples.
    pub table: String,
}

/// Filters the pulses in a control dump and recomputes both fidelities.
pub fn cmd_filter(dump_file: &Path, cutoff: CutoffSource, oversample: usize) -> Result<FilterReport> {
    let text = fs::read_to_string(dump_file).map_err(|e| CliError::io(dump_file, e))?;
    let dump = parse_control_dump(&text)
        .map_err(|e| CliError::Validation(format!("{}: {e}", dump_file.display())))?;
    let controls = &dump.controls;
    let n = controls.len();
    let band = |delta: usize| -> Result<SpectralBand> {
        if !n.is_multiple_of(2) {
            return Err(CliError::Validation(format!(
                "dump has {n} slices; a band needs an even count, pass --omega0 instead"
            )));
        }
        Ok(SpectralBand::new(n, delta)?)
    };
    let omega0 = match cutoff {
        CutoffSource::Omega0(w) => w,
        CutoffSource::Delta(d) => {
            spectral_control::filter::cutoff_from_band(band(d.resolve(n))?, controls.dt())?
        }
        CutoffSource::FromDump => {
            let delta = dump.delta().unwrap_or(n / 4);
            spectral_control::filter::cutoff_from_band(band(delta)?, controls.dt())?
        }
    };
    let filter = FilterSpec::new(omega0, oversample)?;
    let system = SpinChainSystem::with_unit_coupling(dump.qubits)?;
    let target = TargetGate::build(dump.target, dump.qubits)?;
    let f_pre = gate_fidelity(&target, &total_propagator(&system, controls)?)?;
    let f_post = filtered_fidelity(&system, controls, &target, filter)?;
    let smooth = filtered_sequence(controls, filter)?;

    let mut table = String::new();
    for (k, v) in &dump.provenance {
        table.push_str(&format!("# {k} = {v}\n"));
    }
    table.push_str(&format!("# omega0 = {}\n", fmt_f64(omega0)));
    table.push_str(&format!("# oversample = {oversample}\n"));
    table.push_str(&format!("# F_pre = {}\n", fmt_f64(f_pre)));
    table.push_str(&format!("# F_post = {}\n", fmt_f64(f_post)));
    table.push_str(FILTERED_COLUMNS);
    table.push('\n');
    for (s, (fx, fy)) in smooth.hx().iter().zip(smooth.hy()).enumerate() {
        let t = (s as f64 + 0.5) * smooth.dt();
        let slice = s / oversample;
        table.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_f64(t),
            fmt_f64(controls.hx()[slice]),
            fmt_f64(controls.hy()[slice]),
            fmt_f64(*fx),
            fmt_f64(*fy),
        ));
    }
    Ok(FilterReport {
        omega0,
        f_pre,
        f_post,
        table,
    })
}

/// Writes the filter table to `out`, or to stdout when `out` is `None`.
pub fn emit_filter_report(report: &FilterReport, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
            }
            write_file(path, &report.table)
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(report.table.as_bytes())
                .map_err(|e| CliError::Runtime(format!("stdout: {e}")))
        }
    }
}
