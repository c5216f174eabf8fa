use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use spectral_control::spectral::{power_gradient, SpectralBand};
use spectral_control_cli::commands::{cmd_filter, cmd_run, dump_path, CutoffSource, RESULTS_FILE};
use spectral_control_cli::config::{ConfigOverrides, ExperimentConfig};
use spectral_control_cli::selftest::{run_checks, verdict};
use spectral_control_cli::tables::RESULTS_COLUMNS;

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spectral-control"))
}

fn small_config(out: &Path, n_runs: usize, seed: u64) -> ExperimentConfig {
    ExperimentConfig::resolve(ConfigOverrides {
        qubits: Some(2),
        target: Some("swap".into()),
        n_slices: Some(16),
        mu: Some(0.5),
        n_runs: Some(n_runs),
        seed: Some(seed),
        oversample: Some(4),
        max_iterations: Some(200),
        out: Some(out.to_path_buf()),
        ..Default::default()
    })
    .unwrap()
}

/// `(seed, F_pre)` for every row of a results table.
fn results_rows(text: &str) -> Vec<(u64, f64)> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    assert_eq!(lines.next(), Some(RESULTS_COLUMNS));
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            assert_eq!(f.len(), 8, "{l}");
            (f[0].parse().unwrap(), f[3].parse().unwrap())
        })
        .collect()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn dumps_round_trip_through_filter() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path(), 3, 40);
    cmd_run(&config, false).unwrap();
    let rows = results_rows(&fs::read_to_string(dir.path().join(RESULTS_FILE)).unwrap());
    assert_eq!(rows.iter().map(|r| r.0).collect::<Vec<_>>(), vec![40, 41, 42]);
    for (seed, f_pre) in rows {
        let report = cmd_filter(&dump_path(dir.path(), seed), CutoffSource::FromDump, 4).unwrap();
        assert!((report.f_pre - f_pre).abs() < 1e-10, "seed {seed}: {} vs {f_pre}", report.f_pre);
    }
    for name in ["summary.csv", "histogram.csv"] {
        let text = fs::read_to_string(dir.path().join(name)).unwrap();
        assert!(text.starts_with("# qubits = 2\n"), "{name}");
    }
}

#[test]
fn fixed_seed_gives_identical_results_table() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let status = binary()
            .args(["run", "--qubits", "2", "--target", "not", "--slices", "16", "--runs", "1"])
            .args(["--seed", "9", "--max-iterations", "100", "--quiet", "--out"])
            .arg(dir.path())
            .status()
            .unwrap();
        assert!(status.success());
    }
    let read = |d: &tempfile::TempDir| fs::read(d.path().join(RESULTS_FILE)).unwrap();
    assert_eq!(read(&a), read(&b));
    let dump = |d: &tempfile::TempDir| fs::read(dump_path(d.path(), 9)).unwrap();
    assert_eq!(dump(&a), dump(&b));
}

#[test]
fn zero_pulse_dump_is_unchanged_by_filter() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("zero.csv");
    let mut text = String::from("# qubits = 3\n# target = not\n# dt = 0.2\nindex,t_start,hx,hy\n");
    for i in 0..8 {
        text.push_str(&format!("{i},{},0,0\n", i as f64 * 0.2));
    }
    fs::write(&path, text).unwrap();
    let report = cmd_filter(&path, CutoffSource::FromDump, 4).unwrap();
    // equal up to rounding; the filtered evolution uses 4x more sub-slices
    assert!((report.f_pre - report.f_post).abs() < 1e-12);
    let samples: Vec<&str> = report.table.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(samples.len(), 32);
    for row in samples {
        let f: Vec<f64> = row.split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(&f[1..], &[0.0, 0.0, 0.0, 0.0]);
    }
}

#[test]
fn flag_overrides_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.toml");
    fs::write(
        &config,
        "qubits = 1\nn_slices = 8\nn_runs = 120\nmax_iterations = 5\ndelta = \"n/4\"\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let result = binary()
        .args(["run", "--quiet", "--n-runs=5", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(result.status.success(), "{}", stderr(&result));
    assert!(stderr(&result).contains("n_runs = 5"));
    let rows = results_rows(&fs::read_to_string(out.join(RESULTS_FILE)).unwrap());
    assert_eq!(rows.len(), 5);
}

#[test]
fn invalid_values_exit_with_validation_code() {
    let out = binary().args(["run", "--mu", "1.5"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("mu ∈ [0,1]"), "{}", stderr(&out));

    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    fs::write(&config, "n_runz = 3\n").unwrap();
    let out = binary().arg("run").arg("--config").arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("n_runz"), "{}", stderr(&out));

    assert_eq!(binary().arg("frobnicate").output().unwrap().status.code(), Some(1));
}

#[test]
fn unwritable_output_fails_before_computing() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "not a directory").unwrap();
    let start = std::time::Instant::now();
    // default settings would take minutes to compute
    let out = binary().arg("run").arg("--out").arg(blocker.join("out")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(start.elapsed().as_secs() < 10);
}

#[test]
fn malformed_dump_reports_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    fs::write(&path, "# qubits = 1\n# target = not\n# dt = 0.2\nindex,t_start,hx,hy\n0,0,1,1\n1,0.2,x,1\n").unwrap();
    let out = binary().arg("filter").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("line 6"), "{}", stderr(&out));
}

#[test]
fn filter_writes_table_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path(), 1, 3);
    cmd_run(&config, false).unwrap();
    let table = dir.path().join("filtered").join("seed_3.csv");
    let out = binary()
        .arg("filter")
        .arg(dump_path(dir.path(), 3))
        .args(["--delta", "2", "--oversample", "2", "--out"])
        .arg(&table)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(table).unwrap();
    assert!(text.contains("# F_post = "));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1 + 32);
}

#[test]
fn selftest_passes_and_catches_sign_error() {
    let out = binary().arg("selftest").output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));

    let flipped = |h: &[f64], band: SpectralBand| {
        power_gradient(h, band).map(|g| g.into_iter().map(|v| -v).collect())
    };
    let checks = run_checks(&flipped);
    let err = verdict(&checks).unwrap_err();
    assert_eq!(err.exit_code(), 3);
    assert!(err.to_string().contains("power gradient vs finite differences"), "{err}");
}
