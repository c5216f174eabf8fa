//! Experiment configuration: TOML file, command-line overrides, defaults.
//!
//! Resolution order is defaults < file < flags. Every key is validated
//! against the preconditions of the library call it feeds.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;
use spectral_control::model::{GateKind, MAX_QUBITS};
use spectral_control::optimize::{OptimizerConfig, DEFAULT_INIT_AMPLITUDE};
use spectral_control::spectral::SpectralBand;

use crate::error::{CliError, Result};
use crate::tables::fmt_f64;

pub const DEFAULT_DT: f64 = 0.2;
pub const DEFAULT_MU: f64 = 0.05;
pub const DEFAULT_RUNS: usize = 120;

/// Slice count used when none is given: 128 up to three qubits, 512 beyond.
pub fn default_slices(qubits: usize) -> usize {
    if qubits >= 4 {
        512
    } else {
        128
    }
}

/// Band half-width, either fixed or a quarter of the slice count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeltaSpec {
    Quarter,
    Fixed(usize),
}

impl DeltaSpec {
    pub fn resolve(self, n_slices: usize) -> usize {
        match self {
            DeltaSpec::Quarter => n_slices / 4,
            DeltaSpec::Fixed(d) => d,
        }
    }
}

impl FromStr for DeltaSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("n/4") {
            return Ok(DeltaSpec::Quarter);
        }
        s.parse()
            .map(DeltaSpec::Fixed)
            .map_err(|_| format!("expected a non-negative integer or \"n/4\", got \"{s}\""))
    }
}

impl fmt::Display for DeltaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeltaSpec::Quarter => f.write_str("n/4"),
            DeltaSpec::Fixed(d) => write!(f, "{d}"),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum RawDelta {
    Int(usize),
    Text(String),
}

/// Partially specified configuration, as read from a file or flags.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    pub qubits: Option<usize>,
    pub target: Option<String>,
    pub n_slices: Option<usize>,
    pub dt: Option<f64>,
    pub mu: Option<f64>,
    #[serde(default, deserialize_with = "deserialize_delta")]
    pub delta: Option<String>,
    pub n_runs: Option<usize>,
    pub seed: Option<u64>,
    pub oversample: Option<usize>,
    pub out: Option<PathBuf>,
    pub max_iterations: Option<usize>,
    pub grad_tolerance: Option<f64>,
    pub init_amplitude: Option<f64>,
}

fn deserialize_delta<'de, D>(d: D) -> std::result::Result<Option<String>, D::Error>
where
    D: serde::Deserializer<'de>,
{
    Ok(Option::<RawDelta>::deserialize(d)?.map(|raw| match raw {
        RawDelta::Int(v) => v.to_string(),
        RawDelta::Text(s) => s,
    }))
}

impl ConfigOverrides {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Validation(format!("config file: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
    }

    /// Values from `top` win over values in `self`.
    pub fn overlay(self, top: ConfigOverrides) -> ConfigOverrides {
        ConfigOverrides {
            qubits: top.qubits.or(self.qubits),
            target: top.target.or(self.target),
            n_slices: top.n_slices.or(self.n_slices),
            dt: top.dt.or(self.dt),
            mu: top.mu.or(self.mu),
            delta: top.delta.or(self.delta),
            n_runs: top.n_runs.or(self.n_runs),
            seed: top.seed.or(self.seed),
            oversample: top.oversample.or(self.oversample),
            out: top.out.or(self.out),
            max_iterations: top.max_iterations.or(self.max_iterations),
            grad_tolerance: top.grad_tolerance.or(self.grad_tolerance),
            init_amplitude: top.init_amplitude.or(self.init_amplitude),
        }
    }
}

/// Fully resolved, validated experiment settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub qubits: usize,
    pub target: GateKind,
    pub n_slices: usize,
    pub dt: f64,
    pub mu: f64,
    pub delta: DeltaSpec,
    pub n_runs: usize,
    pub seed: u64,
    pub oversample: usize,
    pub out: PathBuf,
    pub max_iterations: usize,
    pub grad_tolerance: f64,
    pub init_amplitude: f64,
}

fn reject(key: &str, value: impl fmt::Display, valid: &str) -> CliError {
    CliError::Validation(format!("invalid value for {key}: {value} (valid: {valid})"))
}

impl ExperimentConfig {
    pub fn resolve(o: ConfigOverrides) -> Result<Self> {
        let qubits = o.qubits.unwrap_or(3);
        if !(1..=MAX_QUBITS).contains(&qubits) {
            return Err(reject("qubits", qubits, &format!("qubits ∈ [1,{MAX_QUBITS}]")));
        }
        let target = match o.target.as_deref() {
            None => GateKind::Not,
            Some(t) => t
                .parse::<GateKind>()
                .map_err(|_| reject("target", t, "target ∈ {not, swap}"))?,
        };
        if target == GateKind::Swap && qubits < 2 {
            return Err(reject("qubits", qubits, "qubits ≥ 2 for target swap"));
        }
        let n_slices = o.n_slices.unwrap_or_else(|| default_slices(qubits));
        if n_slices < 2 || !n_slices.is_multiple_of(2) {
            return Err(reject("n_slices", n_slices, "an even integer ≥ 2"));
        }
        let dt = o.dt.unwrap_or(DEFAULT_DT);
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(reject("dt", dt, "dt > 0"));
        }
        let mu = o.mu.unwrap_or(DEFAULT_MU);
        if !(0.0..=1.0).contains(&mu) {
            return Err(reject("mu", mu, "mu ∈ [0,1]"));
        }
        let delta = match o.delta.as_deref() {
            None => DeltaSpec::Quarter,
            Some(text) => text
                .parse::<DeltaSpec>()
                .map_err(|e| reject("delta", text, &e))?,
        };
        if delta.resolve(n_slices) >= n_slices / 2 {
            return Err(reject(
                "delta",
                delta,
                &format!("delta ∈ [0,{}) for n_slices = {n_slices}", n_slices / 2),
            ));
        }
        let n_runs = o.n_runs.unwrap_or(DEFAULT_RUNS);
        if n_runs == 0 {
            return Err(reject("n_runs", n_runs, "n_runs ≥ 1"));
        }
        let oversample = o.oversample.unwrap_or(spectral_control::filter::DEFAULT_OVERSAMPLE);
        if oversample == 0 {
            return Err(reject("oversample", oversample, "oversample ≥ 1"));
        }
        let defaults = OptimizerConfig::default();
        let max_iterations = o.max_iterations.unwrap_or(defaults.max_iterations);
        if max_iterations == 0 {
            return Err(reject("max_iterations", max_iterations, "max_iterations ≥ 1"));
        }
        let grad_tolerance = o.grad_tolerance.unwrap_or(defaults.grad_tolerance);
        if !(grad_tolerance > 0.0 && grad_tolerance.is_finite()) {
            return Err(reject("grad_tolerance", grad_tolerance, "grad_tolerance > 0"));
        }
        let init_amplitude = o.init_amplitude.unwrap_or(DEFAULT_INIT_AMPLITUDE);
        if !(init_amplitude >= 0.0 && init_amplitude.is_finite()) {
            return Err(reject("init_amplitude", init_amplitude, "init_amplitude ≥ 0"));
        }
        Ok(Self {
            qubits,
            target,
            n_slices,
            dt,
            mu,
            delta,
            n_runs,
            seed: o.seed.unwrap_or(0),
            oversample,
            out: o.out.unwrap_or_else(|| PathBuf::from("out")),
            max_iterations,
            grad_tolerance,
            init_amplitude,
        })
    }

    pub fn band(&self) -> Result<SpectralBand> {
        Ok(SpectralBand::new(self.n_slices, self.delta.resolve(self.n_slices))?)
    }

    pub fn optimizer(&self) -> OptimizerConfig {
        OptimizerConfig {
            max_iterations: self.max_iterations,
            grad_tolerance: self.grad_tolerance,
            init_amplitude: self.init_amplitude,
            seed: self.seed,
            ..OptimizerConfig::default()
        }
    }

    /// `key = value` lines describing every resolved setting.
    pub fn echo(&self) -> Vec<(String, String)> {
        vec![
            ("qubits".into(), self.qubits.to_string()),
            ("target".into(), self.target.name().into()),
            ("n_slices".into(), self.n_slices.to_string()),
            ("dt".into(), fmt_f64(self.dt)),
            ("mu".into(), fmt_f64(self.mu)),
            ("delta".into(), self.delta.resolve(self.n_slices).to_string()),
            ("n_runs".into(), self.n_runs.to_string()),
            ("seed".into(), self.seed.to_string()),
            ("oversample".into(), self.oversample.to_string()),
            ("max_iterations".into(), self.max_iterations.to_string()),
            ("grad_tolerance".into(), fmt_f64(self.grad_tolerance)),
            ("init_amplitude".into(), fmt_f64(self.init_amplitude)),
        ]
    }
}

/// Reads the optional config file and applies the flag overrides on top.
pub fn parse_config(file: Option<&Path>, flags: ConfigOverrides) -> Result<ExperimentConfig> {
    let base = match file {
        Some(path) => ConfigOverrides::from_file(path)?,
        None => ConfigOverrides::default(),
    };
    ExperimentConfig::resolve(base.overlay(flags))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gives_defaults() {
        let c = ExperimentConfig::resolve(ConfigOverrides::default()).unwrap();
        assert_eq!(c.qubits, 3);
        assert_eq!(c.target, GateKind::Not);
        assert_eq!(c.n_slices, 128);
        assert_eq!(c.dt, 0.2);
        assert_eq!(c.mu, 0.05);
        assert_eq!(c.delta, DeltaSpec::Quarter);
        assert_eq!(c.band().unwrap().delta(), 32);
        assert_eq!(c.n_runs, 120);
        assert_eq!(c.oversample, 16);
        assert_eq!(c.max_iterations, 2000);
    }

    #[test]
    fn four_qubits_default_to_512_slices() {
        let c = ExperimentConfig::resolve(ConfigOverrides {
            qubits: Some(4),
            ..Default::default()
        })
        .unwrap();
        assert_eq!(c.n_slices, 512);
        assert_eq!(c.band().unwrap().delta(), 128);
    }

    #[test]
    fn mu_out_of_range_names_the_range() {
        let err = ExperimentConfig::resolve(ConfigOverrides {
            mu: Some(1.5),
            ..Default::default()
        })
        .unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("mu ∈ [0,1]"), "{err}");
        assert!(err.to_string().contains("1.5"));
    }

    #[test]
    fn flags_override_file() {
        let file = ConfigOverrides::from_toml("n_runs = 120\nmu = 1.0\ndelta = \"n/4\"").unwrap();
        let flags = ConfigOverrides {
            n_runs: Some(5),
            ..Default::default()
        };
        let c = ExperimentConfig::resolve(file.overlay(flags)).unwrap();
        assert_eq!(c.n_runs, 5);
        assert_eq!(c.mu, 1.0);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ConfigOverrides::from_toml("n_runz = 3").is_err());
    }

    #[test]
    fn delta_forms() {
        let file = ConfigOverrides::from_toml("delta = 10\nn_slices = 64").unwrap();
        let c = ExperimentConfig::resolve(file).unwrap();
        assert_eq!(c.delta, DeltaSpec::Fixed(10));
        assert_eq!("N/4".parse::<DeltaSpec>().unwrap(), DeltaSpec::Quarter);
        assert!("n/3".parse::<DeltaSpec>().is_err());
        let too_wide = ConfigOverrides {
            delta: Some("64".into()),
            ..Default::default()
        };
        assert!(ExperimentConfig::resolve(too_wide).is_err());
    }

    #[test]
    fn other_validation_errors() {
        let cases = [
            ConfigOverrides { qubits: Some(0), ..Default::default() },
            ConfigOverrides { target: Some("cnot".into()), ..Default::default() },
            ConfigOverrides { qubits: Some(1), target: Some("swap".into()), ..Default::default() },
            ConfigOverrides { n_slices: Some(7), ..Default::default() },
            ConfigOverrides { dt: Some(-0.2), ..Default::default() },
            ConfigOverrides { n_runs: Some(0), ..Default::default() },
            ConfigOverrides { oversample: Some(0), ..Default::default() },
            ConfigOverrides { grad_tolerance: Some(0.0), ..Default::default() },
            ConfigOverrides { init_amplitude: Some(f64::NAN), ..Default::default() },
        ];
        for case in cases {
            let err = ExperimentConfig::resolve(case.clone()).unwrap_err();
            assert!(matches!(err, CliError::Validation(_)), "{case:?}");
        }
    }
}
