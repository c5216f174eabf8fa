//! Plain-text table formats.
//!
//! Every file starts with `# key = value` provenance lines, followed by one
//! comma-separated header row and the data rows. Floats are written with 17
//! significant digits so they read back bit-exact.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use spectral_control::dynamics::ControlSequence;
use spectral_control::model::GateKind;
use spectral_control::optimize::RunResult;

use crate::error::{CliError, Result};

pub const RESULTS_COLUMNS: &str = "seed,iterations,status,F_pre,F_post,P_x,P_y,final_G";
pub const DUMP_COLUMNS: &str = "index,t_start,hx,hy";
pub const HISTOGRAM_COLUMNS: &str = "bin_left,bin_right,count";
pub const FILTERED_COLUMNS: &str = "t,hx_step,hy_step,hx_filtered,hy_filtered";

pub const HISTOGRAM_BINS: usize = 20;
pub const FIDELITY_THRESHOLD: f64 = 0.96;

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn provenance(out: &mut String, pairs: &[(String, String)]) {
    for (k, v) in pairs {
        let _ = writeln!(out, "# {k} = {v}");
    }
}

pub fn results_table(provenance_pairs: &[(String, String)], runs: &[RunResult]) -> String {
    let mut out = String::new();
    provenance(&mut out, provenance_pairs);
    out.push_str(RESULTS_COLUMNS);
    out.push('\n');
    for r in runs {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.seed,
            r.iterations,
            r.status.label(),
            fmt_f64(r.pre_filter_fidelity),
            fmt_f64(r.post_filter_fidelity),
            fmt_f64(r.power_x),
            fmt_f64(r.power_y),
            fmt_f64(r.final_g),
        );
    }
    out
}

pub fn control_dump(provenance_pairs: &[(String, String)], controls: &ControlSequence) -> String {
    let mut out = String::new();
    provenance(&mut out, provenance_pairs);
    out.push_str(DUMP_COLUMNS);
    out.push('\n');
    for (i, (hx, hy)) in controls.hx().iter().zip(controls.hy()).enumerate() {
        let t = i as f64 * controls.dt();
        let _ = writeln!(out, "{i},{},{},{}", fmt_f64(t), fmt_f64(*hx), fmt_f64(*hy));
    }
    out
}

/// Summary statistics of the post-filter fidelities.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub runs: usize,
    pub mean: f64,
    pub median: f64,
    pub fraction_above: f64,
    pub pre_mean: f64,
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len().is_multiple_of(2) {
        0.5 * (v[m - 1] + v[m])
    } else {
        v[m]
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn fraction_above(values: &[f64], threshold: f64) -> f64 {
    values.iter().filter(|v| **v > threshold).count() as f64 / values.len() as f64
}

pub fn summarize(runs: &[RunResult]) -> Summary {
    let post: Vec<f64> = runs.iter().map(|r| r.post_filter_fidelity).collect();
    let pre: Vec<f64> = runs.iter().map(|r| r.pre_filter_fidelity).collect();
    Summary {
        runs: runs.len(),
        mean: mean(&post),
        median: median(&post),
        fraction_above: fraction_above(&post, FIDELITY_THRESHOLD),
        pre_mean: mean(&pre),
    }
}

pub fn summary_table(provenance_pairs: &[(String, String)], s: &Summary) -> String {
    let mut out = String::new();
    provenance(&mut out, provenance_pairs);
    out.push_str("statistic,value\n");
    let _ = writeln!(out, "runs,{}", s.runs);
    let _ = writeln!(out, "mean_F_post,{}", fmt_f64(s.mean));
    let _ = writeln!(out, "median_F_post,{}", fmt_f64(s.median));
    let _ = writeln!(out, "fraction_above_0.96,{}", fmt_f64(s.fraction_above));
    let _ = writeln!(out, "mean_F_pre,{}", fmt_f64(s.pre_mean));
    out
}

/// Counts in `bins` equal bins over `[0, 1]`; the last bin is closed.
pub fn histogram(values: &[f64], bins: usize) -> Vec<(f64, f64, usize)> {
    let mut counts = vec![0usize; bins];
    for &v in values {
        if (0.0..=1.0).contains(&v) {
            let b = ((v * bins as f64) as usize).min(bins - 1);
            counts[b] += 1;
        }
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(b, c)| (b as f64 / bins as f64, (b + 1) as f64 / bins as f64, c))
        .collect()
}

pub fn histogram_table(provenance_pairs: &[(String, String)], values: &[f64]) -> String {
    let mut out = String::new();
    provenance(&mut out, provenance_pairs);
    out.push_str(HISTOGRAM_COLUMNS);
    out.push('\n');
    for (l, r, c) in histogram(values, HISTOGRAM_BINS) {
        let _ = writeln!(out, "{},{},{c}", fmt_f64(l), fmt_f64(r));
    }
    out
}

/// Control pulses read back from a dump, with the settings needed to
/// re-evaluate them.
#[derive(Debug, Clone)]
pub struct ControlDump {
    pub provenance: BTreeMap<String, String>,
    pub qubits: usize,
    pub target: GateKind,
    pub controls: ControlSequence,
}

impl ControlDump {
    /// `delta` recorded in the dump, if any.
    pub fn delta(&self) -> Option<usize> {
        self.provenance.get("delta").and_then(|d| d.parse().ok())
    }
}

fn parse_error(line: usize, msg: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("line {line}: {msg}"))
}

pub fn parse_control_dump(text: &str) -> Result<ControlDump> {
    let mut provenance = BTreeMap::new();
    let mut header_seen = false;
    let mut hx = Vec::new();
    let mut hy = Vec::new();
    let mut starts = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.split_once('=') {
                provenance.insert(k.trim().to_string(), v.trim().to_string());
            }
            continue;
        }
        if !header_seen {
            if line.replace(' ', "") != DUMP_COLUMNS {
                return Err(parse_error(line_no, format!("expected header \"{DUMP_COLUMNS}\", got \"{line}\"")));
            }
            header_seen = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(parse_error(line_no, format!("expected 4 fields, got {}", fields.len())));
        }
        let index: usize = fields[0]
            .parse()
            .map_err(|_| parse_error(line_no, format!("bad index \"{}\"", fields[0])))?;
        if index != hx.len() {
            return Err(parse_error(line_no, format!("expected index {}, got {index}", hx.len())));
        }
        let num = |s: &str, name: &str| -> Result<f64> {
            let v: f64 = s
                .parse()
                .map_err(|_| parse_error(line_no, format!("bad {name} \"{s}\"")))?;
            if !v.is_finite() {
                return Err(parse_error(line_no, format!("{name} is not finite")));
            }
            Ok(v)
        };
        starts.push(num(fields[1], "t_start")?);
        hx.push(num(fields[2], "hx")?);
        hy.push(num(fields[3], "hy")?);
    }
    if !header_seen {
        return Err(parse_error(text.lines().count().max(1), "missing column header"));
    }
    if hx.is_empty() {
        return Err(parse_error(text.lines().count().max(1), "no control rows"));
    }
    let dt = match provenance.get("dt") {
        Some(v) => v
            .parse::<f64>()
            .map_err(|_| CliError::Validation(format!("provenance dt \"{v}\" is not a number")))?,
        None if starts.len() > 1 => starts[1] - starts[0],
        None => return Err(CliError::Validation("dump has no dt and a single row".into())),
    };
    let qubits = match provenance.get("qubits") {
        Some(v) => v
            .parse()
            .map_err(|_| CliError::Validation(format!("provenance qubits \"{v}\" is not an integer")))?,
        None => return Err(CliError::Validation("dump provenance lacks qubits".into())),
    };
    let target = match provenance.get("target") {
        Some(v) => v.parse().map_err(|e: spectral_control::Error| CliError::Validation(e.to_string()))?,
        None => return Err(CliError::Validation("dump provenance lacks target".into())),
    };
    let controls = ControlSequence::new(dt, hx, hy)?;
    Ok(ControlDump {
        provenance,
        qubits,
        target,
        controls,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs() -> Vec<(String, String)> {
        vec![
            ("qubits".into(), "3".into()),
            ("target".into(), "not".into()),
            ("dt".into(), "0.2".into()),
            ("delta".into(), "2".into()),
        ]
    }

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 1e300, 0.0, std::f64::consts::PI] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn dump_round_trip() {
        let c = ControlSequence::new(0.2, vec![0.1, -1.0 / 3.0, 2.0, 0.0], vec![1e-7, 5.5, -0.25, 1.0]).unwrap();
        let text = control_dump(&pairs(), &c);
        let dump = parse_control_dump(&text).unwrap();
        assert_eq!(dump.controls, c);
        assert_eq!(dump.qubits, 3);
        assert_eq!(dump.target, GateKind::Not);
        assert_eq!(dump.delta(), Some(2));
    }

    #[test]
    fn malformed_dump_reports_line() {
        let c = ControlSequence::new(0.2, vec![0.1, 0.2], vec![0.3, 0.4]).unwrap();
        let mut lines: Vec<String> = control_dump(&pairs(), &c).lines().map(String::from).collect();
        // four provenance lines, header, then rows on lines 6 and 7
        lines[6] = "1,0.2,abc,0.4".into();
        let err = parse_control_dump(&lines.join("\n")).unwrap_err().to_string();
        assert!(err.starts_with("line 7:"), "{err}");
        assert!(err.contains("bad hx"), "{err}");
        let err = parse_control_dump("# qubits = 1\nfoo,bar\n").unwrap_err().to_string();
        assert!(err.starts_with("line 2:"), "{err}");
        let err = parse_control_dump("# qubits = 1\nindex,t_start,hx,hy\n0,0,1\n").unwrap_err().to_string();
        assert!(err.starts_with("line 3:"), "{err}");
        let err = parse_control_dump("# qubits = 1\nindex,t_start,hx,hy\n1,0,1,1\n").unwrap_err().to_string();
        assert!(err.starts_with("line 3:"), "{err}");
    }

    #[test]
    fn histogram_bins() {
        let h = histogram(&[0.0, 0.04, 0.05, 0.97, 1.0, 0.999], 20);
        assert_eq!(h.len(), 20);
        assert_eq!(h[0], (0.0, 0.05, 2));
        assert_eq!(h[1].2, 1);
        assert_eq!(h[19].2, 3);
        assert_eq!(h.iter().map(|b| b.2).sum::<usize>(), 6);
    }

    #[test]
    fn statistics() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(fraction_above(&[0.95, 0.96, 0.97, 0.99], 0.96), 0.5);
        assert_eq!(mean(&[1.0, 2.0]), 1.5);
    }
}
