//! Trajectory, step-trace and summary files.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use hmm_emt::hmm::SimulationResult;
use hmm_emt::model::SystemModel;
use hmm_emt::reference::{ErrorReport, SpeedupReport};

use crate::CliError;

/// `value` in scientific notation with 17 significant digits.
pub fn fmt_f64(value: f64) -> String {
    format!("{value:.16e}")
}

const PHASES: [&str; 3] = ["a", "b", "c"];

/// Parses "branch 7-8 phase A current" into `(7, 8, phase index)`.
fn parse_branch_alias(item: &str) -> Option<(u32, u32, usize)> {
    let lower = item.to_ascii_lowercase();
    let words: Vec<&str> = lower.split_whitespace().collect();
    match words.as_slice() {
        ["branch", buses, "phase", phase, rest @ ..] if rest.is_empty() || rest == ["current"] => {
            let (a, b) = buses.split_once('-')?;
            let p = PHASES.iter().position(|q| q == phase)?;
            Some((a.parse().ok()?, b.parse().ok()?, p))
        }
        _ => None,
    }
}

/// Column indices for a trajectory selection.
///
/// Each item is an exact state name, a prefix ending in `*`, or a branch
/// alias of the form "branch 7-8 phase A current".  `None` selects every
/// state; an empty list selects none.
pub fn resolve_selection(model: &SystemModel, items: Option<&[String]>) -> Result<Vec<usize>, CliError> {
    let layout = model.layout();
    let Some(items) = items else {
        return Ok((0..layout.len()).collect());
    };
    let mut out = Vec::new();
    for raw in items {
        let item = raw.trim();
        if item.is_empty() {
            continue;
        }
        if let Some(i) = layout.index_of(item) {
            out.push(i);
        } else if let Some(prefix) = item.strip_suffix('*') {
            let before = out.len();
            out.extend((0..layout.len()).filter(|&i| layout.name(i).starts_with(prefix)));
            if out.len() == before {
                return Err(CliError::Usage(format!("selection '{item}' matches no state")));
            }
        } else if let Some((a, b, p)) = parse_branch_alias(item) {
            let edge = model
                .branch_between(a, b)
                .ok_or_else(|| CliError::Usage(format!("no line between buses {a} and {b}")))?;
            out.push(layout.w_index(edge, p));
        } else {
            return Err(CliError::Usage(format!("unknown state '{item}'")));
        }
    }
    Ok(out)
}

/// Writes `path` through a temporary sibling so readers never see a
/// partial file.
fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

fn csv_bytes(header: &[String], rows: impl Iterator<Item = Vec<String>>) -> io::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| e.into_error())
}

/// One row per sample: time, resolution tag, then the selected states in
/// the given order.
pub fn write_trajectory_csv(result: &SimulationResult, columns: &[usize], path: &Path) -> io::Result<()> {
    let mut header = vec!["time".to_string(), "resolution".to_string()];
    header.extend(columns.iter().map(|&i| result.state_names[i].clone()));
    let rows = result.samples.iter().map(|s| {
        let mut r = Vec::with_capacity(columns.len() + 2);
        r.push(fmt_f64(s.time));
        r.push(s.resolution.tag().to_string());
        r.extend(columns.iter().map(|&i| fmt_f64(s.state[i])));
        r
    });
    write_atomic(path, &csv_bytes(&header, rows)?)
}

/// Variable-mode controller trace, one row per accepted macro step.
pub fn write_step_trace_csv(result: &SimulationResult, path: &Path) -> io::Result<()> {
    let header: Vec<String> = ["time", "mh", "r", "e", "rho", "mh_next", "worst_state", "rejections"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows = result.macro_steps.iter().map(|m| {
        vec![
            fmt_f64(m.time),
            fmt_f64(m.mh),
            fmt_f64(m.r),
            fmt_f64(m.e),
            fmt_f64(m.rho),
            fmt_f64(m.mh_next),
            result.state_names.get(m.worst).cloned().unwrap_or_default(),
            m.rejections.to_string(),
        ]
    });
    write_atomic(path, &csv_bytes(&header, rows)?)
}

/// Error metrics as `metric,value` rows, followed by per-window maxima.
pub fn write_error_report(report: &ErrorReport, path: &Path, windows_path: &Path) -> io::Result<()> {
    let header = vec!["metric".to_string(), "value".to_string()];
    let mut rows = vec![
        vec!["integral_error".into(), fmt_f64(report.integral_error)],
        vec!["max_normalized_error".into(), fmt_f64(report.max_normalized_error)],
        vec!["max_abs_deviation".into(), fmt_f64(report.max_abs_deviation)],
        vec!["compared_samples".into(), report.compared_samples.to_string()],
        vec!["candidate_seconds".into(), fmt_f64(report.candidate_seconds)],
        vec!["reference_seconds".into(), fmt_f64(report.reference_seconds)],
        vec!["speedup".into(), fmt_f64(report.speedup)],
    ];
    for (family, e) in &report.family_errors {
        rows.push(vec![format!("integral_error.{family}"), fmt_f64(*e)]);
    }
    write_atomic(path, &csv_bytes(&header, rows.into_iter())?)?;
    let header = vec!["window_start".to_string(), "max_deviation".to_string()];
    let rows = report.window_max.iter().map(|(t, d)| vec![fmt_f64(*t), fmt_f64(*d)]);
    write_atomic(windows_path, &csv_bytes(&header, rows)?)
}

/// Sweep rows with the measured and predicted speedups.
pub fn write_speedup_csv(report: &SpeedupReport, path: &Path) -> io::Result<()> {
    let header: Vec<String> = ["configuration", "predicted", "seconds", "speedup"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows = report.rows.iter().map(|r| {
        vec![
            r.label.clone(),
            fmt_f64(r.predicted),
            fmt_f64(r.seconds),
            fmt_f64(r.speedup),
        ]
    });
    write_atomic(path, &csv_bytes(&header, rows)?)
}

/// One configuration in a summary table.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub label: String,
    pub execution_seconds: f64,
    pub avg_macro_step: Option<f64>,
    pub integral_error: Option<f64>,
    pub speedup: Option<f64>,
}

/// Column headings of the summary table.
pub const SUMMARY_COLUMNS: [&str; 5] = [
    "Configuration",
    "Execution Time(s)",
    "Avg. Macro Step-size",
    "Integral Error",
    "Speedup",
];

/// Summary table as aligned text and as CSV.  Missing values are blank.
pub fn emit_summary(rows: &[SummaryRow]) -> (String, String) {
    let cells: Vec<[String; 5]> = rows
        .iter()
        .map(|r| {
            let opt = |v: Option<f64>, f: fn(f64) -> String| v.map(f).unwrap_or_default();
            [
                r.label.clone(),
                format!("{:.3}", r.execution_seconds),
                opt(r.avg_macro_step, |v| format!("{v:.4}")),
                opt(r.integral_error, |v| format!("{v:.4e}")),
                opt(r.speedup, |v| format!("{v:.2}")),
            ]
        })
        .collect();
    let mut widths = SUMMARY_COLUMNS.map(str::len);
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let mut text = String::new();
    let line = |text: &mut String, row: &[&str]| {
        let parts: Vec<String> = row.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        let _ = writeln!(text, "{}", parts.join("  ").trim_end());
    };
    line(&mut text, &SUMMARY_COLUMNS);
    for row in &cells {
        line(&mut text, &row.iter().map(String::as_str).collect::<Vec<_>>());
    }

    let mut w = csv::Writer::from_writer(Vec::new());
    let _ = w.write_record(SUMMARY_COLUMNS);
    for r in rows {
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        let _ = w.write_record([
            r.label.clone(),
            fmt_f64(r.execution_seconds),
            opt(r.avg_macro_step),
            opt(r.integral_error),
            opt(r.speedup),
        ]);
    }
    let csv = String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default();
    (text, csv)
}

/// Writes the CSV form of a summary.
pub fn write_summary(rows: &[SummaryRow], path: &Path) -> io::Result<String> {
    let (text, csv) = emit_summary(rows);
    write_atomic(path, csv.as_bytes())?;
    Ok(text)
}
