use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hmm_emt::hmm::{initialize, run_simulation, EventSchedule, HmmConfig, InitOptions, Mode};
use hmm_emt::model::{load_case_file, SystemModel};

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn hmm_emt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hmm-emt"))
        .args(args)
        .current_dir(root())
        .env_remove("HMM_EMT_OUT")
        .output()
        .expect("binary runs")
}

fn desk_run(out: &Path, mode: &str, extra: &[&str]) -> Output {
    let mut args = vec![
        "run",
        "--case",
        "cases/desk.toml",
        "--scenario",
        "cases/desk_fault.toml",
        "--mode",
        mode,
        "--t-end",
        "0.12",
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    hmm_emt(&args)
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_string).collect();
    let rows = r.records().map(|x| x.unwrap().iter().map(str::to_string).collect()).collect();
    (header, rows)
}

#[test]
fn validate_case_reports_counts() {
    let o = hmm_emt(&["validate-case", "--case", "cases/two_area.toml", "--scenario", "cases/two_area_s1.toml"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("11 buses, 14 branches, 4 sources, 125 states (38 slow, 87 fast)"), "{text}");
    assert!(text.contains("2 events"), "{text}");
}

#[test]
fn usage_errors_exit_2() {
    let conflicting = hmm_emt(&["run", "--H", "2eta", "--tol", "1e-2"]);
    assert_eq!(conflicting.status.code(), Some(2));
    let wrong_mode = hmm_emt(&["run", "--mode", "hmm-fixed", "--tol", "1e-2"]);
    assert_eq!(wrong_mode.status.code(), Some(2));
    let h_in_variable = hmm_emt(&["run", "--H", "2eta"]);
    assert_eq!(h_in_variable.status.code(), Some(2));
    let missing = hmm_emt(&["validate-case", "--case", "cases/nope.toml"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("cases/nope.toml"));
    let bad_span = hmm_emt(&["run", "--mode", "hmm-fixed", "--H", "0.5eta", "--case", "cases/desk.toml"]);
    assert_eq!(bad_span.status.code(), Some(2));
}

#[test]
fn unknown_selection_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = desk_run(dir.path(), "micro-only", &["--select", "gen9.delta"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unwritable_output_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let o = desk_run(&blocker.join("out"), "micro-only", &[]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn trajectory_round_trips_to_twelve_digits() {
    let dir = tempfile::tempdir().unwrap();
    let o = desk_run(dir.path(), "micro-only", &["--select", "gen1.*,v.bus3.a"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_csv(&dir.path().join("trajectory.csv"));

    let model = SystemModel::new(load_case_file(&root().join("cases/desk.toml")).unwrap()).unwrap();
    let sched = EventSchedule::load_file(&root().join("cases/desk_fault.toml")).unwrap();
    let x0 = initialize(&model, &InitOptions::default()).unwrap();
    let want = run_simulation(&model, &x0, &sched, &HmmConfig::default(), Mode::MicroOnly, 0.12).unwrap();

    assert_eq!(header[..2], ["time", "resolution"]);
    assert!(header[2..].iter().all(|h| h.starts_with("gen1.") || h == "v.bus3.a"));
    assert_eq!(header.last().unwrap(), "v.bus3.a");
    let cols: Vec<usize> = header[2..].iter().map(|h| model.layout().index_of(h).unwrap()).collect();
    assert_eq!(rows.len(), want.samples.len());
    let close = |a: f64, b: f64| a == b || (a - b).abs() <= 1e-12 * a.abs().max(b.abs());
    for (row, s) in rows.iter().zip(&want.samples) {
        assert!(close(row[0].parse().unwrap(), s.time));
        assert_eq!(row[1], s.resolution.tag());
        for ((cell, &i), name) in row[2..].iter().zip(&cols).zip(&header[2..]) {
            let v: f64 = cell.parse().unwrap();
            assert!(close(v, s.state[i]), "{name} at t = {}: {v} vs {}", s.time, s.state[i]);
        }
    }
    let (summary_header, summary) = read_csv(&dir.path().join("summary.csv"));
    assert_eq!(summary_header[0], "Configuration");
    assert_eq!(summary[0][0], "micro-only");
    assert_eq!(summary[0][2], "");
}

#[test]
fn empty_selection_writes_time_columns_only() {
    let dir = tempfile::tempdir().unwrap();
    let o = desk_run(dir.path(), "micro-only", &["--select", ""]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_csv(&dir.path().join("trajectory.csv"));
    assert_eq!(header, ["time", "resolution"]);
    assert!(!rows.is_empty());
}

#[test]
fn branch_alias_selects_the_line_current() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = hmm_emt(&[
        "run",
        "--mode",
        "micro-only",
        "--t-end",
        "0.005",
        "--select",
        "branch 7-8 phase A current,branch 8-7 phase c",
        "--out",
        out,
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, _) = read_csv(&dir.path().join("trajectory.csv"));
    assert_eq!(header.len(), 4);
    assert!(header[2].starts_with("w.line") && header[2].ends_with(".a"), "{header:?}");
    assert_eq!(header[3], header[2].replace(".a", ".c"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let o = desk_run(d.path(), "hmm-variable", &["--warmup", "0.02"]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["trajectory.csv", "steps.csv"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert!(x == y, "{f} differs");
    }
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_hmm-emt"))
        .args(["run", "--case", "cases/desk.toml", "--mode", "micro-only", "--t-end", "0.002"])
        .current_dir(root())
        .env("HMM_EMT_OUT", dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("trajectory.csv").exists());
    assert!(dir.path().join("summary.csv").exists());
}

#[test]
fn compare_writes_error_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = hmm_emt(&[
        "compare",
        "--case",
        "cases/desk.toml",
        "--scenario",
        "cases/desk_fault.toml",
        "--mode",
        "micro-only",
        "--t-end",
        "0.15",
        "--reference-step",
        "5e-6",
        "--out",
        out,
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let (_, rows) = read_csv(&dir.path().join("errors.csv"));
    let integral: f64 = rows.iter().find(|r| r[0] == "integral_error").unwrap()[1].parse().unwrap();
    assert!(integral < 1e-5, "{integral}");
    assert!(dir.path().join("window_errors.csv").exists());
    let (_, summary) = read_csv(&dir.path().join("summary.csv"));
    assert!(!summary[0][3].is_empty() && !summary[0][4].is_empty());
}
