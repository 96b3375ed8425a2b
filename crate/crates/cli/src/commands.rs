//! Subcommand implementations.

use std::path::Path;

use hmm_emt::hmm::{initialize, run_simulation, EventSchedule, HmmConfig, InitOptions, Mode, SimulationResult};
use hmm_emt::model::{load_case_file, SystemModel};
use hmm_emt::reference::{compare, rk4_simulate, speedup_report, state_weights, ErrorReport, Rk4Options};

use crate::args::{CommonArgs, RunArgs, RunConfig, Span, SweepArgs, ValidateArgs};
use crate::output::{
    resolve_selection, write_error_report, write_speedup_csv, write_step_trace_csv, write_summary,
    write_trajectory_csv, SummaryRow,
};
use crate::CliError;

/// Input errors name the file they came from.
fn in_file(path: &Path, e: hmm_emt::Error) -> CliError {
    CliError::Usage(format!("{}: {e}", path.display()))
}

/// A loaded case with its schedule and initial state.
pub struct Prepared {
    pub model: SystemModel,
    pub schedule: EventSchedule,
    pub x0: Vec<f64>,
}

pub fn prepare(case: &Path, scenario: Option<&Path>) -> Result<Prepared, CliError> {
    let model = SystemModel::new(load_case_file(case).map_err(|e| in_file(case, e))?)?;
    let schedule = match scenario {
        Some(p) => EventSchedule::load_file(p).map_err(|e| in_file(p, e))?,
        None => EventSchedule::default(),
    };
    let x0 = initialize(&model, &InitOptions::default())?;
    Ok(Prepared { model, schedule, x0 })
}

fn simulate(p: &Prepared, hmm: &HmmConfig, mode: Mode, t_end: f64) -> Result<SimulationResult, CliError> {
    log::info!("{mode} run to t = {t_end} s");
    Ok(run_simulation(&p.model, &p.x0, &p.schedule, hmm, mode, t_end)?)
}

fn reference_for(p: &Prepared, candidate: &SimulationResult, t_end: f64, step: f64) -> Result<ErrorReport, CliError> {
    log::info!("RK4 reference at h = {step:e} s");
    let reference = rk4_simulate(&p.model, &p.x0, &p.schedule, t_end, &Rk4Options::probing(step, candidate))?;
    Ok(compare(candidate, &reference, &state_weights(&p.model), t_end)?)
}

/// Mean macro step: recorded steps in variable mode, `H − η` in fixed mode.
fn avg_macro_step(result: &SimulationResult, hmm: &HmmConfig, mode: Mode) -> Option<f64> {
    match mode {
        Mode::HmmVariable => result.average_macro_step(),
        Mode::HmmFixed => Some(hmm.macro_period - hmm.eta),
        Mode::MicroOnly => None,
    }
}

fn write_trajectory(cfg: &RunConfig, p: &Prepared, result: &SimulationResult) -> Result<(), CliError> {
    let columns = resolve_selection(&p.model, cfg.select.as_deref())?;
    write_trajectory_csv(result, &columns, &cfg.out.join("trajectory.csv"))?;
    if cfg.mode == Mode::HmmVariable {
        write_step_trace_csv(result, &cfg.out.join("steps.csv"))?;
    }
    Ok(())
}

pub fn run(args: &RunArgs) -> Result<(), CliError> {
    let cfg = args.resolve()?;
    let p = prepare(&cfg.case, cfg.scenario.as_deref())?;
    resolve_selection(&p.model, cfg.select.as_deref())?;
    let result = simulate(&p, &cfg.hmm, cfg.mode, cfg.t_end)?;
    write_trajectory(&cfg, &p, &result)?;
    let row = SummaryRow {
        label: cfg.mode.to_string(),
        execution_seconds: result.timings.total.as_secs_f64(),
        avg_macro_step: avg_macro_step(&result, &cfg.hmm, cfg.mode),
        integral_error: None,
        speedup: None,
    };
    print!("{}", write_summary(&[row], &cfg.out.join("summary.csv"))?);
    Ok(())
}

pub fn compare_cmd(args: &RunArgs) -> Result<(), CliError> {
    let cfg = args.resolve()?;
    let p = prepare(&cfg.case, cfg.scenario.as_deref())?;
    resolve_selection(&p.model, cfg.select.as_deref())?;
    let result = simulate(&p, &cfg.hmm, cfg.mode, cfg.t_end)?;
    let report = reference_for(&p, &result, cfg.t_end, cfg.reference_step)?;
    write_trajectory(&cfg, &p, &result)?;
    write_error_report(&report, &cfg.out.join("errors.csv"), &cfg.out.join("window_errors.csv"))?;
    let row = SummaryRow {
        label: cfg.mode.to_string(),
        execution_seconds: report.candidate_seconds,
        avg_macro_step: avg_macro_step(&result, &cfg.hmm, cfg.mode),
        integral_error: Some(report.integral_error),
        speedup: Some(report.speedup),
    };
    print!("{}", write_summary(&[row], &cfg.out.join("summary.csv"))?);
    println!(
        "max normalized error {:.4e}, max deviation {:.4e}",
        report.max_normalized_error, report.max_abs_deviation
    );
    for (family, e) in &report.family_errors {
        println!("  {family:<17} {e:.4e}");
    }
    Ok(())
}

fn span_label(s: Span) -> String {
    match s {
        Span::Seconds(v) => format!("H={v}s"),
        Span::Windows(k) => format!("H={k}eta"),
    }
}

pub fn sweep(args: &SweepArgs) -> Result<(), CliError> {
    let common: &CommonArgs = &args.common;
    let base = common.hmm_config()?;
    let out = common.out_dir();
    let p = prepare(&common.case, common.scenario.as_deref())?;
    let t_end = common.t_end;

    let mut configs: Vec<(String, f64, Mode, HmmConfig)> = Vec::new();
    if !args.macro_period.is_empty() {
        for &h in &args.macro_period {
            let mut c = base.clone();
            c.macro_period = h.resolve(c.eta);
            c.validate(Mode::HmmFixed).map_err(|e| CliError::Usage(e.to_string()))?;
            configs.push((span_label(h), c.macro_period / c.eta, Mode::HmmFixed, c));
        }
    } else {
        for &tol in &args.tol {
            let mut c = base.clone();
            c.tol = tol;
            c.validate(Mode::HmmVariable).map_err(|e| CliError::Usage(e.to_string()))?;
            configs.push((format!("Tol={tol:e}"), tol, Mode::HmmVariable, c));
        }
    }

    let mut rows = Vec::new();
    let mut timed = Vec::new();
    for (label, predicted, mode, c) in &configs {
        let result = simulate(&p, c, *mode, t_end)?;
        let seconds = result.timings.total.as_secs_f64();
        let report = if args.reference {
            Some(reference_for(&p, &result, t_end, common.reference_step)?)
        } else {
            None
        };
        timed.push((label.clone(), *predicted, seconds));
        rows.push(SummaryRow {
            label: label.clone(),
            execution_seconds: seconds,
            avg_macro_step: avg_macro_step(&result, c, *mode),
            integral_error: report.as_ref().map(|r| r.integral_error),
            speedup: report.as_ref().map(|r| r.speedup),
        });
    }

    if !args.macro_period.is_empty() {
        let baseline = simulate(&p, &base, Mode::MicroOnly, t_end)?;
        let report = speedup_report(baseline.timings.total.as_secs_f64(), &timed)?;
        for (row, s) in rows.iter_mut().zip(&report.rows) {
            row.speedup = Some(s.speedup);
        }
        write_speedup_csv(&report, &out.join("sweep.csv"))?;
        println!(
            "micro-only baseline {:.3} s; speedup = {:.4} (H/eta) + {:.4}, R^2 = {:.4}",
            report.baseline_seconds, report.slope, report.intercept, report.r_squared
        );
    }
    print!("{}", write_summary(&rows, &out.join("summary.csv"))?);
    Ok(())
}

pub fn validate_case(args: &ValidateArgs) -> Result<(), CliError> {
    let case = load_case_file(&args.case).map_err(|e| in_file(&args.case, e))?;
    let mut model = SystemModel::new(case)?;
    let layout = model.layout();
    println!(
        "{}: {} buses, {} branches, {} sources, {} states ({} slow, {} fast)",
        args.case.display(),
        layout.n_nodes(),
        layout.n_edges(),
        layout.n_sources(),
        layout.len(),
        layout.n_slow(),
        layout.n_fast()
    );
    if let Some(path) = &args.scenario {
        let schedule = EventSchedule::load_file(path).map_err(|e| in_file(path, e))?;
        let mut x = model.operating_point().to_vec();
        for ev in schedule.events() {
            model.apply_event(&ev.disturbance.to_model_event(), ev.time, &mut x)?;
        }
        println!("{}: {} events", path.display(), schedule.events().len());
    }
    Ok(())
}
