//! Fixed-step RK4 baseline and trajectory comparison metrics.
//!
//! The reference integrates the same [`SystemModel::rhs`] the micro-solver
//! expands.  When probe times are given, steps are shortened to land on
//! them exactly, so a candidate's samples can be compared without
//! interpolation.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::hmm::{EventRecord, EventSchedule, Resolution, SimulationResult};
use crate::model::{RhsScratch, SystemModel};

/// Default reference step (s).
pub const DEFAULT_REFERENCE_STEP: f64 = 5e-6;

/// Magnitude beyond which the reference is declared divergent.
const DIVERGENCE_LIMIT: f64 = 1e8;

#[derive(Debug, Clone, PartialEq)]
pub struct Rk4Options {
    pub step: f64,
    /// Record only at these times (ascending); `None` records every
    /// `record_stride`-th step.
    pub probes: Option<Vec<f64>>,
    pub record_stride: usize,
}

impl Default for Rk4Options {
    fn default() -> Self {
        Self {
            step: DEFAULT_REFERENCE_STEP,
            probes: None,
            record_stride: 1,
        }
    }
}

impl Rk4Options {
    /// Records at the candidate's sample times.
    pub fn probing(step: f64, candidate: &SimulationResult) -> Self {
        Self {
            step,
            probes: Some(candidate.samples.iter().map(|s| s.time).collect()),
            record_stride: 1,
        }
    }
}

/// Stage buffers for [`rk4_step`].
#[derive(Debug, Clone, Default)]
pub struct Rk4Scratch {
    rhs: RhsScratch,
    k: [Vec<f64>; 4],
    stage: Vec<f64>,
}

/// One classical RK4 step of length `h` from `(x, t)`, in place.
pub fn rk4_step(model: &SystemModel, x: &mut [f64], t: f64, h: f64, s: &mut Rk4Scratch) {
    let n = x.len();
    for k in &mut s.k {
        k.resize(n, 0.0);
    }
    s.stage.resize(n, 0.0);
    let [k1, k2, k3, k4] = &mut s.k;
    model.rhs(x, t, &mut s.rhs, k1);
    for i in 0..n {
        s.stage[i] = x[i] + 0.5 * h * k1[i];
    }
    model.rhs(&s.stage, t + 0.5 * h, &mut s.rhs, k2);
    for i in 0..n {
        s.stage[i] = x[i] + 0.5 * h * k2[i];
    }
    model.rhs(&s.stage, t + 0.5 * h, &mut s.rhs, k3);
    for i in 0..n {
        s.stage[i] = x[i] + h * k3[i];
    }
    model.rhs(&s.stage, t + h, &mut s.rhs, k4);
    for i in 0..n {
        x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

/// RK4 over `[0, t_end]` with the disturbances of `schedule`.
pub fn rk4_simulate(
    model: &SystemModel,
    x0: &[f64],
    schedule: &EventSchedule,
    t_end: f64,
    options: &Rk4Options,
) -> Result<SimulationResult> {
    let h = options.step;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Config(format!("reference step must be positive, got {h}")));
    }
    if x0.len() != model.dim() {
        return Err(Error::Dimension {
            expected: model.dim(),
            got: x0.len(),
        });
    }
    let started = Instant::now();
    let mut model = model.clone();
    let mut result = SimulationResult::new(model.layout().names().map(str::to_string).collect());
    let mut x = x0.to_vec();
    let mut t = 0.0;
    result.push(t, Resolution::Micro, &x);
    let probes: &[f64] = options.probes.as_deref().unwrap_or(&[]);
    let mut next_probe = probes.partition_point(|&p| p <= t);
    let events = schedule.events();
    let mut next_event = 0;
    let mut scratch = Rk4Scratch::default();
    let stride = options.record_stride.max(1);
    let mut count = 0usize;

    loop {
        while next_event < events.len() && events[next_event].time <= t {
            let ev = &events[next_event];
            model.apply_event(&ev.disturbance.to_model_event(), t, &mut x)?;
            result.events.push(EventRecord {
                time: t,
                description: format!("{:?}", ev.disturbance),
            });
            next_event += 1;
        }
        if t >= t_end {
            break;
        }
        let mut target = (t + h).min(t_end);
        if let Some(e) = events.get(next_event) {
            target = target.min(e.time);
        }
        let probe_hit = options.probes.is_some() && next_probe < probes.len() && probes[next_probe] <= target;
        if probe_hit {
            target = probes[next_probe];
        }
        let step = target - t;
        rk4_step(&model, &mut x, t, step, &mut scratch);
        model.clamp_bounds(&mut x);
        t = target;
        count += 1;
        if x.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_LIMIT) {
            return Err(Error::ReferenceDivergence { time: t });
        }
        let record = match options.probes {
            Some(_) => {
                let mut hit = false;
                while next_probe < probes.len() && probes[next_probe] <= t {
                    hit = true;
                    next_probe += 1;
                }
                hit || t >= t_end
            }
            None => count.is_multiple_of(stride) || t >= t_end,
        };
        if record {
            result.push(t, Resolution::Micro, &x);
        }
    }
    result.excluded = model.excluded_states();
    result.rhs_calls = model.rhs_calls();
    result.timings.total = started.elapsed();
    result.timings.micro = result.timings.total;
    Ok(result)
}

/// Per-state weights for comparisons: every state counts, except states of
/// devices tripped during the run (handled in [`compare`]).
pub fn state_weights(model: &SystemModel) -> Vec<f64> {
    vec![1.0; model.dim()]
}

/// Comparison of a candidate trajectory against a reference.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    /// `(1/T) Σ ‖x_cand − x_ref‖∞ Δt` over micro samples.
    pub integral_error: f64,
    /// Integral error restricted to each state family.
    pub family_errors: Vec<(String, f64)>,
    /// `max |diff| / (|ref| + 1)`.
    pub max_normalized_error: f64,
    pub max_abs_deviation: f64,
    /// Largest deviation per micro window (start time, deviation).
    pub window_max: Vec<(f64, f64)>,
    pub compared_samples: usize,
    pub candidate_seconds: f64,
    pub reference_seconds: f64,
    pub speedup: f64,
}

fn family(name: &str) -> &'static str {
    if name.starts_with("v.") || name.starts_with("w.") {
        "network"
    } else if name.starts_with("i.") {
        "terminal-current"
    } else if name.starts_with("gen") {
        "machine"
    } else {
        "inverter"
    }
}

/// Reference state at time `t` (exact sample, or linear interpolation).
fn reference_at(reference: &SimulationResult, t: f64, out: &mut Vec<f64>) -> bool {
    let s = &reference.samples;
    let tol = 1e-12 * t.abs().max(1.0);
    let k = s.partition_point(|r| r.time < t - tol);
    if k < s.len() && (s[k].time - t).abs() <= tol {
        out.clone_from(&s[k].state);
        return true;
    }
    if k == 0 || k >= s.len() {
        return false;
    }
    let (a, b) = (&s[k - 1], &s[k]);
    let w = (t - a.time) / (b.time - a.time);
    out.clear();
    out.extend(a.state.iter().zip(&b.state).map(|(p, q)| p + w * (q - p)));
    true
}

/// Integral, normalized and absolute errors of `candidate` against
/// `reference` over the candidate's micro-resolution samples.  `weights`
/// scales each state (zero excludes it); `horizon` is the normalizing `T`.
pub fn compare(
    candidate: &SimulationResult,
    reference: &SimulationResult,
    weights: &[f64],
    horizon: f64,
) -> Result<ErrorReport> {
    let names = &candidate.state_names;
    let mut weights = weights.to_vec();
    for &i in candidate.excluded.iter().chain(&reference.excluded) {
        weights[i] = 0.0;
    }
    let mut families: Vec<(String, f64)> = Vec::new();
    let fam_of: Vec<usize> = names
        .iter()
        .map(|n| {
            let f = family(n);
            match families.iter().position(|(k, _)| k == f) {
                Some(p) => p,
                None => {
                    families.push((f.to_string(), 0.0));
                    families.len() - 1
                }
            }
        })
        .collect();
    let mut integral = 0.0;
    let mut max_norm = 0.0f64;
    let mut max_abs = 0.0f64;
    let mut compared = 0;
    let mut window_max: Vec<(f64, f64)> = Vec::new();
    let mut fam_max = vec![0.0f64; families.len()];
    let mut r = Vec::new();
    let mut prev_time = None;
    let mut prev_micro = false;
    for s in &candidate.samples {
        let micro = s.resolution == Resolution::Micro;
        if let (Some(t0), true) = (prev_time, micro) {
            if !reference_at(reference, s.time, &mut r) {
                return Err(Error::NoOverlap);
            }
            let dt = s.time - t0;
            fam_max.iter_mut().for_each(|m| *m = 0.0);
            let mut inf = 0.0f64;
            for i in 0..names.len() {
                if weights[i] == 0.0 {
                    continue;
                }
                let d = weights[i] * (s.state[i] - r[i]).abs();
                inf = inf.max(d);
                max_norm = max_norm.max(d / (weights[i] * r[i].abs() + 1.0));
                fam_max[fam_of[i]] = fam_max[fam_of[i]].max(d);
            }
            integral += inf * dt;
            for (f, m) in families.iter_mut().zip(&fam_max) {
                f.1 += m * dt;
            }
            max_abs = max_abs.max(inf);
            if !prev_micro || window_max.is_empty() {
                window_max.push((t0, inf));
            } else if let Some(w) = window_max.last_mut() {
                w.1 = w.1.max(inf);
            }
            compared += 1;
        }
        prev_time = Some(s.time);
        prev_micro = micro;
    }
    if compared == 0 {
        return Err(Error::NoOverlap);
    }
    for f in &mut families {
        f.1 /= horizon;
    }
    let cand = candidate.timings.total.as_secs_f64();
    let refs = reference.timings.total.as_secs_f64();
    Ok(ErrorReport {
        integral_error: integral / horizon,
        family_errors: families,
        max_normalized_error: max_norm,
        max_abs_deviation: max_abs,
        window_max,
        compared_samples: compared,
        candidate_seconds: cand,
        reference_seconds: refs,
        speedup: if cand > 0.0 { refs / cand } else { f64::NAN },
    })
}

/// Integral error alone; see [`compare`].
pub fn integral_error(
    candidate: &SimulationResult,
    reference: &SimulationResult,
    weights: &[f64],
    horizon: f64,
) -> Result<f64> {
    compare(candidate, reference, weights, horizon).map(|r| r.integral_error)
}

/// Least-squares line `y = slope x + intercept` and its `R²`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, intercept, r2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeedupRow {
    pub label: String,
    /// Predicted ratio, e.g. `H/η`.
    pub predicted: f64,
    pub seconds: f64,
    /// `baseline / seconds`.
    pub speedup: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeedupReport {
    pub baseline_seconds: f64,
    pub rows: Vec<SpeedupRow>,
    /// Fit of measured speedup against the predicted ratio.
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Measured speedups of `runs = (label, predicted ratio, seconds)` over a
/// baseline run time, with a linear fit against the predicted ratios.
pub fn speedup_report(baseline_seconds: f64, runs: &[(String, f64, f64)]) -> Result<SpeedupReport> {
    if runs.len() < 2 {
        return Err(Error::Config("a speedup report needs at least two runs".into()));
    }
    let rows: Vec<SpeedupRow> = runs
        .iter()
        .map(|(label, predicted, seconds)| SpeedupRow {
            label: label.clone(),
            predicted: *predicted,
            seconds: *seconds,
            speedup: baseline_seconds / seconds,
        })
        .collect();
    let x: Vec<f64> = rows.iter().map(|r| r.predicted).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.speedup).collect();
    let (slope, intercept, r_squared) = linear_fit(&x, &y);
    Ok(SpeedupReport {
        baseline_seconds,
        rows,
        slope,
        intercept,
        r_squared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_line_fit() {
        let (m, b, r2) = linear_fit(&[1.0, 2.0, 3.0], &[3.0, 5.0, 7.0]);
        assert!((m - 2.0).abs() < 1e-12 && (b - 1.0).abs() < 1e-12 && (r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn speedup_needs_two_runs() {
        assert!(speedup_report(1.0, &[("a".into(), 1.0, 1.0)]).is_err());
        let r = speedup_report(2.0, &[("a".into(), 1.0, 2.0), ("b".into(), 2.0, 1.0)]).unwrap();
        assert_eq!(r.rows[0].speedup, 1.0);
        assert_eq!(r.rows[1].speedup, 2.0);
    }
}
