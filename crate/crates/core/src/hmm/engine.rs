//! The micro/macro alternation.

use std::time::Instant;

use crate::dt::{run_micro_window, MicroSolver};
use crate::error::{Error, Result};
use crate::kernel::BumpKernel;
use crate::model::SystemModel;
use crate::transforms::{compress_into, reconstruct_into, ParkAngles};

use super::config::{HmmConfig, Mode};
use super::macro_step::{controller, macro_step_fixed};
use super::result::{EventRecord, ForceRecord, MacroStepRecord, Resolution, SimulationResult};
use super::schedule::EventSchedule;

/// Park angles implied by the macro-state at time `t`: every device angle is
/// `ω₀ t + δ` with `δ` read from the slow states.
pub fn macro_angles(model: &SystemModel, u: &[f64], t: f64) -> ParkAngles {
    let w0 = model.omega0();
    let sources: Vec<f64> = model.devices().iter().map(|d| w0 * t + u[d.angle_state()]).collect();
    ParkAngles {
        global: sources[model.reference_source()],
        global_rate: w0,
        source_rates: vec![w0; sources.len()],
        sources,
    }
}

fn first_non_finite(v: &[f64]) -> Option<usize> {
    v.iter().position(|x| !x.is_finite())
}

/// Simulates `[0, t_end]` from `x0`.
///
/// The micro-solver runs alone during the warmup span at the start and
/// after every disturbance, while a fault is applied, and in
/// [`Mode::MicroOnly`].  Elsewhere each cycle integrates a window of width
/// `η`, estimates the macro-force and takes one macro step.  Every step is
/// truncated at event times and at `t_end`.
pub fn run_simulation(
    model: &SystemModel,
    x0: &[f64],
    schedule: &EventSchedule,
    config: &HmmConfig,
    mode: Mode,
    t_end: f64,
) -> Result<SimulationResult> {
    config.validate(mode)?;
    if x0.len() != model.dim() {
        return Err(Error::Dimension {
            expected: model.dim(),
            got: x0.len(),
        });
    }
    let started = Instant::now();
    let mut model = model.clone();
    let layout = model.layout().clone();
    let n = layout.len();
    let n_slow = layout.n_slow();
    let comp = config.compression;
    let kernel = if mode == Mode::MicroOnly {
        None
    } else {
        Some(BumpKernel::new(config.kernel_d, config.eta, config.kernel_grid)?)
    };

    let mut result = SimulationResult::new(layout.names().map(str::to_string).collect());
    let mut x = x0.to_vec();
    let mut t = 0.0;
    result.push(t, Resolution::Micro, &x);

    let events = schedule.events();
    let mut next_event = 0;
    let mut micro_until = config.warmup;
    let mut mh = config.mh_init;
    let mut u = vec![0.0; n];
    let mut x_pred = vec![0.0; n];
    let mut slow_rhs = vec![0.0; n];
    let mut work = crate::dt::TapeWork::default();

    while t < t_end || (next_event < events.len() && events[next_event].time <= t) {
        // apply every event due now
        if next_event < events.len() && events[next_event].time <= t {
            while next_event < events.len() && events[next_event].time <= t {
                let ev = &events[next_event];
                model.apply_event(&ev.disturbance.to_model_event(), t, &mut x)?;
                result.events.push(EventRecord {
                    time: t,
                    description: format!("{:?}", ev.disturbance),
                });
                next_event += 1;
            }
            micro_until = micro_until.max(t + config.warmup);
            mh = mh.min(config.mh_init);
            continue;
        }
        let stop = events.get(next_event).map_or(t_end, |e| e.time.min(t_end));
        let faulted = !model.network().topology().faults.is_empty();

        let window_fits = t + config.eta <= stop;
        if mode == Mode::MicroOnly || faulted || t < micro_until || !window_fits {
            let span_end = if mode == Mode::MicroOnly || faulted || !window_fits || micro_until >= stop {
                stop
            } else {
                micro_until
            };
            let clock = Instant::now();
            let mut solver = MicroSolver::new(&model, config.micro)?;
            solver.advance(&mut x, t, span_end, |_, _, t1, xs| result.push(t1, Resolution::Micro, xs))?;
            result.timings.micro += clock.elapsed();
            t = span_end;
            continue;
        }

        // micro window
        let kernel = kernel.as_ref().expect("kernel built for HMM modes");
        let clock = Instant::now();
        let grid = kernel.grid_times(t);
        let window = run_micro_window(&model, &x, t, config.eta, config.micro, &grid)?;
        result.timings.micro += clock.elapsed();
        for (ts, xs) in &window.samples {
            result.push(*ts, Resolution::Micro, xs);
        }
        let t_w = window.end_time;
        x.copy_from_slice(&window.end_state);

        // kernel force
        let clock = Instant::now();
        let compressed: Vec<Vec<f64>> = grid
            .iter()
            .zip(&window.dense)
            .map(|(ts, xs)| {
                let mut us = vec![0.0; n];
                compress_into(xs, &layout, &model.park_angles(xs, *ts), comp, &mut us);
                us
            })
            .collect();
        let f_bar = kernel.estimate_force(&compressed)?;
        compress_into(&x, &layout, &model.park_angles(&x, t_w), comp, &mut u);
        if config.use_averaged_window_state {
            // only the fast block is replaced by its kernel average
            let avg = kernel.average(&compressed)?;
            u[n_slow..].copy_from_slice(&avg[n_slow..]);
        }
        result.timings.kernel += clock.elapsed();

        // macro step
        let clock = Instant::now();
        let f_slow = &window.end_force[..n_slow];
        let (span, u_next) = match mode {
            Mode::HmmFixed => {
                let span = (config.macro_period - config.eta).min(stop - t_w);
                let t_pred = t_w + span;
                let u_next = macro_step_fixed(&u, n_slow, f_slow, &f_bar[n_slow..], span, |up| {
                    reconstruct_into(up, &layout, &macro_angles(&model, up, t_pred), comp, &mut x_pred);
                    model.device_rhs(&x_pred, t_pred, &mut work, &mut slow_rhs);
                    Ok(slow_rhs[..n_slow].to_vec())
                })?;
                (span, u_next)
            }
            Mode::HmmVariable => {
                let mut f_n = f_bar.clone();
                f_n[..n_slow].copy_from_slice(f_slow);
                let mut rejections = 0;
                let c = loop {
                    let c = controller(&u, &f_n, mh, config.tol, config.rho_max, config.mh_max);
                    if c.r < 1.0 && c.e <= config.rejection_factor * config.tol {
                        break c;
                    }
                    mh *= 0.5;
                    rejections += 1;
                    if mh < 1e-9 {
                        return Err(Error::MacroDivergence {
                            time: t_w,
                            detail: format!("macro step rejected down to {mh:.3e} s (r = {:.3e})", c.r),
                        });
                    }
                };
                result.macro_steps.push(MacroStepRecord {
                    time: t_w,
                    mh,
                    r: c.r,
                    e: c.e,
                    rho: c.rho,
                    mh_next: c.mh_next,
                    worst: c.worst,
                    rejections,
                });
                let span = mh.min(stop - t_w);
                mh = c.mh_next;
                let u_next: Vec<f64> = u.iter().zip(&f_n).map(|(u, f)| u + span * f).collect();
                (span, u_next)
            }
            Mode::MicroOnly => unreachable!(),
        };
        result.forces.push(ForceRecord {
            time: t_w,
            force: f_bar,
        });
        if let Some(i) = first_non_finite(&u_next) {
            return Err(Error::MacroDivergence {
                time: t_w,
                detail: format!("non-finite {}", layout.name(i)),
            });
        }
        if span > 0.0 {
            let t_next = if span >= stop - t_w { stop } else { t_w + span };
            reconstruct_into(&u_next, &layout, &macro_angles(&model, &u_next, t_next), comp, &mut x);
            model.clamp_bounds(&mut x);
            result.push(t_next, Resolution::Macro, &x);
            t = t_next;
        } else {
            t = t_w;
        }
        result.timings.macro_step += clock.elapsed();
    }
    result.excluded = model.excluded_states();
    result.rhs_calls = model.rhs_calls();
    result.coefficient_calls = model.coefficient_calls();
    result.timings.total = started.elapsed();
    Ok(result)
}
