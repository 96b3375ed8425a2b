//! Taylor-series micro-solver over the full state.
//!
//! Each step expands every state to order `L` about the current time with the
//! recursion `X[k+1] = F[k] / (k+1)`, where `F[k]` comes from the device tapes
//! and the linear network equations.  The step length is either fixed or
//! chosen from the size of the last network coefficient.

use crate::error::{Error, Result};
use crate::model::{RhsScratch, SystemModel};
use crate::network::NetworkMatrices;

use super::series::DtSeries;
use super::tape::TapeWork;

/// How the micro step length is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepControl {
    /// Constant step `h` (the last step of a span may be shorter).
    Fixed(f64),
    /// `h = (eps1 / Q_L)^(1/L)` clamped to `[h_min, h_max]`.
    Defect { eps1: f64, h_min: f64, h_max: f64 },
}

/// Which states enter the defect norm `Q_L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DefectScope {
    /// Node voltages and branch currents only.
    NetworkOnly,
    /// Every state.  Device series (square roots, products with fast
    /// waveforms) can converge over a shorter radius than the network.
    #[default]
    AllStates,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MicroConfig {
    /// Series order `L`.
    pub order: usize,
    pub control: StepControl,
    pub scope: DefectScope,
    /// Consecutive steps clamped at `h_min` tolerated before failing.
    pub max_underflow: usize,
}

impl Default for MicroConfig {
    fn default() -> Self {
        Self {
            order: 30,
            control: StepControl::Defect {
                eps1: 1e-2,
                h_min: 1e-6,
                h_max: 330e-6,
            },
            scope: DefectScope::AllStates,
            max_underflow: 50,
        }
    }
}

impl MicroConfig {
    pub fn fixed(order: usize, h: f64) -> Self {
        Self {
            order,
            control: StepControl::Fixed(h),
            ..Self::default()
        }
    }

    pub fn defect(order: usize, eps1: f64, h_min: f64, h_max: f64) -> Self {
        Self {
            order,
            control: StepControl::Defect { eps1, h_min, h_max },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.order == 0 {
            return Err(Error::Config("series order must be at least 1".into()));
        }
        match self.control {
            StepControl::Fixed(h) if !(h > 0.0 && h.is_finite()) => {
                Err(Error::Config(format!("micro step must be positive, got {h}")))
            }
            StepControl::Defect { eps1, h_min, h_max } => {
                if !(eps1 > 0.0) {
                    return Err(Error::Config(format!("defect tolerance must be positive, got {eps1}")));
                }
                if !(h_min > 0.0 && h_max >= h_min && h_max.is_finite()) {
                    return Err(Error::Config(format!(
                        "micro step bounds must satisfy 0 < h_min <= h_max, got [{h_min}, {h_max}]"
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Largest step the controller can take.
    pub fn h_max(&self) -> f64 {
        match self.control {
            StepControl::Fixed(h) => h,
            StepControl::Defect { h_max, .. } => h_max,
        }
    }
}

/// Local error estimate `Q_L h^L` of a truncated series.
pub fn defect_error(q_l: f64, h: f64, order: usize) -> f64 {
    q_l * h.powi(order as i32)
}

/// Step length that makes the defect equal `eps1`, clamped to
/// `[h_min, h_max]`; `Q_L = 0` gives `h_max`.
pub fn select_step(q_l: f64, eps1: f64, order: usize, h_min: f64, h_max: f64) -> f64 {
    if !(q_l > 0.0) {
        return h_max;
    }
    (eps1 / q_l).powf(1.0 / order as f64).clamp(h_min, h_max)
}

fn unclamped_step(q_l: f64, eps1: f64, order: usize) -> f64 {
    if q_l > 0.0 {
        (eps1 / q_l).powf(1.0 / order as f64)
    } else {
        f64::INFINITY
    }
}

/// Scratch buffers shared by successive expansions.
#[derive(Debug, Clone, Default)]
struct Expansion {
    series: DtSeries,
    works: Vec<TapeWork>,
    f: Vec<f64>,
    psi: Vec<f64>,
    inj: Vec<f64>,
}

impl Expansion {
    /// Fills `self.series` with the order-`order` expansion about `(x0, t0)`
    /// and returns `Q_L` for `scope`.
    fn run(&mut self, model: &SystemModel, x0: &[f64], t0: f64, order: usize, scope: DefectScope) -> Result<f64> {
        let layout = model.layout();
        let n = model.dim();
        if x0.len() != n {
            return Err(Error::Dimension { expected: n, got: x0.len() });
        }
        model.count_coefficients();
        let devices = model.devices();
        self.series.reset(n, order, t0);
        for (s, v) in x0.iter().enumerate() {
            self.series.set_coeff(s, 0, *v);
        }
        self.works.resize_with(devices.len(), TapeWork::default);
        for (d, w) in devices.iter().zip(self.works.iter_mut()) {
            if d.active {
                d.tape.prepare(w, order);
            }
        }
        self.f.clear();
        self.f.resize(n, 0.0);
        let v0 = layout.v_offset();
        let i0 = layout.i_offset();
        let n_nodes = layout.n_nodes();
        self.psi.resize(i0 - v0, 0.0);
        self.inj.resize(3 * n_nodes, 0.0);

        let mut q_l = 0.0;
        for k in 0..=order {
            let last = k == order;
            if !last || scope == DefectScope::AllStates {
                for (d, w) in devices.iter().zip(self.works.iter_mut()) {
                    if d.active {
                        d.tape.coefficient(k, &self.series, t0, w);
                        d.tape.output_coefficients(k, w, &mut self.f);
                    } else {
                        self.f[d.slow_range()].fill(0.0);
                        for i in d.current_states() {
                            self.f[i] = 0.0;
                        }
                    }
                }
            }
            for (j, p) in self.psi.iter_mut().enumerate() {
                *p = self.series.coeff(v0 + j, k);
            }
            self.inj.fill(0.0);
            for d in devices.iter().filter(|d| d.active) {
                for (p, i) in d.current_states().into_iter().enumerate() {
                    self.inj[3 * d.node + p] += self.series.coeff(i, k);
                }
            }
            for inj in model.injections() {
                self.inj[3 * inj.node] += inj.coefficient(k, t0);
            }
            model.network().rhs(&self.psi, &self.inj, &mut self.f[v0..i0]);
            if last {
                let range = match scope {
                    DefectScope::NetworkOnly => v0..i0,
                    DefectScope::AllStates => 0..n,
                };
                q_l = self.f[range].iter().fold(0.0f64, |m, v| m.max(v.abs()));
                break;
            }
            let inv = 1.0 / (k + 1) as f64;
            for (s, fs) in self.f.iter().enumerate() {
                self.series.set_coeff(s, k + 1, fs * inv);
            }
        }
        if !q_l.is_finite() || self.f.iter().any(|v| !v.is_finite()) {
            return Err(self.non_finite(model, t0));
        }
        Ok(q_l)
    }

    fn non_finite(&self, model: &SystemModel, t0: f64) -> Error {
        let state = (0..self.series.n_states())
            .find(|&s| self.series.row(s).iter().any(|c| !c.is_finite()))
            .or_else(|| self.f.iter().position(|v| !v.is_finite()))
            .unwrap_or(0);
        Error::NonFinite {
            state: model.layout().name(state).to_string(),
            time: t0,
        }
    }
}

/// Taylor coefficients of the full system about `(x0, t0)` to order `order`.
pub fn system_coefficients(model: &SystemModel, x0: &[f64], t0: f64, order: usize) -> Result<DtSeries> {
    let mut e = Expansion::default();
    e.run(model, x0, t0, order, DefectScope::NetworkOnly)?;
    Ok(e.series)
}

/// Taylor coefficients of the linear network alone, `Ψ[k+1] = (A_eq Ψ[k] +
/// B_eq Λ[k]) / (k + 1)`, together with `Q_L = ‖A_eq Ψ[L] + B_eq Λ[L]‖∞`.
///
/// `injection[k]` holds the `3N` nodal current coefficients of order `k`;
/// orders past the end of the slice are zero.
pub fn network_coefficients(
    network: &NetworkMatrices,
    psi0: &[f64],
    injection: &[Vec<f64>],
    order: usize,
) -> Result<(DtSeries, f64)> {
    let dim = network.dim();
    if psi0.len() != dim {
        return Err(Error::Dimension { expected: dim, got: psi0.len() });
    }
    let n3 = 3 * network.n_nodes();
    if let Some(bad) = injection.iter().find(|c| c.len() != n3) {
        return Err(Error::Dimension { expected: n3, got: bad.len() });
    }
    let zero = vec![0.0; n3];
    let mut series = DtSeries::zeros(dim, order, 0.0);
    let mut psi = psi0.to_vec();
    let mut f = vec![0.0; dim];
    for k in 0..=order {
        if k > 0 {
            for (s, p) in psi.iter_mut().enumerate() {
                *p = series.coeff(s, k);
            }
        } else {
            for (s, p) in psi.iter().enumerate() {
                series.set_coeff(s, 0, *p);
            }
        }
        network.rhs(&psi, injection.get(k).unwrap_or(&zero), &mut f);
        if k == order {
            break;
        }
        let inv = 1.0 / (k + 1) as f64;
        for (s, fs) in f.iter().enumerate() {
            series.set_coeff(s, k + 1, fs * inv);
        }
    }
    let q_l = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok((series, q_l))
}

/// Stepper that advances the full state with truncated Taylor series.
#[derive(Debug)]
pub struct MicroSolver<'m> {
    model: &'m SystemModel,
    config: MicroConfig,
    exp: Expansion,
    underflow_run: usize,
    last_q: f64,
}

impl<'m> MicroSolver<'m> {
    pub fn new(model: &'m SystemModel, config: MicroConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            model,
            config,
            exp: Expansion::default(),
            underflow_run: 0,
            last_q: 0.0,
        })
    }

    pub fn config(&self) -> &MicroConfig {
        &self.config
    }

    /// Series of the most recent step.
    pub fn series(&self) -> &DtSeries {
        &self.exp.series
    }

    /// `Q_L` of the most recent step.
    pub fn last_defect_norm(&self) -> f64 {
        self.last_q
    }

    /// Takes one step from `(x, t)` without passing `t_end`.  `x` is
    /// overwritten and the new time returned; a step that reaches `t_end`
    /// returns exactly `t_end`.
    pub fn step(&mut self, x: &mut [f64], t: f64, t_end: f64) -> Result<f64> {
        let cfg = self.config;
        let q = self.exp.run(self.model, x, t, cfg.order, cfg.scope)?;
        self.last_q = q;
        let mut h = match cfg.control {
            StepControl::Fixed(h) => h,
            StepControl::Defect { eps1, h_min, h_max } => {
                let raw = unclamped_step(q, eps1, cfg.order);
                if raw < h_min {
                    self.underflow_run += 1;
                    if self.underflow_run > cfg.max_underflow {
                        return Err(Error::StepUnderflow {
                            time: t,
                            required: raw,
                            h_min,
                        });
                    }
                } else {
                    self.underflow_run = 0;
                }
                raw.clamp(h_min, h_max)
            }
        };
        let remaining = t_end - t;
        // land on t_end rather than leave a sliver behind
        let landing = h >= remaining || remaining - h < 1e-9 * h;
        if landing {
            h = remaining;
        }
        self.exp.series.evaluate_into(h, x);
        self.model.clamp_bounds(x);
        if let Some(s) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                state: self.model.layout().name(s).to_string(),
                time: t + h,
            });
        }
        Ok(if landing { t_end } else { t + h })
    }

    /// Advances `x` from `t0` to exactly `t_end`.  `on_step(series, t, t1)`
    /// sees the series used on each step `[t, t1]` before the next step;
    /// the returned vector lists step lengths.
    pub fn advance<F>(&mut self, x: &mut [f64], t0: f64, t_end: f64, mut on_step: F) -> Result<Vec<f64>>
    where
        F: FnMut(&DtSeries, f64, f64, &[f64]),
    {
        let mut t = t0;
        let mut steps = Vec::new();
        while t < t_end {
            let t1 = self.step(x, t, t_end)?;
            on_step(&self.exp.series, t, t1, x);
            steps.push(t1 - t);
            t = t1;
        }
        Ok(steps)
    }
}

/// Output of one micro window `[t_n, t_n + η]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MicroWindowResult {
    /// State at the end of every micro step, with its time (the initial
    /// state is not repeated here).
    pub samples: Vec<(f64, Vec<f64>)>,
    /// State at each dense grid time.
    pub dense: Vec<Vec<f64>>,
    pub end_time: f64,
    pub end_state: Vec<f64>,
    /// `f(x, t)` at the end of the window.
    pub end_force: Vec<f64>,
    pub step_sizes: Vec<f64>,
}

/// Integrates `[t_n, t_n + η]` from `x0` and samples the solution at
/// `grid` (ascending times inside the window, last one equal to `t_n + η`).
pub fn run_micro_window(
    model: &SystemModel,
    x0: &[f64],
    t_n: f64,
    eta: f64,
    config: MicroConfig,
    grid: &[f64],
) -> Result<MicroWindowResult> {
    let t_end = match grid.last() {
        Some(&t) => t,
        None => t_n + eta,
    };
    let mut solver = MicroSolver::new(model, config)?;
    let mut x = x0.to_vec();
    let n = x.len();
    let mut dense: Vec<Vec<f64>> = Vec::with_capacity(grid.len());
    let mut samples = Vec::new();
    let mut g = 0;
    while g < grid.len() && grid[g] <= t_n {
        dense.push(x0.to_vec());
        g += 1;
    }
    let steps = solver.advance(&mut x, t_n, t_end, |series, t, t1, x_new| {
        while g < grid.len() && grid[g] <= t1 {
            if grid[g] >= t1 {
                dense.push(x_new.to_vec());
            } else {
                let mut v = vec![0.0; n];
                series.evaluate_into(grid[g] - t, &mut v);
                model.clamp_bounds(&mut v);
                dense.push(v);
            }
            g += 1;
        }
        samples.push((t1, x_new.to_vec()));
    })?;
    while dense.len() < grid.len() {
        dense.push(x.clone());
    }
    let mut end_force = vec![0.0; n];
    model.rhs(&x, t_end, &mut RhsScratch::default(), &mut end_force);
    Ok(MicroWindowResult {
        samples,
        dense,
        end_time: t_end,
        end_state: x,
        end_force,
        step_sizes: steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn select_step_limits() {
        assert_eq!(select_step(0.0, 1e-2, 30, 1e-6, 3e-4), 3e-4);
        assert_eq!(select_step(1e300, 1e-2, 30, 1e-6, 3e-4), 1e-6);
        let h = select_step(1e100, 1e-2, 30, 1e-9, 1.0);
        assert!((defect_error(1e100, h, 30) - 1e-2).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(MicroConfig::fixed(30, 0.0).validate().is_err());
        assert!(MicroConfig::defect(30, 1e-2, 1e-3, 1e-4).validate().is_err());
        assert!(MicroConfig::default().validate().is_ok());
        assert!(MicroConfig::fixed(0, 1e-5).validate().is_err());
    }
}
