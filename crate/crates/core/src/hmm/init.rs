//! Equilibrium initialization.

use crate::dt::{MicroConfig, MicroSolver};
use crate::error::{Error, Result};
use crate::model::SystemModel;
use crate::transforms::{compress, compress_rate, reconstruct};

use super::engine::macro_angles;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitOptions {
    /// Accepted `‖du/dt‖∞` of the compressed state.
    pub tolerance: f64,
    /// Swing damping (pu) added while settling.
    pub extra_damping: f64,
    /// Settling is checked after each chunk of this length (s).
    pub chunk: f64,
    /// Longest settling run (s).
    pub budget: f64,
}

impl Default for InitOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            extra_damping: 20.0,
            chunk: 0.25,
            budget: 20.0,
        }
    }
}

/// `max_i |du_i/dt|` of the compressed state, and the worst index.  Fast
/// states are measured in their rotating frame, so a balanced sinusoidal
/// steady state has zero residual.
pub fn equilibrium_residual(model: &SystemModel, x: &[f64], t: f64) -> (f64, usize) {
    let f = model.rhs_vec(x, t);
    let angles = model.park_angles(x, t);
    let rate = compress_rate(x, &f, model.layout(), &angles, Default::default());
    rate.iter()
        .enumerate()
        .fold((0.0, 0), |(m, i), (j, v)| if v.abs() > m { (v.abs(), j) } else { (m, i) })
}

/// Equilibrium state at `t = 0`.
///
/// Starts from the power-flow operating point.  When its residual is above
/// tolerance the state is settled with raised swing damping and re-phased
/// to `t = 0`.
pub fn initialize(model: &SystemModel, options: &InitOptions) -> Result<Vec<f64>> {
    let mut x = model.operating_point().to_vec();
    let (res, _) = equilibrium_residual(model, &x, 0.0);
    if res < options.tolerance {
        return Ok(x);
    }
    let mut damped = model.clone();
    damped.set_extra_damping(options.extra_damping);
    let mut solver = MicroSolver::new(&damped, MicroConfig::default())?;
    let mut t = 0.0;
    let mut worst = (res, 0);
    while t < options.budget {
        let t1 = t + options.chunk;
        solver.advance(&mut x, t, t1, |_, _, _, _| {})?;
        t = t1;
        worst = equilibrium_residual(model, &x, t);
        if worst.0 < options.tolerance {
            let layout = model.layout();
            let comp = Default::default();
            let u = compress(&x, layout, &model.park_angles(&x, t), comp);
            return Ok(reconstruct(&u, layout, &macro_angles(model, &u, 0.0), comp));
        }
    }
    Err(Error::InitNonConvergence {
        state: model.layout().name(worst.1).to_string(),
        residual: worst.0,
    })
}
