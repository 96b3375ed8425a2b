//! Macro-step updates and the variable-step controller.
//!
//! The macro-state is `u = [u^I, u^II]`: the first `n_slow` entries are the
//! slow device states, the rest the compressed (0dq) fast states.

use crate::error::{Error, Result};

/// Controller quantities of one variable macro step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerStep {
    /// `max_i |Mh f_i| / (|u_i| + 1)`.
    pub r: f64,
    /// `r / (1 - r)`; infinite for `r >= 1`.
    pub e: f64,
    /// `min(Tol / e, ρ_max)`, `ρ_max` when `e = 0`.
    pub rho: f64,
    /// `min(ρ Mh, Mh_max)`.
    pub mh_next: f64,
    /// Component attaining `r`.
    pub worst: usize,
}

/// Step-size controller arithmetic for step length `mh`.
pub fn controller(u: &[f64], f: &[f64], mh: f64, tol: f64, rho_max: f64, mh_max: f64) -> ControllerStep {
    let (r, worst) = u
        .iter()
        .zip(f)
        .map(|(u, f)| (mh * f).abs() / (u.abs() + 1.0))
        .enumerate()
        .fold((0.0f64, 0), |(m, k), (i, v)| if v > m { (v, i) } else { (m, k) });
    let e = if r < 1.0 { r / (1.0 - r) } else { f64::INFINITY };
    let rho = if e == 0.0 { rho_max } else { (tol / e).min(rho_max) };
    ControllerStep {
        r,
        e,
        rho,
        mh_next: (rho * mh).min(mh_max),
        worst,
    }
}

/// Variable-step update `u + Mh f` together with the controller output.
pub fn macro_step_variable(
    u: &[f64],
    f: &[f64],
    mh: f64,
    tol: f64,
    rho_max: f64,
    mh_max: f64,
) -> (Vec<f64>, ControllerStep) {
    let c = controller(u, f, mh, tol, rho_max, mh_max);
    let next = u.iter().zip(f).map(|(u, f)| u + mh * f).collect();
    (next, c)
}

/// Two-stage fixed-period update over the macro span `len = H - η`.
///
/// `f_slow` is the slow vector field at the window end, `f_bar_fast` the
/// kernel force of the fast states.  `slow_at(u_pred)` evaluates the slow
/// vector field at the predicted macro-state and the end of the span.  The
/// slow part is advanced with the average of both slow fields, the fast part
/// with the kernel force.  A zero-length span returns `u` without evaluating
/// `slow_at`.
pub fn macro_step_fixed<F>(
    u: &[f64],
    n_slow: usize,
    f_slow: &[f64],
    f_bar_fast: &[f64],
    len: f64,
    mut slow_at: F,
) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    if u.len() != n_slow + f_bar_fast.len() || f_slow.len() != n_slow {
        return Err(Error::Dimension {
            expected: u.len(),
            got: f_slow.len() + f_bar_fast.len(),
        });
    }
    if len == 0.0 {
        return Ok(u.to_vec());
    }
    let mut pred = u.to_vec();
    for i in 0..n_slow {
        pred[i] += len * f_slow[i];
    }
    for (j, f) in f_bar_fast.iter().enumerate() {
        pred[n_slow + j] += len * f;
    }
    let f_pred = slow_at(&pred)?;
    let mut next = pred;
    for i in 0..n_slow {
        next[i] = u[i] + len * 0.5 * (f_slow[i] + f_pred[i]);
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn controller_half_r() {
        // r = 0.5 → e = 1, ρ = Tol, Mh shrinks by Tol
        let c = controller(&[0.0], &[50.0], 0.01, 1e-2, 1.05, 0.04);
        assert_eq!(c.r, 0.5);
        assert_eq!(c.e, 1.0);
        assert_eq!(c.rho, 1e-2);
        assert_eq!(c.mh_next, 1e-4);
    }

    #[test]
    fn zero_force_grows_to_cap() {
        let mut mh = 0.01;
        for _ in 0..100 {
            let c = controller(&[1.0, 2.0], &[0.0, 0.0], mh, 1e-2, 1.05, 0.04);
            assert_eq!(c.rho, 1.05);
            assert!(c.mh_next <= 0.04 && c.mh_next <= 1.05 * mh);
            mh = c.mh_next;
        }
        assert_eq!(mh, 0.04);
    }

    #[test]
    fn saturated_ratio_is_infinite_error() {
        let c = controller(&[0.0], &[200.0], 0.01, 1e-2, 1.05, 0.04);
        assert_eq!(c.r, 2.0);
        assert!(c.e.is_infinite());
        assert_eq!(c.rho, 0.0);
    }

    #[test]
    fn fixed_step_zero_length_is_identity() {
        let u = [0.3, -1.0, 2.0];
        let out = macro_step_fixed(&u, 1, &[5.0], &[1.0, 1.0], 0.0, |_| panic!("not evaluated")).unwrap();
        assert_eq!(out, u.to_vec());
    }

    #[test]
    fn fixed_step_is_heun_on_slow_part() {
        // u̇ = -u: predictor u(1-H), corrector u(1 - H + H²/2)
        let h = 0.1;
        let out = macro_step_fixed(&[1.0], 1, &[-1.0], &[], h, |p| Ok(vec![-p[0]])).unwrap();
        assert!((out[0] - (1.0 - h + h * h / 2.0)).abs() < 1e-15);
    }
}
