//! Bump kernel and the convolution estimate of the macro-force.
//!
//! `K(t) = C exp(-D / (1 - t²))` on `(-1, 1)`, zero elsewhere, with `C`
//! chosen so that `∫K = 1`.  The window kernel is `K_η(t) = (2/η) K(2t/η)`
//! and the force estimate is `f̄ = (K'_η * u)(Δ)` at the window midpoint
//! `Δ = t_n + η/2`, which by integration by parts equals `(K_η * u̇)(Δ)`.
//!
//! The convolution is discretised with the composite trapezoid rule on a
//! uniform grid.  The integrand vanishes with all derivatives at both ends
//! of the window, so the trapezoid rule converges faster than any power of
//! the grid spacing there, while Simpson's rule stays fourth order.

use crate::error::{Error, Result};

/// Default kernel shape parameter.
pub const DEFAULT_D: f64 = 1.25;

/// Default number of dense samples per window.
pub const DEFAULT_GRID: usize = 129;

/// Smallest accepted dense grid.
pub const MIN_GRID: usize = 17;

/// `C exp(-D/(1-t²))` for `|t| < 1`, else 0.
pub fn kernel_value(t: f64, c: f64, d: f64) -> f64 {
    let s = 1.0 - t * t;
    if s <= 0.0 {
        0.0
    } else {
        c * (-d / s).exp()
    }
}

/// `dK/dt = K(t) · (-2Dt / (1-t²)²)`.
pub fn kernel_slope(t: f64, c: f64, d: f64) -> f64 {
    let s = 1.0 - t * t;
    if s <= 0.0 {
        0.0
    } else {
        kernel_value(t, c, d) * (-2.0 * d * t / (s * s))
    }
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if diff.abs() <= 15.0 * tol {
        return Ok(left + right + diff / 15.0);
    }
    if depth == 0 {
        return Err(Error::Quadrature(format!("no convergence on [{a}, {b}]")));
    }
    Ok(simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance
/// `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(&f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Normalising amplitude `C = 1 / ∫₋₁¹ exp(-D/(1-t²)) dt`.
pub fn calibrate_c(d: f64) -> Result<f64> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::Config(format!("kernel shape D must be positive, got {d}")));
    }
    let integral = adaptive_simpson(|t| kernel_value(t, 1.0, d), -1.0, 1.0, 1e-13)?;
    if !(integral > 0.0) {
        return Err(Error::Quadrature(format!("kernel integral vanished for D = {d}")));
    }
    Ok(1.0 / integral)
}

/// Calibrated bump kernel with quadrature weights for one window width.
#[derive(Debug, Clone, PartialEq)]
pub struct BumpKernel {
    c: f64,
    d: f64,
    eta: f64,
    /// `w_i K_η(Δ - τ_i)` on the dense grid.
    value_weights: Vec<f64>,
    /// `w_i K'_η(Δ - τ_i)` on the dense grid.
    slope_weights: Vec<f64>,
}

impl BumpKernel {
    /// Calibrates `C` for shape `d` and precomputes grid weights for windows
    /// of width `eta` sampled at `grid` uniformly spaced points.
    pub fn new(d: f64, eta: f64, grid: usize) -> Result<Self> {
        let c = calibrate_c(d)?;
        Self::with_amplitude(c, d, eta, grid)
    }

    pub fn with_amplitude(c: f64, d: f64, eta: f64, grid: usize) -> Result<Self> {
        if grid < MIN_GRID || grid.is_multiple_of(2) {
            return Err(Error::GridTooCoarse {
                points: grid,
                min: MIN_GRID,
            });
        }
        if !(eta > 0.0) {
            return Err(Error::Config(format!("window width must be positive, got {eta}")));
        }
        let mut k = Self {
            c,
            d,
            eta,
            value_weights: Vec::with_capacity(grid),
            slope_weights: Vec::with_capacity(grid),
        };
        let dt = eta / (grid - 1) as f64;
        for i in 0..grid {
            let w = if i == 0 || i == grid - 1 { 0.5 * dt } else { dt };
            let s = 0.5 * eta - i as f64 * dt;
            k.value_weights.push(w * k.scaled(s));
            k.slope_weights.push(w * k.scaled_derivative(s));
        }
        Ok(k)
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn grid(&self) -> usize {
        self.value_weights.len()
    }

    /// Dense grid times of a window starting at `t_n`.
    pub fn grid_times(&self, t_n: f64) -> Vec<f64> {
        let n = self.grid();
        let dt = self.eta / (n - 1) as f64;
        (0..n)
            .map(|i| if i == n - 1 { t_n + self.eta } else { t_n + i as f64 * dt })
            .collect()
    }

    pub fn value(&self, t: f64) -> f64 {
        kernel_value(t, self.c, self.d)
    }

    /// `K_η(t) = (2/η) K(2t/η)`.
    pub fn scaled(&self, t: f64) -> f64 {
        2.0 / self.eta * kernel_value(2.0 * t / self.eta, self.c, self.d)
    }

    /// `K'_η(t) = (4/η²) K'(2t/η)`.
    pub fn scaled_derivative(&self, t: f64) -> f64 {
        4.0 / (self.eta * self.eta) * kernel_slope(2.0 * t / self.eta, self.c, self.d)
    }

    /// `(K'_η * u)(Δ)` from `grid` samples of `u` (one slice per grid point).
    pub fn estimate_force(&self, samples: &[Vec<f64>]) -> Result<Vec<f64>> {
        self.convolve(samples, &self.slope_weights)
    }

    /// `(K_η * u)(Δ)`: the kernel-averaged state at the window midpoint.
    pub fn average(&self, samples: &[Vec<f64>]) -> Result<Vec<f64>> {
        self.convolve(samples, &self.value_weights)
    }

    fn convolve(&self, samples: &[Vec<f64>], weights: &[f64]) -> Result<Vec<f64>> {
        if samples.len() != weights.len() {
            return Err(Error::Dimension {
                expected: weights.len(),
                got: samples.len(),
            });
        }
        let n = samples.first().map_or(0, Vec::len);
        let mut out = vec![0.0; n];
        for (s, w) in samples.iter().zip(weights) {
            if s.len() != n {
                return Err(Error::Dimension { expected: n, got: s.len() });
            }
            for (o, v) in out.iter_mut().zip(s) {
                *o += w * v;
            }
        }
        Ok(out)
    }

    /// Convolution of scalar functions, for checks: `(K'_η * u)(Δ)` with
    /// `u` evaluated on the grid of a window starting at `t_n`.
    pub fn estimate_scalar(&self, t_n: f64, u: impl Fn(f64) -> f64) -> f64 {
        self.grid_times(t_n)
            .iter()
            .zip(&self.slope_weights)
            .map(|(t, w)| w * u(*t))
            .sum()
    }

    /// `(K_η * u)(Δ)` for a scalar function.
    pub fn average_scalar(&self, t_n: f64, u: impl Fn(f64) -> f64) -> f64 {
        self.grid_times(t_n)
            .iter()
            .zip(&self.value_weights)
            .map(|(t, w)| w * u(*t))
            .sum()
    }

    /// Trapezoid sums of `K_η` and `K'_η` over the grid.
    pub fn weight_sums(&self) -> (f64, f64) {
        (self.value_weights.iter().sum(), self.slope_weights.iter().sum())
    }
}
