//! Power-series coefficient tables and the differential-transformation rules.
//!
//! A [`DtSeries`] stores, for each state, the Taylor coefficients
//! `X[k] = x^(k)(t0) / k!` for `k = 0..=L` about a base time `t0`.  The
//! per-coefficient kernels in this module (`cauchy`, `sin_cos_step`, ...) are
//! shared with the recorded expression tape, so series-level operations and
//! the solver's recursion use the same arithmetic.

use crate::error::{Error, Result};

/// Coefficient table `X[k]`, one row of `order + 1` coefficients per state.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DtSeries {
    base_time: f64,
    order: usize,
    n_states: usize,
    coeffs: Vec<f64>,
}

impl DtSeries {
    pub fn zeros(n_states: usize, order: usize, base_time: f64) -> Self {
        Self {
            base_time,
            order,
            n_states,
            coeffs: vec![0.0; n_states * (order + 1)],
        }
    }

    /// Series of a constant vector: `X[0] = values`, higher coefficients zero.
    pub fn constant(values: &[f64], order: usize, base_time: f64) -> Self {
        let mut s = Self::zeros(values.len(), order, base_time);
        for (i, v) in values.iter().enumerate() {
            s.row_mut(i)[0] = *v;
        }
        s
    }

    /// Builds a table from explicit rows; every row must have the same length.
    pub fn from_rows(rows: &[Vec<f64>], base_time: f64) -> Result<Self> {
        let len = rows.first().map_or(1, Vec::len);
        if len == 0 {
            return Err(Error::Config("series rows must hold at least X[0]".into()));
        }
        let mut s = Self::zeros(rows.len(), len - 1, base_time);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != len {
                return Err(Error::OrderMismatch {
                    left: len - 1,
                    right: r.len().saturating_sub(1),
                });
            }
            s.row_mut(i).copy_from_slice(r);
        }
        Ok(s)
    }

    pub fn base_time(&self) -> f64 {
        self.base_time
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn row(&self, state: usize) -> &[f64] {
        let w = self.order + 1;
        &self.coeffs[state * w..(state + 1) * w]
    }

    pub fn row_mut(&mut self, state: usize) -> &mut [f64] {
        let w = self.order + 1;
        &mut self.coeffs[state * w..(state + 1) * w]
    }

    pub fn coeff(&self, state: usize, k: usize) -> f64 {
        self.coeffs[state * (self.order + 1) + k]
    }

    pub fn set_coeff(&mut self, state: usize, k: usize, value: f64) {
        self.coeffs[state * (self.order + 1) + k] = value;
    }

    /// Coefficient `k` of every state, as a new vector.
    pub fn column(&self, k: usize) -> Vec<f64> {
        (0..self.n_states).map(|i| self.coeff(i, k)).collect()
    }

    pub(crate) fn reset(&mut self, n_states: usize, order: usize, base_time: f64) {
        self.base_time = base_time;
        self.order = order;
        self.n_states = n_states;
        self.coeffs.clear();
        self.coeffs.resize(n_states * (order + 1), 0.0);
    }

    /// Horner evaluation of `sum_k X[k] h^k` for every state.
    pub fn evaluate(&self, h: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.n_states];
        self.evaluate_into(h, &mut out);
        out
    }

    pub fn evaluate_into(&self, h: f64, out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate().take(self.n_states) {
            *o = horner(self.row(i), h);
        }
    }

    /// Value and time-derivative `sum_k k X[k] h^(k-1)` of the truncated series.
    pub fn evaluate_with_derivative(&self, h: f64) -> (Vec<f64>, Vec<f64>) {
        let mut value = vec![0.0; self.n_states];
        let mut deriv = vec![0.0; self.n_states];
        for i in 0..self.n_states {
            let (v, d) = horner_with_derivative(self.row(i), h);
            value[i] = v;
            deriv[i] = d;
        }
        (value, deriv)
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.order != other.order {
            return Err(Error::OrderMismatch {
                left: self.order,
                right: other.order,
            });
        }
        if self.n_states != other.n_states {
            return Err(Error::Dimension {
                expected: self.n_states,
                got: other.n_states,
            });
        }
        if self.base_time != other.base_time {
            return Err(Error::Config(format!(
                "series base times differ: {} vs {}",
                self.base_time, other.base_time
            )));
        }
        Ok(())
    }
}

pub(crate) fn horner(coeffs: &[f64], h: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * h + c)
}

pub(crate) fn horner_with_derivative(coeffs: &[f64], h: f64) -> (f64, f64) {
    let mut v = 0.0;
    let mut d = 0.0;
    for c in coeffs.iter().rev() {
        d = d * h + v;
        v = v * h + c;
    }
    (v, d)
}

/// Coefficient `k` of the product of two series (Cauchy convolution).
#[inline]
pub(crate) fn cauchy(a: &[f64], b: &[f64], k: usize) -> f64 {
    let mut s = 0.0;
    for j in 0..=k {
        s += a[j] * b[k - j];
    }
    s
}

/// Coefficient `k >= 1` of `sin(g)` and `cos(g)` given lower coefficients
/// of both and `g[1..=k]`.
#[inline]
pub(crate) fn sin_cos_step(arg: &[f64], sin: &[f64], cos: &[f64], k: usize) -> (f64, f64) {
    let mut s = 0.0;
    let mut c = 0.0;
    let kf = k as f64;
    for j in 1..=k {
        let w = j as f64 / kf * arg[j];
        s += w * cos[k - j];
        c -= w * sin[k - j];
    }
    (s, c)
}

/// Coefficient `k >= 1` of `1/a` given `r[0..k]`.
#[inline]
pub(crate) fn recip_step(a: &[f64], r: &[f64], k: usize) -> f64 {
    let mut s = 0.0;
    for j in 1..=k {
        s += a[j] * r[k - j];
    }
    -s * r[0]
}

/// Coefficient `k >= 1` of `a/b` given `q[0..k]`.
#[inline]
pub(crate) fn div_step(a: &[f64], b: &[f64], q: &[f64], k: usize) -> f64 {
    let mut s = a[k];
    for j in 1..=k {
        s -= b[j] * q[k - j];
    }
    s / b[0]
}

/// Coefficient `k >= 1` of `sqrt(a)` given `s[0..k]`.
#[inline]
pub(crate) fn sqrt_step(a: &[f64], s: &[f64], k: usize) -> f64 {
    let mut acc = a[k];
    for j in 1..k {
        acc -= s[j] * s[k - j];
    }
    acc / (2.0 * s[0])
}

pub fn dt_add(a: &DtSeries, b: &DtSeries) -> Result<DtSeries> {
    a.check_compatible(b)?;
    let mut out = a.clone();
    for (o, x) in out.coeffs.iter_mut().zip(&b.coeffs) {
        *o += x;
    }
    Ok(out)
}

pub fn dt_sub(a: &DtSeries, b: &DtSeries) -> Result<DtSeries> {
    a.check_compatible(b)?;
    let mut out = a.clone();
    for (o, x) in out.coeffs.iter_mut().zip(&b.coeffs) {
        *o -= x;
    }
    Ok(out)
}

pub fn dt_scale(a: &DtSeries, factor: f64) -> DtSeries {
    let mut out = a.clone();
    out.coeffs.iter_mut().for_each(|c| *c *= factor);
    out
}

/// Element-wise product of two series tables.
pub fn dt_product(a: &DtSeries, b: &DtSeries) -> Result<DtSeries> {
    a.check_compatible(b)?;
    let mut out = DtSeries::zeros(a.n_states, a.order, a.base_time);
    for i in 0..a.n_states {
        let (ra, rb) = (a.row(i), b.row(i));
        for k in 0..=a.order {
            out.set_coeff(i, k, cauchy(ra, rb, k));
        }
    }
    Ok(out)
}

/// Coupled sine/cosine recursion of an angle series; returns `(sin, cos)`.
pub fn dt_sin_cos(angle: &DtSeries) -> (DtSeries, DtSeries) {
    let mut s = DtSeries::zeros(angle.n_states, angle.order, angle.base_time);
    let mut c = s.clone();
    let w = angle.order + 1;
    for i in 0..angle.n_states {
        let g = angle.row(i);
        let (s0, c0) = g[0].sin_cos();
        let mut srow = vec![0.0; w];
        let mut crow = vec![0.0; w];
        srow[0] = s0;
        crow[0] = c0;
        for k in 1..w {
            let (sk, ck) = sin_cos_step(g, &srow, &crow, k);
            srow[k] = sk;
            crow[k] = ck;
        }
        s.row_mut(i).copy_from_slice(&srow);
        c.row_mut(i).copy_from_slice(&crow);
    }
    (s, c)
}

/// Series of `1/a`; fails when any `a[0]` is zero.
pub fn dt_reciprocal(a: &DtSeries) -> Result<DtSeries> {
    let mut out = DtSeries::zeros(a.n_states, a.order, a.base_time);
    for i in 0..a.n_states {
        let ra = a.row(i);
        if ra[0] == 0.0 {
            return Err(Error::Config(format!(
                "reciprocal of a series with zero leading coefficient (row {i})"
            )));
        }
        let mut r = vec![0.0; a.order + 1];
        r[0] = 1.0 / ra[0];
        for k in 1..=a.order {
            r[k] = recip_step(ra, &r, k);
        }
        out.row_mut(i).copy_from_slice(&r);
    }
    Ok(out)
}
