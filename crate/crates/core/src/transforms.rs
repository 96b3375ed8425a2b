//! Park transformation and the compression (`Q`) / reconstruction (`R`)
//! operators between the abc micro-state and the 0dq macro-state.
//!
//! The transformation is the amplitude-invariant form
//!
//! ```text
//! P(θ) = 2/3 [ 1/2        1/2             1/2           ]
//!            [ cos θ      cos(θ - 2π/3)   cos(θ + 2π/3) ]
//!            [ -sin θ    -sin(θ - 2π/3)  -sin(θ + 2π/3) ]
//! ```
//!
//! so a balanced set `cos(θ), cos(θ - 2π/3), cos(θ + 2π/3)` maps to
//! `[0, 1, 0]`.  `Q` leaves the slow block untouched and applies `P` to each
//! three-phase triple of the fast block.

use std::f64::consts::FRAC_PI_3;

use crate::model::StateLayout;

const SQRT3_2: f64 = 0.866_025_403_784_438_6;

/// Cosines and sines of `θ`, `θ - 2π/3` and `θ + 2π/3`.
fn phase_trig(theta: f64) -> ([f64; 3], [f64; 3]) {
    let (s, c) = theta.sin_cos();
    (
        [c, -0.5 * c + SQRT3_2 * s, -0.5 * c - SQRT3_2 * s],
        [s, -0.5 * s - SQRT3_2 * c, -0.5 * s + SQRT3_2 * c],
    )
}

/// `P(θ)` as a row-major 3×3 array.
pub fn park_matrix(theta: f64) -> [[f64; 3]; 3] {
    let (c, s) = phase_trig(theta);
    let k = 2.0 / 3.0;
    [
        [k * 0.5, k * 0.5, k * 0.5],
        [k * c[0], k * c[1], k * c[2]],
        [-k * s[0], -k * s[1], -k * s[2]],
    ]
}

/// Closed-form `P(θ)⁻¹`, row-major.
pub fn inverse_park_matrix(theta: f64) -> [[f64; 3]; 3] {
    let (c, s) = phase_trig(theta);
    [[1.0, c[0], -s[0]], [1.0, c[1], -s[1]], [1.0, c[2], -s[2]]]
}

/// abc → 0dq.
pub fn park(theta: f64, abc: [f64; 3]) -> [f64; 3] {
    let (c, s) = phase_trig(theta);
    let k = 2.0 / 3.0;
    [
        (abc[0] + abc[1] + abc[2]) / 3.0,
        k * (abc[0] * c[0] + abc[1] * c[1] + abc[2] * c[2]),
        -k * (abc[0] * s[0] + abc[1] * s[1] + abc[2] * s[2]),
    ]
}

/// 0dq → abc.
pub fn inverse_park(theta: f64, dq0: [f64; 3]) -> [f64; 3] {
    let (c, s) = phase_trig(theta);
    [
        dq0[0] + dq0[1] * c[0] - dq0[2] * s[0],
        dq0[0] + dq0[1] * c[1] - dq0[2] * s[1],
        dq0[0] + dq0[1] * c[2] - dq0[2] * s[2],
    ]
}

/// `P(θ)⁻¹ diag(d) P(θ)`, the abc image of a diagonal 0dq operator such as
/// the subtransient inductance of a machine.  Row-major.
pub fn rotate_dq_diagonal(d: [f64; 3], theta: f64) -> [[f64; 3]; 3] {
    let p = park_matrix(theta);
    let pi = inverse_park_matrix(theta);
    let mut out = [[0.0; 3]; 3];
    for (r, row) in out.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = (0..3).map(|k| pi[r][k] * d[k] * p[k][c]).sum();
        }
    }
    out
}

/// Upper bound on the infinity norm of `P(θ)` over all `θ`.
///
/// Row 0 sums to 1; the d and q rows reach `2/3 · 2` where one phase term
/// is ±1 and the other two are ±1/2.
pub fn park_norm_bound() -> f64 {
    4.0 / 3.0
}

/// Exact `max_θ ‖P(θ)‖∞` sampled on a fine grid; used to check the bound.
pub fn park_norm_sampled(samples: usize) -> f64 {
    (0..samples)
        .map(|i| {
            let th = i as f64 * 2.0 * FRAC_PI_3 * 3.0 / samples as f64;
            park_matrix(th)
                .iter()
                .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

/// Which angle each source current triple is transformed with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FrameMode {
    /// Every fast triple uses the global reference angle.
    #[default]
    Global,
    /// Source currents use their own device angle; network voltages and
    /// branch currents keep the global angle.
    PerDeviceLocal,
}

/// Compression operator selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Compression {
    Park(FrameMode),
    /// `Q = R = I`: macro-state equals micro-state.
    Identity,
}

impl Default for Compression {
    fn default() -> Self {
        Compression::Park(FrameMode::Global)
    }
}

/// Park angles at one instant together with their time derivatives.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParkAngles {
    pub global: f64,
    pub global_rate: f64,
    /// Per-source angles (generators by id, then IBRs by id).
    pub sources: Vec<f64>,
    pub source_rates: Vec<f64>,
}

impl ParkAngles {
    /// A single angle for every triple.
    pub fn uniform(theta: f64, rate: f64, n_sources: usize) -> Self {
        Self {
            global: theta,
            global_rate: rate,
            sources: vec![theta; n_sources],
            source_rates: vec![rate; n_sources],
        }
    }

    fn triple_angle(&self, layout: &StateLayout, triple: usize, mode: FrameMode) -> (f64, f64) {
        match (mode, layout.source_of_triple(triple)) {
            (FrameMode::PerDeviceLocal, Some(s)) => (self.sources[s], self.source_rates[s]),
            _ => (self.global, self.global_rate),
        }
    }
}

fn map_triples(
    x: &[f64],
    out: &mut [f64],
    layout: &StateLayout,
    angles: &ParkAngles,
    comp: Compression,
    f: fn(f64, [f64; 3]) -> [f64; 3],
) {
    out.copy_from_slice(x);
    let mode = match comp {
        Compression::Identity => return,
        Compression::Park(m) => m,
    };
    let start = layout.fast_offset();
    for tr in 0..layout.n_triples() {
        let o = start + 3 * tr;
        let (th, _) = angles.triple_angle(layout, tr, mode);
        let r = f(th, [x[o], x[o + 1], x[o + 2]]);
        out[o..o + 3].copy_from_slice(&r);
    }
}

/// `u = Q(x)`.
pub fn compress(x: &[f64], layout: &StateLayout, angles: &ParkAngles, comp: Compression) -> Vec<f64> {
    let mut u = vec![0.0; x.len()];
    compress_into(x, layout, angles, comp, &mut u);
    u
}

pub fn compress_into(x: &[f64], layout: &StateLayout, angles: &ParkAngles, comp: Compression, u: &mut [f64]) {
    map_triples(x, u, layout, angles, comp, park);
}

/// `x = R(u) = Q⁻¹(u)`.
pub fn reconstruct(u: &[f64], layout: &StateLayout, angles: &ParkAngles, comp: Compression) -> Vec<f64> {
    let mut x = vec![0.0; u.len()];
    reconstruct_into(u, layout, angles, comp, &mut x);
    x
}

pub fn reconstruct_into(u: &[f64], layout: &StateLayout, angles: &ParkAngles, comp: Compression, x: &mut [f64]) {
    map_triples(u, x, layout, angles, comp, inverse_park);
}

/// Time derivative of `u = Q(x, t)` given `ẋ`:
/// `d(Px)/dt = P ẋ - θ̇ M P x` with `M` the 90° rotation of the dq pair.
pub fn compress_rate(
    x: &[f64],
    xdot: &[f64],
    layout: &StateLayout,
    angles: &ParkAngles,
    comp: Compression,
) -> Vec<f64> {
    let mut out = xdot.to_vec();
    let mode = match comp {
        Compression::Identity => return out,
        Compression::Park(m) => m,
    };
    let start = layout.fast_offset();
    for tr in 0..layout.n_triples() {
        let o = start + 3 * tr;
        let (th, rate) = angles.triple_angle(layout, tr, mode);
        let pd = park(th, [xdot[o], xdot[o + 1], xdot[o + 2]]);
        let px = park(th, [x[o], x[o + 1], x[o + 2]]);
        out[o] = pd[0];
        out[o + 1] = pd[1] + rate * px[2];
        out[o + 2] = pd[2] - rate * px[1];
    }
    out
}
