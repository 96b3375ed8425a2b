//! Device equations recorded onto expression tapes.
//!
//! Each source is written once here; the same tape drives the plain
//! right-hand side (reference solver, macro-process) and the Taylor
//! coefficient recursion of the micro-solver.
//!
//! Conventions: per-unit on the device rating, generator current direction
//! (out of the device into the bus), network voltages and currents in
//! peak-phase per-unit.  Terminal current states are stored on the system
//! base and rescaled here.

use crate::dt::tape::{TapeBuilder, Var};

use super::case::{GridFollowingIbr, SynchronousGenerator};

const SQRT3_2: f64 = 0.866_025_403_784_438_6;

/// Operating-point references fixed at initialization.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GeneratorSetpoints {
    /// Governor load reference (pu on machine rating).
    pub p_ref: f64,
    /// Exciter voltage reference (pu).
    pub v_ref: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IbrSetpoints {
    pub p_ref: f64,
    pub q_ref: f64,
    pub v_ref: f64,
}

/// State indices a device tape reads and writes.
#[derive(Debug, Clone, Copy)]
pub(crate) struct DeviceSlots {
    /// First slow state.
    pub slow: usize,
    /// Bus voltage triple.
    pub v: [usize; 3],
    /// Terminal current triple.
    pub i: [usize; 3],
}

/// Cosines and sines of `θ`, `θ - 2π/3`, `θ + 2π/3` as tape values.
fn phase_trig<'a>(theta: Var<'a>) -> ([Var<'a>; 3], [Var<'a>; 3]) {
    let (s, c) = theta.sin_cos();
    (
        [c, c * -0.5 + s * SQRT3_2, c * -0.5 - s * SQRT3_2],
        [s, s * -0.5 - c * SQRT3_2, s * -0.5 + c * SQRT3_2],
    )
}

fn park<'a>(c: &[Var<'a>; 3], s: &[Var<'a>; 3], x: [Var<'a>; 3]) -> [Var<'a>; 3] {
    let k = 2.0 / 3.0;
    [
        (x[0] + x[1] + x[2]) * (1.0 / 3.0),
        (x[0] * c[0] + x[1] * c[1] + x[2] * c[2]) * k,
        (x[0] * s[0] + x[1] * s[1] + x[2] * s[2]) * -k,
    ]
}

fn inverse_park<'a>(c: &[Var<'a>; 3], s: &[Var<'a>; 3], x: [Var<'a>; 3]) -> [Var<'a>; 3] {
    [0, 1, 2].map(|p| x[0] + x[1] * c[p] - x[2] * s[p])
}

/// Voltage-behind-reactance machine with TGOV1 governor and SEXS exciter.
///
/// `current_scale` converts system-base terminal current to machine base
/// (`S_system / S_machine`).  `extra_damping` is added to the swing damping
/// (used only while settling an initial condition).
pub(crate) fn record_generator(
    b: &TapeBuilder,
    g: &SynchronousGenerator,
    sp: &GeneratorSetpoints,
    slots: DeviceSlots,
    omega0: f64,
    current_scale: f64,
    extra_damping: f64,
) {
    let st = |k: usize| b.state(slots.slow + k);
    let (delta, domega, psi_fd, psi_1d, psi_1q, psi_2q) = (st(0), st(1), st(2), st(3), st(4), st(5));
    let (valve, reheat, leadlag, efd) = (st(6), st(7), st(8), st(9));
    let wb = omega0;

    let theta = b.time() * omega0 + delta;
    let (c, s) = phase_trig(theta);
    let v_abc = slots.v.map(|i| b.state(i));
    let i_abc = slots.i.map(|i| b.state(i) * current_scale);
    let v = park(&c, &s, v_abc);
    let i = park(&c, &s, i_abc);

    let xmd2 = g.xmd_sub();
    let xmq2 = g.xmq_sub();
    let [x0, xd2, xq2] = g.subtransient_dq();

    // magnetizing fluxes and rotor winding dynamics
    let psi_ad = (-i[1] + psi_fd / g.xlfd + psi_1d / g.xl1d) * xmd2;
    let psi_aq = (-i[2] + psi_1q / g.xl1q + psi_2q / g.xl2q) * xmq2;
    let e_fd = efd * (g.rfd / g.xmd);
    let dpsi_fd = (e_fd - (psi_fd - psi_ad) * (g.rfd / g.xlfd)) * wb;
    let dpsi_1d = (psi_1d - psi_ad) * (-wb * g.r1d / g.xl1d);
    let dpsi_1q = (psi_1q - psi_aq) * (-wb * g.r1q / g.xl1q);
    let dpsi_2q = (psi_2q - psi_aq) * (-wb * g.r2q / g.xl2q);
    b.output(slots.slow + 2, dpsi_fd);
    b.output(slots.slow + 3, dpsi_1d);
    b.output(slots.slow + 4, dpsi_1q);
    b.output(slots.slow + 5, dpsi_2q);

    // subtransient voltage and stator currents
    let psi2_d = (psi_fd / g.xlfd + psi_1d / g.xl1d) * xmd2;
    let psi2_q = (psi_1q / g.xl1q + psi_2q / g.xl2q) * xmq2;
    let dpsi2_d = (dpsi_fd / g.xlfd + dpsi_1d / g.xl1d) * xmd2;
    let dpsi2_q = (dpsi_1q / g.xl1q + dpsi_2q / g.xl2q) * xmq2;
    let speed = domega + 1.0;
    let vs_d = dpsi2_d / wb - speed * psi2_q;
    let vs_q = dpsi2_q / wb + speed * psi2_d;
    let omega_r = speed * omega0;
    let y0 = (-v[0] - i[0] * g.ra) * wb;
    let yd = (vs_d - v[1] - i[1] * g.ra) * wb - omega_r * i[2] * (xd2 - xq2);
    let yq = (vs_q - v[2] - i[2] * g.ra) * wb - omega_r * i[1] * (xd2 - xq2);
    let z = [y0 / x0, yd / xd2, yq / xq2];
    let di = inverse_park(&c, &s, z);
    for (&slot, d) in slots.i.iter().zip(di) {
        b.output(slot, d / current_scale);
    }

    // electrical torque
    let psi_d = psi2_d - i[1] * xd2;
    let psi_q = psi2_q - i[2] * xq2;
    let te = psi_d * i[2] - psi_q * i[1];

    // TGOV1
    let gov = &g.governor;
    let valve_in = sp.p_ref - domega / gov.r;
    b.limited_output(slots.slow + 6, (valve_in - valve) / gov.t1, gov.vmin, gov.vmax);
    b.output(slots.slow + 7, (valve - reheat) / gov.t3);
    let pm = reheat + (valve - reheat) * (gov.t2 / gov.t3) - domega * gov.dt;

    // swing equation
    b.output(slots.slow, domega * omega0);
    let damping = g.d + extra_damping;
    let ddomega = (pm - te - domega * damping) / (2.0 * g.h);
    b.output(slots.slow + 1, ddomega);

    // SEXS
    let ex = &g.exciter;
    let vt = (v[1] * v[1] + v[2] * v[2] + TERMINAL_EPS).sqrt();
    let err = sp.v_ref - vt;
    b.output(slots.slow + 8, (err - leadlag) / ex.tb);
    let u = err * ex.ta_tb + leadlag * (1.0 - ex.ta_tb);
    b.limited_output(slots.slow + 9, (u * ex.k - efd) / ex.te, ex.emin, ex.emax);
}

/// Keeps the terminal-voltage square root analytic through deep sags.
pub(crate) const TERMINAL_EPS: f64 = 1e-8;

/// Grid-following inverter: PLL, measurement filters, droop, power and
/// current PI loops and an R-L output filter.
pub(crate) fn record_ibr(
    b: &TapeBuilder,
    ibr: &GridFollowingIbr,
    sp: &IbrSetpoints,
    slots: DeviceSlots,
    omega0: f64,
    current_scale: f64,
) {
    let st = |k: usize| b.state(slots.slow + k);
    let (delta, phi, p_meas, q_meas) = (st(0), st(1), st(2), st(3));
    let (x_p, x_q, x_id, x_iq) = (st(4), st(5), st(6), st(7));
    let wb = omega0;

    let theta = b.time() * omega0 + delta;
    let (c, s) = phase_trig(theta);
    let v_abc = slots.v.map(|i| b.state(i));
    let i_abc = slots.i.map(|i| b.state(i) * current_scale);
    let v = park(&c, &s, v_abc);
    let i = park(&c, &s, i_abc);

    // PLL: θ = ω_s t + δ, ω_PLL = ω_s + Kp v_q + Ki φ
    let dw = v[2] * ibr.pll_kp + phi * ibr.pll_ki;
    b.output(slots.slow, dw);
    b.output(slots.slow + 1, v[2]);

    let p = v[1] * i[1] + v[2] * i[2];
    let q = v[2] * i[1] - v[1] * i[2];
    b.output(slots.slow + 2, (p - p_meas) / ibr.meas_tc);
    b.output(slots.slow + 3, (q - q_meas) / ibr.meas_tc);

    let p_star = sp.p_ref - dw * (ibr.freq_droop / omega0);
    let q_star = (sp.v_ref - v[1]) * ibr.volt_droop + sp.q_ref;
    let e_p = p_star - p_meas;
    let e_q = q_star - q_meas;
    b.output(slots.slow + 4, e_p * ibr.power_ki);
    b.output(slots.slow + 5, e_q * ibr.power_ki);
    let id_ref = e_p * ibr.power_kp + x_p;
    let iq_ref = -(e_q * ibr.power_kp + x_q);

    let ed_err = id_ref - i[1];
    let eq_err = iq_ref - i[2];
    b.output(slots.slow + 6, ed_err * ibr.current_ki);
    b.output(slots.slow + 7, eq_err * ibr.current_ki);
    let e_d = v[1] + ed_err * ibr.current_kp + x_id - i[2] * ibr.filter_x;
    let e_q = v[2] + eq_err * ibr.current_kp + x_iq + i[1] * ibr.filter_x;
    let zero = b.constant(0.0);
    let e_abc = inverse_park(&c, &s, [zero, e_d, e_q]);
    let k = wb / ibr.filter_x / current_scale;
    for ph in 0..3 {
        b.output(slots.i[ph], (e_abc[ph] - v_abc[ph] - i_abc[ph] * ibr.filter_r) * k);
    }
}
