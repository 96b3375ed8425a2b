//! Assembled simulation model: device tapes, network operators, operating
//! point and the switching state that events modify.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::sync::atomic::{AtomicU64, Ordering};

use num_complex::Complex64;

use crate::dt::tape::{StateBound, Tape, TapeBuilder, TapeWork};
use crate::error::{Error, Result};
use crate::network::{assemble, build_incidence, NetworkMatrices, TopologyEvent};
use crate::transforms::{self, ParkAngles};

use super::case::{DeviceRef, PowerSystemCase};
use super::devices::{record_generator, record_ibr, DeviceSlots, GeneratorSetpoints, IbrSetpoints, TERMINAL_EPS};
use super::layout::{build_layout, EdgeKind, Owner, StateLayout, GENERATOR_STATES, IBR_STATES};
use super::powerflow::{solve_power_flow, PowerFlowSolution};

/// A source device with its recorded equations.
#[derive(Debug, Clone)]
pub struct Device {
    pub owner: Owner,
    /// Node index of the terminal bus.
    pub node: usize,
    pub(crate) slots: DeviceSlots,
    pub(crate) n_slow: usize,
    pub tape: Tape,
    /// False once tripped: zero injection, frozen internal states.
    pub active: bool,
}

impl Device {
    /// Index of the device angle state (rotor angle or PLL angle deviation).
    pub fn angle_state(&self) -> usize {
        self.slots.slow
    }

    pub fn slow_range(&self) -> std::ops::Range<usize> {
        self.slots.slow..self.slots.slow + self.n_slow
    }

    pub fn current_states(&self) -> [usize; 3] {
        self.slots.i
    }

    pub fn voltage_states(&self) -> [usize; 3] {
        self.slots.v
    }
}

/// Sinusoidal current injected into phase A of a bus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Injection {
    pub node: usize,
    pub amplitude: f64,
    pub omega: f64,
    pub start: f64,
}

impl Injection {
    pub fn value(&self, t: f64) -> f64 {
        self.amplitude * (self.omega * (t - self.start)).sin()
    }

    /// Taylor coefficient `k` about `t0`: `A ωᵏ/k! sin(ω(t0 - start) + kπ/2)`.
    pub fn coefficient(&self, k: usize, t0: f64) -> f64 {
        let mut scale = self.amplitude;
        for j in 1..=k {
            scale *= self.omega / j as f64;
        }
        scale * (self.omega * (t0 - self.start) + k as f64 * FRAC_PI_2).sin()
    }
}

/// Disturbances a scenario can apply.
#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    Network(TopologyEvent),
    TripGenerator(u32),
    /// Current injection `amplitude · sin(2π f (t - t_event))` (system
    /// per-unit) into phase A of `bus`.
    Injection { bus: u32, amplitude: f64, frequency_hz: f64 },
}

impl Event {
    /// True for events that leave a fault applied.
    pub fn is_fault(&self) -> bool {
        matches!(self, Event::Network(TopologyEvent::ApplyFault { .. }))
    }
}

/// Simulation model of one case.
#[derive(Debug)]
pub struct SystemModel {
    case: PowerSystemCase,
    layout: StateLayout,
    network: NetworkMatrices,
    devices: Vec<Device>,
    gen_setpoints: Vec<GeneratorSetpoints>,
    ibr_setpoints: Vec<IbrSetpoints>,
    injections: Vec<Injection>,
    reference: usize,
    operating_point: Vec<f64>,
    power_flow: PowerFlowSolution,
    extra_damping: f64,
    rhs_calls: AtomicU64,
    coefficient_calls: AtomicU64,
}

impl Clone for SystemModel {
    fn clone(&self) -> Self {
        Self {
            case: self.case.clone(),
            layout: self.layout.clone(),
            network: self.network.clone(),
            devices: self.devices.clone(),
            gen_setpoints: self.gen_setpoints.clone(),
            ibr_setpoints: self.ibr_setpoints.clone(),
            injections: self.injections.clone(),
            reference: self.reference,
            operating_point: self.operating_point.clone(),
            power_flow: self.power_flow.clone(),
            extra_damping: self.extra_damping,
            rhs_calls: AtomicU64::new(0),
            coefficient_calls: AtomicU64::new(0),
        }
    }
}

/// Phasor of phase `p` (0, 1, 2 = a, b, c) evaluated at time `t`.
fn phase_value(x: Complex64, omega0: f64, t: f64, p: usize) -> f64 {
    let shift = [0.0, -TAU / 3.0, TAU / 3.0][p];
    (x * Complex64::from_polar(1.0, omega0 * t + shift)).re
}

impl SystemModel {
    /// Builds the model and its power-flow operating point.
    pub fn new(case: PowerSystemCase) -> Result<Self> {
        let layout = build_layout(&case);
        let incidence = build_incidence(&case)?;
        let network = assemble(&case, &incidence)?;
        let power_flow = solve_power_flow(&case, &network)?;
        let omega0 = case.omega0();
        let base = case.system.base_mva;
        let mut x = vec![0.0; layout.len()];

        let node_of = |bus: u32| case.bus_index(bus).expect("validated bus");
        for (n, v) in power_flow.voltages.iter().enumerate() {
            for p in 0..3 {
                x[layout.v_index(n, p)] = phase_value(*v, omega0, 0.0, p);
            }
        }
        for e in 0..network.n_edges() {
            let (f, t) = network.incidence().edge(e);
            let drop = power_flow.voltages[f] - t.map_or(Complex64::new(0.0, 0.0), |t| power_flow.voltages[t]);
            let w = drop / Complex64::new(network.edge_r[e], omega0 * network.edge_l[e]);
            for p in 0..3 {
                x[layout.w_index(e, p)] = phase_value(w, omega0, 0.0, p);
            }
        }

        let mut gen_setpoints = Vec::new();
        let mut ibr_setpoints = Vec::new();
        for (s, owner) in layout.sources().iter().enumerate() {
            let sp = power_flow.source_power[s];
            let (bus, mva) = match owner {
                Owner::Generator(id) => {
                    let g = case.generators.iter().find(|g| g.id == *id).unwrap();
                    (g.bus, g.mva)
                }
                Owner::Ibr(id) => {
                    let i = case.ibrs.iter().find(|i| i.id == *id).unwrap();
                    (i.bus, i.mva)
                }
                _ => unreachable!(),
            };
            let v = power_flow.voltages[node_of(bus)];
            let i_sys = (sp / v).conj();
            for p in 0..3 {
                x[layout.i_index(s, p)] = phase_value(i_sys, omega0, 0.0, p);
            }
            let i_dev = i_sys * (base / mva);
            let o = layout.source_slow_offset(s);
            match owner {
                Owner::Generator(id) => {
                    let g = case.generators.iter().find(|g| g.id == *id).unwrap();
                    let e = v + Complex64::new(g.ra, g.xl + g.xmq) * i_dev;
                    let delta = e.arg() - FRAC_PI_2;
                    let rot = Complex64::from_polar(1.0, -delta);
                    let (vdq, idq) = (v * rot, i_dev * rot);
                    let psi_d = vdq.im + g.ra * idq.im;
                    let psi_q = -(vdq.re + g.ra * idq.re);
                    let psi_md = psi_d + g.xl * idq.re;
                    let psi_mq = psi_q + g.xl * idq.im;
                    let i_fd = psi_md / g.xmd + idq.re;
                    let efd = g.xmd * i_fd;
                    let te = psi_d * idq.im - psi_q * idq.re;
                    let vt = (vdq.norm_sqr() + TERMINAL_EPS).sqrt();
                    let ex = &g.exciter;
                    let gov = &g.governor;
                    let name = format!("generator {id}");
                    if efd < ex.emin || efd > ex.emax {
                        return Err(Error::InitNonConvergence {
                            state: format!("gen{id}.efd"),
                            residual: efd,
                        });
                    }
                    if te < gov.vmin || te > gov.vmax {
                        return Err(Error::InitNonConvergence {
                            state: format!("gen{id}.gov_valve"),
                            residual: te,
                        });
                    }
                    let lead = efd / ex.k;
                    let vals = [
                        delta,
                        0.0,
                        g.xlfd * i_fd + psi_md,
                        psi_md,
                        psi_mq,
                        psi_mq,
                        te,
                        te,
                        lead,
                        efd,
                    ];
                    x[o..o + GENERATOR_STATES.len()].copy_from_slice(&vals);
                    log::debug!("{name}: delta {delta:.6} efd {efd:.6} pm {te:.6}");
                    gen_setpoints.push(GeneratorSetpoints {
                        p_ref: te,
                        v_ref: vt + lead,
                    });
                }
                Owner::Ibr(id) => {
                    let ibr = case.ibrs.iter().find(|i| i.id == *id).unwrap();
                    let delta = v.arg();
                    let rot = Complex64::from_polar(1.0, -delta);
                    let idq = i_dev * rot;
                    let vd = v.norm();
                    let (p, q) = (vd * idq.re, -vd * idq.im);
                    let vals = [
                        delta,
                        0.0,
                        p,
                        q,
                        idq.re,
                        -idq.im,
                        ibr.filter_r * idq.re,
                        ibr.filter_r * idq.im,
                    ];
                    x[o..o + IBR_STATES.len()].copy_from_slice(&vals);
                    ibr_setpoints.push(IbrSetpoints {
                        p_ref: p,
                        q_ref: q,
                        v_ref: vd,
                    });
                }
                _ => unreachable!(),
            }
        }

        let reference = match case.reference_device() {
            DeviceRef::Generator(id) => layout.source_index(Owner::Generator(id)),
            DeviceRef::Ibr(id) => layout.source_index(Owner::Ibr(id)),
        }
        .ok_or_else(|| Error::UnknownElement(format!("reference device {}", case.reference_device())))?;

        let mut model = Self {
            case,
            layout,
            network,
            devices: Vec::new(),
            gen_setpoints,
            ibr_setpoints,
            injections: Vec::new(),
            reference,
            operating_point: x,
            power_flow,
            extra_damping: 0.0,
            rhs_calls: AtomicU64::new(0),
            coefficient_calls: AtomicU64::new(0),
        };
        model.devices = model.record_devices(&vec![true; model.layout.n_sources()]);
        Ok(model)
    }

    fn record_devices(&self, active: &[bool]) -> Vec<Device> {
        let case = &self.case;
        let layout = &self.layout;
        let omega0 = case.omega0();
        let base = case.system.base_mva;
        let mut out = Vec::new();
        for (s, owner) in layout.sources().iter().enumerate() {
            let b = TapeBuilder::new();
            let (bus, n_slow) = match owner {
                Owner::Generator(id) => {
                    let k = case.generators.iter().position(|g| g.id == *id).unwrap();
                    (case.generators[k].bus, GENERATOR_STATES.len())
                }
                Owner::Ibr(id) => {
                    let k = case.ibrs.iter().position(|i| i.id == *id).unwrap();
                    (case.ibrs[k].bus, IBR_STATES.len())
                }
                _ => unreachable!(),
            };
            let node = case.bus_index(bus).unwrap();
            let slots = DeviceSlots {
                slow: layout.source_slow_offset(s),
                v: [0, 1, 2].map(|p| layout.v_index(node, p)),
                i: [0, 1, 2].map(|p| layout.i_index(s, p)),
            };
            match owner {
                Owner::Generator(id) => {
                    let k = case.generators.iter().position(|g| g.id == *id).unwrap();
                    let g = &case.generators[k];
                    record_generator(
                        &b,
                        g,
                        &self.gen_setpoints[k],
                        slots,
                        omega0,
                        base / g.mva,
                        self.extra_damping,
                    );
                }
                Owner::Ibr(id) => {
                    let k = case.ibrs.iter().position(|i| i.id == *id).unwrap();
                    let ibr = &case.ibrs[k];
                    record_ibr(&b, ibr, &self.ibr_setpoints[k], slots, omega0, base / ibr.mva);
                }
                _ => unreachable!(),
            }
            out.push(Device {
                owner: *owner,
                node,
                slots,
                n_slow,
                tape: b.finish(),
                active: active[s],
            });
        }
        out
    }

    /// Adds `damping` (pu) to every machine's swing damping; used only to
    /// settle initial conditions.
    pub fn set_extra_damping(&mut self, damping: f64) {
        self.extra_damping = damping;
        let active: Vec<bool> = self.devices.iter().map(|d| d.active).collect();
        self.devices = self.record_devices(&active);
    }

    pub fn case(&self) -> &PowerSystemCase {
        &self.case
    }

    pub fn layout(&self) -> &StateLayout {
        &self.layout
    }

    pub fn network(&self) -> &NetworkMatrices {
        &self.network
    }

    pub fn devices(&self) -> &[Device] {
        &self.devices
    }

    pub fn injections(&self) -> &[Injection] {
        &self.injections
    }

    pub fn power_flow(&self) -> &PowerFlowSolution {
        &self.power_flow
    }

    pub fn generator_setpoints(&self) -> &[GeneratorSetpoints] {
        &self.gen_setpoints
    }

    pub fn ibr_setpoints(&self) -> &[IbrSetpoints] {
        &self.ibr_setpoints
    }

    pub fn omega0(&self) -> f64 {
        self.case.omega0()
    }

    pub fn dim(&self) -> usize {
        self.layout.len()
    }

    /// Source index of the device supplying the global Park angle.
    pub fn reference_source(&self) -> usize {
        self.reference
    }

    /// Power-flow steady state at `t = 0`.
    pub fn operating_point(&self) -> &[f64] {
        &self.operating_point
    }

    /// Number of right-hand-side evaluations since construction.
    pub fn rhs_calls(&self) -> u64 {
        self.rhs_calls.load(Ordering::Relaxed)
    }

    /// Number of Taylor-coefficient expansions since construction.
    pub fn coefficient_calls(&self) -> u64 {
        self.coefficient_calls.load(Ordering::Relaxed)
    }

    pub(crate) fn count_coefficients(&self) {
        self.coefficient_calls.fetch_add(1, Ordering::Relaxed);
    }

    pub fn reset_counters(&self) {
        self.rhs_calls.store(0, Ordering::Relaxed);
        self.coefficient_calls.store(0, Ordering::Relaxed);
    }

    /// Nodal current injections (`3N`) from source currents and active
    /// injection events.
    pub fn nodal_injection(&self, x: &[f64], t: f64, out: &mut [f64]) {
        out.fill(0.0);
        for d in &self.devices {
            if d.active {
                for p in 0..3 {
                    out[3 * d.node + p] += x[d.slots.i[p]];
                }
            }
        }
        for inj in &self.injections {
            out[3 * inj.node] += inj.value(t);
        }
    }

    /// Derivatives of every device state (slow states and terminal
    /// currents); network entries of `out` are left untouched.
    pub fn device_rhs(&self, x: &[f64], t: f64, work: &mut TapeWork, out: &mut [f64]) {
        for d in &self.devices {
            if d.active {
                d.tape.eval(x, t, work, out);
            } else {
                out[d.slow_range()].fill(0.0);
                for i in d.slots.i {
                    out[i] = 0.0;
                }
            }
        }
    }

    /// Full vector field `ẋ = f(x, t)`.
    pub fn rhs(&self, x: &[f64], t: f64, scratch: &mut RhsScratch, out: &mut [f64]) {
        self.rhs_calls.fetch_add(1, Ordering::Relaxed);
        self.device_rhs(x, t, &mut scratch.tape, out);
        let n3 = 3 * self.layout.n_nodes();
        scratch.injection.resize(n3, 0.0);
        self.nodal_injection(x, t, &mut scratch.injection);
        let v0 = self.layout.v_offset();
        let end = self.layout.i_offset();
        self.network.rhs(&x[v0..end], &scratch.injection, &mut out[v0..end]);
    }

    /// Convenience allocation wrapper around [`SystemModel::rhs`].
    pub fn rhs_vec(&self, x: &[f64], t: f64) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.rhs(x, t, &mut RhsScratch::default(), &mut out);
        out
    }

    /// Park angles of the global frame and of every source at `(x, t)`.
    pub fn park_angles(&self, x: &[f64], t: f64) -> ParkAngles {
        let omega0 = self.omega0();
        let mut sources = Vec::with_capacity(self.devices.len());
        let mut rates = Vec::with_capacity(self.devices.len());
        for (s, d) in self.devices.iter().enumerate() {
            let delta = x[d.angle_state()];
            let rate = if !d.active {
                omega0
            } else {
                match d.owner {
                    Owner::Generator(_) => omega0 * (1.0 + x[d.slots.slow + 1]),
                    Owner::Ibr(_) => {
                        let ibr = &self.case.ibrs[s - self.case.generators.len()];
                        let vabc = d.slots.v.map(|i| x[i]);
                        let vq = transforms::park(omega0 * t + delta, vabc)[2];
                        omega0 + ibr.pll_kp * vq + ibr.pll_ki * x[d.slots.slow + 1]
                    }
                    _ => unreachable!(),
                }
            };
            sources.push(omega0 * t + delta);
            rates.push(rate);
        }
        ParkAngles {
            global: sources[self.reference],
            global_rate: rates[self.reference],
            sources,
            source_rates: rates,
        }
    }

    /// Clamps limited controller states into their bounds.
    pub fn clamp_bounds(&self, x: &mut [f64]) {
        for d in self.devices.iter().filter(|d| d.active) {
            for &StateBound { state, lo, hi } in d.tape.bounds() {
                x[state] = x[state].clamp(lo, hi);
            }
        }
    }

    /// States frozen by generator trips, excluded from comparisons.
    pub fn excluded_states(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for d in self.devices.iter().filter(|d| !d.active) {
            out.extend(d.slow_range());
            out.extend(d.slots.i);
        }
        out
    }

    /// Applies a disturbance at time `t`, adjusting `x` where an element's
    /// states are forced (switched-out branches and tripped sources carry
    /// zero current).
    pub fn apply_event(&mut self, event: &Event, t: f64, x: &mut [f64]) -> Result<()> {
        match event {
            Event::Network(te) => {
                self.network = self.network.apply_topology_event(&self.case, te)?;
                for e in 0..self.network.n_edges() {
                    if !self.network.edge_active[e] {
                        for p in 0..3 {
                            x[self.layout.w_index(e, p)] = 0.0;
                        }
                    }
                }
            }
            Event::TripGenerator(id) => {
                let s = self
                    .layout
                    .source_index(Owner::Generator(*id))
                    .ok_or_else(|| Error::UnknownElement(format!("generator {id}")))?;
                if s == self.reference {
                    return Err(Error::Config(format!(
                        "generator {id} supplies the reference angle and cannot be tripped"
                    )));
                }
                self.devices[s].active = false;
                for i in self.devices[s].slots.i {
                    x[i] = 0.0;
                }
            }
            Event::Injection {
                bus,
                amplitude,
                frequency_hz,
            } => {
                let node = self
                    .case
                    .bus_index(*bus)
                    .ok_or_else(|| Error::UnknownElement(format!("bus {bus}")))?;
                self.injections.push(Injection {
                    node,
                    amplitude: *amplitude,
                    omega: TAU * frequency_hz,
                    start: t,
                });
            }
        }
        Ok(())
    }

    /// Name of the branch state triple for a line between two buses, if any.
    pub fn branch_between(&self, a: u32, b: u32) -> Option<usize> {
        self.network.edge_kinds().iter().position(|k| match k {
            EdgeKind::Line(id) => {
                let l = self.case.lines.iter().find(|l| l.id == *id).unwrap();
                (l.from_bus == a && l.to_bus == b) || (l.from_bus == b && l.to_bus == a)
            }
            EdgeKind::Load(_) => false,
        })
    }
}

/// Reusable buffers for [`SystemModel::rhs`].
#[derive(Debug, Clone, Default)]
pub struct RhsScratch {
    pub(crate) tape: TapeWork,
    injection: Vec<f64>,
}
