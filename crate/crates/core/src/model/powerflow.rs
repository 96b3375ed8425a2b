//! Balanced positive-sequence power flow used to find the operating point.
//!
//! The admittance matrix is formed from the same per-unit elements as the
//! EMT network (`G + jω₀C` shunts, `1/(R + jω₀L)` branches), so the phasor
//! solution is an exact steady state of the time-domain network.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::network::NetworkMatrices;

use super::case::PowerSystemCase;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BusType {
    Slack,
    Pv,
    Pq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerFlowSolution {
    /// Bus voltage phasors (peak-phase per-unit), node order.
    pub voltages: Vec<Complex64>,
    /// Complex power delivered by each source (system base), source order.
    pub source_power: Vec<Complex64>,
    pub iterations: usize,
}

/// Complex admittance matrix of the network at frequency `omega0`.
pub fn admittance_matrix(net: &NetworkMatrices, omega0: f64) -> DMatrix<Complex64> {
    let n = net.n_nodes();
    let mut y = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for i in 0..n {
        y[(i, i)] += Complex64::new(net.node_g[i], omega0 * net.node_c[i]);
    }
    for e in 0..net.n_edges() {
        if !net.edge_active[e] {
            continue;
        }
        let ye = Complex64::new(net.edge_r[e], omega0 * net.edge_l[e]).inv();
        let (f, t) = net.incidence().edge(e);
        y[(f, f)] += ye;
        if let Some(t) = t {
            y[(t, t)] += ye;
            y[(f, t)] -= ye;
            y[(t, f)] -= ye;
        }
    }
    y
}

/// Newton-Raphson power flow.  Generators are PV buses (the slack machine,
/// or the first generator when none is flagged, fixes the angle reference);
/// IBRs are PQ injections.
pub fn solve_power_flow(case: &PowerSystemCase, net: &NetworkMatrices) -> Result<PowerFlowSolution> {
    const MAX_ITER: usize = 30;
    const TOL: f64 = 1e-12;

    let n = case.buses.len();
    let base = case.system.base_mva;
    let y = admittance_matrix(net, case.omega0());
    let mut kind = vec![BusType::Pq; n];
    let mut p_spec = vec![0.0; n];
    let mut q_spec = vec![0.0; n];
    let mut vm = vec![1.0; n];

    let slack_id = case
        .generators
        .iter()
        .find(|g| g.slack)
        .or(case.generators.first())
        .map(|g| g.id)
        .ok_or_else(|| Error::Config("power flow needs at least one synchronous generator".into()))?;
    for g in &case.generators {
        let i = case.bus_index(g.bus).unwrap();
        kind[i] = if g.id == slack_id { BusType::Slack } else { BusType::Pv };
        p_spec[i] = g.p_mw / base;
        vm[i] = g.v_set;
    }
    for ibr in &case.ibrs {
        let i = case.bus_index(ibr.bus).unwrap();
        p_spec[i] = ibr.p_mw / base;
        q_spec[i] = ibr.q_mvar / base;
    }
    let pvpq: Vec<usize> = (0..n).filter(|&i| kind[i] != BusType::Slack).collect();
    let pq: Vec<usize> = (0..n).filter(|&i| kind[i] == BusType::Pq).collect();
    let mut va = vec![0.0; n];

    let voltages = |vm: &[f64], va: &[f64]| -> DVector<Complex64> {
        DVector::from_iterator(n, (0..n).map(|i| Complex64::from_polar(vm[i], va[i])))
    };

    let mut iterations = 0;
    let mut mismatch;
    loop {
        let v = voltages(&vm, &va);
        let ibus = &y * &v;
        let s: Vec<Complex64> = (0..n).map(|i| v[i] * ibus[i].conj()).collect();
        let mut f = Vec::with_capacity(pvpq.len() + pq.len());
        for &i in &pvpq {
            f.push(p_spec[i] - s[i].re);
        }
        for &i in &pq {
            f.push(q_spec[i] - s[i].im);
        }
        mismatch = f.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if !mismatch.is_finite() {
            break;
        }
        if mismatch < TOL {
            break;
        }
        if iterations == MAX_ITER {
            break;
        }
        iterations += 1;

        // dS/dVa = j diag(V) conj(diag(I) - Y diag(V)),
        // dS/dVm = diag(V) conj(Y diag(V/|V|)) + conj(diag(I)) diag(V/|V|)
        let vn: Vec<Complex64> = (0..n).map(|i| v[i] / vm[i]).collect();
        let j = Complex64::new(0.0, 1.0);
        let ds_dva = |r: usize, c: usize| {
            let mut t = -y[(r, c)] * v[c];
            if r == c {
                t += ibus[r];
            }
            j * v[r] * t.conj()
        };
        let ds_dvm = |r: usize, c: usize| {
            let mut t = v[r] * (y[(r, c)] * vn[c]).conj();
            if r == c {
                t += ibus[r].conj() * vn[r];
            }
            t
        };
        let m = pvpq.len() + pq.len();
        let mut jac = DMatrix::<f64>::zeros(m, m);
        for (ri, &r) in pvpq.iter().enumerate() {
            for (ci, &c) in pvpq.iter().enumerate() {
                jac[(ri, ci)] = ds_dva(r, c).re;
            }
            for (ci, &c) in pq.iter().enumerate() {
                jac[(ri, pvpq.len() + ci)] = ds_dvm(r, c).re;
            }
        }
        for (ri, &r) in pq.iter().enumerate() {
            for (ci, &c) in pvpq.iter().enumerate() {
                jac[(pvpq.len() + ri, ci)] = ds_dva(r, c).im;
            }
            for (ci, &c) in pq.iter().enumerate() {
                jac[(pvpq.len() + ri, pvpq.len() + ci)] = ds_dvm(r, c).im;
            }
        }
        let dx = match jac.lu().solve(&DVector::from_vec(f)) {
            Some(dx) => dx,
            None => break,
        };
        for (k, &i) in pvpq.iter().enumerate() {
            va[i] += dx[k];
        }
        for (k, &i) in pq.iter().enumerate() {
            vm[i] += dx[pvpq.len() + k];
            if !(vm[i] > 0.05) {
                // voltage collapse: the case cannot supply its loads
                return Err(Error::PowerFlow { iterations, mismatch });
            }
        }
    }
    if !(mismatch < TOL * 1e3) {
        return Err(Error::PowerFlow { iterations, mismatch });
    }
    let v = voltages(&vm, &va);
    let ibus = &y * &v;
    let mut source_power = Vec::new();
    for g in &case.generators {
        let i = case.bus_index(g.bus).unwrap();
        source_power.push(v[i] * ibus[i].conj());
    }
    for ibr in &case.ibrs {
        let i = case.bus_index(ibr.bus).unwrap();
        source_power.push(v[i] * ibus[i].conj());
    }
    Ok(PowerFlowSolution {
        voltages: v.iter().copied().collect(),
        source_power,
        iterations,
    })
}
