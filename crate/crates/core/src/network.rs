//! Three-phase network state-space operators.
//!
//! With node voltages `v` and branch currents `w` (per phase, per-unit on
//! the bus voltage level, time in seconds) the network obeys
//!
//! ```text
//! C v̇ = -G v - B₃ w + i
//! L ẇ =  B₃ᵀ v - R w
//! ```
//!
//! where `B₃` is the phase-expanded incidence matrix and `i` the source
//! current injections.  Branches are oriented from the lower to the higher
//! bus id; an R-L load is a branch from its bus to ground, so its column of
//! `B` has a single `+1`.  Matrices are diagonal and stored as vectors; the
//! dense `A_eq`, `B_eq` forms are available for analysis and tests.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::case::{LoadKind, PowerSystemCase};
use crate::model::layout::EdgeKind;

/// Default fault conductance per phase (S).
pub const DEFAULT_FAULT_CONDUCTANCE: f64 = 1.0e4;

/// Node-branch incidence with ground-terminated branches allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceMatrix {
    n_nodes: usize,
    /// `(from, to)` node indices per branch; `None` is ground.
    edges: Vec<(usize, Option<usize>)>,
}

impl IncidenceMatrix {
    pub fn new(n_nodes: usize, edges: Vec<(usize, Option<usize>)>) -> Self {
        Self { n_nodes, edges }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edge(&self, e: usize) -> (usize, Option<usize>) {
        self.edges[e]
    }

    /// `N × E` signed incidence matrix.
    pub fn dense(&self) -> DMatrix<f64> {
        let mut b = DMatrix::zeros(self.n_nodes, self.edges.len());
        for (e, &(f, t)) in self.edges.iter().enumerate() {
            b[(f, e)] = 1.0;
            if let Some(t) = t {
                b[(t, e)] = -1.0;
            }
        }
        b
    }

    /// `3N × 3E` expansion: every entry `b` becomes `b·I₃`.
    pub fn dense3(&self) -> DMatrix<f64> {
        let b = self.dense();
        let mut b3 = DMatrix::zeros(3 * self.n_nodes, 3 * self.edges.len());
        for i in 0..self.n_nodes {
            for e in 0..self.edges.len() {
                for p in 0..3 {
                    b3[(3 * i + p, 3 * e + p)] = b[(i, e)];
                }
            }
        }
        b3
    }
}

/// Builds the incidence matrix in layout branch order (lines by id, then
/// R-L loads by id).
pub fn build_incidence(case: &PowerSystemCase) -> Result<IncidenceMatrix> {
    let node = |id: u32| case.bus_index(id).ok_or(Error::DanglingBus { device: "branch".into(), bus: id });
    let mut edges = Vec::new();
    for l in &case.lines {
        let (a, b) = (node(l.from_bus)?, node(l.to_bus)?);
        let (lo, hi) = if l.from_bus < l.to_bus { (a, b) } else { (b, a) };
        edges.push((lo, Some(hi)));
    }
    for l in case.loads.iter().filter(|l| l.kind == LoadKind::Rl) {
        edges.push((node(l.bus)?, None));
    }
    let inc = IncidenceMatrix::new(case.buses.len(), edges);
    check_connected(case, &inc)?;
    Ok(inc)
}

fn check_connected(case: &PowerSystemCase, inc: &IncidenceMatrix) -> Result<()> {
    let n = inc.n_nodes();
    if n == 0 {
        return Err(Error::EmptyNetwork);
    }
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for &(f, t) in &inc.edges {
        if let Some(t) = t {
            let (a, b) = (find(&mut parent, f), find(&mut parent, t));
            parent[a] = b;
        }
    }
    let root = find(&mut parent, 0);
    for i in 1..n {
        if find(&mut parent, i) != root {
            return Err(Error::Disconnected {
                root: case.buses[0].id,
                bus: case.buses[i].id,
            });
        }
    }
    Ok(())
}

/// Switching state of the network elements.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TopologyState {
    /// Applied faults: bus id → conductance per phase (S).
    pub faults: BTreeMap<u32, f64>,
    pub tripped_lines: BTreeSet<u32>,
    pub disconnected_loads: BTreeSet<u32>,
}

/// Network switching event.
#[derive(Debug, Clone, PartialEq)]
pub enum TopologyEvent {
    ApplyFault { bus: u32, conductance: f64 },
    ClearFault { bus: u32 },
    TripLine(u32),
    DisconnectLoad(u32),
    ReconnectLoad(u32),
}

/// Assembled per-unit network parameters for one topology.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkMatrices {
    incidence: IncidenceMatrix,
    edge_kinds: Vec<EdgeKind>,
    /// Per-node capacitance (s, per-unit), identical on the three phases.
    pub node_c: Vec<f64>,
    /// Per-node shunt conductance (per-unit).
    pub node_g: Vec<f64>,
    /// Per-branch inductance (s, per-unit).
    pub edge_l: Vec<f64>,
    pub edge_r: Vec<f64>,
    /// Switched-out branches carry no current.
    pub edge_active: Vec<bool>,
    topology: TopologyState,
}

impl NetworkMatrices {
    pub fn incidence(&self) -> &IncidenceMatrix {
        &self.incidence
    }

    pub fn topology(&self) -> &TopologyState {
        &self.topology
    }

    pub fn edge_kinds(&self) -> &[EdgeKind] {
        &self.edge_kinds
    }

    pub fn n_nodes(&self) -> usize {
        self.node_c.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edge_l.len()
    }

    /// Dimension of `ψ = [v, w]`.
    pub fn dim(&self) -> usize {
        3 * (self.n_nodes() + self.n_edges())
    }

    /// `dψ/dt = A_eq ψ + B_eq λ` evaluated structurally.  `psi` is
    /// `[v (3N), w (3E)]`; `injection` holds the `3N` nodal currents (the
    /// nonzero part of `λ`).
    pub fn rhs(&self, psi: &[f64], injection: &[f64], out: &mut [f64]) {
        let n = self.n_nodes();
        let (v, w) = psi.split_at(3 * n);
        let (dv, dw) = out.split_at_mut(3 * n);
        for i in 0..n {
            for p in 0..3 {
                dv[3 * i + p] = injection[3 * i + p] - self.node_g[i] * v[3 * i + p];
            }
        }
        for (e, &(f, t)) in self.incidence.edges.iter().enumerate() {
            if !self.edge_active[e] {
                dw[3 * e..3 * e + 3].fill(0.0);
                continue;
            }
            for p in 0..3 {
                let we = w[3 * e + p];
                dv[3 * f + p] -= we;
                let mut drop = v[3 * f + p] - self.edge_r[e] * we;
                if let Some(t) = t {
                    dv[3 * t + p] += we;
                    drop -= v[3 * t + p];
                }
                dw[3 * e + p] = drop / self.edge_l[e];
            }
        }
        for i in 0..n {
            let inv = 1.0 / self.node_c[i];
            for p in 0..3 {
                dv[3 * i + p] *= inv;
            }
        }
    }

    /// Dense drift `[[-G, -B₃], [B₃ᵀ, -R]]` (switched-out branch columns and
    /// rows are zero).
    pub fn drift(&self) -> DMatrix<f64> {
        let n3 = 3 * self.n_nodes();
        let e3 = 3 * self.n_edges();
        let mut b3 = self.incidence.dense3();
        for (e, active) in self.edge_active.iter().enumerate() {
            if !active {
                for p in 0..3 {
                    b3.column_mut(3 * e + p).fill(0.0);
                }
            }
        }
        let mut d = DMatrix::zeros(n3 + e3, n3 + e3);
        for i in 0..self.n_nodes() {
            for p in 0..3 {
                d[(3 * i + p, 3 * i + p)] = -self.node_g[i];
            }
        }
        for e in 0..self.n_edges() {
            if self.edge_active[e] {
                for p in 0..3 {
                    d[(n3 + 3 * e + p, n3 + 3 * e + p)] = -self.edge_r[e];
                }
            }
        }
        d.view_mut((0, n3), (n3, e3)).copy_from(&(-&b3));
        d.view_mut((n3, 0), (e3, n3)).copy_from(&b3.transpose());
        d
    }

    /// Diagonal of `diag(C, L)` in `ψ` order.
    pub fn storage_diagonal(&self) -> Vec<f64> {
        let mut m = Vec::with_capacity(self.dim());
        for c in &self.node_c {
            m.extend([*c; 3]);
        }
        for l in &self.edge_l {
            m.extend([*l; 3]);
        }
        m
    }

    /// `A_eq = diag(C, L)⁻¹ · drift`.
    pub fn a_eq(&self) -> DMatrix<f64> {
        let mut a = self.drift();
        for (r, m) in self.storage_diagonal().iter().enumerate() {
            a.row_mut(r).scale_mut(1.0 / m);
        }
        a
    }

    /// `B_eq = diag(C, L)⁻¹`.
    pub fn b_eq(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            self.dim(),
            self.storage_diagonal().into_iter().map(|m| 1.0 / m),
        ))
    }

    /// Re-assembles the network after a switching event.
    pub fn apply_topology_event(&self, case: &PowerSystemCase, event: &TopologyEvent) -> Result<Self> {
        let mut topo = self.topology.clone();
        match event {
            TopologyEvent::ApplyFault { bus, conductance } => {
                case.bus_index(*bus).ok_or_else(|| Error::UnknownElement(format!("bus {bus}")))?;
                if !(*conductance > 0.0) || !conductance.is_finite() {
                    return Err(Error::Config(format!("fault conductance must be positive, got {conductance}")));
                }
                topo.faults.insert(*bus, *conductance);
            }
            TopologyEvent::ClearFault { bus } => {
                if topo.faults.remove(bus).is_none() {
                    return Err(Error::UnknownElement(format!("no fault applied at bus {bus}")));
                }
            }
            TopologyEvent::TripLine(id) => {
                if !case.lines.iter().any(|l| l.id == *id) {
                    return Err(Error::UnknownElement(format!("line {id}")));
                }
                topo.tripped_lines.insert(*id);
            }
            TopologyEvent::DisconnectLoad(id) => {
                if !case.loads.iter().any(|l| l.id == *id) {
                    return Err(Error::UnknownElement(format!("load {id}")));
                }
                topo.disconnected_loads.insert(*id);
            }
            TopologyEvent::ReconnectLoad(id) => {
                if !case.loads.iter().any(|l| l.id == *id) {
                    return Err(Error::UnknownElement(format!("load {id}")));
                }
                topo.disconnected_loads.remove(id);
            }
        }
        assemble_with(case, &self.incidence, &topo)
    }

    /// Plain-text dump: one `name value` block per parameter vector.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let mut block = |name: &str, v: &[f64]| {
            let _ = writeln!(s, "# {name} ({})", v.len());
            for x in v {
                let _ = writeln!(s, "{x:.17e}");
            }
        };
        block("node_c", &self.node_c);
        block("node_g", &self.node_g);
        block("edge_l", &self.edge_l);
        block("edge_r", &self.edge_r);
        let active: Vec<f64> = self.edge_active.iter().map(|a| f64::from(u8::from(*a))).collect();
        block("edge_active", &active);
        s
    }
}

/// Assembles the network of the unswitched case.
pub fn assemble(case: &PowerSystemCase, incidence: &IncidenceMatrix) -> Result<NetworkMatrices> {
    assemble_with(case, incidence, &TopologyState::default())
}

/// Assembles the network for a given switching state.
pub fn assemble_with(
    case: &PowerSystemCase,
    incidence: &IncidenceMatrix,
    topology: &TopologyState,
) -> Result<NetworkMatrices> {
    let n = case.buses.len();
    let mut node_c: Vec<f64> = case
        .buses
        .iter()
        .map(|b| b.shunt_capacitance * case.z_base(b.id))
        .collect();
    let mut node_g: Vec<f64> = case
        .buses
        .iter()
        .map(|b| b.shunt_conductance * case.z_base(b.id))
        .collect();
    let mut edge_kinds = Vec::new();
    let mut edge_l = Vec::new();
    let mut edge_r = Vec::new();
    let mut edge_active = Vec::new();

    for l in &case.lines {
        let z = case.z_base(l.from_bus);
        let active = !topology.tripped_lines.contains(&l.id);
        if active {
            let half = 0.5 * l.shunt_capacitance * z;
            node_c[case.bus_index(l.from_bus).unwrap()] += half;
            node_c[case.bus_index(l.to_bus).unwrap()] += half;
        }
        edge_kinds.push(EdgeKind::Line(l.id));
        edge_l.push(l.inductance / z);
        edge_r.push(l.resistance / z);
        edge_active.push(active);
    }
    for l in &case.loads {
        let z = case.z_base(l.bus);
        let connected = !topology.disconnected_loads.contains(&l.id);
        match l.kind {
            LoadKind::Rl => {
                edge_kinds.push(EdgeKind::Load(l.id));
                edge_l.push(l.inductance / z);
                edge_r.push(l.resistance / z);
                edge_active.push(connected);
            }
            LoadKind::Rc if connected => {
                let i = case.bus_index(l.bus).unwrap();
                node_g[i] += z / l.resistance;
                node_c[i] += l.capacitance * z;
            }
            LoadKind::Rc => {}
        }
    }
    for (bus, g) in &topology.faults {
        let i = case
            .bus_index(*bus)
            .ok_or_else(|| Error::UnknownElement(format!("bus {bus}")))?;
        node_g[i] += g * case.z_base(*bus);
    }
    if incidence.n_nodes() != n || incidence.n_edges() != edge_l.len() {
        return Err(Error::Dimension {
            expected: n + edge_l.len(),
            got: incidence.n_nodes() + incidence.n_edges(),
        });
    }
    for (i, c) in node_c.iter().enumerate() {
        if !(*c > 0.0) || !c.is_finite() {
            return Err(Error::SingularElement(format!(
                "bus {} has no capacitance (add shunt_capacitance or line charging)",
                case.buses[i].id
            )));
        }
    }
    for (e, l) in edge_l.iter().enumerate() {
        if !(*l > 0.0) || !l.is_finite() {
            return Err(Error::SingularElement(format!("branch {e} has zero inductance")));
        }
    }
    Ok(NetworkMatrices {
        incidence: incidence.clone(),
        edge_kinds,
        node_c,
        node_g,
        edge_l,
        edge_r,
        edge_active,
        topology: topology.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::case::load_case;

    fn two_bus() -> PowerSystemCase {
        load_case(
            r#"
[system]
base_mva = 100.0

[[buses]]
id = 1
nominal_kv = 10.0
shunt_capacitance = 2e-4
shunt_conductance = 0.01

[[buses]]
id = 2
nominal_kv = 10.0
shunt_capacitance = 1e-4

[[lines]]
id = 1
from_bus = 2
to_bus = 1
resistance = 0.1
inductance = 1e-3

[[loads]]
id = 1
bus = 2
kind = "rl"
resistance = 2.0
inductance = 5e-3

[[generators]]
id = 1
bus = 1
mva = 100.0
h = 3.0
ra = 0.003
xl = 0.15
xmd = 1.6
xmq = 1.5
xlfd = 0.1
rfd = 0.0006
xl1d = 0.1
r1d = 0.02
xl1q = 0.45
r1q = 0.013
xl2q = 0.06
r2q = 0.02
v_set = 1.0
slack = true
"#,
        )
        .unwrap()
    }

    #[test]
    fn single_edge_incidence() {
        let inc = IncidenceMatrix::new(2, vec![(0, Some(1))]);
        let b = inc.dense();
        assert_eq!(b[(0, 0)], 1.0);
        assert_eq!(b[(1, 0)], -1.0);
        let b3 = inc.dense3();
        for p in 0..3 {
            assert_eq!(b3[(p, p)], 1.0);
            assert_eq!(b3[(3 + p, p)], -1.0);
        }
    }

    #[test]
    fn orientation_is_low_to_high() {
        let case = two_bus();
        let inc = build_incidence(&case).unwrap();
        assert_eq!(inc.edge(0), (0, Some(1)));
        assert_eq!(inc.edge(1), (1, None));
    }

    #[test]
    fn structured_rhs_matches_dense() {
        let case = two_bus();
        let inc = build_incidence(&case).unwrap();
        let net = assemble(&case, &inc).unwrap();
        let dim = net.dim();
        let psi: Vec<f64> = (0..dim).map(|i| (i as f64 * 0.37).sin()).collect();
        let inj: Vec<f64> = (0..3 * net.n_nodes()).map(|i| (i as f64 * 1.1).cos()).collect();
        let mut out = vec![0.0; dim];
        net.rhs(&psi, &inj, &mut out);
        let mut lambda = vec![0.0; dim];
        lambda[..inj.len()].copy_from_slice(&inj);
        let want = net.a_eq() * nalgebra::DVector::from_vec(psi) + net.b_eq() * nalgebra::DVector::from_vec(lambda);
        for i in 0..dim {
            assert!((out[i] - want[i]).abs() < 1e-9 * (1.0 + want[i].abs()));
        }
    }

    #[test]
    fn fault_round_trip_is_bitwise() {
        let case = two_bus();
        let inc = build_incidence(&case).unwrap();
        let net = assemble(&case, &inc).unwrap();
        let faulted = net
            .apply_topology_event(&case, &TopologyEvent::ApplyFault { bus: 1, conductance: 1e4 })
            .unwrap();
        let zb = case.z_base(1);
        let a0 = net.a_eq();
        let a1 = faulted.a_eq();
        assert!(((a1[(0, 0)] - a0[(0, 0)]) + 1e4 * zb / net.node_c[0]).abs() < 1e-6 * (1e4 * zb / net.node_c[0]));
        let cleared = faulted.apply_topology_event(&case, &TopologyEvent::ClearFault { bus: 1 }).unwrap();
        assert_eq!(cleared, net);
    }

    #[test]
    fn unknown_elements_are_rejected() {
        let case = two_bus();
        let net = assemble(&case, &build_incidence(&case).unwrap()).unwrap();
        assert!(matches!(
            net.apply_topology_event(&case, &TopologyEvent::TripLine(9)),
            Err(Error::UnknownElement(_))
        ));
        assert!(net
            .apply_topology_event(&case, &TopologyEvent::ClearFault { bus: 1 })
            .is_err());
    }
}
