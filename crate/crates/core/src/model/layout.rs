//! Flat state-vector layout with the slow/fast partition.
//!
//! `x = [x^I | v_abc, w_abc, i_abc]`: device internal states first
//! (generators by id, then IBRs by id), then one three-phase triple per bus
//! voltage, per branch current (lines by id, then R-L loads by id) and per
//! source terminal current.

use std::collections::HashMap;

use super::case::{LoadKind, PowerSystemCase};

/// Timescale tag of a state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Timescale {
    Slow,
    Fast,
}

/// Case element a state belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Owner {
    Generator(u32),
    Ibr(u32),
    Bus(u32),
    Line(u32),
    Load(u32),
}

/// Network branch: a line, or an R-L load modelled as a branch to ground.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    Line(u32),
    Load(u32),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateInfo {
    pub name: String,
    pub owner: Owner,
    pub timescale: Timescale,
}

/// Slow state names of a synchronous generator, in layout order.  `delta`
/// is the rotor angle (rad) relative to `ω₀ t`, `domega` the speed
/// deviation in per-unit of `ω₀`.
pub const GENERATOR_STATES: [&str; 10] = [
    "delta", "domega", "psi_fd", "psi_1d", "psi_1q", "psi_2q", "gov_valve", "gov_reheat", "exc_leadlag", "efd",
];

/// Slow state names of a grid-following IBR, in layout order.
pub const IBR_STATES: [&str; 8] = ["delta_pll", "phi", "p_meas", "q_meas", "x_p", "x_q", "x_id", "x_iq"];

pub const PHASES: [char; 3] = ['a', 'b', 'c'];

#[derive(Debug, Clone, PartialEq)]
pub struct StateLayout {
    states: Vec<StateInfo>,
    index: HashMap<String, usize>,
    n_slow: usize,
    buses: Vec<u32>,
    edges: Vec<EdgeKind>,
    sources: Vec<Owner>,
    source_slow: Vec<usize>,
}

impl StateLayout {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[StateInfo] {
        &self.states
    }

    pub fn name(&self, i: usize) -> &str {
        &self.states[i].name
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.states.iter().map(|s| s.name.as_str())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn n_slow(&self) -> usize {
        self.n_slow
    }

    pub fn n_fast(&self) -> usize {
        self.len() - self.n_slow
    }

    pub fn n_nodes(&self) -> usize {
        self.buses.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_sources(&self) -> usize {
        self.sources.len()
    }

    /// Number of three-phase triples in the fast block.
    pub fn n_triples(&self) -> usize {
        self.n_nodes() + self.n_edges() + self.n_sources()
    }

    pub fn fast_offset(&self) -> usize {
        self.n_slow
    }

    pub fn v_offset(&self) -> usize {
        self.n_slow
    }

    pub fn w_offset(&self) -> usize {
        self.n_slow + 3 * self.n_nodes()
    }

    pub fn i_offset(&self) -> usize {
        self.w_offset() + 3 * self.n_edges()
    }

    pub fn v_index(&self, node: usize, phase: usize) -> usize {
        self.v_offset() + 3 * node + phase
    }

    pub fn w_index(&self, edge: usize, phase: usize) -> usize {
        self.w_offset() + 3 * edge + phase
    }

    pub fn i_index(&self, source: usize, phase: usize) -> usize {
        self.i_offset() + 3 * source + phase
    }

    /// Bus ids in node order.
    pub fn buses(&self) -> &[u32] {
        &self.buses
    }

    pub fn edges(&self) -> &[EdgeKind] {
        &self.edges
    }

    /// Source owners in source order (generators, then IBRs).
    pub fn sources(&self) -> &[Owner] {
        &self.sources
    }

    /// Offset of the first slow state of source `s`.
    pub fn source_slow_offset(&self, s: usize) -> usize {
        self.source_slow[s]
    }

    pub fn source_index(&self, owner: Owner) -> Option<usize> {
        self.sources.iter().position(|o| *o == owner)
    }

    /// Source index of fast triple `triple`, if it is a terminal current.
    pub fn source_of_triple(&self, triple: usize) -> Option<usize> {
        triple.checked_sub(self.n_nodes() + self.n_edges())
    }

    /// Indices of every state owned by `owner`.
    pub fn owned_by(&self, owner: Owner) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.states[i].owner == owner).collect()
    }
}

/// Builds the state layout of a validated case.
pub fn build_layout(case: &PowerSystemCase) -> StateLayout {
    let mut states = Vec::new();
    let mut push = |name: String, owner: Owner, timescale: Timescale| {
        states.push(StateInfo { name, owner, timescale });
    };
    let mut source_slow = Vec::new();
    let mut offset = 0;
    for g in &case.generators {
        source_slow.push(offset);
        for s in GENERATOR_STATES {
            push(format!("gen{}.{s}", g.id), Owner::Generator(g.id), Timescale::Slow);
        }
        offset += GENERATOR_STATES.len();
    }
    for ibr in &case.ibrs {
        source_slow.push(offset);
        for s in IBR_STATES {
            push(format!("ibr{}.{s}", ibr.id), Owner::Ibr(ibr.id), Timescale::Slow);
        }
        offset += IBR_STATES.len();
    }
    let n_slow = offset;

    let buses: Vec<u32> = case.buses.iter().map(|b| b.id).collect();
    for b in &buses {
        for p in PHASES {
            push(format!("v.bus{b}.{p}"), Owner::Bus(*b), Timescale::Fast);
        }
    }
    let mut edges: Vec<EdgeKind> = case.lines.iter().map(|l| EdgeKind::Line(l.id)).collect();
    edges.extend(case.loads.iter().filter(|l| l.kind == LoadKind::Rl).map(|l| EdgeKind::Load(l.id)));
    for e in &edges {
        let (label, owner) = match e {
            EdgeKind::Line(id) => (format!("line{id}"), Owner::Line(*id)),
            EdgeKind::Load(id) => (format!("load{id}"), Owner::Load(*id)),
        };
        for p in PHASES {
            push(format!("w.{label}.{p}"), owner, Timescale::Fast);
        }
    }
    let mut sources: Vec<Owner> = case.generators.iter().map(|g| Owner::Generator(g.id)).collect();
    sources.extend(case.ibrs.iter().map(|i| Owner::Ibr(i.id)));
    for s in &sources {
        let label = match s {
            Owner::Generator(id) => format!("gen{id}"),
            Owner::Ibr(id) => format!("ibr{id}"),
            _ => unreachable!(),
        };
        for p in PHASES {
            push(format!("i.{label}.{p}"), *s, Timescale::Fast);
        }
    }
    let index = states.iter().enumerate().map(|(i, s)| (s.name.clone(), i)).collect();
    StateLayout {
        states,
        index,
        n_slow,
        buses,
        edges,
        sources,
        source_slow,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::case::load_case;

    const SMIB: &str = r#"
[[buses]]
id = 1
nominal_kv = 20.0
shunt_capacitance = 1e-6

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
"#;

    #[test]
    fn single_machine_fast_block_is_six() {
        let case = load_case(SMIB).unwrap();
        let l = build_layout(&case);
        assert_eq!(l.n_fast(), 6);
        assert_eq!(l.n_slow(), GENERATOR_STATES.len());
        assert_eq!(l.len(), l.n_slow() + l.n_fast());
    }

    #[test]
    fn names_round_trip() {
        let case = load_case(SMIB).unwrap();
        let l = build_layout(&case);
        for i in 0..l.len() {
            assert_eq!(l.index_of(l.name(i)), Some(i));
        }
        assert_eq!(l.index_of("v.bus1.b"), Some(l.v_index(0, 1)));
        assert_eq!(l.index_of("i.gen1.c"), Some(l.i_index(0, 2)));
    }
}
