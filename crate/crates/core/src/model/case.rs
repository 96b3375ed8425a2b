//! Power system case description and its text format.
//!
//! Cases are TOML documents with `[system]`, `[[buses]]`, `[[lines]]`,
//! `[[loads]]`, `[[generators]]` and `[[ibrs]]` sections.  Network data is in
//! SI units (line impedances referred to the `from_bus` voltage level);
//! machine and converter data are per-unit on the device rating.  The format
//! is documented in `docs/case-format.md`.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bus {
    pub id: u32,
    pub nominal_kv: f64,
    /// Per-phase shunt capacitance to ground (F), excluding line charging.
    #[serde(default)]
    pub shunt_capacitance: f64,
    /// Per-phase shunt conductance to ground (S).
    #[serde(default)]
    pub shunt_conductance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Line {
    pub id: u32,
    pub from_bus: u32,
    pub to_bus: u32,
    /// Series resistance per phase (ohm).
    pub resistance: f64,
    /// Series inductance per phase (H).
    pub inductance: f64,
    /// Total line-charging capacitance per phase (F), split between the ends.
    #[serde(default)]
    pub shunt_capacitance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LoadKind {
    /// Series R-L branch to ground.
    Rl,
    /// Parallel R-C shunt.
    Rc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Load {
    pub id: u32,
    pub bus: u32,
    pub kind: LoadKind,
    /// Ohm; series resistance for R-L loads, shunt resistance for R-C loads.
    pub resistance: f64,
    /// H, R-L loads only.
    #[serde(default)]
    pub inductance: f64,
    /// F, R-C loads only.
    #[serde(default)]
    pub capacitance: f64,
}

/// Single-reheat steam turbine governor (TGOV1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Governor {
    /// Permanent droop (pu).
    pub r: f64,
    /// Valve time constant (s).
    pub t1: f64,
    /// Reheat lead time constant (s).
    pub t2: f64,
    /// Reheat lag time constant (s).
    pub t3: f64,
    pub vmax: f64,
    pub vmin: f64,
    /// Turbine damping (pu).
    #[serde(default)]
    pub dt: f64,
}

impl Default for Governor {
    fn default() -> Self {
        Self {
            r: 0.05,
            t1: 0.5,
            t2: 2.1,
            t3: 7.0,
            vmax: 1.0,
            vmin: 0.0,
            dt: 0.0,
        }
    }
}

/// Simplified excitation system (SEXS).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Exciter {
    pub ta_tb: f64,
    pub tb: f64,
    pub k: f64,
    pub te: f64,
    pub emin: f64,
    pub emax: f64,
}

impl Default for Exciter {
    fn default() -> Self {
        Self {
            ta_tb: 0.1,
            tb: 10.0,
            k: 50.0,
            te: 0.1,
            emin: -5.0,
            emax: 5.0,
        }
    }
}

/// Synchronous machine in voltage-behind-reactance form.  Reactances and
/// resistances are per-unit on `mva`; inductances follow as `x / omega_0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynchronousGenerator {
    pub id: u32,
    pub bus: u32,
    pub mva: f64,
    /// Inertia constant (s).
    pub h: f64,
    /// Damping (pu).
    #[serde(default)]
    pub d: f64,
    /// Stator resistance.
    pub ra: f64,
    /// Stator leakage reactance.
    pub xl: f64,
    pub xmd: f64,
    pub xmq: f64,
    pub xlfd: f64,
    pub rfd: f64,
    pub xl1d: f64,
    pub r1d: f64,
    pub xl1q: f64,
    pub r1q: f64,
    pub xl2q: f64,
    pub r2q: f64,
    /// Scheduled active power (MW); ignored for the slack machine.
    #[serde(default)]
    pub p_mw: f64,
    /// Terminal voltage setpoint (pu).
    pub v_set: f64,
    #[serde(default)]
    pub slack: bool,
    #[serde(default)]
    pub governor: Governor,
    #[serde(default)]
    pub exciter: Exciter,
}

impl SynchronousGenerator {
    /// d-axis subtransient magnetizing reactance.
    pub fn xmd_sub(&self) -> f64 {
        1.0 / (1.0 / self.xmd + 1.0 / self.xlfd + 1.0 / self.xl1d)
    }

    pub fn xmq_sub(&self) -> f64 {
        1.0 / (1.0 / self.xmq + 1.0 / self.xl1q + 1.0 / self.xl2q)
    }

    /// Diagonal of the 0dq subtransient reactance `[x0, x''d, x''q]`.
    pub fn subtransient_dq(&self) -> [f64; 3] {
        [self.xl, self.xl + self.xmd_sub(), self.xl + self.xmq_sub()]
    }
}

/// Grid-following inverter with PLL, power and current PI loops, droops and
/// an R-L output filter.  Gains are per-unit on `mva`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFollowingIbr {
    pub id: u32,
    pub bus: u32,
    pub mva: f64,
    pub p_mw: f64,
    #[serde(default)]
    pub q_mvar: f64,
    pub pll_kp: f64,
    pub pll_ki: f64,
    pub current_kp: f64,
    pub current_ki: f64,
    pub power_kp: f64,
    pub power_ki: f64,
    /// Active power per unit frequency deviation.
    #[serde(default)]
    pub freq_droop: f64,
    /// Reactive power per unit voltage deviation.
    #[serde(default)]
    pub volt_droop: f64,
    pub filter_r: f64,
    pub filter_x: f64,
    /// Power measurement filter time constant (s).
    pub meas_tc: f64,
}

/// Device whose angle defines the global Park frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DeviceRef {
    Generator(u32),
    Ibr(u32),
}

impl fmt::Display for DeviceRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeviceRef::Generator(id) => write!(f, "gen{id}"),
            DeviceRef::Ibr(id) => write!(f, "ibr{id}"),
        }
    }
}

impl FromStr for DeviceRef {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let parse = |rest: &str| {
            rest.trim_start_matches([':', ' '])
                .parse::<u32>()
                .map_err(|_| Error::Parse(format!("bad device reference '{s}'")))
        };
        if let Some(rest) = s.strip_prefix("gen") {
            Ok(DeviceRef::Generator(parse(rest)?))
        } else if let Some(rest) = s.strip_prefix("ibr") {
            Ok(DeviceRef::Ibr(parse(rest)?))
        } else {
            Err(Error::Parse(format!("bad device reference '{s}'")))
        }
    }
}

impl Serialize for DeviceRef {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for DeviceRef {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSettings {
    #[serde(default)]
    pub name: String,
    #[serde(default = "default_frequency")]
    pub frequency_hz: f64,
    #[serde(default = "default_base_mva")]
    pub base_mva: f64,
    /// Device supplying the global Park angle; defaults to the first
    /// generator (or IBR when there are no generators).
    #[serde(default)]
    pub reference: Option<DeviceRef>,
}

fn default_frequency() -> f64 {
    60.0
}

fn default_base_mva() -> f64 {
    100.0
}

impl Default for SystemSettings {
    fn default() -> Self {
        Self {
            name: String::new(),
            frequency_hz: default_frequency(),
            base_mva: default_base_mva(),
            reference: None,
        }
    }
}

impl SystemSettings {
    pub fn omega0(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.frequency_hz
    }
}

/// Validated, immutable power system description.  Every device list is
/// sorted by id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSystemCase {
    #[serde(default)]
    pub system: SystemSettings,
    #[serde(default)]
    pub buses: Vec<Bus>,
    #[serde(default)]
    pub lines: Vec<Line>,
    #[serde(default)]
    pub loads: Vec<Load>,
    #[serde(default)]
    pub generators: Vec<SynchronousGenerator>,
    #[serde(default)]
    pub ibrs: Vec<GridFollowingIbr>,
}

impl PowerSystemCase {
    pub fn omega0(&self) -> f64 {
        self.system.omega0()
    }

    pub fn bus_index(&self, id: u32) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    /// Impedance base (ohm) of a bus voltage level.
    pub fn z_base(&self, bus_id: u32) -> f64 {
        let kv = self.buses[self.bus_index(bus_id).expect("validated bus id")].nominal_kv;
        kv * kv / self.system.base_mva
    }

    /// The device whose angle drives the global Park transformation.
    pub fn reference_device(&self) -> DeviceRef {
        self.system.reference.unwrap_or_else(|| match self.generators.first() {
            Some(g) => DeviceRef::Generator(g.id),
            None => DeviceRef::Ibr(self.ibrs.first().map_or(0, |i| i.id)),
        })
    }

    /// Renumbers buses through `map` (old id -> new id), re-sorting devices.
    pub fn relabel_buses(&self, map: &BTreeMap<u32, u32>) -> Result<Self> {
        let m = |id: u32| map.get(&id).copied().unwrap_or(id);
        let mut c = self.clone();
        c.buses.iter_mut().for_each(|b| b.id = m(b.id));
        c.lines.iter_mut().for_each(|l| {
            l.from_bus = m(l.from_bus);
            l.to_bus = m(l.to_bus);
        });
        c.loads.iter_mut().for_each(|l| l.bus = m(l.bus));
        c.generators.iter_mut().for_each(|g| g.bus = m(g.bus));
        c.ibrs.iter_mut().for_each(|i| i.bus = m(i.bus));
        c.validate()?;
        Ok(c)
    }

    /// Sorts device lists and checks every case invariant.
    pub fn validate(&mut self) -> Result<()> {
        self.buses.sort_by_key(|b| b.id);
        self.lines.sort_by_key(|l| l.id);
        self.loads.sort_by_key(|l| l.id);
        self.generators.sort_by_key(|g| g.id);
        self.ibrs.sort_by_key(|i| i.id);

        if self.buses.is_empty() {
            return Err(Error::EmptyNetwork);
        }
        let sys = &self.system;
        if !(sys.frequency_hz > 0.0) || !(sys.base_mva > 0.0) {
            return Err(invariant("system", "frequency and base MVA must be positive"));
        }
        unique_ids("bus", self.buses.iter().map(|b| b.id))?;
        unique_ids("line", self.lines.iter().map(|l| l.id))?;
        unique_ids("load", self.loads.iter().map(|l| l.id))?;
        unique_ids("generator", self.generators.iter().map(|g| g.id))?;
        unique_ids("ibr", self.ibrs.iter().map(|i| i.id))?;

        let bus_ids: BTreeSet<u32> = self.buses.iter().map(|b| b.id).collect();
        let check_bus = |device: String, bus: u32| {
            if bus_ids.contains(&bus) {
                Ok(())
            } else {
                Err(Error::DanglingBus { device, bus })
            }
        };

        for b in &self.buses {
            let name = format!("bus {}", b.id);
            if !(b.nominal_kv > 0.0) {
                return Err(invariant(&name, "nominal voltage must be positive"));
            }
            if !(b.shunt_capacitance >= 0.0) || !(b.shunt_conductance >= 0.0) {
                return Err(invariant(&name, "shunt capacitance and conductance must be >= 0"));
            }
        }
        for l in &self.lines {
            let name = format!("line {}", l.id);
            check_bus(name.clone(), l.from_bus)?;
            check_bus(name.clone(), l.to_bus)?;
            if l.from_bus == l.to_bus {
                return Err(invariant(&name, "from_bus and to_bus must differ"));
            }
            if !(l.inductance > 0.0) {
                return Err(invariant(&name, "inductance must be positive"));
            }
            if !(l.resistance >= 0.0) || !(l.shunt_capacitance >= 0.0) {
                return Err(invariant(&name, "resistance and charging must be >= 0"));
            }
        }
        for l in &self.loads {
            let name = format!("load {}", l.id);
            check_bus(name.clone(), l.bus)?;
            match l.kind {
                LoadKind::Rl if !(l.inductance > 0.0) || !(l.resistance >= 0.0) => {
                    return Err(invariant(&name, "R-L load needs inductance > 0 and resistance >= 0"));
                }
                LoadKind::Rc if !(l.resistance > 0.0) || !(l.capacitance >= 0.0) => {
                    return Err(invariant(&name, "R-C load needs resistance > 0 and capacitance >= 0"));
                }
                _ => {}
            }
        }
        let mut source_buses = BTreeSet::new();
        for g in &self.generators {
            let name = format!("generator {}", g.id);
            check_bus(name.clone(), g.bus)?;
            if !source_buses.insert(g.bus) {
                return Err(invariant(&name, "only one source per bus is supported"));
            }
            validate_generator(g, &name)?;
        }
        for i in &self.ibrs {
            let name = format!("ibr {}", i.id);
            check_bus(name.clone(), i.bus)?;
            if !source_buses.insert(i.bus) {
                return Err(invariant(&name, "only one source per bus is supported"));
            }
            let gains = [
                i.pll_kp, i.pll_ki, i.current_kp, i.current_ki, i.power_kp, i.power_ki, i.freq_droop,
                i.volt_droop,
            ];
            if gains.iter().any(|g| !(*g >= 0.0)) {
                return Err(invariant(&name, "PI and droop gains must be >= 0"));
            }
            if !(i.filter_x > 0.0) || !(i.filter_r >= 0.0) {
                return Err(invariant(&name, "filter inductance must be positive"));
            }
            if !(i.mva > 0.0) || !(i.meas_tc > 0.0) {
                return Err(invariant(&name, "rating and measurement time constant must be positive"));
            }
        }
        if self.generators.iter().filter(|g| g.slack).count() > 1 {
            return Err(invariant("system", "at most one slack generator"));
        }
        if self.generators.is_empty() && self.ibrs.is_empty() {
            return Err(invariant("system", "case has no sources"));
        }
        match self.reference_device() {
            DeviceRef::Generator(id) if !self.generators.iter().any(|g| g.id == id) => {
                return Err(Error::UnknownElement(format!("reference generator {id}")));
            }
            DeviceRef::Ibr(id) if !self.ibrs.iter().any(|i| i.id == id) => {
                return Err(Error::UnknownElement(format!("reference ibr {id}")));
            }
            _ => {}
        }
        self.check_connected()
    }

    fn check_connected(&self) -> Result<()> {
        let mut adj: BTreeMap<u32, Vec<u32>> = self.buses.iter().map(|b| (b.id, Vec::new())).collect();
        for l in &self.lines {
            adj.get_mut(&l.from_bus).unwrap().push(l.to_bus);
            adj.get_mut(&l.to_bus).unwrap().push(l.from_bus);
        }
        let root = self.buses[0].id;
        let mut seen = BTreeSet::from([root]);
        let mut queue = VecDeque::from([root]);
        while let Some(b) = queue.pop_front() {
            for n in &adj[&b] {
                if seen.insert(*n) {
                    queue.push_back(*n);
                }
            }
        }
        match self.buses.iter().find(|b| !seen.contains(&b.id)) {
            Some(b) => Err(Error::Disconnected { root, bus: b.id }),
            None => Ok(()),
        }
    }
}

fn validate_generator(g: &SynchronousGenerator, name: &str) -> Result<()> {
    if !(g.h > 0.0) || !(g.mva > 0.0) {
        return Err(invariant(name, "inertia constant and rating must be positive"));
    }
    let resistances = [g.ra, g.rfd, g.r1d, g.r1q, g.r2q, g.d];
    if resistances.iter().any(|r| !(*r >= 0.0)) {
        return Err(invariant(name, "resistances and damping must be >= 0"));
    }
    let reactances = [g.xl, g.xmd, g.xmq, g.xlfd, g.xl1d, g.xl1q, g.xl2q];
    if reactances.iter().any(|x| !(*x > 0.0)) {
        return Err(invariant(name, "leakage and magnetizing reactances must be positive"));
    }
    // L''abc(theta) = P^-1 diag(x0, x''d, x''q) P is invertible for every
    // theta iff the diagonal is; sweep anyway to catch numerical trouble.
    let dq = g.subtransient_dq();
    for k in 0..64 {
        let theta = k as f64 * std::f64::consts::TAU / 64.0;
        let l = crate::transforms::rotate_dq_diagonal(dq, theta);
        let det = nalgebra::Matrix3::from(l).determinant();
        if !(det.abs() > 1e-12) || !det.is_finite() {
            return Err(invariant(name, "subtransient inductance matrix is singular"));
        }
    }
    let gov = &g.governor;
    if !(gov.r > 0.0) || !(gov.t1 > 0.0) || !(gov.t3 > 0.0) || gov.vmin > gov.vmax {
        return Err(invariant(name, "governor needs r, t1, t3 > 0 and vmin <= vmax"));
    }
    let ex = &g.exciter;
    if !(ex.tb > 0.0) || !(ex.te > 0.0) || ex.emin > ex.emax {
        return Err(invariant(name, "exciter needs tb, te > 0 and emin <= emax"));
    }
    Ok(())
}

fn invariant(device: &str, reason: &str) -> Error {
    Error::Invariant {
        device: device.to_string(),
        reason: reason.to_string(),
    }
}

fn unique_ids(kind: &str, ids: impl Iterator<Item = u32>) -> Result<()> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(invariant(&format!("{kind} {id}"), "duplicate id"));
        }
    }
    Ok(())
}

/// Parses and validates a case document.
pub fn load_case(document: &str) -> Result<PowerSystemCase> {
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Doc {
        #[serde(default)]
        system: SystemSettings,
        #[serde(default)]
        buses: Vec<Bus>,
        #[serde(default)]
        lines: Vec<Line>,
        #[serde(default)]
        loads: Vec<Load>,
        #[serde(default)]
        generators: Vec<SynchronousGenerator>,
        #[serde(default)]
        ibrs: Vec<GridFollowingIbr>,
        // scenario events may share the file; parsed separately
        #[serde(default)]
        events: Option<toml::Value>,
    }
    let doc: Doc = toml::from_str(document).map_err(|e| Error::Parse(e.to_string()))?;
    let _ = doc.events;
    let mut case = PowerSystemCase {
        system: doc.system,
        buses: doc.buses,
        lines: doc.lines,
        loads: doc.loads,
        generators: doc.generators,
        ibrs: doc.ibrs,
    };
    case.validate()?;
    Ok(case)
}

pub fn load_case_file(path: &std::path::Path) -> Result<PowerSystemCase> {
    load_case(&std::fs::read_to_string(path)?)
}
