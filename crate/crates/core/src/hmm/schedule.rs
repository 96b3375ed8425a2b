//! Timed disturbance lists.
//!
//! A schedule is written as `[[events]]` tables, either inside the case
//! document or in a separate scenario file:
//!
//! ```toml
//! [[events]]
//! time = 1.0
//! kind = "fault"
//! bus = 8
//! conductance = 0.0945   # S per phase, optional
//!
//! [[events]]
//! time = 1.0833333333333333
//! kind = "clear_fault"
//! bus = 8
//! ```

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Event;
use crate::network::{TopologyEvent, DEFAULT_FAULT_CONDUCTANCE};

fn default_conductance() -> f64 {
    DEFAULT_FAULT_CONDUCTANCE
}

/// One disturbance, without its time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Disturbance {
    /// Three-phase bolted-style fault: conductance (S) from each phase to
    /// ground.
    Fault {
        bus: u32,
        #[serde(default = "default_conductance")]
        conductance: f64,
    },
    ClearFault {
        bus: u32,
    },
    TripGenerator {
        generator: u32,
    },
    TripLine {
        line: u32,
    },
    DisconnectLoad {
        load: u32,
    },
    ReconnectLoad {
        load: u32,
    },
    /// Sinusoidal current into phase A, amplitude in system per-unit.
    Injection {
        bus: u32,
        amplitude: f64,
        frequency_hz: f64,
    },
}

impl Disturbance {
    pub fn to_model_event(&self) -> Event {
        match *self {
            Disturbance::Fault { bus, conductance } => Event::Network(TopologyEvent::ApplyFault { bus, conductance }),
            Disturbance::ClearFault { bus } => Event::Network(TopologyEvent::ClearFault { bus }),
            Disturbance::TripGenerator { generator } => Event::TripGenerator(generator),
            Disturbance::TripLine { line } => Event::Network(TopologyEvent::TripLine(line)),
            Disturbance::DisconnectLoad { load } => Event::Network(TopologyEvent::DisconnectLoad(load)),
            Disturbance::ReconnectLoad { load } => Event::Network(TopologyEvent::ReconnectLoad(load)),
            Disturbance::Injection {
                bus,
                amplitude,
                frequency_hz,
            } => Event::Injection {
                bus,
                amplitude,
                frequency_hz,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedEvent {
    pub time: f64,
    #[serde(flatten)]
    pub disturbance: Disturbance,
}

/// Events ordered by time.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventSchedule {
    events: Vec<TimedEvent>,
}

impl EventSchedule {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Validates ordering and fault pairing.
    pub fn new(events: Vec<TimedEvent>) -> Result<Self> {
        let mut faulted = BTreeSet::new();
        let mut last = f64::NEG_INFINITY;
        for e in &events {
            if !e.time.is_finite() || e.time < 0.0 {
                return Err(Error::Config(format!("event time must be finite and >= 0, got {}", e.time)));
            }
            if e.time < last {
                return Err(Error::Config(format!("event times must be nondecreasing ({} after {last})", e.time)));
            }
            last = e.time;
            match e.disturbance {
                Disturbance::Fault { bus, conductance } => {
                    if !(conductance > 0.0 && conductance.is_finite()) {
                        return Err(Error::Config(format!("fault conductance must be positive at bus {bus}")));
                    }
                    if !faulted.insert(bus) {
                        return Err(Error::Config(format!("bus {bus} is faulted twice at t = {}", e.time)));
                    }
                }
                Disturbance::ClearFault { bus } => {
                    if !faulted.remove(&bus) {
                        return Err(Error::Config(format!(
                            "clear_fault at t = {} for bus {bus}, which has no applied fault",
                            e.time
                        )));
                    }
                }
                Disturbance::Injection { frequency_hz, .. } if !(frequency_hz >= 0.0) => {
                    return Err(Error::Config("injection frequency must be >= 0".into()));
                }
                _ => {}
            }
        }
        Ok(Self { events })
    }

    /// Parses the `[[events]]` tables of a document; other keys are ignored
    /// so a case file can carry its own schedule.
    pub fn parse(document: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Doc {
            #[serde(default)]
            events: Vec<TimedEvent>,
        }
        let doc: Doc = toml::from_str(document).map_err(|e| Error::Parse(e.to_string()))?;
        Self::new(doc.events)
    }

    pub fn load_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn events(&self) -> &[TimedEvent] {
        &self.events
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Distinct event times in order.
    pub fn times(&self) -> Vec<f64> {
        let mut t: Vec<f64> = self.events.iter().map(|e| e.time).collect();
        t.dedup();
        t
    }
}
