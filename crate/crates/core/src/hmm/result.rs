//! Trajectories and run statistics.

use std::time::Duration;

/// How a sample was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resolution {
    /// Micro-solver step end (or the initial state).
    Micro,
    /// End of a macro step.
    Macro,
}

impl Resolution {
    pub fn tag(self) -> &'static str {
        match self {
            Resolution::Micro => "micro",
            Resolution::Macro => "macro",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub time: f64,
    pub resolution: Resolution,
    pub state: Vec<f64>,
}

/// One variable-mode macro step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MacroStepRecord {
    /// Start of the macro step (end of its window).
    pub time: f64,
    /// Step length used, `Mh_n`.
    pub mh: f64,
    pub r: f64,
    pub e: f64,
    pub rho: f64,
    pub mh_next: f64,
    /// State index attaining `r`.
    pub worst: usize,
    /// Halvings before the step was accepted.
    pub rejections: u32,
}

/// Kernel force of one window.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceRecord {
    /// Window end `t'_n`.
    pub time: f64,
    pub force: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub time: f64,
    pub description: String,
}

/// Wall-clock time by phase.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Timings {
    pub micro: Duration,
    pub kernel: Duration,
    pub macro_step: Duration,
    pub total: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub state_names: Vec<String>,
    /// Samples in strictly increasing time.
    pub samples: Vec<Sample>,
    pub macro_steps: Vec<MacroStepRecord>,
    pub forces: Vec<ForceRecord>,
    pub events: Vec<EventRecord>,
    /// States of tripped devices, excluded from comparisons.
    pub excluded: Vec<usize>,
    pub timings: Timings,
    pub rhs_calls: u64,
    pub coefficient_calls: u64,
}

impl SimulationResult {
    pub fn new(state_names: Vec<String>) -> Self {
        Self {
            state_names,
            samples: Vec::new(),
            macro_steps: Vec::new(),
            forces: Vec::new(),
            events: Vec::new(),
            excluded: Vec::new(),
            timings: Timings::default(),
            rhs_calls: 0,
            coefficient_calls: 0,
        }
    }

    pub fn push(&mut self, time: f64, resolution: Resolution, state: &[f64]) {
        self.samples.push(Sample {
            time,
            resolution,
            state: state.to_vec(),
        });
    }

    pub fn final_state(&self) -> Option<&[f64]> {
        self.samples.last().map(|s| s.state.as_slice())
    }

    pub fn final_time(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.time)
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.state_names.iter().position(|n| n == name)
    }

    /// Times of samples with the given resolution.
    pub fn times(&self, resolution: Resolution) -> Vec<f64> {
        self.samples
            .iter()
            .filter(|s| s.resolution == resolution)
            .map(|s| s.time)
            .collect()
    }

    /// Mean accepted macro step length (variable mode), or `None`.
    pub fn average_macro_step(&self) -> Option<f64> {
        if self.macro_steps.is_empty() {
            None
        } else {
            Some(self.macro_steps.iter().map(|m| m.mh).sum::<f64>() / self.macro_steps.len() as f64)
        }
    }
}
