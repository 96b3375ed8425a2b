//! Command-line arguments and their resolution into a run configuration.

use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use hmm_emt::dt::MicroConfig;
use hmm_emt::hmm::{HmmConfig, Mode};
use hmm_emt::reference::DEFAULT_REFERENCE_STEP;

use crate::CliError;

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "HMM_EMT_OUT";

#[derive(Debug, Parser)]
#[command(name = "hmm-emt", version, about = "Two-timescale EMT simulation of power systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one case and write the trajectory, step trace and summary.
    Run(RunArgs),
    /// Simulate a case and an RK4 reference, and report the errors.
    Compare(RunArgs),
    /// Sweep the macro period (fixed mode) or the tolerance (variable mode).
    Sweep(SweepArgs),
    /// Load a case file and check its invariants.
    ValidateCase(ValidateArgs),
}

/// A time given in seconds or as a multiple of the window, e.g. `2.625eta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Span {
    Seconds(f64),
    Windows(f64),
}

impl Span {
    pub fn resolve(self, eta: f64) -> f64 {
        match self {
            Span::Seconds(s) => s,
            Span::Windows(k) => k * eta,
        }
    }
}

impl FromStr for Span {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let (num, windows) = match s.strip_suffix("eta").or_else(|| s.strip_suffix('η')) {
            Some(n) => (n.trim(), true),
            None => (s, false),
        };
        let v: f64 = if windows && num.is_empty() {
            1.0
        } else {
            num.parse().map_err(|_| format!("'{s}' is not a time or a multiple of eta"))?
        };
        if !(v.is_finite() && v > 0.0) {
            return Err(format!("'{s}' must be positive"));
        }
        Ok(if windows { Span::Windows(v) } else { Span::Seconds(v) })
    }
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse::<Mode>().map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Case file.
    #[arg(long, default_value = "cases/two_area.toml")]
    pub case: PathBuf,
    /// Scenario (event schedule) file; no events when omitted.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Simulated horizon (s).
    #[arg(long = "t-end", default_value_t = 10.0)]
    pub t_end: f64,
    /// Fixed micro step (s); replaces defect control.
    #[arg(long = "h", conflicts_with = "eps1")]
    pub h: Option<f64>,
    /// Taylor order of the micro-solver.
    #[arg(long = "L", default_value_t = 30)]
    pub order: usize,
    /// Micro defect tolerance.
    #[arg(long)]
    pub eps1: Option<f64>,
    /// Micro window width (s).
    #[arg(long)]
    pub eta: Option<f64>,
    /// Full-EMT span after the start and after each disturbance (s).
    #[arg(long)]
    pub warmup: Option<f64>,
    /// Kernel shape parameter.
    #[arg(long = "kernel-D")]
    pub kernel_d: Option<f64>,
    /// Output directory [default: $HMM_EMT_OUT or ./out].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// RK4 reference step (s).
    #[arg(long = "reference-step", default_value_t = DEFAULT_REFERENCE_STEP)]
    pub reference_step: f64,
    /// Trajectory columns: state names, `prefix*`, or aliases such as
    /// "branch 7-8 phase A current".  All states when omitted.
    #[arg(long, value_delimiter = ',')]
    pub select: Option<Vec<String>>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// hmm-fixed, hmm-variable or micro-only.
    #[arg(long, default_value = "hmm-variable", value_parser = parse_mode)]
    pub mode: Mode,
    /// Macro period, fixed mode (s or `Neta`).
    #[arg(long = "H", conflicts_with = "tol")]
    pub macro_period: Option<Span>,
    /// Macro tolerance, variable mode.
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Macro periods for a fixed-mode sweep (s or `Neta`), comma separated.
    #[arg(long = "H", value_delimiter = ',', conflicts_with = "tol", required_unless_present = "tol")]
    pub macro_period: Vec<Span>,
    /// Tolerances for a variable-mode sweep, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub tol: Vec<f64>,
    /// Also run an RK4 reference per row and report integral errors.
    #[arg(long)]
    pub reference: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    /// Case file.
    #[arg(long, default_value = "cases/two_area.toml")]
    pub case: PathBuf,
    /// Scenario file to check against the case.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
}

/// Fully resolved settings of one run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub case: PathBuf,
    pub scenario: Option<PathBuf>,
    pub mode: Mode,
    pub hmm: HmmConfig,
    pub t_end: f64,
    pub out: PathBuf,
    pub reference_step: f64,
    pub select: Option<Vec<String>>,
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::Usage(format!("--{name} must be positive, got {v}")))
    }
}

impl CommonArgs {
    /// Output directory: `--out`, then the environment, then `./out`.
    pub fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"))
    }

    /// Engine configuration with every flag given on the command line
    /// applied over the defaults.
    pub fn hmm_config(&self) -> Result<HmmConfig, CliError> {
        let mut cfg = HmmConfig::default();
        if self.order == 0 {
            return Err(CliError::Usage("--L must be at least 1".into()));
        }
        let default_micro = MicroConfig::default();
        cfg.micro = match (self.h, self.eps1) {
            (Some(h), _) => MicroConfig::fixed(self.order, positive("h", h)?),
            (None, Some(e)) => MicroConfig::defect(self.order, positive("eps1", e)?, 1e-6, default_micro.h_max()),
            (None, None) => MicroConfig {
                order: self.order,
                ..default_micro
            },
        };
        if let Some(eta) = self.eta {
            cfg.eta = positive("eta", eta)?;
            cfg.macro_period = 2.625 * cfg.eta;
        }
        if let Some(w) = self.warmup {
            if w.is_nan() || w < 0.0 {
                return Err(CliError::Usage("--warmup must be >= 0".into()));
            }
            cfg.warmup = w;
        }
        if let Some(d) = self.kernel_d {
            cfg.kernel_d = positive("kernel-D", d)?;
        }
        positive("t-end", self.t_end)?;
        positive("reference-step", self.reference_step)?;
        Ok(cfg)
    }
}

impl RunArgs {
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut hmm = self.common.hmm_config()?;
        if self.tol.is_some() && self.mode != Mode::HmmVariable {
            return Err(CliError::Usage("--tol applies to hmm-variable mode only".into()));
        }
        if self.macro_period.is_some() && self.mode != Mode::HmmFixed {
            return Err(CliError::Usage("--H applies to hmm-fixed mode only".into()));
        }
        if let Some(tol) = self.tol {
            hmm.tol = positive("tol", tol)?;
        }
        if let Some(h) = self.macro_period {
            hmm.macro_period = h.resolve(hmm.eta);
        }
        hmm.validate(self.mode).map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(RunConfig {
            case: self.common.case.clone(),
            scenario: self.common.scenario.clone(),
            mode: self.mode,
            hmm,
            t_end: self.common.t_end,
            out: self.common.out_dir(),
            reference_step: self.common.reference_step,
            select: self.common.select.clone(),
        })
    }
}
