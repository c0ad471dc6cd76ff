//! Scenario-driven front end: steady states, verification reports,
//! parameter sweeps and occupation scans written as CSV and plain text.

pub mod config;
pub mod output;
pub mod runs;
pub mod scenario;

use std::path::PathBuf;

pub use config::{RawScenario, RunMode, ScenarioConfig, FIG1_CONFIG};
pub use runs::{solve_steady, Outcome, SteadySolution};
pub use scenario::{build_preset, parse_preset, Scenario};

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Config(String),
    Numerical(String),
}

impl CliError {
    /// 2 for configuration errors, 3 for numerical failures. Failed
    /// verification is reported through [`Outcome::failure`] with code 1.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<openbath_core::Error> for CliError {
    fn from(e: openbath_core::Error) -> Self {
        use openbath_core::Error as E;
        match e {
            E::NotHermitian { .. }
            | E::BadShape { .. }
            | E::DimensionMismatch(_)
            | E::CommutationViolation { .. }
            | E::NotTraceless { .. }
            | E::NonIntegerNumber { .. }
            | E::InvalidArgument(_)
            | E::WrongStatistics(_)
            | E::ChemicalPotentialDomain { .. }
            | E::Parse { .. }
            | E::Io(_) => CliError::Config(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

/// Everything a subcommand needs besides the scenario file contents.
#[derive(Debug, Clone)]
pub struct Invocation {
    pub mode: RunMode,
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub model: Option<String>,
    pub tol: Option<f64>,
    pub debug_coefficients: Vec<String>,
    pub sweep_path: Option<String>,
    pub sweep_values: Option<Vec<f64>>,
}

impl Invocation {
    pub fn new(mode: RunMode) -> Self {
        Self {
            mode,
            config: None,
            out: None,
            model: None,
            tol: None,
            debug_coefficients: Vec::new(),
            sweep_path: None,
            sweep_values: None,
        }
    }

    pub fn load(&self) -> Result<RawScenario, CliError> {
        let mut raw = match (&self.config, self.mode) {
            (Some(p), _) => RawScenario::load(p)?,
            (None, RunMode::Fig1) => RawScenario::fig1_defaults(),
            (None, _) => RawScenario::empty(),
        };
        if let Some(m) = &self.model {
            raw.set_model(m);
        }
        Ok(raw)
    }

    /// Output directory: `--out`, then the scenario's `output`, then `out`.
    pub fn output_dir(&self, raw: &RawScenario) -> PathBuf {
        if let Some(o) = &self.out {
            return o.clone();
        }
        match raw.parse().ok().and_then(|c| c.output) {
            Some(o) => raw.base_dir.join(o),
            None => PathBuf::from("out"),
        }
    }

    pub fn execute(&self) -> Result<Outcome, CliError> {
        let raw = self.load()?;
        self.execute_raw(&raw)
    }

    pub fn execute_raw(&self, raw: &RawScenario) -> Result<Outcome, CliError> {
        if let Some(t) = self.tol {
            if !(t > 0.0) {
                return Err(CliError::Config(format!("--tol must be positive, got {t}")));
            }
        }
        let base = &raw.base_dir;
        let overrides = &self.debug_coefficients;
        if self.mode == RunMode::Sweep {
            return runs::run_sweep(raw, self.sweep_path.as_deref(), self.sweep_values.as_deref(), overrides);
        }
        let scenario = Scenario::resolve(raw, self.mode)?;
        match self.mode {
            RunMode::Steady => runs::run_steady(&scenario, overrides, base),
            RunMode::Verify => runs::run_verify(&scenario, overrides, base, self.tol),
            RunMode::OccupationScan => runs::run_occupation_scan(&scenario),
            RunMode::Fig1 => runs::run_fig1(&scenario, overrides, base),
            RunMode::Sweep => unreachable!(),
        }
    }
}
