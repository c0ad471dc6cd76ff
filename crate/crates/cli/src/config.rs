//! Scenario files: TOML with a model, a list of reservoirs, solver options,
//! grids and an optional sweep.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use toml::Value;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunMode {
    Steady,
    Verify,
    Sweep,
    OccupationScan,
    Fig1,
}

impl RunMode {
    pub fn name(self) -> &'static str {
        match self {
            RunMode::Steady => "steady",
            RunMode::Verify => "verify",
            RunMode::Sweep => "sweep",
            RunMode::OccupationScan => "occupation-scan",
            RunMode::Fig1 => "fig1",
        }
    }

    pub fn dissipative(self) -> bool {
        !matches!(self, RunMode::OccupationScan)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverMethod {
    #[default]
    Auto,
    Ladder,
    Nullspace,
    TimeEvolution,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// `name` or `name:key=value,...`.
    pub preset: Option<String>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    pub hamiltonian: Option<PathBuf>,
    pub number: Option<PathBuf>,
    #[serde(default)]
    pub couplings: Vec<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum RateConfig {
    Constant { gamma: f64 },
    Lorentzian { gamma: f64, center: f64, width: f64 },
    Table { file: PathBuf },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathConfig {
    pub statistics: String,
    pub beta: Option<f64>,
    pub temperature: Option<f64>,
    #[serde(default)]
    pub mu: f64,
    pub rate: RateConfig,
    #[serde(default)]
    pub label: String,
    /// Indices of the two system couplings this reservoir attaches to.
    pub couplings: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: RunMode,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default)]
    pub method: SolverMethod,
    /// Tolerance of the balance and Gibbs checks.
    pub tol: Option<f64>,
    pub degeneracy_tol: Option<f64>,
    pub t_final: Option<f64>,
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl GridConfig {
    pub fn values(&self) -> Vec<f64> {
        linspace(self.start, self.stop, self.points, false)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub path: String,
    pub values: Option<Vec<f64>>,
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub points: Option<usize>,
    #[serde(default)]
    pub log: bool,
}

impl SweepConfig {
    pub fn grid(&self) -> Result<Vec<f64>, CliError> {
        match (&self.values, self.start, self.stop, self.points) {
            (Some(v), None, None, None) => Ok(v.clone()),
            (None, Some(a), Some(b), Some(n)) => {
                if self.log && !(a > 0.0 && b > 0.0) {
                    return Err(CliError::Config("a logarithmic sweep needs positive bounds".into()));
                }
                Ok(linspace(a, b, n, self.log))
            }
            _ => Err(CliError::Config(
                "sweep needs either `values` or all of `start`, `stop`, `points`".into(),
            )),
        }
    }
}

pub fn linspace(a: f64, b: f64, n: usize, log: bool) -> Vec<f64> {
    let (a, b) = if log { (a.ln(), b.ln()) } else { (a, b) };
    (0..n)
        .map(|i| {
            let x = if n == 1 { a } else { a + (b - a) * i as f64 / (n - 1) as f64 };
            if log {
                x.exp()
            } else {
                x
            }
        })
        .collect()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Name of the energy unit all numbers are expressed in.
    pub reference: Option<String>,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub baths: Vec<BathConfig>,
    pub run: Option<RunConfig>,
    #[serde(default)]
    pub solver: SolverConfig,
    pub grid: Option<GridConfig>,
    pub sweep: Option<SweepConfig>,
    pub output: Option<PathBuf>,
}

/// Parameters of the two-lead, ten-site electronic example.
pub const FIG1_CONFIG: &str = r#"
reference = "single-particle energy"

[model]
preset = "electronic"
params = { N = 10, eps = 1.0, U = 1.0, T = 0.0 }

[[baths]]
label = "lead 1"
statistics = "fermi"
beta = 2.0
mu = 1.0
rate = { kind = "lorentzian", gamma = 1.0, center = 1.0, width = 0.1 }

[[baths]]
label = "lead 2"
statistics = "fermi"
beta = 2.0
mu = 9.0
rate = { kind = "lorentzian", gamma = 1.0, center = 9.0, width = 0.1 }

[solver]
method = "ladder"

[grid]
start = 0.0
stop = 11.0
points = 1101
"#;

/// Raw scenario text plus the directory relative paths are resolved against.
#[derive(Debug, Clone)]
pub struct RawScenario {
    pub value: Value,
    pub base_dir: PathBuf,
}

impl RawScenario {
    pub fn from_str(text: &str, base_dir: &Path) -> Result<Self, CliError> {
        let value: Value = toml::from_str(text).map_err(|e| CliError::Config(format!("scenario: {e}")))?;
        Ok(Self {
            value,
            base_dir: base_dir.to_path_buf(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_str(&text, &base)
    }

    pub fn fig1_defaults() -> Self {
        Self::from_str(FIG1_CONFIG, Path::new(".")).expect("built-in scenario parses")
    }

    pub fn empty() -> Self {
        Self {
            value: Value::Table(Default::default()),
            base_dir: PathBuf::from("."),
        }
    }

    pub fn parse(&self) -> Result<ScenarioConfig, CliError> {
        self.value
            .clone()
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(format!("scenario: {}", e.message())))
    }

    /// Replaces the model section by a preset string.
    pub fn set_model(&mut self, preset: &str) {
        let mut model = toml::map::Map::new();
        model.insert("preset".into(), Value::String(preset.into()));
        self.table_mut().insert("model".into(), Value::Table(model));
    }

    fn table_mut(&mut self) -> &mut toml::map::Map<String, Value> {
        match &mut self.value {
            Value::Table(t) => t,
            _ => unreachable!("scenario root is a table"),
        }
    }

    /// Sets the numeric scalar addressed by a dotted path such as
    /// `baths.1.beta`. Array elements are addressed by index.
    pub fn set_scalar(&mut self, path: &str, x: f64) -> Result<(), CliError> {
        let bad = |why: &str| CliError::Config(format!("sweep path `{path}`: {why}"));
        let parts: Vec<&str> = path.split('.').collect();
        if parts.iter().any(|p| p.is_empty()) {
            return Err(bad("empty component"));
        }
        if parts[0] == "sweep" {
            return Err(bad("cannot sweep the sweep itself"));
        }
        let mut node = &mut self.value;
        for part in &parts {
            node = match node {
                Value::Table(t) => t.get_mut(*part).ok_or_else(|| bad(&format!("no key `{part}`")))?,
                Value::Array(a) => {
                    let i: usize = part.parse().map_err(|_| bad(&format!("`{part}` is not an index")))?;
                    let len = a.len();
                    a.get_mut(i).ok_or_else(|| bad(&format!("index {i} out of range ({len} entries)")))?
                }
                _ => return Err(bad(&format!("`{part}` descends into a scalar"))),
            };
        }
        *node = match node {
            Value::Float(_) => Value::Float(x),
            Value::Integer(_) => {
                if x.fract() != 0.0 || !x.is_finite() {
                    return Err(bad(&format!("integer parameter cannot take {x}")));
                }
                Value::Integer(x as i64)
            }
            _ => return Err(bad("does not address a number")),
        };
        Ok(())
    }
}
