//! Turns a parsed scenario into a system model and reservoir list.

use std::collections::BTreeMap;
use std::path::Path;

use openbath_core::{
    assemble_coefficients_with, build_electronic, build_mixed_spin, build_oscillator, build_spin_boson,
    combine_baths, default_degeneracy_tol, diagonalize_joint, parse_coefficients, read_operator,
    spectral_matrix_for, BathSpec, BmsCoefficients, EigenStructure, ModelBundle, RateProfile, Statistics,
    SystemModel,
};

use crate::config::{BathConfig, RateConfig, RawScenario, RunMode, ScenarioConfig};
use crate::CliError;

/// Preset name and parameters, e.g. `electronic:N=10,eps=1,U=1,T=0`.
pub fn parse_preset(text: &str) -> Result<(String, BTreeMap<String, f64>), CliError> {
    let (name, rest) = match text.split_once(':') {
        Some((n, r)) => (n.trim(), r),
        None => (text.trim(), ""),
    };
    let mut params = BTreeMap::new();
    for item in rest.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("preset parameter `{item}` is not key=value")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("preset parameter `{item}` is not numeric")))?;
        params.insert(k.trim().to_string(), v);
    }
    Ok((name.to_string(), params))
}

struct Params {
    preset: String,
    values: BTreeMap<String, f64>,
}

impl Params {
    fn take(&mut self, key: &str, default: Option<f64>) -> Result<f64, CliError> {
        match (self.values.remove(key), default) {
            (Some(v), _) => Ok(v),
            (None, Some(d)) => Ok(d),
            (None, None) => Err(CliError::Config(format!("preset `{}` needs parameter `{key}`", self.preset))),
        }
    }

    fn take_count(&mut self, key: &str, default: Option<usize>) -> Result<usize, CliError> {
        let v = self.take(key, default.map(|d| d as f64))?;
        if v < 0.0 || v.fract() != 0.0 || v > 1e6 {
            return Err(CliError::Config(format!("`{key}` must be a non-negative integer, got {v}")));
        }
        Ok(v as usize)
    }

    fn finish(self) -> Result<(), CliError> {
        match self.values.keys().next() {
            Some(k) => Err(CliError::Config(format!("preset `{}` has no parameter `{k}`", self.preset))),
            None => Ok(()),
        }
    }
}

pub fn build_preset(name: &str, values: BTreeMap<String, f64>) -> Result<ModelBundle, CliError> {
    let mut p = Params {
        preset: name.to_string(),
        values,
    };
    let bundle = match name {
        "electronic" => {
            let n = p.take_count("N", None)?;
            let eps = p.take("eps", Some(1.0))?;
            let u = p.take("U", Some(0.0))?;
            let t = p.take("T", Some(0.0))?;
            build_electronic(n, eps, u, t)?
        }
        "oscillator" => {
            let omega = p.take("Omega", Some(1.0))?;
            let n_cut = p.take_count("N_cut", Some(20))?;
            build_oscillator(omega, n_cut)?
        }
        "spin-boson" => {
            let n = p.take_count("N", None)?;
            let omega = p.take("Omega", Some(1.0))?;
            build_spin_boson(n, omega)?
        }
        "mixed-spin" => build_mixed_spin(p.take("Omega", Some(1.0))?)?,
        other => {
            return Err(CliError::Config(format!(
                "unknown preset `{other}` (electronic, oscillator, spin-boson, mixed-spin)"
            )))
        }
    };
    p.finish()?;
    Ok(bundle)
}

#[derive(Debug, Clone)]
pub struct Bath {
    pub spec: BathSpec,
    pub couplings: Option<Vec<usize>>,
}

/// A fully resolved scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub mode: RunMode,
    pub model: SystemModel,
    /// Present for presets.
    pub bundle: Option<ModelBundle>,
    pub baths: Vec<Bath>,
}

fn resolve_bath(k: usize, b: &BathConfig, base: &Path) -> Result<Bath, CliError> {
    let statistics = match b.statistics.to_ascii_lowercase().as_str() {
        "fermi" | "fermion" | "fermionic" => Statistics::Fermi,
        "bose" | "boson" | "bosonic" => Statistics::Bose,
        other => return Err(CliError::Config(format!("bath {k}: unknown statistics `{other}`"))),
    };
    let beta = match (b.beta, b.temperature) {
        (Some(beta), None) => beta,
        (None, Some(t)) if t > 0.0 => 1.0 / t,
        (None, Some(t)) => return Err(CliError::Config(format!("bath {k}: temperature must be positive, got {t}"))),
        (Some(_), Some(_)) => return Err(CliError::Config(format!("bath {k}: give `beta` or `temperature`, not both"))),
        (None, None) => return Err(CliError::Config(format!("bath {k}: missing `beta` or `temperature`"))),
    };
    let profile = match &b.rate {
        RateConfig::Constant { gamma } => RateProfile::Constant { gamma: *gamma },
        RateConfig::Lorentzian { gamma, center, width } => RateProfile::Lorentzian {
            gamma: *gamma,
            center: *center,
            width: *width,
        },
        RateConfig::Table { file } => {
            let path = base.join(file);
            let text = std::fs::read_to_string(&path)
                .map_err(|e| CliError::Config(format!("bath {k}: cannot read {}: {e}", path.display())))?;
            RateProfile::parse_table(&text)?
        }
    };
    let label = if b.label.is_empty() { format!("bath {k}") } else { b.label.clone() };
    let spec = BathSpec::new(statistics, beta, b.mu, profile, &label)
        .map_err(|e| CliError::Config(format!("bath {k}: {e}")))?;
    if let Some(c) = &b.couplings {
        if c.len() != 2 {
            return Err(CliError::Config(format!("bath {k}: `couplings` must list two operators")));
        }
    }
    Ok(Bath {
        spec,
        couplings: b.couplings.clone(),
    })
}

impl Scenario {
    pub fn resolve(raw: &RawScenario, mode: RunMode) -> Result<Self, CliError> {
        let config = raw.parse()?;
        if let Some(run) = &config.run {
            if run.mode != mode {
                return Err(CliError::Config(format!(
                    "scenario declares run mode `{}` but `{}` was requested",
                    run.mode.name(),
                    mode.name()
                )));
            }
        }
        let m = &config.model;
        let files = m.hamiltonian.is_some() || m.number.is_some() || !m.couplings.is_empty();
        let (model, bundle) = match (&m.preset, files) {
            (Some(text), false) => {
                let (name, mut params) = parse_preset(text)?;
                for (k, v) in &m.params {
                    params.insert(k.clone(), *v);
                }
                let bundle = build_preset(&name, params)?;
                (bundle.model.clone(), Some(bundle))
            }
            (None, true) => {
                let (h, n) = match (&m.hamiltonian, &m.number) {
                    (Some(h), Some(n)) => (h, n),
                    _ => return Err(CliError::Config("operator models need `hamiltonian` and `number`".into())),
                };
                let read = |p: &Path| read_operator(raw.base_dir.join(p));
                let couplings = m.couplings.iter().map(|p| read(p)).collect::<Result<Vec<_>, _>>()?;
                (SystemModel::new(read(h)?, read(n)?, couplings, "operators")?, None)
            }
            (Some(_), true) => return Err(CliError::Config("model gives both a preset and operator files".into())),
            (None, false) => return Err(CliError::Config("scenario has no model".into())),
        };
        let baths = config
            .baths
            .iter()
            .enumerate()
            .map(|(k, b)| resolve_bath(k, b, &raw.base_dir))
            .collect::<Result<Vec<_>, _>>()?;
        if mode.dissipative() && baths.is_empty() {
            return Err(CliError::Config(format!("`{}` needs at least one bath", mode.name())));
        }
        Ok(Self {
            config,
            mode,
            model,
            bundle,
            baths,
        })
    }

    pub fn specs(&self) -> Vec<BathSpec> {
        self.baths.iter().map(|b| b.spec.clone()).collect()
    }

    /// Whether every reservoir attaches through the same couplings, so that
    /// the ratio of summed rates is the rate-weighted occupation average.
    pub fn uniform_coupling(&self) -> bool {
        self.baths.windows(2).all(|w| w[0].couplings == w[1].couplings)
    }

    pub fn diagonalize(&self) -> Result<EigenStructure, CliError> {
        let tol = self
            .config
            .solver
            .degeneracy_tol
            .unwrap_or_else(|| default_degeneracy_tol(&self.model));
        Ok(diagonalize_joint(&self.model, tol)?)
    }

    pub fn assemble(&self, eig: &EigenStructure) -> Result<BmsCoefficients, CliError> {
        let parts = self
            .baths
            .iter()
            .map(|b| {
                let sm = spectral_matrix_for(&b.spec)?;
                let all: Vec<usize> = (0..self.model.couplings().len()).collect();
                assemble_coefficients_with(eig, &self.model, &sm, b.couplings.as_deref().unwrap_or(&all))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(combine_baths(&parts)?)
    }
}

/// Replaces the coefficients of one reservoir by a set read from a file, as
/// `k=path`. Debugging aid for exercising the verifier.
pub fn apply_coefficient_override(
    coeff: &mut BmsCoefficients,
    spec: &str,
    base: &Path,
) -> Result<(), CliError> {
    let (k, path) = match spec.split_once('=') {
        Some((k, p)) => (
            k.trim()
                .parse::<usize>()
                .map_err(|_| CliError::Config(format!("override `{spec}`: bad bath index")))?,
            p,
        ),
        None => (0, spec),
    };
    let path = base.join(path);
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let set = parse_coefficients(&text)?;
    coeff.replace_bath(k, set)?;
    Ok(())
}
