//! Numerical certificates for the balance relations satisfied by the
//! coefficients of a single thermal reservoir, the factorized form of ladder
//! rates, and stationarity of the grand-canonical Gibbs state.

use std::fmt;

use num_complex::Complex64;

use crate::baths::BathSpec;
use crate::generator::{BmsCoefficients, CoefficientSet, Liouvillian};
use crate::operators::{max_abs, CMatrix, EigenStructure};
use crate::steady::RateLadder;

pub const DEFAULT_BALANCE_TOL: f64 = 1e-9;
/// Pairs whose larger side is below this fraction of `max|γ̃|` count as zero.
pub const ZERO_SIDE_TOL: f64 = 1e-12;
/// Boltzmann exponents beyond this are outside the resolved range of the
/// occupation functions; such pairs are excused.
pub const MAX_BOLTZMANN_EXPONENT: f64 = 700.0;

#[derive(Debug, Clone, PartialEq)]
pub struct BalanceReport {
    pub relation: String,
    pub bath: Option<usize>,
    pub tolerance: f64,
    pub checked: usize,
    pub excused: usize,
    pub max_abs_violation: f64,
    pub max_rel_violation: f64,
    pub worst: Option<Vec<usize>>,
    pub pass: bool,
    pub per_bath: Vec<BalanceReport>,
    pub warnings: Vec<String>,
}

impl BalanceReport {
    fn new(relation: &str, bath: Option<usize>, tolerance: f64) -> Self {
        Self {
            relation: relation.to_string(),
            bath,
            tolerance,
            checked: 0,
            excused: 0,
            max_abs_violation: 0.0,
            max_rel_violation: 0.0,
            worst: None,
            pass: true,
            per_bath: Vec::new(),
            warnings: Vec::new(),
        }
    }

    fn record(&mut self, abs: f64, rel: f64, index: Vec<usize>) {
        self.checked += 1;
        self.max_abs_violation = self.max_abs_violation.max(abs);
        if rel > self.max_rel_violation || (self.worst.is_none() && rel > 0.0) {
            self.max_rel_violation = rel;
            self.worst = Some(index);
        }
    }

    fn finish(mut self) -> Self {
        self.pass = self.max_rel_violation <= self.tolerance && self.per_bath.iter().all(|r| r.pass);
        self
    }

    /// Merges per-reservoir reports under one relation id.
    pub fn combine(relation: &str, tolerance: f64, parts: Vec<BalanceReport>) -> Self {
        let mut out = Self::new(relation, None, tolerance);
        for p in &parts {
            out.checked += p.checked;
            out.excused += p.excused;
            out.max_abs_violation = out.max_abs_violation.max(p.max_abs_violation);
            if p.max_rel_violation > out.max_rel_violation || (out.worst.is_none() && p.worst.is_some()) {
                out.max_rel_violation = p.max_rel_violation;
                out.worst = p.worst.clone();
            }
            out.warnings.extend(p.warnings.iter().cloned());
        }
        out.per_bath = parts;
        out.finish()
    }
}

impl fmt::Display for BalanceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "relation: {}", self.relation)?;
        if let Some(b) = self.bath {
            writeln!(f, "bath: {b}")?;
        }
        writeln!(f, "tolerance: {:e}", self.tolerance)?;
        writeln!(f, "checked: {}", self.checked)?;
        writeln!(f, "excused: {}", self.excused)?;
        writeln!(f, "max_abs_violation: {:.16e}", self.max_abs_violation)?;
        writeln!(f, "max_rel_violation: {:.16e}", self.max_rel_violation)?;
        match &self.worst {
            Some(idx) => {
                let s: Vec<String> = idx.iter().map(|i| i.to_string()).collect();
                writeln!(f, "worst: {}", s.join(" "))?;
            }
            None => writeln!(f, "worst: none")?,
        }
        for w in &self.warnings {
            writeln!(f, "warning: {w}")?;
        }
        writeln!(f, "pass: {}", self.pass)?;
        for p in &self.per_bath {
            writeln!(f)?;
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

fn set_scale(set: &CoefficientSet) -> f64 {
    let s = set.sigma.values().fold(0.0_f64, |m, z| m.max(z.norm()));
    set.max_gamma().max(s).max(1e-300)
}

/// With `μ ≠ 0`, the Lamb shift may only connect states of equal particle
/// number.
pub fn verify_lamb_shift_selection(set: &CoefficientSet, eig: &EigenStructure, bath: &BathSpec) -> BalanceReport {
    let mut r = BalanceReport::new("lamb-shift-selection", None, DEFAULT_BALANCE_TOL);
    if bath.mu == 0.0 {
        return r.finish();
    }
    let scale = set_scale(set);
    for (&(i, j), v) in &set.sigma {
        if eig.number(i) != eig.number(j) {
            r.record(v.norm(), v.norm() / scale, vec![i, j]);
        }
    }
    r.finish()
}

/// With `μ ≠ 0`, `γ̃_{aj,ai}` must vanish unless `N_i = N_j`.
pub fn verify_degenerate_dissipator(set: &CoefficientSet, eig: &EigenStructure, bath: &BathSpec) -> BalanceReport {
    let mut r = BalanceReport::new("degenerate-dissipator", None, DEFAULT_BALANCE_TOL);
    if bath.mu == 0.0 {
        return r.finish();
    }
    let scale = set_scale(set);
    for (&(a, j, c, i), v) in &set.gamma {
        if a == c && eig.number(i) != eig.number(j) {
            r.record(v.norm(), v.norm() / scale, vec![a, j, c, i]);
        }
    }
    r.finish()
}

/// `γ̃_{ia,ja} e^{-β(E_a - E_i)} e^{βμ(N_a - N_j)} = γ̃_{aj,ai}` for every
/// degenerate pair `i, j` and every `a`.
pub fn verify_local_balance(set: &CoefficientSet, eig: &EigenStructure, bath: &BathSpec) -> BalanceReport {
    let mut r = BalanceReport::new("local-balance", None, DEFAULT_BALANCE_TOL);
    let zero_side = ZERO_SIDE_TOL * set.max_gamma();
    let d = eig.dim();
    for cluster in &eig.energy_clusters {
        for &i in cluster {
            for &j in cluster {
                for a in 0..d {
                    let raw_l = set.gamma_at(i, a, j, a);
                    let rhs = set.gamma_at(a, j, a, i);
                    if raw_l == Complex64::new(0.0, 0.0) && rhs == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    let x = -bath.beta * (eig.secular_energy(a) - eig.secular_energy(i))
                        + bath.beta * bath.mu * (eig.number(a) - eig.number(j)) as f64;
                    if x.abs() > MAX_BOLTZMANN_EXPONENT {
                        r.excused += 1;
                        continue;
                    }
                    let lhs = raw_l * x.exp();
                    let big = lhs.norm().max(rhs.norm());
                    if big <= zero_side {
                        r.excused += 1;
                        continue;
                    }
                    let abs = (lhs - rhs).norm();
                    r.record(abs, abs / big.max(1e-300), vec![i, j, a]);
                }
            }
        }
    }
    r.finish()
}

fn per_bath_reports(
    coeff: &BmsCoefficients,
    eig: &EigenStructure,
    baths: &[BathSpec],
    relation: &str,
    check: fn(&CoefficientSet, &EigenStructure, &BathSpec) -> BalanceReport,
) -> BalanceReport {
    let mut parts = Vec::new();
    let mut warnings = Vec::new();
    if coeff.per_bath.len() != baths.len() {
        warnings.push(format!(
            "{} coefficient sets for {} reservoirs",
            coeff.per_bath.len(),
            baths.len()
        ));
    }
    for (k, (set, bath)) in coeff.per_bath.iter().zip(baths).enumerate() {
        let mut r = check(set, eig, bath);
        r.bath = Some(k);
        parts.push(r);
    }
    let mut out = BalanceReport::combine(relation, DEFAULT_BALANCE_TOL, parts);
    if !warnings.is_empty() {
        out.warnings.extend(warnings);
        out.pass = false;
    }
    out
}

/// The three balance relations, each checked per reservoir.
pub fn verify_all_relations(coeff: &BmsCoefficients, eig: &EigenStructure, baths: &[BathSpec]) -> Vec<BalanceReport> {
    vec![
        per_bath_reports(coeff, eig, baths, "lamb-shift-selection", verify_lamb_shift_selection),
        per_bath_reports(coeff, eig, baths, "degenerate-dissipator", verify_degenerate_dissipator),
        per_bath_reports(coeff, eig, baths, "local-balance", verify_local_balance),
    ]
}

/// Compares ladder rates with `g_m G_k(ω) F_k(ω)` (up) and
/// `g_m G_k(ω) [1 ± F_k(ω)]` (down), reservoir by reservoir.
pub fn verify_factorization(ladder: &RateLadder, baths: &[BathSpec], g: &[f64]) -> BalanceReport {
    let mut r = BalanceReport::new("factorization", None, 1e-10);
    if g.len() != ladder.links() {
        r.warnings.push(format!(
            "no degeneracy factors for this ladder ({} given, {} links); skipped",
            g.len(),
            ladder.links()
        ));
        return r.finish();
    }
    let (ups, downs) = if ladder.per_bath_up.len() == baths.len() {
        (ladder.per_bath_up.clone(), ladder.per_bath_down.clone())
    } else if baths.len() == 1 {
        (vec![ladder.up.clone()], vec![ladder.down.clone()])
    } else {
        r.warnings.push("per-reservoir rates are not available; skipped".into());
        return r.finish();
    };
    let mut parts = Vec::new();
    for (k, bath) in baths.iter().enumerate() {
        let mut part = BalanceReport::new("factorization", Some(k), 1e-10);
        let scale = ups[k].iter().chain(&downs[k]).fold(0.0_f64, |m, x| m.max(x.abs()));
        for m in 0..ladder.links() {
            let w = ladder.omega[m];
            let gk = bath.rate(w);
            let (f, fc) = if gk == 0.0 {
                (0.0, 0.0)
            } else {
                match (crate::baths::occupation(w, bath), bath.occupation_complement(w)) {
                    (Ok(f), Ok(fc)) => (f, fc),
                    (Err(e), _) | (_, Err(e)) => {
                        part.warnings.push(format!("link {m}: {e}"));
                        part.record(f64::INFINITY, f64::INFINITY, vec![m]);
                        continue;
                    }
                }
            };
            for (measured, expected, dir) in [(ups[k][m], g[m] * gk * f, 0), (downs[k][m], g[m] * gk * fc, 1)] {
                let big = measured.abs().max(expected.abs());
                if big <= ZERO_SIDE_TOL * scale {
                    part.excused += 1;
                    continue;
                }
                let abs = (measured - expected).abs();
                part.record(abs, abs / big, vec![m, dir]);
            }
        }
        parts.push(part.finish());
    }
    let mut out = BalanceReport::combine("factorization", 1e-10, parts);
    out.warnings.extend(r.warnings);
    out
}

/// `e^{-β(E_a - μN_a)}/Z` in the eigenbasis, with the largest exponent
/// subtracted before exponentiation.
pub fn gibbs_state(eig: &EigenStructure, beta: f64, mu: f64) -> CMatrix {
    let d = eig.dim();
    let x: Vec<f64> = (0..d)
        .map(|a| -beta * (eig.energies[a] - mu * eig.number(a) as f64))
        .collect();
    let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = x.iter().map(|x| (x - max).exp()).collect();
    let z: f64 = w.iter().sum();
    CMatrix::from_fn(d, d, |i, j| {
        if i == j {
            Complex64::new(w[i] / z, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// Residual of the generator on the Gibbs state, split into off-diagonal
/// non-degenerate, diagonal and degenerate off-diagonal elements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GibbsResidual {
    pub total: f64,
    pub off_diagonal: f64,
    pub diagonal: f64,
    pub degenerate: f64,
}

impl fmt::Display for GibbsResidual {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "relation: gibbs-stationarity")?;
        writeln!(f, "residual: {:.16e}", self.total)?;
        writeln!(f, "residual_off_diagonal: {:.16e}", self.off_diagonal)?;
        writeln!(f, "residual_diagonal: {:.16e}", self.diagonal)?;
        writeln!(f, "residual_degenerate: {:.16e}", self.degenerate)
    }
}

pub fn verify_gibbs_stationarity(l: &Liouvillian, eig: &EigenStructure, beta: f64, mu: f64) -> GibbsResidual {
    let rho = gibbs_state(eig, beta, mu);
    let out = l.apply_matrix(&rho);
    let d = eig.dim();
    let mut res = GibbsResidual {
        total: max_abs(&out),
        off_diagonal: 0.0,
        diagonal: 0.0,
        degenerate: 0.0,
    };
    for i in 0..d {
        for j in 0..d {
            let v = out[(i, j)].norm();
            let slot = if i == j {
                &mut res.diagonal
            } else if eig.degenerate(i, j) {
                &mut res.degenerate
            } else {
                &mut res.off_diagonal
            };
            *slot = slot.max(v);
        }
    }
    res
}
