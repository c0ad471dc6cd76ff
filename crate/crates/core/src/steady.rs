//! Stationary states: ladder recursion, Liouvillian nullspace and explicit
//! time evolution, plus the generalized Boltzmann factor and effective
//! temperature fits.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use num_complex::Complex64;

use crate::baths::{effective_occupation, occupation, BathSpec, Statistics};
use crate::error::{Error, Result};
use crate::generator::Liouvillian;
use crate::operators::{max_abs, CMatrix};

/// Singular values below this fraction of the largest span the nullspace.
pub const NULLSPACE_TOL: f64 = 1e-10;
/// Populations more negative than this signal a non-Lindblad generator.
pub const POSITIVITY_CLIP: f64 = -1e-10;
/// Allowed trace drift during time evolution.
pub const TRACE_DRIFT_TOL: f64 = 1e-8;
/// Tie tolerance when comparing the average occupation to 1/2.
pub const THRESHOLD_TIE_TOL: f64 = 1e-12;
/// Bisection stops once the bracket is this narrow.
pub const BISECTION_TOL: f64 = 1e-8;

/// Birth-death chain `ρ̇_m = up_{m-1} ρ_{m-1} + down_m ρ_{m+1} - (down_{m-1} + up_m) ρ_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateLadder {
    /// `ω_{m+1,m}` per link.
    pub omega: Vec<f64>,
    /// Rate `m → m+1` per link.
    pub up: Vec<f64>,
    /// Rate `m+1 → m` per link.
    pub down: Vec<f64>,
    pub per_bath_up: Vec<Vec<f64>>,
    pub per_bath_down: Vec<Vec<f64>>,
    /// Eigenstate index of every level, lowest particle number first.
    pub states: Vec<usize>,
}

impl RateLadder {
    pub fn new(omega: Vec<f64>, up: Vec<f64>, down: Vec<f64>) -> Result<Self> {
        if up.len() != omega.len() || down.len() != omega.len() {
            return Err(Error::DimensionMismatch(format!(
                "ladder has {} frequencies, {} up and {} down rates",
                omega.len(),
                up.len(),
                down.len()
            )));
        }
        if let Some(r) = up.iter().chain(&down).find(|r| !(r.is_finite() && **r >= 0.0)) {
            return Err(Error::InvalidArgument(format!("rates must be finite and non-negative, got {r}")));
        }
        let levels = omega.len() + 1;
        Ok(Self {
            omega,
            up,
            down,
            per_bath_up: Vec::new(),
            per_bath_down: Vec::new(),
            states: (0..levels).collect(),
        })
    }

    pub fn levels(&self) -> usize {
        self.omega.len() + 1
    }

    pub fn links(&self) -> usize {
        self.omega.len()
    }

    /// `ρ̇` for level populations `p`.
    pub fn apply(&self, p: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; p.len()];
        for m in 0..self.links() {
            let flow = self.up[m] * p[m] - self.down[m] * p[m + 1];
            out[m] -= flow;
            out[m + 1] += flow;
        }
        out
    }

    /// Level-ordered values rearranged to eigenstate order.
    pub fn to_state_order(&self, by_level: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; by_level.len()];
        for (m, &s) in self.states.iter().enumerate() {
            out[s] = by_level[m];
        }
        out
    }

    /// Eigenstate-ordered values rearranged to level order.
    pub fn to_level_order(&self, by_state: &[f64]) -> Vec<f64> {
        self.states.iter().map(|&s| by_state[s]).collect()
    }

    /// Slowest nonzero relaxation rate, from the symmetrized rate matrix.
    /// `None` unless every rate is positive.
    pub fn relaxation_gap(&self) -> Option<f64> {
        if self.links() == 0 || self.up.iter().chain(&self.down).any(|r| !(*r > 0.0)) {
            return None;
        }
        let l = self.levels();
        let mut w = DMatrix::<f64>::zeros(l, l);
        for m in 0..self.links() {
            w[(m, m)] -= self.up[m];
            w[(m + 1, m + 1)] -= self.down[m];
            let off = (self.up[m] * self.down[m]).sqrt();
            w[(m, m + 1)] = off;
            w[(m + 1, m)] = off;
        }
        let mut ev: Vec<f64> = SymmetricEigen::new(w).eigenvalues.iter().map(|x| -x).collect();
        ev.sort_by(f64::total_cmp);
        Some(ev[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    LadderRecursion,
    Nullspace,
    TimeEvolution,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::LadderRecursion => "ladder-recursion",
            Method::Nullspace => "nullspace",
            Method::TimeEvolution => "time-evolution",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryState {
    /// Level order for ladder solves, eigenstate order otherwise.
    pub populations: Vec<f64>,
    /// Full density matrix in the eigenbasis, when the method provides one.
    pub density: Option<CMatrix>,
    pub method: Method,
    /// Max-norm of the generator applied to the state.
    pub residual: f64,
    pub unique: bool,
    /// Further stationary directions when the nullspace is degenerate.
    pub null_basis: Vec<CMatrix>,
    pub warnings: Vec<String>,
}

/// Solves the ladder by cumulative products of `up_m / down_m` in log space.
///
/// A link with `down = 0 < up` drains everything below it; the state is
/// then supported above the link and a warning is attached.
pub fn ladder_steady_state(ladder: &RateLadder) -> Result<StationaryState> {
    let l = ladder.levels();
    let mut warnings = Vec::new();
    for m in 0..ladder.links() {
        match (ladder.up[m] > 0.0, ladder.down[m] > 0.0) {
            (false, false) => return Err(Error::DisconnectedLadder { link: m }),
            (true, false) => warnings.push(format!(
                "divergent ratio at link {m}: down rate vanishes, population is confined above it"
            )),
            (false, true) => warnings.push(format!(
                "vanishing ratio at link {m}: up rate vanishes, population is confined below it"
            )),
            (true, true) => {}
        }
    }

    // Communicating classes are runs of two-way links; find the closed ones.
    let mut closed = Vec::new();
    let mut lo = 0;
    for hi in 0..l {
        let ends = hi == l - 1 || !(ladder.up[hi] > 0.0 && ladder.down[hi] > 0.0);
        if !ends {
            continue;
        }
        let leaks_down = lo > 0 && ladder.down[lo - 1] > 0.0;
        let leaks_up = hi < l - 1 && ladder.up[hi] > 0.0;
        if !leaks_down && !leaks_up {
            closed.push((lo, hi));
        }
        lo = hi + 1;
    }
    let (lo, hi) = match closed.as_slice() {
        [single] => *single,
        _ => {
            return Err(Error::NonUnique(format!(
                "{} closed classes of levels: {closed:?}",
                closed.len()
            )))
        }
    };

    let mut log_p = vec![f64::NEG_INFINITY; l];
    log_p[lo] = 0.0;
    for m in lo..hi {
        log_p[m + 1] = log_p[m] + ladder.up[m].ln() - ladder.down[m].ln();
    }
    let max = log_p[lo..=hi].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut populations: Vec<f64> = log_p.iter().map(|&x| (x - max).exp()).collect();
    let norm: f64 = populations.iter().sum();
    populations.iter_mut().for_each(|p| *p /= norm);
    let residual = ladder.apply(&populations).iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    Ok(StationaryState {
        populations,
        density: None,
        method: Method::LadderRecursion,
        residual,
        unique: true,
        null_basis: Vec::new(),
        warnings,
    })
}

/// `ρ̄_{m+1}/ρ̄_m = Σ_k G_k F_k / Σ_k G_k (1 ± F_k)` with the sign of each
/// reservoir's statistics.
pub fn generalized_boltzmann_ratio(omega: f64, baths: &[BathSpec]) -> Result<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for b in baths {
        let g = b.rate(omega);
        if g == 0.0 {
            continue;
        }
        let f = occupation(omega, b)?;
        num += g * f;
        den += g * b.occupation_complement(omega)?;
    }
    if den == 0.0 {
        return Err(Error::DivergentRatio(format!(
            "no reservoir can absorb a quantum at omega = {omega}"
        )));
    }
    Ok(num / den)
}

fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Right nullspace of the generator by block-wise singular value
/// decomposition.
pub fn liouvillian_nullspace(l: &Liouvillian) -> Result<StationaryState> {
    let d = l.dim();
    let mut decomposed = Vec::with_capacity(l.blocks().len());
    let mut sigma_max: f64 = 0.0;
    for block in l.blocks() {
        let svd = SVD::new(block.to_dense(), false, true);
        sigma_max = svd.singular_values.iter().cloned().fold(sigma_max, f64::max);
        decomposed.push(svd);
    }
    let threshold = NULLSPACE_TOL * sigma_max;

    let mut null_vectors: Vec<CMatrix> = Vec::new();
    for (block, svd) in l.blocks().iter().zip(&decomposed) {
        let v_t = svd.v_t.as_ref().expect("right singular vectors requested");
        for (k, &s) in svd.singular_values.iter().enumerate() {
            if s > threshold {
                continue;
            }
            let mut m = CMatrix::zeros(d, d);
            for (local, &global) in block.indices.iter().enumerate() {
                m.as_mut_slice()[global] = v_t[(k, local)].conj();
            }
            null_vectors.push(m);
        }
    }
    if null_vectors.is_empty() {
        return Err(Error::Nullspace(format!(
            "no singular value below {threshold:e}; the generator is not trace preserving"
        )));
    }

    let unique = null_vectors.len() == 1;
    let mut warnings = Vec::new();
    if !unique {
        warnings.push(format!(
            "nullspace has dimension {}; the stationary state is not unique",
            null_vectors.len()
        ));
    }
    let trace_scale = |m: &CMatrix| m.trace().norm() / max_abs(m).max(1e-300);
    let carrier = null_vectors
        .iter()
        .filter(|m| trace_scale(m) > 1e-8)
        .max_by(|a, b| trace_scale(a).total_cmp(&trace_scale(b)))
        .ok_or_else(|| Error::Nullspace("no stationary direction carries trace".into()))?;
    let mut rho = carrier / carrier.trace();
    rho = hermitize(&rho);
    for a in 0..d {
        let p = rho[(a, a)].re;
        if p < POSITIVITY_CLIP {
            return Err(Error::Nullspace(format!(
                "stationary population {a} is negative ({p:e}); the generator is not of Lindblad form"
            )));
        }
        if p < 0.0 {
            rho[(a, a)] = Complex64::new(0.0, 0.0);
        }
    }
    let tr = rho.trace().re;
    rho /= Complex64::new(tr, 0.0);

    let residual = max_abs(&l.apply_matrix(&rho));
    let populations = (0..d).map(|a| rho[(a, a)].re).collect();
    Ok(StationaryState {
        populations,
        density: Some(rho),
        method: Method::Nullspace,
        residual,
        unique,
        null_basis: if unique { Vec::new() } else { null_vectors },
        warnings,
    })
}

/// Samples of a fixed-step integration.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Diagonal of `ρ(t)` at every sample.
    pub populations: Vec<Vec<f64>>,
    pub final_state: CMatrix,
    pub dt: f64,
    pub steps: usize,
    pub max_trace_drift: f64,
}

impl Trajectory {
    pub fn to_stationary(&self, l: &Liouvillian) -> StationaryState {
        let d = self.final_state.nrows();
        StationaryState {
            populations: (0..d).map(|a| self.final_state[(a, a)].re).collect(),
            density: Some(self.final_state.clone()),
            method: Method::TimeEvolution,
            residual: max_abs(&l.apply_matrix(&self.final_state)),
            unique: true,
            null_basis: Vec::new(),
            warnings: Vec::new(),
        }
    }
}

/// Number of samples kept along a trajectory, besides the initial one.
pub const TRAJECTORY_SAMPLES: usize = 200;

/// Integrates `ρ̇ = L ρ` with classical fourth-order Runge-Kutta steps.
/// Blocks without initial weight stay zero and are skipped. `dt = None`
/// selects [`Liouvillian::default_time_step`].
pub fn time_evolve(l: &Liouvillian, rho0: &CMatrix, t_final: f64, dt: Option<f64>) -> Result<Trajectory> {
    let d = l.dim();
    if rho0.nrows() != d || rho0.ncols() != d {
        return Err(Error::DimensionMismatch(format!(
            "initial state is {}x{}, generator acts on {d}x{d}",
            rho0.nrows(),
            rho0.ncols()
        )));
    }
    if max_abs(&(rho0 - rho0.adjoint())) > 1e-10 || (rho0.trace() - Complex64::new(1.0, 0.0)).norm() > 1e-10 {
        return Err(Error::InvalidArgument("initial state must be hermitian with unit trace".into()));
    }
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(Error::InvalidArgument(format!("final time must be non-negative, got {t_final}")));
    }
    let dt = dt.unwrap_or_else(|| l.default_time_step(rho0));
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    let steps = (t_final / dt).ceil() as usize;
    let h = if steps > 0 { t_final / steps as f64 } else { dt };

    let x0 = rho0.as_slice();
    let active: Vec<usize> = (0..l.blocks().len())
        .filter(|&b| l.blocks()[b].indices.iter().any(|&i| x0[i] != Complex64::new(0.0, 0.0)))
        .collect();
    let mut state: Vec<Vec<Complex64>> = active
        .iter()
        .map(|&b| l.blocks()[b].indices.iter().map(|&i| x0[i]).collect())
        .collect();
    let diag_slots: Vec<Vec<usize>> = active
        .iter()
        .map(|&b| {
            let idx = &l.blocks()[b].indices;
            (0..idx.len()).filter(|&k| idx[k] % (d + 1) == 0).collect()
        })
        .collect();

    let assemble = |state: &[Vec<Complex64>]| {
        let mut m = CMatrix::zeros(d, d);
        for (s, &b) in state.iter().zip(&active) {
            for (k, &i) in l.blocks()[b].indices.iter().enumerate() {
                m.as_mut_slice()[i] = s[k];
            }
        }
        m
    };
    let diag = |state: &[Vec<Complex64>]| {
        let mut p = vec![0.0; d];
        for ((s, &b), slots) in state.iter().zip(&active).zip(&diag_slots) {
            for &k in slots {
                p[l.blocks()[b].indices[k] / (d + 1)] = s[k].re;
            }
        }
        p
    };

    let sample_every = (steps / TRAJECTORY_SAMPLES).max(1);
    let mut times = vec![0.0];
    let mut populations = vec![diag(&state)];
    let mut max_trace_drift: f64 = 0.0;
    let half = Complex64::new(0.5 * h, 0.0);
    let full = Complex64::new(h, 0.0);
    let sixth = Complex64::new(h / 6.0, 0.0);
    let two = Complex64::new(2.0, 0.0);

    let mut scratch: Vec<[Vec<Complex64>; 5]> = state
        .iter()
        .map(|s| std::array::from_fn(|_| vec![Complex64::new(0.0, 0.0); s.len()]))
        .collect();
    for step in 1..=steps {
        for ((s, &b), [k1, k2, k3, k4, tmp]) in state.iter_mut().zip(&active).zip(scratch.iter_mut()) {
            let block = &l.blocks()[b];
            block.apply_local(s, k1);
            for i in 0..s.len() {
                tmp[i] = s[i] + half * k1[i];
            }
            block.apply_local(tmp, k2);
            for i in 0..s.len() {
                tmp[i] = s[i] + half * k2[i];
            }
            block.apply_local(tmp, k3);
            for i in 0..s.len() {
                tmp[i] = s[i] + full * k3[i];
            }
            block.apply_local(tmp, k4);
            for i in 0..s.len() {
                s[i] += sixth * (k1[i] + two * k2[i] + two * k3[i] + k4[i]);
            }
        }
        if step % sample_every == 0 || step == steps {
            let p = diag(&state);
            let drift = (p.iter().sum::<f64>() - 1.0).abs();
            let size = state.iter().flatten().fold(0.0_f64, |m, z| m.max(z.norm()));
            max_trace_drift = max_trace_drift.max(drift);
            if !(size <= 10.0) || drift > TRACE_DRIFT_TOL {
                return Err(Error::StepSize(format!(
                    "dt = {h:e}: trace drift {drift:e}, max entry {size:e} at t = {:e}",
                    step as f64 * h
                )));
            }
            times.push(step as f64 * h);
            populations.push(p);
        }
    }
    Ok(Trajectory {
        times,
        populations,
        final_state: assemble(&state),
        dt: h,
        steps,
        max_trace_drift,
    })
}

/// Result of fitting `ln r_m = -β̄ ω_m + β̄ μ̄`.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveFit {
    pub beta_bar: f64,
    pub mu_bar: f64,
    /// Largest residual of the fit in `ln r`.
    pub consistency: f64,
    /// `β̄ < 0`: the populations are inverted.
    pub inversion: bool,
    /// Only one distinct frequency; `μ̄` is fixed to zero.
    pub underdetermined: bool,
}

/// Least-squares fit of an effective inverse temperature and chemical
/// potential to population ratios `ratios[m]` at frequencies `omegas[m]`.
pub fn fit_effective_beta_mu(omegas: &[f64], ratios: &[f64]) -> Result<EffectiveFit> {
    if omegas.len() != ratios.len() || omegas.is_empty() {
        return Err(Error::Fit(format!(
            "need matching, non-empty frequency and ratio lists ({} vs {})",
            omegas.len(),
            ratios.len()
        )));
    }
    if let Some(r) = ratios.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
        return Err(Error::Fit(format!("ratio {r} has no logarithm")));
    }
    let y: Vec<f64> = ratios.iter().map(|r| r.ln()).collect();
    let n = omegas.len() as f64;
    let mean_w = omegas.iter().sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let sxx: f64 = omegas.iter().map(|w| (w - mean_w).powi(2)).sum();
    let spread = omegas.iter().fold(0.0_f64, |m, w| m.max((w - mean_w).abs()));
    let scale = omegas.iter().fold(0.0_f64, |m, w| m.max(w.abs()));

    let (slope, intercept, underdetermined) = if spread <= 1e-12 * scale {
        if mean_w == 0.0 {
            return Err(Error::Fit("all transition frequencies vanish".into()));
        }
        (mean_y / mean_w, 0.0, true)
    } else {
        let sxy: f64 = omegas.iter().zip(&y).map(|(w, y)| (w - mean_w) * (y - mean_y)).sum();
        let slope = sxy / sxx;
        (slope, mean_y - slope * mean_w, false)
    };
    let beta_bar = -slope;
    let mu_bar = if underdetermined || beta_bar == 0.0 {
        0.0
    } else {
        intercept / beta_bar
    };
    let consistency = omegas
        .iter()
        .zip(&y)
        .map(|(w, y)| (y - (slope * w + intercept)).abs())
        .fold(0.0, f64::max);
    Ok(EffectiveFit {
        beta_bar,
        mu_bar,
        consistency,
        inversion: beta_bar < 0.0,
        underdetermined,
    })
}

/// Ratios `ρ_{m+1}/ρ_m` of level-ordered populations.
pub fn population_ratios(populations: &[f64]) -> Vec<f64> {
    populations.windows(2).map(|w| w[1] / w[0]).collect()
}

/// Fits the effective parameters of a solved ladder.
pub fn fit_ladder(ladder: &RateLadder, state: &StationaryState) -> Result<EffectiveFit> {
    fit_effective_beta_mu(&ladder.omega, &population_ratios(&state.populations))
}

/// Frequencies where the average fermionic occupation passes 1/2.
pub fn threshold_crossings(baths: &[BathSpec], omega_grid: &[f64]) -> Result<Vec<f64>> {
    if baths.iter().any(|b| b.statistics != Statistics::Fermi) {
        return Err(Error::WrongStatistics(
            "the 1/2 threshold applies to fermionic reservoirs".into(),
        ));
    }
    let g = |w: f64| effective_occupation(w, baths).map(|f| f - 0.5);
    let sign = |v: f64| {
        if v.abs() <= THRESHOLD_TIE_TOL {
            0
        } else if v > 0.0 {
            1
        } else {
            -1
        }
    };
    let mut out: Vec<f64> = Vec::new();
    let values = omega_grid.iter().map(|&w| g(w)).collect::<Result<Vec<_>>>()?;
    for i in 0..omega_grid.len() {
        let si = sign(values[i]);
        if si == 0 {
            if out.last() != Some(&omega_grid[i]) {
                out.push(omega_grid[i]);
            }
            continue;
        }
        if i + 1 == omega_grid.len() {
            break;
        }
        let sj = sign(values[i + 1]);
        if sj == 0 || sj == si {
            continue;
        }
        let (mut lo, mut hi) = (omega_grid[i], omega_grid[i + 1]);
        let mut root = None;
        while hi - lo > BISECTION_TOL {
            let mid = 0.5 * (lo + hi);
            let sm = sign(g(mid)?);
            if sm == 0 {
                root = Some(mid);
                break;
            }
            if sm == si {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        out.push(root.unwrap_or(0.5 * (lo + hi)));
    }
    Ok(out)
}

/// Vectorizes a matrix column-major.
pub fn vectorize(m: &CMatrix) -> DVector<Complex64> {
    DVector::from_column_slice(m.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baths::{fermi_occupation, RateProfile};

    fn ladder(up: &[f64], down: &[f64]) -> RateLadder {
        RateLadder::new((1..=up.len()).map(|x| x as f64).collect(), up.to_vec(), down.to_vec()).unwrap()
    }

    fn fermi(beta: f64, mu: f64) -> BathSpec {
        BathSpec::fermi(beta, mu, RateProfile::Constant { gamma: 1.0 }).unwrap()
    }

    #[test]
    fn two_level_boltzmann() {
        let f = 1.0 / (1.5_f64.exp() + 1.0);
        let s = ladder_steady_state(&ladder(&[f], &[1.0 - f])).unwrap();
        let r = s.populations[1] / s.populations[0];
        assert!((r - (-1.5_f64).exp()).abs() < 1e-15);
        assert!(s.residual < 1e-16);
    }

    #[test]
    fn symmetric_rates_uniform() {
        let s = ladder_steady_state(&ladder(&[0.3, 2.0, 5.0], &[0.3, 2.0, 5.0])).unwrap();
        for p in &s.populations {
            assert!((p - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn log_space_survives_huge_ratios() {
        let up = vec![1e-300; 99];
        let down = vec![1.0; 99];
        let s = ladder_steady_state(&ladder(&up, &down)).unwrap();
        assert_eq!(s.populations[0], 1.0);
        assert!(s.populations.iter().all(|p| p.is_finite()));
    }

    #[test]
    fn divergent_and_disconnected_links() {
        let s = ladder_steady_state(&ladder(&[1.0, 1.0], &[0.0, 1.0])).unwrap();
        assert_eq!(s.populations[0], 0.0);
        assert!((s.populations[1] - 0.5).abs() < 1e-15);
        assert_eq!(s.warnings.len(), 1);
        assert!(matches!(
            ladder_steady_state(&ladder(&[1.0, 0.0], &[1.0, 0.0])),
            Err(Error::DisconnectedLadder { link: 1 })
        ));
        // Two absorbing ends.
        assert!(matches!(
            ladder_steady_state(&ladder(&[0.0, 1.0], &[1.0, 0.0])),
            Err(Error::NonUnique(_))
        ));
    }

    #[test]
    fn single_level_ladder() {
        let s = ladder_steady_state(&ladder(&[], &[])).unwrap();
        assert_eq!(s.populations, vec![1.0]);
    }

    #[test]
    fn boltzmann_ratio_cases() {
        let b = fermi(2.0, 0.5);
        assert!((generalized_boltzmann_ratio(1.3, &[b]).unwrap() - (-1.6_f64).exp()).abs() < 1e-15);
        let full = fermi(1.0, 1e4);
        let empty = fermi(1.0, -1e4);
        assert!((generalized_boltzmann_ratio(0.0, &[full.clone(), empty]).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(
            generalized_boltzmann_ratio(0.0, &[full]),
            Err(Error::DivergentRatio(_))
        ));
        let off = BathSpec::bose(1.0, 0.0, RateProfile::Constant { gamma: 1.0 }).unwrap();
        assert!(generalized_boltzmann_ratio(-1.0, &[off]).is_err());
    }

    #[test]
    fn fit_exact_two_links() {
        let ln2 = 2.0_f64.ln();
        let f = fit_effective_beta_mu(&[1.0, 2.0], &[2.0, 0.5]).unwrap();
        assert!((f.beta_bar - 2.0 * ln2).abs() < 1e-14);
        assert!((f.mu_bar - 1.5).abs() < 1e-14);
        assert!(f.consistency < 1e-14 && !f.inversion && !f.underdetermined);
        let g = fit_effective_beta_mu(&[1.0, 2.0], &[0.5, 2.0]).unwrap();
        assert!((g.beta_bar + 2.0 * ln2).abs() < 1e-14);
        assert!((g.mu_bar - 1.5).abs() < 1e-14);
        assert!(g.inversion);
    }

    #[test]
    fn fit_single_frequency_and_errors() {
        let f = fit_effective_beta_mu(&[2.0, 2.0], &[(-1.0_f64).exp(), (-1.0_f64).exp()]).unwrap();
        assert!(f.underdetermined);
        assert!((f.beta_bar - 0.5).abs() < 1e-15);
        assert_eq!(f.mu_bar, 0.0);
        assert!(fit_effective_beta_mu(&[1.0, 2.0], &[1.0, 0.0]).is_err());
        assert!(fit_effective_beta_mu(&[], &[]).is_err());
    }

    #[test]
    fn crossing_single_bath_at_mu() {
        let grid: Vec<f64> = (0..=40).map(|i| i as f64 * 0.25 - 3.0).collect();
        let c = threshold_crossings(&[fermi(2.0, 1.1)], &grid).unwrap();
        assert_eq!(c.len(), 1);
        assert!((c[0] - 1.1).abs() < 1e-8);
        let c2 = threshold_crossings(&[fermi(2.0, 1.1), fermi(2.0, 1.1)], &grid).unwrap();
        assert_eq!(c2.len(), 1);
        let on_grid = threshold_crossings(&[fermi(2.0, 1.0)], &grid).unwrap();
        assert_eq!(on_grid, vec![1.0]);
        assert!(fermi_occupation(1.0, &fermi(2.0, 1.0)).unwrap() == 0.5);
    }

    #[test]
    fn two_level_gap_is_total_rate() {
        let ladder = RateLadder::new(vec![1.0], vec![0.3], vec![1.2]).unwrap();
        assert!((ladder.relaxation_gap().unwrap() - 1.5).abs() < 1e-14);
        let stuck = RateLadder::new(vec![1.0], vec![0.0], vec![1.2]).unwrap();
        assert!(stuck.relaxation_gap().is_none());
    }

}
