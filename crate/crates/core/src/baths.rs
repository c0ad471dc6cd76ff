//! Reservoirs: occupation functions, tunneling-rate profiles, Fourier
//! transformed correlation matrices and multi-bath averages.
//!
//! Units are natural (`ħ = k_B = 1`). Occupations are evaluated through the
//! reduced exponent `x = β(ω - μ)` so that complements such as `1 - f` and
//! `1 + n_B` never lose precision by subtraction.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operators::CMatrix;

/// Exponents beyond this saturate the occupations.
pub const SATURATION_EXPONENT: f64 = 700.0;
/// Tolerance of the KMS check.
pub const KMS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Statistics {
    Fermi,
    Bose,
}

impl Statistics {
    /// `+1` for bosons, `-1` for fermions: the sign in `1 ± F`.
    pub fn sign(self) -> f64 {
        match self {
            Statistics::Fermi => -1.0,
            Statistics::Bose => 1.0,
        }
    }
}

impl fmt::Display for Statistics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Statistics::Fermi => "fermi",
            Statistics::Bose => "bose",
        })
    }
}

/// `1 / (e^x + 1)`.
pub fn fermi_from_exponent(x: f64) -> f64 {
    if x > SATURATION_EXPONENT {
        0.0
    } else if x < -SATURATION_EXPONENT {
        1.0
    } else if x >= 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

/// `1 - 1/(e^x + 1)`, evaluated without cancellation.
pub fn fermi_complement_from_exponent(x: f64) -> f64 {
    fermi_from_exponent(-x)
}

/// `1 / (e^x - 1)` for `x > 0`.
pub fn bose_from_exponent(x: f64) -> Option<f64> {
    if !(x > 0.0) {
        None
    } else if x > SATURATION_EXPONENT {
        Some(0.0)
    } else {
        Some(1.0 / x.exp_m1())
    }
}

/// `1 + 1/(e^x - 1) = 1 / (1 - e^{-x})` for `x > 0`.
pub fn bose_plus_one_from_exponent(x: f64) -> Option<f64> {
    if !(x > 0.0) {
        None
    } else if x > SATURATION_EXPONENT {
        Some(1.0)
    } else {
        Some(1.0 / -(-x).exp_m1())
    }
}

/// Energy dependence of the tunneling rate of one reservoir.
#[derive(Debug, Clone, PartialEq)]
pub enum RateProfile {
    Constant {
        gamma: f64,
    },
    /// Peak `gamma` at `center`, half width `width`.
    Lorentzian {
        gamma: f64,
        center: f64,
        width: f64,
    },
    /// Sorted `(omega, gamma)` nodes; linear in between, zero outside.
    Tabulated(Vec<(f64, f64)>),
}

impl RateProfile {
    pub fn validate(&self) -> Result<()> {
        match self {
            RateProfile::Constant { gamma } if !(*gamma >= 0.0) => Err(Error::InvalidArgument(format!(
                "constant rate must be non-negative, got {gamma}"
            ))),
            RateProfile::Lorentzian { gamma, width, .. } if !(*gamma >= 0.0) || !(*width > 0.0) => {
                Err(Error::InvalidArgument(format!(
                    "lorentzian needs gamma >= 0 and width > 0, got gamma={gamma}, width={width}"
                )))
            }
            RateProfile::Tabulated(nodes) => {
                if nodes.is_empty() {
                    return Err(Error::InvalidArgument("empty rate table".into()));
                }
                if nodes.iter().any(|&(w, g)| !w.is_finite() || !(g >= 0.0)) {
                    return Err(Error::InvalidArgument(
                        "rate table needs finite frequencies and non-negative rates".into(),
                    ));
                }
                if nodes.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                    return Err(Error::InvalidArgument(
                        "rate table frequencies must be strictly increasing".into(),
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Parses a two-column `omega gamma` table.
    pub fn parse_table(text: &str) -> Result<Self> {
        let mut nodes = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let parsed = match fields.as_slice() {
                [w, g] => w.parse::<f64>().ok().zip(g.parse::<f64>().ok()),
                _ => None,
            };
            let node = parsed.ok_or_else(|| Error::Parse {
                line: i + 1,
                message: format!("expected `omega gamma`, found {line:?}"),
            })?;
            nodes.push(node);
        }
        let profile = RateProfile::Tabulated(nodes);
        profile.validate()?;
        Ok(profile)
    }
}

/// Pointwise tunneling rate.
pub fn rate_at(omega: f64, profile: &RateProfile) -> f64 {
    match profile {
        RateProfile::Constant { gamma } => *gamma,
        RateProfile::Lorentzian {
            gamma,
            center,
            width,
        } => {
            let d = omega - center;
            gamma * width * width / (d * d + width * width)
        }
        RateProfile::Tabulated(nodes) => {
            let (first, last) = (nodes[0], nodes[nodes.len() - 1]);
            if omega < first.0 || omega > last.0 {
                return 0.0;
            }
            let k = nodes.partition_point(|&(w, _)| w <= omega);
            if k == 0 {
                return first.1;
            }
            if k == nodes.len() {
                return last.1;
            }
            let (w0, g0) = nodes[k - 1];
            let (w1, g1) = nodes[k];
            g0 + (g1 - g0) * (omega - w0) / (w1 - w0)
        }
    }
}

/// One thermal reservoir.
#[derive(Debug, Clone, PartialEq)]
pub struct BathSpec {
    pub statistics: Statistics,
    pub beta: f64,
    pub mu: f64,
    pub profile: RateProfile,
    pub label: String,
}

impl BathSpec {
    pub fn new(
        statistics: Statistics,
        beta: f64,
        mu: f64,
        profile: RateProfile,
        label: impl Into<String>,
    ) -> Result<Self> {
        // beta = 0 (infinite temperature) is meaningful for fermions only.
        let beta_ok = match statistics {
            Statistics::Fermi => beta >= 0.0 && beta.is_finite(),
            Statistics::Bose => beta > 0.0 && beta.is_finite(),
        };
        if !beta_ok {
            return Err(Error::InvalidArgument(format!(
                "inverse temperature must be positive, got {beta}"
            )));
        }
        if !mu.is_finite() {
            return Err(Error::InvalidArgument(format!("chemical potential must be finite, got {mu}")));
        }
        profile.validate()?;
        Ok(Self {
            statistics,
            beta,
            mu,
            profile,
            label: label.into(),
        })
    }

    pub fn fermi(beta: f64, mu: f64, profile: RateProfile) -> Result<Self> {
        Self::new(Statistics::Fermi, beta, mu, profile, "")
    }

    pub fn bose(beta: f64, mu: f64, profile: RateProfile) -> Result<Self> {
        Self::new(Statistics::Bose, beta, mu, profile, "")
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn temperature(&self) -> f64 {
        1.0 / self.beta
    }

    fn exponent(&self, omega: f64) -> f64 {
        self.beta * (omega - self.mu)
    }

    /// Tunneling rate seen by the system; bosonic reservoirs have no modes at
    /// non-positive frequencies.
    pub fn rate(&self, omega: f64) -> f64 {
        if self.statistics == Statistics::Bose && omega <= 0.0 {
            0.0
        } else {
            rate_at(omega, &self.profile)
        }
    }

    /// `1 ± F(ω)`.
    pub fn occupation_complement(&self, omega: f64) -> Result<f64> {
        match self.statistics {
            Statistics::Fermi => Ok(fermi_complement_from_exponent(self.exponent(omega))),
            Statistics::Bose => bose_plus_one_from_exponent(self.exponent(omega))
                .ok_or(Error::ChemicalPotentialDomain { omega, mu: self.mu }),
        }
    }
}

fn require(bath: &BathSpec, statistics: Statistics) -> Result<()> {
    if bath.statistics != statistics {
        return Err(Error::WrongStatistics(format!(
            "expected a {statistics} bath, got {}",
            bath.statistics
        )));
    }
    Ok(())
}

pub fn fermi_occupation(omega: f64, bath: &BathSpec) -> Result<f64> {
    require(bath, Statistics::Fermi)?;
    Ok(fermi_from_exponent(bath.exponent(omega)))
}

pub fn bose_occupation(omega: f64, bath: &BathSpec) -> Result<f64> {
    require(bath, Statistics::Bose)?;
    bose_from_exponent(bath.exponent(omega)).ok_or(Error::ChemicalPotentialDomain { omega, mu: bath.mu })
}

pub fn occupation(omega: f64, bath: &BathSpec) -> Result<f64> {
    match bath.statistics {
        Statistics::Fermi => fermi_occupation(omega, bath),
        Statistics::Bose => bose_occupation(omega, bath),
    }
}

pub type ScalarFn = Arc<dyn Fn(f64) -> Result<f64> + Send + Sync>;
pub type MatrixFn = Arc<dyn Fn(f64) -> Result<CMatrix> + Send + Sync>;

/// A rank-one term `w(ω) q q†` of a spectral matrix that moves `charge`
/// quanta into the reservoir when evaluated at positive frequency.
#[derive(Clone)]
pub struct SpectralChannel {
    pub vector: DVector<Complex64>,
    pub charge: i32,
    pub weight: ScalarFn,
}

impl SpectralChannel {
    pub fn projector(&self) -> CMatrix {
        &self.vector * self.vector.adjoint()
    }
}

#[derive(Clone)]
enum Entries {
    Channels(Vec<SpectralChannel>),
    Dense { gamma: MatrixFn, charge: i32 },
}

/// Fourier transformed bath correlation matrix `γ_{αβ}(ω)` with an optional
/// odd transform `σ_{αβ}(ω)` feeding the Lamb shift.
#[derive(Clone)]
pub struct SpectralMatrix {
    size: usize,
    entries: Entries,
    sigma: Option<MatrixFn>,
}

impl fmt::Debug for SpectralMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.entries {
            Entries::Channels(c) => format!("{} channels", c.len()),
            Entries::Dense { charge, .. } => format!("dense (charge {charge})"),
        };
        f.debug_struct("SpectralMatrix")
            .field("size", &self.size)
            .field("entries", &kind)
            .field("sigma", &self.sigma.is_some())
            .finish()
    }
}

impl SpectralMatrix {
    pub fn from_channels(size: usize, channels: Vec<SpectralChannel>) -> Result<Self> {
        if channels.iter().any(|c| c.vector.len() != size) {
            return Err(Error::DimensionMismatch(format!(
                "channel vectors must have length {size}"
            )));
        }
        Ok(Self {
            size,
            entries: Entries::Channels(channels),
            sigma: None,
        })
    }

    /// A general matrix function; `charge` is the quantum exchanged by every
    /// entry, used by the KMS check.
    pub fn from_fn(size: usize, charge: i32, gamma: MatrixFn) -> Self {
        Self {
            size,
            entries: Entries::Dense { gamma, charge },
            sigma: None,
        }
    }

    pub fn zero(size: usize) -> Self {
        Self::from_fn(size, 0, Arc::new(move |_| Ok(CMatrix::zeros(size, size))))
    }

    /// Attaches an odd transform; it must be anti-hermitian at every frequency.
    pub fn with_sigma(mut self, sigma: MatrixFn) -> Self {
        self.sigma = Some(sigma);
        self
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn channels(&self) -> Option<&[SpectralChannel]> {
        match &self.entries {
            Entries::Channels(c) => Some(c),
            Entries::Dense { .. } => None,
        }
    }

    pub fn gamma(&self, omega: f64) -> Result<CMatrix> {
        match &self.entries {
            Entries::Channels(channels) => {
                let mut m = CMatrix::zeros(self.size, self.size);
                for ch in channels {
                    let w = (ch.weight)(omega)?;
                    if w != 0.0 {
                        m += ch.projector() * Complex64::new(w, 0.0);
                    }
                }
                Ok(m)
            }
            Entries::Dense { gamma, .. } => gamma(omega),
        }
    }

    pub fn sigma(&self, omega: f64) -> Option<Result<CMatrix>> {
        self.sigma.as_ref().map(|s| s(omega))
    }

    /// Smallest eigenvalue of `γ(ω)` over the grid.
    pub fn min_eigenvalue(&self, omegas: &[f64]) -> Result<f64> {
        let mut min = f64::INFINITY;
        for &w in omegas {
            let g = self.gamma(w)?;
            let g = (&g + g.adjoint()) * Complex64::new(0.5, 0.0);
            let eig = SymmetricEigen::new(g);
            min = eig.eigenvalues.iter().cloned().fold(min, f64::min);
        }
        Ok(min)
    }
}

fn single_particle_channels(out_weight: ScalarFn, in_weight: ScalarFn) -> Vec<SpectralChannel> {
    let h = Complex64::new(0.5, 0.0);
    let ih = Complex64::new(0.0, 0.5);
    vec![
        SpectralChannel {
            vector: DVector::from_vec(vec![h, -ih]),
            charge: 1,
            weight: out_weight,
        },
        SpectralChannel {
            vector: DVector::from_vec(vec![h, ih]),
            charge: -1,
            weight: in_weight,
        },
    ]
}

/// Electronic lead coupled through `A₁ = R + R†`, `A₂ = i(R - R†)`:
///
/// `γ₁₁ = γ₂₂ = Γ(ω)[1 - f(ω)]/4 + Γ(-ω) f(-ω)/4`,
/// `γ₁₂ = γ₂₁* = iΓ(ω)[1 - f(ω)]/4 - iΓ(-ω) f(-ω)/4`.
pub fn spectral_matrix_electronic(bath: &BathSpec) -> Result<SpectralMatrix> {
    require(bath, Statistics::Fermi)?;
    let b_out = bath.clone();
    let b_in = bath.clone();
    let out: ScalarFn = Arc::new(move |w| Ok(b_out.rate(w) * fermi_complement_from_exponent(b_out.exponent(w))));
    let inward: ScalarFn = Arc::new(move |w| Ok(b_in.rate(-w) * fermi_from_exponent(b_in.exponent(-w))));
    SpectralMatrix::from_channels(2, single_particle_channels(out, inward))
}

/// Bosonic reservoir with the same coupling structure; `Θ(0) = 0` on both
/// branches.
pub fn spectral_matrix_bosonic(bath: &BathSpec) -> Result<SpectralMatrix> {
    require(bath, Statistics::Bose)?;
    let b_out = bath.clone();
    let b_in = bath.clone();
    let out: ScalarFn = Arc::new(move |w| {
        if w <= 0.0 {
            return Ok(0.0);
        }
        let g = b_out.rate(w);
        let plus = bose_plus_one_from_exponent(b_out.exponent(w))
            .ok_or(Error::ChemicalPotentialDomain { omega: w, mu: b_out.mu })?;
        Ok(g * plus)
    });
    let inward: ScalarFn = Arc::new(move |w| {
        if w >= 0.0 {
            return Ok(0.0);
        }
        let g = b_in.rate(-w);
        let n = bose_from_exponent(b_in.exponent(-w))
            .ok_or(Error::ChemicalPotentialDomain { omega: -w, mu: b_in.mu })?;
        Ok(g * n)
    });
    SpectralMatrix::from_channels(2, single_particle_channels(out, inward))
}

/// The built-in single-particle matrix matching the bath statistics.
pub fn spectral_matrix_for(bath: &BathSpec) -> Result<SpectralMatrix> {
    match bath.statistics {
        Statistics::Fermi => spectral_matrix_electronic(bath),
        Statistics::Bose => spectral_matrix_bosonic(bath),
    }
}

/// Result of [`kms_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct KmsReport {
    /// Max relative violation of the charge-resolved relation.
    pub max_violation: f64,
    pub worst_omega: f64,
    /// Matrix entry, or `(k, k)` for channel `k` of a channel decomposition.
    pub worst_entry: (usize, usize),
    /// Max relative violation of the plain entrywise relation
    /// `γ(-ω) = e^{-β(ω - μ Δn)} γ(ω)ᵀ` with one `Δn` for all entries.
    /// Informational: with `μ ≠ 0` the single-particle matrices mix two
    /// charges in every entry and fail this form.
    pub entrywise_violation: f64,
    pub entrywise_charge: i32,
    /// The relation needed a chemical potential shift.
    pub mu_shifted: bool,
    pub pass: bool,
}

fn rel_violation(l: Complex64, r: Complex64, floor: f64) -> f64 {
    (l - r).norm() / l.norm().max(r.norm()).max(floor)
}

fn max_violation(lhs: &CMatrix, rhs: &CMatrix) -> (f64, (usize, usize)) {
    let scale = lhs.iter().chain(rhs.iter()).fold(0.0_f64, |a, z| a.max(z.norm()));
    let floor = (1e-12 * scale).max(1e-300);
    let mut worst = (0.0, (0, 0));
    for i in 0..lhs.nrows() {
        for j in 0..lhs.ncols() {
            let v = rel_violation(lhs[(i, j)], rhs[(i, j)], floor);
            if v > worst.0 {
                worst = (v, (i, j));
            }
        }
    }
    worst
}

/// Compares the weight of every channel at `-ω` with the Boltzmann-weighted
/// weight of its transposed partner at `+ω`. Working on channel weights
/// avoids the cancellation that plagues the off-diagonal matrix entries.
fn channel_violation(
    channels: &[SpectralChannel],
    w: f64,
    boltzmann: &dyn Fn(f64, i32) -> f64,
) -> Result<(f64, (usize, usize))> {
    let projectors: Vec<CMatrix> = channels.iter().map(SpectralChannel::projector).collect();
    let at_minus = channels.iter().map(|c| (c.weight)(-w)).collect::<Result<Vec<_>>>()?;
    let at_plus = channels.iter().map(|c| (c.weight)(w)).collect::<Result<Vec<_>>>()?;
    let mut rhs = vec![0.0; channels.len()];
    let mut unmatched = false;
    for (c, ch) in channels.iter().enumerate() {
        if at_plus[c] == 0.0 {
            continue;
        }
        let t = projectors[c].transpose();
        match projectors.iter().position(|p| crate::operators::max_abs(&(p - &t)) <= 1e-15) {
            Some(k) => rhs[k] += boltzmann(w, ch.charge) * at_plus[c],
            None => unmatched = true,
        }
    }
    if unmatched {
        return Err(Error::InvalidArgument(
            "channel projectors are not closed under transposition".into(),
        ));
    }
    let scale = at_minus.iter().chain(&rhs).fold(0.0_f64, |m, x| m.max(x.abs()));
    let floor = (1e-12 * scale).max(1e-300);
    let mut worst = (0.0, (0, 0));
    for k in 0..channels.len() {
        let v = (at_minus[k] - rhs[k]).abs() / at_minus[k].abs().max(rhs[k].abs()).max(floor);
        if v > worst.0 {
            worst = (v, (k, k));
        }
    }
    Ok(worst)
}

/// Checks `γ(-ω) = Σ_c e^{-β(ω - μ Δn_c)} w_c(ω) Π_cᵀ` over a frequency grid.
/// With all `Δn_c = 0` this is the canonical KMS relation.
pub fn kms_check(sm: &SpectralMatrix, bath: &BathSpec, omegas: &[f64]) -> Result<KmsReport> {
    let mut report = KmsReport {
        max_violation: 0.0,
        worst_omega: f64::NAN,
        worst_entry: (0, 0),
        entrywise_violation: 0.0,
        entrywise_charge: 0,
        mu_shifted: bath.mu != 0.0,
        pass: true,
    };
    let boltzmann = |w: f64, charge: i32| (-bath.beta * (w - bath.mu * charge as f64)).exp();
    for &w in omegas {
        let lhs = sm.gamma(-w)?;
        let ((v, entry), entrywise_charge) = match &sm.entries {
            Entries::Channels(channels) => {
                let charge = channels.first().map_or(0, |c| c.charge);
                (channel_violation(channels, w, &boltzmann)?, charge)
            }
            Entries::Dense { gamma, charge } => {
                let m = gamma(w)?.transpose() * Complex64::new(boltzmann(w, *charge), 0.0);
                (max_violation(&lhs, &m), *charge)
            }
        };
        if v > report.max_violation {
            report.max_violation = v;
            report.worst_omega = w;
            report.worst_entry = entry;
        }
        let naive = sm.gamma(w)?.transpose() * Complex64::new(boltzmann(w, entrywise_charge), 0.0);
        let (ev, _) = max_violation(&lhs, &naive);
        report.entrywise_violation = report.entrywise_violation.max(ev);
        report.entrywise_charge = entrywise_charge;
    }
    report.pass = report.max_violation <= KMS_TOL;
    Ok(report)
}

fn shared_statistics(baths: &[BathSpec]) -> Result<Statistics> {
    let first = baths
        .first()
        .ok_or_else(|| Error::InvalidArgument("at least one bath is required".into()))?
        .statistics;
    if baths.iter().any(|b| b.statistics != first) {
        return Err(Error::WrongStatistics(
            "average occupation needs baths of one statistics".into(),
        ));
    }
    Ok(first)
}

/// Rate-weighted average occupation `F̄(ω) = Σ G_k F_k / Σ G_k`.
pub fn effective_occupation(omega: f64, baths: &[BathSpec]) -> Result<f64> {
    shared_statistics(baths)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for b in baths {
        let g = b.rate(omega);
        if g == 0.0 {
            continue;
        }
        num += g * occupation(omega, b)?;
        den += g;
    }
    if den == 0.0 {
        return Err(Error::UndefinedAverage { omega });
    }
    Ok(num / den)
}

/// Low-energy mean temperature: weighted arithmetic mean for bosons,
/// weighted harmonic mean for fermions. Also returns a warning when the
/// probe frequency is outside the low-energy regime.
pub fn mean_temperature_low_energy(baths: &[BathSpec], omega_probe: f64) -> Result<(f64, Option<String>)> {
    let statistics = shared_statistics(baths)?;
    if let Some(b) = baths.iter().find(|b| b.mu != 0.0) {
        return Err(Error::InvalidArgument(format!(
            "low-energy temperature mixing needs mu = 0, bath {:?} has mu = {}",
            b.label, b.mu
        )));
    }
    let rates: Vec<f64> = baths.iter().map(|b| rate_at(omega_probe, &b.profile)).collect();
    let total: f64 = rates.iter().sum();
    if total == 0.0 {
        return Err(Error::UndefinedAverage { omega: omega_probe });
    }
    let t = match statistics {
        Statistics::Bose => baths.iter().zip(&rates).map(|(b, g)| g / total * b.temperature()).sum(),
        Statistics::Fermi => 1.0 / baths.iter().zip(&rates).map(|(b, g)| g / total * b.beta).sum::<f64>(),
    };
    let max_x = baths.iter().map(|b| b.beta * omega_probe.abs()).fold(0.0, f64::max);
    let warning = (max_x > 0.1).then(|| {
        format!("beta*omega = {max_x:.3} exceeds 0.1; the low-energy mean is unreliable")
    });
    Ok((t, warning))
}

/// High-energy limit: rate-weighted arithmetic mean of Boltzmann factors.
pub fn classical_limit_boltzmann(baths: &[BathSpec], omega: f64) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(Error::InvalidArgument(format!("frequency must be positive, got {omega}")));
    }
    let rates: Vec<f64> = baths.iter().map(|b| rate_at(omega, &b.profile)).collect();
    let total: f64 = rates.iter().sum();
    if total == 0.0 {
        return Err(Error::UndefinedAverage { omega });
    }
    Ok(baths
        .iter()
        .zip(&rates)
        .map(|(b, g)| g / total * (-b.beta * omega).exp())
        .sum())
}
