//! Ready-made ladder systems in their symmetry-reduced bases.
//!
//! Every builder couples through `A₁ = R + R†` and `A₂ = i(R - R†)`, where
//! `R` raises energy and particle number by one quantum, so that the
//! built-in spectral matrices hand out `G(ω)[1 ± F(ω)]` for lowering and
//! `G(ω)F(ω)` for raising jumps.

use num_complex::Complex64;

use crate::baths::Statistics;
use crate::error::{Error, Result};
use crate::operators::{CMatrix, HermitianOperator, SystemModel};

#[derive(Debug, Clone)]
pub struct ModelBundle {
    pub name: String,
    pub model: SystemModel,
    pub energies: Vec<f64>,
    pub numbers: Vec<i64>,
    /// `g_m = |<m+1|R|m>|²` per link.
    pub g_factors: Vec<f64>,
    /// `ω_{m+1,m}` per link.
    pub link_frequencies: Vec<f64>,
    /// Statistics of pre-attached reservoir slots, if the model prescribes them.
    pub bath_slots: Vec<Statistics>,
    pub notes: Vec<String>,
}

impl ModelBundle {
    pub fn levels(&self) -> usize {
        self.energies.len()
    }
}

fn build_ladder(
    name: &str,
    energies: Vec<f64>,
    numbers: Vec<i64>,
    g_factors: Vec<f64>,
    notes: Vec<String>,
) -> Result<ModelBundle> {
    let raising: Vec<f64> = g_factors.iter().map(|g| g.sqrt()).collect();
    let d = energies.len();
    let mut r = CMatrix::zeros(d, d);
    for (m, &x) in raising.iter().enumerate() {
        r[(m + 1, m)] = Complex64::new(x, 0.0);
    }
    let a1 = &r + r.adjoint();
    let a2 = (&r - r.adjoint()) * Complex64::new(0.0, 1.0);
    let n: Vec<f64> = numbers.iter().map(|&x| x as f64).collect();
    let model = SystemModel::new(
        HermitianOperator::from_real_diagonal(&energies)?,
        HermitianOperator::from_real_diagonal(&n)?,
        vec![HermitianOperator::new(a1)?, HermitianOperator::new(a2)?],
        name,
    )?;
    let link_frequencies = energies.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(ModelBundle {
        name: name.to_string(),
        model,
        energies,
        numbers,
        g_factors,
        link_frequencies,
        bath_slots: Vec::new(),
        notes,
    })
}

fn positive(what: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{what} must be positive, got {x}")))
    }
}

/// `N` identical spinless sites with on-site energy `epsilon`, pairwise
/// interaction `u` and hopping `t_hop`, restricted to the fully symmetric
/// states `m = 0..N`: `E_m = mε + m(m-1)U/2 + m(N-m)T`.
pub fn build_electronic(n: usize, epsilon: f64, u: f64, t_hop: f64) -> Result<ModelBundle> {
    if n == 0 {
        return Err(Error::InvalidArgument("the electronic model needs at least one site".into()));
    }
    let nf = n as f64;
    let energies = (0..=n)
        .map(|m| {
            let m = m as f64;
            m * epsilon + m * (m - 1.0) * u / 2.0 + m * (nf - m) * t_hop
        })
        .collect();
    let numbers = (0..=n as i64).collect();
    let g = (0..n).map(|m| ((n - m) * (m + 1)) as f64).collect();
    let mut notes = vec![format!("electronic: N={n}, eps={epsilon}, U={u}, T={t_hop}")];
    if n == 1 {
        notes.push("single resonant level".into());
    }
    build_ladder("electronic", energies, numbers, g, notes)
}

/// Harmonic mode `Ω b†b` truncated to `n = 0..N_cut`.
pub fn build_oscillator(omega: f64, n_cut: usize) -> Result<ModelBundle> {
    positive("oscillator frequency", omega)?;
    if n_cut == 0 {
        return Err(Error::InvalidArgument("the oscillator cutoff must be at least 1".into()));
    }
    let energies = (0..=n_cut).map(|n| n as f64 * omega).collect();
    let numbers = (0..=n_cut as i64).collect();
    let g = (0..n_cut).map(|n| (n + 1) as f64).collect();
    let notes = vec![
        format!("oscillator: Omega={omega}, N_cut={n_cut}"),
        "successive population ratios do not depend on N_cut".into(),
    ];
    build_ladder("oscillator", energies, numbers, g, notes)
}

/// `N` spins-1/2 in the maximal angular momentum multiplet `j = N/2`,
/// levels `m = -j..j` with `E_m = Ωm` and particle number `m + j`.
pub fn build_spin_boson(n_spins: usize, omega: f64) -> Result<ModelBundle> {
    if n_spins == 0 {
        return Err(Error::InvalidArgument("the spin model needs at least one spin".into()));
    }
    positive("spin splitting", omega)?;
    let j = n_spins as f64 / 2.0;
    let ms: Vec<f64> = (0..=n_spins).map(|k| k as f64 - j).collect();
    let energies = ms.iter().map(|m| omega * m).collect();
    let numbers = (0..=n_spins as i64).collect();
    let g = ms[..n_spins].iter().map(|m| j * (j + 1.0) - m * (m + 1.0)).collect();
    let notes = vec![
        format!("spin-boson: N={n_spins}, Omega={omega}"),
        "bosonic reservoirs need mu < Omega".into(),
    ];
    build_ladder("spin-boson", energies, numbers, g, notes)
}

/// A two-level system exchanging quanta with one bosonic and one fermionic
/// reservoir, in that slot order.
pub fn build_mixed_spin(omega: f64) -> Result<ModelBundle> {
    positive("level splitting", omega)?;
    let mut bundle = build_ladder(
        "mixed-spin",
        vec![-omega / 2.0, omega / 2.0],
        vec![0, 1],
        vec![1.0],
        vec![
            format!("mixed-spin: Omega={omega}"),
            "reservoir slots: bose, fermi".into(),
        ],
    )?;
    bundle.bath_slots = vec![Statistics::Bose, Statistics::Fermi];
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{bohr_frequencies, check_conserved_coupling, diagonalize_joint};
    use std::collections::BTreeSet;

    #[test]
    fn electronic_single_level() {
        let b = build_electronic(1, 0.7, 3.0, 5.0).unwrap();
        assert_eq!(b.levels(), 2);
        assert_eq!(b.g_factors, vec![1.0]);
        assert_eq!(b.link_frequencies, vec![0.7]);
    }

    #[test]
    fn electronic_equidistant_when_u_is_twice_t() {
        let b = build_electronic(5, 1.0, 0.6, 0.3).unwrap();
        for w in &b.link_frequencies {
            assert!((w - (1.0 + 4.0 * 0.3)).abs() < 1e-14);
        }
        assert_eq!(b.g_factors, vec![5.0, 8.0, 9.0, 8.0, 5.0]);
    }

    #[test]
    fn electronic_fig1_frequencies() {
        let b = build_electronic(10, 1.0, 1.0, 0.0).unwrap();
        let expected: Vec<f64> = (1..=10).map(|m| m as f64).collect();
        assert_eq!(b.link_frequencies, expected);
        let eig = diagonalize_joint(&b.model, 1e-9).unwrap();
        let positive: Vec<f64> = bohr_frequencies(&eig).iter().map(|f| f.omega).filter(|w| *w > 0.0).collect();
        for w in &expected {
            assert!(positive.contains(w));
        }
    }

    #[test]
    fn coupling_changes_number_by_one() {
        let b = build_electronic(3, 1.0, 0.5, 0.1).unwrap();
        let eig = diagonalize_joint(&b.model, 1e-9).unwrap();
        let report = check_conserved_coupling(&b.model, &eig, &[]);
        assert_eq!(report.per_coupling[0].delta_n, BTreeSet::from([-1, 1]));
        assert_eq!(report.per_coupling[1].delta_n, BTreeSet::from([-1, 1]));
    }

    #[test]
    fn oscillator_factors() {
        let b = build_oscillator(2.0, 3).unwrap();
        assert_eq!(b.g_factors, vec![1.0, 2.0, 3.0]);
        assert_eq!(b.energies, vec![0.0, 2.0, 4.0, 6.0]);
        assert_eq!(build_oscillator(1.0, 1).unwrap().g_factors, vec![1.0]);
        assert!(build_oscillator(-1.0, 3).is_err());
    }

    #[test]
    fn spin_factors() {
        let one = build_spin_boson(1, 1.0).unwrap();
        assert!((one.g_factors[0] - 1.0).abs() < 1e-14);
        let two = build_spin_boson(2, 1.0).unwrap();
        assert!((two.g_factors[1] - 2.0).abs() < 1e-14);
        assert!((two.g_factors[0] - 2.0).abs() < 1e-14);
        assert_eq!(two.numbers, vec![0, 1, 2]);
        assert!(two.link_frequencies.iter().all(|w| (w - 1.0).abs() < 1e-15));
    }

    #[test]
    fn mixed_spin_slots() {
        let b = build_mixed_spin(1.0).unwrap();
        assert_eq!(b.bath_slots, vec![Statistics::Bose, Statistics::Fermi]);
        assert_eq!(b.link_frequencies, vec![1.0]);
    }
}
