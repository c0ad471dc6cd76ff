#![allow(dead_code)]

use openbath_core::{
    assemble_coefficients, build_electronic, build_mixed_spin, build_oscillator, build_spin_boson, combine_baths,
    diagonalize_joint, spectral_matrix_for, BathSpec, BmsCoefficients, CMatrix, Complex64, EigenStructure,
    ModelBundle, RateProfile, Statistics,
};

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |a, z| a.max(z.norm()))
}

pub fn assemble(bundle: &ModelBundle, baths: &[BathSpec]) -> (EigenStructure, BmsCoefficients) {
    let eig = diagonalize_joint(&bundle.model, 1e-9).unwrap();
    let parts: Vec<BmsCoefficients> = baths
        .iter()
        .map(|b| assemble_coefficients(&eig, &bundle.model, &spectral_matrix_for(b).unwrap()).unwrap())
        .collect();
    let coeff = combine_baths(&parts).unwrap();
    (eig, coeff)
}

pub fn constant(gamma: f64) -> RateProfile {
    RateProfile::Constant { gamma }
}

pub fn lorentz(gamma: f64, center: f64, width: f64) -> RateProfile {
    RateProfile::Lorentzian { gamma, center, width }
}

/// The four ladder models with small default sizes and the statistics of
/// the reservoir they are naturally coupled to.
pub fn default_models() -> Vec<(ModelBundle, Statistics)> {
    vec![
        (build_electronic(4, 1.0, 0.5, 0.1).unwrap(), Statistics::Fermi),
        (build_oscillator(1.0, 10).unwrap(), Statistics::Bose),
        (build_spin_boson(4, 1.0).unwrap(), Statistics::Bose),
        (build_mixed_spin(1.0).unwrap(), Statistics::Bose),
        (build_mixed_spin(1.0).unwrap(), Statistics::Fermi),
    ]
}

/// `e^{-β(E_a - μN_a)} / Z` evaluated by hand, in eigenstate order.
pub fn boltzmann_populations(energies: &[f64], numbers: &[i64], beta: f64, mu: f64) -> Vec<f64> {
    let x: Vec<f64> = energies
        .iter()
        .zip(numbers)
        .map(|(e, n)| -beta * (e - mu * *n as f64))
        .collect();
    let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = x.iter().map(|x| (x - m).exp()).collect();
    let z: f64 = w.iter().sum();
    w.iter().map(|w| w / z).collect()
}

fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    CMatrix::from_fn(ra * rb, ca * cb, |i, j| a[(i / rb, j / cb)] * b[(i % rb, j % cb)])
}

fn ket_bra(d: usize, a: usize, b: usize) -> CMatrix {
    let mut m = CMatrix::zeros(d, d);
    m[(a, b)] = c(1.0, 0.0);
    m
}

/// Dense superoperator from Kronecker products, using
/// `vec(AρB) = (Bᵀ ⊗ A) vec(ρ)` for column-major stacking.
pub fn kron_liouvillian(coeff: &BmsCoefficients, energies: &[f64]) -> CMatrix {
    let d = energies.len();
    let id = CMatrix::identity(d, d);
    let mut h = CMatrix::from_fn(d, d, |i, j| if i == j { c(energies[i], 0.0) } else { c(0.0, 0.0) });
    for (&(a, b), v) in &coeff.total.sigma {
        h[(a, b)] += v;
    }
    let mut l = (kron(&id, &h) - kron(&h.transpose(), &id)) * c(0.0, -1.0);
    for (&(a, b, cc, dd), g) in &coeff.total.gamma {
        let lab = ket_bra(d, a, b);
        let lcd = ket_bra(d, cc, dd);
        let x = lcd.adjoint() * &lab;
        l += (kron(&lcd.map(|z| z.conj()), &lab) - (kron(&id, &x) + kron(&x.transpose(), &id)) * c(0.5, 0.0)) * *g;
    }
    l
}
