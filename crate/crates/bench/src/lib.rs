//! Shared fixtures for the benchmarks.

use openbath_core::{
    assemble_coefficients, build_electronic, combine_baths, diagonalize_joint, spectral_matrix_electronic, BathSpec,
    BmsCoefficients, EigenStructure, RateProfile, Result,
};

/// Electronic model with `n` sites between two Lorentzian leads.
pub fn two_lead_electronic(n: usize) -> Result<(EigenStructure, BmsCoefficients)> {
    let bundle = build_electronic(n, 1.0, 1.0, 0.0)?;
    let eig = diagonalize_joint(&bundle.model, 1e-9)?;
    let lead = |mu: f64, center: f64| {
        BathSpec::fermi(2.0, mu, RateProfile::Lorentzian { gamma: 1.0, center, width: 0.1 })
    };
    let mut parts = Vec::new();
    for bath in [lead(1.0, 1.0)?, lead(9.0, 9.0)?] {
        parts.push(assemble_coefficients(&eig, &bundle.model, &spectral_matrix_electronic(&bath)?)?);
    }
    Ok((eig, combine_baths(&parts)?))
}
