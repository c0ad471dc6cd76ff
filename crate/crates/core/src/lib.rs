//! Secular Born-Markov master equations for systems that exchange conserved
//! quanta with several thermal reservoirs.
//!
//! The pipeline is: build a [`SystemModel`], diagonalize it jointly with the
//! number operator, describe each reservoir by a [`BathSpec`] and its
//! [`SpectralMatrix`], assemble [`BmsCoefficients`], then either build the
//! [`Liouvillian`] or reduce to a [`RateLadder`] and solve for the
//! stationary state. The [`balance`] module certifies the thermodynamic
//! relations obeyed by each reservoir's coefficients.

pub mod balance;
pub mod baths;
pub mod error;
pub mod generator;
pub mod models;
pub mod operators;
pub mod steady;

pub use balance::{
    gibbs_state, verify_all_relations, verify_degenerate_dissipator, verify_factorization,
    verify_gibbs_stationarity, verify_lamb_shift_selection, verify_local_balance, BalanceReport, GibbsResidual,
};
pub use baths::{
    bose_occupation, classical_limit_boltzmann, effective_occupation, fermi_occupation, kms_check,
    mean_temperature_low_energy, occupation, rate_at, spectral_matrix_bosonic, spectral_matrix_electronic,
    spectral_matrix_for, BathSpec, KmsReport, RateProfile, SpectralMatrix, Statistics,
};
pub use error::{Error, Result};
pub use generator::{
    assemble_coefficients, assemble_coefficients_with, build_liouvillian, combine_baths, format_coefficients,
    parse_coefficients, reduce_to_ladder, BmsCoefficients, CoefficientSet, Liouvillian,
};
pub use models::{build_electronic, build_mixed_spin, build_oscillator, build_spin_boson, ModelBundle};
pub use num_complex::Complex64;
pub use operators::{
    bohr_frequencies, check_conserved_coupling, default_degeneracy_tol, diagonalize_joint, format_operator,
    parse_operator, read_operator, BohrFrequency, CMatrix, EigenStructure, HermitianOperator, SystemModel,
};
pub use steady::{
    fit_effective_beta_mu, fit_ladder, generalized_boltzmann_ratio, ladder_steady_state, liouvillian_nullspace,
    population_ratios, threshold_crossings, time_evolve, EffectiveFit, Method, RateLadder, StationaryState,
    Trajectory,
};
