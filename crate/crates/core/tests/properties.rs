mod common;

use std::collections::BTreeMap;

use common::*;
use nalgebra::DVector;
use openbath_core::*;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn random_matrix(rng: &mut StdRng, r: usize, c_: usize) -> CMatrix {
    CMatrix::from_fn(r, c_, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

fn random_unitary(rng: &mut StdRng, d: usize) -> CMatrix {
    random_matrix(rng, d, d).qr().q()
}

/// Number sectors of random sizes, a random Hermitian `H` inside each sector
/// and a random sector-raising `R`, optionally rotated by a random unitary.
fn random_model(seed: u64, rotate: bool) -> SystemModel {
    let mut rng = StdRng::seed_from_u64(seed);
    let sectors: Vec<usize> = (0..rng.gen_range(2..4)).map(|_| rng.gen_range(1..3)).collect();
    let d: usize = sectors.iter().sum();
    let mut offsets = vec![0];
    for s in &sectors {
        offsets.push(offsets.last().unwrap() + s);
    }
    let mut h = CMatrix::zeros(d, d);
    let mut n = CMatrix::zeros(d, d);
    let mut r = CMatrix::zeros(d, d);
    for (k, &s) in sectors.iter().enumerate() {
        let block = random_matrix(&mut rng, s, s);
        let herm = (&block + block.adjoint()) * c(0.5, 0.0) + CMatrix::identity(s, s) * c(1.3 * k as f64, 0.0);
        h.view_mut((offsets[k], offsets[k]), (s, s)).copy_from(&herm);
        for i in 0..s {
            n[(offsets[k] + i, offsets[k] + i)] = c(k as f64, 0.0);
        }
        if k + 1 < sectors.len() {
            let t = random_matrix(&mut rng, sectors[k + 1], s);
            r.view_mut((offsets[k + 1], offsets[k]), (sectors[k + 1], s)).copy_from(&t);
        }
    }
    let a1 = &r + r.adjoint();
    let a2 = (&r - r.adjoint()) * c(0.0, 1.0);
    let u = if rotate { random_unitary(&mut rng, d) } else { CMatrix::identity(d, d) };
    let rot = |m: &CMatrix| {
        let x = &u * m * u.adjoint();
        HermitianOperator::new((&x + x.adjoint()) * c(0.5, 0.0)).unwrap()
    };
    SystemModel::new(rot(&h), rot(&n), vec![rot(&a1), rot(&a2)], "random").unwrap()
}

fn random_bath(stats: Statistics, beta: f64, mu: f64, seed: u64) -> BathSpec {
    let mut rng = StdRng::seed_from_u64(seed);
    let profile = lorentz(rng.gen_range(0.2..2.0), rng.gen_range(0.0..3.0), rng.gen_range(0.3..2.0));
    BathSpec::new(stats, beta, mu, profile, "").unwrap()
}

fn assemble_model(model: &SystemModel, baths: &[BathSpec]) -> (EigenStructure, BmsCoefficients) {
    let eig = diagonalize_joint(model, 1e-9).unwrap();
    let parts: Vec<BmsCoefficients> = baths
        .iter()
        .map(|b| assemble_coefficients(&eig, model, &spectral_matrix_for(b).unwrap()).unwrap())
        .collect();
    (eig.clone(), combine_baths(&parts).unwrap())
}

fn random_density(seed: u64, d: usize) -> CMatrix {
    let mut rng = StdRng::seed_from_u64(seed);
    let a = random_matrix(&mut rng, d, d);
    let rho = &a * a.adjoint();
    let tr = rho.trace();
    rho / tr
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bohr_frequencies_come_in_pairs(seed in any::<u64>()) {
        let eig = diagonalize_joint(&random_model(seed, true), 1e-9).unwrap();
        let freqs = bohr_frequencies(&eig);
        for f in &freqs {
            prop_assert!(freqs.iter().any(|g| (g.omega + f.omega).abs() < 1e-9));
            for &(a, b) in &f.transitions {
                prop_assert!((eig.secular_energy(b) - eig.secular_energy(a) - f.omega).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn eigenbasis_reconstructs_operators(seed in any::<u64>()) {
        let model = random_model(seed, true);
        let eig = diagonalize_joint(&model, 1e-9).unwrap();
        let d = eig.dim();
        let e = CMatrix::from_fn(d, d, |i, j| if i == j { c(eig.energies[i], 0.0) } else { c(0.0, 0.0) });
        let nn = CMatrix::from_fn(d, d, |i, j| if i == j { c(eig.numbers[i], 0.0) } else { c(0.0, 0.0) });
        prop_assert!(max_abs(&(eig.from_eigenbasis(&e) - model.hamiltonian().matrix())) < 1e-10);
        prop_assert!(max_abs(&(eig.from_eigenbasis(&nn) - model.number_op().matrix())) < 1e-10);
        let unitary = &eig.basis * eig.basis.adjoint();
        prop_assert!(max_abs(&(unitary - CMatrix::identity(d, d))) < 1e-12);
    }

    #[test]
    fn generator_preserves_trace_and_hermiticity(seed in any::<u64>(), beta in 0.1..3.0f64, mu in -1.0..2.0f64) {
        let model = random_model(seed, true);
        let (eig, coeff) = assemble_model(&model, &[random_bath(Statistics::Fermi, beta, mu, seed ^ 1)]);
        let l = build_liouvillian(&coeff, &eig).unwrap();
        prop_assert!(l.trace_defect() < 1e-12);
        let rho = random_density(seed ^ 2, eig.dim());
        let out = l.apply_matrix(&rho);
        prop_assert!(out.trace().norm() < 1e-12 * (1.0 + l.max_norm()));
        prop_assert!(max_abs(&(&out - out.adjoint())) < 1e-12 * (1.0 + l.max_norm()));
        prop_assert!(max_abs(&(l.to_dense() - kron_liouvillian(&coeff, &eig.energies))) < 1e-12 * (1.0 + l.max_norm()));
    }

    #[test]
    fn generator_is_additive_over_baths(seed in any::<u64>(), b1 in 0.2..2.0f64, b2 in 0.2..2.0f64) {
        let model = random_model(seed, false);
        let baths = [random_bath(Statistics::Fermi, b1, 0.3, seed ^ 3), random_bath(Statistics::Fermi, b2, 1.1, seed ^ 4)];
        let (eig, both) = assemble_model(&model, &baths);
        let l = build_liouvillian(&both, &eig).unwrap().to_dense();
        let l1 = build_liouvillian(&assemble_model(&model, &baths[..1]).1, &eig).unwrap().to_dense();
        let l2 = build_liouvillian(&assemble_model(&model, &baths[1..]).1, &eig).unwrap().to_dense();
        let lh = build_liouvillian(&BmsCoefficients::from_set(CoefficientSet::default(), &eig).unwrap(), &eig).unwrap().to_dense();
        prop_assert!(max_abs(&(l - l1 - l2 + lh)) < 1e-12);
    }

    #[test]
    fn coefficients_are_hermitian_secular_and_positive(seed in any::<u64>(), beta in 0.1..3.0f64, mu in -1.0..2.0f64) {
        let model = random_model(seed, true);
        let (eig, coeff) = assemble_model(&model, &[random_bath(Statistics::Fermi, beta, mu, seed ^ 5)]);
        let set = &coeff.total;
        prop_assert!(set.hermiticity_defect() < 1e-12);
        let scale = set.max_gamma();
        let mut blocks: BTreeMap<(usize, usize, i64), Vec<(usize, usize)>> = BTreeMap::new();
        for &(a, b, cc, dd) in set.gamma.keys() {
            prop_assert!((eig.secular_energy(a) - eig.secular_energy(b) - eig.secular_energy(cc) + eig.secular_energy(dd)).abs() < 1e-9);
            prop_assert_eq!(eig.number(a) - eig.number(b), eig.number(cc) - eig.number(dd));
            let key = (eig.cluster_of(a), eig.cluster_of(b), eig.number(a) - eig.number(b));
            let pairs = blocks.entry(key).or_default();
            for p in [(a, b), (cc, dd)] {
                if !pairs.contains(&p) {
                    pairs.push(p);
                }
            }
        }
        // Merge blocks sharing a Bohr frequency and a charge before testing positivity.
        let mut merged: Vec<(f64, i64, Vec<(usize, usize)>)> = Vec::new();
        for ((ca, cb, dn), pairs) in blocks {
            let w = eig.cluster_energy(ca) - eig.cluster_energy(cb);
            match merged.iter_mut().find(|(w2, dn2, _)| (w - *w2).abs() < 1e-9 && dn == *dn2) {
                Some(m) => m.2.extend(pairs),
                None => merged.push((w, dn, pairs)),
            }
        }
        for (_, _, pairs) in merged {
            let k = pairs.len();
            let m = CMatrix::from_fn(k, k, |i, j| {
                let (a, b) = pairs[i];
                let (cc, dd) = pairs[j];
                set.gamma_at(a, b, cc, dd)
            });
            let min = nalgebra::SymmetricEigen::new((&m + m.adjoint()) * c(0.5, 0.0)).eigenvalues.min();
            prop_assert!(min >= -1e-12 * scale, "min eigenvalue {min:e}");
        }
    }

    #[test]
    fn balance_relations_hold(seed in any::<u64>(), beta in 0.1..3.0f64, mu in -1.0..2.0f64, bose in any::<bool>()) {
        let stats = if bose { Statistics::Bose } else { Statistics::Fermi };
        let mu = if bose { -mu.abs() - 0.1 } else { mu };
        let model = random_model(seed, true);
        let bath = random_bath(stats, beta, mu, seed ^ 6);
        let (eig, coeff) = assemble_model(&model, std::slice::from_ref(&bath));
        for report in verify_all_relations(&coeff, &eig, std::slice::from_ref(&bath)) {
            prop_assert!(report.pass, "{}", report);
        }
        let l = build_liouvillian(&coeff, &eig).unwrap();
        prop_assert!(verify_gibbs_stationarity(&l, &eig, beta, mu).total <= 1e-10 * (1.0 + l.max_norm()));
    }

    #[test]
    fn detailed_balance_checked_by_hand(seed in any::<u64>(), beta in 0.1..3.0f64, mu in -1.0..2.0f64) {
        let model = random_model(seed, false);
        let bath = random_bath(Statistics::Fermi, beta, mu, seed ^ 7);
        let (eig, coeff) = assemble_model(&model, &[bath]);
        let set = &coeff.total;
        let scale = set.max_gamma();
        for i in 0..eig.dim() {
            for a in 0..eig.dim() {
                let fwd = set.rate(a, i);
                let bwd = set.rate(i, a);
                if fwd.max(bwd) <= 1e-12 * scale {
                    continue;
                }
                let x = -beta * (eig.energies[a] - eig.energies[i]) + beta * mu * (eig.number(a) - eig.number(i)) as f64;
                let lhs = fwd * x.exp();
                prop_assert!((lhs - bwd).abs() <= 1e-9 * lhs.max(bwd), "{i}->{a}: {lhs:e} vs {bwd:e}");
            }
        }
    }

    #[test]
    fn injected_violation_is_detected(seed in any::<u64>(), beta in 0.3..2.0f64, mu in -0.5..1.5f64) {
        let bundle = build_electronic(3, 1.0, 0.4, 0.1).unwrap();
        let bath = random_bath(Statistics::Fermi, beta, mu, seed);
        let (eig, mut coeff) = assemble(&bundle, std::slice::from_ref(&bath));
        let mut set = coeff.per_bath[0].clone();
        let scale = set.max_gamma();
        let key = *set
            .gamma
            .iter()
            .filter(|(&(a, b, cc, dd), v)| a == cc && b == dd && a != b && v.norm() > 1e-6 * scale)
            .map(|(k, _)| k)
            .next()
            .unwrap();
        *set.gamma.get_mut(&key).unwrap() *= c(1.0 + 1e-3, 0.0);
        coeff.replace_bath(0, set.clone()).unwrap();
        let report = verify_local_balance(&set, &eig, &bath);
        prop_assert!(!report.pass);
        prop_assert!(report.max_rel_violation > 5e-4);
    }

    #[test]
    fn ladder_solution_is_scale_invariant(rates in proptest::collection::vec((1e-3..10.0f64, 1e-3..10.0f64), 1..12), k in 1e-3..1e3f64) {
        let omega: Vec<f64> = (0..rates.len()).map(|m| 1.0 + m as f64).collect();
        let up: Vec<f64> = rates.iter().map(|r| r.0).collect();
        let down: Vec<f64> = rates.iter().map(|r| r.1).collect();
        let base = ladder_steady_state(&RateLadder::new(omega.clone(), up.clone(), down.clone()).unwrap()).unwrap();
        let scaled = ladder_steady_state(&RateLadder::new(
            omega,
            up.iter().map(|x| x * k).collect(),
            down.iter().map(|x| x * k).collect(),
        ).unwrap()).unwrap();
        let total: f64 = base.populations.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        for (m, (p, q)) in base.populations.iter().zip(&scaled.populations).enumerate() {
            prop_assert!((p - q).abs() <= 1e-12 * p.max(1e-300) + 1e-300);
            if m + 1 < base.populations.len() {
                let r = base.populations[m + 1] / base.populations[m];
                prop_assert!((r - up[m] / down[m]).abs() <= 1e-12 * r);
            }
        }
    }

    #[test]
    fn bose_ladders_decrease(n_cut in 2usize..30, baths in proptest::collection::vec((0.05..3.0f64, -2.0..0.9f64, 0.1..3.0f64), 1..4)) {
        let baths: Vec<BathSpec> = baths.iter().map(|&(b, m, g)| BathSpec::bose(b, m, constant(g)).unwrap()).collect();
        let (eig, coeff) = assemble(&build_oscillator(1.0, n_cut).unwrap(), &baths);
        let s = ladder_steady_state(&reduce_to_ladder(&coeff, &eig).unwrap()).unwrap();
        for w in s.populations.windows(2) {
            prop_assert!(w[1] < w[0]);
        }
        let expected = generalized_boltzmann_ratio(1.0, &baths).unwrap();
        for r in population_ratios(&s.populations) {
            prop_assert!((r - expected).abs() <= 1e-12 * expected);
        }
    }

    #[test]
    fn fermi_inversion_follows_effective_occupation(
        n in 1usize..8,
        baths in proptest::collection::vec((0.1..4.0f64, -2.0..8.0f64, 0.1..3.0f64), 1..4),
    ) {
        let baths: Vec<BathSpec> = baths.iter().map(|&(b, m, g)| BathSpec::fermi(b, m, constant(g)).unwrap()).collect();
        let (eig, coeff) = assemble(&build_electronic(n, 1.0, 1.0, 0.0).unwrap(), &baths);
        let ladder = reduce_to_ladder(&coeff, &eig).unwrap();
        let s = ladder_steady_state(&ladder).unwrap();
        for m in 0..n {
            let fbar = effective_occupation(ladder.omega[m], &baths).unwrap();
            if (fbar - 0.5).abs() < 1e-9 {
                continue;
            }
            let ratio = s.populations[m + 1] / s.populations[m];
            prop_assert_eq!(ratio > 1.0, fbar > 0.5);
            let w = ladder.omega[m];
            let (mut num, mut den) = (0.0, 0.0);
            for b in &baths {
                let x = b.beta * (w - b.mu);
                num += b.rate(w) / (x.exp() + 1.0);
                den += b.rate(w) / ((-x).exp() + 1.0);
            }
            prop_assert!((ratio - num / den).abs() <= 1e-10 * ratio);
        }
    }

    #[test]
    fn kms_holds_for_builtin_spectra(beta in 0.05..5.0f64, mu in -2.0..2.0f64, bose in any::<bool>(), seed in any::<u64>()) {
        let stats = if bose { Statistics::Bose } else { Statistics::Fermi };
        let bath = random_bath(stats, beta, mu, seed);
        let sm = spectral_matrix_for(&bath).unwrap();
        let grid: Vec<f64> = (1..60).map(|i| 0.1 * i as f64).collect();
        let grid: Vec<f64> = if bose { grid.into_iter().map(|w| w + mu.max(0.0)).collect() } else { grid };
        let report = kms_check(&sm, &bath, &grid).unwrap();
        prop_assert!(report.pass, "{report:?}");
        prop_assert!(sm.min_eigenvalue(&grid).unwrap() >= -1e-12);
    }

    #[test]
    fn nullspace_vector_is_stationary(seed in any::<u64>(), b1 in 0.2..2.0f64, b2 in 0.2..2.0f64) {
        let model = random_model(seed, true);
        let baths = [random_bath(Statistics::Fermi, b1, 0.0, seed ^ 8), random_bath(Statistics::Fermi, b2, 1.5, seed ^ 9)];
        let (eig, coeff) = assemble_model(&model, &baths);
        let l = build_liouvillian(&coeff, &eig).unwrap();
        let s = liouvillian_nullspace(&l).unwrap();
        let d = eig.dim();
        let rho = s.density.as_ref().unwrap();
        prop_assert!((rho.trace().re - 1.0).abs() < 1e-10);
        let residual: DVector<Complex64> = l.apply(&DVector::from_iterator(d * d, rho.iter().copied()));
        prop_assert!(residual.iter().all(|z| z.norm() < 1e-9 * (1.0 + l.max_norm())));
        prop_assert!(s.populations.iter().all(|p| *p >= 0.0));
    }
}
