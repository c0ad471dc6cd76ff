//! System operators and their joint eigenstructure.
//!
//! Every other module works in the common eigenbasis of the system
//! Hamiltonian and the conserved number operator. Energies are grouped into
//! degeneracy clusters with an explicit tolerance, and Bohr frequencies are
//! built from cluster energies so that secular selection rules reduce to
//! exact index comparisons.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Absolute tolerance of the hermiticity check.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Relative tolerance of `[H, N] = 0`.
pub const COMMUTATION_TOL: f64 = 1e-10;
/// Distance of number eigenvalues from the nearest integer.
pub const INTEGER_TOL: f64 = 1e-8;
/// Default degeneracy tolerance, relative to the spectral range.
pub const DEFAULT_RELATIVE_DEGENERACY_TOL: f64 = 1e-9;

pub(crate) fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

fn is_diagonal(m: &CMatrix) -> bool {
    let n = m.nrows();
    (0..n).all(|i| (0..n).all(|j| i == j || m[(i, j)] == Complex64::new(0.0, 0.0)))
}

/// A dense hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    entries: CMatrix,
}

impl HermitianOperator {
    pub fn new(entries: CMatrix) -> Result<Self> {
        let (rows, cols) = entries.shape();
        if rows == 0 || rows != cols {
            return Err(Error::BadShape { rows, cols });
        }
        for i in 0..rows {
            for j in i..rows {
                let deviation = (entries[(i, j)] - entries[(j, i)].conj()).norm();
                if deviation > HERMITIAN_TOL {
                    return Err(Error::NotHermitian {
                        row: i,
                        col: j,
                        deviation,
                    });
                }
            }
        }
        Ok(Self { entries })
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        let m = CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(diag[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        Self::new(m)
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.entries
    }

    pub fn trace(&self) -> Complex64 {
        self.entries.trace()
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.entries)
    }
}

/// System Hamiltonian, conserved number operator and coupling operators.
#[derive(Debug, Clone)]
pub struct SystemModel {
    hamiltonian: HermitianOperator,
    number_op: HermitianOperator,
    couplings: Vec<HermitianOperator>,
    pub energy_unit_label: String,
    warnings: Vec<String>,
}

impl SystemModel {
    pub fn new(
        hamiltonian: HermitianOperator,
        number_op: HermitianOperator,
        couplings: Vec<HermitianOperator>,
        energy_unit_label: impl Into<String>,
    ) -> Result<Self> {
        let d = hamiltonian.dim();
        if number_op.dim() != d {
            return Err(Error::DimensionMismatch(format!(
                "number operator is {}x{}, hamiltonian is {d}x{d}",
                number_op.dim(),
                number_op.dim()
            )));
        }
        for (k, a) in couplings.iter().enumerate() {
            if a.dim() != d {
                return Err(Error::DimensionMismatch(format!(
                    "coupling {k} is {}x{}, hamiltonian is {d}x{d}",
                    a.dim(),
                    a.dim()
                )));
            }
        }

        let h = hamiltonian.matrix();
        let n = number_op.matrix();
        let commutator = max_abs(&(h * n - n * h));
        let bound = COMMUTATION_TOL * hamiltonian.max_abs();
        if commutator > bound {
            return Err(Error::CommutationViolation { commutator, bound });
        }

        for (index, a) in couplings.iter().enumerate() {
            let trace = a.trace().norm();
            if trace > HERMITIAN_TOL {
                return Err(Error::NotTraceless { index, trace });
            }
        }

        // Orthonormality is a convention only; the built-in models violate it.
        let mut warnings = Vec::new();
        for (i, a) in couplings.iter().enumerate() {
            for (j, b) in couplings.iter().enumerate().skip(i) {
                let overlap = (a.matrix() * b.matrix()).trace();
                let expected = if i == j { 1.0 } else { 0.0 };
                if (overlap - Complex64::new(expected, 0.0)).norm() > 1e-10 {
                    warnings.push(format!(
                        "Tr(A{i} A{j}) = {:.6e}{:+.6e}i, expected {expected}",
                        overlap.re, overlap.im
                    ));
                }
            }
        }

        Ok(Self {
            hamiltonian,
            number_op,
            couplings,
            energy_unit_label: energy_unit_label.into(),
            warnings,
        })
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    pub fn hamiltonian(&self) -> &HermitianOperator {
        &self.hamiltonian
    }

    pub fn number_op(&self) -> &HermitianOperator {
        &self.number_op
    }

    pub fn couplings(&self) -> &[HermitianOperator] {
        &self.couplings
    }

    /// Orthonormality defects of the couplings.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }
}

/// Joint eigenbasis of `H_S` and `N_S`.
#[derive(Debug, Clone)]
pub struct EigenStructure {
    pub energies: Vec<f64>,
    pub numbers: Vec<f64>,
    /// Columns are the joint eigenvectors.
    pub basis: CMatrix,
    pub energy_clusters: Vec<Vec<usize>>,
    pub number_clusters: Vec<Vec<usize>>,
    pub degeneracy_tol: f64,
    /// Common fractional part of the number eigenvalues, e.g. `1/2` for
    /// `N = -σᶻ/2`; only number differences enter the physics.
    pub number_offset: f64,
    cluster_of: Vec<usize>,
    cluster_energy: Vec<f64>,
}

impl EigenStructure {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// Index of the energy cluster containing state `a`.
    pub fn cluster_of(&self, a: usize) -> usize {
        self.cluster_of[a]
    }

    /// Mean energy of cluster `c`.
    pub fn cluster_energy(&self, c: usize) -> f64 {
        self.cluster_energy[c]
    }

    /// Energy of state `a` as seen by the secular selection rules.
    pub fn secular_energy(&self, a: usize) -> f64 {
        self.cluster_energy[self.cluster_of[a]]
    }

    pub fn degenerate(&self, a: usize, b: usize) -> bool {
        self.cluster_of[a] == self.cluster_of[b]
    }

    /// Integer particle number of state `a`, shifted by [`Self::number_offset`].
    pub fn number(&self, a: usize) -> i64 {
        (self.numbers[a] - self.number_offset).round() as i64
    }

    /// `U† A U`: matrix elements `<a|A|b>` in the joint eigenbasis.
    pub fn to_eigenbasis(&self, op: &CMatrix) -> CMatrix {
        self.basis.adjoint() * op * &self.basis
    }

    /// `U X U†`: back from the eigenbasis to the input basis.
    pub fn from_eigenbasis(&self, op: &CMatrix) -> CMatrix {
        &self.basis * op * self.basis.adjoint()
    }

    /// Spectral range `max E - min E`.
    pub fn spectral_range(&self) -> f64 {
        match (self.energies.first(), self.energies.last()) {
            (Some(lo), Some(hi)) => hi - lo,
            _ => 0.0,
        }
    }
}

/// Single-link grouping of ascending values: a new group starts whenever
/// the gap to the previous value exceeds `tol`.
pub(crate) fn single_link_groups(sorted: &[f64], tol: f64) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, &v) in sorted.iter().enumerate() {
        match groups.last_mut() {
            Some(g) if v - sorted[*g.last().unwrap()] <= tol => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    groups
}

fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..m.nrows()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(m.nrows(), m.nrows(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Default degeneracy tolerance: relative to the spectral range of `H_S`.
pub fn default_degeneracy_tol(model: &SystemModel) -> f64 {
    let h = model.hamiltonian().matrix();
    let range = if is_diagonal(h) {
        let diag: Vec<f64> = (0..h.nrows()).map(|i| h[(i, i)].re).collect();
        let lo = diag.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = diag.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        hi - lo
    } else {
        let (values, _) = hermitian_eigen(h);
        values.last().unwrap() - values.first().unwrap()
    };
    (DEFAULT_RELATIVE_DEGENERACY_TOL * range).max(1e-14)
}

/// Simultaneous eigenbasis of `H_S` and `N_S`, sorted by energy and then by
/// particle number.
pub fn diagonalize_joint(model: &SystemModel, degeneracy_tol: f64) -> Result<EigenStructure> {
    if !(degeneracy_tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "degeneracy tolerance must be positive, got {degeneracy_tol}"
        )));
    }
    let d = model.dim();
    let h = model.hamiltonian().matrix();
    let n = model.number_op().matrix();

    let (mut energies, mut basis) = if is_diagonal(h) && is_diagonal(n) {
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&i, &j| h[(i, i)].re.total_cmp(&h[(j, j)].re));
        let energies = order.iter().map(|&i| h[(i, i)].re).collect::<Vec<_>>();
        let basis = CMatrix::from_fn(d, d, |r, c| {
            if r == order[c] {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        (energies, basis)
    } else {
        hermitian_eigen(h)
    };

    // Resolve the number operator inside each degenerate energy subspace.
    let clusters = single_link_groups(&energies, degeneracy_tol);
    for cluster in &clusters {
        if cluster.len() < 2 {
            continue;
        }
        let cols: Vec<usize> = cluster.clone();
        let p = CMatrix::from_fn(d, cols.len(), |r, c| basis[(r, cols[c])]);
        let sub = p.adjoint() * n * &p;
        let sub = (&sub + sub.adjoint()) * Complex64::new(0.5, 0.0);
        let (_, w) = hermitian_eigen(&sub);
        let rotated = &p * w;
        for (c, &col) in cols.iter().enumerate() {
            basis.set_column(col, &rotated.column(c));
        }
    }

    let mut numbers: Vec<f64> = (0..d)
        .map(|a| {
            let v = basis.column(a);
            (v.adjoint() * n * v)[(0, 0)].re
        })
        .collect();
    if !is_diagonal(h) {
        for (a, e) in energies.iter_mut().enumerate() {
            let v = basis.column(a);
            *e = (v.adjoint() * h * v)[(0, 0)].re;
        }
    }
    // Integer up to one common shift.
    let number_offset = numbers.first().map_or(0.0, |n| n - n.round());
    for (index, &value) in numbers.iter().enumerate() {
        let shifted = value - number_offset;
        if (shifted - shifted.round()).abs() > INTEGER_TOL {
            return Err(Error::NonIntegerNumber { index, value });
        }
    }

    // Final order: by energy cluster, then by number, then by energy.
    let mut cluster_rank = vec![0usize; d];
    for (c, cluster) in clusters.iter().enumerate() {
        for &i in cluster {
            cluster_rank[i] = c;
        }
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| {
        cluster_rank[i]
            .cmp(&cluster_rank[j])
            .then(numbers[i].total_cmp(&numbers[j]))
            .then(energies[i].total_cmp(&energies[j]))
    });
    energies = order.iter().map(|&i| energies[i]).collect();
    numbers = order.iter().map(|&i| numbers[i]).collect();
    let basis = CMatrix::from_fn(d, d, |r, c| basis[(r, order[c])]);

    let energy_clusters = single_link_groups(&energies, degeneracy_tol);
    let mut cluster_of = vec![0usize; d];
    let mut cluster_energy = Vec::with_capacity(energy_clusters.len());
    let mut number_clusters = Vec::new();
    for (c, cluster) in energy_clusters.iter().enumerate() {
        let mean = cluster.iter().map(|&i| energies[i]).sum::<f64>() / cluster.len() as f64;
        cluster_energy.push(mean);
        let mut current: Vec<usize> = Vec::new();
        for &i in cluster {
            cluster_of[i] = c;
            match current.last() {
                Some(&last) if numbers[last].round() == numbers[i].round() => current.push(i),
                Some(_) => {
                    number_clusters.push(std::mem::take(&mut current));
                    current.push(i);
                }
                None => current.push(i),
            }
        }
        number_clusters.push(current);
    }

    Ok(EigenStructure {
        energies,
        numbers,
        basis,
        energy_clusters,
        number_clusters,
        degeneracy_tol,
        number_offset,
        cluster_of,
        cluster_energy,
    })
}

/// One Bohr frequency with the transitions `(a, b)` for which
/// `E_b - E_a` equals it.
#[derive(Debug, Clone, PartialEq)]
pub struct BohrFrequency {
    pub omega: f64,
    pub transitions: Vec<(usize, usize)>,
}

/// All distinct energy differences `E_b - E_a`, grouped within the
/// degeneracy tolerance. Includes the zero frequency.
pub fn bohr_frequencies(eig: &EigenStructure) -> Vec<BohrFrequency> {
    let nc = eig.energy_clusters.len();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(nc * nc);
    for p in 0..nc {
        for q in 0..nc {
            pairs.push((eig.cluster_energy(q) - eig.cluster_energy(p), p, q));
        }
    }
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let values: Vec<f64> = pairs.iter().map(|x| x.0).collect();
    let mut out = Vec::new();
    for group in single_link_groups(&values, eig.degeneracy_tol) {
        let mut omega = group.iter().map(|&i| values[i]).sum::<f64>() / group.len() as f64;
        let is_zero = group.iter().any(|&i| pairs[i].1 == pairs[i].2);
        if is_zero {
            omega = 0.0;
        }
        let mut transitions = Vec::new();
        for &i in &group {
            let (_, p, q) = pairs[i];
            for &a in &eig.energy_clusters[p] {
                for &b in &eig.energy_clusters[q] {
                    transitions.push((a, b));
                }
            }
        }
        transitions.sort_unstable();
        out.push(BohrFrequency { omega, transitions });
    }
    // A group straddling zero is pinned to zero; keep the set antisymmetric.
    for i in 0..out.len() {
        let j = out.len() - 1 - i;
        if i < j && out[i].omega != -out[j].omega {
            let w = 0.5 * (out[j].omega - out[i].omega);
            out[i].omega = -w;
            out[j].omega = w;
        }
    }
    out
}

/// Selection rules of a single coupling operator.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingSelection {
    pub index: usize,
    /// Values of `N_a - N_b` over nonzero `<a|A|b>`.
    pub delta_n: BTreeSet<i64>,
}

impl CouplingSelection {
    pub fn mixes_raise_and_lower(&self) -> bool {
        self.delta_n.contains(&1) && self.delta_n.contains(&-1)
    }

    pub fn beyond_single_quantum(&self) -> bool {
        self.delta_n.iter().any(|dn| dn.abs() > 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingReport {
    pub per_coupling: Vec<CouplingSelection>,
    /// Union of the selection rules of the couplings each bath uses.
    pub per_bath: Vec<BTreeSet<i64>>,
    pub warnings: Vec<String>,
}

/// Particle-number selection rules induced by each coupling operator.
///
/// `per_bath_coupling_mask[k]` lists the coupling indices bath `k` talks to;
/// an empty mask list means a single bath using every coupling.
pub fn check_conserved_coupling(
    model: &SystemModel,
    eig: &EigenStructure,
    per_bath_coupling_mask: &[Vec<usize>],
) -> CouplingReport {
    let d = model.dim();
    let mut per_coupling = Vec::new();
    let mut warnings = Vec::new();
    for (index, a) in model.couplings().iter().enumerate() {
        let elems = eig.to_eigenbasis(a.matrix());
        let floor = 1e-12 * max_abs(&elems).max(1.0);
        let mut delta_n = BTreeSet::new();
        for r in 0..d {
            for c in 0..d {
                if elems[(r, c)].norm() > floor {
                    delta_n.insert(eig.number(r) - eig.number(c));
                }
            }
        }
        let sel = CouplingSelection { index, delta_n };
        if sel.beyond_single_quantum() {
            warnings.push(format!(
                "coupling {index} changes the particle number by more than one quantum: {:?}",
                sel.delta_n
            ));
        }
        per_coupling.push(sel);
    }
    let masks: Vec<Vec<usize>> = if per_bath_coupling_mask.is_empty() {
        vec![(0..per_coupling.len()).collect()]
    } else {
        per_bath_coupling_mask.to_vec()
    };
    let per_bath = masks
        .iter()
        .map(|mask| {
            mask.iter()
                .filter_map(|&i| per_coupling.get(i))
                .flat_map(|s| s.delta_n.iter().copied())
                .collect()
        })
        .collect();
    CouplingReport {
        per_coupling,
        per_bath,
        warnings,
    }
}

/// Parses the plain-text matrix format: a line with `dim`, then `dim²`
/// lines `row col re im` with zero-based indices.
pub fn parse_operator(text: &str) -> Result<CMatrix> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (line, header) = lines.next().ok_or(Error::Parse {
        line: 0,
        message: "empty operator file".into(),
    })?;
    let dim: usize = header.parse().map_err(|_| Error::Parse {
        line,
        message: format!("expected dimension, found {header:?}"),
    })?;
    if dim == 0 {
        return Err(Error::Parse {
            line,
            message: "dimension must be positive".into(),
        });
    }
    let mut m = CMatrix::zeros(dim, dim);
    let mut seen = vec![false; dim * dim];
    let mut count = 0usize;
    for (line, l) in lines {
        let fields: Vec<&str> = l.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                line,
                message: format!("expected `row col re im`, found {l:?}"),
            });
        }
        let bad = |what: &str| Error::Parse {
            line,
            message: format!("invalid {what} in {l:?}"),
        };
        let r: usize = fields[0].parse().map_err(|_| bad("row"))?;
        let c: usize = fields[1].parse().map_err(|_| bad("column"))?;
        let re: f64 = fields[2].parse().map_err(|_| bad("real part"))?;
        let im: f64 = fields[3].parse().map_err(|_| bad("imaginary part"))?;
        if r >= dim || c >= dim {
            return Err(Error::Parse {
                line,
                message: format!("index ({r},{c}) out of range for dim {dim}"),
            });
        }
        if std::mem::replace(&mut seen[r * dim + c], true) {
            return Err(Error::Parse {
                line,
                message: format!("duplicate entry ({r},{c})"),
            });
        }
        m[(r, c)] = Complex64::new(re, im);
        count += 1;
    }
    if count != dim * dim {
        return Err(Error::Parse {
            line: 0,
            message: format!("expected {} entries, found {count}", dim * dim),
        });
    }
    Ok(m)
}

pub fn read_operator(path: impl AsRef<Path>) -> Result<HermitianOperator> {
    let text = std::fs::read_to_string(path)?;
    HermitianOperator::new(parse_operator(&text)?)
}

pub fn format_operator(m: &CMatrix) -> String {
    let mut out = format!("{}\n", m.nrows());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            let z = m[(r, c)];
            let _ = writeln!(out, "{r} {c} {:.16e} {:.16e}", z.re, z.im);
        }
    }
    out
}
