//! Secular Born-Markov generator: dampening coefficients, Lamb shift, the
//! Liouvillian superoperator and its reduction to a rate ladder.
//!
//! Everything is expressed in the joint eigenbasis of `H_S` and `N_S`.
//! Density matrices are vectorized column-major: `ρ_{ij}` sits at `i + d·j`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use nalgebra::DVector;
use num_complex::Complex64;

use crate::baths::SpectralMatrix;
use crate::error::{Error, Result};
use crate::operators::{bohr_frequencies, max_abs, CMatrix, EigenStructure, SystemModel};
use crate::steady::RateLadder;

/// Matrix elements below this fraction of the largest one are exact zeros.
pub const MATRIX_ELEMENT_CUTOFF: f64 = 1e-12;
/// An assembled entry is dropped when it is this small relative to the sum
/// of the magnitudes of its contributions, i.e. when it is pure cancellation.
pub const PRUNE_TOL: f64 = 1e-14;
/// Tolerance on `σ(ω) + σ(ω)† = 0`.
pub const SIGMA_ANTI_HERMITIAN_TOL: f64 = 1e-12;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

pub type GammaIndex = (usize, usize, usize, usize);

/// Sparse `γ̃_{ab,cd}` and `σ̃_{ab}` of one reservoir or of their sum.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CoefficientSet {
    pub gamma: BTreeMap<GammaIndex, Complex64>,
    pub sigma: BTreeMap<(usize, usize), Complex64>,
}

impl CoefficientSet {
    pub fn gamma_at(&self, a: usize, b: usize, c: usize, d: usize) -> Complex64 {
        self.gamma.get(&(a, b, c, d)).copied().unwrap_or(ZERO)
    }

    pub fn sigma_at(&self, a: usize, b: usize) -> Complex64 {
        self.sigma.get(&(a, b)).copied().unwrap_or(ZERO)
    }

    /// Rate of the jump `b → a`, `γ̃_{ab,ab}`.
    pub fn rate(&self, from: usize, to: usize) -> f64 {
        self.gamma_at(to, from, to, from).re
    }

    pub fn max_gamma(&self) -> f64 {
        self.gamma.values().fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn is_empty(&self) -> bool {
        self.gamma.is_empty() && self.sigma.is_empty()
    }

    fn add_assign(&mut self, other: &CoefficientSet) {
        for (k, v) in &other.gamma {
            *self.gamma.entry(*k).or_insert(ZERO) += v;
        }
        for (k, v) in &other.sigma {
            *self.sigma.entry(*k).or_insert(ZERO) += v;
        }
    }

    /// Largest `|γ̃_{ab,cd} - conj(γ̃_{cd,ab})|` relative to `max|γ̃|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let scale = self.max_gamma().max(1e-300);
        self.gamma
            .iter()
            .map(|(&(a, b, c, d), v)| (v - self.gamma_at(c, d, a, b).conj()).norm() / scale)
            .fold(0.0, f64::max)
    }
}

/// Coefficients of the full generator together with the per-reservoir sets.
#[derive(Debug, Clone, PartialEq)]
pub struct BmsCoefficients {
    pub dim: usize,
    pub total: CoefficientSet,
    /// One set per reservoir, in attachment order.
    pub per_bath: Vec<CoefficientSet>,
    pub energies: Vec<f64>,
    pub numbers: Vec<i64>,
}

impl BmsCoefficients {
    /// Wraps a single set, e.g. one read back from a text file.
    pub fn from_set(set: CoefficientSet, eig: &EigenStructure) -> Result<Self> {
        let dim = eig.dim();
        let out_of_range = set.gamma.keys().any(|&(a, b, c, d)| a.max(b).max(c).max(d) >= dim)
            || set.sigma.keys().any(|&(a, b)| a.max(b) >= dim);
        if out_of_range {
            return Err(Error::DimensionMismatch(format!(
                "coefficient index out of range for dimension {dim}"
            )));
        }
        Ok(Self {
            dim,
            total: set.clone(),
            per_bath: vec![set],
            energies: eig.energies.clone(),
            numbers: (0..dim).map(|a| eig.number(a)).collect(),
        })
    }

    pub fn gamma(&self) -> &BTreeMap<GammaIndex, Complex64> {
        &self.total.gamma
    }

    pub fn sigma(&self) -> &BTreeMap<(usize, usize), Complex64> {
        &self.total.sigma
    }

    /// Replaces the set of reservoir `k` and recomputes the total.
    pub fn replace_bath(&mut self, k: usize, set: CoefficientSet) -> Result<()> {
        if k >= self.per_bath.len() {
            return Err(Error::InvalidArgument(format!(
                "no reservoir {k}; {} attached",
                self.per_bath.len()
            )));
        }
        self.per_bath[k] = set;
        let mut total = CoefficientSet::default();
        for s in &self.per_bath {
            total.add_assign(s);
        }
        self.total = total;
        Ok(())
    }
}

struct Accumulator {
    gamma: BTreeMap<GammaIndex, (Complex64, f64)>,
    sigma: BTreeMap<(usize, usize), (Complex64, f64)>,
}

impl Accumulator {
    fn finish(self) -> CoefficientSet {
        let keep = |(v, mag): &(Complex64, f64)| *v != ZERO && v.norm() > PRUNE_TOL * mag;
        CoefficientSet {
            gamma: self.gamma.into_iter().filter(|(_, x)| keep(x)).map(|(k, (v, _))| (k, v)).collect(),
            sigma: self.sigma.into_iter().filter(|(_, x)| keep(x)).map(|(k, (v, _))| (k, v)).collect(),
        }
    }
}

fn eigenbasis_elements(model: &SystemModel, eig: &EigenStructure, couplings: &[usize]) -> Vec<CMatrix> {
    couplings
        .iter()
        .map(|&i| {
            let mut m = eig.to_eigenbasis(model.couplings()[i].matrix());
            let cutoff = MATRIX_ELEMENT_CUTOFF * max_abs(&m);
            m.iter_mut().for_each(|z| {
                if z.norm() <= cutoff {
                    *z = ZERO;
                }
            });
            m
        })
        .collect()
}

/// Coefficients of one reservoir coupled through every system coupling.
pub fn assemble_coefficients(eig: &EigenStructure, model: &SystemModel, sm: &SpectralMatrix) -> Result<BmsCoefficients> {
    let all: Vec<usize> = (0..model.couplings().len()).collect();
    assemble_coefficients_with(eig, model, sm, &all)
}

/// Coefficients of one reservoir coupled through the listed couplings;
/// index `α` of the spectral matrix refers to `couplings[α]`.
pub fn assemble_coefficients_with(
    eig: &EigenStructure,
    model: &SystemModel,
    sm: &SpectralMatrix,
    couplings: &[usize],
) -> Result<BmsCoefficients> {
    if eig.dim() != model.dim() {
        return Err(Error::DimensionMismatch(format!(
            "eigenstructure has dimension {}, model {}",
            eig.dim(),
            model.dim()
        )));
    }
    if sm.size() != couplings.len() {
        return Err(Error::DimensionMismatch(format!(
            "spectral matrix is {}x{} but the bath uses {} couplings",
            sm.size(),
            sm.size(),
            couplings.len()
        )));
    }
    if let Some(&bad) = couplings.iter().find(|&&i| i >= model.couplings().len()) {
        return Err(Error::DimensionMismatch(format!(
            "coupling {bad} does not exist; the model has {}",
            model.couplings().len()
        )));
    }
    let elems = eigenbasis_elements(model, eig, couplings);
    let mut acc = Accumulator {
        gamma: BTreeMap::new(),
        sigma: BTreeMap::new(),
    };

    for group in bohr_frequencies(eig) {
        if let Some(channels) = sm.channels() {
            for ch in channels {
                let w = (ch.weight)(group.omega)?;
                if w == 0.0 {
                    continue;
                }
                // z_ab = Σ_β conj(q_β) <a|A_β|b>, with its cancellation scale.
                let z: Vec<((usize, usize), Complex64, f64)> = group
                    .transitions
                    .iter()
                    .filter_map(|&(a, b)| {
                        let (mut s, mut mag) = (ZERO, 0.0);
                        for (q, m) in ch.vector.iter().zip(&elems) {
                            let t = q.conj() * m[(a, b)];
                            s += t;
                            mag += t.norm();
                        }
                        (s != ZERO && s.norm() > PRUNE_TOL * mag).then_some(((a, b), s, mag))
                    })
                    .collect();
                for &((a, b), zab, mab) in &z {
                    for &((c, d), zcd, mcd) in &z {
                        let e = acc.gamma.entry((a, b, c, d)).or_insert((ZERO, 0.0));
                        e.0 += zab * zcd.conj() * w;
                        e.1 += w.abs() * mab * mcd;
                    }
                }
            }
        } else {
            let g = sm.gamma(group.omega)?;
            let n = couplings.len();
            for &(a, b) in &group.transitions {
                for &(c, d) in &group.transitions {
                    let (mut s, mut mag) = (ZERO, 0.0);
                    for al in 0..n {
                        let mcd = elems[al][(c, d)].conj();
                        if mcd == ZERO {
                            continue;
                        }
                        for be in 0..n {
                            let t = g[(al, be)] * elems[be][(a, b)] * mcd;
                            s += t;
                            mag += t.norm();
                        }
                    }
                    if mag > 0.0 {
                        let e = acc.gamma.entry((a, b, c, d)).or_insert((ZERO, 0.0));
                        e.0 += s;
                        e.1 += mag;
                    }
                }
            }
        }
    }

    if sm.sigma(0.0).is_some() {
        assemble_lamb_shift(eig, sm, &elems, &mut acc)?;
    }

    let set = acc.finish();
    Ok(BmsCoefficients {
        dim: eig.dim(),
        total: set.clone(),
        per_bath: vec![set],
        energies: eig.energies.clone(),
        numbers: (0..eig.dim()).map(|a| eig.number(a)).collect(),
    })
}

/// `σ̃_{ab} = (1/2i) Σ_c Σ_{αβ} σ_{αβ}(E_a - E_c) <c|A_α|a>* <c|A_β|b>` for
/// degenerate `a, b`.
fn assemble_lamb_shift(eig: &EigenStructure, sm: &SpectralMatrix, elems: &[CMatrix], acc: &mut Accumulator) -> Result<()> {
    let d = eig.dim();
    let n = elems.len();
    let half_over_i = Complex64::new(0.0, -0.5);
    let mut cache: BTreeMap<(usize, usize), CMatrix> = BTreeMap::new();
    for cluster in &eig.energy_clusters {
        for &a in cluster {
            for &b in cluster {
                let (mut s, mut mag) = (ZERO, 0.0);
                for c in 0..d {
                    let key = (eig.cluster_of(a), eig.cluster_of(c));
                    if !cache.contains_key(&key) {
                        let w = eig.secular_energy(a) - eig.secular_energy(c);
                        let sig = sm.sigma(w).expect("sigma present")?;
                        let scale = max_abs(&sig);
                        let defect = max_abs(&(&sig + sig.adjoint()));
                        if defect > SIGMA_ANTI_HERMITIAN_TOL * scale.max(1.0) {
                            return Err(Error::InvalidArgument(format!(
                                "odd bath transform must be anti-hermitian; defect {defect:e} at omega = {w}"
                            )));
                        }
                        cache.insert(key, sig);
                    }
                    let sig = &cache[&key];
                    for al in 0..n {
                        let x = elems[al][(c, a)].conj();
                        if x == ZERO {
                            continue;
                        }
                        for be in 0..n {
                            let t = half_over_i * sig[(al, be)] * x * elems[be][(c, b)];
                            s += t;
                            mag += t.norm();
                        }
                    }
                }
                if mag > 0.0 {
                    let e = acc.sigma.entry((a, b)).or_insert((ZERO, 0.0));
                    e.0 += s;
                    e.1 += mag;
                }
            }
        }
    }
    Ok(())
}

/// Entrywise sum of reservoir coefficients; the per-reservoir sets are kept.
pub fn combine_baths(per_bath: &[BmsCoefficients]) -> Result<BmsCoefficients> {
    let first = per_bath
        .first()
        .ok_or_else(|| Error::InvalidArgument("no coefficient sets to combine".into()))?;
    for other in &per_bath[1..] {
        if other.dim != first.dim || other.energies != first.energies || other.numbers != first.numbers {
            return Err(Error::DimensionMismatch(
                "coefficient sets were assembled on different eigenstructures".into(),
            ));
        }
    }
    let mut total = CoefficientSet::default();
    let mut sets = Vec::new();
    for c in per_bath {
        total.add_assign(&c.total);
        sets.extend(c.per_bath.iter().cloned());
    }
    Ok(BmsCoefficients {
        dim: first.dim,
        total,
        per_bath: sets,
        energies: first.energies.clone(),
        numbers: first.numbers.clone(),
    })
}

/// Text form: `a b c d re im` per `γ̃` entry, then `a b re im` per `σ̃` entry.
pub fn format_coefficients(set: &CoefficientSet) -> String {
    let mut out = String::from("# gamma: a b c d re im\n");
    for (&(a, b, c, d), z) in &set.gamma {
        let _ = writeln!(out, "{a} {b} {c} {d} {:.16e} {:.16e}", z.re, z.im);
    }
    out.push_str("# sigma: a b re im\n");
    for (&(a, b), z) in &set.sigma {
        let _ = writeln!(out, "{a} {b} {:.16e} {:.16e}", z.re, z.im);
    }
    out
}

pub fn parse_coefficients(text: &str) -> Result<CoefficientSet> {
    let mut set = CoefficientSet::default();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = || Error::Parse {
            line: i + 1,
            message: format!("expected `a b c d re im` or `a b re im`, found {line:?}"),
        };
        let f: Vec<&str> = line.split_whitespace().collect();
        let idx = |s: &str| s.parse::<usize>().map_err(|_| bad());
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
        match f.len() {
            6 => {
                let key = (idx(f[0])?, idx(f[1])?, idx(f[2])?, idx(f[3])?);
                set.gamma.insert(key, Complex64::new(num(f[4])?, num(f[5])?));
            }
            4 => {
                let key = (idx(f[0])?, idx(f[1])?);
                set.sigma.insert(key, Complex64::new(num(f[2])?, num(f[3])?));
            }
            _ => return Err(bad()),
        }
    }
    Ok(set)
}

/// One connected component of the superoperator.
#[derive(Debug, Clone, PartialEq)]
pub struct LiouvillianBlock {
    /// Vectorized indices covered by the block, ascending.
    pub indices: Vec<usize>,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<Complex64>,
}

impl LiouvillianBlock {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `y = L_block x` on local coordinates.
    pub fn apply_local(&self, x: &[Complex64], y: &mut [Complex64]) {
        for (r, out) in y.iter_mut().enumerate() {
            let mut s = ZERO;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.values[k] * x[self.cols[k]];
            }
            *out = s;
        }
    }

    pub fn to_dense(&self) -> CMatrix {
        let n = self.len();
        let mut m = CMatrix::zeros(n, n);
        for r in 0..n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.cols[k])] += self.values[k];
            }
        }
        m
    }

    /// Largest absolute row sum.
    pub fn row_sum_bound(&self) -> f64 {
        (0..self.len())
            .map(|r| (self.row_ptr[r]..self.row_ptr[r + 1]).map(|k| self.values[k].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// `ρ̇ = L ρ` on column-major vectorized density matrices in the joint
/// eigenbasis, stored as independent blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct Liouvillian {
    dim: usize,
    blocks: Vec<LiouvillianBlock>,
    /// `(block, local index)` of every vectorized index.
    location: Vec<(usize, usize)>,
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

impl Liouvillian {
    /// Builds the block structure from `(row, col, value)` entries.
    pub fn from_entries(dim: usize, entries: impl IntoIterator<Item = (usize, usize, Complex64)>) -> Self {
        let n = dim * dim;
        let mut merged: BTreeMap<(usize, usize), Complex64> = BTreeMap::new();
        for (r, c, v) in entries {
            *merged.entry((r, c)).or_insert(ZERO) += v;
        }
        merged.retain(|_, v| *v != ZERO);

        let mut parent: Vec<usize> = (0..n).collect();
        for &(r, c) in merged.keys() {
            let (a, b) = (find(&mut parent, r), find(&mut parent, c));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
        let mut block_of_root: BTreeMap<usize, usize> = BTreeMap::new();
        let mut location = vec![(0, 0); n];
        let mut members: Vec<Vec<usize>> = Vec::new();
        for i in 0..n {
            let root = find(&mut parent, i);
            let b = *block_of_root.entry(root).or_insert_with(|| {
                members.push(Vec::new());
                members.len() - 1
            });
            location[i] = (b, members[b].len());
            members[b].push(i);
        }
        let mut rows: Vec<Vec<Vec<(usize, Complex64)>>> = members.iter().map(|m| vec![Vec::new(); m.len()]).collect();
        for (&(r, c), &v) in &merged {
            let (b, lr) = location[r];
            let (_, lc) = location[c];
            rows[b][lr].push((lc, v));
        }
        let blocks = members
            .into_iter()
            .zip(rows)
            .map(|(indices, rows)| {
                let mut row_ptr = vec![0];
                let mut cols = Vec::new();
                let mut values = Vec::new();
                for row in rows {
                    for (c, v) in row {
                        cols.push(c);
                        values.push(v);
                    }
                    row_ptr.push(cols.len());
                }
                LiouvillianBlock {
                    indices,
                    row_ptr,
                    cols,
                    values,
                }
            })
            .collect();
        Self { dim, blocks, location }
    }

    /// Hilbert-space dimension `d`; the superoperator is `d² × d²`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn blocks(&self) -> &[LiouvillianBlock] {
        &self.blocks
    }

    /// Block containing the vectorized index `i`.
    pub fn block_of(&self, i: usize) -> usize {
        self.location[i].0
    }

    pub fn vec_index(&self, row: usize, col: usize) -> usize {
        row + self.dim * col
    }

    pub fn apply(&self, x: &DVector<Complex64>) -> DVector<Complex64> {
        let mut y = DVector::zeros(x.len());
        let mut xl = Vec::new();
        let mut yl = Vec::new();
        for b in &self.blocks {
            xl.clear();
            xl.extend(b.indices.iter().map(|&i| x[i]));
            yl.resize(b.len(), ZERO);
            b.apply_local(&xl, &mut yl);
            for (k, &i) in b.indices.iter().enumerate() {
                y[i] = yl[k];
            }
        }
        y
    }

    pub fn apply_matrix(&self, rho: &CMatrix) -> CMatrix {
        let v = DVector::from_column_slice(rho.as_slice());
        let y = self.apply(&v);
        CMatrix::from_column_slice(self.dim, self.dim, y.as_slice())
    }

    pub fn to_dense(&self) -> CMatrix {
        let n = self.dim * self.dim;
        let mut m = CMatrix::zeros(n, n);
        for b in &self.blocks {
            let local = b.to_dense();
            for (r, &gr) in b.indices.iter().enumerate() {
                for (c, &gc) in b.indices.iter().enumerate() {
                    m[(gr, gc)] = local[(r, c)];
                }
            }
        }
        m
    }

    /// Largest absolute entry.
    pub fn max_norm(&self) -> f64 {
        self.blocks
            .iter()
            .flat_map(|b| b.values.iter())
            .fold(0.0, |m, z| m.max(z.norm()))
    }

    /// `max_j |Σ_i L_{(ii), j}|`: the adjoint generator applied to the identity.
    pub fn trace_defect(&self) -> f64 {
        let n = self.dim * self.dim;
        let mut col_sums = vec![ZERO; n];
        for b in &self.blocks {
            for (r, &gr) in b.indices.iter().enumerate() {
                if gr % (self.dim + 1) != 0 {
                    continue;
                }
                for k in b.row_ptr[r]..b.row_ptr[r + 1] {
                    col_sums[b.indices[b.cols[k]]] += b.values[k];
                }
            }
        }
        col_sums.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// `dt = 0.05 / bound`, with the row-sum bound taken over the blocks
    /// that carry weight in `rho0`.
    pub fn default_time_step(&self, rho0: &CMatrix) -> f64 {
        let bound = self
            .blocks
            .iter()
            .filter(|b| b.indices.iter().any(|&i| rho0.as_slice()[i] != ZERO))
            .map(LiouvillianBlock::row_sum_bound)
            .fold(0.0, f64::max);
        if bound > 0.0 {
            0.05 / bound
        } else {
            1.0
        }
    }
}

/// Full generator: `-i[H_S + σ̃, ρ]` plus the dissipator built from `γ̃`.
pub fn build_liouvillian(coeff: &BmsCoefficients, eig: &EigenStructure) -> Result<Liouvillian> {
    let d = eig.dim();
    if coeff.dim != d {
        return Err(Error::DimensionMismatch(format!(
            "coefficients have dimension {}, eigenstructure {d}",
            coeff.dim
        )));
    }
    let idx = |i: usize, j: usize| i + d * j;
    let mut entries: Vec<(usize, usize, Complex64)> = Vec::new();

    let mut h: BTreeMap<(usize, usize), Complex64> = BTreeMap::new();
    for a in 0..d {
        h.insert((a, a), Complex64::new(eig.energies[a], 0.0));
    }
    for (&k, &v) in coeff.sigma() {
        *h.entry(k).or_insert(ZERO) += v;
    }
    let minus_i = Complex64::new(0.0, -1.0);
    for (&(i, k), &v) in &h {
        for j in 0..d {
            entries.push((idx(i, j), idx(k, j), minus_i * v));
            entries.push((idx(j, k), idx(j, i), -minus_i * v));
        }
    }

    // K = Σ γ̃_{ab,cd} δ_{ca} |d><b|.
    let mut kmat: BTreeMap<(usize, usize), Complex64> = BTreeMap::new();
    for (&(a, b, c, dd), &g) in coeff.gamma() {
        entries.push((idx(a, c), idx(b, dd), g));
        if a == c {
            *kmat.entry((dd, b)).or_insert(ZERO) += g;
        }
    }
    let half = Complex64::new(-0.5, 0.0);
    for (&(i, k), &v) in &kmat {
        for j in 0..d {
            entries.push((idx(i, j), idx(k, j), half * v));
            entries.push((idx(j, k), idx(j, i), half * v));
        }
    }
    Ok(Liouvillian::from_entries(d, entries))
}

/// Reduces a generator whose populations decouple from coherences and whose
/// jumps change the particle number by one to a birth-death ladder.
pub fn reduce_to_ladder(coeff: &BmsCoefficients, eig: &EigenStructure) -> Result<RateLadder> {
    let d = eig.dim();
    let scale = coeff.total.max_gamma().max(coeff.sigma().values().fold(0.0, |m, z| m.max(z.norm())));
    let floor = 1e-12 * scale;

    for (&(a, b, c, dd), v) in coeff.gamma() {
        if (a == c) != (b == dd) && v.norm() > floor {
            return Err(Error::SecularStructure(format!(
                "coefficient ({a},{b},{c},{dd}) = {v:e} links populations and coherences"
            )));
        }
    }
    for (&(a, b), v) in coeff.sigma() {
        if a != b && v.norm() > floor {
            return Err(Error::SecularStructure(format!(
                "Lamb shift ({a},{b}) = {v:e} mixes degenerate levels"
            )));
        }
    }

    let mut states: Vec<usize> = (0..d).collect();
    states.sort_by_key(|&a| eig.number(a));
    let numbers: Vec<i64> = states.iter().map(|&a| eig.number(a)).collect();
    let distinct: BTreeSet<i64> = numbers.iter().copied().collect();
    if distinct.len() != d {
        return Err(Error::NotALadder("several states share one particle number".into()));
    }
    if let Some(w) = numbers.windows(2).find(|w| w[1] != w[0] + 1) {
        return Err(Error::NotALadder(format!(
            "particle numbers {} and {} are not adjacent",
            w[0], w[1]
        )));
    }

    for (&(a, b, c, dd), v) in coeff.gamma() {
        if a == c && b == dd && a != b && v.norm() > floor && (eig.number(a) - eig.number(b)).abs() != 1 {
            return Err(Error::NotALadder(format!(
                "transition {b} -> {a} changes the particle number by {}",
                eig.number(a) - eig.number(b)
            )));
        }
    }

    let links = d - 1;
    let omega: Vec<f64> = (0..links).map(|m| eig.energies[states[m + 1]] - eig.energies[states[m]]).collect();
    let split = |set: &CoefficientSet| -> (Vec<f64>, Vec<f64>) {
        let up = (0..links).map(|m| set.rate(states[m], states[m + 1]).max(0.0)).collect();
        let down = (0..links).map(|m| set.rate(states[m + 1], states[m]).max(0.0)).collect();
        (up, down)
    };
    let (up, down) = split(&coeff.total);
    let (per_bath_up, per_bath_down) = coeff.per_bath.iter().map(split).unzip();
    let mut ladder = RateLadder::new(omega, up, down)?;
    ladder.per_bath_up = per_bath_up;
    ladder.per_bath_down = per_bath_down;
    ladder.states = states;
    Ok(ladder)
}
