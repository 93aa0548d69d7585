//! Hard-core Bose-Hubbard and driven Hamiltonians.
//!
//! H = Σ_{i<j} J_ij (σ_i^+ σ_j^- + σ_i^- σ_j^+) + Σ_i ((δ + ε_i)/2) σ_i^z
//!     + Ω Σ_j (α_j σ_j^- + conj(α_j) σ_j^+)
//!
//! with σ^z|1⟩ = +|1⟩. Matrix-vector products never build the 2^N matrix.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::LatticeSpec;
use crate::parallel;
use crate::state::StateVector;
use crate::symmetry;

/// Constant drive of strength Ω and detuning δ applied for `duration`.
///
/// Rates are in units of J and times in units of 1/J.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveSpec {
    pub omega: f64,
    pub delta: f64,
    pub duration: f64,
}

impl DriveSpec {
    pub fn new(omega: f64, delta: f64, duration: f64) -> Result<Self> {
        if !(omega >= 0.0 && omega.is_finite()) {
            return Err(Error::InvalidArgument(format!("drive strength {omega} must be >= 0")));
        }
        if !delta.is_finite() {
            return Err(Error::InvalidArgument("detuning must be finite".into()));
        }
        if !(duration >= 0.0 && duration.is_finite()) {
            return Err(Error::InvalidArgument(format!("duration {duration} must be >= 0")));
        }
        Ok(Self { omega, delta, duration })
    }
}

/// Precomputed terms of a Hamiltonian, applied in gather form: each output
/// amplitude is assembled from the inputs that couple to it.
#[derive(Debug, Clone)]
pub struct HamiltonianOp {
    n_sites: usize,
    /// Diagonal energy split as `lo[b & LO_MASK] + hi[b >> LO_BITS]`.
    diag_lo: Vec<f64>,
    diag_hi: Vec<f64>,
    terms: Vec<Term>,
    driven: bool,
}

/// `out[b] += coef · in[b ^ flip]` for every `b` with `b & cond_mask == cond_val`.
#[derive(Debug, Clone, Copy)]
struct Term {
    cond_mask: usize,
    cond_val: usize,
    flip: usize,
    coef: Complex64,
}

const LO_BITS: usize = 12;
const LO_MASK: usize = (1 << LO_BITS) - 1;

/// Σ_{i ∈ b} 2 f_i for every subset `b` of `field`.
fn occupied_sums(field: &[f64]) -> Vec<f64> {
    let mut table = vec![0.0; 1 << field.len()];
    for b in 1..table.len() {
        let low = b.trailing_zeros() as usize;
        table[b] = table[b & (b - 1)] + 2.0 * field[low];
    }
    table
}

/// Apply one term to the output chunk starting at `offset`. Terms only test
/// bits they flip, so `b ^ flip` is contiguous over runs below the lowest
/// tested bit.
#[inline]
fn gather_term<T, S>(out: &mut [T], input: &[T], offset: usize, term: &Term, coef: S)
where
    T: Copy + std::ops::AddAssign + std::ops::Mul<S, Output = T>,
    S: Copy,
{
    let run = (1usize << term.cond_mask.trailing_zeros()).min(out.len());
    let mut start = 0;
    while start < out.len() {
        let b = offset + start;
        if b & term.cond_mask == term.cond_val {
            let src = b ^ term.flip;
            for (o, &x) in out[start..start + run].iter_mut().zip(&input[src..src + run]) {
                *o += x * coef;
            }
        }
        start += run;
    }
}

impl HamiltonianOp {
    /// Undriven lattice Hamiltonian at detuning `delta`.
    pub fn hcbh(spec: &LatticeSpec, delta: f64) -> Self {
        let n = spec.n_sites();
        let field: Vec<f64> = spec.detunings().iter().map(|e| 0.5 * (delta + e)).collect();
        let field_sum: f64 = field.iter().sum();
        let split = n.min(LO_BITS);
        let diag_lo = occupied_sums(&field[..split]).into_iter().map(|x| x - field_sum).collect();
        let diag_hi = occupied_sums(&field[split..]);
        let mut terms = Vec::new();
        for bond in spec.bonds() {
            let mask = bond.mask();
            for val in [1usize << bond.i, 1usize << bond.j] {
                terms.push(Term { cond_mask: mask, cond_val: val, flip: mask, coef: Complex64::new(bond.strength, 0.0) });
            }
        }
        Self { n_sites: n, diag_lo, diag_hi, terms, driven: false }
    }

    /// Lattice Hamiltonian plus the common drive.
    pub fn driven(spec: &LatticeSpec, drive: &DriveSpec) -> Self {
        let mut op = Self::hcbh(spec, drive.delta);
        if drive.omega != 0.0 {
            for (site, a) in spec.drive().iter().enumerate() {
                let a = a * drive.omega;
                let m = 1usize << site;
                // σ^- lowers an occupied site into b, σ^+ raises an empty one.
                op.terms.push(Term { cond_mask: m, cond_val: 0, flip: m, coef: a });
                op.terms.push(Term { cond_mask: m, cond_val: m, flip: m, coef: a.conj() });
            }
            op.driven = true;
        }
        op
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        1 << self.n_sites
    }

    /// True when the operator has real matrix elements in the Fock basis.
    pub fn is_real(&self) -> bool {
        self.terms.iter().all(|t| t.coef.im == 0.0)
    }

    fn check_dims(&self, input: usize, out: usize) -> Result<()> {
        let dim = self.dim();
        if input != dim {
            return Err(Error::DimensionMismatch { expected: dim, actual: input });
        }
        if out != dim {
            return Err(Error::DimensionMismatch { expected: dim, actual: out });
        }
        Ok(())
    }

    #[inline]
    fn diagonal_chunk<T>(&self, out: &mut [T], input: &[T], offset: usize)
    where
        T: Copy + std::ops::Mul<f64, Output = T>,
    {
        // Chunks are aligned and no longer than the low table.
        let hi = self.diag_hi[offset >> LO_BITS];
        let lo = &self.diag_lo[offset & LO_MASK..];
        for ((o, &x), &d) in out.iter_mut().zip(&input[offset..]).zip(lo) {
            *o = x * (d + hi);
        }
    }

    /// `out = H input`.
    pub fn apply_into(&self, input: &[Complex64], out: &mut [Complex64]) -> Result<()> {
        self.check_dims(input.len(), out.len())?;
        parallel::fill_chunks(out, parallel::CHUNK, |offset, chunk| {
            self.diagonal_chunk(chunk, input, offset);
            for term in &self.terms {
                if term.coef.im == 0.0 {
                    gather_term(chunk, input, offset, term, term.coef.re);
                } else {
                    gather_term(chunk, input, offset, term, term.coef);
                }
            }
        });
        Ok(())
    }

    pub fn apply(&self, input: &[Complex64]) -> Result<Vec<Complex64>> {
        let mut out = vec![Complex64::default(); self.dim()];
        self.apply_into(input, &mut out)?;
        Ok(out)
    }

    /// Real-arithmetic product for operators without a drive.
    pub fn apply_real_into(&self, input: &[f64], out: &mut [f64]) -> Result<()> {
        if self.driven {
            return Err(Error::InvalidArgument("real product requires an undriven operator".into()));
        }
        self.check_dims(input.len(), out.len())?;
        parallel::fill_chunks(out, parallel::CHUNK, |offset, chunk| {
            self.diagonal_chunk(chunk, input, offset);
            for term in &self.terms {
                gather_term(chunk, input, offset, term, term.coef.re);
            }
        });
        Ok(())
    }

    /// ⟨ψ|H|ψ⟩ (real for Hermitian H).
    pub fn expectation(&self, psi: &[Complex64]) -> Result<f64> {
        let h = self.apply(psi)?;
        let parts = parallel::map_chunks(psi.len(), parallel::CHUNK, |r| {
            r.map(|i| (psi[i].conj() * h[i]).re).sum::<f64>()
        });
        Ok(parts.into_iter().sum())
    }
}

/// H_HCBH |ψ⟩ at detuning `delta` (unnormalized).
pub fn apply_hcbh(spec: &LatticeSpec, delta: f64, psi: &StateVector) -> Result<Vec<Complex64>> {
    HamiltonianOp::hcbh(spec, delta).apply(psi.amplitudes())
}

/// H_driven |ψ⟩ (unnormalized).
pub fn apply_driven(spec: &LatticeSpec, drive: &DriveSpec, psi: &StateVector) -> Result<Vec<Complex64>> {
    HamiltonianOp::driven(spec, drive).apply(psi.amplitudes())
}

/// Binomial coefficients C(a, b) for a, b ≤ n.
#[derive(Debug, Clone)]
pub(crate) struct Binomials {
    n: usize,
    table: Vec<usize>,
}

impl Binomials {
    pub(crate) fn new(n: usize) -> Self {
        let w = n + 2;
        let mut table = vec![0usize; w * w];
        for a in 0..w {
            table[a * w] = 1;
            for b in 1..=a {
                table[a * w + b] = table[(a - 1) * w + b - 1] + table[(a - 1) * w + b];
            }
        }
        Self { n: w, table }
    }

    #[inline]
    pub(crate) fn get(&self, a: usize, b: usize) -> usize {
        if b > a {
            0
        } else {
            self.table[a * self.n + b]
        }
    }
}

/// The n-particle Fock states of N sites in increasing numeric order.
#[derive(Debug, Clone)]
pub struct SectorBasis {
    n_sites: usize,
    n: usize,
    states: Vec<usize>,
    binom: Binomials,
}

impl SectorBasis {
    pub fn new(n_sites: usize, n: usize) -> Result<Self> {
        if n > n_sites {
            return Err(Error::SectorOutOfRange { n, n_sites });
        }
        let binom = Binomials::new(n_sites);
        let dim = binom.get(n_sites, n);
        let mut states = Vec::with_capacity(dim);
        if n == 0 {
            states.push(0);
        } else {
            // Gosper's hack walks fixed-popcount masks in numeric order.
            let mut s: usize = (1 << n) - 1;
            let limit = 1usize << n_sites;
            while s < limit {
                states.push(s);
                let c = s & s.wrapping_neg();
                let r = s + c;
                s = (((r ^ s) >> 2) / c) | r;
            }
        }
        debug_assert_eq!(states.len(), dim);
        Ok(Self { n_sites, n, states, binom })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[usize] {
        &self.states
    }

    /// Position of an n-particle state in the basis (combinatorial rank).
    #[inline]
    pub fn index_of(&self, state: usize) -> usize {
        let mut rank = 0;
        let mut bits = state;
        let mut k = 1;
        while bits != 0 {
            rank += self.binom.get(bits.trailing_zeros() as usize, k);
            bits &= bits - 1;
            k += 1;
        }
        rank
    }
}

/// Dense real symmetric block of the lattice Hamiltonian in one sector.
#[derive(Debug, Clone)]
pub struct SectorHamiltonian {
    basis: SectorBasis,
    /// Row-major, `dim × dim`.
    matrix: Vec<f64>,
}

impl SectorHamiltonian {
    pub fn n(&self) -> usize {
        self.basis.n()
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn basis(&self) -> &SectorBasis {
        &self.basis
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.matrix[row * self.dim() + col]
    }
}

/// Diagonal energy of a Fock state: Σ_i ((δ + ε_i)/2)(±1).
pub(crate) fn fock_energy(spec: &LatticeSpec, delta: f64, state: usize) -> f64 {
    spec.detunings()
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let h = 0.5 * (delta + e);
            if state >> i & 1 == 1 {
                h
            } else {
                -h
            }
        })
        .sum()
}

/// U^T H U for the n-particle sector at detuning `delta`.
pub fn sector_project(spec: &LatticeSpec, n: usize, delta: f64) -> Result<SectorHamiltonian> {
    let basis = SectorBasis::new(spec.n_sites(), n)?;
    let dim = basis.dim();
    let bonds: Vec<(usize, f64)> = spec.bonds().iter().map(|b| (b.mask(), b.strength)).collect();
    let mut matrix = vec![0.0; dim * dim];
    parallel::fill_chunks(&mut matrix, dim, |offset, row| {
        let r = offset / dim;
        let s = basis.states[r];
        row[r] = fock_energy(spec, delta, s);
        for &(mask, j) in &bonds {
            let x = s & mask;
            if x != 0 && x != mask {
                row[basis.index_of(s ^ mask)] += j;
            }
        }
    });
    Ok(SectorHamiltonian { basis, matrix })
}

/// Eigen-decomposition of one sector.
#[derive(Debug, Clone)]
pub struct SectorSpectrum {
    pub n: usize,
    /// Fock states of the sector, in the order used by `vectors`.
    pub basis: Vec<usize>,
    /// Ascending eigenvalues.
    pub energies: Vec<f64>,
    /// Column-major eigenvectors (`dim × dim`), column k for energy k.
    pub vectors: Option<Vec<f64>>,
}

impl SectorSpectrum {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Eigenvector k, if computed.
    pub fn vector(&self, k: usize) -> Option<&[f64]> {
        let d = self.dim();
        self.vectors.as_ref().map(|v| &v[k * d..(k + 1) * d])
    }
}

fn to_faer(dim: usize, matrix: &[f64]) -> faer::Mat<f64> {
    faer::Mat::<f64>::from_fn(dim, dim, |i, j| matrix[i * dim + j])
}

/// Ascending eigenvalues of a dense symmetric row-major matrix.
pub(crate) fn symmetric_eigenvalues(dim: usize, matrix: &[f64]) -> Result<Vec<f64>> {
    if dim == 0 {
        return Ok(Vec::new());
    }
    to_faer(dim, matrix)
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .map_err(|e| Error::NoConvergence(format!("{e:?}")))
}

/// Diagonalize a sector Hamiltonian with a dense symmetric eigensolver.
pub fn sector_spectrum(sector: &SectorHamiltonian, with_vectors: bool) -> Result<SectorSpectrum> {
    let dim = sector.dim();
    let basis = sector.basis.states().to_vec();
    if !with_vectors {
        let energies = symmetric_eigenvalues(dim, &sector.matrix)?;
        return Ok(SectorSpectrum { n: sector.n(), basis, energies, vectors: None });
    }
    let eig = to_faer(dim, &sector.matrix)
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::NoConvergence(format!("{e:?}")))?;
    let s = eig.S().column_vector();
    let u = eig.U();
    let energies: Vec<f64> = (0..dim).map(|k| s[k]).collect();
    let mut vectors = Vec::with_capacity(dim * dim);
    for k in 0..dim {
        for i in 0..dim {
            vectors.push(u[(i, k)]);
        }
    }
    Ok(SectorSpectrum { n: sector.n(), basis, energies, vectors: Some(vectors) })
}

/// All eigenvalues of sector `n`, ascending.
///
/// Uses the lattice reflections that preserve the couplings and detunings to
/// split the sector into smaller blocks before diagonalizing.
pub fn sector_eigenvalues(spec: &LatticeSpec, n: usize, delta: f64) -> Result<Vec<f64>> {
    symmetry::sector_eigenvalues(spec, n, delta)
}

/// Eigenvalues of every sector n = 0..=N.
///
/// Without site detunings the spectrum of sector N−n equals that of sector n
/// up to the constant field shift, which halves the work.
pub fn all_sector_eigenvalues(spec: &LatticeSpec, delta: f64) -> Result<Vec<Vec<f64>>> {
    let n_sites = spec.n_sites();
    let mirror = spec.detunings().iter().all(|&e| e == 0.0);
    let mut out: Vec<Option<Vec<f64>>> = vec![None; n_sites + 1];
    for n in 0..=n_sites {
        if mirror && n > n_sites / 2 {
            let partner = out[n_sites - n].as_ref().expect("lower half computed first");
            let shift = delta * (n as f64 - (n_sites - n) as f64);
            out[n] = Some(partner.iter().map(|e| e + shift).collect());
        } else {
            out[n] = Some(sector_eigenvalues(spec, n, delta)?);
        }
    }
    Ok(out.into_iter().map(|e| e.expect("every sector filled")).collect())
}

/// |E_max| − |E_min| of sector `n` at zero detuning.
pub fn spectrum_skew(spec: &LatticeSpec, n: usize) -> Result<f64> {
    if n == 0 || n >= spec.n_sites() {
        return Err(Error::SectorOutOfRange { n, n_sites: spec.n_sites() });
    }
    let e = sector_eigenvalues(spec, n, 0.0)?;
    Ok(skew_of(&e))
}

pub(crate) fn skew_of(energies: &[f64]) -> f64 {
    let lo = energies.first().copied().unwrap_or(0.0);
    let hi = energies.last().copied().unwrap_or(0.0);
    hi.abs() - lo.abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_lattice;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Dense 2^N matrix built from explicit Pauli products.
    fn dense(spec: &LatticeSpec, drive: &DriveSpec) -> Vec<Vec<Complex64>> {
        let dim = spec.dim();
        let n = spec.n_sites();
        let mut h = vec![vec![c(0.0, 0.0); dim]; dim];
        for b in 0..dim {
            for i in 0..n {
                let z = if b >> i & 1 == 1 { 1.0 } else { -1.0 };
                h[b][b] += c(0.5 * (drive.delta + spec.detunings()[i]) * z, 0.0);
            }
            for (&(i, j), &jij) in spec.couplings() {
                // σ_i^+ σ_j^- moves a particle from j to i.
                if b >> j & 1 == 1 && b >> i & 1 == 0 {
                    let t = b ^ (1 << i) ^ (1 << j);
                    h[t][b] += c(jij, 0.0);
                    h[b][t] += c(jij, 0.0);
                }
            }
            for i in 0..n {
                let a = spec.drive()[i] * drive.omega;
                if b >> i & 1 == 1 {
                    // σ^- lowers
                    h[b ^ (1 << i)][b] += a;
                } else {
                    h[b | (1 << i)][b] += a.conj();
                }
            }
        }
        h
    }

    #[test]
    fn vacuum_energy() {
        let spec = build_lattice(2, 3, 1.0, 0.2, None, None).unwrap();
        let v = StateVector::vacuum(6).unwrap();
        let out = apply_hcbh(&spec, 0.7, &v).unwrap();
        assert!((out[0] - c(-0.7 * 3.0, 0.0)).norm() < 1e-14);
        assert!(out[1..].iter().all(|a| a.norm() == 0.0));
    }

    #[test]
    fn single_hop() {
        let spec = build_lattice(1, 2, 1.0, 0.0, None, None).unwrap();
        let psi = StateVector::basis_state(2, 0b01).unwrap();
        let out = apply_hcbh(&spec, 0.0, &psi).unwrap();
        assert!((out[0b10] - c(1.0, 0.0)).norm() < 1e-15);
        assert_eq!(out.iter().filter(|a| a.norm() > 0.0).count(), 1);
    }

    #[test]
    fn uniform_single_particle_energy() {
        let spec = build_lattice(4, 4, 1.0, 0.0, None, None).unwrap();
        let mut amps = vec![c(0.0, 0.0); 1 << 16];
        for i in 0..16 {
            amps[1 << i] = c(0.25, 0.0);
        }
        let e = HamiltonianOp::hcbh(&spec, 0.0).expectation(&amps).unwrap();
        assert!((e - 3.0).abs() < 1e-12);
    }

    #[test]
    fn drive_terms() {
        let one = build_lattice(1, 1, 1.0, 0.0, None, None).unwrap();
        let d = DriveSpec::new(1.0, 0.0, 0.0).unwrap();
        let out = apply_driven(&one, &d, &StateVector::vacuum(1).unwrap()).unwrap();
        assert!((out[1] - c(1.0, 0.0)).norm() < 1e-15 && out[0].norm() < 1e-15);

        let phased = one.with_drive(vec![c(0.0, 1.0)]).unwrap();
        let out = apply_driven(&phased, &d, &StateVector::vacuum(1).unwrap()).unwrap();
        let h = dense(&phased, &d);
        assert!((out[1] - c(0.0, -1.0)).norm() < 1e-15);
        assert!((out[1] - h[1][0]).norm() < 1e-15);

        let spec = build_lattice(2, 2, 1.0, 0.0, None, None).unwrap();
        let psi = StateVector::random_haar(4, 3).unwrap();
        let a = apply_hcbh(&spec, 0.4, &psi).unwrap();
        let b = apply_driven(&spec, &DriveSpec::new(0.0, 0.4, 1.0).unwrap(), &psi).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn matches_dense_oracle() {
        let drive: Vec<Complex64> = (0..6).map(|k| Complex64::from_polar(0.3 + 0.1 * k as f64, 0.7 * k as f64)).collect();
        let spec = build_lattice(2, 3, 1.0, 0.15, Some(drive), Some(vec![0.1, -0.2, 0.0, 0.3, 0.05, -0.1]))
            .unwrap();
        let d = DriveSpec::new(0.6, -0.3, 1.0).unwrap();
        let h = dense(&spec, &d);
        let psi = StateVector::random_haar(6, 11).unwrap();
        let out = apply_driven(&spec, &d, &psi).unwrap();
        for (r, row) in h.iter().enumerate() {
            let expect: Complex64 = row.iter().zip(psi.amplitudes()).map(|(h, a)| h * a).sum();
            assert!((out[r] - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn real_product_matches_complex() {
        let spec = build_lattice(3, 3, 1.0, 0.1, None, None).unwrap();
        let op = HamiltonianOp::hcbh(&spec, 0.25);
        let x: Vec<f64> = (0..512).map(|i| ((i * 37 % 101) as f64).sin()).collect();
        let mut y = vec![0.0; 512];
        op.apply_real_into(&x, &mut y).unwrap();
        let xc: Vec<Complex64> = x.iter().map(|&v| c(v, 0.0)).collect();
        let yc = op.apply(&xc).unwrap();
        assert!(y.iter().zip(&yc).all(|(a, b)| (a - b.re).abs() < 1e-12 && b.im == 0.0));
    }

    #[test]
    fn sector_basis_covers_space() {
        let n_sites = 10;
        let mut all: Vec<usize> = Vec::new();
        for n in 0..=n_sites {
            let b = SectorBasis::new(n_sites, n).unwrap();
            for (k, &s) in b.states().iter().enumerate() {
                assert_eq!(s.count_ones() as usize, n);
                assert_eq!(b.index_of(s), k);
            }
            all.extend_from_slice(b.states());
        }
        all.sort_unstable();
        assert_eq!(all, (0..1 << n_sites).collect::<Vec<_>>());
        assert!(SectorBasis::new(3, 4).is_err());
    }

    #[test]
    fn sector_blocks() {
        let spec = build_lattice(4, 4, 1.0, 0.0, None, None).unwrap();
        let s0 = sector_project(&spec, 0, 0.5).unwrap();
        assert_eq!(s0.dim(), 1);
        assert!((s0.get(0, 0) + 4.0).abs() < 1e-14);

        let s1 = sector_project(&spec, 1, 0.0).unwrap();
        for a in 0..16 {
            for b in 0..16 {
                let adj = if manhattan(&spec, a, b) == 1 { 1.0 } else { 0.0 };
                assert_eq!(s1.get(s1.basis().index_of(1 << a), s1.basis().index_of(1 << b)), adj);
            }
        }
    }

    fn manhattan(spec: &LatticeSpec, a: usize, b: usize) -> usize {
        crate::lattice::manhattan_distance(spec, a, b).unwrap()
    }

    #[test]
    fn chain_sector_matches_dense_restriction() {
        let spec = build_lattice(1, 3, 1.0, 0.0, None, None).unwrap();
        let s = sector_project(&spec, 2, 0.0).unwrap();
        assert_eq!(s.basis().states(), &[0b011, 0b101, 0b110]);
        let h = dense(&spec, &DriveSpec::new(0.0, 0.0, 0.0).unwrap());
        for (r, &a) in s.basis().states().iter().enumerate() {
            for (col, &b) in s.basis().states().iter().enumerate() {
                assert!((s.get(r, col) - h[a][b].re).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn grid_ground_energy() {
        let spec = build_lattice(4, 4, 1.0, 0.0, None, None).unwrap();
        let sp = sector_spectrum(&sector_project(&spec, 1, 0.0).unwrap(), false).unwrap();
        let expect = -2.0 * 2.0 * (std::f64::consts::PI / 5.0).cos();
        assert!((sp.energies[0] - expect).abs() < 1e-10);
    }

    #[test]
    fn trivial_sectors() {
        let spec = build_lattice(2, 2, 1.0, 0.1, None, None).unwrap();
        let e0 = sector_spectrum(&sector_project(&spec, 0, 0.3).unwrap(), false).unwrap();
        let e4 = sector_spectrum(&sector_project(&spec, 4, 0.3).unwrap(), false).unwrap();
        assert!((e0.energies[0] + 0.6).abs() < 1e-14);
        assert!((e4.energies[0] - 0.6).abs() < 1e-14);
    }

    #[test]
    fn eigenvectors_are_orthonormal() {
        let spec = build_lattice(3, 3, 1.0, 0.1, None, None).unwrap();
        let sector = sector_project(&spec, 4, 0.0).unwrap();
        let sp = sector_spectrum(&sector, true).unwrap();
        let d = sp.dim();
        for a in 0..d {
            for b in 0..d {
                let dot: f64 = sp.vector(a).unwrap().iter().zip(sp.vector(b).unwrap()).map(|(x, y)| x * y).sum();
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-10);
            }
        }
        // H v = E v
        let v = sp.vector(5).unwrap();
        for r in 0..d {
            let hv: f64 = (0..d).map(|k| sector.get(r, k) * v[k]).sum();
            assert!((hv - sp.energies[5] * v[r]).abs() < 1e-10);
        }
    }

    #[test]
    fn skew_signs() {
        let plain = build_lattice(3, 4, 1.0, 0.0, None, None).unwrap();
        for n in 1..12 {
            assert!(spectrum_skew(&plain, n).unwrap().abs() < 1e-9);
        }
        let nnn = build_lattice(4, 4, 1.0, 0.1, None, None).unwrap();
        let one = sector_spectrum(&sector_project(&nnn, 1, 0.0).unwrap(), false).unwrap();
        assert!((spectrum_skew(&nnn, 1).unwrap() - skew_of(&one.energies)).abs() < 1e-10);
        assert!(spectrum_skew(&nnn, 1).unwrap() > 0.0);
        assert!(spectrum_skew(&nnn, 0).is_err());
    }

    #[test]
    fn mirrored_sectors_match_direct() {
        let spec = build_lattice(3, 3, 1.0, 0.1, None, None).unwrap();
        let all = all_sector_eigenvalues(&spec, 0.4).unwrap();
        for (n, e) in all.iter().enumerate() {
            let direct = sector_spectrum(&sector_project(&spec, n, 0.4).unwrap(), false).unwrap();
            assert_eq!(e.len(), direct.energies.len());
            assert!(e.iter().zip(&direct.energies).all(|(a, b)| (a - b).abs() < 1e-10));
        }
    }
}
