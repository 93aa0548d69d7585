//! Dense brute-force references for small lattices.
#![allow(dead_code)]

use hcbh_core::evolution::{evolve, EvolutionSettings};
use hcbh_core::hamiltonian::{apply_driven, apply_hcbh};
use hcbh_core::lattice::build_lattice;
use hcbh_core::quantum_info::{reduced_density_matrix, renyi2_entropy, trace_distance, DensityMatrix};
use hcbh_core::tomography::{linear_inversion_data, mle_reconstruct_data, MleSettings, TomographyData};
use hcbh_core::{DriveSpec, LatticeSpec, StateVector};
use nalgebra::DMatrix;
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn single(m: [[Complex64; 2]; 2]) -> CMat {
    DMatrix::from_row_slice(2, 2, &[m[0][0], m[0][1], m[1][0], m[1][1]])
}

/// σ^+ raises |0⟩ to |1⟩; the basis order is (|0⟩, |1⟩).
pub fn sigma_plus() -> CMat {
    single([[c(0.0, 0.0), c(0.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]])
}

pub fn sigma_minus() -> CMat {
    sigma_plus().adjoint()
}

pub fn sigma_z() -> CMat {
    single([[c(-1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]])
}

/// Operator acting with `ops` on the listed sites and identity elsewhere.
/// Site i is bit i of the basis index, so it sits at Kronecker position N−1−i.
pub fn embed(n: usize, ops: &[(usize, CMat)]) -> CMat {
    let mut m = DMatrix::from_element(1, 1, c(1.0, 0.0));
    for pos in (0..n).rev() {
        let factor = ops
            .iter()
            .find(|(s, _)| *s == pos)
            .map(|(_, o)| o.clone())
            .unwrap_or_else(|| DMatrix::identity(2, 2));
        m = m.kronecker(&factor);
    }
    m
}

/// Dense driven Hamiltonian assembled from Kronecker products.
pub fn dense_hamiltonian(spec: &LatticeSpec, delta: f64, omega: f64) -> CMat {
    let n = spec.n_sites();
    let dim = 1 << n;
    let mut h = DMatrix::zeros(dim, dim);
    for (&(i, j), &jij) in spec.couplings() {
        let hop = embed(n, &[(i, sigma_plus()), (j, sigma_minus())]);
        h += (&hop + hop.adjoint()) * c(jij, 0.0);
    }
    for (i, eps) in spec.detunings().iter().enumerate() {
        h += embed(n, &[(i, sigma_z())]) * c(0.5 * (delta + eps), 0.0);
    }
    if omega != 0.0 {
        for (i, a) in spec.drive().iter().enumerate() {
            let a = a * omega;
            h += embed(n, &[(i, sigma_minus())]) * a + embed(n, &[(i, sigma_plus())]) * a.conj();
        }
    }
    h
}

/// exp(−iHt) ψ through the Hermitian eigendecomposition.
pub fn dense_evolve(h: &CMat, psi: &[Complex64], t: f64) -> Vec<Complex64> {
    let eig = h.clone().symmetric_eigen();
    let v = &eig.eigenvectors;
    let coeffs = v.adjoint() * DMatrix::from_column_slice(psi.len(), 1, psi);
    let phased = DMatrix::from_fn(psi.len(), 1, |k, _| coeffs[(k, 0)] * c(0.0, -eig.eigenvalues[k] * t).exp());
    (v * phased).iter().copied().collect()
}

/// Partial trace by summing over every pair of full basis states.
pub fn naive_partial_trace(psi: &StateVector, sites: &[usize]) -> CMat {
    let n = psi.n_sites();
    let amps = psi.amplitudes();
    let v = sites.len();
    let sub_mask: usize = sites.iter().map(|s| 1 << s).sum();
    let local = |b: usize| sites.iter().enumerate().fold(0, |acc, (k, &s)| acc | ((b >> s) & 1) << k);
    let mut rho = DMatrix::zeros(1 << v, 1 << v);
    for x in 0..1usize << n {
        for y in 0..1usize << n {
            if x & !sub_mask == y & !sub_mask {
                rho[(local(x), local(y))] += amps[x] * amps[y].conj();
            }
        }
    }
    rho
}

/// −log2 Σ λ² from the eigenvalues of a Hermitian matrix.
pub fn dense_renyi2(rho: &CMat) -> f64 {
    let eig = rho.clone().symmetric_eigen();
    -eig.eigenvalues.iter().map(|l| l * l).sum::<f64>().log2()
}

pub fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Worst-case deviations of the library from the dense references.
#[derive(Debug)]
pub struct OracleReport {
    pub matvec: f64,
    pub evolution_infidelity: f64,
    pub partial_trace: f64,
    pub entropy: f64,
    pub mle_trace_distance: f64,
    pub linear_inversion_trace_distance: f64,
}

pub const MATVEC_TOL: f64 = 1e-12;
pub const EVOLUTION_TOL: f64 = 1e-6;
pub const PARTIAL_TRACE_TOL: f64 = 1e-12;
pub const ENTROPY_TOL: f64 = 1e-10;
pub const MLE_TOL: f64 = 1e-6;

impl OracleReport {
    pub fn passes(&self) -> bool {
        self.matvec < MATVEC_TOL
            && self.evolution_infidelity < EVOLUTION_TOL
            && self.partial_trace < PARTIAL_TRACE_TOL
            && self.entropy < ENTROPY_TOL
            && self.mle_trace_distance < MLE_TOL
            && self.linear_inversion_trace_distance < MLE_TOL
    }
}

/// Lattices of up to ten sites with NNN couplings, drive phases and site detunings.
pub fn oracle_lattices() -> Vec<LatticeSpec> {
    let drive = |n: usize| (0..n).map(|k| Complex64::from_polar(0.3 + 0.07 * k as f64, 0.9 * k as f64)).collect();
    let det = |n: usize| (0..n).map(|k| 0.1 * (k as f64 - 2.0)).collect();
    vec![
        build_lattice(2, 5, 1.0, 0.1, Some(drive(10)), Some(det(10))).unwrap(),
        build_lattice(3, 3, 0.8, 0.05, Some(drive(9)), None).unwrap(),
        build_lattice(1, 7, 1.0, 1.0 / 6.0, None, Some(det(7))).unwrap(),
        build_lattice(2, 4, 1.0, 0.0, Some(drive(8)), None).unwrap(),
    ]
}

pub fn run_oracles() -> OracleReport {
    let mut r = OracleReport {
        matvec: 0.0,
        evolution_infidelity: 0.0,
        partial_trace: 0.0,
        entropy: 0.0,
        mle_trace_distance: 0.0,
        linear_inversion_trace_distance: 0.0,
    };
    for (k, spec) in oracle_lattices().iter().enumerate() {
        let n = spec.n_sites();
        let psi = StateVector::random_haar(n, 100 + k as u64).unwrap();
        let (delta, omega) = (0.3, 0.7);

        let h0 = dense_hamiltonian(spec, delta, 0.0);
        let x = DMatrix::from_column_slice(psi.dim(), 1, psi.amplitudes());
        let want: Vec<Complex64> = (&h0 * &x).iter().copied().collect();
        r.matvec = r.matvec.max(max_abs_diff(&apply_hcbh(spec, delta, &psi).unwrap(), &want));
        let h = dense_hamiltonian(spec, delta, omega);
        let want: Vec<Complex64> = (&h * &x).iter().copied().collect();
        let drive = DriveSpec::new(omega, delta, 10.0).unwrap();
        r.matvec = r.matvec.max(max_abs_diff(&apply_driven(spec, &drive, &psi).unwrap(), &want));

        if n <= 8 {
            let vac = StateVector::vacuum(n).unwrap();
            let got = evolve(spec, &drive, &vac, &EvolutionSettings::default()).unwrap();
            let reference = StateVector::from_amplitudes(n, dense_evolve(&h, vac.amplitudes(), drive.duration)).unwrap();
            r.evolution_infidelity = r.evolution_infidelity.max(1.0 - got.fidelity(&reference).unwrap());
        }

        for sites in [vec![0], vec![1, 2], vec![0, 2, 3], vec![1, 3, 4, n - 1]] {
            let rho = reduced_density_matrix(&psi, &sites).unwrap();
            let naive = naive_partial_trace(&psi, &sites);
            r.partial_trace = r.partial_trace.max((rho.matrix() - &naive).iter().map(|z| z.norm()).fold(0.0, f64::max));
            r.entropy = r.entropy.max((renyi2_entropy(&rho) - dense_renyi2(&naive)).abs());
        }
    }

    let psi = StateVector::random_haar(6, 7).unwrap();
    let tight = MleSettings { tol: 1e-15, max_iterations: 20_000, ..Default::default() };
    for v in 1..=3 {
        let sites: Vec<usize> = (0..v).map(|k| 2 * k).collect();
        let rho = reduced_density_matrix(&psi, &sites).unwrap();
        let data = TomographyData::exact(&rho);
        let mle = mle_reconstruct_data(&data, &tight).unwrap();
        r.mle_trace_distance = r.mle_trace_distance.max(trace_distance(mle.rho.matrix(), rho.matrix()));
        let li = linear_inversion_data(&data);
        r.linear_inversion_trace_distance = r.linear_inversion_trace_distance.max(trace_distance(&li, rho.matrix()));
    }
    r
}

/// Density matrix from a dense matrix, for tests that build states by hand.
pub fn density(m: CMat) -> DensityMatrix {
    DensityMatrix::new(m).unwrap()
}
