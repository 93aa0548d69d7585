//! Reduced density matrices, Rényi-2 entropies, Schmidt spectra, global
//! entanglement and the analytic dephasing-entropy estimate.
//!
//! Entropies are in bits. A reduced density matrix on sites `s_0 < s_1 < …`
//! uses local qubit k for site `s_k`: bit k of a local index is the occupation
//! of `s_k`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::normalize_sites;
use crate::parallel;
use crate::state::StateVector;

const HERMITIAN_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-9;
const PSD_TOL: f64 = 1e-9;

/// Hermitian, positive-semidefinite, unit-trace matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: DMatrix<Complex64>,
}

impl DensityMatrix {
    /// Validate and wrap a matrix.
    pub fn new(matrix: DMatrix<Complex64>) -> Result<Self> {
        let dim = matrix.nrows();
        if matrix.ncols() != dim || dim == 0 || !dim.is_power_of_two() {
            return Err(Error::InvalidDensityMatrix(format!(
                "shape {}x{} is not 2^V square",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let asym = (&matrix - matrix.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if asym > HERMITIAN_TOL {
            return Err(Error::InvalidDensityMatrix(format!("not Hermitian (deviation {asym:.2e})")));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidDensityMatrix(format!("trace {tr} is not 1")));
        }
        let rho = Self { matrix };
        let min = rho.eigenvalues_ascending().first().copied().unwrap_or(0.0);
        if min < -PSD_TOL {
            return Err(Error::InvalidDensityMatrix(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(rho)
    }

    /// Wrap a matrix known to be a density matrix by construction.
    pub(crate) fn trusted(matrix: DMatrix<Complex64>) -> Self {
        Self { matrix }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Number of qubits V.
    pub fn n_qubits(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.matrix
    }

    /// Tr ρ².
    pub fn purity(&self) -> f64 {
        purity(&self.matrix)
    }

    pub fn eigenvalues_ascending(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.matrix)
    }

    /// ⟨φ|ρ|φ⟩ for a pure state on the same qubits.
    pub fn fidelity_with_pure(&self, phi: &[Complex64]) -> Result<f64> {
        if phi.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: phi.len() });
        }
        let v = nalgebra::DVector::from_column_slice(phi);
        Ok((v.adjoint() * &self.matrix * &v)[(0, 0)].re)
    }
}

/// Ascending eigenvalues of a Hermitian matrix.
pub(crate) fn hermitian_eigenvalues(m: &DMatrix<Complex64>) -> Vec<f64> {
    let mut ev: Vec<f64> = nalgebra::SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Tr M² for a Hermitian M (sum of squared magnitudes).
pub fn purity(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// Half the trace norm of a Hermitian difference.
pub fn trace_distance(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    0.5 * hermitian_eigenvalues(&(a - b)).iter().map(|e| e.abs()).sum::<f64>()
}

/// Ascending submasks of `mask`.
pub(crate) fn submasks(mask: usize) -> impl Iterator<Item = usize> {
    let count = 1usize << mask.count_ones();
    let mut x = 0usize;
    (0..count).map(move |_| {
        let cur = x;
        x = ((x | !mask).wrapping_add(1)) & mask;
        cur
    })
}

/// Deposit the low bits of `value` into the set bits of `mask`.
#[cfg(test)]
fn deposit(mut value: usize, mut mask: usize) -> usize {
    let mut out = 0;
    while mask != 0 && value != 0 {
        let low = mask & mask.wrapping_neg();
        if value & 1 == 1 {
            out |= low;
        }
        value >>= 1;
        mask &= mask - 1;
    }
    out
}

/// Tr_complement |ψ⟩⟨ψ| for the given sites.
pub fn reduced_density_matrix(psi: &StateVector, sites: &[usize]) -> Result<DensityMatrix> {
    let sorted = normalize_sites(psi.n_sites(), sites)?;
    if sorted.is_empty() {
        return Err(Error::InvalidArgument("subsystem must contain at least one site".into()));
    }
    let sub_mask = sorted.iter().fold(0usize, |m, &s| m | 1 << s);
    let comp_mask = (psi.dim() - 1) & !sub_mask;
    let rows = 1usize << sorted.len();
    let cols = psi.dim() / rows;
    let amps = psi.amplitudes();
    let sub_states: Vec<usize> = submasks(sub_mask).collect();
    // Ψ[a, c] = ψ[deposit(a, sub) | deposit(c, comp)], filled column by column.
    let mut data = vec![Complex64::default(); rows * cols];
    let comp_states: Vec<usize> = submasks(comp_mask).collect();
    parallel::fill_chunks(&mut data, rows, |offset, col| {
        let xc = comp_states[offset / rows];
        for (a, v) in col.iter_mut().enumerate() {
            *v = amps[sub_states[a] | xc];
        }
    });
    let big = DMatrix::from_vec(rows, cols, data);
    let rho = &big * big.adjoint();
    Ok(DensityMatrix::trusted(rho))
}

/// −log2 Tr ρ², clamped at zero.
pub fn renyi2_entropy(rho: &DensityMatrix) -> f64 {
    renyi2_from_purity(rho.purity())
}

pub(crate) fn renyi2_from_purity(p: f64) -> f64 {
    (-p.log2()).max(0.0)
}

/// Rényi-2 entropy of an arbitrary Hermitian matrix, computed from its raw
/// purity without positivity checks (for linear-inversion estimates).
pub fn renyi2_unphysical(m: &DMatrix<Complex64>) -> f64 {
    renyi2_from_purity(purity(m))
}

/// Eigenvalues λ_k² of a reduced density matrix, descending, summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchmidtSpectrum {
    values: Vec<f64>,
}

impl SchmidtSpectrum {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// λ_1² / λ_k² with 1-based k; infinite when λ_k² vanishes.
    pub fn ratio(&self, k: usize) -> Option<f64> {
        if k == 0 || k > self.values.len() {
            return None;
        }
        let lk = self.values[k - 1];
        Some(if lk > 0.0 { self.values[0] / lk } else { f64::INFINITY })
    }
}

/// Schmidt spectrum of a reduced density matrix: negative eigenvalues are
/// clipped to zero and the rest renormalized.
pub fn schmidt_spectrum(rho: &DensityMatrix) -> SchmidtSpectrum {
    let mut values: Vec<f64> = rho.eigenvalues_ascending().into_iter().rev().map(|e| e.max(0.0)).collect();
    let total: f64 = values.iter().sum();
    if total > 0.0 {
        values.iter_mut().for_each(|v| *v /= total);
    }
    SchmidtSpectrum { values }
}

/// Smallest χ whose leading Schmidt weights sum to at least 1 − ε.
pub fn truncation_rank(schmidt: &SchmidtSpectrum, epsilon: f64) -> Result<usize> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidArgument(format!("epsilon {epsilon} must lie in (0, 1)")));
    }
    let target = 1.0 - epsilon - 1e-12;
    let mut acc = 0.0;
    for (k, v) in schmidt.values.iter().enumerate() {
        acc += v;
        if acc >= target {
            return Ok(k + 1);
        }
    }
    Ok(schmidt.values.len())
}

/// Purities of every single-site reduced state.
pub fn single_site_purities(psi: &StateVector) -> Vec<f64> {
    let amps = psi.amplitudes();
    (0..psi.n_sites())
        .map(|i| {
            let m = 1usize << i;
            let (mut p1, mut coh) = (0.0, Complex64::default());
            for b in 0..amps.len() {
                if b & m == 0 {
                    coh += amps[b] * amps[b | m].conj();
                } else {
                    p1 += amps[b].norm_sqr();
                }
            }
            let p0 = 1.0 - p1;
            p0 * p0 + p1 * p1 + 2.0 * coh.norm_sqr()
        })
        .collect()
}

/// E_gl = 2 − (2/N) Σ_i Tr ρ_i².
pub fn global_entanglement(psi: &StateVector) -> f64 {
    let n = psi.n_sites() as f64;
    let total: f64 = single_site_purities(psi).iter().sum();
    (2.0 - 2.0 * total / n).clamp(0.0, 1.0)
}

/// Rényi-2 entropy of the Haar-averaged purity (2^V + 2^{N−V}) / (2^N + 1).
pub fn page_renyi2(v: usize, n: usize) -> Result<f64> {
    if v == 0 || v > n {
        return Err(Error::InvalidArgument(format!("need 1 <= V <= N, got V={v}, N={n}")));
    }
    let p = (2f64.powi(v as i32) + 2f64.powi((n - v) as i32)) / (2f64.powi(n as i32) + 1.0);
    Ok(renyi2_from_purity(p))
}

/// Relaxation and spin-locking dephasing rates over an experiment of length τ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoherenceParams {
    pub gamma_1: f64,
    pub gamma_nu: f64,
    pub tau: f64,
}

impl DecoherenceParams {
    pub fn new(gamma_1: f64, gamma_nu: f64, tau: f64) -> Result<Self> {
        if [gamma_1, gamma_nu, tau].iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
            return Err(Error::InvalidArgument("decoherence parameters must be >= 0".into()));
        }
        Ok(Self { gamma_1, gamma_nu, tau })
    }

    /// Γ = ¾Γ_1 + ½Γ_ν.
    pub fn rate(&self) -> f64 {
        0.75 * self.gamma_1 + 0.5 * self.gamma_nu
    }

    /// γ = 1 − e^{−Γτ}.
    pub fn gamma(&self) -> f64 {
        1.0 - (-self.rate() * self.tau).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DephasingEstimate {
    /// Added entropy in bits.
    pub entropy: f64,
    /// False when γ ≥ 1/V and the first-order channel is not trustworthy.
    pub in_regime: bool,
}

/// −log2(1 + V²γ² − 2Vγ + Vγ²) for a volume-law subsystem of volume V.
pub fn dephasing_entropy(volume: usize, gamma: f64) -> Result<DephasingEstimate> {
    dephasing_entropy_with_filling(volume, gamma, None)
}

/// As [`dephasing_entropy`], optionally adding the mean-field term
/// 2γV((N/2 − ⟨n⟩)/(N/2))² to the purity factor, with `filling = (N, ⟨n⟩)`.
pub fn dephasing_entropy_with_filling(
    volume: usize,
    gamma: f64,
    filling: Option<(usize, f64)>,
) -> Result<DephasingEstimate> {
    if volume == 0 {
        return Err(Error::InvalidArgument("volume must be at least 1".into()));
    }
    if !(gamma >= 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidArgument(format!("gamma {gamma} must lie in [0, 1]")));
    }
    let v = volume as f64;
    let mut factor = 1.0 + v * v * gamma * gamma - 2.0 * v * gamma + v * gamma * gamma;
    if let Some((n_sites, mean_n)) = filling {
        let half = n_sites as f64 / 2.0;
        let m = (half - mean_n) / half;
        factor += 2.0 * gamma * v * m * m;
    }
    let in_regime = gamma < 1.0 / v && factor > 0.0;
    let entropy = if factor > 0.0 { (-factor.log2()).max(0.0) } else { f64::INFINITY };
    Ok(DephasingEstimate { entropy, in_regime })
}
