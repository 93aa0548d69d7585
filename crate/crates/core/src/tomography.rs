//! Simulated Pauli tomography and density-matrix reconstruction.
//!
//! Measurement conventions: each qubit is measured in the eigenbasis of the
//! standard Pauli X, Y or Z. Eigenvalue +1 is recorded as bit 0 and −1 as bit 1,
//! so a Z-basis bit equals the site occupation. Local qubit k of a record is
//! the k-th site of the subsystem in ascending order; character k of a Pauli
//! string or bitstring refers to that qubit.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{normalize_sites, Subsystem, TomographyColoring};
use crate::parallel;
use crate::pauli::{
    from_pauli, outcome_probabilities, restriction_table, to_pauli, walsh_hadamard, Basis, PauliString,
};
use crate::quantum_info::{reduced_density_matrix, renyi2_entropy, renyi2_unphysical, DensityMatrix};
use crate::state::StateVector;

/// Text stored in serialized records to document the outcome encoding.
pub const BIT_CONVENTION: &str = "char k of a basis string and of a bitstring refers to the k-th \
site in ascending order; eigenvalue +1 -> '0', -1 -> '1'; Z-basis bits equal site occupation";

/// Bitstring counts for every local Pauli string of one subsystem.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord {
    sites: Vec<usize>,
    samples_per_string: u64,
    /// `counts[setting][outcome]`, setting index as in [`PauliString::setting_index`].
    counts: Vec<Vec<u64>>,
}

#[derive(Serialize, Deserialize)]
struct WireRecord {
    sites: Vec<usize>,
    samples_per_string: u64,
    bit_convention: String,
    counts: BTreeMap<String, BTreeMap<String, u64>>,
}

fn bitstring(bits: usize, v: usize) -> String {
    (0..v).map(|k| if bits >> k & 1 == 1 { '1' } else { '0' }).collect()
}

fn parse_bitstring(s: &str, v: usize) -> Result<usize> {
    if s.len() != v {
        return Err(Error::InvalidRecord(format!("bitstring {s:?} has length {} not {v}", s.len())));
    }
    s.chars().enumerate().try_fold(0usize, |acc, (k, ch)| match ch {
        '0' => Ok(acc),
        '1' => Ok(acc | 1 << k),
        _ => Err(Error::InvalidRecord(format!("invalid bitstring {s:?}"))),
    })
}

impl MeasurementRecord {
    /// Validates that every string has `samples_per_string` counts in total.
    pub fn new(sites: Vec<usize>, samples_per_string: u64, counts: Vec<Vec<u64>>) -> Result<Self> {
        let v = sites.len();
        if v == 0 || v > 12 {
            return Err(Error::InvalidRecord(format!("unsupported subsystem volume {v}")));
        }
        if sites.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidRecord("sites must be strictly increasing".into()));
        }
        let n_settings = 3usize.pow(v as u32);
        if counts.len() != n_settings {
            return Err(Error::InvalidRecord(format!(
                "expected {n_settings} Pauli strings, found {}",
                counts.len()
            )));
        }
        for (s, row) in counts.iter().enumerate() {
            if row.len() != 1 << v {
                return Err(Error::InvalidRecord(format!("string {s} has {} outcomes", row.len())));
            }
            let total: u64 = row.iter().sum();
            if total != samples_per_string {
                return Err(Error::InvalidRecord(format!(
                    "string {} has {total} samples, expected {samples_per_string}",
                    PauliString::from_setting_index(v, s)
                )));
            }
        }
        Ok(Self { sites, samples_per_string, counts })
    }

    pub fn sites(&self) -> &[usize] {
        &self.sites
    }

    pub fn volume(&self) -> usize {
        self.sites.len()
    }

    pub fn samples_per_string(&self) -> u64 {
        self.samples_per_string
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    /// Outcome counts of one local Pauli string.
    pub fn counts_for(&self, pauli: &PauliString) -> Result<&[u64]> {
        if pauli.len() != self.volume() {
            return Err(Error::InvalidRecord(format!(
                "string {pauli} does not match volume {}",
                self.volume()
            )));
        }
        Ok(&self.counts[pauli.setting_index()])
    }

    pub fn to_json(&self) -> Result<String> {
        let v = self.volume();
        let counts = self
            .counts
            .iter()
            .enumerate()
            .map(|(s, row)| {
                let outcomes = row
                    .iter()
                    .enumerate()
                    .filter(|(_, &c)| c > 0)
                    .map(|(b, &c)| (bitstring(b, v), c))
                    .collect();
                (PauliString::from_setting_index(v, s).to_string(), outcomes)
            })
            .collect();
        let wire = WireRecord {
            sites: self.sites.clone(),
            samples_per_string: self.samples_per_string,
            bit_convention: BIT_CONVENTION.into(),
            counts,
        };
        serde_json::to_string_pretty(&wire).map_err(|e| Error::InvalidRecord(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let wire: WireRecord = serde_json::from_str(text).map_err(|e| Error::InvalidRecord(e.to_string()))?;
        let v = wire.sites.len();
        let n_settings = 3usize.pow(v as u32);
        let mut counts = vec![vec![0u64; 1 << v]; n_settings];
        for (key, outcomes) in &wire.counts {
            let pauli: PauliString = key.parse()?;
            if pauli.len() != v {
                return Err(Error::InvalidRecord(format!("string {key} does not match volume {v}")));
            }
            let row = &mut counts[pauli.setting_index()];
            for (bits, &c) in outcomes {
                row[parse_bitstring(bits, v)?] += c;
            }
        }
        Self::new(wire.sites, wire.samples_per_string, counts)
    }
}

/// Outcome frequencies per setting with their statistical weights.
///
/// Built from a [`MeasurementRecord`] or from exact Born probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct TomographyData {
    n_qubits: usize,
    /// `frequencies[setting][outcome]`, each row summing to one.
    frequencies: Vec<Vec<f64>>,
    /// Number of samples behind each row.
    weights: Vec<f64>,
}

impl TomographyData {
    pub fn from_record(record: &MeasurementRecord) -> Self {
        let n = record.samples_per_string as f64;
        Self {
            n_qubits: record.volume(),
            frequencies: record.counts.iter().map(|r| r.iter().map(|&c| c as f64 / n).collect()).collect(),
            weights: vec![n; record.counts.len()],
        }
    }

    /// Infinite-sample data: the exact outcome distributions of `rho`.
    pub fn exact(rho: &DensityMatrix) -> Self {
        let v = rho.n_qubits();
        let table = restriction_table(v);
        let frequencies = outcome_probabilities(&to_pauli(rho.matrix()), &table)
            .into_iter()
            .map(|row| row.into_iter().map(|p| p.max(0.0)).collect())
            .collect();
        Self { n_qubits: v, frequencies, weights: vec![1.0; table.len()] }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn frequencies(&self) -> &[Vec<f64>] {
        &self.frequencies
    }
}

/// Pooled Pauli expectation values: every Pauli operator averaged over all
/// settings that measure it. The identity coefficient is 1.
fn pooled_pauli_coefficients(data: &TomographyData) -> Vec<Complex64> {
    let v = data.n_qubits;
    let table = restriction_table(v);
    let mut sums = vec![0.0; 1usize << (2 * v)];
    let mut hits = vec![0usize; 1usize << (2 * v)];
    for (row, idx) in data.frequencies.iter().zip(&table) {
        let mut e = row.clone();
        walsh_hadamard(&mut e);
        for (t, &p) in idx.iter().enumerate() {
            sums[p] += e[t];
            hits[p] += 1;
        }
    }
    sums.iter()
        .zip(&hits)
        .enumerate()
        .map(|(p, (&s, &h))| Complex64::new(if p == 0 { 1.0 } else { s / h as f64 }, 0.0))
        .collect()
}

/// Linear-inversion estimate (1/2^V) Σ_P ⟨P⟩ P. Hermitian with unit trace
/// but not necessarily positive.
pub fn linear_inversion(record: &MeasurementRecord) -> DMatrix<Complex64> {
    linear_inversion_data(&TomographyData::from_record(record))
}

pub fn linear_inversion_data(data: &TomographyData) -> DMatrix<Complex64> {
    from_pauli(&pooled_pauli_coefficients(data))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MleSettings {
    pub max_iterations: usize,
    /// Convergence threshold on the relative log-likelihood gain per iteration.
    pub tol: f64,
    /// Nesterov momentum with adaptive restart; plain projected ascent if false.
    pub accelerated: bool,
}

impl Default for MleSettings {
    fn default() -> Self {
        Self { max_iterations: 2000, tol: 1e-10, accelerated: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionResult {
    pub rho: DensityMatrix,
    /// Σ_s n_s Σ_b f_sb ln p_sb.
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
}

const P_FLOOR: f64 = 1e-300;

/// Weighted mean log-likelihood; −∞ if an observed outcome has p ≤ 0.
fn mean_log_likelihood(data: &TomographyData, scale: &[f64], probs: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    for ((f, p), w) in data.frequencies.iter().zip(probs).zip(scale) {
        for (&f, &p) in f.iter().zip(p) {
            if f > 0.0 {
                if p <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                total += w * f * p.ln();
            }
        }
    }
    total / probs.len() as f64
}

/// Projection of a Hermitian matrix onto unit-trace PSD matrices in
/// Frobenius norm: eigenvalues are projected onto the probability simplex.
pub(crate) fn project_to_density(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = nalgebra::SymmetricEigen::new(h);
    let mut sorted: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cum += u;
        let t = (cum - 1.0) / (j + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    let vals = eig.eigenvalues.map(|e| Complex64::new((e - theta).max(0.0), 0.0));
    &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.adjoint()
}

struct Objective<'a> {
    data: &'a TomographyData,
    table: Vec<Vec<usize>>,
    scale: Vec<f64>,
}

impl Objective<'_> {
    fn probabilities(&self, rho: &DMatrix<Complex64>) -> Vec<Vec<f64>> {
        outcome_probabilities(&to_pauli(rho), &self.table)
    }

    fn value(&self, probs: &[Vec<f64>]) -> f64 {
        mean_log_likelihood(self.data, &self.scale, probs)
    }

    /// Gradient (1/S) Σ_s ŵ_s Σ_b (f_sb / p_sb) Π_sb, assembled in the Pauli basis.
    fn gradient(&self, probs: &[Vec<f64>]) -> DMatrix<Complex64> {
        let dim = probs[0].len();
        let mut r = vec![Complex64::default(); dim * dim];
        for (s, idx) in self.table.iter().enumerate() {
            let mut w: Vec<f64> = self.data.frequencies[s]
                .iter()
                .zip(&probs[s])
                .map(|(&f, &p)| if f > 0.0 { self.scale[s] * f / p.max(P_FLOOR) } else { 0.0 })
                .collect();
            walsh_hadamard(&mut w);
            for (t, &p) in idx.iter().enumerate() {
                r[p].re += w[t];
            }
        }
        from_pauli(&r) / Complex64::new(self.table.len() as f64, 0.0)
    }
}

fn frobenius_inner(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

/// Maximum-likelihood reconstruction by projected gradient ascent over
/// density matrices, with backtracking and optional momentum.
///
/// Every accepted iterate is a valid density matrix and the likelihood never
/// decreases: a momentum step that loses likelihood is discarded and retried
/// from the last iterate without momentum.
pub fn mle_reconstruct(record: &MeasurementRecord, settings: &MleSettings) -> Result<ReconstructionResult> {
    mle_reconstruct_data(&TomographyData::from_record(record), settings)
}

pub fn mle_reconstruct_data(data: &TomographyData, settings: &MleSettings) -> Result<ReconstructionResult> {
    if settings.max_iterations == 0 || !(settings.tol >= 0.0) {
        return Err(Error::InvalidArgument("invalid MLE settings".into()));
    }
    let v = data.n_qubits;
    let dim = 1usize << v;
    let table = restriction_table(v);
    let n_settings = table.len() as f64;
    let total_weight: f64 = data.weights.iter().sum();
    let scale: Vec<f64> = data.weights.iter().map(|w| w * n_settings / total_weight).collect();
    let obj = Objective { data, table, scale };

    let mut rho = DMatrix::<Complex64>::identity(dim, dim) / Complex64::new(dim as f64, 0.0);
    let mut probs = obj.probabilities(&rho);
    let mut value = obj.value(&probs);
    if !value.is_finite() {
        return Err(Error::InsufficientData("log-likelihood undefined at the maximally mixed state".into()));
    }
    let mut prev = rho.clone();
    let mut momentum = 0.0f64;
    let mut since_restart = 0usize;
    let mut step = 1.0 / dim as f64;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < settings.max_iterations {
        iterations += 1;
        let mut base_is_rho = !settings.accelerated || momentum == 0.0;
        let accepted = loop {
            let (y, y_probs, y_value) = if base_is_rho {
                (rho.clone(), probs.clone(), value)
            } else {
                let beta = Complex64::new(momentum, 0.0);
                let y = &rho + (&rho - &prev) * beta;
                let y_probs = obj.probabilities(&y);
                let y_value = obj.value(&y_probs);
                if !y_value.is_finite() {
                    base_is_rho = true;
                    continue;
                }
                (y, y_probs, y_value)
            };
            let grad = obj.gradient(&y_probs);
            // Backtracking on the quadratic lower model of the objective at y.
            let found = loop {
                let cand = project_to_density(&(&y + &grad * Complex64::new(step, 0.0)));
                let cand_probs = obj.probabilities(&cand);
                let cand_value = obj.value(&cand_probs);
                let diff = &cand - &y;
                let model = y_value + frobenius_inner(&grad, &diff) - diff.norm_squared() / (2.0 * step);
                if cand_value.is_finite() && cand_value >= model {
                    break Some((cand, cand_probs, cand_value));
                }
                step *= 0.5;
                if step < 1e-14 {
                    break None;
                }
            };
            match found {
                Some((cand, cand_probs, cand_value)) if cand_value >= value => {
                    break Some((cand, cand_probs, cand_value));
                }
                Some(_) | None if !base_is_rho => {
                    momentum = 0.0;
                    since_restart = 0;
                    base_is_rho = true;
                }
                _ => break None,
            }
        };
        let Some((cand, cand_probs, cand_value)) = accepted else {
            // No ascent step above round-off remains.
            converged = true;
            break;
        };
        assert!(cand_value >= value, "log-likelihood decreased");
        let gain = (cand_value - value) / value.abs().max(f64::MIN_POSITIVE);
        prev = std::mem::replace(&mut rho, cand);
        probs = cand_probs;
        value = cand_value;
        if settings.accelerated {
            since_restart += 1;
            momentum = (since_restart as f64 - 1.0) / (since_restart as f64 + 2.0);
        }
        step *= 1.25;
        if gain < settings.tol {
            converged = true;
            break;
        }
    }
    let rho = DensityMatrix::new(rho.clone()).unwrap_or_else(|_| DensityMatrix::trusted(project_to_density(&rho)));
    Ok(ReconstructionResult {
        rho,
        log_likelihood: value * total_weight / n_settings,
        iterations,
        converged,
    })
}

/// Draw a multinomial sample of size `n` via conditional binomials.
pub(crate) fn sample_multinomial<R: Rng>(probs: &[f64], n: u64, rng: &mut R) -> Vec<u64> {
    let mut out = vec![0u64; probs.len()];
    let mut remaining = n;
    let mut mass: f64 = probs.iter().map(|p| p.max(0.0)).sum();
    for (k, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        let p = p.max(0.0);
        if k + 1 == probs.len() || mass <= 0.0 {
            out[k] = remaining;
            break;
        }
        let q = (p / mass).clamp(0.0, 1.0);
        let draw = Binomial::new(remaining, q).map(|b| b.sample(rng)).unwrap_or(0);
        out[k] = draw;
        remaining -= draw;
        mass -= p;
    }
    out
}

fn check_pauli(sites: &[usize], pauli: &PauliString) -> Result<()> {
    if pauli.len() != sites.len() {
        return Err(Error::InvalidArgument(format!(
            "Pauli string {pauli} has length {} but the subsystem has {} sites",
            pauli.len(),
            sites.len()
        )));
    }
    Ok(())
}

/// Sample `n_s` outcomes of measuring `pauli` on `sites`.
pub fn sample_pauli_string(
    psi: &StateVector,
    sites: &[usize],
    pauli: &PauliString,
    n_s: u64,
    seed: u64,
) -> Result<Vec<u64>> {
    let sorted = normalize_sites(psi.n_sites(), sites)?;
    if sorted.as_slice() != sites {
        return Err(Error::InvalidArgument("subsystem sites must be strictly increasing".into()));
    }
    check_pauli(sites, pauli)?;
    if n_s == 0 {
        return Err(Error::InvalidArgument("n_s must be at least 1".into()));
    }
    let rho = reduced_density_matrix(psi, sites)?;
    let coeffs = to_pauli(rho.matrix());
    let codes: Vec<usize> = pauli.0.iter().map(|b| b.code()).collect();
    let mut g: Vec<f64> = (0..1usize << sites.len())
        .map(|t| coeffs[crate::pauli::restricted_pauli(&codes, t)].re)
        .collect();
    walsh_hadamard(&mut g);
    let scale = 1.0 / g.len() as f64;
    g.iter_mut().for_each(|x| *x *= scale);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(sample_multinomial(&g, n_s, &mut rng))
}

/// Sample `n_s` shots of every local Pauli string from an exact density matrix.
pub fn sample_record<R: Rng>(rho: &DensityMatrix, sites: &[usize], n_s: u64, rng: &mut R) -> Result<MeasurementRecord> {
    if sites.len() != rho.n_qubits() {
        return Err(Error::DimensionMismatch { expected: rho.n_qubits(), actual: sites.len() });
    }
    let probs = outcome_probabilities(&to_pauli(rho.matrix()), &restriction_table(rho.n_qubits()));
    let counts = probs.iter().map(|p| sample_multinomial(p, n_s, rng)).collect();
    MeasurementRecord::new(sites.to_vec(), n_s, counts)
}

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Rotation mapping the +1 eigenvector of `basis` to |0⟩ and −1 to |1⟩.
fn basis_rotation(basis: Basis) -> Option<[[Complex64; 2]; 2]> {
    let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let ih = Complex64::new(0.0, FRAC_1_SQRT_2);
    match basis {
        Basis::Z => None,
        Basis::X => Some([[h, h], [h, -h]]),
        // H · S†
        Basis::Y => Some([[h, -ih], [h, ih]]),
    }
}

fn apply_single_qubit(amps: &mut [Complex64], site: usize, u: &[[Complex64; 2]; 2]) {
    let m = 1usize << site;
    for b in 0..amps.len() {
        if b & m == 0 {
            let (a0, a1) = (amps[b], amps[b | m]);
            amps[b] = u[0][0] * a0 + u[0][1] * a1;
            amps[b | m] = u[1][0] * a0 + u[1][1] * a1;
        }
    }
}

/// Histogram of `n_s` global outcomes for one colored setting.
fn sample_global_setting(
    psi: &StateVector,
    coloring: &TomographyColoring,
    setting: usize,
    n_s: u64,
    seed: u64,
) -> Vec<(usize, u64)> {
    let mut amps = psi.amplitudes().to_vec();
    for site in 0..psi.n_sites() {
        if let Some(color) = coloring.color(site) {
            let digit = setting / 3usize.pow(color as u32) % 3;
            if let Some(u) = basis_rotation(Basis::from_digit(digit)) {
                apply_single_qubit(&mut amps, site, &u);
            }
        }
    }
    let mut cdf = Vec::with_capacity(amps.len());
    let mut acc = 0.0;
    for a in &amps {
        acc += a.norm_sqr();
        cdf.push(acc);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(setting as u64);
    let mut draws: Vec<usize> = (0..n_s)
        .map(|_| {
            let u: f64 = rng.random::<f64>() * acc;
            cdf.partition_point(|&c| c <= u).min(amps.len() - 1)
        })
        .collect();
    draws.sort_unstable();
    let mut hist: Vec<(usize, u64)> = Vec::new();
    for d in draws {
        match hist.last_mut() {
            Some((b, c)) if *b == d => *c += 1,
            _ => hist.push((d, 1)),
        }
    }
    hist
}

/// One measurement campaign over all 3^C colored settings with `n_s` shots
/// each; every subsystem collects `n_s · 3^{C−V}` samples per local string.
pub fn simultaneous_tomography(
    psi: &StateVector,
    coloring: &TomographyColoring,
    subsystems: &[Subsystem],
    n_s: u64,
    seed: u64,
) -> Result<Vec<MeasurementRecord>> {
    if coloring.n_sites() != psi.n_sites() {
        return Err(Error::DimensionMismatch { expected: psi.n_sites(), actual: coloring.n_sites() });
    }
    if n_s == 0 {
        return Err(Error::InvalidArgument("n_s must be at least 1".into()));
    }
    for s in subsystems {
        if !coloring.is_reconstructable(s.sites()) {
            return Err(Error::NotReconstructable(s.sites().to_vec()));
        }
        normalize_sites(psi.n_sites(), s.sites())?;
    }
    let n_colors = coloring.n_colors();
    let n_settings = 3usize.pow(n_colors as u32);
    let mut counts: Vec<Vec<Vec<u64>>> = subsystems
        .iter()
        .map(|s| vec![vec![0u64; 1 << s.volume()]; 3usize.pow(s.volume() as u32)])
        .collect();
    let colors: Vec<Vec<usize>> = subsystems
        .iter()
        .map(|s| s.sites().iter().map(|&x| coloring.color(x).expect("checked")).collect())
        .collect();

    let settings: Vec<usize> = (0..n_settings).collect();
    for batch in settings.chunks(64) {
        let hists = parallel::map(batch, |&g| sample_global_setting(psi, coloring, g, n_s, seed));
        for (&g, hist) in batch.iter().zip(&hists) {
            for (k, sub) in subsystems.iter().enumerate() {
                let local_setting = colors[k]
                    .iter()
                    .rev()
                    .fold(0, |acc, &c| acc * 3 + g / 3usize.pow(c as u32) % 3);
                let row = &mut counts[k][local_setting];
                for &(bits, c) in hist {
                    let local = sub.sites().iter().enumerate().fold(0, |acc, (q, &site)| acc | (bits >> site & 1) << q);
                    row[local] += c;
                }
            }
        }
    }
    subsystems
        .iter()
        .zip(counts)
        .map(|(s, c)| {
            let per_string = n_s * 3u64.pow((n_colors - s.volume()) as u32);
            MeasurementRecord::new(s.sites().to_vec(), per_string, c)
        })
        .collect()
}

/// Reconstruction used when turning counts into an entropy estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    #[default]
    Mle,
    /// Linear inversion; entropy from the raw, possibly unphysical, matrix.
    LinearInversion,
}

/// S_2 of the reconstruction of `record`.
pub fn estimate_entropy(record: &MeasurementRecord, estimator: Estimator, mle: &MleSettings) -> Result<f64> {
    match estimator {
        Estimator::Mle => Ok(renyi2_entropy(&mle_reconstruct(record, mle)?.rho)),
        Estimator::LinearInversion => Ok(renyi2_unphysical(&linear_inversion(record))),
    }
}

/// Mean reconstructed entropy for one volume and sample count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingRow {
    pub volume: usize,
    pub n_s: u64,
    /// Mean over subsystems and seeds of S_2(ρ̂).
    pub mean_extracted: f64,
    /// Standard error of the per-seed means.
    pub stderr: f64,
    /// Mean exact S_2 over the same subsystems.
    pub mean_exact: f64,
    pub subsystems: usize,
    pub seeds: usize,
}

/// Entropy extracted from simulated finite-sample tomography as a function of
/// the number of samples per Pauli string. Each subsystem is sampled
/// independently from its exact reduced state.
pub fn sampling_study(
    psi: &StateVector,
    subsystems: &[Subsystem],
    ns_grid: &[u64],
    seeds: &[u64],
    estimator: Estimator,
    mle: &MleSettings,
) -> Result<Vec<SamplingRow>> {
    if ns_grid.is_empty() || seeds.is_empty() || ns_grid.contains(&0) {
        return Err(Error::InvalidArgument("n_s grid and seed list must be nonempty and positive".into()));
    }
    let rhos: Vec<DensityMatrix> =
        subsystems.iter().map(|s| reduced_density_matrix(psi, s.sites())).collect::<Result<_>>()?;
    let exact: Vec<f64> = rhos.iter().map(renyi2_entropy).collect();

    let jobs: Vec<(usize, usize, usize)> = (0..subsystems.len())
        .flat_map(|k| (0..ns_grid.len()).flat_map(move |a| (0..seeds.len()).map(move |b| (k, a, b))))
        .collect();
    let results: Vec<Result<f64>> = parallel::map(&jobs, |&(k, a, b)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seeds[b]);
        rng.set_stream(((k as u64) << 32) | a as u64);
        let record = sample_record(&rhos[k], subsystems[k].sites(), ns_grid[a], &mut rng)?;
        estimate_entropy(&record, estimator, mle)
    });
    let mut extracted = vec![vec![vec![0.0; seeds.len()]; ns_grid.len()]; subsystems.len()];
    for (&(k, a, b), r) in jobs.iter().zip(results) {
        extracted[k][a][b] = r?;
    }

    let mut volumes: Vec<usize> = subsystems.iter().map(|s| s.volume()).collect();
    volumes.sort_unstable();
    volumes.dedup();
    let mut rows = Vec::new();
    for &v in &volumes {
        let members: Vec<usize> = (0..subsystems.len()).filter(|&k| subsystems[k].volume() == v).collect();
        let mean_exact = members.iter().map(|&k| exact[k]).sum::<f64>() / members.len() as f64;
        for (a, &n_s) in ns_grid.iter().enumerate() {
            let per_seed: Vec<f64> = (0..seeds.len())
                .map(|b| members.iter().map(|&k| extracted[k][a][b]).sum::<f64>() / members.len() as f64)
                .collect();
            let m = per_seed.len() as f64;
            let mean = per_seed.iter().sum::<f64>() / m;
            let stderr = if per_seed.len() > 1 {
                (per_seed.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt() / m.sqrt()
            } else {
                0.0
            };
            rows.push(SamplingRow {
                volume: v,
                n_s,
                mean_extracted: mean,
                stderr,
                mean_exact,
                subsystems: members.len(),
                seeds: seeds.len(),
            });
        }
    }
    Ok(rows)
}

/// Row-major `[re, im]` pairs of a matrix.
pub fn matrix_to_pairs(m: &DMatrix<Complex64>) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(m.len());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            out.push([m[(r, c)].re, m[(r, c)].im]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_lattice;
    use crate::quantum_info::trace_distance;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn plus() -> StateVector {
        StateVector::from_amplitudes(1, vec![c(1.0, 0.0), c(1.0, 0.0)]).unwrap()
    }

    #[test]
    fn deterministic_outcomes() {
        let vac = StateVector::vacuum(3).unwrap();
        let z: PauliString = "ZZ".parse().unwrap();
        let counts = sample_pauli_string(&vac, &[0, 2], &z, 100, 1).unwrap();
        assert_eq!(counts[0], 100);
        let x: PauliString = "X".parse().unwrap();
        assert_eq!(sample_pauli_string(&plus(), &[0], &x, 50, 2).unwrap(), vec![50, 0]);
        let ip = StateVector::from_amplitudes(1, vec![c(1.0, 0.0), c(0.0, 1.0)]).unwrap();
        let y: PauliString = "Y".parse().unwrap();
        assert_eq!(sample_pauli_string(&ip, &[0], &y, 50, 2).unwrap(), vec![50, 0]);
        let one = StateVector::basis_state(1, 1).unwrap();
        assert_eq!(sample_pauli_string(&one, &[0], &"Z".parse().unwrap(), 7, 0).unwrap(), vec![0, 7]);
        assert!(sample_pauli_string(&vac, &[0], &z, 1, 0).is_err());
    }

    #[test]
    fn binomial_statistics() {
        let n = 10_000u64;
        let counts = sample_pauli_string(&StateVector::vacuum(1).unwrap(), &[0], &"X".parse().unwrap(), n, 5).unwrap();
        let sigma = (n as f64 * 0.25).sqrt();
        assert!((counts[0] as f64 - 5000.0).abs() < 3.0 * sigma);
        assert_eq!(counts[0] + counts[1], n);
        let again = sample_pauli_string(&StateVector::vacuum(1).unwrap(), &[0], &"X".parse().unwrap(), n, 5).unwrap();
        assert_eq!(counts, again);
    }

    #[test]
    fn campaign_bookkeeping() {
        let spec = build_lattice(2, 3, 1.0, 0.0, None, None).unwrap();
        let coloring = TomographyColoring::new(vec![Some(0), Some(1), Some(2), Some(2), None, Some(0)]);
        let psi = StateVector::random_haar(6, 1).unwrap();
        let subs = vec![
            Subsystem::new(&spec, &[0]).unwrap(),
            Subsystem::new(&spec, &[0, 1]).unwrap(),
            Subsystem::new(&spec, &[0, 1, 2]).unwrap(),
        ];
        let recs = simultaneous_tomography(&psi, &coloring, &subs, 20, 3).unwrap();
        assert_eq!(recs[0].samples_per_string(), 180);
        assert_eq!(recs[1].samples_per_string(), 60);
        assert_eq!(recs[2].samples_per_string(), 20);
        let again = simultaneous_tomography(&psi, &coloring, &subs, 20, 3).unwrap();
        assert_eq!(recs, again);
        let bad = vec![Subsystem::new(&spec, &[1, 4]).unwrap()];
        assert!(matches!(
            simultaneous_tomography(&psi, &coloring, &bad, 5, 0),
            Err(Error::NotReconstructable(_))
        ));
    }

    #[test]
    fn campaign_bloch_vector() {
        // Product state: site 0 in a known pure state, site 1 in |1⟩.
        let theta: f64 = 0.7;
        let phi: f64 = 1.9;
        let q = [c((theta / 2.0).cos(), 0.0), Complex64::from_polar((theta / 2.0).sin(), phi)];
        let amps = vec![c(0.0, 0.0), c(0.0, 0.0), q[0], q[1]];
        let psi = StateVector::from_amplitudes(2, amps).unwrap();
        let spec = build_lattice(1, 2, 1.0, 0.0, None, None).unwrap();
        let coloring = TomographyColoring::distinct(2);
        let subs = vec![Subsystem::new(&spec, &[0]).unwrap()];
        let rec = &simultaneous_tomography(&psi, &coloring, &subs, 3000, 8).unwrap()[0];
        let n = rec.samples_per_string() as f64;
        let exact = [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()];
        for (k, b) in ["X", "Y", "Z"].iter().enumerate() {
            let counts = rec.counts_for(&b.parse().unwrap()).unwrap();
            let est = (counts[0] as f64 - counts[1] as f64) / n;
            let sigma = ((1.0 - exact[k] * exact[k]) / n).sqrt().max(1e-3);
            assert!((est - exact[k]).abs() < 3.0 * sigma + 1e-9, "{b}: {est} vs {}", exact[k]);
        }
    }

    #[test]
    fn json_round_trip() {
        let psi = StateVector::random_haar(3, 2).unwrap();
        let rho = reduced_density_matrix(&psi, &[0, 2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let rec = sample_record(&rho, &[0, 2], 40, &mut rng).unwrap();
        let text = rec.to_json().unwrap();
        assert!(text.contains("\"XZ\""));
        assert_eq!(MeasurementRecord::from_json(&text).unwrap(), rec);
        let broken = text.replacen("\"samples_per_string\": 40", "\"samples_per_string\": 41", 1);
        assert!(MeasurementRecord::from_json(&broken).is_err());
    }

    fn random_mixed(v: usize, seed: u64) -> DensityMatrix {
        let psi = StateVector::random_haar(v + 2, seed).unwrap();
        reduced_density_matrix(&psi, &(0..v).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn exact_limit_recovers_state() {
        for v in 1..=3 {
            let rho = random_mixed(v, 10 + v as u64);
            let data = TomographyData::exact(&rho);
            let lin = linear_inversion_data(&data);
            assert!(trace_distance(&lin, rho.matrix()) < 1e-12);
            let tight = MleSettings { tol: 1e-15, max_iterations: 20_000, ..Default::default() };
            let mle = mle_reconstruct_data(&data, &tight).unwrap();
            let d = trace_distance(mle.rho.matrix(), rho.matrix());
            assert!(d < 1e-6, "v={v} d={d} it={} conv={}", mle.iterations, mle.converged);
        }
    }

    #[test]
    fn mle_from_samples() {
        let vac = DensityMatrix::new(DMatrix::from_fn(4, 4, |r, c| if r == 0 && c == 0 { c_one() } else { Complex64::default() })).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rec = sample_record(&vac, &[3, 5], 10_000, &mut rng).unwrap();
        let res = mle_reconstruct(&rec, &MleSettings::default()).unwrap();
        assert!(res.rho.fidelity_with_pure(&[c_one(), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]).unwrap() > 0.99);
        assert!(res.rho.eigenvalues_ascending()[0] >= -1e-9);

        let one = DensityMatrix::new(DMatrix::from_fn(2, 2, |r, c| if r == 0 && c == 0 { c_one() } else { Complex64::default() })).unwrap();
        let rec = sample_record(&one, &[0], 10_000, &mut rng).unwrap();
        let lin = linear_inversion(&rec);
        assert!(trace_distance(&lin, one.matrix()) < 0.05);

        let mixed = DensityMatrix::new(DMatrix::identity(2, 2) * c(0.5, 0.0)).unwrap();
        let rec = sample_record(&mixed, &[0], 10_000, &mut rng).unwrap();
        assert!(trace_distance(&linear_inversion(&rec), mixed.matrix()) < 0.05);
    }

    fn c_one() -> Complex64 {
        c(1.0, 0.0)
    }

    #[test]
    fn sampling_study_on_product_state() {
        let spec = build_lattice(2, 2, 1.0, 0.0, None, None).unwrap();
        let psi = StateVector::basis_state(4, 0b0101).unwrap();
        let subs = vec![Subsystem::new(&spec, &[0, 1]).unwrap(), Subsystem::new(&spec, &[0, 1, 3]).unwrap()];
        let rows = sampling_study(&psi, &subs, &[50, 500], &[1, 2], Estimator::Mle, &MleSettings::default()).unwrap();
        assert_eq!(rows.len(), 4);
        for r in rows {
            assert!(r.mean_exact.abs() < 1e-12);
            assert!(r.mean_extracted < 0.05, "{r:?}");
        }
    }
}
