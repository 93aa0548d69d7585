//! Volume and area entropy coefficients from subsystem entropy tables.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::HamiltonianOp;
use crate::lattice::{enumerate_subsystems, LatticeSpec, Subsystem, TomographyColoring};
use crate::parallel;
use crate::quantum_info::{reduced_density_matrix, renyi2_entropy};
use crate::state::StateVector;

/// Bounds applied to fitted entropy densities.
pub const COEFF_MIN: f64 = 1e-4;
pub const COEFF_MAX: f64 = 1.0;

/// Smallest s_A/s_V treated as a resolvable area term. Below it the area
/// slope is at the level of the subsystem-to-subsystem scatter of Haar states.
pub const AREA_RESOLUTION: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyRow {
    pub subsystem_id: String,
    pub volume: usize,
    pub area: usize,
    pub s2: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EntropyTable {
    rows: Vec<EntropyRow>,
}

impl EntropyTable {
    pub fn new(rows: Vec<EntropyRow>) -> Result<Self> {
        for r in &rows {
            if r.volume == 0 || !(r.s2 >= -1e-9) {
                return Err(Error::InvalidArgument(format!(
                    "invalid entropy row {} (V={}, S2={})",
                    r.subsystem_id, r.volume, r.s2
                )));
            }
        }
        Ok(Self { rows })
    }

    /// S_2 of every subsystem of `psi`.
    pub fn from_state(psi: &StateVector, subsystems: &[Subsystem]) -> Result<Self> {
        let s2: Vec<Result<f64>> =
            subsystems.iter().map(|s| reduced_density_matrix(psi, s.sites()).map(|r| renyi2_entropy(&r))).collect();
        let rows = subsystems
            .iter()
            .zip(s2)
            .map(|(s, e)| {
                Ok(EntropyRow { subsystem_id: s.label(), volume: s.volume(), area: s.area(), s2: e? })
            })
            .collect::<Result<_>>()?;
        Self::new(rows)
    }

    pub fn rows(&self) -> &[EntropyRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows with volume at most `v_max`.
    pub fn restricted(&self, v_max: usize) -> Self {
        Self { rows: self.rows.iter().filter(|r| r.volume <= v_max).cloned().collect() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub s_v: f64,
    pub s_a: f64,
    pub stderr_v: f64,
    pub stderr_a: f64,
    pub s_a_reliable: bool,
}

/// Least-squares slope of y against x.
fn slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

struct SlopeStats {
    mean: f64,
    stderr: f64,
}

/// Unweighted mean of per-group slopes over groups with at least two
/// distinct abscissae.
fn group_slopes(groups: BTreeMap<usize, Vec<(f64, f64)>>, what: &str) -> Result<SlopeStats> {
    let slopes: Vec<f64> = groups
        .into_values()
        .filter(|pts| {
            let first = pts[0].0;
            pts.iter().any(|p| p.0 != first)
        })
        .map(|pts| slope(&pts))
        .collect();
    if slopes.is_empty() {
        return Err(Error::InsufficientData(format!("no group with two distinct {what} values")));
    }
    let k = slopes.len() as f64;
    let mean = slopes.iter().sum::<f64>() / k;
    let stderr = if slopes.len() > 1 {
        (slopes.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt() / k.sqrt()
    } else {
        0.0
    };
    Ok(SlopeStats { mean, stderr })
}

/// Fit S_2 = s_A A + s_V V by averaging slopes: ∂S/∂V over constant-area
/// groups and ∂S/∂A over constant-volume groups.
///
/// s_A is flagged unreliable when its mean slope is below [`COEFF_MIN`], its
/// standard error exceeds it, or it is under [`AREA_RESOLUTION`] · s_V.
pub fn fit_scaling(table: &EntropyTable) -> Result<ScalingFit> {
    let mut by_area: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
    let mut by_volume: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
    for r in &table.rows {
        by_area.entry(r.area).or_default().push((r.volume as f64, r.s2));
        by_volume.entry(r.volume).or_default().push((r.area as f64, r.s2));
    }
    let v = group_slopes(by_area, "volume")?;
    let a = group_slopes(by_volume, "area")?;
    let reliable = a.mean >= COEFF_MIN && a.stderr <= a.mean && a.mean >= AREA_RESOLUTION * v.mean;
    Ok(ScalingFit {
        s_v: v.mean.clamp(COEFF_MIN, COEFF_MAX),
        s_a: a.mean.clamp(COEFF_MIN, COEFF_MAX),
        stderr_v: v.stderr,
        stderr_a: a.stderr,
        s_a_reliable: reliable,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometricRatio {
    pub value: f64,
    pub reliable: bool,
}

/// s_V / s_A, unreliable whenever s_A is.
pub fn geometric_ratio(fit: &ScalingFit) -> GeometricRatio {
    GeometricRatio { value: fit.s_v / fit.s_a, reliable: fit.s_a_reliable }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundState {
    pub energy: f64,
    pub state: StateVector,
    /// ‖Hψ − Eψ‖.
    pub residual: f64,
    pub matvecs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanczosSettings {
    pub krylov_dim: usize,
    pub max_restarts: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for LanczosSettings {
    fn default() -> Self {
        Self { krylov_dim: 40, max_restarts: 200, tol: 1e-8, seed: 0 }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    parallel::sum_chunks(a.len(), parallel::CHUNK, |r| r.map(|i| a[i] * b[i]).sum())
}

fn scale_into(v: &mut [f64], s: f64) {
    parallel::fill_chunks(v, parallel::CHUNK, |_, c| c.iter_mut().for_each(|x| *x *= s));
}

/// Lowest eigenpair of the undriven Hamiltonian at δ = 0.
pub fn ground_state(spec: &LatticeSpec) -> Result<GroundState> {
    ground_state_with(spec, &LanczosSettings::default())
}

/// Explicitly restarted Lanczos that keeps only three Krylov vectors: the
/// Ritz vector is rebuilt by replaying the recurrence.
pub fn ground_state_with(spec: &LatticeSpec, settings: &LanczosSettings) -> Result<GroundState> {
    if settings.krylov_dim < 2 || settings.max_restarts == 0 || !(settings.tol > 0.0) {
        return Err(Error::InvalidArgument("invalid Lanczos settings".into()));
    }
    let op = HamiltonianOp::hcbh(spec, 0.0);
    let dim = op.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut x: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    let nx = dot(&x, &x).sqrt();
    scale_into(&mut x, 1.0 / nx);
    let mut hx = vec![0.0; dim];
    let mut matvecs = 0;

    if dim == 1 {
        op.apply_real_into(&x, &mut hx)?;
        let state = StateVector::from_amplitudes(spec.n_sites(), vec![Complex64::new(1.0, 0.0)])?;
        return Ok(GroundState { energy: hx[0] * x[0], state, residual: 0.0, matvecs: 1 });
    }

    let mut v_prev = vec![0.0; dim];
    let mut v = vec![0.0; dim];
    let mut w = vec![0.0; dim];
    let m = settings.krylov_dim.min(dim);
    for _ in 0..settings.max_restarts {
        // First pass: tridiagonal coefficients only.
        let mut alphas = Vec::with_capacity(m);
        let mut betas: Vec<f64> = Vec::with_capacity(m);
        v.copy_from_slice(&x);
        v_prev.iter_mut().for_each(|e| *e = 0.0);
        for j in 0..m {
            op.apply_real_into(&v, &mut w)?;
            matvecs += 1;
            let alpha = dot(&v, &w);
            let beta_prev = if j > 0 { betas[j - 1] } else { 0.0 };
            lanczos_update(&mut w, &v, &v_prev, alpha, beta_prev);
            alphas.push(alpha);
            let beta = dot(&w, &w).sqrt();
            if j + 1 == m || beta < 1e-12 {
                break;
            }
            betas.push(beta);
            std::mem::swap(&mut v_prev, &mut v);
            v.copy_from_slice(&w);
            scale_into(&mut v, 1.0 / beta);
        }
        let k = alphas.len();
        let t = DMatrix::from_fn(k, k, |r, c| {
            if r == c {
                alphas[r]
            } else if r == c + 1 {
                betas[c]
            } else if c == r + 1 {
                betas[r]
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(t);
        let lowest = (0..k).min_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b])).expect("k >= 1");
        let y: Vec<f64> = eig.eigenvectors.column(lowest).iter().copied().collect();

        // Second pass: replay the recurrence and accumulate Σ y_j v_j.
        let mut ritz = vec![0.0; dim];
        v.copy_from_slice(&x);
        v_prev.iter_mut().for_each(|e| *e = 0.0);
        for j in 0..k {
            let yj = y[j];
            parallel::fill_chunks(&mut ritz, parallel::CHUNK, |off, c| {
                c.iter_mut().enumerate().for_each(|(i, e)| *e += yj * v[off + i])
            });
            if j + 1 == k {
                break;
            }
            op.apply_real_into(&v, &mut w)?;
            matvecs += 1;
            let beta_prev = if j > 0 { betas[j - 1] } else { 0.0 };
            lanczos_update(&mut w, &v, &v_prev, alphas[j], beta_prev);
            std::mem::swap(&mut v_prev, &mut v);
            v.copy_from_slice(&w);
            scale_into(&mut v, 1.0 / betas[j]);
        }
        let nr = dot(&ritz, &ritz).sqrt();
        scale_into(&mut ritz, 1.0 / nr);
        x = ritz;

        op.apply_real_into(&x, &mut hx)?;
        matvecs += 1;
        let energy = dot(&x, &hx);
        let residual = parallel::sum_chunks(dim, parallel::CHUNK, |r| {
            r.map(|i| (hx[i] - energy * x[i]).powi(2)).sum()
        })
        .sqrt();
        if residual < settings.tol {
            let amps = x.iter().map(|&a| Complex64::new(a, 0.0)).collect();
            let state = StateVector::from_amplitudes(spec.n_sites(), amps)?;
            return Ok(GroundState { energy, state, residual, matvecs });
        }
    }
    Err(Error::NoConvergence(format!(
        "ground state residual above {} after {} restarts",
        settings.tol, settings.max_restarts
    )))
}

fn lanczos_update(w: &mut [f64], v: &[f64], v_prev: &[f64], alpha: f64, beta_prev: f64) {
    parallel::fill_chunks(w, parallel::CHUNK, |off, c| {
        for (i, e) in c.iter_mut().enumerate() {
            *e -= alpha * v[off + i] + beta_prev * v_prev[off + i];
        }
    });
}

/// √(1−r)|ψ_random⟩ + √r|ψ_gs⟩, renormalized.
pub fn superposition_state(r: f64, psi_gs: &StateVector, psi_random: &StateVector) -> Result<StateVector> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::InvalidArgument(format!("r = {r} outside [0, 1]")));
    }
    if psi_gs.n_sites() != psi_random.n_sites() {
        return Err(Error::DimensionMismatch { expected: psi_gs.n_sites(), actual: psi_random.n_sites() });
    }
    let (a, b) = ((1.0 - r).sqrt(), r.sqrt());
    let amps = psi_random.amplitudes().iter().zip(psi_gs.amplitudes()).map(|(x, g)| x * a + g * b).collect();
    StateVector::from_amplitudes(psi_gs.n_sites(), amps)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalabilityRow {
    pub r: f64,
    pub v_max: usize,
    pub s_v: f64,
    pub s_a: f64,
    pub ratio: f64,
    pub reliable: bool,
}

/// Keep at most `cap` subsystems per volume, evenly spaced through the sorted
/// enumeration.
pub fn thin_subsystems(subsystems: Vec<Subsystem>, cap: usize) -> Vec<Subsystem> {
    let mut by_volume: BTreeMap<usize, Vec<Subsystem>> = BTreeMap::new();
    for s in subsystems {
        by_volume.entry(s.volume()).or_default().push(s);
    }
    by_volume
        .into_values()
        .flat_map(|group| {
            let n = group.len();
            if n <= cap || cap == 0 {
                group
            } else {
                (0..cap).map(|k| group[k * n / cap].clone()).collect()
            }
        })
        .collect()
}

/// s_V/s_A of superpositions of the ground state and a Haar-random state,
/// fitted from connected subsystems of volume ≤ V_max.
pub fn scalability_study(
    spec: &LatticeSpec,
    r_values: &[f64],
    v_max_values: &[usize],
    seed: u64,
    per_volume_cap: Option<usize>,
) -> Result<Vec<ScalabilityRow>> {
    if r_values.is_empty() || v_max_values.is_empty() {
        return Err(Error::InvalidArgument("r and V_max grids must be nonempty".into()));
    }
    let v_top = *v_max_values.iter().max().expect("nonempty");
    let coloring = TomographyColoring::distinct(spec.n_sites());
    let mut subsystems = enumerate_subsystems(spec, &coloring, v_top)?;
    if let Some(cap) = per_volume_cap {
        subsystems = thin_subsystems(subsystems, cap);
    }
    let gs = ground_state(spec)?;
    let random = StateVector::random_haar(spec.n_sites(), seed)?;
    let mut rows = Vec::new();
    for &r in r_values {
        let psi = superposition_state(r, &gs.state, &random)?;
        let table = EntropyTable::from_state(&psi, &subsystems)?;
        for &v_max in v_max_values {
            let fit = fit_scaling(&table.restricted(v_max))?;
            let ratio = geometric_ratio(&fit);
            rows.push(ScalabilityRow { r, v_max, s_v: fit.s_v, s_a: fit.s_a, ratio: ratio.value, reliable: ratio.reliable });
        }
    }
    Ok(rows)
}
