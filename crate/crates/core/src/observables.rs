//! Populations, excitation statistics, transverse correlators and
//! correlation-length fits.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{manhattan_distance, LatticeSpec};
use crate::parallel;
use crate::state::StateVector;

/// ⟨n_i⟩ for every site.
pub fn site_populations(psi: &StateVector) -> Vec<f64> {
    let n = psi.n_sites();
    let amps = psi.amplitudes();
    let parts = parallel::map_chunks(amps.len(), parallel::CHUNK, |r| {
        let mut pop = vec![0.0; n];
        for b in r {
            let p = amps[b].norm_sqr();
            let mut bits = b;
            while bits != 0 {
                pop[bits.trailing_zeros() as usize] += p;
                bits &= bits - 1;
            }
        }
        pop
    });
    let mut pop = vec![0.0; n];
    for part in parts {
        pop.iter_mut().zip(part).for_each(|(a, b)| *a += b);
    }
    pop
}

/// P(n) for n = 0..=N.
pub fn excitation_distribution(psi: &StateVector) -> Vec<f64> {
    let n = psi.n_sites();
    let amps = psi.amplitudes();
    let parts = parallel::map_chunks(amps.len(), parallel::CHUNK, |r| {
        let mut dist = vec![0.0; n + 1];
        for b in r {
            dist[b.count_ones() as usize] += amps[b].norm_sqr();
        }
        dist
    });
    let mut dist = vec![0.0; n + 1];
    for part in parts {
        dist.iter_mut().zip(part).for_each(|(a, b)| *a += b);
    }
    dist
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoissonFit {
    pub lambda: f64,
    pub tv_distance: f64,
}

/// Poisson(λ) restricted to 0..=n_max and renormalized.
pub fn truncated_poisson(lambda: f64, n_max: usize) -> Vec<f64> {
    if lambda <= 0.0 {
        let mut p = vec![0.0; n_max + 1];
        p[0] = 1.0;
        return p;
    }
    // Work in log space to stay finite for large λ.
    let logs: Vec<f64> = (0..=n_max)
        .scan(0.0, |log_fact, k| {
            if k > 0 {
                *log_fact += (k as f64).ln();
            }
            Some(k as f64 * lambda.ln() - *log_fact)
        })
        .collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

/// Fit a truncated Poisson distribution by matching the mean.
pub fn poisson_fit(dist: &[f64]) -> Result<PoissonFit> {
    if dist.is_empty() {
        return Err(Error::InvalidArgument("empty distribution".into()));
    }
    let total: f64 = dist.iter().sum();
    if dist.iter().any(|&p| p < -1e-12) || (total - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidArgument("input is not a probability vector".into()));
    }
    let lambda: f64 = dist.iter().enumerate().map(|(n, p)| n as f64 * p).sum();
    let model = truncated_poisson(lambda, dist.len() - 1);
    let tv_distance = 0.5 * dist.iter().zip(&model).map(|(p, q)| (p - q).abs()).sum::<f64>();
    Ok(PoissonFit { lambda, tv_distance })
}

/// Symmetric N×N matrix of C^x_{ij} = ⟨σ^x_i σ^x_j⟩ − ⟨σ^x_i⟩⟨σ^x_j⟩, zero diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelatorMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl CorrelatorMatrix {
    /// Build from a row-major N×N array; the diagonal is zeroed.
    pub fn from_entries(n: usize, mut entries: Vec<f64>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, actual: entries.len() });
        }
        for i in 0..n {
            entries[i * n + i] = 0.0;
            for j in 0..i {
                if (entries[i * n + j] - entries[j * n + i]).abs() > 1e-12 {
                    return Err(Error::InvalidArgument("correlator matrix must be symmetric".into()));
                }
            }
        }
        Ok(Self { n, entries })
    }

    pub fn n_sites(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.n).map(|r| r.to_vec()).collect()
    }
}

/// ⟨σ^x_i⟩ for every site.
pub fn sigma_x_expectations(psi: &StateVector) -> Vec<f64> {
    let amps = psi.amplitudes();
    (0..psi.n_sites())
        .map(|i| {
            let m = 1usize << i;
            2.0 * parallel::sum_chunks(amps.len(), parallel::CHUNK, |r| {
                r.filter(|b| b & m == 0).map(|b| (amps[b].conj() * amps[b | m]).re).sum()
            })
        })
        .collect()
}

/// Exact transverse two-point correlators.
pub fn two_point_correlators(psi: &StateVector) -> CorrelatorMatrix {
    let n = psi.n_sites();
    let amps = psi.amplitudes();
    let x = sigma_x_expectations(psi);
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let xx = parallel::map(&pairs, |&(i, j)| {
        let m = (1usize << i) | (1usize << j);
        amps.iter().enumerate().map(|(b, a)| a.conj() * amps[b ^ m]).sum::<Complex64>().re
    });
    let mut entries = vec![0.0; n * n];
    for (&(i, j), v) in pairs.iter().zip(xx) {
        let c = v - x[i] * x[j];
        entries[i * n + j] = c;
        entries[j * n + i] = c;
    }
    CorrelatorMatrix { n, entries }
}

/// Mean |C|² over all pairs at one Manhattan distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceBin {
    pub distance: usize,
    pub mean_abs_sq: f64,
    pub pairs: usize,
}

/// Average |C^x_{ij}|² over pairs i<j grouped by distance `m_min..=m_max`.
/// Distances with no pairs are omitted.
pub fn binned_correlators(
    corr: &CorrelatorMatrix,
    spec: &LatticeSpec,
    m_min: usize,
    m_max: usize,
) -> Result<Vec<DistanceBin>> {
    if corr.n_sites() != spec.n_sites() {
        return Err(Error::DimensionMismatch { expected: spec.n_sites(), actual: corr.n_sites() });
    }
    let mut sums = vec![(0.0, 0usize); m_max + 1];
    for i in 0..corr.n {
        for j in i + 1..corr.n {
            let m = manhattan_distance(spec, i, j)?;
            if (m_min..=m_max).contains(&m) {
                sums[m].0 += corr.get(i, j).powi(2);
                sums[m].1 += 1;
            }
        }
    }
    Ok(sums
        .into_iter()
        .enumerate()
        .filter(|(m, (_, k))| *m >= m_min && *k > 0)
        .map(|(distance, (s, pairs))| DistanceBin { distance, mean_abs_sq: s / pairs as f64, pairs })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationOptions {
    pub m_min: usize,
    pub m_max: usize,
    /// Bins with mean |C|² below this value are left out of the fit.
    pub noise_floor: f64,
    /// Fits with ξ above this many lattice spacings are reported as divergent.
    pub xi_max: f64,
}

impl Default for CorrelationOptions {
    fn default() -> Self {
        Self { m_min: 1, m_max: 6, noise_floor: 1e-6, xi_max: 50.0 }
    }
}

/// Result of fitting |C|² ∝ exp(−M/ξ).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationFit {
    /// Correlation length; infinite when the fitted slope is not negative.
    pub xi: f64,
    /// Fitted |C|² at M = 0.
    pub amplitude: f64,
    /// Standard error of ξ from the slope's standard error (zero with two points).
    pub stderr: f64,
    pub divergent: bool,
    /// (M, mean |C|²) of the bins used.
    pub points_used: Vec<(usize, f64)>,
}

/// Least-squares fit of ln(mean |C|²) against M.
pub fn correlation_length(
    corr: &CorrelatorMatrix,
    spec: &LatticeSpec,
    options: &CorrelationOptions,
) -> Result<CorrelationFit> {
    let bins = binned_correlators(corr, spec, options.m_min, options.m_max)?;
    fit_decay(&bins, options)
}

/// Fit an exponential decay to binned correlators.
pub fn fit_decay(bins: &[DistanceBin], options: &CorrelationOptions) -> Result<CorrelationFit> {
    let points: Vec<(usize, f64)> = bins
        .iter()
        .filter(|b| b.mean_abs_sq >= options.noise_floor && b.mean_abs_sq > 0.0)
        .map(|b| (b.distance, b.mean_abs_sq))
        .collect();
    if points.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} distance bins above the noise floor {:.1e}; need 2",
            points.len(),
            options.noise_floor
        )));
    }
    // Normalizing by the first bin keeps the slope independent of overall scale.
    let reference = points[0].1;
    let xs: Vec<f64> = points.iter().map(|p| p.0 as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| (p.1 / reference).ln()).collect();
    let k = xs.len() as f64;
    let xm = xs.iter().sum::<f64>() / k;
    let ym = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - xm).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let slope_err = if xs.len() > 2 {
        let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
        (rss / (k - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    let xi = if slope < 0.0 { -1.0 / slope } else { f64::INFINITY };
    let divergent = !(xi <= options.xi_max);
    let stderr = if slope < 0.0 { slope_err / (slope * slope) } else { f64::INFINITY };
    Ok(CorrelationFit {
        xi,
        amplitude: reference * intercept.exp(),
        stderr,
        divergent,
        points_used: points,
    })
}
