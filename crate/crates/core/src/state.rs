//! Pure states over the 2^N computational basis.
//!
//! Basis index `b` has site `i` occupied iff bit `i` of `b` is set.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::lattice::MAX_SITES;
use crate::parallel;

/// A normalized state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_sites: usize,
    amps: Vec<Complex64>,
}

fn check_sites(n_sites: usize) -> Result<()> {
    if n_sites > MAX_SITES {
        return Err(Error::InvalidArgument(format!(
            "{n_sites} sites exceeds the limit of {MAX_SITES}"
        )));
    }
    Ok(())
}

pub(crate) fn norm_sqr(v: &[Complex64]) -> f64 {
    parallel::sum_chunks(v.len(), parallel::CHUNK, |r| v[r].iter().map(|a| a.norm_sqr()).sum())
}

impl StateVector {
    /// All sites empty.
    pub fn vacuum(n_sites: usize) -> Result<Self> {
        Self::basis_state(n_sites, 0)
    }

    pub fn basis_state(n_sites: usize, index: usize) -> Result<Self> {
        check_sites(n_sites)?;
        let dim = 1usize << n_sites;
        if index >= dim {
            return Err(Error::InvalidArgument(format!(
                "basis index {index} out of range for {n_sites} sites"
            )));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[index] = Complex64::new(1.0, 0.0);
        Ok(Self { n_sites, amps })
    }

    /// Normalizes `amps`; fails on a length that is not 2^N or a zero vector.
    pub fn from_amplitudes(n_sites: usize, mut amps: Vec<Complex64>) -> Result<Self> {
        check_sites(n_sites)?;
        let dim = 1usize << n_sites;
        if amps.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, actual: amps.len() });
        }
        let norm = norm_sqr(&amps).sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::InvalidArgument("state has zero or non-finite norm".into()));
        }
        let inv = 1.0 / norm;
        amps.iter_mut().for_each(|a| *a *= inv);
        Ok(Self { n_sites, amps })
    }

    /// Haar-random state from seeded complex Gaussian amplitudes.
    pub fn random_haar(n_sites: usize, seed: u64) -> Result<Self> {
        check_sites(n_sites)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let amps = (0..1usize << n_sites)
            .map(|_| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(re, im)
            })
            .collect();
        Self::from_amplitudes(n_sites, amps)
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        norm_sqr(&self.amps).sqrt()
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: other.dim() });
        }
        let a = &self.amps;
        let b = &other.amps;
        let parts = parallel::map_chunks(a.len(), parallel::CHUNK, |r| {
            r.map(|i| a[i].conj() * b[i]).sum::<Complex64>()
        });
        Ok(parts.into_iter().sum())
    }

    /// |⟨self|other⟩|².
    pub fn fidelity(&self, other: &StateVector) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    /// Probability of each basis state.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constructors() {
        let v = StateVector::vacuum(3).unwrap();
        assert_eq!(v.dim(), 8);
        assert_eq!(v.amplitudes()[0], Complex64::new(1.0, 0.0));
        assert!(StateVector::basis_state(2, 4).is_err());
        assert!(StateVector::from_amplitudes(1, vec![Complex64::default(); 2]).is_err());
        assert!(StateVector::from_amplitudes(1, vec![Complex64::default(); 3]).is_err());
        let s = StateVector::from_amplitudes(1, vec![Complex64::new(3.0, 0.0), Complex64::new(0.0, 4.0)])
            .unwrap();
        assert!((s.amplitudes()[1].im - 0.8).abs() < 1e-15);
    }

    #[test]
    fn haar_is_seeded_and_normalized() {
        let a = StateVector::random_haar(6, 7).unwrap();
        let b = StateVector::random_haar(6, 7).unwrap();
        let c = StateVector::random_haar(6, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!((a.norm() - 1.0).abs() < 1e-12);
        assert!((a.fidelity(&a).unwrap() - 1.0).abs() < 1e-12);
        assert!(a.fidelity(&c).unwrap() < 0.5);
    }
}
