//! Unitary evolution under the driven Hamiltonian and coherent-like state
//! preparation.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{DriveSpec, HamiltonianOp, SectorSpectrum};
use crate::lattice::LatticeSpec;
use crate::parallel;
use crate::state::{norm_sqr, StateVector};

/// Integration scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Classical fourth-order Runge-Kutta with a fixed step.
    #[default]
    Rk4,
    /// Fourth-order Runge-Kutta with step-doubling error control.
    AdaptiveRk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolutionSettings {
    /// Time step in units of 1/J (initial step for the adaptive method).
    pub step: f64,
    /// Allowed norm drift per unit time; also the local error target of the
    /// adaptive method.
    pub tolerance: f64,
    pub method: Method,
}

impl Default for EvolutionSettings {
    fn default() -> Self {
        Self { step: 0.005, tolerance: 1e-6, method: Method::Rk4 }
    }
}

impl EvolutionSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidSettings(format!("step {} must be positive", self.step)));
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::InvalidSettings(format!(
                "tolerance {} must be positive",
                self.tolerance
            )));
        }
        Ok(())
    }
}

struct Rk4 {
    op: HamiltonianOp,
    k: Vec<Complex64>,
    stage: Vec<Complex64>,
    acc: Vec<Complex64>,
}

const MINUS_I: Complex64 = Complex64::new(0.0, -1.0);

fn axpy_into(out: &mut [Complex64], base: &[Complex64], k: &[Complex64], scale: Complex64) {
    parallel::fill_chunks(out, parallel::CHUNK, |off, c| {
        for (i, o) in c.iter_mut().enumerate() {
            *o = base[off + i] + scale * k[off + i];
        }
    });
}

fn add_scaled(out: &mut [Complex64], k: &[Complex64], scale: Complex64) {
    parallel::fill_chunks(out, parallel::CHUNK, |off, c| {
        for (i, o) in c.iter_mut().enumerate() {
            *o += scale * k[off + i];
        }
    });
}

impl Rk4 {
    fn new(op: HamiltonianOp) -> Self {
        let dim = op.dim();
        let zero = vec![Complex64::default(); dim];
        Self { op, k: zero.clone(), stage: zero.clone(), acc: zero }
    }

    /// One step of size `h` applied in place.
    fn step(&mut self, psi: &mut [Complex64], h: f64) -> Result<()> {
        let a = MINUS_I * h;
        // k1
        self.op.apply_into(psi, &mut self.k)?;
        self.acc.copy_from_slice(psi);
        add_scaled(&mut self.acc, &self.k, a / 6.0);
        axpy_into(&mut self.stage, psi, &self.k, a / 2.0);
        // k2
        self.op.apply_into(&self.stage, &mut self.k)?;
        add_scaled(&mut self.acc, &self.k, a / 3.0);
        axpy_into(&mut self.stage, psi, &self.k, a / 2.0);
        // k3
        self.op.apply_into(&self.stage, &mut self.k)?;
        add_scaled(&mut self.acc, &self.k, a / 3.0);
        axpy_into(&mut self.stage, psi, &self.k, a);
        // k4
        self.op.apply_into(&self.stage, &mut self.k)?;
        add_scaled(&mut self.acc, &self.k, a / 6.0);
        psi.copy_from_slice(&self.acc);
        Ok(())
    }

    /// Advance by `duration` with fixed steps no longer than `step`.
    fn run_fixed(&mut self, psi: &mut [Complex64], duration: f64, step: f64) -> Result<()> {
        if duration <= 0.0 {
            return Ok(());
        }
        let n = (duration / step).ceil().max(1.0) as usize;
        let h = duration / n as f64;
        for _ in 0..n {
            self.step(psi, h)?;
        }
        Ok(())
    }

    /// Advance by `duration` with step doubling; returns the last accepted step.
    fn run_adaptive(
        &mut self,
        psi: &mut [Complex64],
        duration: f64,
        mut h: f64,
        tolerance: f64,
    ) -> Result<f64> {
        let mut t = 0.0;
        let mut full = vec![Complex64::default(); psi.len()];
        let mut half = vec![Complex64::default(); psi.len()];
        let mut rejections = 0usize;
        while t < duration {
            let h_try = h.min(duration - t);
            full.copy_from_slice(psi);
            self.step(&mut full, h_try)?;
            half.copy_from_slice(psi);
            self.step(&mut half, 0.5 * h_try)?;
            self.step(&mut half, 0.5 * h_try)?;
            let diff: f64 = parallel::sum_chunks(psi.len(), parallel::CHUNK, |r| {
                r.map(|i| (half[i] - full[i]).norm_sqr()).sum()
            });
            let err = diff.sqrt() / 15.0;
            let target = tolerance * h_try;
            if err <= target {
                // Richardson extrapolation of the two estimates.
                parallel::fill_chunks(psi, parallel::CHUNK, |off, c| {
                    for (i, p) in c.iter_mut().enumerate() {
                        let j = off + i;
                        *p = half[j] + (half[j] - full[j]) / 15.0;
                    }
                });
                t += h_try;
                rejections = 0;
            } else {
                rejections += 1;
                if rejections > 60 {
                    return Err(Error::InvalidSettings(
                        "adaptive step size underflow; tolerance too strict".into(),
                    ));
                }
            }
            let ratio = if err > 0.0 { (target / err).powf(0.2) } else { 2.0 };
            h = h_try * (0.9 * ratio).clamp(0.2, 2.0);
        }
        Ok(h)
    }
}

/// Integrates i dψ/dt = H ψ, optionally reporting the state at given times.
pub struct Evolver {
    rk: Rk4,
    settings: EvolutionSettings,
}

impl Evolver {
    pub fn new(spec: &LatticeSpec, drive: &DriveSpec, settings: EvolutionSettings) -> Result<Self> {
        settings.validate()?;
        Ok(Self { rk: Rk4::new(HamiltonianOp::driven(spec, drive)), settings })
    }

    /// Evolve in place by `duration` without renormalizing.
    fn advance(&mut self, psi: &mut [Complex64], duration: f64, step: &mut f64) -> Result<()> {
        match self.settings.method {
            Method::Rk4 => self.rk.run_fixed(psi, duration, self.settings.step),
            Method::AdaptiveRk4 => {
                if duration > 0.0 {
                    *step = self.rk.run_adaptive(psi, duration, *step, self.settings.tolerance)?;
                }
                Ok(())
            }
        }
    }

    fn check_drift(&self, psi: &[Complex64], elapsed: f64) -> Result<()> {
        let drift = (norm_sqr(psi).sqrt() - 1.0).abs();
        let limit = 10.0 * self.settings.tolerance * elapsed.max(f64::EPSILON);
        if drift > limit || !drift.is_finite() {
            return Err(Error::Unstable { drift, limit });
        }
        Ok(())
    }

    /// Evolve `psi0` for `duration`, renormalizing at the end.
    pub fn evolve(&mut self, psi0: &StateVector, duration: f64) -> Result<StateVector> {
        self.evolve_observed(psi0, duration, &[], |_, _| Ok(()))
    }

    /// Evolve for `duration`, calling `observe(t, ψ(t))` at each of `times`
    /// (ascending, within `[0, duration]`). Observed states are renormalized copies.
    pub fn evolve_observed<F>(
        &mut self,
        psi0: &StateVector,
        duration: f64,
        times: &[f64],
        mut observe: F,
    ) -> Result<StateVector>
    where
        F: FnMut(f64, &StateVector) -> Result<()>,
    {
        if psi0.dim() != self.rk.op.dim() {
            return Err(Error::DimensionMismatch { expected: self.rk.op.dim(), actual: psi0.dim() });
        }
        if !(duration >= 0.0 && duration.is_finite()) {
            return Err(Error::InvalidArgument(format!("duration {duration} must be >= 0")));
        }
        if times.windows(2).any(|w| w[1] < w[0]) || times.iter().any(|&t| !(0.0..=duration).contains(&t)) {
            return Err(Error::InvalidArgument(
                "observation times must be ascending and within the evolution window".into(),
            ));
        }
        let n_sites = psi0.n_sites();
        let mut psi = psi0.amplitudes().to_vec();
        let mut t = 0.0;
        let mut step = self.settings.step;
        for &target in times {
            self.advance(&mut psi, target - t, &mut step)?;
            t = target;
            self.check_drift(&psi, t)?;
            observe(t, &StateVector::from_amplitudes(n_sites, psi.clone())?)?;
        }
        self.advance(&mut psi, duration - t, &mut step)?;
        self.check_drift(&psi, duration)?;
        StateVector::from_amplitudes(n_sites, psi)
    }
}

/// State at time `drive.duration` under the driven Hamiltonian.
pub fn evolve(
    spec: &LatticeSpec,
    drive: &DriveSpec,
    psi0: &StateVector,
    settings: &EvolutionSettings,
) -> Result<StateVector> {
    if psi0.dim() != spec.dim() {
        return Err(Error::DimensionMismatch { expected: spec.dim(), actual: psi0.dim() });
    }
    if (psi0.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument("initial state must be normalized".into()));
    }
    Evolver::new(spec, drive, *settings)?.evolve(psi0, drive.duration)
}

/// Drive the empty lattice with strength `omega` and detuning `delta` for time `t`.
pub fn prepare_coherent_like_state(spec: &LatticeSpec, omega: f64, delta: f64, t: f64) -> Result<StateVector> {
    let drive = DriveSpec::new(omega, delta, t)?;
    evolve(spec, &drive, &StateVector::vacuum(spec.n_sites())?, &EvolutionSettings::default())
}

/// One eigenstate's weight in a state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenOverlap {
    pub n: usize,
    pub energy: f64,
    pub overlap: f64,
}

/// |⟨n, E|ψ⟩|² for every eigenvector in `spectra`.
pub fn eigenbasis_overlap(psi: &StateVector, spectra: &[SectorSpectrum]) -> Result<Vec<EigenOverlap>> {
    let amps = psi.amplitudes();
    let mut out = Vec::new();
    for sp in spectra {
        if sp.vectors.is_none() {
            return Err(Error::InvalidArgument(format!("sector {} has no eigenvectors", sp.n)));
        }
        if let Some(&bad) = sp.basis.iter().find(|&&s| s >= amps.len()) {
            return Err(Error::DimensionMismatch { expected: amps.len(), actual: bad + 1 });
        }
        let local: Vec<Complex64> = sp.basis.iter().map(|&s| amps[s]).collect();
        let overlaps = parallel::map_range(sp.energies.len(), |k| {
            let v = sp.vector(k).expect("checked above");
            v.iter().zip(&local).map(|(&x, &a)| a * x).sum::<Complex64>().norm_sqr()
        });
        out.extend(
            sp.energies
                .iter()
                .zip(overlaps)
                .map(|(&energy, overlap)| EigenOverlap { n: sp.n, energy, overlap }),
        );
    }
    Ok(out)
}
