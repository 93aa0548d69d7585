use thiserror::Error;

/// Errors produced by the simulation and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("site index {site} out of range for a lattice with {n_sites} sites")]
    SiteOutOfRange { site: usize, n_sites: usize },

    #[error("duplicate site {0} in subsystem")]
    DuplicateSite(usize),

    #[error("subsystem {0:?} is not nearest-neighbor connected")]
    Disconnected(Vec<usize>),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("particle number {n} out of range for {n_sites} sites")]
    SectorOutOfRange { n: usize, n_sites: usize },

    #[error("invalid evolution settings: {0}")]
    InvalidSettings(String),

    #[error("integration unstable: norm drift {drift:.3e} exceeds limit {limit:.3e}")]
    Unstable { drift: f64, limit: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("not enough data to fit: {0}")]
    InsufficientData(String),

    #[error("eigensolver failed: {0}")]
    NoConvergence(String),

    #[error("invalid measurement record: {0}")]
    InvalidRecord(String),

    #[error("subsystem {0:?} is not reconstructable under the tomography coloring")]
    NotReconstructable(Vec<usize>),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
