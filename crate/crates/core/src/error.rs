use thiserror::Error;

use crate::model::Vec2;

/// Errors raised while building kernels, geometries and configurations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("negative jump rate {rate} at z = {z}")]
    NegativeRate { z: Vec2, rate: f64 },
    #[error("jump rate at z = {z} is not finite, so the total rate is infinite")]
    InfiniteSupport { z: Vec2 },
    #[error("the kernel assigns a rate to z = 0")]
    RateAtOrigin,
    #[error("vector {z} listed more than once")]
    DuplicateVector { z: Vec2 },
    #[error("symmetrized support does not generate Z^2 (lattice index {index})")]
    NonIrreducible { index: u64 },
    #[error("the kernel has zero drift; the comparison kernel needs a drift")]
    ZeroDrift,
    #[error("torus {l1}x{l2} too small for kernel range {range}: sides must exceed twice the range")]
    TorusTooSmall { l1: usize, l2: usize, range: u32 },
    #[error("invalid torus side lengths {l1}x{l2}")]
    InvalidGeometry { l1: usize, l2: usize },
    #[error("density {0} outside [0, 1]")]
    InvalidDensity(f64),
    #[error("cannot place {k} particles on {sites} sites")]
    InvalidParticleCount { k: usize, sites: usize },
    #[error("kernel file line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Errors raised by the simulation engines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("sample times must be strictly increasing and lie in [0, {horizon}]")]
    InvalidSampleTimes { horizon: f64 },
    #[error("horizon must be finite and non-negative, got {0}")]
    InvalidHorizon(f64),
    #[error("configuration has {got} sites, geometry has {expected}")]
    GeometryMismatch { expected: usize, got: usize },
    #[error("the second-class particle must start on an empty origin")]
    OriginOccupied,
    #[error("the marginal-walk scheme needs a symmetric kernel")]
    NotSymmetric,
    #[error("coupling representation broken at event {event}: {message}")]
    CouplingMismatch { event: u64, message: String },
}

/// Errors raised by the estimators and fits.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObservableError {
    #[error("{got} replicas is too few (need at least {min})")]
    TooFewReplicas { got: usize, min: usize },
    #[error("time grid too coarse near 0 for t = {t}: interval {width} exceeds {limit}")]
    GridTooCoarse { t: f64, width: f64, limit: f64 },
    #[error("evaluation time {0} is not on the series grid")]
    NotOnGrid(f64),
    #[error("lambda = {lambda} with horizon {horizon}: lambda * horizon < 5")]
    TruncationTooSevere { lambda: f64, horizon: f64 },
    #[error("fit window holds {points} usable points, need at least {min}")]
    DegenerateWindow { points: usize, min: usize },
    #[error("series is malformed: {0}")]
    InvalidSeries(String),
    #[error("trajectories do not share one sample grid")]
    GridMismatch,
}

/// Errors raised by the exact finite-state solver.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExactError {
    #[error("state space has {size} states, cap is {cap}")]
    StateSpaceTooLarge { size: usize, cap: usize },
    #[error("linear solve failed: residual {residual:e} after {iterations} iterations")]
    SolverFailure { residual: f64, iterations: usize },
    #[error("lambda must be positive, got {0}")]
    NonPositiveLambda(f64),
    #[error("function is not mean-zero: <f, 1> = {0:e}")]
    NotMeanZero(f64),
    #[error("vector length {got} does not match state space size {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("coefficient degree {degree} exceeds cap {cap}")]
    DegreeCapExceeded { degree: usize, cap: usize },
    #[error("kernel vectors alias on this torus; duality would wrap")]
    WrapViolation,
    #[error("the torus has {0} sites; subsets are limited to 64 sites")]
    TooManySites(usize),
    #[error("operation needs the product (grand-canonical) ensemble")]
    NeedsProductEnsemble,
    #[error("operation needs a symmetric generator")]
    NotSymmetric,
    #[error("density {0} must lie strictly inside (0, 1)")]
    DegenerateDensity(f64),
}

/// Errors raised by the Fourier-space bound evaluation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FourierError {
    #[error("invalid symbol parameters: {0}")]
    InvalidParams(String),
    #[error("gamma representations disagree by {0:e}")]
    RepresentationMismatch(f64),
    #[error("quadrature did not converge: estimate {value:e}, error {error:e}")]
    QuadratureNonConvergent { value: f64, error: f64 },
    #[error("lambda must be positive, got {0}")]
    NonPositiveLambda(f64),
    #[error("the axis bound needs a2 = 0")]
    NotAxisCase,
    #[error("need at least {min_points} lambda points spanning {min_decades} decades")]
    InsufficientGrid { min_points: usize, min_decades: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Observable(#[from] ObservableError),
    #[error(transparent)]
    Exact(#[from] ExactError),
    #[error(transparent)]
    Fourier(#[from] FourierError),
}

impl Error {
    /// Short machine-readable tag for error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Kernel(_) => "kernel",
            Error::Sim(_) => "simulation",
            Error::Observable(_) => "observable",
            Error::Exact(_) => "exact",
            Error::Fourier(_) => "fourier",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
