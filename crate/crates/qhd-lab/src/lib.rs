//! Simulator and benchmark suite for gradient-based quantum Hamiltonian descent.
//!
//! The crate integrates the time-dependent Schrödinger dynamics of the
//! gradient-augmented QHD Hamiltonian on a periodic spatial mesh, runs
//! classical optimizer baselines (SGDM, NAG, the classical Hamiltonian flow),
//! verifies the underlying operator identities and Lyapunov monotonicity
//! claims numerically, and reproduces the 2D convex/non-convex benchmark
//! experiments as config-driven runs.

pub mod analysis;
pub mod classical_opt;
pub mod cli;
pub mod evolution;
pub mod objectives;
pub mod spectral_mesh;

mod par;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate box: hi[{axis}] = {hi} must exceed lo[{axis}] = {lo}")]
    DegenerateBox { axis: usize, lo: f64, hi: f64 },
    #[error("grid too coarse: n_per_dim = {0}, need an even N >= 8")]
    BadGridSize(usize),
    #[error("grid mismatch between operands")]
    GridMismatch,
    #[error("axis {axis} out of range for dimension {dim}")]
    AxisOutOfRange { axis: usize, dim: usize },
    #[error("state is not normalized: |norm^2 - 1| = {0:.3e}")]
    Unnormalized(f64),
    #[error("gaussian undersampled: sigma = {sigma} spans fewer than 4 cells (spacing {spacing}) on axis {axis}")]
    SigmaUndersampled { sigma: f64, spacing: f64, axis: usize },
    #[error("point {0:?} outside the search box")]
    OutsideBox(Vec<f64>),
    #[error("unknown objective `{0}`")]
    UnknownObjective(String),
    #[error("minimizer index {index} out of range ({count} known minimizers)")]
    MinimizerIndex { index: usize, count: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("box mismatch: grid box must be contained in the objective box")]
    BoxMismatch,
    #[error("objective must be centered (f_min = 0 at the origin); got f_min = {0}")]
    NotCentered(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("evolution time t = {0} must be positive (singular 1/t^3 kinetic coefficient)")]
    NonPositiveTime(f64),
    #[error("Lanczos failed to converge: residual {residual:.3e} > tol {tol:.3e} at dimension cap {cap} (step size too large for the gradient field)")]
    LanczosNoConvergence { residual: f64, tol: f64, cap: usize },
    #[error("dense oracle size guard: N = {0} exceeds 256")]
    DenseSizeGuard(usize),
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("series too short: need at least {need} samples, got {got}")]
    SeriesTooShort { need: usize, got: usize },
    #[error("empty window or nonpositive values in rate fit")]
    BadRateWindow,
    #[error("{path}:{line}: {msg}")]
    Config { path: String, line: usize, msg: String },
    #[error("config error in {path}: {msg}")]
    ConfigGeneral { path: String, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Cli(String),
}

pub type Result<T> = std::result::Result<T, Error>;
