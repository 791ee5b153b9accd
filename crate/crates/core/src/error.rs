//! Error type shared across the crate.

use thiserror::Error;

use crate::graph::ValidationReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is empty (dimension 0)")]
    EmptyMatrix,

    #[error("matrix is not Hermitian: max |M - M'| = {defect:.3e} exceeds tolerance {tol:.3e}")]
    NotHermitian { defect: f64, tol: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("state vector squared norm {norm_sq} is not positive and finite")]
    InvalidNorm { norm_sq: f64 },

    #[error(
        "state vector is not normalized: |norm^2 - 1| = {defect:.3e} exceeds tolerance {tol:.3e}"
    )]
    NotNormalized { defect: f64, tol: f64 },

    #[error("trace is {trace}, must equal 1 within {tol:.3e}")]
    TraceNotOne { trace: f64, tol: f64 },

    #[error("matrix is not positive semidefinite: minimum eigenvalue {min_eigenvalue:.3e} below -{tol:.3e}")]
    NotPositive { min_eigenvalue: f64, tol: f64 },

    #[error("invalid graph:\n{0}")]
    InvalidGraph(ValidationReport),

    #[error("vertex index {index} out of range 1..={n}")]
    VertexOutOfRange { index: usize, n: usize },

    #[error("edge ({from},{to}) listed more than once")]
    DuplicateEdge { from: usize, to: usize },

    #[error(
        "coherent edges ({from},{to}) and ({to},{from}) are not complex conjugates of each other"
    )]
    ConflictingMirrorEdge { from: usize, to: usize },

    #[error("time step {dt} must be positive and finite")]
    NonPositiveTimeStep { dt: f64 },

    #[error("time {t} must be finite and non-negative")]
    InvalidTime { t: f64 },

    #[error("every Kraus branch has zero probability on this state")]
    NoSamplingSupport,

    #[error("state norm collapsed below measurable threshold (norm^2 = {norm_sq:.3e})")]
    DegenerateState { norm_sq: f64 },

    #[error("ancillae are not empty at a step boundary (max amplitude {max_amplitude:.3e})")]
    AncillaeNotEmpty { max_amplitude: f64 },

    #[error(
        "vertex {vertex} has no outgoing incoherent rate; an occupied ancilla there is impossible"
    )]
    NoFeedForwardTargets { vertex: usize },

    #[error("omega = {omega} outside [0, 1]")]
    OmegaOutOfRange { omega: f64 },

    #[error("rate gamma({from},{to}) = {rate} must be non-negative and finite")]
    InvalidRate { from: usize, to: usize, rate: f64 },

    #[error(
        "reduction requires a uniform outgoing-rate sum: every row of gamma must sum to the \
         same common value, but the row sums are {} (tolerance {tol:.3e})",
        fmt_row_sums(row_sums)
    )]
    NonUniformRateRows { row_sums: Vec<f64>, tol: f64 },

    #[error("all incoherent rates are zero; dt = 1/gamma is undefined, construct a discrete graph directly")]
    ZeroDissipation,

    #[error("ensemble needs at least one trajectory")]
    ZeroTrajectories,

    #[error("ensemble was run in populations-only mode; no density-matrix averages to report on")]
    MissingDensityAverages,
}

fn fmt_row_sums(sums: &[f64]) -> String {
    sums.iter()
        .enumerate()
        .map(|(i, s)| format!("row {} -> {}", i + 1, s))
        .collect::<Vec<_>>()
        .join(", ")
}
