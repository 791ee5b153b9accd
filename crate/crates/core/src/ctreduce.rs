//! Reduction of a restricted continuous-time QSW to a discrete-time walk.
//!
//! The continuous walk follows a Lindblad master equation
//! `drho/dt = -i (1 - omega) [H, rho] + omega sum_nm gamma_nm (L rho L' - {L'L, rho}/2)`
//! with jump operators `L = |m><n|`. When every vertex has the same total
//! outgoing rate `gamma`, the unique step `dt = 1/gamma` turns the rates into
//! conditional hop probabilities `p_nm = gamma_nm dt`, and the discrete walk
//! with `alpha = 1 - omega`, `kappa_nm = omega p_nm` reproduces the short-time
//! evolution up to higher-order terms.
//!
//! The module also carries the exact propagator `exp(L_omega t)` (via the
//! column-stacked superoperator) and the literal first-order step, both used
//! to quantify the reduction error.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{DensityMatrix, QswGraph, StateTolerances};
use crate::linalg::{self, CMatrix, CVector, STRUCTURAL_TOL};

/// Continuous-time QSW definition: graph Hamiltonian, jump rates and the
/// coherent/incoherent interpolation weight `omega`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LindbladFile", into = "LindbladFile")]
pub struct LindbladSpec {
    n: usize,
    hamiltonian: CMatrix,
    /// `rates[(n, m)]` is the rate `gamma_nm` of the jump `n -> m`.
    rates: DMatrix<f64>,
    omega: f64,
}

impl LindbladSpec {
    pub fn new(hamiltonian: CMatrix, rates: DMatrix<f64>, omega: f64) -> Result<Self> {
        if !hamiltonian.is_square() {
            return Err(Error::NotSquare {
                rows: hamiltonian.nrows(),
                cols: hamiltonian.ncols(),
            });
        }
        let n = hamiltonian.nrows();
        if n == 0 {
            return Err(Error::EmptyMatrix);
        }
        if rates.nrows() != n || rates.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: rates.nrows().max(rates.ncols()),
            });
        }
        let defect = linalg::hermiticity_defect(&hamiltonian);
        if !(defect <= STRUCTURAL_TOL) {
            return Err(Error::NotHermitian {
                defect,
                tol: STRUCTURAL_TOL,
            });
        }
        for i in 0..n {
            for j in 0..n {
                let r = rates[(i, j)];
                if !(r >= 0.0 && r.is_finite()) {
                    return Err(Error::InvalidRate {
                        from: i + 1,
                        to: j + 1,
                        rate: r,
                    });
                }
            }
        }
        if !(omega.is_finite() && (0.0..=1.0).contains(&omega)) {
            return Err(Error::OmegaOutOfRange { omega });
        }
        Ok(Self {
            n,
            hamiltonian,
            rates,
            omega,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.n
    }

    pub fn hamiltonian(&self) -> &CMatrix {
        &self.hamiltonian
    }

    pub fn rates(&self) -> &DMatrix<f64> {
        &self.rates
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// Copy of this spec with every rate multiplied by `scale`.
    pub fn with_scaled_rates(&self, scale: f64) -> Result<Self> {
        Self::new(
            self.hamiltonian.clone(),
            self.rates.scale(scale),
            self.omega,
        )
    }

    fn rate_row_sums(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.rates.row(i).iter().sum())
            .collect()
    }
}

/// A discrete-time walk equivalent to a continuous one over a single step.
#[derive(Debug, Clone)]
pub struct ReductionResult {
    pub graph: QswGraph,
    /// The unique step length `1/gamma`.
    pub dt: f64,
}

/// Returns the common outgoing-rate sum `gamma` if every row agrees within
/// `tol`. All-zero rates are a distinct failure: the reduction degenerates
/// because `dt = 1/gamma` is undefined.
pub fn uniform_rate(spec: &LindbladSpec, tol: f64) -> Result<f64> {
    let sums = spec.rate_row_sums();
    let max = sums.iter().cloned().fold(f64::MIN, f64::max);
    let min = sums.iter().cloned().fold(f64::MAX, f64::min);
    if max <= 0.0 {
        return Err(Error::ZeroDissipation);
    }
    if max - min > tol {
        return Err(Error::NonUniformRateRows {
            row_sums: sums,
            tol,
        });
    }
    Ok(sums.iter().sum::<f64>() / sums.len() as f64)
}

/// Maps a uniform-rate continuous walk onto the discrete-time walk with
/// `dt = 1/gamma`, `alpha = 1 - omega` and `kappa_nm = omega p_nm`.
///
/// The hop probabilities are normalized per row (`p_nm = gamma_nm / gamma_n`),
/// so each row of `p` sums to one at machine precision even when the row sums
/// only agree within the tolerance.
pub fn reduce_to_discrete(spec: &LindbladSpec) -> Result<ReductionResult> {
    let gamma = uniform_rate(spec, crate::graph::DEFAULT_VALIDATION_TOL)?;
    let dt = 1.0 / gamma;
    let n = spec.n;
    let omega = spec.omega;
    let sums = spec.rate_row_sums();
    let mut kappa = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            kappa[(i, j)] = omega * spec.rates[(i, j)] / sums[i];
        }
    }
    let graph = QswGraph::from_matrices(1.0 - omega, spec.hamiltonian.clone(), kappa)?;
    graph.require_valid()?;
    Ok(ReductionResult { graph, dt })
}

/// The generator `L_omega` as an `N^2 x N^2` matrix acting on column-stacked
/// density matrices. The stacking convention is internal; only
/// [`exact_lindblad_propagate`] and the tests rely on it.
pub fn liouvillian_superoperator(spec: &LindbladSpec) -> CMatrix {
    let n = spec.n;
    let id = CMatrix::identity(n, n);
    let h = &spec.hamiltonian;
    let commutator = id.kronecker(h) - h.transpose().kronecker(&id);
    let mut lv = commutator * Complex64::new(0.0, -(1.0 - spec.omega));
    for from in 0..n {
        for to in 0..n {
            let gamma = spec.rates[(from, to)];
            if gamma <= 0.0 {
                continue;
            }
            // L = |to><from| is real, so conj(L) = L in the jump term
            let mut jump_op = CMatrix::zeros(n, n);
            jump_op[(to, from)] = Complex64::new(1.0, 0.0);
            let mut number_op = CMatrix::zeros(n, n);
            number_op[(from, from)] = Complex64::new(1.0, 0.0);
            let jump = jump_op.kronecker(&jump_op);
            let anticomm = id.kronecker(&number_op) + number_op.kronecker(&id);
            lv += (jump - anticomm.scale(0.5)).scale(spec.omega * gamma);
        }
    }
    lv
}

pub(crate) fn vectorize(mat: &CMatrix) -> CVector {
    CVector::from_column_slice(mat.as_slice())
}

pub(crate) fn unvectorize(vec: &CVector, n: usize) -> CMatrix {
    CMatrix::from_column_slice(n, n, vec.as_slice())
}

/// Exact continuous-time evolution `rho(t) = exp(L_omega t) rho`.
pub fn exact_lindblad_propagate(
    spec: &LindbladSpec,
    rho: &DensityMatrix,
    t: f64,
) -> Result<DensityMatrix> {
    if rho.dim() != spec.n {
        return Err(Error::DimensionMismatch {
            expected: spec.n,
            got: rho.dim(),
        });
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidTime { t });
    }
    if t == 0.0 {
        return Ok(rho.clone());
    }
    let propagator = liouvillian_superoperator(spec).scale(t).exp();
    let out = unvectorize(&(propagator * vectorize(rho.matrix())), spec.n);
    DensityMatrix::with_tolerances(out, &StateTolerances::uniform(1e-8))
}

/// Right-hand side of the master equation evaluated by direct matrix algebra,
/// `(1 - omega) (-i)[H, rho] + omega sum gamma_nm (L rho L' - {L'L, rho}/2)`.
pub fn lindblad_rhs(spec: &LindbladSpec, rho: &CMatrix) -> CMatrix {
    let n = spec.n;
    let h = &spec.hamiltonian;
    let mut out = (h * rho - rho * h) * Complex64::new(0.0, -(1.0 - spec.omega));
    for from in 0..n {
        for to in 0..n {
            let gamma = spec.rates[(from, to)];
            if gamma <= 0.0 {
                continue;
            }
            let w = spec.omega * gamma;
            // L rho L' contributes rho[from, from] at (to, to)
            out[(to, to)] += rho[(from, from)].scale(w);
            // -1/2 {|from><from|, rho}
            for k in 0..n {
                out[(from, k)] -= rho[(from, k)].scale(0.5 * w);
                out[(k, from)] -= rho[(k, from)].scale(0.5 * w);
            }
        }
    }
    out
}

/// The literal first-order step `rho + dt L_omega[rho]`.
///
/// Returned as a raw matrix: the truncation is neither trace-safe nor
/// positivity-safe and exists to quantify the error of the discrete step.
pub fn first_order_step(spec: &LindbladSpec, rho: &DensityMatrix, dt: f64) -> Result<CMatrix> {
    if rho.dim() != spec.n {
        return Err(Error::DimensionMismatch {
            expected: spec.n,
            got: rho.dim(),
        });
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::NonPositiveTimeStep { dt });
    }
    Ok(rho.matrix() + lindblad_rhs(spec, rho.matrix()).scale(dt))
}

// ---------------------------------------------------------------------------
// File format
// ---------------------------------------------------------------------------

/// JSON form of a Lindblad spec.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LindbladFile {
    pub n_vertices: usize,
    pub omega: f64,
    pub hamiltonian: HamiltonianGrid,
    #[serde(default)]
    pub rates: Vec<RateEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianGrid {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateEntry {
    pub from: usize,
    pub to: usize,
    pub gamma: f64,
}

impl TryFrom<LindbladFile> for LindbladSpec {
    type Error = Error;

    fn try_from(file: LindbladFile) -> Result<Self> {
        let n = file.n_vertices;
        if n == 0 {
            return Err(Error::EmptyMatrix);
        }
        for grid in [&file.hamiltonian.re, &file.hamiltonian.im] {
            if grid.len() != n || grid.iter().any(|row| row.len() != n) {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: grid.len(),
                });
            }
        }
        let hamiltonian = CMatrix::from_fn(n, n, |i, j| {
            Complex64::new(file.hamiltonian.re[i][j], file.hamiltonian.im[i][j])
        });
        let mut rates = DMatrix::zeros(n, n);
        let mut seen = vec![false; n * n];
        for e in &file.rates {
            if !(1..=n).contains(&e.from) {
                return Err(Error::VertexOutOfRange { index: e.from, n });
            }
            if !(1..=n).contains(&e.to) {
                return Err(Error::VertexOutOfRange { index: e.to, n });
            }
            let (from, to) = (e.from - 1, e.to - 1);
            if seen[from * n + to] {
                return Err(Error::DuplicateEdge {
                    from: e.from,
                    to: e.to,
                });
            }
            seen[from * n + to] = true;
            rates[(from, to)] = e.gamma;
        }
        LindbladSpec::new(hamiltonian, rates, file.omega)
    }
}

impl From<LindbladSpec> for LindbladFile {
    fn from(spec: LindbladSpec) -> Self {
        let n = spec.n;
        let re = (0..n)
            .map(|i| (0..n).map(|j| spec.hamiltonian[(i, j)].re).collect())
            .collect();
        let im = (0..n)
            .map(|i| (0..n).map(|j| spec.hamiltonian[(i, j)].im).collect())
            .collect();
        let mut rates = Vec::new();
        for from in 0..n {
            for to in 0..n {
                let gamma = spec.rates[(from, to)];
                if gamma != 0.0 {
                    rates.push(RateEntry {
                        from: from + 1,
                        to: to + 1,
                        gamma,
                    });
                }
            }
        }
        LindbladFile {
            n_vertices: n,
            omega: spec.omega,
            hamiltonian: HamiltonianGrid { re, im },
            rates,
        }
    }
}
