//! Dense complex matrix and vector numerics shared by every other module.
//!
//! All operators in a QSW step are generated by Hermitian matrices, so matrix
//! exponentials go through the Hermitian eigendecomposition: the resulting
//! propagators are unitary up to the accuracy of the eigensolver, with no
//! series truncation involved.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense complex matrix with `f64` entries.
pub type CMatrix = DMatrix<Complex64>;
/// Dense complex vector with `f64` entries.
pub type CVector = DVector<Complex64>;

/// Default tolerance for structural checks (Hermiticity, unitarity, positivity).
pub const STRUCTURAL_TOL: f64 = 1e-10;
/// Default tolerance for normalization checks.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Largest entry magnitude, `max_ij |M_ij|`.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Hermiticity defect `max_ij |M_ij - conj(M_ji)|`; infinite for non-square input.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    let n = m.nrows();
    let mut defect = 0.0f64;
    for i in 0..n {
        for j in i..n {
            let d = (m[(i, j)] - m[(j, i)].conj()).norm();
            defect = defect.max(d);
        }
    }
    defect
}

/// True iff `m` is square and Hermitian within `tol`.
pub fn is_hermitian(m: &CMatrix, tol: f64) -> bool {
    hermiticity_defect(m) <= tol
}

fn require_square(m: &CMatrix) -> Result<usize> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.nrows() == 0 {
        return Err(Error::EmptyMatrix);
    }
    Ok(m.nrows())
}

/// Eigendecomposition of a Hermitian matrix, `M = V diag(eigenvalues) V'`.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    /// Eigenvalues in ascending order.
    pub eigenvalues: Vec<f64>,
    /// Unitary matrix whose k-th column is the eigenvector of `eigenvalues[k]`.
    /// For degenerate eigenvalues the columns are some orthonormal basis of the
    /// eigenspace; callers must not depend on the particular choice.
    pub eigenvectors: CMatrix,
}

/// Hermitian eigendecomposition at the default Hermiticity tolerance.
pub fn eig_hermitian(m: &CMatrix) -> Result<HermitianEig> {
    eig_hermitian_tol(m, STRUCTURAL_TOL)
}

/// Hermitian eigendecomposition, accepting inputs Hermitian within `tol`.
pub fn eig_hermitian_tol(m: &CMatrix, tol: f64) -> Result<HermitianEig> {
    require_square(m)?;
    let defect = hermiticity_defect(m);
    if !(defect <= tol) {
        return Err(Error::NotHermitian { defect, tol });
    }
    let eig = m.clone().symmetric_eigen();
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .total_cmp(&eig.eigenvalues[b])
            .then(a.cmp(&b))
    });
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let eigenvectors = eig.eigenvectors.select_columns(order.iter());
    Ok(HermitianEig {
        eigenvalues,
        eigenvectors,
    })
}

/// Unitary propagator `exp(-i H t)` of a Hermitian generator `H`.
///
/// `t` may have either sign; `t = 0` returns the exact identity.
pub fn propagator(h: &CMatrix, t: f64) -> Result<CMatrix> {
    let n = require_square(h)?;
    if !t.is_finite() {
        return Err(Error::InvalidTime { t });
    }
    if t == 0.0 {
        return Ok(CMatrix::identity(n, n));
    }
    let eig = eig_hermitian(h)?;
    // U = V exp(-i lambda t) V'
    let mut scaled = eig.eigenvectors.clone();
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        let phase = Complex64::new(0.0, -lam * t).exp();
        for entry in scaled.column_mut(k).iter_mut() {
            *entry *= phase;
        }
    }
    Ok(scaled * eig.eigenvectors.adjoint())
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(m: &CMatrix) -> Result<f64> {
    let eig = eig_hermitian(m)?;
    Ok(eig.eigenvalues[0])
}

/// Trace distance `(1/2) sum_k |lambda_k(A - B)|` between two Hermitian
/// matrices. For density matrices the result lies in `[0, 1]`.
pub fn trace_distance(a: &CMatrix, b: &CMatrix) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            got: b.nrows(),
        });
    }
    for m in [a, b] {
        let defect = hermiticity_defect(m);
        if !(defect <= STRUCTURAL_TOL) {
            return Err(Error::NotHermitian {
                defect,
                tol: STRUCTURAL_TOL,
            });
        }
    }
    let diff = a - b;
    // The difference of two Hermitian matrices is Hermitian up to rounding;
    // symmetrize so the eigensolver precondition holds exactly.
    let herm = (&diff + diff.adjoint()).scale(0.5);
    let eig = eig_hermitian(&herm)?;
    Ok(0.5 * eig.eigenvalues.iter().map(|l| l.abs()).sum::<f64>())
}

/// Complex amplitude vector over an orthonormal basis.
///
/// The squared norm must be positive and finite; a *normalized* state has
/// `|norm^2 - 1| <= tol` for the tolerance at hand ([`NORMALIZATION_TOL`] by
/// default).
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: CVector,
}

impl StateVector {
    pub fn new(amplitudes: CVector) -> Result<Self> {
        let norm_sq = amplitudes.norm_squared();
        if !(norm_sq > 0.0 && norm_sq.is_finite()) {
            return Err(Error::InvalidNorm { norm_sq });
        }
        Ok(Self { amplitudes })
    }

    /// Basis state `|index>` (0-based).
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::IndexOutOfRange { index, dim });
        }
        let mut amplitudes = CVector::zeros(dim);
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Ok(Self { amplitudes })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn norm_squared(&self) -> f64 {
        self.amplitudes.norm_squared()
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm_squared() - 1.0).abs() <= tol
    }

    pub fn require_normalized(&self, tol: f64) -> Result<()> {
        let defect = (self.norm_squared() - 1.0).abs();
        if defect > tol {
            return Err(Error::NotNormalized { defect, tol });
        }
        Ok(())
    }

    /// Normalized copy of this state.
    pub fn normalized(&self) -> Self {
        let norm = self.norm_squared().sqrt();
        Self {
            amplitudes: self.amplitudes.map(|a| a / norm),
        }
    }
}
