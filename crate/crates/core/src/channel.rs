//! Exact discrete-time QSW evolution as a Kraus channel.
//!
//! One walk step acts as `rho -> alpha U rho U' + sum_nm kappa_nm |m><n| rho |n><m|`
//! with `U = exp(-i H dt)`. The step is represented by its (unnormalized)
//! Kraus operators `{sqrt(alpha) U}u {sqrt(kappa_nm) |m><n|}`; the
//! probability-normalized view used for single-shot sampling is computed on
//! demand.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{DensityMatrix, QswGraph, StateTolerances};
use crate::linalg::{self, propagator, CMatrix, CVector};
use crate::random::sample_index;

/// Kraus branches with probability below this threshold are excluded from
/// sampling support.
pub const ZERO_BRANCH_TOL: f64 = 1e-15;

/// What a Kraus operator implements, for inspection and reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KrausLabel {
    /// The coherent branch `sqrt(alpha) U(dt)`.
    Coherent,
    /// The incoherent hop `from -> to` (0-based vertices).
    Jump { from: usize, to: usize },
    /// Projector onto an ancilla that can never fire (only present in
    /// enumerated protocol channels when `alpha = 1`); keeps the operator
    /// set complete on the extended space.
    IdleAncilla { vertex: usize },
}

#[derive(Debug, Clone)]
pub struct KrausOperator {
    pub label: KrausLabel,
    pub matrix: CMatrix,
}

/// A finite Kraus-operator set representing one completely positive map.
///
/// Construction checks shapes only; trace preservation is a property of the
/// operator set and is measured by [`KrausChannel::completeness_defect`].
#[derive(Debug, Clone)]
pub struct KrausChannel {
    dim: usize,
    operators: Vec<KrausOperator>,
}

impl KrausChannel {
    pub fn new(dim: usize, operators: Vec<KrausOperator>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::EmptyMatrix);
        }
        for op in &operators {
            if op.matrix.nrows() != dim || op.matrix.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: op.matrix.nrows().max(op.matrix.ncols()),
                });
            }
        }
        Ok(Self { dim, operators })
    }

    /// The single-step channel of a QSW graph:
    /// `{sqrt(alpha) U(dt)} u {sqrt(kappa_nm) |m><n| : kappa_nm > 0}`.
    pub fn qsw_step(graph: &QswGraph, dt: f64) -> Result<Self> {
        graph.require_valid()?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::NonPositiveTimeStep { dt });
        }
        let n = graph.n_vertices();
        let mut operators = Vec::new();
        if graph.alpha() > 0.0 {
            let u = propagator(&graph.hamiltonian()?, dt)?;
            operators.push(KrausOperator {
                label: KrausLabel::Coherent,
                matrix: u.scale(graph.alpha().sqrt()),
            });
        }
        let kappa = graph.incoherent_rates();
        for from in 0..n {
            for to in 0..n {
                let k = kappa[(from, to)];
                if k > 0.0 {
                    let mut m = CMatrix::zeros(n, n);
                    m[(to, from)] = Complex64::new(k.sqrt(), 0.0);
                    operators.push(KrausOperator {
                        label: KrausLabel::Jump { from, to },
                        matrix: m,
                    });
                }
            }
        }
        Self::new(n, operators)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn operators(&self) -> &[KrausOperator] {
        &self.operators
    }

    /// `sum_j K_j rho K_j'`.
    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        let out = self.apply_matrix(rho.matrix())?;
        DensityMatrix::with_tolerances(
            out,
            &StateTolerances {
                hermiticity: 1e-10,
                trace: 1e-9,
                positivity: 1e-9,
            },
        )
    }

    /// Operator-sum action on a raw matrix, without state checks.
    pub fn apply_matrix(&self, mat: &CMatrix) -> Result<CMatrix> {
        if mat.nrows() != self.dim || mat.ncols() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: mat.nrows(),
            });
        }
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for op in &self.operators {
            out += &op.matrix * mat * op.matrix.adjoint();
        }
        Ok(out)
    }

    /// `[rho_0, B[rho_0], ..., B^n[rho_0]]`.
    pub fn iterate(&self, rho0: &DensityMatrix, n_steps: usize) -> Result<Vec<DensityMatrix>> {
        let mut out = Vec::with_capacity(n_steps + 1);
        out.push(rho0.clone());
        for _ in 0..n_steps {
            let next = self.apply(out.last().expect("non-empty"))?;
            out.push(next);
        }
        Ok(out)
    }

    /// Trace-preservation defect `max |sum_j K_j' K_j - I|`.
    pub fn completeness_defect(&self) -> f64 {
        let mut sum = CMatrix::zeros(self.dim, self.dim);
        for op in &self.operators {
            sum += op.matrix.adjoint() * &op.matrix;
        }
        linalg::max_abs(&(sum - CMatrix::identity(self.dim, self.dim)))
    }

    /// Choi matrix `sum_j vec(K_j) vec(K_j)'` with column-stacking `vec`.
    ///
    /// Hermitian and positive semidefinite for any operator set; its partial
    /// trace over the output index equals the identity iff the channel is
    /// trace-preserving.
    pub fn choi_matrix(&self) -> CMatrix {
        let d = self.dim * self.dim;
        let mut choi = CMatrix::zeros(d, d);
        for op in &self.operators {
            let v = CVector::from_column_slice(op.matrix.as_slice());
            choi += &v * v.adjoint();
        }
        choi
    }

    /// Branch probabilities `P_j = Tr[K_j' K_j rho]`, clipped at zero.
    pub fn branch_probabilities(&self, rho: &DensityMatrix) -> Result<Vec<f64>> {
        if rho.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: rho.dim(),
            });
        }
        Ok(self
            .operators
            .iter()
            .map(|op| {
                let evolved = &op.matrix * rho.matrix() * op.matrix.adjoint();
                evolved.trace().re.max(0.0)
            })
            .collect())
    }

    /// Draws a branch index `j` with probability `P_j = Tr[K_j' K_j rho]` and
    /// returns the normalized operator `K_j / sqrt(P_j)`.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        rho: &DensityMatrix,
        rng: &mut R,
    ) -> Result<SampledKraus> {
        let mut probs = self.branch_probabilities(rho)?;
        for p in probs.iter_mut() {
            if *p < ZERO_BRANCH_TOL {
                *p = 0.0;
            }
        }
        let index = sample_index(&probs, rng).ok_or(Error::NoSamplingSupport)?;
        let probability = probs[index];
        Ok(SampledKraus {
            index,
            probability,
            normalized_operator: self.operators[index].matrix.scale(1.0 / probability.sqrt()),
        })
    }
}

/// One branch drawn from a channel: `K_j = sqrt(P_j) * normalized_operator`.
#[derive(Debug, Clone)]
pub struct SampledKraus {
    pub index: usize,
    pub probability: f64,
    pub normalized_operator: CMatrix,
}

/// Partial trace of a Choi matrix over the output index, yielding
/// `sum_j K_j' K_j` on the input space.
pub fn partial_trace_output(choi: &CMatrix, dim: usize) -> Result<CMatrix> {
    if choi.nrows() != dim * dim || choi.ncols() != dim * dim {
        return Err(Error::DimensionMismatch {
            expected: dim * dim,
            got: choi.nrows(),
        });
    }
    let mut out = CMatrix::zeros(dim, dim);
    for i in 0..dim {
        for i2 in 0..dim {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..dim {
                acc += choi[(i * dim + k, i2 * dim + k)];
            }
            out[(i, i2)] = acc;
        }
    }
    Ok(out)
}
