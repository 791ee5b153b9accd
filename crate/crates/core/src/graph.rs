//! QSW graph definition and validation, plus vertex-space density matrices.
//!
//! A walk on `N` vertices is described by a coherence weight `alpha`, a
//! Hermitian matrix of coherent couplings (the graph Hamiltonian), and a
//! matrix of incoherent jump rates `kappa[(n, m)]` for the directed hop
//! `n -> m` (self-loops allowed). Trace preservation of the walk forces every
//! row of `kappa` to sum to `1 - alpha`.
//!
//! Vertices are numbered `1..=N` in files, error messages and reports, and
//! `0..N` everywhere in code.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, StateVector, NORMALIZATION_TOL, STRUCTURAL_TOL};

/// Row-sum tolerance used when no explicit tolerance is given.
pub const DEFAULT_VALIDATION_TOL: f64 = 1e-9;

/// Options for [`QswGraph::validate`].
#[derive(Debug, Clone)]
pub struct ValidationOptions {
    /// Tolerance on the row-normalization constraint `sum_m kappa[n, m] = 1 - alpha`.
    pub tol: f64,
    /// Tolerance on Hermiticity of the coherent coupling matrix.
    pub hermiticity_tol: f64,
    /// Accept complex coherent couplings. The default insists on real
    /// symmetric couplings; nothing in the walk itself requires reality, so
    /// structural checks inside the crate always allow complex entries.
    pub allow_complex_couplings: bool,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_VALIDATION_TOL,
            hermiticity_tol: NORMALIZATION_TOL,
            allow_complex_couplings: false,
        }
    }
}

impl ValidationOptions {
    /// The invariants every operation relies on, with complex couplings allowed.
    pub fn structural() -> Self {
        Self {
            allow_complex_couplings: true,
            ..Self::default()
        }
    }
}

/// A single violated graph invariant. Vertex indices are 1-based.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    AlphaOutOfRange {
        alpha: f64,
    },
    RateOutOfRange {
        from: usize,
        to: usize,
        kappa: f64,
    },
    RowSumMismatch {
        vertex: usize,
        sum: f64,
        expected: f64,
        defect: f64,
    },
    CouplingNotHermitian {
        from: usize,
        to: usize,
        defect: f64,
    },
    ComplexCouplingDisallowed {
        from: usize,
        to: usize,
        imaginary: f64,
    },
    NonFiniteCoupling {
        from: usize,
        to: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::AlphaOutOfRange { alpha } => {
                write!(f, "alpha = {alpha} outside [0, 1]")
            }
            Violation::RateOutOfRange { from, to, kappa } => {
                write!(f, "kappa({from},{to}) = {kappa} outside [0, 1]")
            }
            Violation::RowSumMismatch {
                vertex,
                sum,
                expected,
                defect,
            } => write!(
                f,
                "row {vertex}: incoherent rates sum to {sum}, expected 1 - alpha = {expected} \
                 (defect {defect:.3e})"
            ),
            Violation::CouplingNotHermitian { from, to, defect } => write!(
                f,
                "coherent couplings ({from},{to}) and ({to},{from}) are not conjugate \
                 (defect {defect:.3e})"
            ),
            Violation::ComplexCouplingDisallowed {
                from,
                to,
                imaginary,
            } => write!(
                f,
                "coherent coupling ({from},{to}) has imaginary part {imaginary:e} but complex \
                 couplings were not enabled"
            ),
            Violation::NonFiniteCoupling { from, to } => {
                write!(f, "coherent coupling ({from},{to}) is not finite")
            }
        }
    }
}

/// Outcome of graph validation: empty means the graph is valid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violations(&self) -> &[Violation] {
        &self.violations
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return write!(f, "ok");
        }
        for (k, v) in self.violations.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            write!(f, "- {v}")?;
        }
        Ok(())
    }
}

/// A discrete-time QSW graph: vertex count, coherent weight `alpha`,
/// Hermitian coherent couplings and directed incoherent rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GraphFile", into = "GraphFile")]
pub struct QswGraph {
    n: usize,
    alpha: f64,
    /// Graph Hamiltonian entries: `coherent[(m, n)]` is the coefficient of
    /// `|m><n|`, i.e. the coupling written on the directed pair `n -> m`.
    coherent: CMatrix,
    /// `kappa[(n, m)]` is the incoherent rate for the hop `n -> m`.
    kappa: DMatrix<f64>,
}

impl QswGraph {
    /// Wraps raw matrices without validating the walk invariants; only shapes
    /// are checked. Use [`QswGraph::validate`] to obtain a violation report.
    pub fn from_matrices(alpha: f64, coherent: CMatrix, kappa: DMatrix<f64>) -> Result<Self> {
        if !coherent.is_square() {
            return Err(Error::NotSquare {
                rows: coherent.nrows(),
                cols: coherent.ncols(),
            });
        }
        let n = coherent.nrows();
        if n == 0 {
            return Err(Error::EmptyMatrix);
        }
        if kappa.nrows() != n || kappa.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: kappa.nrows().max(kappa.ncols()),
            });
        }
        Ok(Self {
            n,
            alpha,
            coherent,
            kappa,
        })
    }

    pub fn builder(n_vertices: usize) -> QswGraphBuilder {
        QswGraphBuilder::new(n_vertices)
    }

    pub fn n_vertices(&self) -> usize {
        self.n
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Coherent coupling matrix; equals the graph Hamiltonian for valid graphs.
    pub fn coherent_couplings(&self) -> &CMatrix {
        &self.coherent
    }

    /// Incoherent rate matrix; entry `(n, m)` is the rate of the hop `n -> m`.
    pub fn incoherent_rates(&self) -> &DMatrix<f64> {
        &self.kappa
    }

    /// Sum of outgoing incoherent rates of vertex `n` (0-based).
    pub fn kappa_row_sum(&self, n: usize) -> f64 {
        self.kappa.row(n).iter().sum()
    }

    /// Checks every graph invariant and reports each violated row/entry with
    /// its defect magnitude. Violations are data, not failures.
    pub fn validate(&self, opts: &ValidationOptions) -> ValidationReport {
        let mut report = ValidationReport::default();
        if !(self.alpha.is_finite() && (0.0..=1.0).contains(&self.alpha)) {
            report
                .violations
                .push(Violation::AlphaOutOfRange { alpha: self.alpha });
        }
        for n in 0..self.n {
            for m in 0..self.n {
                let k = self.kappa[(n, m)];
                if !(k.is_finite() && (0.0..=1.0).contains(&k)) {
                    report.violations.push(Violation::RateOutOfRange {
                        from: n + 1,
                        to: m + 1,
                        kappa: k,
                    });
                }
            }
            let sum = self.kappa_row_sum(n);
            let expected = 1.0 - self.alpha;
            let defect = (sum - expected).abs();
            if !(defect <= opts.tol) {
                report.violations.push(Violation::RowSumMismatch {
                    vertex: n + 1,
                    sum,
                    expected,
                    defect,
                });
            }
        }
        for i in 0..self.n {
            for j in i..self.n {
                let a = self.coherent[(i, j)];
                let b = self.coherent[(j, i)];
                if !(a.re.is_finite() && a.im.is_finite()) {
                    report.violations.push(Violation::NonFiniteCoupling {
                        from: j + 1,
                        to: i + 1,
                    });
                    continue;
                }
                let defect = (a - b.conj()).norm();
                if !(defect <= opts.hermiticity_tol) {
                    report.violations.push(Violation::CouplingNotHermitian {
                        from: j + 1,
                        to: i + 1,
                        defect,
                    });
                }
                if !opts.allow_complex_couplings && a.im.abs() > opts.hermiticity_tol {
                    report
                        .violations
                        .push(Violation::ComplexCouplingDisallowed {
                            from: j + 1,
                            to: i + 1,
                            imaginary: a.im,
                        });
                }
            }
        }
        report
    }

    /// Errors unless the structural invariants hold (complex couplings allowed).
    pub fn require_valid(&self) -> Result<()> {
        let report = self.validate(&ValidationOptions::structural());
        if report.is_ok() {
            Ok(())
        } else {
            Err(Error::InvalidGraph(report))
        }
    }

    /// The graph Hamiltonian: `H[(m, n)] = g_nm` on coherent edges, zero
    /// elsewhere. Hermitian for every valid graph.
    pub fn hamiltonian(&self) -> Result<CMatrix> {
        self.require_valid()?;
        Ok(self.coherent.clone())
    }
}

/// Incremental construction of a [`QswGraph`] with 1-based vertex indices.
/// Coherent couplings are mirrored Hermitically; incoherent rates are
/// directed. `build` runs structural validation.
#[derive(Debug, Clone)]
pub struct QswGraphBuilder {
    n: usize,
    alpha: f64,
    coherent: CMatrix,
    kappa: DMatrix<f64>,
}

impl QswGraphBuilder {
    fn new(n: usize) -> Self {
        Self {
            n,
            alpha: 1.0,
            coherent: CMatrix::zeros(n.max(1), n.max(1)),
            kappa: DMatrix::zeros(n.max(1), n.max(1)),
        }
    }

    pub fn alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    fn check_pair(&self, from: usize, to: usize) {
        assert!(
            (1..=self.n).contains(&from) && (1..=self.n).contains(&to),
            "vertex pair ({from},{to}) out of range 1..={}",
            self.n
        );
    }

    /// Real coherent coupling `g` on the undirected pair `{from, to}`.
    pub fn coherent(self, from: usize, to: usize, g: f64) -> Self {
        self.coherent_complex(from, to, Complex64::new(g, 0.0))
    }

    /// Complex coherent coupling: sets `H[to-1, from-1] = g` and its
    /// Hermitian mirror.
    pub fn coherent_complex(mut self, from: usize, to: usize, g: Complex64) -> Self {
        self.check_pair(from, to);
        self.coherent[(to - 1, from - 1)] = g;
        self.coherent[(from - 1, to - 1)] = g.conj();
        self
    }

    /// Directed incoherent rate for the hop `from -> to` (self-loops allowed).
    pub fn incoherent(mut self, from: usize, to: usize, kappa: f64) -> Self {
        self.check_pair(from, to);
        self.kappa[(from - 1, to - 1)] = kappa;
        self
    }

    pub fn build(self) -> Result<QswGraph> {
        if self.n == 0 {
            return Err(Error::EmptyMatrix);
        }
        let graph = QswGraph::from_matrices(self.alpha, self.coherent, self.kappa)?;
        graph.require_valid()?;
        Ok(graph)
    }
}

/// Tolerances applied when accepting a matrix as a density matrix.
#[derive(Debug, Clone, Copy)]
pub struct StateTolerances {
    pub hermiticity: f64,
    pub trace: f64,
    /// Accept a minimum eigenvalue down to `-positivity`.
    pub positivity: f64,
}

impl Default for StateTolerances {
    fn default() -> Self {
        Self {
            hermiticity: STRUCTURAL_TOL,
            trace: STRUCTURAL_TOL,
            positivity: STRUCTURAL_TOL,
        }
    }
}

impl StateTolerances {
    pub fn uniform(tol: f64) -> Self {
        Self {
            hermiticity: tol,
            trace: tol,
            positivity: tol,
        }
    }
}

/// Hermitian, positive semidefinite, unit-trace matrix on the vertex
/// (single-excitation) subspace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DensityMatrixFile", into = "DensityMatrixFile")]
pub struct DensityMatrix {
    mat: CMatrix,
}

impl DensityMatrix {
    pub fn new(mat: CMatrix) -> Result<Self> {
        Self::with_tolerances(mat, &StateTolerances::default())
    }

    pub fn with_tolerances(mat: CMatrix, tol: &StateTolerances) -> Result<Self> {
        if !mat.is_square() {
            return Err(Error::NotSquare {
                rows: mat.nrows(),
                cols: mat.ncols(),
            });
        }
        if mat.nrows() == 0 {
            return Err(Error::EmptyMatrix);
        }
        let defect = linalg::hermiticity_defect(&mat);
        if !(defect <= tol.hermiticity) {
            return Err(Error::NotHermitian {
                defect,
                tol: tol.hermiticity,
            });
        }
        let trace = mat.trace();
        if !((trace - Complex64::new(1.0, 0.0)).norm() <= tol.trace) {
            return Err(Error::TraceNotOne {
                trace: trace.re,
                tol: tol.trace,
            });
        }
        let min_eig = linalg::eig_hermitian_tol(&mat, tol.hermiticity)?.eigenvalues[0];
        if !(min_eig >= -tol.positivity) {
            return Err(Error::NotPositive {
                min_eigenvalue: min_eig,
                tol: tol.positivity,
            });
        }
        Ok(Self { mat })
    }

    pub(crate) fn from_matrix_unchecked(mat: CMatrix) -> Self {
        Self { mat }
    }

    /// Pure state `|psi><psi|`; `psi` must be normalized.
    pub fn pure(psi: &StateVector) -> Result<Self> {
        psi.require_normalized(NORMALIZATION_TOL)?;
        let v = psi.amplitudes();
        Ok(Self {
            mat: v * v.adjoint(),
        })
    }

    /// Basis-state projector `|index><index|` (0-based).
    pub fn basis_state(dim: usize, index: usize) -> Result<Self> {
        Self::pure(&StateVector::basis(dim, index)?)
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::EmptyMatrix);
        }
        Ok(Self {
            mat: CMatrix::identity(dim, dim).scale(1.0 / dim as f64),
        })
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }

    /// Diagonal occupation probabilities, unclipped.
    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.mat[(i, i)].re).collect()
    }

    /// `Tr rho^2`, equal to 1 for pure states.
    pub fn purity(&self) -> f64 {
        self.mat.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn trace_distance(&self, other: &Self) -> Result<f64> {
        linalg::trace_distance(&self.mat, &other.mat)
    }
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

/// JSON form of a graph. Hermitian partner edges may be listed once; the
/// loader mirrors them.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    pub n_vertices: usize,
    pub alpha: f64,
    #[serde(default)]
    pub coherent: Vec<CoherentEdge>,
    #[serde(default)]
    pub incoherent: Vec<IncoherentEdge>,
    /// Opt-in for complex coherent couplings; defaults to the real-symmetric
    /// convention.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub allow_complex: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoherentEdge {
    pub from: usize,
    pub to: usize,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IncoherentEdge {
    pub from: usize,
    pub to: usize,
    pub kappa: f64,
}

impl TryFrom<GraphFile> for QswGraph {
    type Error = Error;

    fn try_from(file: GraphFile) -> Result<Self> {
        let n = file.n_vertices;
        if n == 0 {
            return Err(Error::EmptyMatrix);
        }
        let check = |v: usize| -> Result<usize> {
            if (1..=n).contains(&v) {
                Ok(v - 1)
            } else {
                Err(Error::VertexOutOfRange { index: v, n })
            }
        };
        let mut coherent = CMatrix::zeros(n, n);
        let mut explicit = vec![false; n * n];
        for e in &file.coherent {
            let (from, to) = (check(e.from)?, check(e.to)?);
            // the edge (from, to) carries the coefficient of |to><from|
            if explicit[to * n + from] {
                return Err(Error::DuplicateEdge {
                    from: e.from,
                    to: e.to,
                });
            }
            explicit[to * n + from] = true;
            coherent[(to, from)] = Complex64::new(e.re, e.im);
        }
        // mirror unlisted partners; cross-check listed ones
        for i in 0..n {
            for j in 0..n {
                if i == j || !explicit[i * n + j] {
                    continue;
                }
                if explicit[j * n + i] {
                    if coherent[(j, i)] != coherent[(i, j)].conj() {
                        return Err(Error::ConflictingMirrorEdge {
                            from: j + 1,
                            to: i + 1,
                        });
                    }
                } else {
                    coherent[(j, i)] = coherent[(i, j)].conj();
                }
            }
        }
        let mut kappa = DMatrix::zeros(n, n);
        let mut seen = vec![false; n * n];
        for e in &file.incoherent {
            let (from, to) = (check(e.from)?, check(e.to)?);
            if seen[from * n + to] {
                return Err(Error::DuplicateEdge {
                    from: e.from,
                    to: e.to,
                });
            }
            seen[from * n + to] = true;
            kappa[(from, to)] = e.kappa;
        }
        let graph = QswGraph::from_matrices(file.alpha, coherent, kappa)?;
        let report = graph.validate(&ValidationOptions {
            allow_complex_couplings: file.allow_complex,
            ..ValidationOptions::default()
        });
        if !report.is_ok() {
            return Err(Error::InvalidGraph(report));
        }
        Ok(graph)
    }
}

impl From<QswGraph> for GraphFile {
    fn from(g: QswGraph) -> Self {
        let n = g.n;
        let mut coherent = Vec::new();
        let mut allow_complex = false;
        for from in 0..n {
            for to in from..n {
                let val = g.coherent[(to, from)];
                if val != Complex64::new(0.0, 0.0) {
                    if val.im != 0.0 {
                        allow_complex = true;
                    }
                    coherent.push(CoherentEdge {
                        from: from + 1,
                        to: to + 1,
                        re: val.re,
                        im: val.im,
                    });
                }
            }
        }
        let mut incoherent = Vec::new();
        for from in 0..n {
            for to in 0..n {
                let val = g.kappa[(from, to)];
                if val != 0.0 {
                    incoherent.push(IncoherentEdge {
                        from: from + 1,
                        to: to + 1,
                        kappa: val,
                    });
                }
            }
        }
        GraphFile {
            n_vertices: n,
            alpha: g.alpha,
            coherent,
            incoherent,
            allow_complex,
        }
    }
}

/// JSON form of a density matrix: row-major real and imaginary grids.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityMatrixFile {
    pub dim: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl TryFrom<DensityMatrixFile> for DensityMatrix {
    type Error = Error;

    fn try_from(file: DensityMatrixFile) -> Result<Self> {
        let n = file.dim;
        for grid in [&file.re, &file.im] {
            if grid.len() != n || grid.iter().any(|row| row.len() != n) {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: grid
                        .iter()
                        .map(|r| r.len())
                        .chain([grid.len()])
                        .max()
                        .unwrap_or(0),
                });
            }
        }
        let mat = CMatrix::from_fn(n, n, |i, j| Complex64::new(file.re[i][j], file.im[i][j]));
        DensityMatrix::new(mat)
    }
}

impl From<DensityMatrix> for DensityMatrixFile {
    fn from(rho: DensityMatrix) -> Self {
        let n = rho.dim();
        let re = (0..n)
            .map(|i| (0..n).map(|j| rho.mat[(i, j)].re).collect())
            .collect();
        let im = (0..n)
            .map(|i| (0..n).map(|j| rho.mat[(i, j)].im).collect())
            .collect();
        DensityMatrixFile { dim: n, re, im }
    }
}
