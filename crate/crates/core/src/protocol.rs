//! One QSW time-step as a physical-style trajectory on the doubled
//! system+ancilla space.
//!
//! The extended space attaches one ancilla per vertex; basis order is
//! `[vertex 1..N, ancilla a_1..a_N]`. A step has three stages:
//!
//! 1. *Initialization*: every vertex couples to its own ancilla with equal
//!    strength for a duration fixed by `g dt_init = arccos(sqrt(alpha))`,
//!    which diverts exactly the incoherent weight `1 - alpha` of each vertex
//!    population into its ancilla.
//! 2. *Coherent evolution*: the ancillae decouple and the vertex block
//!    evolves under the graph propagator `U(dt)`.
//! 3. *Measurement and feed-forward*: the ancilla populations are measured
//!    projectively. If all ancillae are empty the step is done; if ancilla
//!    `a_i` fires, the excitation is moved to a vertex `j` drawn from the
//!    conditional distribution `P(j|i) = kappa_ij / sum_j kappa_ij`.
//!
//! [`enumerate_step_channel`] packages the same three stages as a
//! deterministic operator sum on the extended space; its vertex block
//! reproduces the exact channel, which is the correctness anchor for the
//! whole trajectory scheme.

use num_complex::Complex64;
use rand::Rng;

use crate::channel::{KrausChannel, KrausLabel, KrausOperator};
use crate::error::{Error, Result};
use crate::graph::{DensityMatrix, QswGraph, StateTolerances};
use crate::linalg::{propagator, CMatrix, CVector, StateVector, STRUCTURAL_TOL};
use crate::random::sample_index;

/// Norm threshold below which a state is considered numerically destroyed.
const DEGENERATE_NORM_TOL: f64 = 1e-12;

/// Pure state of one trajectory on the `2N`-dimensional extended space.
///
/// Always normalized within 1e-10. At a step boundary the ancilla amplitudes
/// are all zero; mid-step states (between initialization and measurement)
/// may populate them.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedState {
    n: usize,
    amplitudes: CVector,
}

impl ExtendedState {
    /// Wraps amplitudes over `[vertices, ancillae]`; must have length `2 n_vertices`
    /// and be normalized.
    pub fn new(n_vertices: usize, amplitudes: CVector) -> Result<Self> {
        if amplitudes.len() != 2 * n_vertices || n_vertices == 0 {
            return Err(Error::DimensionMismatch {
                expected: 2 * n_vertices,
                got: amplitudes.len(),
            });
        }
        let defect = (amplitudes.norm_squared() - 1.0).abs();
        if defect > STRUCTURAL_TOL {
            return Err(Error::NotNormalized {
                defect,
                tol: STRUCTURAL_TOL,
            });
        }
        Ok(Self {
            n: n_vertices,
            amplitudes,
        })
    }

    /// Embeds a vertex-space state with empty ancillae.
    pub fn embed(initial: &StateVector) -> Result<Self> {
        let n = initial.dim();
        let mut amplitudes = CVector::zeros(2 * n);
        amplitudes.rows_mut(0, n).copy_from(initial.amplitudes());
        Self::new(n, amplitudes)
    }

    /// The basis state `|j>` for a vertex `j` (0-based).
    pub fn vertex_basis(n_vertices: usize, vertex: usize) -> Result<Self> {
        if vertex >= n_vertices {
            return Err(Error::IndexOutOfRange {
                index: vertex,
                dim: n_vertices,
            });
        }
        let mut amplitudes = CVector::zeros(2 * n_vertices);
        amplitudes[vertex] = Complex64::new(1.0, 0.0);
        Ok(Self {
            n: n_vertices,
            amplitudes,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        2 * self.n
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn vertex_amplitude(&self, vertex: usize) -> Complex64 {
        self.amplitudes[vertex]
    }

    pub fn ancilla_amplitude(&self, vertex: usize) -> Complex64 {
        self.amplitudes[self.n + vertex]
    }

    /// `|amplitude|^2` for each vertex.
    pub fn vertex_populations(&self) -> Vec<f64> {
        (0..self.n).map(|v| self.amplitudes[v].norm_sqr()).collect()
    }

    pub fn total_vertex_population(&self) -> f64 {
        self.vertex_populations().iter().sum()
    }

    pub fn max_ancilla_amplitude(&self) -> f64 {
        (0..self.n)
            .map(|v| self.ancilla_amplitude(v).norm())
            .fold(0.0, f64::max)
    }

    /// Vertex block of `|psi><psi|`, the per-trajectory contribution to the
    /// ensemble average.
    pub fn vertex_block_projector(&self) -> CMatrix {
        let v = self.amplitudes.rows(0, self.n);
        v * v.adjoint()
    }

    fn evolved_by(&self, u: &CMatrix) -> Result<Self> {
        if u.nrows() != self.dim() || u.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: u.nrows(),
            });
        }
        Self::new(self.n, u * &self.amplitudes)
    }
}

/// Embeds a vertex-space density matrix into the extended space: the vertex
/// block is copied, everything touching the ancillae is zero.
pub fn embed_density(rho: &DensityMatrix) -> DensityMatrix {
    let n = rho.dim();
    let mut mat = CMatrix::zeros(2 * n, 2 * n);
    mat.view_mut((0, 0), (n, n)).copy_from(rho.matrix());
    DensityMatrix::from_matrix_unchecked(mat)
}

/// Top-left `n x n` block of an extended-space matrix.
pub fn vertex_block(mat: &CMatrix, n_vertices: usize) -> Result<CMatrix> {
    if mat.nrows() < 2 * n_vertices || mat.ncols() < 2 * n_vertices {
        return Err(Error::DimensionMismatch {
            expected: 2 * n_vertices,
            got: mat.nrows(),
        });
    }
    Ok(mat.view((0, 0), (n_vertices, n_vertices)).into_owned())
}

/// Largest magnitude over the three blocks of an extended-space matrix that
/// involve an ancilla index.
pub fn ancilla_block_max_abs(mat: &CMatrix, n_vertices: usize) -> Result<f64> {
    let n = n_vertices;
    if mat.nrows() != 2 * n || mat.ncols() != 2 * n {
        return Err(Error::DimensionMismatch {
            expected: 2 * n,
            got: mat.nrows(),
        });
    }
    let mut max = 0.0f64;
    for i in 0..2 * n {
        for j in 0..2 * n {
            if i >= n || j >= n {
                max = max.max(mat[(i, j)].norm());
            }
        }
    }
    Ok(max)
}

/// The vertex-ancilla coupling unitary of the initialization stage.
///
/// Each pair `{|m>, |a_m>}` rotates by the angle `arccos(sqrt(alpha))`, so an
/// ancilla-empty input keeps amplitude `sqrt(alpha)` on every vertex and
/// hands `-i sqrt(1 - alpha)` times the vertex amplitude to its ancilla.
pub fn init_unitary(graph: &QswGraph) -> Result<CMatrix> {
    graph.require_valid()?;
    let n = graph.n_vertices();
    // unit coupling strength; only the product g * dt_init matters
    let theta = graph.alpha().sqrt().acos();
    let mut h = CMatrix::zeros(2 * n, 2 * n);
    for m in 0..n {
        h[(m, n + m)] = Complex64::new(1.0, 0.0);
        h[(n + m, m)] = Complex64::new(1.0, 0.0);
    }
    propagator(&h, theta)
}

/// The coherent-evolution unitary: graph propagator on the vertex block,
/// identity on the decoupled ancillae.
pub fn coherent_unitary(graph: &QswGraph, dt: f64) -> Result<CMatrix> {
    graph.require_valid()?;
    if !(dt >= 0.0 && dt.is_finite()) {
        return Err(Error::InvalidTime { t: dt });
    }
    let n = graph.n_vertices();
    let u_graph = propagator(&graph.hamiltonian()?, dt)?;
    let mut u = CMatrix::identity(2 * n, 2 * n);
    u.view_mut((0, 0), (n, n)).copy_from(&u_graph);
    Ok(u)
}

/// The two unitaries of a step, precomputed once per `(graph, dt)` so that
/// trajectory loops avoid rebuilding them.
#[derive(Debug, Clone)]
pub struct StepUnitaries {
    pub init: CMatrix,
    pub coherent: CMatrix,
}

pub fn step_unitaries(graph: &QswGraph, dt: f64) -> Result<StepUnitaries> {
    Ok(StepUnitaries {
        init: init_unitary(graph)?,
        coherent: coherent_unitary(graph, dt)?,
    })
}

/// Measurement result on the ancillae.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// All ancillae empty; the coherent branch survived.
    Empty,
    /// The excitation was found in the ancilla of this vertex (0-based).
    Ancilla(usize),
}

/// Outcome of one full protocol step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub branch: Branch,
    /// Vertex the excitation was fed forward to; present iff an ancilla fired.
    pub feedforward_target: Option<usize>,
    /// State at the next step boundary (ancillae empty).
    pub post_state: ExtendedState,
}

/// Projective measurement of all ancilla populations.
///
/// With probability `sum_v |amp_v|^2` every ancilla is empty: the ancilla
/// amplitudes are zeroed and the vertex block is renormalized. With
/// probability `|amp_{a_i}|^2` the excitation collapses onto `|a_i>`; the
/// collapsed state carries amplitude +1 by convention (the discarded phase
/// never reaches an ensemble average, which sees only `|amp_{a_i}|^2`).
pub fn measure_ancillae<R: Rng + ?Sized>(
    state: &ExtendedState,
    rng: &mut R,
) -> Result<(Branch, ExtendedState)> {
    let n = state.n_vertices();
    let p_empty = state.total_vertex_population();
    let mut weights = Vec::with_capacity(n + 1);
    weights.push(p_empty);
    for v in 0..n {
        weights.push(state.ancilla_amplitude(v).norm_sqr());
    }
    let total: f64 = weights.iter().sum();
    if total < DEGENERATE_NORM_TOL {
        return Err(Error::DegenerateState { norm_sq: total });
    }
    match sample_index(&weights, rng).expect("positive total weight") {
        0 => {
            let scale = Complex64::new(1.0 / p_empty.sqrt(), 0.0);
            let mut amplitudes = CVector::zeros(2 * n);
            for v in 0..n {
                amplitudes[v] = state.vertex_amplitude(v) * scale;
            }
            Ok((Branch::Empty, ExtendedState::new(n, amplitudes)?))
        }
        k => {
            let vertex = k - 1;
            let mut amplitudes = CVector::zeros(2 * n);
            amplitudes[n + vertex] = Complex64::new(1.0, 0.0);
            Ok((Branch::Ancilla(vertex), ExtendedState::new(n, amplitudes)?))
        }
    }
}

/// Draws the feed-forward target `j` from `P(j|i) = kappa_ij / sum_j kappa_ij`
/// for a fired ancilla `i` (0-based). The support is exactly the set of
/// vertices with `kappa_ij > 0`.
pub fn feed_forward<R: Rng + ?Sized>(
    source: usize,
    graph: &QswGraph,
    rng: &mut R,
) -> Result<usize> {
    let n = graph.n_vertices();
    if source >= n {
        return Err(Error::IndexOutOfRange {
            index: source,
            dim: n,
        });
    }
    let kappa = graph.incoherent_rates();
    let weights: Vec<f64> = (0..n).map(|j| kappa[(source, j)].max(0.0)).collect();
    sample_index(&weights, rng).ok_or(Error::NoFeedForwardTargets { vertex: source + 1 })
}

/// Runs one full step (initialize, evolve, measure, feed forward) using
/// freshly built unitaries.
pub fn step<R: Rng + ?Sized>(
    state: &ExtendedState,
    graph: &QswGraph,
    dt: f64,
    rng: &mut R,
) -> Result<StepOutcome> {
    let unitaries = step_unitaries(graph, dt)?;
    step_with(&unitaries, state, graph, rng)
}

/// Runs one full step with precomputed unitaries.
pub fn step_with<R: Rng + ?Sized>(
    unitaries: &StepUnitaries,
    state: &ExtendedState,
    graph: &QswGraph,
    rng: &mut R,
) -> Result<StepOutcome> {
    let max_anc = state.max_ancilla_amplitude();
    if max_anc > STRUCTURAL_TOL {
        return Err(Error::AncillaeNotEmpty {
            max_amplitude: max_anc,
        });
    }
    let evolved = state
        .evolved_by(&unitaries.init)?
        .evolved_by(&unitaries.coherent)?;
    let (branch, collapsed) = measure_ancillae(&evolved, rng)?;
    match branch {
        Branch::Empty => Ok(StepOutcome {
            branch,
            feedforward_target: None,
            post_state: collapsed,
        }),
        Branch::Ancilla(source) => {
            let target = feed_forward(source, graph, rng)?;
            Ok(StepOutcome {
                branch,
                feedforward_target: Some(target),
                post_state: ExtendedState::vertex_basis(graph.n_vertices(), target)?,
            })
        }
    }
}

/// One measurement/feed-forward operator `M^{a_i}_j = sqrt(P(j|i)) F M_{a_i}`,
/// or the bare ancilla projector `M_{a_i}` when vertex `i` has no outgoing
/// rates (`target = None`, possible only for `alpha = 1`).
#[derive(Debug, Clone)]
pub struct ConditionalMeasurement {
    /// Ancilla vertex `i` (0-based).
    pub source: usize,
    /// Feed-forward vertex `j` (0-based).
    pub target: Option<usize>,
    pub matrix: CMatrix,
}

/// The complete measurement-operator set of one step:
/// `{M_0} u {M^{a_i}_j}`, complete on the extended space.
#[derive(Debug, Clone)]
pub struct MeasurementOps {
    dim: usize,
    /// Projector onto the vertex subspace (all ancillae empty).
    pub empty: CMatrix,
    pub conditional: Vec<ConditionalMeasurement>,
}

impl MeasurementOps {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `max |M_0' M_0 + sum M' M - I|` over the extended space.
    pub fn completeness_defect(&self) -> f64 {
        let mut sum = self.empty.adjoint() * &self.empty;
        for c in &self.conditional {
            sum += c.matrix.adjoint() * &c.matrix;
        }
        crate::linalg::max_abs(&(sum - CMatrix::identity(self.dim, self.dim)))
    }
}

/// The permutation exchanging vertex `target` with ancilla `a_source`,
/// identity elsewhere; the unitary form of the feed-forward move.
pub fn feed_forward_permutation(n_vertices: usize, source: usize, target: usize) -> CMatrix {
    let mut f = CMatrix::identity(2 * n_vertices, 2 * n_vertices);
    f.swap_rows(target, n_vertices + source);
    f
}

/// Builds the measurement-operator set for one step of the protocol.
///
/// `M_0` projects onto the vertex subspace. For each vertex `i` with outgoing
/// rates and each `j` with `kappa_ij > 0`,
/// `M^{a_i}_j = sqrt(P(j|i)) F^{a_i}_j M_{a_i}` moves the excitation from
/// ancilla `a_i` to vertex `j` with the branch weight of the classical choice.
/// Rows without outgoing rates (alpha = 1) contribute their bare projector so
/// the set stays complete; those branches carry zero probability on protocol
/// states.
pub fn build_measurement_ops(graph: &QswGraph) -> Result<MeasurementOps> {
    graph.require_valid()?;
    let n = graph.n_vertices();
    let dim = 2 * n;
    let mut empty = CMatrix::zeros(dim, dim);
    for v in 0..n {
        empty[(v, v)] = Complex64::new(1.0, 0.0);
    }
    let kappa = graph.incoherent_rates();
    let mut conditional = Vec::new();
    for source in 0..n {
        let row_sum = graph.kappa_row_sum(source);
        let mut projector = CMatrix::zeros(dim, dim);
        projector[(n + source, n + source)] = Complex64::new(1.0, 0.0);
        if row_sum <= 0.0 {
            conditional.push(ConditionalMeasurement {
                source,
                target: None,
                matrix: projector,
            });
            continue;
        }
        for target in 0..n {
            let k = kappa[(source, target)];
            if k > 0.0 {
                let f = feed_forward_permutation(n, source, target);
                let matrix = (f * &projector).scale((k / row_sum).sqrt());
                conditional.push(ConditionalMeasurement {
                    source,
                    target: Some(target),
                    matrix,
                });
            }
        }
    }
    Ok(MeasurementOps {
        dim,
        empty,
        conditional,
    })
}

/// The deterministic operator-sum form of one protocol step on the extended
/// space: `{M_0 U U_init} u {M^{a_i}_j U U_init}`.
///
/// Applied to an embedded vertex state, its output has the exact channel's
/// action in the vertex block and exactly zero ancilla blocks, which is the
/// exhaustive-average statement behind the trajectory scheme.
pub fn enumerate_step_channel(graph: &QswGraph, dt: f64) -> Result<KrausChannel> {
    let ops = build_measurement_ops(graph)?;
    let unitaries = step_unitaries(graph, dt)?;
    let evolve = &unitaries.coherent * &unitaries.init;
    let mut operators = Vec::with_capacity(1 + ops.conditional.len());
    operators.push(KrausOperator {
        label: KrausLabel::Coherent,
        matrix: &ops.empty * &evolve,
    });
    for c in &ops.conditional {
        let label = match c.target {
            Some(target) => KrausLabel::Jump {
                from: c.source,
                to: target,
            },
            None => KrausLabel::IdleAncilla { vertex: c.source },
        };
        operators.push(KrausOperator {
            label,
            matrix: &c.matrix * &evolve,
        });
    }
    KrausChannel::new(ops.dim, operators)
}

/// Applies the enumerated step to an embedded density matrix and re-wraps the
/// result, tolerating only the numerical dust of the operator products.
pub fn enumerated_step(
    channel_2n: &KrausChannel,
    rho_ext: &DensityMatrix,
) -> Result<DensityMatrix> {
    let out = channel_2n.apply_matrix(rho_ext.matrix())?;
    DensityMatrix::with_tolerances(
        out,
        &StateTolerances {
            hermiticity: 1e-10,
            trace: 1e-9,
            positivity: 1e-9,
        },
    )
}
