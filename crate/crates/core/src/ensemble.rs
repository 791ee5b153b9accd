//! Trajectory ensembles: run many independent protocol trajectories, average
//! them, and quantify convergence to the exact channel.
//!
//! Reproducibility contract: every trajectory owns an independent counter-mode
//! random stream derived from `(master_seed, trajectory_index)`, and the
//! averages accumulate in fixed index order (trajectories within a
//! fixed-size batch, then batches in order). Results are therefore identical
//! bit for bit no matter how many worker threads execute the batches.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{DensityMatrix, QswGraph, StateTolerances};
use crate::linalg::{eig_hermitian, CMatrix, StateVector};
use crate::protocol::{step_unitaries, step_with, ExtendedState, StepUnitaries};
use crate::random::sample_index;

/// Trajectories per work item; fixed so that batch boundaries (and with them
/// the reduction order) never depend on the worker count.
const TRAJECTORY_BATCH: usize = 512;

/// What to accumulate while running.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordMode {
    /// Vertex populations only; cheapest.
    PopulationsOnly,
    /// Populations plus the full averaged vertex density matrix per step.
    FullDensityMatrix,
}

#[derive(Debug, Clone)]
pub struct EnsembleConfig {
    /// Number of trajectories `M >= 1`.
    pub n_trajectories: usize,
    /// Steps per trajectory `k >= 0`.
    pub n_steps: usize,
    /// Coherent step length.
    pub dt: f64,
    /// Seed of the whole ensemble; trajectory `i` uses stream `i` of it.
    pub master_seed: u64,
    pub record_mode: RecordMode,
}

/// Averages over an ensemble of trajectories.
#[derive(Debug, Clone)]
pub struct EnsembleResult {
    /// `k + 1` averaged vertex density matrices (step 0 included); `None` in
    /// populations-only mode.
    pub per_step_average: Option<Vec<DensityMatrix>>,
    /// `k + 1` averaged vertex population vectors.
    pub per_step_populations: Vec<Vec<f64>>,
    pub trajectories_used: usize,
    /// Echo of the master seed.
    pub seed: u64,
}

/// The per-trajectory stream: ChaCha8 keyed by the master seed on the
/// counter stream of the trajectory index.
pub fn trajectory_rng(master_seed: u64, traj_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(traj_index);
    rng
}

fn check_config(cfg: &EnsembleConfig) -> Result<()> {
    if cfg.n_trajectories == 0 {
        return Err(Error::ZeroTrajectories);
    }
    if !(cfg.dt > 0.0 && cfg.dt.is_finite()) {
        return Err(Error::NonPositiveTimeStep { dt: cfg.dt });
    }
    Ok(())
}

/// Runs one trajectory from a pure initial state: `k` protocol steps from the
/// embedded input, recording every step boundary. Deterministic in
/// `(cfg.master_seed, traj_index)`.
pub fn run_trajectory(
    graph: &QswGraph,
    initial: &StateVector,
    cfg: &EnsembleConfig,
    traj_index: u64,
) -> Result<Vec<ExtendedState>> {
    graph.require_valid()?;
    check_config(cfg)?;
    if initial.dim() != graph.n_vertices() {
        return Err(Error::DimensionMismatch {
            expected: graph.n_vertices(),
            got: initial.dim(),
        });
    }
    let unitaries = step_unitaries(graph, cfg.dt)?;
    let mut rng = trajectory_rng(cfg.master_seed, traj_index);
    trajectory_states(
        &unitaries,
        graph,
        ExtendedState::embed(initial)?,
        cfg.n_steps,
        &mut rng,
    )
}

fn trajectory_states(
    unitaries: &StepUnitaries,
    graph: &QswGraph,
    start: ExtendedState,
    n_steps: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<ExtendedState>> {
    let mut states = Vec::with_capacity(n_steps + 1);
    states.push(start);
    for _ in 0..n_steps {
        let outcome = step_with(unitaries, states.last().expect("non-empty"), graph, rng)?;
        states.push(outcome.post_state);
    }
    Ok(states)
}

struct BatchSums {
    populations: Vec<Vec<f64>>,
    matrices: Option<Vec<CMatrix>>,
}

impl BatchSums {
    fn new(n: usize, n_steps: usize, mode: RecordMode) -> Self {
        Self {
            populations: vec![vec![0.0; n]; n_steps + 1],
            matrices: match mode {
                RecordMode::PopulationsOnly => None,
                RecordMode::FullDensityMatrix => Some(vec![CMatrix::zeros(n, n); n_steps + 1]),
            },
        }
    }

    fn record(&mut self, step: usize, state: &ExtendedState) {
        for (slot, p) in self.populations[step]
            .iter_mut()
            .zip(state.vertex_populations())
        {
            *slot += p;
        }
        if let Some(mats) = self.matrices.as_mut() {
            mats[step] += state.vertex_block_projector();
        }
    }

    fn merge(&mut self, other: BatchSums) {
        for (mine, theirs) in self.populations.iter_mut().zip(other.populations) {
            for (a, b) in mine.iter_mut().zip(theirs) {
                *a += b;
            }
        }
        if let (Some(mine), Some(theirs)) = (self.matrices.as_mut(), other.matrices) {
            for (a, b) in mine.iter_mut().zip(theirs) {
                *a += b;
            }
        }
    }
}

/// Runs the full ensemble and averages it.
///
/// Mixed initial states are handled by eigen-ensemble sampling: trajectory
/// `i` draws a pure eigenvector of `rho0` with its eigenvalue as weight,
/// using the trajectory's own stream, so the run stays embarrassingly
/// parallel and bitwise reproducible.
pub fn run_ensemble(
    graph: &QswGraph,
    rho0: &DensityMatrix,
    cfg: &EnsembleConfig,
) -> Result<EnsembleResult> {
    graph.require_valid()?;
    check_config(cfg)?;
    let n = graph.n_vertices();
    if rho0.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: rho0.dim(),
        });
    }
    let unitaries = step_unitaries(graph, cfg.dt)?;
    let eig = eig_hermitian(rho0.matrix())?;
    let weights: Vec<f64> = eig.eigenvalues.iter().map(|l| l.max(0.0)).collect();

    let m = cfg.n_trajectories;
    let n_batches = m.div_ceil(TRAJECTORY_BATCH);
    let partials: Result<Vec<BatchSums>> = (0..n_batches)
        .into_par_iter()
        .map(|batch| {
            let lo = batch * TRAJECTORY_BATCH;
            let hi = (lo + TRAJECTORY_BATCH).min(m);
            let mut sums = BatchSums::new(n, cfg.n_steps, cfg.record_mode);
            for index in lo..hi {
                let mut rng = trajectory_rng(cfg.master_seed, index as u64);
                let column = sample_index(&weights, &mut rng).expect("unit trace");
                let initial = StateVector::new(eig.eigenvectors.column(column).into_owned())?;
                let states = trajectory_states(
                    &unitaries,
                    graph,
                    ExtendedState::embed(&initial)?,
                    cfg.n_steps,
                    &mut rng,
                )?;
                for (step, state) in states.iter().enumerate() {
                    sums.record(step, state);
                }
            }
            Ok(sums)
        })
        .collect();

    let mut total = BatchSums::new(n, cfg.n_steps, cfg.record_mode);
    for partial in partials? {
        total.merge(partial);
    }

    let scale = 1.0 / m as f64;
    let per_step_populations: Vec<Vec<f64>> = total
        .populations
        .into_iter()
        .map(|row| row.into_iter().map(|p| p * scale).collect())
        .collect();
    let per_step_average = match total.matrices {
        None => None,
        Some(mats) => {
            let tol = StateTolerances {
                hermiticity: 1e-10,
                trace: 1e-9,
                positivity: 1e-9,
            };
            let mut avgs = Vec::with_capacity(mats.len());
            for mat in mats {
                avgs.push(DensityMatrix::with_tolerances(mat.scale(scale), &tol)?);
            }
            Some(avgs)
        }
    };
    Ok(EnsembleResult {
        per_step_average,
        per_step_populations,
        trajectories_used: m,
        seed: cfg.master_seed,
    })
}

/// Per-step trace distances of an ensemble average against exact iterates,
/// with summary statistics.
#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    /// One trace distance per recorded step, index 0 first.
    pub per_step: Vec<f64>,
    pub max: f64,
    pub mean: f64,
    /// `c` such that the observed mean error over steps `>= 1` equals
    /// `c / sqrt(M)`; a scale-free summary of the Monte Carlo error.
    pub sqrt_m_coefficient: f64,
}

pub fn convergence_report(
    result: &EnsembleResult,
    exact: &[DensityMatrix],
) -> Result<ConvergenceReport> {
    let averages = result
        .per_step_average
        .as_ref()
        .ok_or(Error::MissingDensityAverages)?;
    if averages.len() != exact.len() {
        return Err(Error::DimensionMismatch {
            expected: exact.len(),
            got: averages.len(),
        });
    }
    let mut per_step = Vec::with_capacity(exact.len());
    for (avg, reference) in averages.iter().zip(exact) {
        per_step.push(avg.trace_distance(reference)?);
    }
    let max = per_step.iter().cloned().fold(0.0, f64::max);
    let mean = per_step.iter().sum::<f64>() / per_step.len() as f64;
    let tail = if per_step.len() > 1 {
        per_step[1..].iter().sum::<f64>() / (per_step.len() - 1) as f64
    } else {
        per_step[0]
    };
    let sqrt_m_coefficient = tail * (result.trajectories_used as f64).sqrt();
    Ok(ConvergenceReport {
        per_step,
        max,
        mean,
        sqrt_m_coefficient,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::KrausChannel;
    use crate::linalg::propagator;
    use crate::random::random_density_matrix;
    use approx::assert_abs_diff_eq;

    fn benchmark_graph() -> QswGraph {
        QswGraph::builder(2)
            .alpha(0.5)
            .coherent(1, 2, 1.0)
            .incoherent(1, 2, 0.5)
            .incoherent(2, 1, 0.5)
            .build()
            .unwrap()
    }

    fn config(m: usize, k: usize, seed: u64) -> EnsembleConfig {
        EnsembleConfig {
            n_trajectories: m,
            n_steps: k,
            dt: std::f64::consts::FRAC_PI_4,
            master_seed: seed,
            record_mode: RecordMode::FullDensityMatrix,
        }
    }

    #[test]
    fn zero_step_trajectory_is_the_embedding() {
        let g = benchmark_graph();
        let psi = StateVector::basis(2, 0).unwrap();
        let states = run_trajectory(&g, &psi, &config(1, 0, 7), 0).unwrap();
        assert_eq!(states.len(), 1);
        assert_abs_diff_eq!(states[0].vertex_populations()[0], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn trajectories_are_deterministic_per_seed_and_index() {
        let g = benchmark_graph();
        let psi = StateVector::basis(2, 0).unwrap();
        let cfg = config(1, 6, 123);
        let a = run_trajectory(&g, &psi, &cfg, 5).unwrap();
        let b = run_trajectory(&g, &psi, &cfg, 5).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.amplitudes(), y.amplitudes());
        }
        // a different index diverges
        let c = run_trajectory(&g, &psi, &cfg, 6).unwrap();
        assert!(a
            .iter()
            .zip(&c)
            .any(|(x, y)| x.amplitudes() != y.amplitudes()));
    }

    #[test]
    fn coherent_walk_has_a_single_trajectory() {
        let g = QswGraph::builder(2)
            .alpha(1.0)
            .coherent(1, 2, 1.0)
            .build()
            .unwrap();
        let psi = StateVector::basis(2, 0).unwrap();
        let cfg = config(1, 4, 9);
        let a = run_trajectory(&g, &psi, &cfg, 0).unwrap();
        let b = run_trajectory(&g, &psi, &cfg, 71).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.amplitudes(), y.amplitudes());
        }
    }

    #[test]
    fn single_coherent_trajectory_matches_exact_evolution() {
        let g = QswGraph::builder(2)
            .alpha(1.0)
            .coherent(1, 2, 1.0)
            .build()
            .unwrap();
        let rho0 = DensityMatrix::basis_state(2, 0).unwrap();
        let cfg = config(1, 5, 3);
        let result = run_ensemble(&g, &rho0, &cfg).unwrap();
        let u = propagator(&g.hamiltonian().unwrap(), cfg.dt).unwrap();
        let mut psi = crate::linalg::CVector::zeros(2);
        psi[0] = num_complex::Complex64::new(1.0, 0.0);
        for step in 0..=5 {
            for v in 0..2 {
                assert_abs_diff_eq!(
                    result.per_step_populations[step][v],
                    psi[v].norm_sqr(),
                    epsilon = 1e-12
                );
            }
            psi = &u * psi;
        }
    }

    #[test]
    fn deterministic_hop_walk_alternates() {
        let g = QswGraph::builder(2)
            .alpha(0.0)
            .incoherent(1, 2, 1.0)
            .incoherent(2, 1, 1.0)
            .build()
            .unwrap();
        let rho0 = DensityMatrix::basis_state(2, 0).unwrap();
        let result = run_ensemble(&g, &rho0, &config(17, 4, 5)).unwrap();
        for step in 0..=4 {
            let expected = if step % 2 == 0 {
                [1.0, 0.0]
            } else {
                [0.0, 1.0]
            };
            for v in 0..2 {
                assert_abs_diff_eq!(
                    result.per_step_populations[step][v],
                    expected[v],
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn ensemble_converges_to_exact_channel() {
        let g = benchmark_graph();
        let rho0 = DensityMatrix::basis_state(2, 0).unwrap();
        let cfg = config(40_000, 5, 20_260_811);
        let result = run_ensemble(&g, &rho0, &cfg).unwrap();
        let exact = KrausChannel::qsw_step(&g, cfg.dt)
            .unwrap()
            .iterate(&rho0, 5)
            .unwrap();
        let report = convergence_report(&result, &exact).unwrap();
        assert_eq!(report.per_step.len(), 6);
        assert!(report.max <= 0.02, "max trace distance {}", report.max);
        // averaged states satisfy the state invariants
        for avg in result.per_step_average.as_ref().unwrap() {
            assert!((avg.trace() - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn error_shrinks_like_inverse_sqrt_m() {
        let g = benchmark_graph();
        let rho0 = DensityMatrix::basis_state(2, 0).unwrap();
        let exact = KrausChannel::qsw_step(&g, std::f64::consts::FRAC_PI_4)
            .unwrap()
            .iterate(&rho0, 5)
            .unwrap();
        let err_at = |m: usize| {
            let result = run_ensemble(&g, &rho0, &config(m, 5, 404)).unwrap();
            convergence_report(&result, &exact).unwrap().mean
        };
        let small = err_at(1_000);
        let large = err_at(100_000);
        let ratio = small / large;
        assert!(
            (5.0..=20.0).contains(&ratio),
            "expected ~10x improvement, got {ratio}"
        );
    }

    #[test]
    fn results_do_not_depend_on_worker_count() {
        let g = benchmark_graph();
        let rho0 = random_density_matrix(2, &mut trajectory_rng(8, 0));
        let cfg = config(2_000, 3, 99);
        let run_with = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| run_ensemble(&g, &rho0, &cfg).unwrap())
        };
        let one = run_with(1);
        let four = run_with(4);
        assert_eq!(one.per_step_populations, four.per_step_populations);
        let a = one.per_step_average.unwrap();
        let b = four.per_step_average.unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.matrix(), y.matrix());
        }
    }

    #[test]
    fn mixed_initial_states_use_the_eigen_ensemble() {
        // rho0 = diag(0.3, 0.7) with no dynamics at all: populations stay put
        let g = QswGraph::builder(2).alpha(1.0).build().unwrap();
        let rho0 = DensityMatrix::new(crate::linalg::CMatrix::from_fn(2, 2, |i, j| {
            if i == j {
                num_complex::Complex64::new([0.3, 0.7][i], 0.0)
            } else {
                num_complex::Complex64::new(0.0, 0.0)
            }
        }))
        .unwrap();
        let result = run_ensemble(&g, &rho0, &config(60_000, 1, 2024)).unwrap();
        assert!((result.per_step_populations[0][0] - 0.3).abs() <= 0.01);
        assert!((result.per_step_populations[1][0] - 0.3).abs() <= 0.01);
    }

    #[test]
    fn populations_only_mode_skips_averages() {
        let g = benchmark_graph();
        let rho0 = DensityMatrix::basis_state(2, 0).unwrap();
        let mut cfg = config(100, 2, 1);
        cfg.record_mode = RecordMode::PopulationsOnly;
        let result = run_ensemble(&g, &rho0, &cfg).unwrap();
        assert!(result.per_step_average.is_none());
        assert_eq!(result.per_step_populations.len(), 3);
        let exact = KrausChannel::qsw_step(&g, cfg.dt)
            .unwrap()
            .iterate(&rho0, 2)
            .unwrap();
        assert!(matches!(
            convergence_report(&result, &exact),
            Err(Error::MissingDensityAverages)
        ));
    }

    #[test]
    fn report_echoes_configuration() {
        let g = benchmark_graph();
        let rho0 = DensityMatrix::basis_state(2, 0).unwrap();
        let cfg = config(64, 3, 77);
        let result = run_ensemble(&g, &rho0, &cfg).unwrap();
        assert_eq!(result.seed, 77);
        assert_eq!(result.trajectories_used, 64);
        let exact = KrausChannel::qsw_step(&g, cfg.dt)
            .unwrap()
            .iterate(&rho0, 3)
            .unwrap();
        let report = convergence_report(&result, &exact).unwrap();
        assert_eq!(report.per_step.len(), 4);
        // exact self-comparison is identically zero
        let self_report = convergence_report(
            &EnsembleResult {
                per_step_average: Some(exact.clone()),
                per_step_populations: exact.iter().map(|r| r.populations()).collect(),
                trajectories_used: 1,
                seed: 0,
            },
            &exact,
        )
        .unwrap();
        assert!(self_report.max <= 1e-14);
    }
}
