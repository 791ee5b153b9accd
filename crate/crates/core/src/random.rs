//! Seeded generation of random graphs, states and specs, plus categorical
//! sampling. Used by the verification suites and handy for benchmarks.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::ctreduce::LindbladSpec;
use crate::graph::{DensityMatrix, QswGraph};
use crate::linalg::{CMatrix, CVector, StateVector};

/// Draws an index with probability proportional to its non-negative weight.
/// Returns `None` when no weight is positive. If accumulated rounding pushes
/// the draw past the last bin, the largest-weight index is returned.
pub fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Option<usize> {
    let total: f64 = weights.iter().filter(|w| **w > 0.0).sum();
    if !(total > 0.0) {
        return None;
    }
    let draw = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (k, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        if draw < acc {
            return Some(k);
        }
    }
    weights
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| k)
}

/// Random Hermitian matrix with entries of order one.
pub fn random_hermitian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let raw = CMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    (&raw + raw.adjoint()).scale(0.5)
}

/// Random normalized pure state.
pub fn random_pure_state<R: Rng + ?Sized>(n: usize, rng: &mut R) -> StateVector {
    loop {
        let v = CVector::from_fn(n, |_, _| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        if v.norm_squared() > 1e-6 {
            return StateVector::new(v).expect("positive norm").normalized();
        }
    }
}

/// Random full-rank density matrix `G G' / Tr[G G']`.
pub fn random_density_matrix<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DensityMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    let psd = &g * g.adjoint();
    let trace = psd.trace().re;
    DensityMatrix::from_matrix_unchecked(psd.scale(1.0 / trace))
}

/// Random valid graph with `alpha` drawn uniformly from `(0.05, 0.95)`.
pub fn random_valid_graph<R: Rng + ?Sized>(n: usize, rng: &mut R) -> QswGraph {
    let alpha = 0.05 + 0.9 * rng.random::<f64>();
    random_valid_graph_with_alpha(n, alpha, rng)
}

/// Random valid graph at a fixed `alpha`: sparse real symmetric couplings and
/// incoherent rows normalized to `1 - alpha`.
pub fn random_valid_graph_with_alpha<R: Rng + ?Sized>(
    n: usize,
    alpha: f64,
    rng: &mut R,
) -> QswGraph {
    let mut coherent = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < 0.8 {
                let g = Complex64::new(rng.random::<f64>() * 2.0 - 1.0, 0.0);
                coherent[(i, j)] = g;
                coherent[(j, i)] = g;
            }
        }
    }
    let mut kappa = DMatrix::zeros(n, n);
    let weight = 1.0 - alpha;
    if weight > 0.0 {
        for i in 0..n {
            let mut row: Vec<f64> = (0..n)
                .map(|_| {
                    if rng.random::<f64>() < 0.7 {
                        0.1 + 0.9 * rng.random::<f64>()
                    } else {
                        0.0
                    }
                })
                .collect();
            let mut sum: f64 = row.iter().sum();
            if sum == 0.0 {
                let j = rng.random_range(0..n);
                row[j] = 1.0;
                sum = 1.0;
            }
            for (j, w) in row.iter().enumerate() {
                kappa[(i, j)] = w / sum * weight;
            }
        }
    }
    let graph = QswGraph::from_matrices(alpha, coherent, kappa).expect("consistent shapes");
    graph.require_valid().expect("constructed valid");
    graph
}

/// Random Lindblad spec whose rate rows all sum to exactly `gamma`.
pub fn random_uniform_lindblad<R: Rng + ?Sized>(
    n: usize,
    gamma: f64,
    omega: f64,
    rng: &mut R,
) -> LindbladSpec {
    let hamiltonian = random_hermitian(n, rng);
    let mut rates = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut row: Vec<f64> = (0..n)
            .map(|j| {
                if j == i {
                    0.0
                } else {
                    0.2 + rng.random::<f64>()
                }
            })
            .collect();
        let sum: f64 = row.iter().sum();
        for w in row.iter_mut() {
            *w *= gamma / sum;
        }
        for (j, w) in row.iter().enumerate() {
            rates[(i, j)] = *w;
        }
    }
    LindbladSpec::new(hamiltonian, rates, omega).expect("constructed valid")
}
