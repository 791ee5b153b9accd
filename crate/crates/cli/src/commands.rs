//! The five subcommands. Every command is deterministic given its config
//! file; parallelism (capped by `--threads`) never changes results.

use std::fs;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use qsw_core::channel::KrausChannel;
use qsw_core::ctreduce::{exact_lindblad_propagate, reduce_to_discrete, uniform_rate};
use qsw_core::ensemble::{convergence_report, run_ensemble, EnsembleConfig, RecordMode};
use qsw_core::graph::DensityMatrix;
use qsw_core::linalg::min_eigenvalue;
use qsw_core::protocol::{
    ancilla_block_max_abs, embed_density, enumerate_step_channel, vertex_block,
};
use qsw_core::random::random_density_matrix;

use crate::config::{load_config, CliError, CliResult, LoadedConfig, Mode};
use crate::output::{write_json, write_populations_csv};
use crate::CommonArgs;

pub fn run(mode: Mode, args: &CommonArgs) -> CliResult<()> {
    let loaded = load_config(&args.config, mode)?;
    let dispatch = || match mode {
        Mode::Validate => cmd_validate(&loaded),
        Mode::Exact => cmd_exact(&loaded, args),
        Mode::Sample => cmd_sample(&loaded, args),
        Mode::Enumerate => cmd_enumerate(&loaded, args),
        Mode::CtReduce => cmd_ct_reduce(&loaded, args),
    };
    match args.threads {
        None => dispatch(),
        Some(threads) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| CliError::Internal(format!("cannot build thread pool: {e}")))?;
            pool.install(dispatch)
        }
    }
}

fn ensure_output_dir(loaded: &LoadedConfig, args: &CommonArgs) -> CliResult<std::path::PathBuf> {
    let dir = loaded.output_dir(&args.output_dir);
    fs::create_dir_all(&dir)
        .map_err(|e| CliError::Internal(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn cmd_validate(loaded: &LoadedConfig) -> CliResult<()> {
    match (&loaded.config.graph, &loaded.config.lindblad) {
        (Some(_), None) => {
            // the loader validates against the file's own complex-coupling policy
            let graph = loaded.load_graph()?;
            println!(
                "graph ok: {} vertices, alpha = {}",
                graph.n_vertices(),
                graph.alpha()
            );
            Ok(())
        }
        (None, Some(_)) => {
            let spec = loaded.load_lindblad()?;
            let gamma = uniform_rate(&spec, 1e-9)?;
            println!(
                "lindblad spec ok: {} vertices, omega = {}, uniform rate gamma = {gamma}",
                spec.n_vertices(),
                spec.omega()
            );
            Ok(())
        }
        (Some(_), Some(_)) => Err(CliError::Input(
            "config must name exactly one of `graph` and `lindblad`; both are present".into(),
        )),
        (None, None) => Err(CliError::Input(
            "config must name a `graph` or a `lindblad` file to validate".into(),
        )),
    }
}

fn cmd_exact(loaded: &LoadedConfig, args: &CommonArgs) -> CliResult<()> {
    let graph = loaded.load_graph()?;
    let dt = loaded.require_dt()?;
    let steps = loaded.require_steps()?;
    let rho0 = loaded.initial_density(graph.n_vertices())?;
    let channel = KrausChannel::qsw_step(&graph, dt)?;
    let states = channel.iterate(&rho0, steps)?;

    let dir = ensure_output_dir(loaded, args)?;
    let populations: Vec<Vec<f64>> = states.iter().map(|s| s.populations()).collect();
    let csv = dir.join("populations.csv");
    write_populations_csv(&csv, &populations)?;
    let final_path = dir.join("final_state.json");
    write_json(&final_path, states.last().expect("non-empty"))?;
    println!(
        "exact: {} steps on {} vertices -> {}, {}",
        steps,
        graph.n_vertices(),
        csv.display(),
        final_path.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct ConvergenceFile {
    max_trace_distance: f64,
    mean_trace_distance: f64,
    sqrt_m_coefficient: f64,
    per_step: Vec<f64>,
    seed: u64,
    trajectories: usize,
}

fn cmd_sample(loaded: &LoadedConfig, args: &CommonArgs) -> CliResult<()> {
    let graph = loaded.load_graph()?;
    let dt = loaded.require_dt()?;
    let steps = loaded.require_steps()?;
    let trajectories = loaded.require_trajectories()?;
    let seed = loaded.require_seed()?;
    let rho0 = loaded.initial_density(graph.n_vertices())?;

    let cfg = EnsembleConfig {
        n_trajectories: trajectories,
        n_steps: steps,
        dt,
        master_seed: seed,
        record_mode: RecordMode::FullDensityMatrix,
    };
    let result = run_ensemble(&graph, &rho0, &cfg)?;
    // companion exact run for the convergence report
    let exact = KrausChannel::qsw_step(&graph, dt)?.iterate(&rho0, steps)?;
    let report = convergence_report(&result, &exact)?;

    let dir = ensure_output_dir(loaded, args)?;
    let csv = dir.join("ensemble_populations.csv");
    write_populations_csv(&csv, &result.per_step_populations)?;
    let report_path = dir.join("convergence_report.json");
    write_json(
        &report_path,
        &ConvergenceFile {
            max_trace_distance: report.max,
            mean_trace_distance: report.mean,
            sqrt_m_coefficient: report.sqrt_m_coefficient,
            per_step: report.per_step,
            seed,
            trajectories,
        },
    )?;
    println!(
        "sample: {trajectories} trajectories, {steps} steps, max trace distance {:.3e} -> {}, {}",
        report.max,
        csv.display(),
        report_path.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct EnumerationFile {
    vertex_block_max_trace_distance: f64,
    ancilla_block_max_magnitude: f64,
    exact_completeness_defect: f64,
    enumerated_completeness_defect: f64,
    choi_min_eigenvalue: f64,
    states_tested: usize,
    seed: u64,
}

fn cmd_enumerate(loaded: &LoadedConfig, args: &CommonArgs) -> CliResult<()> {
    let graph = loaded.load_graph()?;
    let dt = loaded.require_dt()?;
    let seed = loaded.seed_or_default();
    let n = graph.n_vertices();

    let exact = KrausChannel::qsw_step(&graph, dt)?;
    let enumerated = enumerate_step_channel(&graph, dt)?;

    let mut states: Vec<DensityMatrix> = (0..n)
        .map(|v| DensityMatrix::basis_state(n, v))
        .collect::<Result<_, _>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..20 {
        states.push(random_density_matrix(n, &mut rng));
    }

    let mut max_distance = 0.0f64;
    let mut max_ancilla = 0.0f64;
    for rho in &states {
        let out = enumerated.apply_matrix(embed_density(rho).matrix())?;
        let expected = exact.apply(rho)?;
        let vb = vertex_block(&out, n)?;
        max_distance = max_distance.max(qsw_core::linalg::trace_distance(&vb, expected.matrix())?);
        max_ancilla = max_ancilla.max(ancilla_block_max_abs(&out, n)?);
    }

    let report = EnumerationFile {
        vertex_block_max_trace_distance: max_distance,
        ancilla_block_max_magnitude: max_ancilla,
        exact_completeness_defect: exact.completeness_defect(),
        enumerated_completeness_defect: enumerated.completeness_defect(),
        choi_min_eigenvalue: min_eigenvalue(&exact.choi_matrix())?,
        states_tested: states.len(),
        seed,
    };
    let dir = ensure_output_dir(loaded, args)?;
    let path = dir.join("enumeration_report.json");
    write_json(&path, &report)?;
    println!(
        "enumerate: vertex-block defect {:.3e}, ancilla magnitude {:.3e} -> {}",
        report.vertex_block_max_trace_distance,
        report.ancilla_block_max_magnitude,
        path.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct ScalingRow {
    scale: f64,
    dt: f64,
    trace_distance: f64,
}

#[derive(Serialize)]
struct ReductionFile {
    gamma: f64,
    dt: f64,
    alpha: f64,
    error_table: Vec<ScalingRow>,
    log_log_slope: f64,
}

fn cmd_ct_reduce(loaded: &LoadedConfig, args: &CommonArgs) -> CliResult<()> {
    let spec = loaded.load_lindblad()?;
    let gamma = uniform_rate(&spec, 1e-9)?;
    let reduction = reduce_to_discrete(&spec)?;

    // test state for the error table: configured initial state, else |1>
    let n = spec.n_vertices();
    let rho = if loaded.config.initial_state.is_some() {
        loaded.initial_density(n)?
    } else {
        DensityMatrix::basis_state(n, 0)?
    };

    let mut table = Vec::new();
    for &scale in &[1.0f64, 2.0, 4.0, 8.0] {
        let scaled = spec.with_scaled_rates(scale)?;
        let red = reduce_to_discrete(&scaled)?;
        let discrete = KrausChannel::qsw_step(&red.graph, red.dt)?.apply(&rho)?;
        let exact = exact_lindblad_propagate(&scaled, &rho, red.dt)?;
        table.push(ScalingRow {
            scale,
            dt: red.dt,
            trace_distance: discrete.trace_distance(&exact)?,
        });
    }
    let slope = log_log_slope(
        &table.iter().map(|r| r.dt).collect::<Vec<_>>(),
        &table.iter().map(|r| r.trace_distance).collect::<Vec<_>>(),
    );

    let dir = ensure_output_dir(loaded, args)?;
    let graph_path = dir.join("reduced_graph.json");
    write_json(&graph_path, &reduction.graph)?;
    let report_path = dir.join("reduction_report.json");
    write_json(
        &report_path,
        &ReductionFile {
            gamma,
            dt: reduction.dt,
            alpha: reduction.graph.alpha(),
            error_table: table,
            log_log_slope: slope,
        },
    )?;
    println!(
        "ct-reduce: gamma = {gamma}, dt = {}, alpha = {} -> {}, {}",
        reduction.dt,
        reduction.graph.alpha(),
        graph_path.display(),
        report_path.display()
    );
    Ok(())
}

fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    cov / var
}
