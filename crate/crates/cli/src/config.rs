//! Experiment configuration: one JSON file describing the input system,
//! initial state, step parameters and seed.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Deserialize;

use qsw_core::ctreduce::LindbladSpec;
use qsw_core::graph::{DensityMatrix, QswGraph};
use qsw_core::linalg::{CVector, StateVector};
use qsw_core::Error as CoreError;

/// Run failure with the exit code it maps to: 2 for invalid input or
/// validation failures, 1 for internal errors.
#[derive(Debug)]
pub enum CliError {
    Input(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Internal(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(msg) | CliError::Internal(msg) => write!(f, "{msg}"),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(err: CoreError) -> Self {
        match err {
            CoreError::NoSamplingSupport
            | CoreError::DegenerateState { .. }
            | CoreError::AncillaeNotEmpty { .. }
            | CoreError::NoFeedForwardTargets { .. }
            | CoreError::MissingDensityAverages => CliError::Internal(err.to_string()),
            _ => CliError::Input(err.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Internal(err.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Validate,
    Exact,
    Sample,
    Enumerate,
    CtReduce,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Mode::Validate => "validate",
            Mode::Exact => "exact",
            Mode::Sample => "sample",
            Mode::Enumerate => "enumerate",
            Mode::CtReduce => "ct-reduce",
        };
        write!(f, "{name}")
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Optional mode declaration; must match the invoked subcommand.
    #[serde(default)]
    pub mode: Option<Mode>,
    /// Path to a graph JSON file (exact/sample/enumerate/validate).
    #[serde(default)]
    pub graph: Option<PathBuf>,
    /// Path to a Lindblad JSON file (ct-reduce/validate).
    #[serde(default)]
    pub lindblad: Option<PathBuf>,
    #[serde(default)]
    pub initial_state: Option<InitialState>,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub steps: Option<usize>,
    #[serde(default)]
    pub trajectories: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum InitialState {
    /// Start in a vertex basis state (1-based).
    Vertex { vertex: usize },
    /// Explicit amplitude list over the vertices; normalized on load.
    Amplitudes { amplitudes: Vec<ComplexEntry> },
    /// Path to a density-matrix JSON file.
    DensityFile { density_matrix: PathBuf },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexEntry {
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

/// Loaded configuration plus the directory its relative paths resolve from.
pub struct LoadedConfig {
    pub config: RunConfig,
    pub base_dir: PathBuf,
}

pub fn load_config(path: &Path, invoked: Mode) -> CliResult<LoadedConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
    let config: RunConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("invalid config {}: {e}", path.display())))?;
    if let Some(declared) = config.mode {
        if declared != invoked {
            return Err(CliError::Input(format!(
                "config declares mode `{declared}` but `{invoked}` was invoked"
            )));
        }
    }
    let base_dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    Ok(LoadedConfig { config, base_dir })
}

impl LoadedConfig {
    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn graph_path(&self) -> CliResult<PathBuf> {
        match (&self.config.graph, &self.config.lindblad) {
            (Some(g), None) => Ok(self.resolve(g)),
            (Some(_), Some(_)) => Err(CliError::Input(
                "config must name exactly one of `graph` and `lindblad`; both are present".into(),
            )),
            _ => Err(CliError::Input(
                "this mode requires a `graph` file in the config".into(),
            )),
        }
    }

    pub fn lindblad_path(&self) -> CliResult<PathBuf> {
        match (&self.config.graph, &self.config.lindblad) {
            (None, Some(l)) => Ok(self.resolve(l)),
            (Some(_), Some(_)) => Err(CliError::Input(
                "config must name exactly one of `graph` and `lindblad`; both are present".into(),
            )),
            _ => Err(CliError::Input(
                "this mode requires a `lindblad` file in the config".into(),
            )),
        }
    }

    pub fn load_graph(&self) -> CliResult<QswGraph> {
        let path = self.graph_path()?;
        load_json(&path)
    }

    pub fn load_lindblad(&self) -> CliResult<LindbladSpec> {
        let path = self.lindblad_path()?;
        load_json(&path)
    }

    /// Resolves the configured initial state to a density matrix on `n` vertices.
    pub fn initial_density(&self, n: usize) -> CliResult<DensityMatrix> {
        let state = self.config.initial_state.as_ref().ok_or_else(|| {
            CliError::Input("this mode requires `initial_state` in the config".into())
        })?;
        match state {
            InitialState::Vertex { vertex } => {
                if !(1..=n).contains(vertex) {
                    return Err(CoreError::VertexOutOfRange { index: *vertex, n }.into());
                }
                Ok(DensityMatrix::basis_state(n, vertex - 1)?)
            }
            InitialState::Amplitudes { amplitudes } => {
                if amplitudes.len() != n {
                    return Err(CliError::Input(format!(
                        "initial_state lists {} amplitudes for {n} vertices",
                        amplitudes.len()
                    )));
                }
                let v = CVector::from_iterator(
                    n,
                    amplitudes.iter().map(|c| Complex64::new(c.re, c.im)),
                );
                let psi = StateVector::new(v)?.normalized();
                Ok(DensityMatrix::pure(&psi)?)
            }
            InitialState::DensityFile { density_matrix } => {
                let rho: DensityMatrix = load_json(&self.resolve(density_matrix))?;
                if rho.dim() != n {
                    return Err(CoreError::DimensionMismatch {
                        expected: n,
                        got: rho.dim(),
                    }
                    .into());
                }
                Ok(rho)
            }
        }
    }

    pub fn require_dt(&self) -> CliResult<f64> {
        self.config
            .dt
            .ok_or_else(|| CliError::Input("this mode requires `dt` in the config".into()))
    }

    pub fn require_steps(&self) -> CliResult<usize> {
        self.config
            .steps
            .ok_or_else(|| CliError::Input("this mode requires `steps` in the config".into()))
    }

    pub fn require_trajectories(&self) -> CliResult<usize> {
        self.config.trajectories.ok_or_else(|| {
            CliError::Input("this mode requires `trajectories` in the config".into())
        })
    }

    pub fn require_seed(&self) -> CliResult<u64> {
        self.config
            .seed
            .ok_or_else(|| CliError::Input("this mode requires `seed` in the config".into()))
    }

    /// Seed with a default of zero, for modes where it only picks test states.
    pub fn seed_or_default(&self) -> u64 {
        self.config.seed.unwrap_or(0)
    }

    pub fn output_dir(&self, flag: &Option<PathBuf>) -> PathBuf {
        flag.clone()
            .or_else(|| self.config.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("."))
    }
}

fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}
