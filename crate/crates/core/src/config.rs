//! Experiment configuration for the command-line front end: operator
//! presets, initial states, norm and integrator settings, all seeded for
//! reproducible runs.

use crate::dynamics::{DynamicsError, HartreeState, KroneckerSumOperator};
use crate::projection::SolveOptions;
use crate::tensor::{AmbientNorm, DenseTensor, ModeNorm, Shape, TensorError};
use crate::tucker::{hosvd_truncate, Rank, TuckerError, TuckerTensor};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("malformed config file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Tucker(#[from] TuckerError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub problem: ProblemSpec,
    pub shape: Vec<usize>,
    pub rank: Vec<usize>,
    #[serde(default)]
    pub norm: NormSpec,
    pub integrator: IntegratorSpec,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub initial: Option<InitialSpec>,
}

fn default_seed() -> u64 {
    0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "kebab-case", untagged)]
pub enum ProblemSpec {
    Preset(String),
    File { file: String },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormSpec {
    #[serde(default = "default_p")]
    pub p: f64,
    /// Optional per-mode weight vectors; unit weights when omitted.
    #[serde(default)]
    pub weights: Option<Vec<Vec<f64>>>,
}

fn default_p() -> f64 {
    2.0
}

impl Default for NormSpec {
    fn default() -> Self {
        NormSpec {
            p: 2.0,
            weights: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSpec {
    pub t_final: f64,
    pub dt: f64,
    #[serde(default = "default_projector")]
    pub projector: String,
    /// "hartree" (rank (1,...,1) state integrator) or "dlra".
    #[serde(default = "default_mode")]
    pub mode: String,
    /// Run the full-space reference alongside and record ambient errors.
    #[serde(default)]
    pub reference: bool,
    #[serde(default = "default_solver_tol")]
    pub solver_tol: f64,
    #[serde(default = "default_solver_iters")]
    pub solver_max_iter: usize,
}

fn default_projector() -> String {
    "hilbert".into()
}

fn default_mode() -> String {
    "dlra".into()
}

fn default_solver_tol() -> f64 {
    1e-8
}

fn default_solver_iters() -> usize {
    20_000
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_csv")]
    pub csv: String,
    #[serde(default)]
    pub states_json: Option<String>,
}

fn default_csv() -> String {
    "trajectory.csv".into()
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            csv: default_csv(),
            states_json: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum InitialSpec {
    /// Elementary tensor of seeded random unit factors.
    RandomRankOne,
    /// Seeded random dense tensor, truncated to the configured rank.
    RandomDense,
}

impl ExperimentConfig {
    pub fn from_file(path: &str) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_str(&text)
    }

    pub fn from_str(text: &str) -> Result<Self, ConfigError> {
        let config: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| ConfigError::Format(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Seed after the TDF_SEED environment override.
    pub fn effective_seed(&self) -> u64 {
        match std::env::var("TDF_SEED") {
            Ok(s) => s.parse::<u64>().unwrap_or(self.seed),
            Err(_) => self.seed,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let shape = Shape::new(self.shape.clone())
            .map_err(|e| ConfigError::Invalid(format!("shape: {e}")))?;
        Rank::new(self.rank.clone(), &shape)
            .map_err(|e| ConfigError::Invalid(format!("rank: {e}")))?;
        if !(self.norm.p > 1.0) || !self.norm.p.is_finite() {
            return Err(ConfigError::Invalid(format!(
                "norm exponent must satisfy 1 < p < inf, got {}",
                self.norm.p
            )));
        }
        if !(self.integrator.dt > 0.0) || !(self.integrator.t_final > 0.0) {
            return Err(ConfigError::Invalid(format!(
                "integrator needs positive dt and t_final, got {} and {}",
                self.integrator.dt, self.integrator.t_final
            )));
        }
        match self.integrator.mode.as_str() {
            "hartree" => {
                if self.rank.iter().any(|&r| r != 1) {
                    return Err(ConfigError::Invalid(
                        "hartree mode requires rank (1,...,1)".into(),
                    ));
                }
            }
            "dlra" => {}
            other => {
                return Err(ConfigError::Invalid(format!(
                    "unknown integrator mode {other:?} (use \"hartree\" or \"dlra\")"
                )))
            }
        }
        match self.integrator.projector.as_str() {
            "hilbert" | "metric" | "generalized" => {}
            other => {
                return Err(ConfigError::Invalid(format!(
                    "unknown projector {other:?} (use hilbert, metric or generalized)"
                )))
            }
        }
        if let ProblemSpec::Preset(name) = &self.problem {
            match name.as_str() {
                "identity" | "kronecker-laplacian" | "random-symmetric" => {}
                other => {
                    return Err(ConfigError::Invalid(format!(
                        "unknown problem preset {other:?}"
                    )))
                }
            }
        }
        Ok(())
    }

    pub fn shape(&self) -> Shape {
        Shape::new(self.shape.clone()).expect("validated")
    }

    pub fn ambient_norm(&self) -> Result<AmbientNorm, ConfigError> {
        let shape = self.shape();
        match &self.norm.weights {
            None => Ok(AmbientNorm::uniform(self.norm.p, &shape)?),
            Some(weights) => {
                if weights.len() != shape.order() {
                    return Err(ConfigError::Invalid(format!(
                        "{} weight vectors for order {}",
                        weights.len(),
                        shape.order()
                    )));
                }
                let mode_norms = weights
                    .iter()
                    .map(|w| ModeNorm::new(self.norm.p, w.clone()))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(AmbientNorm::new(mode_norms)?)
            }
        }
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            tol: self.integrator.solver_tol,
            max_iter: self.integrator.solver_max_iter,
        }
    }

    pub fn operator(&self) -> Result<KroneckerSumOperator, ConfigError> {
        match &self.problem {
            ProblemSpec::Preset(name) => {
                Ok(build_preset(name, &self.shape, self.effective_seed())?)
            }
            ProblemSpec::File { file } => Ok(crate::dynamics::read_operator(file)?),
        }
    }

    /// Seeded random unit factors for the Hartree integrator.
    pub fn hartree_initial(&self) -> Result<HartreeState, ConfigError> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.effective_seed());
        rng.set_stream(1);
        let factors = self
            .shape
            .iter()
            .map(|&n| random_unit_vector(n, &mut rng))
            .collect();
        Ok(HartreeState::new(1.0, factors)?)
    }

    /// Dense initial value for the reference and the rank truncation.
    pub fn dense_initial(&self) -> Result<DenseTensor, ConfigError> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.effective_seed());
        rng.set_stream(2);
        let shape = self.shape();
        let kind = self.initial.clone().unwrap_or({
            if self.integrator.mode == "hartree" {
                InitialSpec::RandomRankOne
            } else {
                InitialSpec::RandomDense
            }
        });
        match kind {
            InitialSpec::RandomRankOne => {
                let state = self.hartree_initial()?;
                Ok(state.to_dense()?)
            }
            InitialSpec::RandomDense => {
                let data = (0..shape.volume())
                    .map(|_| rng.gen_range(-1.0..1.0))
                    .collect();
                Ok(DenseTensor::new(shape, data)?)
            }
        }
    }

    /// Reduced initial value: the rank-r higher-order SVD truncation of the
    /// dense initial value.
    pub fn tucker_initial(&self) -> Result<TuckerTensor, ConfigError> {
        let u0 = self.dense_initial()?;
        let rank = Rank::new(self.rank.clone(), &self.shape()).expect("validated");
        let (v0, _) = hosvd_truncate(&u0, &rank)?;
        Ok(v0)
    }
}

fn random_unit_vector(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        if v.norm() > 1e-3 {
            return v.normalize();
        }
    }
}

/// One-dimensional Dirichlet Laplacian stencil (1, -2, 1).
fn laplacian_1d(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            -2.0
        } else if i.abs_diff(j) == 1 {
            1.0
        } else {
            0.0
        }
    })
}

pub fn build_preset(
    name: &str,
    dims: &[usize],
    seed: u64,
) -> Result<KroneckerSumOperator, DynamicsError> {
    match name {
        "identity" => KroneckerSumOperator::identity(dims),
        "kronecker-laplacian" => {
            KroneckerSumOperator::kronecker_sum(dims.iter().map(|&n| laplacian_1d(n)).collect())
        }
        "random-symmetric" => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(3);
            let mats = dims
                .iter()
                .map(|&n| {
                    let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
                    (&m + m.transpose()) * 0.5
                })
                .collect();
            KroneckerSumOperator::kronecker_sum(mats)
        }
        other => Err(DynamicsError::Format(format!("unknown preset {other:?}"))),
    }
}
