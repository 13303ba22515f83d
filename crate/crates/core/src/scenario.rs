//! Declarative scenario files (TOML).
//!
//! ```toml
//! id = "dragging"
//! dim = 2
//! horizon = 1.0
//! initial_state = "top-eigenvector-of-E0"   # or [[re, im], ...]
//!
//! [hamiltonian]
//! kind = "constant"                          # constant | linear_combination | sampled
//! matrix = [[[0.0, 0.0], [1.0, 0.0]],
//!           [[1.0, 0.0], [0.0, 0.0]]]        # rows of [re, im] pairs
//!
//! [base_projector]
//! preset = "diagonal"                        # or: matrix = [...]
//! rank = 1
//!
//! [frame_generator]                          # optional; absent means constant E
//! kind = "linear_combination"
//! [[frame_generator.terms]]
//! matrix = [[[0.0, 0.0], [0.0, -1.0]], [[0.0, 1.0], [0.0, 0.0]]]
//! waveform = { kind = "const", value = 1.5707963267948966 }
//!
//! [gauge_generator]                          # optional; must commute with E
//! kind = "constant"
//! matrix = [[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.0, 0.0]]]
//!
//! [integrator]
//! n_steps = 1000                             # default: 1000 per unit time
//!
//! [stroboscopic]
//! n_list = [25, 50, 100, 200]
//! micro_substeps = 10
//! seeds = [1, 2, 3]
//! ```
//!
//! Sampled paths list `[[hamiltonian.samples]]` tables with `t` and
//! `matrix`. Waveforms are `const {value}`, `sin {omega, phase}`,
//! `cos {omega, phase}` and `poly {coefficients}`.

use std::path::Path;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{default_steps, INITIAL_CONDITION_TOL};
use crate::hamiltonian::{HamiltonianPath, Waveform};
use crate::linalg::{Operator, Projector, StateVector, C64, NORM_TOL};
use crate::projector_path::{ProjectorPath, UnitaryGeneratorPath};
use crate::stroboscopic::DEFAULT_MICRO_SUBSTEPS;

/// Rows of `[re, im]` pairs.
pub type MatrixSpec = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: &str, message: impl ToString) -> ScenarioError {
    ScenarioError::Invalid { field: field.to_string(), message: message.to_string() }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub id: String,
    pub dim: usize,
    pub horizon: f64,
    #[serde(default)]
    pub initial_state: InitialState,
    pub hamiltonian: PathSpec,
    pub base_projector: ProjectorSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_generator: Option<PathSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gauge_generator: Option<PathSpec>,
    #[serde(default)]
    pub integrator: IntegratorSpec,
    #[serde(default)]
    pub stroboscopic: StroboscopicSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PathSpec {
    Constant { matrix: MatrixSpec },
    LinearCombination { terms: Vec<TermSpec> },
    Sampled { samples: Vec<SampleSpec> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub matrix: MatrixSpec,
    pub waveform: Waveform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSpec {
    pub t: f64,
    pub matrix: MatrixSpec,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectorPreset {
    /// Projector onto the first `rank` basis vectors.
    Diagonal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProjectorSpec {
    Preset { preset: ProjectorPreset, rank: usize },
    Matrix { matrix: MatrixSpec },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitialStateRule {
    #[serde(rename = "top-eigenvector-of-E0")]
    TopEigenvector,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialState {
    Rule(InitialStateRule),
    Explicit(Vec<[f64; 2]>),
}

impl Default for InitialState {
    fn default() -> Self {
        InitialState::Rule(InitialStateRule::TopEigenvector)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_steps: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StroboscopicSpec {
    #[serde(default = "default_n_list")]
    pub n_list: Vec<usize>,
    #[serde(default = "default_micro_substeps")]
    pub micro_substeps: usize,
    #[serde(default)]
    pub seeds: Vec<u64>,
}

fn default_n_list() -> Vec<usize> {
    vec![25, 50, 100, 200]
}

fn default_micro_substeps() -> usize {
    DEFAULT_MICRO_SUBSTEPS
}

impl Default for StroboscopicSpec {
    fn default() -> Self {
        Self { n_list: default_n_list(), micro_substeps: DEFAULT_MICRO_SUBSTEPS, seeds: Vec::new() }
    }
}

/// A validated scenario with its paths and initial state built.
#[derive(Clone, Debug)]
pub struct Model {
    pub scenario: Scenario,
    pub hamiltonian: HamiltonianPath,
    pub projector_path: ProjectorPath,
    pub initial_state: StateVector,
    pub gauge: UnitaryGeneratorPath,
    /// True when the gauge generator was given in the scenario.
    pub explicit_gauge: bool,
    pub n_steps: usize,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes to TOML")
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ScenarioError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::from_toml(&text)
    }

    pub fn build(&self) -> Result<Model, ScenarioError> {
        if self.id.trim().is_empty() {
            return Err(invalid("id", "must not be empty"));
        }
        if self.dim == 0 {
            return Err(invalid("dim", "must be positive"));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(invalid("horizon", format!("must be positive and finite, got {}", self.horizon)));
        }
        let hamiltonian = build_path(&self.hamiltonian, self.dim, self.horizon, "hamiltonian")?;
        let base = match &self.base_projector {
            ProjectorSpec::Preset { preset: ProjectorPreset::Diagonal, rank } => {
                Projector::diagonal(self.dim, *rank).map_err(|e| invalid("base_projector.rank", e))?
            }
            ProjectorSpec::Matrix { matrix } => {
                let op = build_matrix(matrix, self.dim, "base_projector.matrix")?;
                Projector::new(op).map_err(|e| invalid("base_projector.matrix", e))?
            }
        };
        if base.rank() == 0 {
            return Err(invalid("base_projector", "rank must be positive"));
        }
        let frame = match &self.frame_generator {
            Some(spec) => UnitaryGeneratorPath::new(build_path(spec, self.dim, self.horizon, "frame_generator")?),
            None => UnitaryGeneratorPath::zero(self.dim, self.horizon).map_err(|e| invalid("frame_generator", e))?,
        };
        let (gauge, explicit_gauge) = match &self.gauge_generator {
            Some(spec) => {
                (UnitaryGeneratorPath::new(build_path(spec, self.dim, self.horizon, "gauge_generator")?), true)
            }
            None => (default_gauge(&base, self.horizon).map_err(|e| invalid("gauge_generator", e))?, false),
        };
        let projector_path = ProjectorPath::new(base.clone(), frame).map_err(|e| invalid("frame_generator", e))?;
        let initial_state = match &self.initial_state {
            InitialState::Rule(InitialStateRule::TopEigenvector) => {
                base.reference_state().map_err(|e| invalid("initial_state", e))?
            }
            InitialState::Explicit(amps) => {
                if amps.len() != self.dim {
                    return Err(invalid(
                        "initial_state",
                        format!("expected {} amplitudes, found {}", self.dim, amps.len()),
                    ));
                }
                let v = DVector::from_iterator(self.dim, amps.iter().map(|[re, im]| C64::new(*re, *im)));
                StateVector::new(v).map_err(|e| invalid("initial_state", format!("{e} (tolerance {NORM_TOL:e})")))?
            }
        };
        let residual = base.confinement_residual(&initial_state);
        if residual > INITIAL_CONDITION_TOL {
            return Err(invalid(
                "initial_state",
                format!("not in the range of E0: |E0 psi0 - psi0| = {residual:e} > {INITIAL_CONDITION_TOL:e}"),
            ));
        }
        let n_steps = self.integrator.n_steps.unwrap_or_else(|| default_steps(self.horizon));
        if n_steps == 0 {
            return Err(invalid("integrator.n_steps", "must be at least 1"));
        }
        let strobo = &self.stroboscopic;
        if strobo.n_list.is_empty() || strobo.n_list.contains(&0) {
            return Err(invalid("stroboscopic.n_list", "must be a non-empty list of positive counts"));
        }
        if strobo.n_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("stroboscopic.n_list", "must be strictly increasing"));
        }
        if strobo.micro_substeps == 0 {
            return Err(invalid("stroboscopic.micro_substeps", "must be at least 1"));
        }
        Ok(Model { scenario: self.clone(), hamiltonian, projector_path, initial_state, gauge, explicit_gauge, n_steps })
    }
}

/// `cos(t) E + 0.5 (I - E)`: phases inside the range of `E` and its complement.
pub fn default_gauge(base: &Projector, horizon: f64) -> crate::Result<UnitaryGeneratorPath> {
    let path = HamiltonianPath::linear_combination(
        vec![(base.op().clone(), Waveform::cos()), (base.complement().op().clone(), Waveform::Const { value: 0.5 })],
        horizon,
    )?;
    Ok(UnitaryGeneratorPath::new(path))
}

fn build_matrix(spec: &MatrixSpec, dim: usize, field: &str) -> Result<Operator, ScenarioError> {
    if spec.len() != dim {
        return Err(invalid(field, format!("expected {dim} rows, found {}", spec.len())));
    }
    let mut rows = Vec::with_capacity(dim);
    for (i, row) in spec.iter().enumerate() {
        if row.len() != dim {
            return Err(invalid(field, format!("row {i} has {} entries, expected {dim}", row.len())));
        }
        rows.push(row.iter().map(|[re, im]| C64::new(*re, *im)).collect::<Vec<_>>());
    }
    Operator::from_rows(&rows).map_err(|e| invalid(field, e))
}

fn build_path(spec: &PathSpec, dim: usize, horizon: f64, field: &str) -> Result<HamiltonianPath, ScenarioError> {
    match spec {
        PathSpec::Constant { matrix } => {
            let op = build_matrix(matrix, dim, &format!("{field}.matrix"))?;
            HamiltonianPath::constant(op, horizon).map_err(|e| invalid(&format!("{field}.matrix"), e))
        }
        PathSpec::LinearCombination { terms } => {
            let mut built = Vec::with_capacity(terms.len());
            for (k, term) in terms.iter().enumerate() {
                let name = format!("{field}.terms[{k}]");
                let op = build_matrix(&term.matrix, dim, &format!("{name}.matrix"))?;
                let residual = op.hermiticity_residual();
                if residual > crate::linalg::HERMITIAN_TOL {
                    return Err(invalid(&format!("{name}.matrix"), format!("not Hermitian (residual {residual:e})")));
                }
                built.push((op, term.waveform.clone()));
            }
            HamiltonianPath::linear_combination(built, horizon).map_err(|e| invalid(field, e))
        }
        PathSpec::Sampled { samples } => {
            let mut built = Vec::with_capacity(samples.len());
            for (k, s) in samples.iter().enumerate() {
                built.push((s.t, build_matrix(&s.matrix, dim, &format!("{field}.samples[{k}].matrix"))?));
            }
            HamiltonianPath::sampled(built, horizon).map_err(|e| invalid(&format!("{field}.samples"), e))
        }
    }
}

pub fn matrix_spec(op: &Operator) -> MatrixSpec {
    (0..op.dim()).map(|i| (0..op.dim()).map(|j| [op.get(i, j).re, op.get(i, j).im]).collect()).collect()
}

fn random_hermitian(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> Operator {
    let mut m = nalgebra::DMatrix::<C64>::zeros(dim, dim);
    for i in 0..dim {
        m[(i, i)] = C64::new(scale * rng.random_range(-1.0..1.0), 0.0);
        for j in i + 1..dim {
            let z = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale;
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    Operator::new(m).expect("finite entries")
}

/// Smooth random scenario: `H_t = H0 + cos(t) H1`, `A_t = A0 + sin(t) A1`,
/// diagonal rank-`rank` base projector and a random block-diagonal gauge.
pub fn random_smooth_scenario(id: &str, dim: usize, rank: usize, seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 0.5;
    let h0 = random_hermitian(&mut rng, dim, scale);
    let h1 = random_hermitian(&mut rng, dim, scale);
    let a0 = random_hermitian(&mut rng, dim, scale);
    let a1 = random_hermitian(&mut rng, dim, scale);
    let g = random_hermitian(&mut rng, dim, scale);
    // keep only the blocks inside range(E) and its complement
    let gauge = Operator::from_rows(
        &(0..dim)
            .map(|i| {
                (0..dim).map(|j| if (i < rank) == (j < rank) { g.get(i, j) } else { C64::new(0.0, 0.0) }).collect()
            })
            .collect::<Vec<_>>(),
    )
    .expect("finite entries");
    let combo = |a: &Operator, b: &Operator, w: Waveform| PathSpec::LinearCombination {
        terms: vec![
            TermSpec { matrix: matrix_spec(a), waveform: Waveform::Const { value: 1.0 } },
            TermSpec { matrix: matrix_spec(b), waveform: w },
        ],
    };
    Scenario {
        id: id.to_string(),
        dim,
        horizon: 1.0,
        initial_state: InitialState::default(),
        hamiltonian: combo(&h0, &h1, Waveform::cos()),
        base_projector: ProjectorSpec::Preset { preset: ProjectorPreset::Diagonal, rank },
        frame_generator: Some(combo(&a0, &a1, Waveform::sin())),
        gauge_generator: Some(PathSpec::Constant { matrix: matrix_spec(&gauge) }),
        integrator: IntegratorSpec { n_steps: Some(1000) },
        stroboscopic: StroboscopicSpec {
            n_list: default_n_list(),
            micro_substeps: DEFAULT_MICRO_SUBSTEPS,
            seeds: vec![seed],
        },
    }
}

/// Scenario files shipped with the crate.
pub mod bundled {
    pub const FROZEN: &str = include_str!("../scenarios/frozen.toml");
    pub const COMMUTING: &str = include_str!("../scenarios/commuting.toml");
    pub const DRAGGING: &str = include_str!("../scenarios/dragging.toml");
    pub const DRAGGING_WITH_H: &str = include_str!("../scenarios/dragging_with_h.toml");
    pub const RANDOM_D4_RANK2: &str = include_str!("../scenarios/random_d4_rank2.toml");

    /// Seed used to generate `random_d4_rank2.toml`.
    pub const RANDOM_SEED: u64 = 20_250_401;

    pub fn all() -> [(&'static str, &'static str); 5] {
        [
            ("frozen", FROZEN),
            ("commuting", COMMUTING),
            ("dragging", DRAGGING),
            ("dragging_with_h", DRAGGING_WITH_H),
            ("random_d4_rank2", RANDOM_D4_RANK2),
        ]
    }
}
