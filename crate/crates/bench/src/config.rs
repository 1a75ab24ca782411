//! Experiment configuration: a TOML file with one flat section per component.
//!
//! ```toml
//! [solver]
//! id = "stochastic"
//!
//! [problem]
//! id = "quad_box_interior"
//!
//! [oracle]
//! variance = 0.002
//!
//! [plan]
//! epsilon = 0.05
//! beta = 0.05
//! ```

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use mirror_triangles::problems::{self, SUITE};
use mirror_triangles::{DirectionKind, InexactMode, Perturbation, Problem, ProxSetup};

pub const SOLVERS: [&str; 6] = ["base", "minimax", "inexact", "stochastic", "directional", "zeroth_order"];
pub const PROXES: [&str; 4] = ["default", "euclidean", "entropy", "scaled_euclidean"];
pub const PERTURBATIONS: [&str; 3] = ["zero", "constant", "seeded_random"];
pub const SCHEMES: [&str; 2] = ["sphere", "coordinate"];
pub const MODES: [&str; 2] = ["fixed", "universal"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub solver: SolverSection,
    pub problem: ProblemSection,
    #[serde(default)]
    pub prox: ProxSection,
    #[serde(default)]
    pub oracle: OracleSection,
    #[serde(default)]
    pub plan: PlanSection,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub id: String,
    /// Lets the stochastic solver run outside the Euclidean setting.
    #[serde(default)]
    pub allow_unverified_prox: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProxSection {
    #[serde(default = "default_prox")]
    pub id: String,
}

impl Default for ProxSection {
    fn default() -> Self {
        Self { id: default_prox() }
    }
}

fn default_prox() -> String {
    "default".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    /// Oracle inexactness. For the directional solvers this is the
    /// directional (resp. function-value) noise bound; defaults to the
    /// largest admissible value there and to 0 elsewhere.
    pub delta: Option<f64>,
    #[serde(default = "default_perturbation")]
    pub perturbation: String,
    /// Variance proxy `D` of the stochastic gradient.
    #[serde(default)]
    pub variance: f64,
    #[serde(default = "default_scheme")]
    pub scheme: String,
}

impl Default for OracleSection {
    fn default() -> Self {
        Self {
            delta: None,
            perturbation: default_perturbation(),
            variance: 0.0,
            scheme: default_scheme(),
        }
    }
}

fn default_perturbation() -> String {
    "seeded_random".into()
}

fn default_scheme() -> String {
    "sphere".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct PlanSection {
    /// Iteration count `N` for base, minimax and inexact runs (also the cap of
    /// an accuracy-stopped base run).
    pub steps: Option<usize>,
    pub epsilon: Option<f64>,
    pub beta: Option<f64>,
    /// Starting constant of the backtracking solvers; defaults to `L`.
    pub l0: Option<f64>,
    /// Inexact exit-test mode.
    pub mode: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub seeds: Option<Vec<u64>>,
    pub out: Option<String>,
    pub format: Option<String>,
}

/// Machine-readable configuration failure (exit status 2).
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub code: &'static str,
    pub message: String,
}

impl ConfigError {
    pub fn new(code: &'static str, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl std::error::Error for ConfigError {}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::new("CONFIG_PARSE", e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("CONFIG_IO", format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Returns a copy with the dotted key (`section.field`) set to `value`,
    /// which is parsed as a TOML value (bare words are taken as strings).
    pub fn with_override(&self, key: &str, value: &str) -> Result<Self, ConfigError> {
        let mut tree = toml::Value::try_from(self)
            .map_err(|e| ConfigError::new("CONFIG_PARSE", e.to_string()))?;
        let parsed: toml::Value = toml::from_str::<toml::Table>(&format!("v = {value}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(value.to_string()));
        let (section, field) = key
            .split_once('.')
            .ok_or_else(|| ConfigError::new("CONFIG_PARSE", format!("override key `{key}` is not section.field")))?;
        let table = tree
            .as_table_mut()
            .expect("config serializes to a table")
            .entry(section)
            .or_insert_with(|| toml::Value::Table(Default::default()));
        let Some(table) = table.as_table_mut() else {
            return Err(ConfigError::new("CONFIG_PARSE", format!("`{section}` is not a section")));
        };
        table.insert(field.to_string(), parsed);
        tree.try_into()
            .map_err(|e: toml::de::Error| ConfigError::new("CONFIG_PARSE", e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverId {
    Base,
    Minimax,
    Inexact,
    Stochastic,
    Directional,
    ZerothOrder,
}

impl SolverId {
    pub fn parse(id: &str) -> Result<Self, ConfigError> {
        Ok(match id {
            "base" => SolverId::Base,
            "minimax" => SolverId::Minimax,
            "inexact" => SolverId::Inexact,
            "stochastic" => SolverId::Stochastic,
            "directional" => SolverId::Directional,
            "zeroth_order" => SolverId::ZerothOrder,
            other => {
                return Err(ConfigError::new(
                    "CONFIG_UNKNOWN_SOLVER",
                    format!("unknown solver `{other}`; known: {}", SOLVERS.join(", ")),
                ))
            }
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SolverId::Base => "base",
            SolverId::Minimax => "minimax",
            SolverId::Inexact => "inexact",
            SolverId::Stochastic => "stochastic",
            SolverId::Directional => "directional",
            SolverId::ZerothOrder => "zeroth_order",
        }
    }
}

/// A configuration with every id resolved and every default filled in.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: Config,
    pub solver: SolverId,
    pub problem: Problem,
    pub prox_id: String,
    pub prox: ProxSetup,
    pub perturbation: Perturbation,
    pub scheme: DirectionKind,
    pub mode: InexactMode,
}

fn require<T>(value: Option<T>, what: &str, solver: SolverId) -> Result<T, ConfigError> {
    value.ok_or_else(|| {
        ConfigError::new(
            "CONFIG_MISSING",
            format!("solver `{}` needs {what}", solver.as_str()),
        )
    })
}

impl Experiment {
    pub fn resolve(config: &Config) -> Result<Self, ConfigError> {
        let solver = SolverId::parse(&config.solver.id)?;
        let problem = problems::by_name(&config.problem.id).map_err(|_| {
            ConfigError::new(
                "CONFIG_UNKNOWN_PROBLEM",
                format!("unknown problem `{}`; known: {}", config.problem.id, SUITE.join(", ")),
            )
        })?;
        let prox = match config.prox.id.as_str() {
            "default" => problem.prox,
            "euclidean" => ProxSetup::euclidean(),
            "entropy" => ProxSetup::entropy_simplex(),
            "scaled_euclidean" => ProxSetup::scaled_euclidean(problem.lipschitz)
                .map_err(|e| ConfigError::new("CONFIG_INVALID", e.to_string()))?,
            other => {
                return Err(ConfigError::new(
                    "CONFIG_UNKNOWN_PROX",
                    format!("unknown prox `{other}`; known: {}", PROXES.join(", ")),
                ))
            }
        };
        let prox_id = if config.prox.id == "default" {
            prox.name().to_string()
        } else {
            config.prox.id.clone()
        };
        let perturbation = match config.oracle.perturbation.as_str() {
            "zero" => Perturbation::Zero,
            "constant" => Perturbation::Constant,
            "seeded_random" => Perturbation::SeededRandom,
            other => {
                return Err(ConfigError::new(
                    "CONFIG_UNKNOWN_PERTURBATION",
                    format!("unknown perturbation `{other}`; known: {}", PERTURBATIONS.join(", ")),
                ))
            }
        };
        let scheme = match config.oracle.scheme.as_str() {
            "sphere" => DirectionKind::UniformSphere,
            "coordinate" => DirectionKind::UniformCoordinate,
            other => {
                return Err(ConfigError::new(
                    "CONFIG_UNKNOWN_SCHEME",
                    format!("unknown direction scheme `{other}`; known: {}", SCHEMES.join(", ")),
                ))
            }
        };
        let mode = match config.plan.mode.as_deref().unwrap_or("fixed") {
            "fixed" => InexactMode::FixedDelta,
            "universal" => InexactMode::Universal {
                epsilon: require(config.plan.epsilon, "plan.epsilon for universal mode", solver)?,
            },
            other => {
                return Err(ConfigError::new(
                    "CONFIG_UNKNOWN_MODE",
                    format!("unknown inexact mode `{other}`; known: {}", MODES.join(", ")),
                ))
            }
        };
        match solver {
            SolverId::Base => {
                if config.plan.steps.is_none() && config.plan.epsilon.is_none() {
                    return Err(ConfigError::new(
                        "CONFIG_MISSING",
                        "solver `base` needs plan.steps or plan.epsilon",
                    ));
                }
            }
            SolverId::Minimax | SolverId::Inexact => {
                require(config.plan.steps, "plan.steps", solver)?;
            }
            SolverId::Stochastic | SolverId::Directional | SolverId::ZerothOrder => {
                require(config.plan.epsilon, "plan.epsilon", solver)?;
            }
        }
        if let Some(l0) = config.plan.l0 {
            if !(l0 > 0.0 && l0.is_finite()) {
                return Err(ConfigError::new("CONFIG_INVALID", format!("plan.l0 must be positive, got {l0}")));
            }
        }
        Ok(Self {
            config: config.clone(),
            solver,
            problem,
            prox_id,
            prox,
            perturbation,
            scheme,
            mode,
        })
    }
}
