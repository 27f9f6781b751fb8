//! Flat TOML experiment configuration.
//!
//! Every key is optional except the seed, which may come from the command
//! line instead. Unknown keys are rejected. Matrices are arrays of rows.
//!
//! ```toml
//! problem = "l1_quadratic"     # or "catalog" for all four defaults
//! schedule = "power"           # constant | power | explicit
//! step_fraction = 0.5          # step (or power scale) as a fraction of Θ
//! exponent = 0.75
//! errors = "power_decay"       # none | power_decay | explicit
//! error_scale = 1.0
//! error_exponent = 2.0
//! k_max = 200
//! seed = 7
//! ```

use std::path::{Path, PathBuf};

use fbsplit::problems::{by_id, catalog, make_box_projected, make_l1_quadratic, make_linear1d, make_skew2d};
use fbsplit::{ErrorSequence, OperatorPair, ProblemInstance, ScheduleKind, StepSchedule, Vector};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

fn bad(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Must match the subcommand when present.
    pub experiment: Option<String>,

    pub problem: Option<String>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub omega: Option<f64>,
    pub gamma: Option<f64>,
    pub matrix: Option<Vec<Vec<f64>>>,
    pub rhs: Option<Vec<f64>>,
    pub weight: Option<f64>,
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
    pub q_matrix: Option<Vec<Vec<f64>>>,
    pub q: Option<Vec<f64>>,

    pub x0: Option<Vec<f64>>,
    pub x0_set: Option<Vec<Vec<f64>>>,

    pub schedule: Option<String>,
    pub step: Option<f64>,
    pub step_fraction: Option<f64>,
    pub exponent: Option<f64>,
    pub steps: Option<Vec<f64>>,
    /// Step multiplier for the second sequence in two-sequence checks.
    pub second_scale: Option<f64>,

    pub errors: Option<String>,
    pub error_scale: Option<f64>,
    pub error_exponent: Option<f64>,
    pub error_direction: Option<Vec<f64>>,
    pub error_values: Option<Vec<Vec<f64>>>,

    pub k_max: Option<usize>,
    pub l_max: Option<usize>,
    pub t_max: Option<f64>,
    pub m_list: Option<Vec<usize>>,
    pub times: Option<Vec<f64>>,
    pub h_delta: Option<f64>,
    pub h_max: Option<f64>,
    pub grid_points: Option<usize>,
    pub gap_points: Option<usize>,

    pub tol: Option<f64>,
    pub oracle_fraction: Option<f64>,
    pub budget: Option<u64>,
    pub trials: Option<usize>,
    pub algebra_trials: Option<usize>,

    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| bad(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn seed(&self) -> Result<u64, ConfigError> {
        self.seed.ok_or_else(|| bad("a seed is required (config key `seed` or --seed)"))
    }

    /// Resolves `problem` and its parameters into instances.
    pub fn problems(&self) -> Result<Vec<ProblemInstance>, ConfigError> {
        let id = self.problem.as_deref().unwrap_or("catalog");
        let has_params = self.a.is_some()
            || self.b.is_some()
            || self.omega.is_some()
            || self.gamma.is_some()
            || self.matrix.is_some()
            || self.rhs.is_some()
            || self.weight.is_some()
            || self.lower.is_some()
            || self.upper.is_some()
            || self.q_matrix.is_some()
            || self.q.is_some();
        let core = |r: fbsplit::Result<ProblemInstance>| r.map_err(|e| bad(format!("problem `{id}`: {e}")));
        let problems = match id {
            "catalog" if has_params => return Err(bad("problem parameters need a single problem id")),
            "catalog" => catalog(),
            "linear1d" if has_params => vec![core(make_linear1d(self.a.unwrap_or(1.0), self.b.unwrap_or(1.0)))?],
            "skew2d" if has_params => vec![core(make_skew2d(self.omega.unwrap_or(1.0), self.gamma.unwrap_or(0.5)))?],
            "l1_quadratic" if has_params => {
                let m = matrix(self.matrix.as_ref().ok_or_else(|| bad("l1_quadratic needs `matrix`"))?)?;
                let rhs = vector(self.rhs.as_ref().ok_or_else(|| bad("l1_quadratic needs `rhs`"))?)?;
                vec![core(make_l1_quadratic(m, rhs, self.weight.unwrap_or(1.0)))?]
            }
            "box_projected" if has_params => {
                let get = |v: &Option<Vec<f64>>, key: &str| {
                    v.as_ref().ok_or_else(|| bad(format!("box_projected needs `{key}`"))).and_then(|v| vector(v))
                };
                let qm = matrix(self.q_matrix.as_ref().ok_or_else(|| bad("box_projected needs `q_matrix`"))?)?;
                vec![core(make_box_projected(get(&self.lower, "lower")?, get(&self.upper, "upper")?, qm, get(&self.q, "q")?))?]
            }
            other => vec![by_id(other).ok_or_else(|| bad(format!("unknown problem id `{other}`")))?],
        };
        if let Some(x0) = &self.x0 {
            let x0 = vector(x0)?;
            for p in &problems {
                if x0.dim() != p.pair.dim() {
                    return Err(bad(format!("x0 has dimension {} but `{}` has {}", x0.dim(), p.id, p.pair.dim())));
                }
            }
        }
        Ok(problems)
    }

    /// Starting point for `problem`.
    pub fn x0(&self, problem: &ProblemInstance) -> Result<Vector, ConfigError> {
        match &self.x0 {
            Some(v) => vector(v),
            None => Ok(problem.default_x0.clone()),
        }
    }

    pub fn schedule_kind(&self, pair: &OperatorPair, default: &str) -> Result<ScheduleKind, ConfigError> {
        let theta = pair.theta_max();
        let step = match (self.step, self.step_fraction) {
            (Some(_), Some(_)) => return Err(bad("give at most one of `step` and `step_fraction`")),
            (Some(s), None) => s,
            (None, fraction) => {
                let f = fraction.unwrap_or(0.5);
                if !theta.is_finite() {
                    return Err(bad("`step_fraction` needs a finite step limit; give `step` instead"));
                }
                f * theta
            }
        };
        let kind = match self.schedule.as_deref().unwrap_or(default) {
            "constant" => ScheduleKind::Constant { step, count: None },
            "power" => ScheduleKind::Power {
                scale: step,
                exponent: self.exponent.unwrap_or(0.75),
            },
            "explicit" => ScheduleKind::Explicit(self.steps.clone().ok_or_else(|| bad("explicit schedule needs `steps`"))?),
            other => return Err(bad(format!("unknown schedule `{other}`"))),
        };
        Ok(kind)
    }

    pub fn schedule(&self, pair: &OperatorPair, default: &str) -> Result<StepSchedule, ConfigError> {
        let kind = self.schedule_kind(pair, default)?;
        StepSchedule::from_kind(kind).map_err(|e| bad(format!("schedule: {e}")))
    }

    /// The same family with steps scaled by `second_scale`.
    pub fn second_schedule(&self, pair: &OperatorPair, default: &str) -> Result<StepSchedule, ConfigError> {
        let f = self.second_scale.unwrap_or(0.5);
        let kind = match self.schedule_kind(pair, default)? {
            ScheduleKind::Constant { step, count } => ScheduleKind::Constant { step: f * step, count },
            ScheduleKind::Power { scale, exponent } => ScheduleKind::Power {
                scale: f * scale,
                exponent,
            },
            ScheduleKind::Explicit(steps) => ScheduleKind::Explicit(steps.iter().map(|s| f * s).collect()),
        };
        StepSchedule::from_kind(kind).map_err(|e| bad(format!("second schedule: {e}")))
    }

    pub fn error_sequence(&self, dim: usize) -> Result<ErrorSequence, ConfigError> {
        let core = |r: fbsplit::Result<ErrorSequence>| r.map_err(|e| bad(format!("errors: {e}")));
        match self.errors.as_deref().unwrap_or("none") {
            "none" => Ok(ErrorSequence::none(dim)),
            "power_decay" => {
                let direction = match &self.error_direction {
                    Some(d) => vector(d)?,
                    None => Vector::basis(dim, 0),
                };
                if direction.dim() != dim {
                    return Err(bad(format!("error_direction has dimension {}, expected {dim}", direction.dim())));
                }
                core(ErrorSequence::power_decay(
                    self.error_scale.unwrap_or(1.0),
                    self.error_exponent.unwrap_or(2.0),
                    direction,
                ))
            }
            "explicit" => {
                let values = self.error_values.as_ref().ok_or_else(|| bad("explicit errors need `error_values`"))?;
                let values = values.iter().map(|v| vector(v)).collect::<Result<Vec<_>, _>>()?;
                core(ErrorSequence::explicit(values, dim))
            }
            other => Err(bad(format!("unknown error sequence `{other}`"))),
        }
    }

    pub fn positive(&self, key: &str, value: Option<f64>, default: f64) -> Result<f64, ConfigError> {
        let v = value.unwrap_or(default);
        if !(v > 0.0) || !v.is_finite() {
            return Err(bad(format!("`{key}` must be positive and finite, got {v}")));
        }
        Ok(v)
    }

    pub fn count(&self, key: &str, value: Option<usize>, default: usize) -> Result<usize, ConfigError> {
        let v = value.unwrap_or(default);
        if v == 0 {
            return Err(bad(format!("`{key}` must be at least 1")));
        }
        Ok(v)
    }
}

pub fn vector(coords: &[f64]) -> Result<Vector, ConfigError> {
    Vector::new(coords.to_vec()).map_err(|e| bad(format!("vector {coords:?}: {e}")))
}

pub fn matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>, ConfigError> {
    let n = rows.first().map(Vec::len).unwrap_or(0);
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(bad("matrices must be non-empty arrays of equal-length rows"));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(DMatrix::from_row_slice(rows.len(), n, &flat))
}
