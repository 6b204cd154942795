//! Experiment configuration documents.
//!
//! Configs are JSON. Field names follow [`ExperimentConfig`]; tagged enums use
//! a `kind` key. A minimal discrete run:
//!
//! ```json
//! {
//!   "task": { "kind": "discrete_gaussian", "num_types": 10 },
//!   "arrival": { "kind": "uniform" },
//!   "policy": { "kind": "discrete_threshold" },
//!   "cost_b": 10, "lambda": 0.5, "sigma": 0.1, "delta": 0.05,
//!   "horizon_t": 10000, "trial_seeds": [0, 1, 2]
//! }
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp_labeler::DEFAULT_LENGTHSCALE_GRID;
use crate::kernels::KernelFamily;
use crate::streams::load_csv_stream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskSpec {
    /// `num_types` means drawn uniformly from `[0, 1]` per trial.
    DiscreteGaussian { num_types: usize },
    /// Branin on `[-5, 10] x [0, 15]`.
    Branin,
    /// Hartmann-6 on `[0, 1]^6`.
    Hartmann6,
    /// Rows of a regression CSV, replayed in a seeded order.
    Csv {
        path: PathBuf,
        feature_columns: Vec<String>,
        label_column: String,
        #[serde(default = "default_true")]
        normalize: bool,
        /// Replay order seed; defaults to the trial seed.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        shuffle_seed: Option<u64>,
    },
}

impl TaskSpec {
    pub fn is_discrete(&self) -> bool {
        matches!(self, TaskSpec::DiscreteGaussian { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ArrivalSpec {
    Uniform,
    /// Discrete: the first `ceil(heavy_fraction * K)` types receive
    /// `heavy_mass` of the arrivals. Continuous: the lowest `heavy_fraction`
    /// slab of the first coordinate receives `heavy_mass`.
    Lopsided {
        #[serde(default = "default_heavy_fraction")]
        heavy_fraction: f64,
        #[serde(default = "default_heavy_mass")]
        heavy_mass: f64,
    },
    /// Explicit arrival probabilities per type.
    Custom {
        weights: Vec<f64>,
    },
    /// Explicit heavy box in the task's raw coordinates.
    LopsidedBox {
        heavy_region: Vec<[f64; 2]>,
        #[serde(default = "default_heavy_mass")]
        heavy_mass: f64,
    },
    /// Replay the rows of a CSV task.
    Replay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicySpec {
    /// Confidence-radius threshold policy over discrete types.
    DiscreteThreshold,
    /// Posterior-std threshold policy over a GP.
    GpThreshold,
    /// The discrete threshold policy over the `2^d` half-cells of the unit box.
    NaiveDiscretized,
    RandomSelect {
        #[serde(default = "default_probability")]
        probability: f64,
    },
    VarUncertainty,
}

impl PolicySpec {
    pub fn name(&self) -> &'static str {
        match self {
            PolicySpec::DiscreteThreshold => "discrete_threshold",
            PolicySpec::GpThreshold => "gp_threshold",
            PolicySpec::NaiveDiscretized => "naive_discretized",
            PolicySpec::RandomSelect { .. } => "random_select",
            PolicySpec::VarUncertainty => "var_uncertainty",
        }
    }
}

/// GP predictor settings for the continuous setting (used by `gp_threshold`
/// and by the baselines on continuous tasks).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GpSettings {
    #[serde(default = "default_kernel")]
    pub kernel: KernelFamily,
    /// Lengthscale used before tuning (and throughout when no initialization).
    #[serde(default = "default_initial_lengthscale")]
    pub initial_lengthscale: f64,
    /// Forced initial labels; defaults to `5 d`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_labels: Option<usize>,
    #[serde(default = "default_grid")]
    pub lengthscale_grid: Vec<f64>,
    #[serde(default = "default_true")]
    pub normalize_labels: bool,
}

impl Default for GpSettings {
    fn default() -> Self {
        GpSettings {
            kernel: default_kernel(),
            initial_lengthscale: default_initial_lengthscale(),
            init_labels: None,
            lengthscale_grid: default_grid(),
            normalize_labels: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub task: TaskSpec,
    pub arrival: ArrivalSpec,
    pub policy: PolicySpec,
    pub cost_b: f64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Label noise level; also the sub-Gaussian / GP noise parameter given to
    /// the policies.
    pub sigma: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    pub horizon_t: usize,
    pub trial_seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub gp: GpSettings,
}

fn default_true() -> bool {
    true
}
fn default_heavy_fraction() -> f64 {
    0.2
}
fn default_heavy_mass() -> f64 {
    0.8
}
fn default_probability() -> f64 {
    0.5
}
fn default_kernel() -> KernelFamily {
    KernelFamily::SquaredExponential
}
fn default_initial_lengthscale() -> f64 {
    0.2
}
fn default_grid() -> Vec<f64> {
    DEFAULT_LENGTHSCALE_GRID.to_vec()
}
fn default_name() -> String {
    "experiment".into()
}
fn default_lambda() -> f64 {
    1.0
}
fn default_delta() -> f64 {
    0.05
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_json(&text)?;
        // relative CSV paths resolve against the config's directory
        if let TaskSpec::Csv { path: csv, .. } = &mut config.task {
            if csv.is_relative() {
                if let Some(dir) = path.parent() {
                    *csv = dir.join(&*csv);
                }
            }
        }
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Input dimension of a continuous task, if known without reading data.
    pub fn dimension(&self) -> Option<usize> {
        match &self.task {
            TaskSpec::DiscreteGaussian { .. } => None,
            TaskSpec::Branin => Some(2),
            TaskSpec::Hartmann6 => Some(6),
            TaskSpec::Csv {
                feature_columns, ..
            } => Some(feature_columns.len()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.horizon_t == 0 {
            return fail("horizon_t must be >= 1".into());
        }
        if self.trial_seeds.is_empty() {
            return fail("trial_seeds must list at least one seed".into());
        }
        if !(self.cost_b >= 0.0 && self.cost_b.is_finite()) {
            return fail(format!(
                "cost_b must be finite and >= 0, got {}",
                self.cost_b
            ));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return fail(format!("lambda must be > 0, got {}", self.lambda));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return fail(format!("sigma must be finite and >= 0, got {}", self.sigma));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return fail(format!("delta must lie in (0, 1], got {}", self.delta));
        }
        let discrete = self.task.is_discrete();
        match (&self.policy, discrete) {
            (PolicySpec::DiscreteThreshold, false) => {
                return fail("discrete_threshold needs a discrete_gaussian task; use naive_discretized or gp_threshold for continuous tasks".into())
            }
            (PolicySpec::GpThreshold | PolicySpec::NaiveDiscretized, true) => {
                return fail(format!("{} needs a continuous task", self.policy.name()))
            }
            _ => {}
        }
        if matches!(
            self.policy,
            PolicySpec::DiscreteThreshold | PolicySpec::GpThreshold | PolicySpec::NaiveDiscretized
        ) && self.cost_b <= 0.0
        {
            return fail(format!("{} needs cost_b > 0", self.policy.name()));
        }
        if let PolicySpec::RandomSelect { probability } = self.policy {
            if !(0.0..=1.0).contains(&probability) {
                return fail(format!(
                    "random_select probability must lie in [0, 1], got {probability}"
                ));
            }
        }
        if !discrete && self.uses_gp() && self.sigma <= 0.0 {
            return fail("GP-based policies need sigma > 0".into());
        }
        if let TaskSpec::DiscreteGaussian { num_types } = self.task {
            if num_types == 0 {
                return fail("num_types must be >= 1".into());
            }
        }
        if let TaskSpec::Csv {
            feature_columns, ..
        } = &self.task
        {
            if feature_columns.is_empty() {
                return fail("csv task needs at least one feature column".into());
            }
        }
        let is_csv = matches!(self.task, TaskSpec::Csv { .. });
        match &self.arrival {
            ArrivalSpec::Replay if !is_csv => {
                return fail("replay arrivals need a csv task".into())
            }
            ArrivalSpec::Uniform
            | ArrivalSpec::Lopsided { .. }
            | ArrivalSpec::Custom { .. }
            | ArrivalSpec::LopsidedBox { .. }
                if is_csv =>
            {
                return fail("csv tasks use replay arrivals".into())
            }
            ArrivalSpec::Custom { weights } => match self.task {
                TaskSpec::DiscreteGaussian { num_types } if weights.len() == num_types => {}
                TaskSpec::DiscreteGaussian { num_types } => {
                    return fail(format!(
                        "custom weights have {} entries for {num_types} types",
                        weights.len()
                    ))
                }
                _ => return fail("custom arrival weights need a discrete task".into()),
            },
            ArrivalSpec::LopsidedBox { heavy_region, .. } => {
                if discrete {
                    return fail("lopsided_box arrivals need a continuous task".into());
                }
                if Some(heavy_region.len()) != self.dimension() {
                    return fail("heavy_region dimension differs from the task".into());
                }
            }
            ArrivalSpec::Lopsided {
                heavy_fraction,
                heavy_mass,
            } => {
                if !(0.0..=1.0).contains(heavy_fraction) || !(0.0..=1.0).contains(heavy_mass) {
                    return fail(
                        "lopsided heavy_fraction and heavy_mass must lie in [0, 1]".into(),
                    );
                }
                if !discrete && !(*heavy_fraction > 0.0 && *heavy_fraction < 1.0) {
                    return fail("continuous lopsided arrivals need 0 < heavy_fraction < 1".into());
                }
            }
            _ => {}
        }
        if self.uses_gp() && !discrete {
            let gp = &self.gp;
            if !(gp.initial_lengthscale > 0.0 && gp.initial_lengthscale.is_finite()) {
                return fail("gp.initial_lengthscale must be > 0".into());
            }
            if gp.lengthscale_grid.is_empty()
                || gp
                    .lengthscale_grid
                    .iter()
                    .any(|l| !(*l > 0.0 && l.is_finite()))
            {
                return fail("gp.lengthscale_grid must be non-empty with entries > 0".into());
            }
        }
        Ok(())
    }

    /// Validates and, for CSV tasks, reads the data file to check that it
    /// parses and has at least `horizon_t` rows. Failures are config errors.
    pub fn check_inputs(&self) -> Result<()> {
        self.validate()?;
        if let TaskSpec::Csv {
            path,
            feature_columns,
            label_column,
            normalize,
            ..
        } = &self.task
        {
            let (_, pattern) = load_csv_stream(
                path,
                feature_columns,
                label_column,
                *normalize,
                self.sigma,
                0,
            )
            .map_err(|e| Error::Config(e.to_string()))?;
            let rows = pattern.remaining().unwrap_or(0);
            if rows < self.horizon_t {
                return Err(Error::Config(format!(
                    "horizon_t = {} exceeds the {rows} rows of {}",
                    self.horizon_t,
                    path.display()
                )));
            }
        }
        Ok(())
    }

    /// Whether the policy predicts with a GP (continuous setting, not naive).
    pub fn uses_gp(&self) -> bool {
        !matches!(
            self.policy,
            PolicySpec::NaiveDiscretized | PolicySpec::DiscreteThreshold
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "task": { "kind": "discrete_gaussian", "num_types": 10 },
        "arrival": { "kind": "uniform" },
        "policy": { "kind": "discrete_threshold" },
        "cost_b": 10, "lambda": 0.5, "sigma": 0.1,
        "horizon_t": 100, "trial_seeds": [0, 1]
    }"#;

    #[test]
    fn parses_minimal_config() {
        let c = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.delta, 0.05);
        assert_eq!(c.name, "experiment");
        let again = ExperimentConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn rejects_bad_configs() {
        let cases = [
            MINIMAL.replace("\"horizon_t\": 100", "\"horizon_t\": 0"),
            MINIMAL.replace("[0, 1]", "[]"),
            MINIMAL.replace("discrete_threshold", "gp_threshold"),
            MINIMAL.replace("\"kind\": \"uniform\"", "\"kind\": \"replay\""),
            MINIMAL.replace("\"lambda\": 0.5", "\"lambda\": 0"),
            MINIMAL.replace("\"cost_b\": 10", "\"cost_b\": 0"),
            MINIMAL.replace("\"sigma\": 0.1", "\"sigma\": 0.1, \"bogus\": 1"),
            MINIMAL.replace(
                "\"kind\": \"uniform\"",
                "\"kind\": \"custom\", \"weights\": [1.0]",
            ),
        ];
        for text in cases {
            assert!(
                matches!(ExperimentConfig::from_json(&text), Err(Error::Config(_))),
                "accepted: {text}"
            );
        }
    }

    #[test]
    fn continuous_config_defaults() {
        let text = r#"{
            "task": { "kind": "branin" },
            "arrival": { "kind": "uniform" },
            "policy": { "kind": "random_select" },
            "cost_b": 10, "sigma": 5, "horizon_t": 300, "trial_seeds": [3]
        }"#;
        let c = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(c.policy, PolicySpec::RandomSelect { probability: 0.5 });
        assert_eq!(c.gp, GpSettings::default());
        assert_eq!(c.dimension(), Some(2));
    }
}
