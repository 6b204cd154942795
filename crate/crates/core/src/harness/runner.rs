//! Seeded trial execution.
//!
//! Every trial draws its randomness from ChaCha8 substreams of its seed:
//! one each for the task (type means, CSV order), the arrivals, the label
//! noise and the policy's own coin flips. Trials are independent, so they can
//! run on a rayon pool; results are always returned in trial order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{ArrivalSpec, ExperimentConfig, PolicySpec, TaskSpec};
use crate::baselines::{BaselineRule, DiscreteBaseline, GpBaseline};
use crate::discrete::{DiscreteConfig, DiscretePolicy};
use crate::error::{Error, Result};
use crate::gp_labeler::{GpLabeler, GpLabelerConfig, GpModelConfig};
use crate::kernels::KernelSpec;
use crate::ledger::{LossLedger, RoundRecord};
use crate::policy::StepOutcome;
use crate::streams::{load_csv_stream, Arrival, ArrivalPattern, GroundTruthTask, TestFunction};

/// Environment variable capping the number of worker threads (0 or unset: auto).
pub const THREADS_ENV: &str = "STREAMLABEL_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
enum Substream {
    Task = 1,
    Arrivals = 2,
    Noise = 3,
    Policy = 4,
}

fn substream(seed: u64, stream: Substream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// One logged round: the ledger record plus what the decision was based on.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRound {
    pub record: RoundRecord,
    pub x_repr: String,
    pub uncertainty: f64,
    pub threshold: Option<f64>,
    pub forced: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub index: usize,
    pub seed: u64,
    pub labeling_cost: f64,
    pub rounds: Vec<TrialRound>,
}

impl TrialResult {
    pub fn horizon(&self) -> usize {
        self.rounds.len()
    }

    pub fn final_labels(&self) -> usize {
        self.rounds.iter().filter(|r| r.record.labeled).count()
    }

    pub fn final_loss(&self) -> f64 {
        self.rounds.last().map_or(0.0, |r| r.record.cumulative_loss)
    }

    pub fn cumulative_loss(&self) -> Vec<f64> {
        self.rounds
            .iter()
            .map(|r| r.record.cumulative_loss)
            .collect()
    }

    /// `L_t / t`.
    pub fn average_loss(&self) -> Vec<f64> {
        self.rounds
            .iter()
            .map(|r| r.record.cumulative_loss / r.record.t as f64)
            .collect()
    }

    /// Running mean of the absolute prediction error.
    pub fn average_error(&self) -> Vec<f64> {
        let mut sum = 0.0;
        self.rounds
            .iter()
            .map(|r| {
                sum += r.record.prediction_error;
                sum / r.record.t as f64
            })
            .collect()
    }

    /// `N_t`.
    pub fn label_counts(&self) -> Vec<f64> {
        let mut n = 0usize;
        self.rounds
            .iter()
            .map(|r| {
                n += usize::from(r.record.labeled);
                n as f64
            })
            .collect()
    }

    pub fn prediction_errors(&self) -> Vec<f64> {
        self.rounds
            .iter()
            .map(|r| r.record.prediction_error)
            .collect()
    }
}

/// A trial that stopped early.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialFailure {
    pub index: usize,
    pub seed: u64,
    /// Round at which the failure happened (0: during setup).
    pub round: usize,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct ExperimentResults {
    pub config: ExperimentConfig,
    pub trials: Vec<TrialResult>,
    pub failures: Vec<TrialFailure>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Runs trials on a rayon pool when the `parallel` feature is enabled;
    /// otherwise identical to `Sequential`.
    Parallel,
}

/// Task and arrival stream for one trial.
fn build_world(config: &ExperimentConfig, seed: u64) -> Result<(GroundTruthTask, ArrivalPattern)> {
    let mut task_rng = substream(seed, Substream::Task);
    let task = match &config.task {
        TaskSpec::DiscreteGaussian { num_types } => {
            GroundTruthTask::random_discrete(*num_types, config.sigma, &mut task_rng)?
        }
        TaskSpec::Branin => GroundTruthTask::continuous(TestFunction::Branin, config.sigma)?,
        TaskSpec::Hartmann6 => GroundTruthTask::continuous(TestFunction::Hartmann6, config.sigma)?,
        TaskSpec::Csv {
            path,
            feature_columns,
            label_column,
            normalize,
            shuffle_seed,
        } => {
            let (task, pattern) = load_csv_stream(
                path,
                feature_columns,
                label_column,
                *normalize,
                config.sigma,
                shuffle_seed.unwrap_or(seed),
            )?;
            if pattern.remaining().unwrap_or(0) < config.horizon_t {
                return Err(Error::Config(format!(
                    "horizon_t = {} exceeds the {} rows of {}",
                    config.horizon_t,
                    pattern.remaining().unwrap_or(0),
                    path.display()
                )));
            }
            return Ok((task, pattern));
        }
    };
    let pattern = match (&config.arrival, &task) {
        (ArrivalSpec::Uniform, GroundTruthTask::DiscreteGaussian { means, .. }) => {
            ArrivalPattern::uniform_discrete(means.len())?
        }
        (
            ArrivalSpec::Lopsided {
                heavy_fraction,
                heavy_mass,
            },
            GroundTruthTask::DiscreteGaussian { means, .. },
        ) => ArrivalPattern::lopsided_discrete(means.len(), *heavy_fraction, *heavy_mass)?,
        (ArrivalSpec::Custom { weights }, GroundTruthTask::DiscreteGaussian { .. }) => {
            ArrivalPattern::custom_discrete(weights.clone())?
        }
        (ArrivalSpec::Uniform, GroundTruthTask::ContinuousFunction { bounds, .. }) => {
            ArrivalPattern::uniform_box(bounds.clone())?
        }
        (
            ArrivalSpec::Lopsided {
                heavy_fraction,
                heavy_mass,
            },
            GroundTruthTask::ContinuousFunction { bounds, .. },
        ) => {
            let mut heavy = bounds.clone();
            let (lo, hi) = heavy[0];
            heavy[0] = (lo, lo + heavy_fraction * (hi - lo));
            ArrivalPattern::lopsided_box(bounds.clone(), heavy, *heavy_mass)?
        }
        (
            ArrivalSpec::LopsidedBox {
                heavy_region,
                heavy_mass,
            },
            GroundTruthTask::ContinuousFunction { bounds, .. },
        ) => ArrivalPattern::lopsided_box(
            bounds.clone(),
            heavy_region.iter().map(|r| (r[0], r[1])).collect(),
            *heavy_mass,
        )?,
        (arrival, _) => {
            return Err(Error::Config(format!(
                "arrival {arrival:?} does not fit task {:?}",
                config.task
            )))
        }
    };
    Ok((task, pattern))
}

/// The policy under test, with whatever input mapping it needs.
enum Learner {
    Threshold(DiscretePolicy),
    DiscreteBaseline(DiscreteBaseline),
    Gp(GpLabeler),
    GpBaseline(GpBaseline),
    /// Discrete threshold policy over the 2^d half-cells of the unit box.
    Naive(DiscretePolicy),
}

fn baseline_rule(policy: &PolicySpec) -> Result<BaselineRule> {
    match policy {
        PolicySpec::RandomSelect { probability } => BaselineRule::random_select(*probability),
        PolicySpec::VarUncertainty => Ok(BaselineRule::var_uncertainty()),
        other => Err(Error::Config(format!("{} is not a baseline", other.name()))),
    }
}

fn gp_model_config(config: &ExperimentConfig, dimension: usize) -> Result<GpModelConfig> {
    let gp = &config.gp;
    Ok(GpModelConfig {
        kernel: KernelSpec::new(gp.kernel, gp.initial_lengthscale, dimension)?,
        noise_sigma: config.sigma,
        init_label_count: gp.init_labels.unwrap_or(5 * dimension),
        lengthscale_grid: gp.lengthscale_grid.clone(),
        normalize_labels: gp.normalize_labels,
    })
}

impl Learner {
    fn build(config: &ExperimentConfig, task: &GroundTruthTask) -> Result<Self> {
        let discrete_config = |num_types| DiscreteConfig {
            num_types,
            cost: config.cost_b,
            delta: config.delta,
            sigma: config.sigma,
            lambda: config.lambda,
        };
        let size = task.size();
        Ok(match (&config.policy, task.is_discrete()) {
            (PolicySpec::DiscreteThreshold, true) => {
                Learner::Threshold(DiscretePolicy::new(discrete_config(size))?)
            }
            (PolicySpec::RandomSelect { .. } | PolicySpec::VarUncertainty, true) => {
                Learner::DiscreteBaseline(DiscreteBaseline::new(
                    size,
                    config.delta,
                    config.sigma,
                    baseline_rule(&config.policy)?,
                )?)
            }
            (PolicySpec::GpThreshold, false) => Learner::Gp(GpLabeler::new(GpLabelerConfig {
                cost: config.cost_b,
                lambda: config.lambda,
                model: gp_model_config(config, size)?,
            })?),
            (PolicySpec::RandomSelect { .. } | PolicySpec::VarUncertainty, false) => {
                Learner::GpBaseline(GpBaseline::new(
                    gp_model_config(config, size)?,
                    baseline_rule(&config.policy)?,
                )?)
            }
            (PolicySpec::NaiveDiscretized, false) => {
                if size >= usize::BITS as usize {
                    return Err(Error::Config(format!(
                        "dimension {size} too large for 2^d cells"
                    )));
                }
                Learner::Naive(DiscretePolicy::new(discrete_config(1 << size))?)
            }
            (policy, _) => {
                return Err(Error::Config(format!(
                    "policy {} does not fit task {:?}",
                    policy.name(),
                    config.task
                )))
            }
        })
    }

    fn step(
        &mut self,
        arrival: &Arrival,
        unit_point: Option<&[f64]>,
        rng: &mut ChaCha8Rng,
        oracle: &mut dyn FnMut() -> Result<f64>,
    ) -> Result<StepOutcome> {
        let type_index = || match arrival {
            Arrival::Type(k) => Ok(*k),
            other => Err(Error::invalid(format!(
                "expected a type arrival, got {other:?}"
            ))),
        };
        let point = || unit_point.ok_or_else(|| Error::invalid("expected a point arrival"));
        match self {
            Learner::Threshold(p) => p.step(type_index()?, oracle),
            Learner::DiscreteBaseline(b) => b.step(type_index()?, rng, oracle),
            Learner::Gp(p) => p.step(point()?, oracle),
            Learner::GpBaseline(b) => b.step(point()?, rng, oracle),
            Learner::Naive(p) => p.step(half_cell(point()?), oracle),
        }
    }
}

/// Index of the half-cell containing a unit-box point: bit `j` is set when
/// coordinate `j` is at least 0.5.
pub fn half_cell(unit_point: &[f64]) -> usize {
    unit_point
        .iter()
        .enumerate()
        .filter(|(_, &v)| v >= 0.5)
        .fold(0, |acc, (j, _)| acc | (1 << j))
}

fn to_unit_box(point: &[f64], bounds: Option<&[(f64, f64)]>) -> Vec<f64> {
    match bounds {
        Some(b) => point
            .iter()
            .zip(b)
            .map(|(v, (lo, hi))| (v - lo) / (hi - lo))
            .collect(),
        None => point.to_vec(),
    }
}

/// Runs one trial. Policies only ever see the arrival (rescaled to the unit
/// box) and the labels they pay for; `true_value` is applied afterwards.
pub fn run_trial(
    config: &ExperimentConfig,
    index: usize,
    seed: u64,
) -> std::result::Result<TrialResult, TrialFailure> {
    run_trial_with_truth(config, index, seed, |task, arrival| {
        task.true_value(arrival)
    })
}

/// Like [`run_trial`] but scores predictions against `truth` instead of the
/// task's own noiseless values. Labels still come from the task.
pub fn run_trial_with_truth<F>(
    config: &ExperimentConfig,
    index: usize,
    seed: u64,
    truth: F,
) -> std::result::Result<TrialResult, TrialFailure>
where
    F: Fn(&GroundTruthTask, &Arrival) -> Result<f64>,
{
    let fail = |round: usize, e: Error| TrialFailure {
        index,
        seed,
        round,
        message: e.to_string(),
    };
    let (task, mut pattern) = build_world(config, seed).map_err(|e| fail(0, e))?;
    let mut learner = Learner::build(config, &task).map_err(|e| fail(0, e))?;
    let mut ledger = LossLedger::new(config.cost_b).map_err(|e| fail(0, e))?;
    let mut arrival_rng = substream(seed, Substream::Arrivals);
    let mut noise_rng = substream(seed, Substream::Noise);
    let mut policy_rng = substream(seed, Substream::Policy);
    let bounds = task.input_bounds().map(<[_]>::to_vec);

    let mut rounds = Vec::with_capacity(config.horizon_t);
    for t in 1..=config.horizon_t {
        let mut round = || -> Result<TrialRound> {
            let arrival = pattern.next_arrival(&mut arrival_rng)?;
            let unit = arrival.point().map(|p| to_unit_box(p, bounds.as_deref()));
            let mut oracle = || task.query_label(&arrival, &mut noise_rng);
            let outcome = learner.step(&arrival, unit.as_deref(), &mut policy_rng, &mut oracle)?;
            let true_value = truth(&task, &arrival)?;
            let record = RoundRecord::charge(
                &mut ledger,
                t,
                outcome.prediction,
                true_value,
                outcome.observed_label,
            )?;
            Ok(TrialRound {
                record,
                x_repr: arrival.to_string(),
                uncertainty: outcome.uncertainty,
                threshold: outcome.threshold,
                forced: outcome.forced,
            })
        };
        rounds.push(round().map_err(|e| fail(t, e))?);
    }
    Ok(TrialResult {
        index,
        seed,
        labeling_cost: config.cost_b,
        rounds,
    })
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResults> {
    run_experiment_with(config, Execution::Parallel)
}

pub fn run_experiment_with(
    config: &ExperimentConfig,
    execution: Execution,
) -> Result<ExperimentResults> {
    config.validate()?;
    let jobs: Vec<(usize, u64)> = config.trial_seeds.iter().copied().enumerate().collect();
    let run = |&(index, seed): &(usize, u64)| run_trial(config, index, seed);
    let outcomes: Vec<_> = match execution {
        Execution::Sequential => jobs.iter().map(run).collect(),
        Execution::Parallel => parallel_map(&jobs, run)?,
    };
    let mut trials = Vec::new();
    let mut failures = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(t) => trials.push(t),
            Err(f) => failures.push(f),
        }
    }
    Ok(ExperimentResults {
        config: config.clone(),
        trials,
        failures,
    })
}

/// Thread cap from [`THREADS_ENV`]; `None` means let rayon decide.
pub fn thread_limit() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) if v.trim().is_empty() => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(0) => Ok(None),
            Ok(n) => Ok(Some(n)),
            Err(_) => Err(Error::Config(format!(
                "{THREADS_ENV} must be a non-negative integer, got `{v}`"
            ))),
        },
        Err(_) => Ok(None),
    }
}

#[cfg(feature = "parallel")]
fn parallel_map<T, U, F>(items: &[T], f: F) -> Result<Vec<U>>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync,
{
    use rayon::prelude::*;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_limit()? {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| items.par_iter().map(&f).collect()))
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<T, U, F>(items: &[T], f: F) -> Result<Vec<U>>
where
    F: Fn(&T) -> U,
{
    thread_limit()?;
    Ok(items.iter().map(f).collect())
}
