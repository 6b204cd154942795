//! Threshold labeling for `K` discrete input types.
//!
//! Each type keeps a running sample mean of the labels bought for it. A type
//! is labeled when its sub-Gaussian confidence radius is strictly larger than
//! `lambda * B^(1/3) * M^(-1/3)`, where `M` counts the type's arrivals so far
//! (including the current one).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{LabelOracle, StepOutcome};

/// Per-type counters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TypeStats {
    pub arrivals: usize,
    pub labels: usize,
    pub label_sum: f64,
}

impl TypeStats {
    /// Sample mean of the labels, `None` before the first label.
    pub fn mean_estimate(&self) -> Option<f64> {
        (self.labels > 0).then(|| self.label_sum / self.labels as f64)
    }
}

fn check_delta(delta: f64) -> Result<()> {
    // delta = 1 is accepted: it is the largest level at which the radius is still meaningful.
    if delta > 0.0 && delta <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "confidence delta must lie in (0, 1], got {delta}"
        )))
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma >= 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "sub-Gaussian sigma must be finite and >= 0, got {sigma}"
        )))
    }
}

/// Half-width of the confidence interval around a type's sample mean.
///
/// `sqrt(2 sigma^2 log(2 max(N,1)^3 / delta) / labels)`, or `+inf` when the
/// type has never been labeled. `total_labels` is the label count across all
/// types before the current round.
pub fn confidence_radius(
    stats: &TypeStats,
    total_labels: usize,
    delta: f64,
    sigma: f64,
) -> Result<f64> {
    check_delta(delta)?;
    check_sigma(sigma)?;
    if stats.labels == 0 {
        return Ok(f64::INFINITY);
    }
    let n_total = total_labels.max(1) as f64;
    let log_term = (2.0 * n_total.powi(3) / delta).ln();
    Ok((2.0 * sigma * sigma * log_term / stats.labels as f64).sqrt())
}

/// `lambda * B^(1/3) * M^(-1/3)`.
pub fn threshold_discrete(cost: f64, arrivals: usize, lambda: f64) -> Result<f64> {
    if !(cost > 0.0 && cost.is_finite()) {
        return Err(Error::invalid(format!(
            "labeling cost must be > 0, got {cost}"
        )));
    }
    if arrivals == 0 {
        return Err(Error::invalid("arrival count must be >= 1"));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("lambda must be > 0, got {lambda}")));
    }
    Ok(lambda * (cost / arrivals as f64).cbrt())
}

/// Per-type statistics plus the global label count; the sample-mean
/// predictor used by the threshold policy and by the discrete baselines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeTable {
    per_type: Vec<TypeStats>,
    total_labels: usize,
    delta: f64,
    sigma: f64,
}

impl TypeTable {
    pub fn new(num_types: usize, delta: f64, sigma: f64) -> Result<Self> {
        if num_types == 0 {
            return Err(Error::invalid("number of types must be >= 1"));
        }
        check_delta(delta)?;
        check_sigma(sigma)?;
        Ok(TypeTable {
            per_type: vec![TypeStats::default(); num_types],
            total_labels: 0,
            delta,
            sigma,
        })
    }

    pub fn num_types(&self) -> usize {
        self.per_type.len()
    }

    pub fn stats(&self, k: usize) -> Option<&TypeStats> {
        self.per_type.get(k)
    }

    pub fn all_stats(&self) -> &[TypeStats] {
        &self.per_type
    }

    pub fn total_labels(&self) -> usize {
        self.total_labels
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub(crate) fn check_type(&self, k: usize) -> Result<()> {
        if k < self.per_type.len() {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "type index {k} out of range for K = {}",
                self.per_type.len()
            )))
        }
    }

    /// Counts an arrival of type `k` and returns its new arrival count.
    pub fn arrive(&mut self, k: usize) -> Result<usize> {
        self.check_type(k)?;
        let s = &mut self.per_type[k];
        s.arrivals += 1;
        Ok(s.arrivals)
    }

    /// Confidence radius of type `k` at the current global label count.
    pub fn radius(&self, k: usize) -> Result<f64> {
        self.check_type(k)?;
        confidence_radius(&self.per_type[k], self.total_labels, self.delta, self.sigma)
    }

    pub fn observe(&mut self, k: usize, label: f64) -> Result<()> {
        self.check_type(k)?;
        if !label.is_finite() {
            return Err(Error::Oracle(format!(
                "non-finite label {label} for type {k}"
            )));
        }
        let s = &mut self.per_type[k];
        s.labels += 1;
        s.label_sum += label;
        self.total_labels += 1;
        Ok(())
    }

    /// Sample mean of type `k`, falling back to the zero prior mean for a
    /// type that has never been labeled.
    pub fn prediction(&self, k: usize) -> f64 {
        self.per_type
            .get(k)
            .and_then(TypeStats::mean_estimate)
            .unwrap_or(0.0)
    }

    /// Buys a label for `k` through the oracle and folds it into the mean.
    pub(crate) fn buy_label(&mut self, k: usize, oracle: &mut LabelOracle<'_>) -> Result<f64> {
        let y = oracle()?;
        self.observe(k, y)?;
        Ok(y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscreteConfig {
    pub num_types: usize,
    pub cost: f64,
    pub delta: f64,
    pub sigma: f64,
    pub lambda: f64,
}

/// The cost-aware threshold policy over `K` types.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretePolicy {
    cost: f64,
    lambda: f64,
    table: TypeTable,
}

impl DiscretePolicy {
    pub fn new(config: DiscreteConfig) -> Result<Self> {
        // validate the threshold parameters once up front
        threshold_discrete(config.cost, 1, config.lambda)?;
        Ok(DiscretePolicy {
            cost: config.cost,
            lambda: config.lambda,
            table: TypeTable::new(config.num_types, config.delta, config.sigma)?,
        })
    }

    pub fn table(&self) -> &TypeTable {
        &self.table
    }

    pub fn cost(&self) -> f64 {
        self.cost
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Processes one arrival of type `k`.
    ///
    /// The radius uses the label count from before this round. A tie between
    /// radius and threshold does not label.
    pub fn step(&mut self, k: usize, oracle: &mut LabelOracle<'_>) -> Result<StepOutcome> {
        let arrivals = self.table.arrive(k)?;
        let radius = self.table.radius(k)?;
        let threshold = threshold_discrete(self.cost, arrivals, self.lambda)?;
        let labeled = radius > threshold;
        let observed_label = if labeled {
            Some(self.table.buy_label(k, oracle)?)
        } else {
            None
        };
        Ok(StepOutcome {
            labeled,
            observed_label,
            prediction: self.table.prediction(k),
            uncertainty: radius,
            threshold: Some(threshold),
            forced: false,
        })
    }
}
