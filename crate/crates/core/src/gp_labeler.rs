//! Threshold labeling for a smooth function on `[0,1]^d`.
//!
//! A point is labeled when the posterior standard deviation at it is strictly
//! larger than
//!
//! * squared exponential: `tau(t) = lambda * sqrt(2 s^2) * B^(1/(d+3)) * t^(-1/(d+3))`
//! * Matérn:              `tau(t) = lambda * sqrt(2 s^2) * B^(1/(2d+3)) * t^(-1/(2d+3))`
//!
//! where `s` is the noise level and `t` the global round index. The first
//! `init_label_count` rounds are always labeled; at the end of that phase the
//! lengthscale is chosen by marginal likelihood over a grid and then frozen.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{tune_hyperparams, GpPosterior};
use crate::kernels::{KernelFamily, KernelSpec};
use crate::policy::{LabelOracle, StepOutcome};

/// Default lengthscale grid for inputs normalized to the unit box.
pub const DEFAULT_LENGTHSCALE_GRID: [f64; 7] = [0.05, 0.1, 0.2, 0.3, 0.5, 1.0, 2.0];

pub fn threshold_gp(
    family: KernelFamily,
    cost: f64,
    t: usize,
    dimension: usize,
    sigma: f64,
    lambda: f64,
) -> Result<f64> {
    if !(cost > 0.0 && cost.is_finite()) {
        return Err(Error::invalid(format!(
            "labeling cost must be > 0, got {cost}"
        )));
    }
    if t == 0 {
        return Err(Error::invalid("round index must be >= 1"));
    }
    if dimension == 0 {
        return Err(Error::invalid("dimension must be >= 1"));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!(
            "noise sigma must be > 0, got {sigma}"
        )));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("lambda must be > 0, got {lambda}")));
    }
    let d = dimension as f64;
    let exponent = if family.is_matern() {
        1.0 / (2.0 * d + 3.0)
    } else {
        1.0 / (d + 3.0)
    };
    Ok(lambda * (2.0 * sigma * sigma).sqrt() * (cost / t as f64).powf(exponent))
}

/// How the shared GP predictor is set up: kernel family, noise, and the
/// initialization phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpModelConfig {
    /// Family, dimension and the lengthscale used before tuning.
    pub kernel: KernelSpec,
    pub noise_sigma: f64,
    pub init_label_count: usize,
    pub lengthscale_grid: Vec<f64>,
    /// Model `(y - mean) / std` of the initialization labels instead of raw
    /// labels, so that the unit prior variance matches the label scale.
    pub normalize_labels: bool,
}

impl GpModelConfig {
    /// `init_label_count = 5d`, the default grid, label normalization on.
    pub fn with_defaults(kernel: KernelSpec, noise_sigma: f64) -> Self {
        GpModelConfig {
            kernel,
            noise_sigma,
            init_label_count: 5 * kernel.dimension(),
            lengthscale_grid: DEFAULT_LENGTHSCALE_GRID.to_vec(),
            normalize_labels: true,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.noise_sigma > 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::invalid(format!(
                "GP noise sigma must be > 0, got {}",
                self.noise_sigma
            )));
        }
        if self.init_label_count > 0 && self.lengthscale_grid.is_empty() {
            return Err(Error::invalid("lengthscale grid is empty"));
        }
        if let Some(l) = self
            .lengthscale_grid
            .iter()
            .find(|&&l| !(l > 0.0 && l.is_finite()))
        {
            return Err(Error::invalid(format!(
                "lengthscale grid entry {l} is not > 0"
            )));
        }
        Ok(())
    }
}

/// Lower bound on the estimated signal variance, as a fraction of the label
/// variance.
const MIN_SIGNAL_FRACTION: f64 = 0.05;

/// Affine map between label units and the unit-variance GP: the offset is the
/// label mean and the scale is the estimated signal std, `sqrt(var(y) - s^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelScale {
    pub offset: f64,
    pub scale: f64,
}

impl LabelScale {
    pub const IDENTITY: LabelScale = LabelScale {
        offset: 0.0,
        scale: 1.0,
    };

    fn from_labels(labels: &[f64], noise_sigma: f64) -> Self {
        if labels.is_empty() {
            return Self::IDENTITY;
        }
        let n = labels.len() as f64;
        let offset = labels.iter().sum::<f64>() / n;
        let var = labels.iter().map(|y| (y - offset).powi(2)).sum::<f64>() / n;
        let signal = (var - noise_sigma * noise_sigma).max(MIN_SIGNAL_FRACTION * var);
        let scale = if labels.len() >= 2 && signal.sqrt() > 1e-12 {
            signal.sqrt()
        } else {
            1.0
        };
        LabelScale { offset, scale }
    }

    fn encode(&self, y: f64) -> f64 {
        (y - self.offset) / self.scale
    }
}

/// GP predictor with a forced-labeling initialization phase. Shared by the
/// threshold policy and the baselines in the continuous setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpModel {
    config: GpModelConfig,
    posterior: GpPosterior,
    raw_inputs: Vec<Vec<f64>>,
    raw_labels: Vec<f64>,
    label_scale: LabelScale,
    tuned: bool,
}

impl GpModel {
    pub fn new(config: GpModelConfig) -> Result<Self> {
        config.validate()?;
        let noise = config.noise_sigma * config.noise_sigma;
        Ok(GpModel {
            posterior: GpPosterior::new(config.kernel, noise)?,
            config,
            raw_inputs: Vec::new(),
            raw_labels: Vec::new(),
            label_scale: LabelScale::IDENTITY,
            tuned: false,
        })
    }

    pub fn config(&self) -> &GpModelConfig {
        &self.config
    }

    pub fn posterior(&self) -> &GpPosterior {
        &self.posterior
    }

    pub fn kernel(&self) -> &KernelSpec {
        self.posterior.kernel()
    }

    pub fn label_scale(&self) -> LabelScale {
        self.label_scale
    }

    pub fn is_tuned(&self) -> bool {
        self.tuned
    }

    pub fn label_count(&self) -> usize {
        self.raw_labels.len()
    }

    /// True while round `t` (1-based) falls inside the initialization phase.
    pub fn initializing(&self, t: usize) -> bool {
        t <= self.config.init_label_count
    }

    /// Posterior standard deviation at `x`, in label units.
    pub fn uncertainty(&self, x: &[f64]) -> Result<f64> {
        Ok(self.label_scale.scale * self.posterior.predict(x)?.std)
    }

    /// Posterior mean at `x`, in label units.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let p = self.posterior.predict(x)?;
        Ok(self.label_scale.offset + self.label_scale.scale * p.mean)
    }

    fn scaled_noise_variance(&self, scale: LabelScale) -> f64 {
        (self.config.noise_sigma / scale.scale).powi(2)
    }

    fn refit(&mut self, kernel: KernelSpec, scale: LabelScale) -> Result<()> {
        let labels = self.raw_labels.iter().map(|&y| scale.encode(y)).collect();
        self.posterior = GpPosterior::fit(
            kernel,
            self.scaled_noise_variance(scale),
            self.raw_inputs.clone(),
            labels,
        )?;
        self.label_scale = scale;
        Ok(())
    }

    fn current_scale(&self) -> LabelScale {
        if self.config.normalize_labels {
            LabelScale::from_labels(&self.raw_labels, self.config.noise_sigma)
        } else {
            LabelScale::IDENTITY
        }
    }

    /// Adds a label bought during initialization; the posterior is refit with
    /// the label scale of everything seen so far.
    pub fn observe_initial(&mut self, x: &[f64], y: f64) -> Result<()> {
        self.config.kernel.check_dim(x)?;
        self.raw_inputs.push(x.to_vec());
        self.raw_labels.push(y);
        let kernel = *self.posterior.kernel();
        self.refit(kernel, self.current_scale())
    }

    /// Ends the initialization phase: fixes the label scale and picks the
    /// lengthscale by marginal likelihood.
    pub fn finish_initialization(&mut self) -> Result<()> {
        let scale = self.current_scale();
        let labels: Vec<f64> = self.raw_labels.iter().map(|&y| scale.encode(y)).collect();
        let kernel = tune_hyperparams(
            &self.raw_inputs,
            &labels,
            self.scaled_noise_variance(scale),
            &self.config.kernel,
            &self.config.lengthscale_grid,
        )?;
        self.refit(kernel, scale)?;
        self.tuned = true;
        Ok(())
    }

    /// Adds a label after initialization with a one-row factor update.
    pub fn observe(&mut self, x: &[f64], y: f64) -> Result<()> {
        self.posterior.update(x, self.label_scale.encode(y))?;
        self.raw_inputs.push(x.to_vec());
        self.raw_labels.push(y);
        Ok(())
    }

    /// Handles the labeled part of round `t` and closes the initialization
    /// phase when `t` is its last round.
    pub(crate) fn absorb(&mut self, t: usize, x: &[f64], y: f64) -> Result<()> {
        if self.initializing(t) {
            self.observe_initial(x, y)?;
            if t == self.config.init_label_count {
                self.finish_initialization()?;
            }
            Ok(())
        } else {
            self.observe(x, y)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpLabelerConfig {
    pub cost: f64,
    pub lambda: f64,
    pub model: GpModelConfig,
}

/// Cost-aware threshold policy over a GP posterior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpLabeler {
    cost: f64,
    lambda: f64,
    model: GpModel,
    round: usize,
}

impl GpLabeler {
    pub fn new(config: GpLabelerConfig) -> Result<Self> {
        let model = GpModel::new(config.model)?;
        let k = model.config().kernel;
        threshold_gp(
            k.family(),
            config.cost,
            1,
            k.dimension(),
            model.config().noise_sigma,
            config.lambda,
        )?;
        Ok(GpLabeler {
            cost: config.cost,
            lambda: config.lambda,
            model,
            round: 0,
        })
    }

    pub fn model(&self) -> &GpModel {
        &self.model
    }

    /// Rounds processed so far.
    pub fn round(&self) -> usize {
        self.round
    }

    pub fn threshold(&self, t: usize) -> Result<f64> {
        let cfg = self.model.config();
        threshold_gp(
            cfg.kernel.family(),
            self.cost,
            t,
            cfg.kernel.dimension(),
            cfg.noise_sigma,
            self.lambda,
        )
    }

    pub fn step(&mut self, x: &[f64], oracle: &mut LabelOracle<'_>) -> Result<StepOutcome> {
        let t = self.round + 1;
        let uncertainty = self.model.uncertainty(x)?;
        let threshold = self.threshold(t)?;
        let forced = self.model.initializing(t);
        let labeled = forced || uncertainty > threshold;
        let observed_label = if labeled {
            let y = oracle()?;
            self.model.absorb(t, x, y)?;
            Some(y)
        } else {
            None
        };
        self.round = t;
        Ok(StepOutcome {
            labeled,
            observed_label,
            prediction: self.model.predict(x)?,
            uncertainty,
            threshold: Some(threshold),
            forced,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::SQRT_2;

    #[test]
    fn threshold_unit_case() {
        for d in 1..8 {
            let v = threshold_gp(KernelFamily::SquaredExponential, 1.0, 1, d, 1.0, 1.0).unwrap();
            assert!((v - SQRT_2).abs() < 1e-15);
        }
    }

    #[test]
    fn threshold_cancellation() {
        let v = threshold_gp(KernelFamily::SquaredExponential, 32.0, 32, 2, 1.0, 1.0).unwrap();
        assert!((v - SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn threshold_matern() {
        // 0.5 * sqrt(8) * 32^(1/5) = sqrt(8)
        let v = threshold_gp(KernelFamily::Matern52, 32.0, 1, 1, 2.0, 0.5).unwrap();
        assert!((v - 2.828_427_124_746_19).abs() < 1e-12, "{v}");
    }

    #[test]
    fn threshold_monotone() {
        let f = KernelFamily::SquaredExponential;
        let mut prev = f64::INFINITY;
        for t in 1..200 {
            let v = threshold_gp(f, 10.0, t, 2, 5.0, 1.0).unwrap();
            assert!(v < prev);
            prev = v;
        }
        let a = threshold_gp(f, 10.0, 7, 2, 5.0, 0.5).unwrap();
        let b = threshold_gp(f, 10.0, 7, 2, 5.0, 0.6).unwrap();
        assert!(b > a);
    }

    #[test]
    fn threshold_rejects_non_positive() {
        let f = KernelFamily::Matern32;
        assert!(threshold_gp(f, 0.0, 1, 1, 1.0, 1.0).is_err());
        assert!(threshold_gp(f, 1.0, 0, 1, 1.0, 1.0).is_err());
        assert!(threshold_gp(f, 1.0, 1, 0, 1.0, 1.0).is_err());
        assert!(threshold_gp(f, 1.0, 1, 1, 0.0, 1.0).is_err());
        assert!(threshold_gp(f, 1.0, 1, 1, 1.0, -1.0).is_err());
    }

    fn labeler(lambda: f64, normalize: bool) -> GpLabeler {
        let kernel = KernelSpec::new(KernelFamily::SquaredExponential, 0.3, 2).unwrap();
        let mut model = GpModelConfig::with_defaults(kernel, 0.1);
        model.normalize_labels = normalize;
        GpLabeler::new(GpLabelerConfig {
            cost: 10.0,
            lambda,
            model,
        })
        .unwrap()
    }

    fn f(x: &[f64]) -> f64 {
        (3.0 * x[0]).sin() + x[1] * x[1]
    }

    fn grid_point(i: usize) -> [f64; 2] {
        let a = (i as f64 * 0.618_033_988_75).fract();
        let b = (i as f64 * 0.754_877_666_25).fract();
        [a, b]
    }

    #[test]
    fn initialization_forces_labels_then_tunes() {
        let mut p = labeler(1.0, true);
        for i in 1..=10 {
            let x = grid_point(i);
            let out = p.step(&x, &mut || Ok(f(&x))).unwrap();
            assert!(out.labeled && out.forced);
            assert_eq!(p.model().is_tuned(), i == 10);
        }
        let x = grid_point(11);
        let out = p.step(&x, &mut || Ok(f(&x))).unwrap();
        assert!(!out.forced);
        assert_eq!(out.labeled, out.uncertainty > out.threshold.unwrap());
    }

    #[test]
    fn huge_lambda_stops_labeling_after_init() {
        // tau(t) > 1 >= prior std for every t <= 300
        let mut p = labeler(1e3, false);
        let mut labels = 0;
        for i in 1..=300 {
            let x = grid_point(i);
            let out = p.step(&x, &mut || Ok(f(&x))).unwrap();
            assert!(out.threshold.unwrap() > 1.0);
            labels += usize::from(out.labeled);
        }
        assert_eq!(labels, 10);
    }

    #[test]
    fn oracle_errors_propagate() {
        let mut p = labeler(1.0, true);
        let err = p
            .step(&[0.5, 0.5], &mut || Err(Error::Oracle("offline".into())))
            .unwrap_err();
        assert!(matches!(err, Error::Oracle(_)));
    }

    #[test]
    fn label_scale_is_population_moments() {
        let s = LabelScale::from_labels(&[1.0, 3.0], 0.0);
        assert_eq!(s.offset, 2.0);
        assert_eq!(s.scale, 1.0);
        let s = LabelScale::from_labels(&[0.0, 4.0], 0.0);
        assert_eq!((s.offset, s.scale), (2.0, 2.0));
        assert_eq!(LabelScale::from_labels(&[5.0], 0.0).scale, 1.0);
        assert_eq!(LabelScale::from_labels(&[5.0, 5.0], 0.0).scale, 1.0);
    }

    #[test]
    fn label_scale_removes_noise_variance() {
        // population variance 4, noise variance 1
        let s = LabelScale::from_labels(&[0.0, 4.0], 1.0);
        assert!((s.scale - 3f64.sqrt()).abs() < 1e-15);
        // noise larger than the spread: floored at 5% of the variance
        let s = LabelScale::from_labels(&[0.0, 4.0], 10.0);
        assert!((s.scale - 0.2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn predictions_after_init_track_function() {
        let mut p = labeler(0.2, true);
        let mut late_err = 0.0;
        for i in 1..=200 {
            let x = grid_point(i);
            let out = p.step(&x, &mut || Ok(f(&x))).unwrap();
            if i > 150 {
                late_err += (out.prediction - f(&x)).abs();
            }
        }
        assert!(late_err / 50.0 < 0.1, "{}", late_err / 50.0);
    }
}
