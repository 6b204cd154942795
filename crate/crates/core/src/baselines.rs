//! Comparison policies: Random Select and VAR-UNCERTAINTY.
//!
//! Both reuse the predictor of their setting (per-type sample mean, or the GP
//! posterior mean) and its uncertainty measure. Like the threshold policies
//! they label a discrete type's first arrival (the sample mean is undefined
//! before it) and the GP initialization rounds unconditionally; the rule
//! below only decides the remaining rounds.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::discrete::TypeTable;
use crate::error::{Error, Result};
use crate::gp_labeler::{GpModel, GpModelConfig};
use crate::policy::{LabelOracle, StepOutcome};

/// One Bernoulli(`probability`) draw.
pub fn random_select_step<R: Rng + ?Sized>(probability: f64, rng: &mut R) -> Result<bool> {
    if !(0.0..=1.0).contains(&probability) {
        return Err(Error::invalid(format!(
            "label probability must lie in [0, 1], got {probability}"
        )));
    }
    Ok(rng.random_bool(probability))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarUncertaintyState {
    theta: f64,
}

impl Default for VarUncertaintyState {
    fn default() -> Self {
        VarUncertaintyState { theta: 1.0 }
    }
}

impl VarUncertaintyState {
    pub fn new(theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::invalid(format!("theta must be > 0, got {theta}")));
        }
        Ok(VarUncertaintyState { theta })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }
}

/// Labels when `uncertainty < theta`, then halves theta; otherwise doubles it.
pub fn var_uncertainty_step(
    state: VarUncertaintyState,
    uncertainty: f64,
) -> (bool, VarUncertaintyState) {
    let decision = uncertainty < state.theta;
    let theta = if decision {
        state.theta / 2.0
    } else {
        state.theta * 2.0
    };
    (decision, VarUncertaintyState { theta })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BaselineRule {
    RandomSelect { probability: f64 },
    VarUncertainty(VarUncertaintyState),
}

impl BaselineRule {
    pub fn random_select(probability: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&probability) {
            return Err(Error::invalid(format!(
                "label probability must lie in [0, 1], got {probability}"
            )));
        }
        Ok(BaselineRule::RandomSelect { probability })
    }

    pub fn var_uncertainty() -> Self {
        BaselineRule::VarUncertainty(VarUncertaintyState::default())
    }

    /// Returns the decision and the threshold it was compared against.
    fn decide<R: Rng + ?Sized>(
        &mut self,
        uncertainty: f64,
        rng: &mut R,
    ) -> Result<(bool, Option<f64>)> {
        match self {
            BaselineRule::RandomSelect { probability } => {
                Ok((random_select_step(*probability, rng)?, None))
            }
            BaselineRule::VarUncertainty(state) => {
                let theta = state.theta();
                let (decision, next) = var_uncertainty_step(*state, uncertainty);
                *state = next;
                Ok((decision, Some(theta)))
            }
        }
    }
}

/// A baseline rule over the per-type sample-mean predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteBaseline {
    table: TypeTable,
    rule: BaselineRule,
}

impl DiscreteBaseline {
    pub fn new(num_types: usize, delta: f64, sigma: f64, rule: BaselineRule) -> Result<Self> {
        Ok(DiscreteBaseline {
            table: TypeTable::new(num_types, delta, sigma)?,
            rule,
        })
    }

    pub fn table(&self) -> &TypeTable {
        &self.table
    }

    pub fn rule(&self) -> &BaselineRule {
        &self.rule
    }

    pub fn step<R: Rng + ?Sized>(
        &mut self,
        k: usize,
        rng: &mut R,
        oracle: &mut LabelOracle<'_>,
    ) -> Result<StepOutcome> {
        self.table.arrive(k)?;
        let uncertainty = self.table.radius(k)?;
        let forced = self.table.stats(k).map_or(0, |s| s.labels) == 0;
        let (labeled, threshold) = if forced {
            (true, None)
        } else {
            self.rule.decide(uncertainty, rng)?
        };
        let observed_label = if labeled {
            Some(self.table.buy_label(k, oracle)?)
        } else {
            None
        };
        Ok(StepOutcome {
            labeled,
            observed_label,
            prediction: self.table.prediction(k),
            uncertainty,
            threshold,
            forced,
        })
    }
}

/// A baseline rule over the GP posterior-mean predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpBaseline {
    model: GpModel,
    rule: BaselineRule,
    round: usize,
}

impl GpBaseline {
    pub fn new(config: GpModelConfig, rule: BaselineRule) -> Result<Self> {
        Ok(GpBaseline {
            model: GpModel::new(config)?,
            rule,
            round: 0,
        })
    }

    pub fn model(&self) -> &GpModel {
        &self.model
    }

    pub fn rule(&self) -> &BaselineRule {
        &self.rule
    }

    pub fn step<R: Rng + ?Sized>(
        &mut self,
        x: &[f64],
        rng: &mut R,
        oracle: &mut LabelOracle<'_>,
    ) -> Result<StepOutcome> {
        let t = self.round + 1;
        let uncertainty = self.model.uncertainty(x)?;
        let forced = self.model.initializing(t);
        let (labeled, threshold) = if forced {
            (true, None)
        } else {
            self.rule.decide(uncertainty, rng)?
        };
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
            threshold,
            forced,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn degenerate_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..1000 {
            assert!(!random_select_step(0.0, &mut rng).unwrap());
            assert!(random_select_step(1.0, &mut rng).unwrap());
        }
        assert!(random_select_step(1.2, &mut rng).is_err());
        assert!(random_select_step(-0.1, &mut rng).is_err());
        assert!(random_select_step(f64::NAN, &mut rng).is_err());
    }

    #[test]
    fn fair_coin_rate() {
        // 3 sigma for n = 1e4 is 0.015 < 0.02
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 10_000;
        let hits = (0..n)
            .filter(|_| random_select_step(0.5, &mut rng).unwrap())
            .count();
        let rate = hits as f64 / n as f64;
        assert!((rate - 0.5).abs() <= 0.02, "{rate}");
    }

    #[test]
    fn var_uncertainty_rule() {
        let s = VarUncertaintyState::default();
        assert_eq!(
            var_uncertainty_step(s, 0.5),
            (true, VarUncertaintyState { theta: 0.5 })
        );
        assert_eq!(
            var_uncertainty_step(s, 2.0),
            (false, VarUncertaintyState { theta: 2.0 })
        );
        assert_eq!(
            var_uncertainty_step(s, f64::INFINITY),
            (false, VarUncertaintyState { theta: 2.0 })
        );
        // tie does not label
        assert!(!var_uncertainty_step(s, 1.0).0);
    }

    proptest! {
        #[test]
        fn theta_is_power_of_two(us in prop::collection::vec(prop_oneof![0.0f64..4.0, Just(f64::INFINITY)], 0..300)) {
            let mut s = VarUncertaintyState::default();
            let (mut labels, mut skips) = (0i32, 0i32);
            for u in us {
                let (d, next) = var_uncertainty_step(s, u);
                if d { labels += 1 } else { skips += 1 }
                s = next;
            }
            prop_assert_eq!(s.theta(), 2f64.powi(skips - labels));
        }
    }

    #[test]
    fn discrete_baseline_labels_first_arrival() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut b =
            DiscreteBaseline::new(3, 0.05, 0.1, BaselineRule::random_select(0.0).unwrap()).unwrap();
        let out = b.step(1, &mut rng, &mut || Ok(0.3)).unwrap();
        assert!(out.labeled && out.forced);
        for _ in 0..10 {
            let out = b.step(1, &mut rng, &mut || panic!("p = 0")).unwrap();
            assert!(!out.labeled);
            assert_eq!(out.prediction, 0.3);
        }
    }

    #[test]
    fn random_select_ignores_labels() {
        // same seed, different label values: identical decisions
        let run = |offset: f64| {
            let mut rng = ChaCha8Rng::seed_from_u64(77);
            let mut b =
                DiscreteBaseline::new(4, 0.05, 0.1, BaselineRule::random_select(0.5).unwrap())
                    .unwrap();
            (0..500)
                .map(|i| {
                    let y = offset + (i as f64 * 0.37).sin();
                    b.step(i % 4, &mut rng, &mut || Ok(y)).unwrap().labeled
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(0.0), run(5.0));
    }
}
