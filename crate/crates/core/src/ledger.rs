//! Loss accounting shared by every policy.
//!
//! The ledger charges `B` per label and adds the absolute prediction error of
//! every round, so after `t` rounds the running total is `B * N_t + sum |f(x_s) - p_s|`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One round as seen by the harness.
///
/// `true_value` is the noiseless target; it is only ever filled in by the
/// harness after the policy has committed to its prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub t: usize,
    pub labeled: bool,
    pub prediction: f64,
    pub true_value: f64,
    pub observed_label: Option<f64>,
    pub prediction_error: f64,
    pub cumulative_loss: f64,
}

impl RoundRecord {
    /// Builds a record and charges it to `ledger`.
    ///
    /// `observed_label` must be `Some` exactly when the round was labeled.
    pub fn charge(
        ledger: &mut LossLedger,
        t: usize,
        prediction: f64,
        true_value: f64,
        observed_label: Option<f64>,
    ) -> Result<Self> {
        let prediction_error = (true_value - prediction).abs();
        if prediction_error.is_nan() {
            return Err(Error::invalid(format!(
                "round {t}: prediction error is NaN (prediction {prediction}, truth {true_value})"
            )));
        }
        let labeled = observed_label.is_some();
        let cumulative_loss = ledger.record_round(labeled, prediction_error)?;
        Ok(RoundRecord {
            t,
            labeled,
            prediction,
            true_value,
            observed_label,
            prediction_error,
            cumulative_loss,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossLedger {
    labeling_cost: f64,
    label_count: usize,
    rounds: usize,
    error_sum: f64,
}

impl LossLedger {
    pub fn new(labeling_cost: f64) -> Result<Self> {
        if !(labeling_cost >= 0.0 && labeling_cost.is_finite()) {
            return Err(Error::invalid(format!(
                "labeling cost must be finite and >= 0, got {labeling_cost}"
            )));
        }
        Ok(LossLedger {
            labeling_cost,
            label_count: 0,
            rounds: 0,
            error_sum: 0.0,
        })
    }

    /// Adds one round and returns the cumulative loss after it.
    pub fn record_round(&mut self, labeled: bool, prediction_error: f64) -> Result<f64> {
        if !(prediction_error >= 0.0) {
            return Err(Error::invalid(format!(
                "prediction error must be >= 0, got {prediction_error}"
            )));
        }
        self.rounds += 1;
        if labeled {
            self.label_count += 1;
        }
        self.error_sum += prediction_error;
        Ok(self.total_loss())
    }

    pub fn total_loss(&self) -> f64 {
        self.labeling_cost * self.label_count as f64 + self.error_sum
    }

    pub fn labeling_cost(&self) -> f64 {
        self.labeling_cost
    }

    pub fn label_count(&self) -> usize {
        self.label_count
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn error_sum(&self) -> f64 {
        self.error_sum
    }

    /// `L_t / t`; zero before the first round.
    pub fn average_loss(&self) -> f64 {
        if self.rounds == 0 {
            0.0
        } else {
            self.total_loss() / self.rounds as f64
        }
    }
}

/// Recomputes `B * N + sum(error)` from a list of records, independent of any ledger.
pub fn fold_total_loss(records: &[RoundRecord], labeling_cost: f64) -> f64 {
    let (labels, errors) = records.iter().fold((0usize, 0.0f64), |(n, e), r| {
        (n + usize::from(r.labeled), e + r.prediction_error)
    });
    labeling_cost * labels as f64 + errors
}

/// Average-loss curve `L_t / t` read off the stored cumulative losses.
pub fn average_loss_curve(records: &[RoundRecord]) -> Vec<f64> {
    records
        .iter()
        .map(|r| r.cumulative_loss / r.t as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pure_labeling_cost() {
        let mut ledger = LossLedger::new(10.0).unwrap();
        let mut last = 0.0;
        for _ in 0..3 {
            last = ledger.record_round(true, 0.0).unwrap();
        }
        assert_eq!(last, 30.0);
        assert_eq!(ledger.label_count(), 3);
    }

    #[test]
    fn pure_error_sum() {
        let mut ledger = LossLedger::new(0.0).unwrap();
        let mut last = 0.0;
        for _ in 0..4 {
            last = ledger.record_round(false, 0.5).unwrap();
        }
        assert_eq!(last, 2.0);
        assert_eq!(ledger.label_count(), 0);
    }

    #[test]
    fn mixed_rounds() {
        let mut ledger = LossLedger::new(10.0).unwrap();
        ledger.record_round(true, 0.1).unwrap();
        ledger.record_round(false, 0.3).unwrap();
        let total = ledger.record_round(true, 0.0).unwrap();
        let expected = 10.0 + 0.1 + 0.3 + 10.0 + 0.0;
        assert!((total - expected).abs() < 1e-12, "{total}");
    }

    #[test]
    fn negative_error_rejected() {
        let mut ledger = LossLedger::new(1.0).unwrap();
        assert!(matches!(
            ledger.record_round(false, -1e-9),
            Err(Error::InvalidArgument(_))
        ));
        assert!(ledger.record_round(false, f64::NAN).is_err());
        assert_eq!(ledger.rounds(), 0);
    }

    #[test]
    fn observed_label_iff_labeled() {
        let mut ledger = LossLedger::new(2.0).unwrap();
        let a = RoundRecord::charge(&mut ledger, 1, 0.25, 0.5, Some(0.4)).unwrap();
        let b = RoundRecord::charge(&mut ledger, 2, 0.25, 0.0, None).unwrap();
        assert!(a.labeled && a.observed_label.is_some());
        assert!(!b.labeled && b.observed_label.is_none());
        assert_eq!(a.prediction_error, 0.25);
        assert_eq!(b.cumulative_loss, 2.0 + 0.25 + 0.25);
    }

    proptest! {
        #[test]
        fn ledger_matches_independent_fold(
            cost in 0.0f64..200.0,
            rounds in prop::collection::vec((any::<bool>(), 0.0f64..5.0), 1..400),
        ) {
            let mut ledger = LossLedger::new(cost).unwrap();
            let mut records = Vec::with_capacity(rounds.len());
            for (i, &(labeled, err)) in rounds.iter().enumerate() {
                let label = labeled.then_some(0.0);
                records.push(RoundRecord::charge(&mut ledger, i + 1, err, 0.0, label).unwrap());
            }
            let folded = fold_total_loss(&records, cost);
            prop_assert!((folded - ledger.total_loss()).abs() <= 1e-12 * folded.max(1.0));
            prop_assert!(ledger.label_count() <= ledger.rounds());
            for w in records.windows(2) {
                prop_assert!(w[1].cumulative_loss >= w[0].cumulative_loss);
            }
            let curve = average_loss_curve(&records);
            let again = average_loss_curve(&records);
            prop_assert_eq!(
                curve.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                again.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
            );
        }
    }
}
