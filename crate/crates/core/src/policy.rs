//! Types shared by every labeling policy.

use crate::error::Result;

/// Label source handed to a policy for one round.
///
/// Calling it buys the noisy label for the current input; policies invoke it
/// at most once per round and only when they decide to label.
pub type LabelOracle<'a> = dyn FnMut() -> Result<f64> + 'a;

/// What a policy did on one round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub labeled: bool,
    /// The label bought this round, if any.
    pub observed_label: Option<f64>,
    pub prediction: f64,
    /// The uncertainty the decision was based on (confidence radius or
    /// posterior standard deviation), measured before any update this round.
    pub uncertainty: f64,
    /// The cutoff the uncertainty was compared against, when the rule has one.
    pub threshold: Option<f64>,
    /// True when the label was forced by an initialization phase rather than
    /// by the decision rule.
    pub forced: bool,
}
