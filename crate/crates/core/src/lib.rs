//! Cost-aware active labeling on data streams.
//!
//! Each round an input arrives and the learner must emit a prediction for its
//! (hidden) value. It may first pay a fixed cost `B` to observe a noisy label.
//! The loss after `T` rounds is `B * N_T + sum_t |f(x_t) - p_t|`.
//!
//! Two threshold policies are provided:
//!
//! * [`discrete::DiscretePolicy`] for a finite set of input types, labeling when
//!   the sub-Gaussian confidence radius of a type's sample mean exceeds
//!   `lambda * B^(1/3) * M^(-1/3)`.
//! * [`gp_labeler::GpLabeler`] for smooth functions on `[0,1]^d`, labeling when
//!   the Gaussian-process posterior standard deviation exceeds a cost- and
//!   time-dependent threshold.
//!
//! [`baselines`] holds the Random Select and VAR-UNCERTAINTY comparison rules,
//! [`streams`] the arrival patterns and ground-truth tasks, and [`harness`] the
//! seeded multi-trial runner with CSV/SVG output.

pub mod baselines;
pub mod discrete;
pub mod error;
pub mod gp;
pub mod gp_labeler;
pub mod harness;
pub mod kernels;
pub mod ledger;
pub mod policy;
pub mod streams;

pub use error::{Error, Result};
