//! Possible-worlds aggregation of binary judgments.
//!
//! Respondents answer binary questions with a vote, a prediction of the
//! fraction of others voting `A`, and optionally a confidence. The engine
//! models each respondent as a noisy Bayesian who received a private signal
//! whose distribution depends on the (unknown) world, and infers the most
//! probable world per question by Metropolis–Hastings with the signals
//! marginalized out. Across questions it also infers each respondent's
//! information expertise.
//!
//! Alongside the model the crate carries the usual single-question baselines
//! (majority, surprisingly popular, linear and logarithmic pools), two
//! multi-question comparison models (Bayesian cultural consensus and a
//! cognitive hierarchy model), and the evaluation metrics used to compare
//! them.

pub mod baselines;
pub mod comparison;
pub mod dataset;
pub mod dist;
pub mod generator;
pub mod io;
pub mod mcmc;
pub mod metrics;
pub mod pwm;
pub mod report;
pub mod respondent;
pub mod rng;

pub use dataset::{Answer, Polarity, ResponseDataset, ValidationReport};
pub use generator::{QuestionParams, SimConfig};
pub use report::MethodReport;
pub use respondent::{Expertise, NoiseParams, Signal, SignalMatrix, WorldPrior};
