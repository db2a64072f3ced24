//! Multi-question comparison models: Bayesian cultural consensus (votes
//! only) and a cognitive hierarchy model (signed probabilities), plus the
//! agreement-matrix unidimensionality check.

pub mod agreement;
pub mod bcc;
pub mod ch;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use agreement::{
    agreement_eigenratio, agreement_eigenratio_with, agreement_matrix, Agreement, EigenRatio, UNIDIMENSIONAL_RATIO,
};
pub use bcc::{bcc_competence, bcc_log_likelihood, run_bcc, simulate_bcc, BccResult, BccState};
pub use ch::{ch_perceived, run_ch, simulate_ch, ChResult, ChState};

#[derive(Debug, Error, PartialEq)]
pub enum ComparisonError {
    #[error("model needs at least 2 questions, got {0}")]
    TooFewQuestions(usize),
    #[error("agreement matrix needs at least 2 respondents, got {0}")]
    TooFewRespondents(usize),
    #[error("question {0} has no non-missing votes")]
    NoVotes(String),
    #[error("cognitive hierarchy model needs confidences, dataset has none")]
    MissingConfidences,
    #[error("invalid sampler configuration: {0}")]
    Config(String),
}

/// Chain budget and proposal scale for the comparison samplers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub n_burnin: usize,
    /// Iterations after burn-in.
    pub n_iter: usize,
    pub n_chains: usize,
    pub thin: usize,
    pub seed: u64,
    /// Random-walk standard deviation for every continuous parameter.
    pub proposal_sd: f64,
}

impl SamplerConfig {
    pub fn bcc(seed: u64) -> Self {
        SamplerConfig { n_burnin: 1_000, n_iter: 10_000, n_chains: 6, thin: 2, seed, proposal_sd: 0.1 }
    }

    pub fn ch(seed: u64) -> Self {
        SamplerConfig { n_burnin: 2_000, n_iter: 10_000, n_chains: 8, thin: 1, seed, proposal_sd: 0.1 }
    }

    pub fn validate(&self) -> Result<(), ComparisonError> {
        if self.n_iter == 0 || self.n_chains == 0 || self.thin == 0 {
            return Err(ComparisonError::Config("n_iter, n_chains and thin must be positive".into()));
        }
        if !(self.proposal_sd > 0.0 && self.proposal_sd.is_finite()) {
            return Err(ComparisonError::Config("proposal_sd must be positive".into()));
        }
        Ok(())
    }
}
