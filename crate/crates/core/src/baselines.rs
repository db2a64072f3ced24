//! Single-question aggregation baselines. Each returns the probability the
//! method places on answer `A`; hard methods return 1, 0 or 0.5 on a tie.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::dataset::{Answer, ResponseDataset};

/// Clamp applied by [`log_pool`] so a single 0 or 1 cannot annihilate the pool.
pub const LOG_POOL_EPSILON: f64 = 1e-6;

/// Vote share and mean prediction closer than this are a surprisingly
/// popular tie.
pub const SP_TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum BaselineError {
    #[error("no votes")]
    NoVotes,
    #[error("no predictions")]
    NoPredictions,
    #[error("no probabilities")]
    NoProbabilities,
    #[error("question {0} has no usable responses for this method")]
    EmptyQuestion(String),
    #[error("method needs confidences, dataset has none")]
    MissingConfidences,
}

fn hard(ord: Ordering) -> f64 {
    match ord {
        Ordering::Greater => 1.0,
        Ordering::Less => 0.0,
        Ordering::Equal => 0.5,
    }
}

pub fn majority_vote(votes: &[Answer]) -> Result<f64, BaselineError> {
    if votes.is_empty() {
        return Err(BaselineError::NoVotes);
    }
    let a = votes.iter().filter(|v| v.is_a()).count();
    Ok(hard(a.cmp(&(votes.len() - a))))
}

/// `A` wins when its vote share exceeds the mean predicted share of `A`.
pub fn surprisingly_popular(votes: &[Answer], predictions: &[f64]) -> Result<f64, BaselineError> {
    if votes.is_empty() {
        return Err(BaselineError::NoVotes);
    }
    if predictions.is_empty() {
        return Err(BaselineError::NoPredictions);
    }
    let share = votes.iter().filter(|v| v.is_a()).count() as f64 / votes.len() as f64;
    let predicted = predictions.iter().sum::<f64>() / predictions.len() as f64;
    let diff = share - predicted;
    // Differences at rounding level count as ties so that relabelling
    // (p -> 1 - p, itself inexact) maps ties to ties.
    Ok(if diff.abs() <= SP_TIE_TOLERANCE { 0.5 } else { hard(diff.total_cmp(&0.0)) })
}

pub fn linear_pool(probs: &[f64]) -> Result<f64, BaselineError> {
    if probs.is_empty() {
        return Err(BaselineError::NoProbabilities);
    }
    Ok(probs.iter().sum::<f64>() / probs.len() as f64)
}

/// Normalized geometric mean `g_A / (g_A + g_B)` of the probabilities on each
/// answer, after clamping to `[eps, 1 - eps]`.
pub fn log_pool(probs: &[f64]) -> Result<f64, BaselineError> {
    if probs.is_empty() {
        return Err(BaselineError::NoProbabilities);
    }
    let n = probs.len() as f64;
    let (mut la, mut lb) = (0.0, 0.0);
    for p in probs {
        let p = p.clamp(LOG_POOL_EPSILON, 1.0 - LOG_POOL_EPSILON);
        la += p.ln();
        lb += (1.0 - p).ln();
    }
    let (la, lb) = (la / n, lb / n);
    // g_A / (g_A + g_B) = sigmoid(la - lb)
    Ok(1.0 / (1.0 + (lb - la).exp()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Baseline {
    Majority,
    SurprisinglyPopular,
    LinearPool,
    LogPool,
}

impl Baseline {
    pub const ALL: [Baseline; 4] =
        [Baseline::Majority, Baseline::SurprisinglyPopular, Baseline::LinearPool, Baseline::LogPool];

    pub fn name(self) -> &'static str {
        match self {
            Baseline::Majority => "majority",
            Baseline::SurprisinglyPopular => "sp",
            Baseline::LinearPool => "pool-linear",
            Baseline::LogPool => "pool-log",
        }
    }

    pub fn is_hard(self) -> bool {
        matches!(self, Baseline::Majority | Baseline::SurprisinglyPopular)
    }
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Baseline {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Baseline::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| format!("unknown baseline {s:?}"))
    }
}

/// Applies a baseline to every question, skipping missing entries.
pub fn run_baseline(ds: &ResponseDataset, method: Baseline) -> Result<Vec<f64>, BaselineError> {
    let signed = match method {
        Baseline::LinearPool | Baseline::LogPool => {
            Some(ds.signed_probabilities().ok_or(BaselineError::MissingConfidences)?)
        }
        _ => None,
    };
    (0..ds.n_questions())
        .map(|q| {
            let resp = ds.question(q);
            let votes: Vec<Answer> = resp.votes.iter().flatten().copied().collect();
            let out = match method {
                Baseline::Majority => majority_vote(&votes),
                Baseline::SurprisinglyPopular => {
                    let preds: Vec<f64> = resp.predictions.iter().flatten().copied().collect();
                    surprisingly_popular(&votes, &preds)
                }
                Baseline::LinearPool | Baseline::LogPool => {
                    let probs: Vec<f64> =
                        signed.as_ref().expect("pools have probabilities")[q].iter().flatten().copied().collect();
                    if method == Baseline::LinearPool {
                        linear_pool(&probs)
                    } else {
                        log_pool(&probs)
                    }
                }
            };
            out.map_err(|_| BaselineError::EmptyQuestion(ds.question_ids()[q].clone()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use Answer::{A, B};

    #[test]
    fn majority_examples() {
        assert_eq!(majority_vote(&[A, A, B]).unwrap(), 1.0);
        assert_eq!(majority_vote(&[A, B]).unwrap(), 0.5);
        assert_eq!(majority_vote(&[B, B, B]).unwrap(), 0.0);
        assert_eq!(majority_vote(&[]), Err(BaselineError::NoVotes));
    }

    #[test]
    fn sp_examples() {
        let seventy: Vec<Answer> = [vec![A; 7], vec![B; 3]].concat();
        assert_eq!(surprisingly_popular(&seventy, &[0.75; 10]).unwrap(), 0.0);
        assert_eq!(surprisingly_popular(&[A, B], &[0.5, 0.5]).unwrap(), 0.5);
        let sixty: Vec<Answer> = [vec![A; 3], vec![B; 2]].concat();
        assert_eq!(surprisingly_popular(&sixty, &[0.4]).unwrap(), 1.0);
        assert_eq!(surprisingly_popular(&[A], &[]), Err(BaselineError::NoPredictions));
    }

    #[test]
    fn pool_examples() {
        assert!((linear_pool(&[0.6, 0.8]).unwrap() - 0.7).abs() < 1e-15);
        assert_eq!(linear_pool(&[1.0, 0.0, 0.5]).unwrap(), 0.5);
        assert!((log_pool(&[0.8, 0.8]).unwrap() - 0.8).abs() < 1e-12);
        let want = 0.45f64.sqrt() / (0.45f64.sqrt() + 0.05f64.sqrt());
        assert!((log_pool(&[0.9, 0.5]).unwrap() - want).abs() < 1e-12);
        assert!((log_pool(&[0.3, 0.7]).unwrap() - 0.5).abs() < 1e-15);
        assert!(log_pool(&[0.0, 1.0, 1.0]).unwrap() > 0.5);
    }
}
