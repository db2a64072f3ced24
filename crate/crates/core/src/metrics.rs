//! Evaluation metrics: Cohen's kappa with tie doubling, Brier score, and the
//! respondent-level accuracy and correlation analysis.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Answer, ResponseDataset};
use crate::rng::{self, tag};

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("length mismatch: {0} vs {1}")]
    Length(usize, usize),
    #[error("need at least {need} items, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("control series are linearly dependent")]
    RankDeficient,
    #[error("dataset has no answer key")]
    NoKey,
}

/// A method's hard answer; `Tie` when it puts exactly 0.5 on each side.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HardAnswer {
    A,
    B,
    Tie,
}

impl HardAnswer {
    pub fn from_probability(p_a: f64) -> Self {
        if p_a > 0.5 {
            HardAnswer::A
        } else if p_a < 0.5 {
            HardAnswer::B
        } else {
            HardAnswer::Tie
        }
    }
}

impl From<Answer> for HardAnswer {
    fn from(a: Answer) -> Self {
        match a {
            Answer::A => HardAnswer::A,
            Answer::B => HardAnswer::B,
        }
    }
}

impl fmt::Display for HardAnswer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HardAnswer::A => "A",
            HardAnswer::B => "B",
            HardAnswer::Tie => "tie",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Kappa {
    pub kappa: f64,
    pub se: f64,
    /// Chance agreement was 1 (both sides constant on the same answer).
    pub degenerate: bool,
    /// At least one tie was scored by doubling.
    pub doubled: bool,
}

const PE_ONE: f64 = 1.0 - 1e-12;

/// Cohen's kappa of `pred` against `truth`. When any prediction is a tie
/// every item is duplicated: a decided item twice as itself, a tie once as
/// `A` and once as `B`, each copy paired with the item's truth. The standard
/// error is the large-sample one on the doubled set scaled by `sqrt(2)`,
/// which is the undoubled formula with the original item count.
pub fn cohens_kappa(pred: &[HardAnswer], truth: &[Answer]) -> Result<Kappa, MetricError> {
    if pred.len() != truth.len() {
        return Err(MetricError::Length(pred.len(), truth.len()));
    }
    if pred.is_empty() {
        return Err(MetricError::TooShort { need: 1, got: 0 });
    }
    let doubled = pred.contains(&HardAnswer::Tie);
    // Counts in half-units so ties split evenly.
    let (mut agree, mut pred_a, mut truth_a) = (0.0, 0.0, 0.0);
    for (p, t) in pred.iter().zip(truth) {
        let w_a = match p {
            HardAnswer::A => 1.0,
            HardAnswer::B => 0.0,
            HardAnswer::Tie => 0.5,
        };
        pred_a += w_a;
        truth_a += f64::from(u8::from(t.is_a()));
        agree += if t.is_a() { w_a } else { 1.0 - w_a };
    }
    let n = pred.len() as f64;
    let p_o = agree / n;
    let (fp, ft) = (pred_a / n, truth_a / n);
    let p_e = fp * ft + (1.0 - fp) * (1.0 - ft);
    if p_e >= PE_ONE {
        log::warn!("kappa undefined: chance agreement is 1");
        let kappa = if p_o >= PE_ONE { 1.0 } else { 0.0 };
        return Ok(Kappa { kappa, se: 0.0, degenerate: true, doubled });
    }
    let kappa = (p_o - p_e) / (1.0 - p_e);
    let se = (p_o * (1.0 - p_o) / (n * (1.0 - p_e).powi(2))).sqrt();
    Ok(Kappa { kappa, se, degenerate: false, doubled })
}

fn check_lengths(a: usize, b: usize) -> Result<(), MetricError> {
    if a != b {
        return Err(MetricError::Length(a, b));
    }
    if a == 0 {
        return Err(MetricError::TooShort { need: 1, got: 0 });
    }
    Ok(())
}

/// Mean squared error of the probability of `A` against the 0/1 truth.
pub fn brier(probs: &[f64], truth: &[Answer]) -> Result<f64, MetricError> {
    check_lengths(probs.len(), truth.len())?;
    Ok(probs
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - f64::from(u8::from(t.is_a()))).powi(2))
        .sum::<f64>()
        / probs.len() as f64)
}

pub const BOOTSTRAP_ITERATIONS: usize = 1000;

/// Standard deviation of the Brier score over `iterations` resamples of the
/// questions with replacement.
pub fn brier_bootstrap_se(
    probs: &[f64],
    truth: &[Answer],
    iterations: usize,
    seed: u64,
) -> Result<f64, MetricError> {
    check_lengths(probs.len(), truth.len())?;
    if iterations < 2 {
        return Err(MetricError::TooShort { need: 2, got: iterations });
    }
    let n = probs.len();
    let sq: Vec<f64> = probs
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - f64::from(u8::from(t.is_a()))).powi(2))
        .collect();
    let mut rng = rng::stream(seed, &[tag::BOOTSTRAP]);
    let scores: Vec<f64> = (0..iterations)
        .map(|_| (0..n).map(|_| sq[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    let mean = scores.iter().sum::<f64>() / iterations as f64;
    Ok((scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (iterations - 1) as f64).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RespondentAccuracy {
    pub answered: usize,
    pub kappa: Option<Kappa>,
    /// From signed probabilities, where the respondent gave confidences.
    pub brier: Option<f64>,
}

/// Each respondent's kappa against the key over the questions they
/// answered, and their Brier score where confidences exist.
pub fn respondent_accuracy(ds: &ResponseDataset) -> Result<Vec<RespondentAccuracy>, MetricError> {
    let key = ds.answer_key().ok_or(MetricError::NoKey)?;
    let signed = ds.signed_probabilities();
    Ok((0..ds.n_respondents())
        .map(|r| {
            let (mut pred, mut truth) = (Vec::new(), Vec::new());
            let (mut probs, mut ptruth) = (Vec::new(), Vec::new());
            for (q, row) in ds.votes().iter().enumerate() {
                if let Some(v) = row[r] {
                    pred.push(HardAnswer::from(v));
                    truth.push(key[q]);
                }
                if let Some(p) = signed.as_ref().and_then(|s| s[q][r]) {
                    probs.push(p);
                    ptruth.push(key[q]);
                }
            }
            RespondentAccuracy {
                answered: pred.len(),
                kappa: cohens_kappa(&pred, &truth).ok(),
                brier: brier(&probs, &ptruth).ok(),
            }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationMethod {
    Pearson,
    Spearman,
}

fn centred_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        log::warn!("correlation with a constant series; reported as 0");
        return 0.0;
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

/// Ranks starting at 1, ties sharing their average rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Pearson or Spearman correlation. A constant series gives 0.
pub fn correlate(x: &[f64], y: &[f64], method: CorrelationMethod) -> Result<f64, MetricError> {
    if x.len() != y.len() {
        return Err(MetricError::Length(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(MetricError::TooShort { need: 3, got: x.len() });
    }
    Ok(match method {
        CorrelationMethod::Pearson => centred_pearson(x, y),
        CorrelationMethod::Spearman => centred_pearson(&average_ranks(x), &average_ranks(y)),
    })
}

/// Columns with less than this fraction of their norm left after
/// orthogonalization count as linearly dependent.
const RANK_TOLERANCE: f64 = 1e-10;

/// Pearson correlation of the least-squares residuals of `x` and `y` on an
/// intercept and the `controls`.
pub fn partial_correlate(x: &[f64], y: &[f64], controls: &[&[f64]]) -> Result<f64, MetricError> {
    let n = x.len();
    if y.len() != n {
        return Err(MetricError::Length(n, y.len()));
    }
    if let Some(c) = controls.iter().find(|c| c.len() != n) {
        return Err(MetricError::Length(n, c.len()));
    }
    if n < controls.len() + 3 {
        return Err(MetricError::TooShort { need: controls.len() + 3, got: n });
    }
    // Modified Gram-Schmidt on [1, controls].
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(controls.len() + 1);
    let columns = std::iter::once(vec![1.0; n]).chain(controls.iter().map(|c| c.to_vec()));
    for mut v in columns {
        let norm0 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        for b in &basis {
            let d: f64 = v.iter().zip(b).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(b).for_each(|(a, b)| *a -= d * b);
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm0 == 0.0 || norm <= RANK_TOLERANCE * norm0 {
            return Err(MetricError::RankDeficient);
        }
        v.iter_mut().for_each(|a| *a /= norm);
        basis.push(v);
    }
    let residual = |s: &[f64]| -> Vec<f64> {
        let mut v = s.to_vec();
        for b in &basis {
            let d: f64 = v.iter().zip(b).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(b).for_each(|(a, b)| *a -= d * b);
        }
        v
    };
    let (rx, ry) = (residual(x), residual(y));
    let scale = |s: &[f64]| s.iter().map(|a| a * a).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let small = |r: &[f64], s: &[f64]| r.iter().map(|a| a * a).sum::<f64>().sqrt() <= RANK_TOLERANCE * scale(s);
    if small(&rx, x) || small(&ry, y) {
        log::warn!("a series is fully explained by the controls; partial correlation reported as 0");
        return Ok(0.0);
    }
    Ok(centred_pearson(&rx, &ry))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RespondentCovariates {
    pub answered: usize,
    /// Fraction of answered questions on which the respondent sided with
    /// the majority; a tied question counts 0.5.
    pub majority_fraction: Option<f64>,
    pub vote_a_fraction: Option<f64>,
}

pub fn respondent_covariates(ds: &ResponseDataset) -> Vec<RespondentCovariates> {
    let majority: Vec<Option<Answer>> = ds
        .votes()
        .iter()
        .map(|row| {
            let a = row.iter().flatten().filter(|v| v.is_a()).count();
            let b = row.iter().flatten().count() - a;
            match a.cmp(&b) {
                std::cmp::Ordering::Greater => Some(Answer::A),
                std::cmp::Ordering::Less => Some(Answer::B),
                std::cmp::Ordering::Equal => None,
            }
        })
        .collect();
    (0..ds.n_respondents())
        .map(|r| {
            let (mut answered, mut in_majority, mut voted_a) = (0usize, 0.0, 0usize);
            for (row, maj) in ds.votes().iter().zip(&majority) {
                if let Some(v) = row[r] {
                    answered += 1;
                    voted_a += usize::from(v.is_a());
                    in_majority += match maj {
                        Some(m) if *m == v => 1.0,
                        Some(_) => 0.0,
                        None => 0.5,
                    };
                }
            }
            let frac = |x: f64| (answered > 0).then(|| x / answered as f64);
            RespondentCovariates {
                answered,
                majority_fraction: frac(in_majority),
                vote_a_fraction: frac(voted_a as f64),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use HardAnswer as H;

    #[test]
    fn kappa_tie_doubling_example() {
        let k = cohens_kappa(&[H::A, H::Tie], &[Answer::A, Answer::B]).unwrap();
        assert!((k.kappa - 0.5).abs() < 1e-12);
        assert!(k.doubled);
    }

    #[test]
    fn kappa_degenerate() {
        let k = cohens_kappa(&[H::A, H::A], &[Answer::A, Answer::A]).unwrap();
        assert!(k.degenerate);
        assert_eq!(k.kappa, 1.0);
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }
}
