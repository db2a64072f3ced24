//! Elicitation data: votes, peer predictions and confidences for `Q`
//! questions answered by `N` respondents, plus the polarity transforms used
//! to probe answer-coding robustness.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One of the two answers to a binary question (equivalently, a world state).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Answer {
    A,
    B,
}

impl Answer {
    pub fn flip(self) -> Self {
        match self {
            Answer::A => Answer::B,
            Answer::B => Answer::A,
        }
    }

    pub fn is_a(self) -> bool {
        self == Answer::A
    }

    pub fn from_is_a(is_a: bool) -> Self {
        if is_a {
            Answer::A
        } else {
            Answer::B
        }
    }
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Answer::A => "A",
            Answer::B => "B",
        })
    }
}

/// Whether a question is coded as collected or with its answers swapped.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    #[default]
    Original,
    Reversed,
}

impl Polarity {
    pub fn toggle(self) -> Self {
        match self {
            Polarity::Original => Polarity::Reversed,
            Polarity::Reversed => Polarity::Original,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationIssue {
    pub location: String,
    pub rule: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub errors: Vec<ValidationIssue>,
    pub warnings: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }

    fn error(&mut self, location: impl Into<String>, rule: impl Into<String>) {
        self.errors.push(ValidationIssue {
            location: location.into(),
            rule: rule.into(),
        });
    }

    fn warn(&mut self, location: impl Into<String>, rule: impl Into<String>) {
        self.warnings.push(ValidationIssue {
            location: location.into(),
            rule: rule.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.errors.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{}: {}", e.location, e.rule)?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid dataset: {0}")]
    Invalid(ValidationReport),
    #[error("question index {index} out of range for {len} questions")]
    IndexOutOfRange { index: usize, len: usize },
}

/// `Q x N` response matrices. Immutable once built; transforms return new
/// datasets.
#[derive(Clone, Debug, PartialEq)]
pub struct ResponseDataset {
    question_ids: Vec<String>,
    votes: Vec<Vec<Option<Answer>>>,
    predictions: Vec<Vec<Option<f64>>>,
    confidences: Option<Vec<Vec<Option<f64>>>>,
    answer_key: Option<Vec<Answer>>,
    polarity: Vec<Polarity>,
    warnings: Vec<ValidationIssue>,
}

/// Borrowed view of one question's responses.
#[derive(Clone, Copy, Debug)]
pub struct QuestionResponses<'a> {
    pub votes: &'a [Option<Answer>],
    pub predictions: &'a [Option<f64>],
    pub confidences: Option<&'a [Option<f64>]>,
}

impl<'a> QuestionResponses<'a> {
    pub fn n_respondents(&self) -> usize {
        self.votes.len()
    }

    pub fn n_votes(&self) -> usize {
        self.votes.iter().flatten().count()
    }

    /// Fraction of non-missing votes that are `A`; `None` without votes.
    pub fn vote_fraction_a(&self) -> Option<f64> {
        let n = self.n_votes();
        (n > 0).then(|| self.votes.iter().flatten().filter(|v| v.is_a()).count() as f64 / n as f64)
    }
}

impl ResponseDataset {
    /// Builds and validates a dataset. Fails with the full report if any
    /// rule is violated; warnings are retained on the dataset.
    pub fn new(
        question_ids: Vec<String>,
        votes: Vec<Vec<Option<Answer>>>,
        predictions: Vec<Vec<Option<f64>>>,
        confidences: Option<Vec<Vec<Option<f64>>>>,
        answer_key: Option<Vec<Answer>>,
    ) -> Result<Self, DatasetError> {
        let q = question_ids.len();
        let polarity = vec![Polarity::Original; q];
        Self::with_polarity(question_ids, votes, predictions, confidences, answer_key, polarity)
    }

    pub fn with_polarity(
        question_ids: Vec<String>,
        votes: Vec<Vec<Option<Answer>>>,
        predictions: Vec<Vec<Option<f64>>>,
        confidences: Option<Vec<Vec<Option<f64>>>>,
        answer_key: Option<Vec<Answer>>,
        polarity: Vec<Polarity>,
    ) -> Result<Self, DatasetError> {
        let mut ds = ResponseDataset {
            question_ids,
            votes,
            predictions,
            confidences,
            answer_key,
            polarity,
            warnings: Vec::new(),
        };
        let report = ds.validate();
        if !report.is_ok() {
            return Err(DatasetError::Invalid(report));
        }
        ds.warnings = report.warnings;
        Ok(ds)
    }

    /// Checks every structural and range rule.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        let q = self.question_ids.len();
        if q == 0 {
            report.error("dataset", "at least one question is required");
            return report;
        }
        let n = self.votes.first().map_or(0, Vec::len);
        if n == 0 {
            report.error("dataset", "at least one respondent is required");
        }
        if self.votes.len() != q {
            report.error("votes", format!("expected {q} rows, found {}", self.votes.len()));
        }
        if self.predictions.len() != q {
            report.error(
                "predictions",
                format!("expected {q} rows, found {}", self.predictions.len()),
            );
        }
        if self.polarity.len() != q {
            report.error("polarity", format!("expected {q} entries"));
        }
        if let Some(key) = &self.answer_key {
            if key.len() != q {
                report.error("key", format!("expected {q} entries, found {}", key.len()));
            }
        }
        if let Some(conf) = &self.confidences {
            if conf.len() != q {
                report.error("confidences", format!("expected {q} rows, found {}", conf.len()));
            }
        }
        if !report.is_ok() {
            return report;
        }

        let mut warned_low_conf = false;
        for qi in 0..q {
            let qid = &self.question_ids[qi];
            let votes = &self.votes[qi];
            if votes.len() != n {
                report.error(format!("votes[{qid}]"), format!("expected {n} respondents"));
                continue;
            }
            if votes.iter().all(Option::is_none) {
                report.error(format!("votes[{qid}]"), "at least one non-missing vote required");
            }
            let preds = &self.predictions[qi];
            if preds.len() != n {
                report.error(format!("predictions[{qid}]"), format!("expected {n} respondents"));
            } else {
                for (r, p) in preds.iter().enumerate() {
                    if let Some(p) = p {
                        if !(0.0..=1.0).contains(p) {
                            report.error(
                                format!("predictions[{qid}][{r}]"),
                                format!("value {p} outside [0, 1]"),
                            );
                        }
                    }
                }
            }
            if let Some(conf) = &self.confidences {
                let row = &conf[qi];
                if row.len() != n {
                    report.error(format!("confidences[{qid}]"), format!("expected {n} respondents"));
                    continue;
                }
                for (r, c) in row.iter().enumerate() {
                    let Some(c) = c else { continue };
                    if !(0.0..=1.0).contains(c) {
                        report.error(
                            format!("confidences[{qid}][{r}]"),
                            format!("value {c} outside [0, 1]"),
                        );
                    } else if votes[r].is_none() {
                        report.error(
                            format!("confidences[{qid}][{r}]"),
                            "confidence present without a vote",
                        );
                    } else if *c < 0.5 && !warned_low_conf {
                        warned_low_conf = true;
                        report.warn(
                            format!("confidences[{qid}][{r}]"),
                            "confidence below 0.5 (tolerated)",
                        );
                    }
                }
            }
        }
        report
    }

    pub fn n_questions(&self) -> usize {
        self.question_ids.len()
    }

    pub fn n_respondents(&self) -> usize {
        self.votes[0].len()
    }

    pub fn question_ids(&self) -> &[String] {
        &self.question_ids
    }

    pub fn votes(&self) -> &[Vec<Option<Answer>>] {
        &self.votes
    }

    pub fn predictions(&self) -> &[Vec<Option<f64>>] {
        &self.predictions
    }

    pub fn confidences(&self) -> Option<&[Vec<Option<f64>>]> {
        self.confidences.as_deref()
    }

    pub fn answer_key(&self) -> Option<&[Answer]> {
        self.answer_key.as_deref()
    }

    pub fn polarity(&self) -> &[Polarity] {
        &self.polarity
    }

    pub fn warnings(&self) -> &[ValidationIssue] {
        &self.warnings
    }

    pub fn has_predictions(&self) -> bool {
        self.predictions.iter().flatten().any(Option::is_some)
    }

    pub fn has_confidences(&self) -> bool {
        self.confidences
            .as_ref()
            .is_some_and(|c| c.iter().flatten().any(Option::is_some))
    }

    pub fn question(&self, q: usize) -> QuestionResponses<'_> {
        QuestionResponses {
            votes: &self.votes[q],
            predictions: &self.predictions[q],
            confidences: self.confidences.as_ref().map(|c| c[q].as_slice()),
        }
    }

    /// Probability each respondent places on `A`: the confidence if they
    /// voted `A`, its complement otherwise. `None` where either is missing.
    pub fn signed_probabilities(&self) -> Option<Vec<Vec<Option<f64>>>> {
        let conf = self.confidences.as_ref()?;
        Some(
            self.votes
                .iter()
                .zip(conf)
                .map(|(vrow, crow)| {
                    vrow.iter()
                        .zip(crow)
                        .map(|(v, c)| match (v, c) {
                            (Some(Answer::A), Some(c)) => Some(*c),
                            (Some(Answer::B), Some(c)) => Some(1.0 - c),
                            _ => None,
                        })
                        .collect()
                })
                .collect(),
        )
    }

    /// Swaps the coding of the selected questions: votes `A <-> B`,
    /// predictions `p -> 1 - p`, key flipped; confidences are unchanged.
    pub fn reverse_questions(&self, idx: &BTreeSet<usize>) -> Result<Self, DatasetError> {
        let q = self.n_questions();
        if let Some(&bad) = idx.iter().find(|&&i| i >= q) {
            return Err(DatasetError::IndexOutOfRange { index: bad, len: q });
        }
        let mut out = self.clone();
        for &qi in idx {
            for v in out.votes[qi].iter_mut().flatten() {
                *v = v.flip();
            }
            for p in out.predictions[qi].iter_mut().flatten() {
                *p = 1.0 - *p;
            }
            if let Some(key) = out.answer_key.as_mut() {
                key[qi] = key[qi].flip();
            }
            out.polarity[qi] = out.polarity[qi].toggle();
        }
        Ok(out)
    }

    /// Removes every peer prediction.
    pub fn lesion_predictions(&self) -> Self {
        let mut out = self.clone();
        for row in &mut out.predictions {
            row.iter_mut().for_each(|p| *p = None);
        }
        out
    }

    pub fn with_answer_key(&self, key: Option<Vec<Answer>>) -> Result<Self, DatasetError> {
        Self::with_polarity(
            self.question_ids.clone(),
            self.votes.clone(),
            self.predictions.clone(),
            self.confidences.clone(),
            key,
            self.polarity.clone(),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Half {
    First,
    Second,
}

/// Indices of the first or second half of `q` questions; with odd `q` the
/// first half takes the extra question.
pub fn split_half_indices(q: usize, half: Half) -> BTreeSet<usize> {
    let cut = q.div_ceil(2);
    match half {
        Half::First => (0..cut).collect(),
        Half::Second => (cut..q).collect(),
    }
}
