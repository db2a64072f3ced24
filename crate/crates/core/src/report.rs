//! Method-agnostic result records and their evaluation against a key.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{run_baseline, Baseline, BaselineError, LOG_POOL_EPSILON};
use crate::comparison::ch::LOGODDS_EPSILON;
use crate::comparison::{BccResult, ChResult};
use crate::dataset::ResponseDataset;
use crate::mcmc::{Diagnostics, ParamSummary};
use crate::metrics::{
    brier, brier_bootstrap_se, cohens_kappa, correlate, partial_correlate, respondent_accuracy,
    respondent_covariates, CorrelationMethod, HardAnswer, Kappa, MetricError,
};
use crate::pwm::PosteriorSummary;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    PwmSingle,
    PwmMulti,
    Baseline(Baseline),
    Bcc,
    Ch,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::PwmSingle,
        Method::PwmMulti,
        Method::Baseline(Baseline::Majority),
        Method::Baseline(Baseline::SurprisinglyPopular),
        Method::Baseline(Baseline::LinearPool),
        Method::Baseline(Baseline::LogPool),
        Method::Bcc,
        Method::Ch,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::PwmSingle => "pwm-single",
            Method::PwmMulti => "pwm-multi",
            Method::Baseline(b) => b.name(),
            Method::Bcc => "bcc",
            Method::Ch => "ch",
        }
    }

    pub fn is_stochastic(self) -> bool {
        !matches!(self, Method::Baseline(_))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Method::ALL.iter().map(|m| m.name()).collect();
            format!("unknown method {s:?} (expected one of {})", names.join(", "))
        })
    }
}

/// Output of any aggregation method on a dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: String,
    pub question_ids: Vec<String>,
    /// Probability placed on answer `A`, per question.
    pub p_a: Vec<f64>,
    pub answers: Vec<HardAnswer>,
    #[serde(default)]
    pub lesioned: bool,
    /// Posterior summaries of per-respondent parameters, by parameter name.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub respondent_params: BTreeMap<String, Vec<ParamSummary>>,
    /// Posterior summaries of per-question parameters, by parameter name.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub question_params: BTreeMap<String, Vec<Option<ParamSummary>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<Diagnostics>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub acceptance: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    /// Path of the run manifest that produced this report.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<String>,
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("report has {p} probabilities, {a} answers and {q} question ids")]
    Shape { p: usize, a: usize, q: usize },
    #[error("probability {value} for question {id} outside [0, 1]")]
    Probability { id: String, value: f64 },
    #[error("hard answer for question {0} disagrees with its probability")]
    Answer(String),
    #[error("question ids differ from the dataset's at position {index}: {report:?} vs {dataset:?}")]
    Mismatch { index: usize, report: String, dataset: String },
    #[error("report covers {report} questions, dataset has {dataset}")]
    Count { report: usize, dataset: usize },
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
}

impl MethodReport {
    pub fn new(method: impl Into<String>, question_ids: Vec<String>, p_a: Vec<f64>) -> Self {
        let answers = p_a.iter().map(|&p| HardAnswer::from_probability(p)).collect();
        MethodReport {
            method: method.into(),
            question_ids,
            p_a,
            answers,
            lesioned: false,
            respondent_params: BTreeMap::new(),
            question_params: BTreeMap::new(),
            diagnostics: None,
            acceptance: BTreeMap::new(),
            notes: Vec::new(),
            manifest: None,
        }
    }

    pub fn from_baseline(ds: &ResponseDataset, method: Baseline) -> Result<Self, BaselineError> {
        let mut r = Self::new(method.name(), ds.question_ids().to_vec(), run_baseline(ds, method)?);
        if method == Baseline::LogPool {
            r.notes.push(format!("probabilities clamped to [{LOG_POOL_EPSILON:e}, 1 - {LOG_POOL_EPSILON:e}]"));
        }
        Ok(r)
    }

    pub fn from_pwm(method: Method, ds: &ResponseDataset, post: &PosteriorSummary) -> Self {
        let mut r = Self::new(method.name(), ds.question_ids().to_vec(), post.p_world_a());
        let mut names: Vec<&String> = post.questions.iter().flat_map(|q| q.params.keys()).collect();
        names.sort();
        names.dedup();
        for name in names {
            let col = post.questions.iter().map(|q| q.params.get(name).copied()).collect();
            r.question_params.insert(name.clone(), col);
        }
        if let Some(e) = &post.expertise {
            r.respondent_params.insert("expertise".into(), e.clone());
        }
        r.diagnostics = Some(post.diagnostics());
        let mut acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
        for q in &post.questions {
            for (k, v) in &q.acceptance {
                let e = acc.entry(k.clone()).or_default();
                e.0 += v;
                e.1 += 1;
            }
        }
        r.acceptance = acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect();
        if let Some(a) = post.respondent_acceptance {
            r.acceptance.insert("expertise".into(), a);
        }
        r.lesioned = !ds.has_predictions();
        r
    }

    pub fn from_bcc(ds: &ResponseDataset, res: &BccResult) -> Self {
        let mut r = Self::new(Method::Bcc.name(), ds.question_ids().to_vec(), res.p_consensus_a.clone());
        r.respondent_params.insert("theta".into(), res.theta.clone());
        r.respondent_params.insert("g".into(), res.g.clone());
        r.question_params.insert("delta".into(), res.delta.iter().copied().map(Some).collect());
        r.diagnostics = Some(res.diagnostics.clone());
        r.acceptance = res.acceptance.clone();
        r
    }

    pub fn from_ch(ds: &ResponseDataset, res: &ChResult) -> Self {
        let mut r = Self::new(Method::Ch.name(), ds.question_ids().to_vec(), res.p_a.clone());
        r.respondent_params.insert("delta".into(), res.delta.clone());
        r.respondent_params.insert("sigma".into(), res.sigma.clone());
        r.question_params.insert("pi".into(), res.pi.iter().copied().map(Some).collect());
        r.diagnostics = Some(res.diagnostics.clone());
        r.acceptance = res.acceptance.clone();
        r.notes.push(format!(
            "report noise is Gaussian on the log-odds of each report, clamped to [{LOGODDS_EPSILON:e}, 1 - {LOGODDS_EPSILON:e}]"
        ));
        r
    }

    pub fn validate(&self) -> Result<(), ReportError> {
        let (p, a, q) = (self.p_a.len(), self.answers.len(), self.question_ids.len());
        if p != a || p != q {
            return Err(ReportError::Shape { p, a, q });
        }
        for ((id, &v), ans) in self.question_ids.iter().zip(&self.p_a).zip(&self.answers) {
            if !(0.0..=1.0).contains(&v) {
                return Err(ReportError::Probability { id: id.clone(), value: v });
            }
            if HardAnswer::from_probability(v) != *ans {
                return Err(ReportError::Answer(id.clone()));
            }
        }
        Ok(())
    }

    /// Checks that the report covers exactly the dataset's questions in order.
    pub fn check_alignment(&self, ds: &ResponseDataset) -> Result<(), ReportError> {
        let ids = ds.question_ids();
        if self.question_ids.len() != ids.len() {
            return Err(ReportError::Count { report: self.question_ids.len(), dataset: ids.len() });
        }
        if let Some(i) = self.question_ids.iter().zip(ids).position(|(a, b)| a != b) {
            return Err(ReportError::Mismatch {
                index: i,
                report: self.question_ids[i].clone(),
                dataset: ids[i].clone(),
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodScore {
    pub method: String,
    pub lesioned: bool,
    pub kappa: Kappa,
    pub brier: f64,
    pub brier_bootstrap_se: f64,
}

/// Kappa and Brier of a report against the dataset's key.
pub fn score_report(
    report: &MethodReport,
    ds: &ResponseDataset,
    bootstrap_iterations: usize,
    seed: u64,
) -> Result<MethodScore, ReportError> {
    report.validate()?;
    report.check_alignment(ds)?;
    let key = ds.answer_key().ok_or(MetricError::NoKey)?;
    Ok(MethodScore {
        method: report.method.clone(),
        lesioned: report.lesioned,
        kappa: cohens_kappa(&report.answers, key)?,
        brier: brier(&report.p_a, key)?,
        brier_bootstrap_se: brier_bootstrap_se(&report.p_a, key, bootstrap_iterations, seed)?,
    })
}

/// Correlation of one respondent parameter with respondent accuracy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RespondentCorrelation {
    pub method: String,
    pub parameter: String,
    pub n: usize,
    pub pearson: f64,
    pub spearman: f64,
    /// Pearson correlation after partialling out the majority fraction and
    /// the fraction of `A` votes; `None` when those covariates are collinear.
    pub partial: Option<f64>,
}

/// Correlates each per-respondent posterior mean in `report` with the
/// respondents' kappa against the key. Respondents without a kappa are
/// left out.
pub fn respondent_correlations(
    report: &MethodReport,
    ds: &ResponseDataset,
) -> Result<Vec<RespondentCorrelation>, ReportError> {
    if report.respondent_params.is_empty() {
        return Ok(Vec::new());
    }
    let acc = respondent_accuracy(ds)?;
    let cov = respondent_covariates(ds);
    let keep: Vec<usize> = (0..ds.n_respondents())
        .filter(|&r| {
            acc[r].kappa.is_some_and(|k| !k.degenerate)
                && cov[r].majority_fraction.is_some()
                && cov[r].vote_a_fraction.is_some()
        })
        .collect();
    let kappa: Vec<f64> = keep.iter().map(|&r| acc[r].kappa.expect("kept").kappa).collect();
    let majority: Vec<f64> = keep.iter().map(|&r| cov[r].majority_fraction.expect("kept")).collect();
    let vote_a: Vec<f64> = keep.iter().map(|&r| cov[r].vote_a_fraction.expect("kept")).collect();
    let mut out = Vec::new();
    for (name, params) in &report.respondent_params {
        if params.len() != ds.n_respondents() {
            return Err(ReportError::Count { report: params.len(), dataset: ds.n_respondents() });
        }
        let x: Vec<f64> = keep.iter().map(|&r| params[r].mean).collect();
        if x.len() < 3 {
            continue;
        }
        out.push(RespondentCorrelation {
            method: report.method.clone(),
            parameter: name.clone(),
            n: x.len(),
            pearson: correlate(&x, &kappa, CorrelationMethod::Pearson)?,
            spearman: correlate(&x, &kappa, CorrelationMethod::Spearman)?,
            partial: partial_correlate(&x, &kappa, &[&majority, &vote_a]).ok(),
        });
    }
    Ok(out)
}
