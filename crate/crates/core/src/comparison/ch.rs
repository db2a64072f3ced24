//! Cognitive hierarchy model for probability reports.
//!
//! Each question has a latent probability `π_q` of answer `A`. Respondent
//! `r` perceives its log-odds scaled by a calibration `δ_r` and reports a
//! value drawn from a normal with standard deviation `1/σ_r` around the
//! perceived log-odds. Reports are signed probabilities (confidence on the
//! voted answer, complemented for `B` votes) mapped to log-odds after
//! clamping to `[eps, 1 - eps]`. Priors: `π, σ ~ U(0, 1)`, `δ ~ Beta(5, 1)`.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Beta, Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ComparisonError, SamplerConfig};
use crate::dataset::{Answer, DatasetError, ResponseDataset};
use crate::mcmc::{
    accept, acceptance_rates, merge_accept, propose_truncated, AcceptTable, Diagnostics,
    ParamSummary,
};
use crate::rng::{self, tag};

pub const LOGODDS_EPSILON: f64 = 1e-4;
pub const CALIBRATION_PRIOR_ALPHA: f64 = 5.0;

/// Calibrated log-odds `δ ln(π / (1 - π))`; `±inf` at `π` equal to 0 or 1.
pub fn ch_perceived(pi: f64, delta: f64) -> f64 {
    if pi <= 0.0 {
        f64::NEG_INFINITY
    } else if pi >= 1.0 {
        f64::INFINITY
    } else {
        delta * (pi / (1.0 - pi)).ln()
    }
}

/// Log-odds of a probability report after clamping.
pub fn report_log_odds(p: f64) -> f64 {
    let p = p.clamp(LOGODDS_EPSILON, 1.0 - LOGODDS_EPSILON);
    (p / (1.0 - p)).ln()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChState {
    pub pi: Vec<f64>,
    pub delta: Vec<f64>,
    pub sigma: Vec<f64>,
}

#[inline]
fn report_ln_density(y: f64, pi: f64, delta: f64, sigma: f64) -> f64 {
    let d = y - ch_perceived(pi, delta);
    sigma.ln() - 0.918_938_533_204_672_8 - 0.5 * sigma * sigma * d * d
}

fn calibration_ln_prior(delta: f64) -> f64 {
    (CALIBRATION_PRIOR_ALPHA - 1.0) * delta.ln()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChResult {
    /// Posterior mean of `π_q`, used as the probability of `A`.
    pub p_a: Vec<f64>,
    pub pi: Vec<ParamSummary>,
    /// Posterior probability that `π_q > 0.5`.
    pub p_pi_above_half: Vec<f64>,
    pub delta: Vec<ParamSummary>,
    pub sigma: Vec<ParamSummary>,
    pub diagnostics: Diagnostics,
    pub acceptance: BTreeMap<String, f64>,
}

struct ReportIndex {
    by_question: Vec<Vec<(usize, f64)>>,
    by_respondent: Vec<Vec<(usize, f64)>>,
}

struct ChainOutput {
    pi: Vec<Vec<f64>>,
    delta: Vec<Vec<f64>>,
    sigma: Vec<Vec<f64>>,
    acceptance: AcceptTable,
}

fn run_chain(idx: &ReportIndex, cfg: &SamplerConfig, chain: u64) -> ChainOutput {
    let (nq, nr) = (idx.by_question.len(), idx.by_respondent.len());
    let mut rng = rng::stream(cfg.seed, &[tag::CH_CHAIN, chain]);
    let prior_delta = Beta::new(CALIBRATION_PRIOR_ALPHA, 1.0).expect("valid prior");
    // Start away from the boundaries, where the log-odds blow up.
    let mut s = ChState {
        pi: (0..nq).map(|_| rng.random_range(0.05..0.95)).collect(),
        delta: (0..nr).map(|_| prior_delta.sample(&mut rng).max(0.05)).collect(),
        sigma: (0..nr).map(|_| rng.random_range(0.05..1.0)).collect(),
    };
    let sd = cfg.proposal_sd;
    let mut acc = AcceptTable::new();
    let mut out = ChainOutput {
        pi: vec![Vec::new(); nq],
        delta: vec![Vec::new(); nr],
        sigma: vec![Vec::new(); nr],
        acceptance: AcceptTable::new(),
    };
    let q_ll = |s: &ChState, q: usize, pi: f64| -> f64 {
        idx.by_question[q].iter().map(|&(r, y)| report_ln_density(y, pi, s.delta[r], s.sigma[r])).sum()
    };
    let r_ll = |s: &ChState, r: usize, delta: f64, sigma: f64| -> f64 {
        idx.by_respondent[r].iter().map(|&(q, y)| report_ln_density(y, s.pi[q], delta, sigma)).sum()
    };

    for it in 0..cfg.n_burnin + cfg.n_iter {
        for q in 0..nq {
            let p = propose_truncated(&mut rng, s.pi[q], sd, 0.0, 1.0);
            let ok = accept(&mut rng, q_ll(&s, q, p.value) - q_ll(&s, q, s.pi[q]) + p.log_hastings);
            if ok {
                s.pi[q] = p.value;
            }
            acc.entry("pi".into()).or_default().record(ok);
        }
        for r in 0..nr {
            let cur = r_ll(&s, r, s.delta[r], s.sigma[r]) + calibration_ln_prior(s.delta[r]);
            let p = propose_truncated(&mut rng, s.delta[r], sd, 0.0, 1.0);
            let prop = r_ll(&s, r, p.value, s.sigma[r]) + calibration_ln_prior(p.value);
            let ok = accept(&mut rng, prop - cur + p.log_hastings);
            if ok {
                s.delta[r] = p.value;
            }
            acc.entry("delta".into()).or_default().record(ok);

            let cur = r_ll(&s, r, s.delta[r], s.sigma[r]);
            let p = propose_truncated(&mut rng, s.sigma[r], sd, 0.0, 1.0);
            let ok = accept(&mut rng, r_ll(&s, r, s.delta[r], p.value) - cur + p.log_hastings);
            if ok {
                s.sigma[r] = p.value;
            }
            acc.entry("sigma".into()).or_default().record(ok);
        }
        if it >= cfg.n_burnin && (it - cfg.n_burnin) % cfg.thin == 0 {
            for (t, &v) in out.pi.iter_mut().zip(&s.pi) {
                t.push(v);
            }
            for (t, &v) in out.delta.iter_mut().zip(&s.delta) {
                t.push(v);
            }
            for (t, &v) in out.sigma.iter_mut().zip(&s.sigma) {
                t.push(v);
            }
        }
    }
    out.acceptance = acc;
    out
}

fn summarize(
    outs: &[ChainOutput],
    n: usize,
    pick: impl Fn(&ChainOutput) -> &Vec<Vec<f64>>,
    name: impl Fn(usize) -> String,
    diag: &mut Diagnostics,
) -> Vec<ParamSummary> {
    (0..n)
        .map(|i| {
            let series: Vec<&[f64]> = outs.iter().map(|o| pick(o)[i].as_slice()).collect();
            diag.add(name(i), &series);
            ParamSummary::from_samples(series.iter().copied())
        })
        .collect()
}

pub fn run_ch(ds: &ResponseDataset, cfg: &SamplerConfig) -> Result<ChResult, ComparisonError> {
    cfg.validate()?;
    let signed = ds.signed_probabilities().ok_or(ComparisonError::MissingConfidences)?;
    if !ds.has_confidences() {
        return Err(ComparisonError::MissingConfidences);
    }
    if ds.n_questions() < 2 {
        return Err(ComparisonError::TooFewQuestions(ds.n_questions()));
    }
    let mut idx = ReportIndex {
        by_question: vec![Vec::new(); ds.n_questions()],
        by_respondent: vec![Vec::new(); ds.n_respondents()],
    };
    for (q, row) in signed.iter().enumerate() {
        for (r, p) in row.iter().enumerate() {
            if let Some(p) = p {
                let y = report_log_odds(*p);
                idx.by_question[q].push((r, y));
                idx.by_respondent[r].push((q, y));
            }
        }
    }
    if let Some(q) = idx.by_question.iter().position(Vec::is_empty) {
        return Err(ComparisonError::NoVotes(ds.question_ids()[q].clone()));
    }
    let outs: Vec<ChainOutput> =
        (0..cfg.n_chains).into_par_iter().map(|c| run_chain(&idx, cfg, c as u64)).collect();

    let ids = ds.question_ids();
    let mut diagnostics = Diagnostics::default();
    let pi = summarize(&outs, ds.n_questions(), |o| &o.pi, |q| format!("{}.pi", ids[q]), &mut diagnostics);
    let delta = summarize(&outs, ds.n_respondents(), |o| &o.delta, |r| format!("delta{r}"), &mut diagnostics);
    let sigma = summarize(&outs, ds.n_respondents(), |o| &o.sigma, |r| format!("sigma{r}"), &mut diagnostics);
    let p_pi_above_half = (0..ds.n_questions())
        .map(|q| {
            let (above, total) = outs.iter().fold((0usize, 0usize), |(a, t), o| {
                (a + o.pi[q].iter().filter(|&&p| p > 0.5).count(), t + o.pi[q].len())
            });
            above as f64 / total as f64
        })
        .collect();
    let mut acc = AcceptTable::new();
    outs.iter().for_each(|o| merge_accept(&mut acc, &o.acceptance));
    Ok(ChResult {
        p_a: pi.iter().map(|s| s.mean).collect(),
        pi,
        p_pi_above_half,
        delta,
        sigma,
        diagnostics,
        acceptance: acceptance_rates(&acc),
    })
}

/// Draws a state from the priors and one probability report per
/// respondent and question, stored as a vote on the favoured answer with
/// the report's confidence. The answer key is the side of 0.5 that `π`
/// falls on.
pub fn simulate_ch(
    n_questions: usize,
    n_respondents: usize,
    seed: u64,
) -> Result<(ResponseDataset, ChState), DatasetError> {
    let mut rng = rng::stream(seed, &[tag::SIM_CH]);
    let prior_delta = Beta::new(CALIBRATION_PRIOR_ALPHA, 1.0).expect("valid prior");
    let state = ChState {
        pi: (0..n_questions).map(|_| rng.random::<f64>()).collect(),
        delta: (0..n_respondents).map(|_| prior_delta.sample(&mut rng)).collect(),
        sigma: (0..n_respondents).map(|_| rng.random::<f64>()).collect(),
    };
    let mut votes = vec![vec![None; n_respondents]; n_questions];
    let mut confidences = vec![vec![None; n_respondents]; n_questions];
    for q in 0..n_questions {
        for r in 0..n_respondents {
            let noise = Normal::new(0.0, 1.0 / state.sigma[r].max(1e-12)).expect("finite sd");
            let y = ch_perceived(state.pi[q], state.delta[r]) + noise.sample(&mut rng);
            let p = 1.0 / (1.0 + (-y).exp());
            let vote = Answer::from_is_a(p >= 0.5);
            votes[q][r] = Some(vote);
            confidences[q][r] = Some(if vote.is_a() { p } else { 1.0 - p });
        }
    }
    let ds = ResponseDataset::new(
        (0..n_questions).map(|q| format!("q{q}")).collect(),
        votes,
        vec![vec![None; n_respondents]; n_questions],
        Some(confidences),
        Some(state.pi.iter().map(|&p| Answer::from_is_a(p > 0.5)).collect()),
    )?;
    Ok((ds, state))
}
