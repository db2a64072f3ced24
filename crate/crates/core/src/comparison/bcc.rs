//! Bayesian cultural consensus with Rasch competence.
//!
//! Respondent `r` knows the consensus answer `Z_q` of question `q` with
//! probability `D = θ_r(1-δ_q) / (θ_r(1-δ_q) + δ_q(1-θ_r))` and otherwise
//! guesses `A` with probability `g_r`. All parameters have uniform priors.
//! Sampling is Metropolis-within-Gibbs: `Z` from its exact conditional,
//! truncated-normal random walks for `θ`, `δ`, `g`, and a joint move that
//! shifts every `logit θ` and `logit δ` by the same amount (the direction
//! along which the likelihood is flat).

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ComparisonError, SamplerConfig};
use crate::dataset::{Answer, ResponseDataset};
use crate::mcmc::{
    accept, acceptance_rates, merge_accept, propose_truncated, AcceptTable, Diagnostics,
    ParamSummary,
};
use crate::rng::{self, tag};

/// Rasch competence; 0.5 where the formula is 0/0.
pub fn bcc_competence(theta: f64, delta: f64) -> f64 {
    let num = theta * (1.0 - delta);
    let den = num + delta * (1.0 - theta);
    if den <= 0.0 {
        0.5
    } else {
        num / den
    }
}

/// `true` is answer `A`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BccState {
    pub z: Vec<bool>,
    pub theta: Vec<f64>,
    pub delta: Vec<f64>,
    pub g: Vec<f64>,
}

#[inline]
fn vote_ln_mass(theta: f64, delta: f64, g: f64, z: bool, y: bool) -> f64 {
    let d = bcc_competence(theta, delta);
    let p1 = if z { d + (1.0 - d) * g } else { (1.0 - d) * g };
    if y {
        p1.ln()
    } else {
        (1.0 - p1).ln()
    }
}

/// Log probability of the non-missing votes (`votes[q][r]`).
pub fn bcc_log_likelihood(state: &BccState, votes: &[Vec<Option<Answer>>]) -> f64 {
    let mut total = 0.0;
    for (q, row) in votes.iter().enumerate() {
        for (r, v) in row.iter().enumerate() {
            if let Some(v) = v {
                total += vote_ln_mass(state.theta[r], state.delta[q], state.g[r], state.z[q], v.is_a());
            }
        }
    }
    total
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BccResult {
    /// Posterior probability that the consensus answer is `A`.
    pub p_consensus_a: Vec<f64>,
    pub theta: Vec<ParamSummary>,
    pub delta: Vec<ParamSummary>,
    pub g: Vec<ParamSummary>,
    pub diagnostics: Diagnostics,
    pub acceptance: BTreeMap<String, f64>,
}

struct VoteIndex {
    by_question: Vec<Vec<(usize, bool)>>,
    by_respondent: Vec<Vec<(usize, bool)>>,
}

impl VoteIndex {
    fn new(ds: &ResponseDataset) -> Self {
        let mut by_question = vec![Vec::new(); ds.n_questions()];
        let mut by_respondent = vec![Vec::new(); ds.n_respondents()];
        for (q, row) in ds.votes().iter().enumerate() {
            for (r, v) in row.iter().enumerate() {
                if let Some(v) = v {
                    by_question[q].push((r, v.is_a()));
                    by_respondent[r].push((q, v.is_a()));
                }
            }
        }
        VoteIndex { by_question, by_respondent }
    }
}

struct ChainOutput {
    z_a: Vec<u64>,
    iterations: u64,
    theta: Vec<Vec<f64>>,
    delta: Vec<Vec<f64>>,
    g: Vec<Vec<f64>>,
    acceptance: AcceptTable,
}

fn logit(x: f64) -> f64 {
    (x / (1.0 - x)).ln()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Log Jacobian of the logit transform, `ln x(1-x)`.
fn ln_jacobian(x: f64) -> f64 {
    x.ln() + (1.0 - x).ln()
}

const SHIFT_SD: f64 = 0.3;

fn run_chain(idx: &VoteIndex, cfg: &SamplerConfig, chain: u64) -> ChainOutput {
    let (nq, nr) = (idx.by_question.len(), idx.by_respondent.len());
    let mut rng = rng::stream(cfg.seed, &[tag::BCC_CHAIN, chain]);
    let mut s = BccState {
        z: (0..nq).map(|_| rng.random::<bool>()).collect(),
        theta: (0..nr).map(|_| rng.random::<f64>()).collect(),
        delta: (0..nq).map(|_| rng.random::<f64>()).collect(),
        g: (0..nr).map(|_| rng.random::<f64>()).collect(),
    };
    let sd = cfg.proposal_sd;
    let shift = Normal::new(0.0, SHIFT_SD).expect("valid sd");
    let mut acc = AcceptTable::new();
    let mut out = ChainOutput {
        z_a: vec![0; nq],
        iterations: 0,
        theta: vec![Vec::new(); nr],
        delta: vec![Vec::new(); nq],
        g: vec![Vec::new(); nr],
        acceptance: AcceptTable::new(),
    };

    let q_ll = |s: &BccState, q: usize, delta: f64, z: bool| -> f64 {
        idx.by_question[q].iter().map(|&(r, y)| vote_ln_mass(s.theta[r], delta, s.g[r], z, y)).sum()
    };
    let r_ll = |s: &BccState, r: usize, theta: f64, g: f64| -> f64 {
        idx.by_respondent[r].iter().map(|&(q, y)| vote_ln_mass(theta, s.delta[q], g, s.z[q], y)).sum()
    };
    let full_ll = |theta: &[f64], delta: &[f64], s: &BccState| -> f64 {
        idx.by_question
            .iter()
            .enumerate()
            .flat_map(|(q, votes)| votes.iter().map(move |&(r, y)| (q, r, y)))
            .map(|(q, r, y)| vote_ln_mass(theta[r], delta[q], s.g[r], s.z[q], y))
            .sum()
    };

    for it in 0..cfg.n_burnin + cfg.n_iter {
        for q in 0..nq {
            let l1 = q_ll(&s, q, s.delta[q], true);
            let l0 = q_ll(&s, q, s.delta[q], false);
            s.z[q] = rng.random::<f64>() < sigmoid(l1 - l0);

            let cur = q_ll(&s, q, s.delta[q], s.z[q]);
            let p = propose_truncated(&mut rng, s.delta[q], sd, 0.0, 1.0);
            let ok = accept(&mut rng, q_ll(&s, q, p.value, s.z[q]) - cur + p.log_hastings);
            if ok {
                s.delta[q] = p.value;
            }
            acc.entry("delta".into()).or_default().record(ok);
        }
        for r in 0..nr {
            let cur = r_ll(&s, r, s.theta[r], s.g[r]);
            let p = propose_truncated(&mut rng, s.theta[r], sd, 0.0, 1.0);
            let prop = r_ll(&s, r, p.value, s.g[r]);
            let ok = accept(&mut rng, prop - cur + p.log_hastings);
            let cur = if ok {
                s.theta[r] = p.value;
                prop
            } else {
                cur
            };
            acc.entry("theta".into()).or_default().record(ok);

            let p = propose_truncated(&mut rng, s.g[r], sd, 0.0, 1.0);
            let ok = accept(&mut rng, r_ll(&s, r, s.theta[r], p.value) - cur + p.log_hastings);
            if ok {
                s.g[r] = p.value;
            }
            acc.entry("g".into()).or_default().record(ok);
        }

        let c: f64 = shift.sample(&mut rng);
        let theta: Vec<f64> = s.theta.iter().map(|&t| sigmoid(logit(t) + c)).collect();
        let delta: Vec<f64> = s.delta.iter().map(|&d| sigmoid(logit(d) + c)).collect();
        let inside = theta.iter().chain(&delta).all(|&x| x > 0.0 && x < 1.0);
        let ok = inside && {
            let jac: f64 = theta.iter().chain(&delta).map(|&x| ln_jacobian(x)).sum::<f64>()
                - s.theta.iter().chain(&s.delta).map(|&x| ln_jacobian(x)).sum::<f64>();
            let ratio = full_ll(&theta, &delta, &s) - full_ll(&s.theta, &s.delta, &s) + jac;
            accept(&mut rng, ratio)
        };
        if ok {
            s.theta = theta;
            s.delta = delta;
        }
        acc.entry("shift".into()).or_default().record(ok);

        if it >= cfg.n_burnin {
            out.iterations += 1;
            for (count, &z) in out.z_a.iter_mut().zip(&s.z) {
                *count += u64::from(z);
            }
            if (it - cfg.n_burnin) % cfg.thin == 0 {
                for (t, &v) in out.theta.iter_mut().zip(&s.theta) {
                    t.push(v);
                }
                for (t, &v) in out.delta.iter_mut().zip(&s.delta) {
                    t.push(v);
                }
                for (t, &v) in out.g.iter_mut().zip(&s.g) {
                    t.push(v);
                }
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

/// Fits the consensus model to the votes of `ds` (predictions and
/// confidences are ignored).
pub fn run_bcc(ds: &ResponseDataset, cfg: &SamplerConfig) -> Result<BccResult, ComparisonError> {
    cfg.validate()?;
    if ds.n_questions() < 2 {
        return Err(ComparisonError::TooFewQuestions(ds.n_questions()));
    }
    let idx = VoteIndex::new(ds);
    if let Some(q) = idx.by_question.iter().position(Vec::is_empty) {
        return Err(ComparisonError::NoVotes(ds.question_ids()[q].clone()));
    }
    let outs: Vec<ChainOutput> =
        (0..cfg.n_chains).into_par_iter().map(|c| run_chain(&idx, cfg, c as u64)).collect();

    let total: u64 = outs.iter().map(|o| o.iterations).sum();
    let p_consensus_a = (0..ds.n_questions())
        .map(|q| outs.iter().map(|o| o.z_a[q]).sum::<u64>() as f64 / total as f64)
        .collect();
    let mut diagnostics = Diagnostics::default();
    let ids = ds.question_ids();
    let theta = summarize(&outs, ds.n_respondents(), |o| &o.theta, |r| format!("theta{r}"), &mut diagnostics);
    let delta = summarize(&outs, ds.n_questions(), |o| &o.delta, |q| format!("{}.delta", ids[q]), &mut diagnostics);
    let g = summarize(&outs, ds.n_respondents(), |o| &o.g, |r| format!("g{r}"), &mut diagnostics);
    let mut acc = AcceptTable::new();
    outs.iter().for_each(|o| merge_accept(&mut acc, &o.acceptance));
    Ok(BccResult { p_consensus_a, theta, delta, g, diagnostics, acceptance: acceptance_rates(&acc) })
}

/// Draws parameters from the uniform priors and votes from the
/// know-or-guess process. Returns the dataset (answer key = `Z`) and the
/// state that generated it.
pub fn simulate_bcc(
    n_questions: usize,
    n_respondents: usize,
    seed: u64,
) -> Result<(ResponseDataset, BccState), crate::dataset::DatasetError> {
    let mut rng = rng::stream(seed, &[tag::SIM_BCC]);
    let state = BccState {
        z: (0..n_questions).map(|_| rng.random::<bool>()).collect(),
        theta: (0..n_respondents).map(|_| rng.random::<f64>()).collect(),
        delta: (0..n_questions).map(|_| rng.random::<f64>()).collect(),
        g: (0..n_respondents).map(|_| rng.random::<f64>()).collect(),
    };
    let votes: Vec<Vec<Option<Answer>>> = (0..n_questions)
        .map(|q| {
            (0..n_respondents)
                .map(|r| {
                    let d = bcc_competence(state.theta[r], state.delta[q]);
                    let y = if rng.random::<f64>() < d { state.z[q] } else { rng.random::<f64>() < state.g[r] };
                    Some(Answer::from_is_a(y))
                })
                .collect()
        })
        .collect();
    let ds = ResponseDataset::new(
        (0..n_questions).map(|q| format!("q{q}")).collect(),
        votes,
        vec![vec![None; n_respondents]; n_questions],
        None,
        Some(state.z.iter().map(|&z| Answer::from_is_a(z)).collect()),
    )?;
    Ok((ds, state))
}
