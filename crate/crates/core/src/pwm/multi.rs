use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::likelihood::SignalTerms;
use super::single::id_key;
use super::{
    summarize_question, ChainConfig, ChainTrace, InferenceError, Moves, PosteriorSummary,
    QuestionChain, QuestionLikelihood, Trace,
};
use crate::dataset::ResponseDataset;
use crate::mcmc::{accept, propose_truncated, AcceptCount, Diagnostics, ParamSummary};
use crate::rng::{self, tag};

/// Traces of a multi-question run: per question (chains inside), and
/// expertise samples indexed `[chain][respondent][sample]`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MultiTrace {
    pub questions: Vec<Trace>,
    pub expertise: Vec<Vec<Vec<f64>>>,
}

struct ChainOutput {
    traces: Vec<ChainTrace>,
    world_counts: Vec<(u64, u64)>,
    moves: Vec<Moves>,
    expertise: Vec<Vec<f64>>,
    expertise_acceptance: AcceptCount,
}

/// Blocked sampler across questions with per-respondent information
/// expertise. Each loop runs `question_steps` sweeps on every question
/// (concurrently, expertise frozen) and then `respondent_steps` updates of
/// every expertise (question states frozen at the end of their block). The
/// first `burnin_loops` loops are discarded.
pub fn run_multi_question(
    ds: &ResponseDataset,
    cfg: &ChainConfig,
) -> Result<(PosteriorSummary, MultiTrace), InferenceError> {
    cfg.validate()?;
    let q_count = ds.n_questions();
    if q_count < 2 {
        return Err(InferenceError::TooFewQuestions(q_count));
    }
    let n = ds.n_respondents();
    let ids = ds.question_ids();
    let liks: Vec<QuestionLikelihood> =
        (0..q_count).map(|q| QuestionLikelihood::new(&ds.question(q), cfg.flags())).collect();
    if let Some(q) = liks.iter().position(|l| l.observed.is_empty()) {
        return Err(InferenceError::NoVotes(ids[q].clone()));
    }
    let mut by_respondent: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (q, lik) in liks.iter().enumerate() {
        for (i, obs) in lik.observed.observations.iter().enumerate() {
            by_respondent[obs.respondent].push((q, i));
        }
    }

    let outputs: Vec<ChainOutput> = (0..cfg.n_chains)
        .into_par_iter()
        .map(|chain| run_chain(chain as u64, ds, &liks, &by_respondent, cfg))
        .collect::<Result<_, _>>()?;

    let mut questions = Vec::with_capacity(q_count);
    let mut q_traces = Vec::with_capacity(q_count);
    for q in 0..q_count {
        let chains: Vec<ChainTrace> = outputs.iter().map(|o| o.traces[q].clone()).collect();
        let counts = outputs
            .iter()
            .map(|o| o.world_counts[q])
            .fold((0, 0), |acc, c| (acc.0 + c.0, acc.1 + c.1));
        questions.push(summarize_question(&ids[q], &chains, counts, outputs[0].moves[q]));
        q_traces.push(Trace { chains });
    }
    let mut expertise = Vec::with_capacity(n);
    let mut diag = Diagnostics::default();
    for r in 0..n {
        let series: Vec<&[f64]> = outputs.iter().map(|o| o.expertise[r].as_slice()).collect();
        expertise.push(ParamSummary::from_samples(series.iter().copied()));
        diag.add(format!("e{r}"), &series);
    }
    let mut acc = AcceptCount::default();
    outputs.iter().for_each(|o| acc.merge(&o.expertise_acceptance));
    let summary = PosteriorSummary {
        questions,
        expertise: Some(expertise),
        respondent_diagnostics: Some(diag),
        respondent_acceptance: Some(acc.rate()),
    };
    let trace = MultiTrace {
        questions: q_traces,
        expertise: outputs.into_iter().map(|o| o.expertise).collect(),
    };
    Ok((summary, trace))
}

fn run_chain(
    chain: u64,
    ds: &ResponseDataset,
    liks: &[QuestionLikelihood],
    by_respondent: &[Vec<(usize, usize)>],
    cfg: &ChainConfig,
) -> Result<ChainOutput, InferenceError> {
    let n = ds.n_respondents();
    let ids = ds.question_ids();
    let mut init_rng = rng::stream(cfg.seed, &[tag::CHAIN_INIT, chain, u64::MAX]);
    let mut expertise: Vec<f64> = (0..n).map(|_| init_rng.random::<f64>()).collect();
    let mut qchains = liks
        .iter()
        .enumerate()
        .map(|(q, lik)| {
            let mut r = rng::stream(cfg.seed, &[tag::CHAIN_INIT, chain, id_key(&ids[q])]);
            QuestionChain::init(lik, &expertise, cfg, &ids[q], &mut r)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let q_count = liks.len();
    let mut traces = vec![ChainTrace::default(); q_count];
    let mut world_counts = vec![(0u64, 0u64); q_count];
    let mut e_trace: Vec<Vec<f64>> = vec![Vec::new(); n];
    let mut e_acc = AcceptCount::default();

    for l in 0..cfg.n_loops {
        let keep = l >= cfg.burnin_loops;
        let frozen = &expertise;
        qchains
            .par_iter_mut()
            .zip(traces.par_iter_mut())
            .zip(world_counts.par_iter_mut())
            .enumerate()
            .for_each(|(q, ((qc, trace), counts))| {
                let mut r = rng::stream(cfg.seed, &[tag::QUESTION_BLOCK, chain, l as u64, id_key(&ids[q])]);
                qc.refresh(frozen);
                for step in 0..cfg.question_steps {
                    qc.step(&cfg.proposal_sds, frozen, !keep, &mut r);
                    if keep {
                        counts.0 += u64::from(qc.state.world.is_a());
                        counts.1 += 1;
                        if step % cfg.thin == 0 {
                            trace.record(&qc.state);
                        }
                    }
                }
            });

        let bases: Vec<SignalTerms> = qchains.iter().map(|qc| qc.lik.base_terms(&qc.state)).collect();
        let qref = &qchains;
        let block_acc = expertise
            .par_iter_mut()
            .zip(e_trace.par_iter_mut())
            .enumerate()
            .map(|(r, (e, trace))| {
                let mut rng = rng::stream(cfg.seed, &[tag::RESPONDENT_BLOCK, chain, l as u64, r as u64]);
                let ln_lik = |x: f64| -> f64 {
                    by_respondent[r]
                        .iter()
                        .map(|&(q, i)| liks[q].observation_ln_likelihood(&qref[q].state, &bases[q], i, x))
                        .sum()
                };
                let mut current = ln_lik(*e);
                let mut acc = AcceptCount::default();
                for _ in 0..cfg.respondent_steps {
                    let p = propose_truncated(&mut rng, *e, cfg.proposal_sds.expertise, 0.0, 1.0);
                    let proposed = ln_lik(p.value);
                    let ok = accept(&mut rng, proposed - current + p.log_hastings);
                    if ok {
                        *e = p.value;
                        current = proposed;
                    }
                    acc.record(ok);
                    if keep {
                        trace.push(*e);
                    }
                }
                acc
            })
            .reduce(AcceptCount::default, |mut a, b| {
                a.merge(&b);
                a
            });
        e_acc.merge(&block_acc);
    }

    let moves = qchains.iter().map(|qc| qc.moves).collect();
    for (trace, qc) in traces.iter_mut().zip(qchains) {
        trace.acceptance = qc.acceptance;
    }
    Ok(ChainOutput { traces, world_counts, moves, expertise: e_trace, expertise_acceptance: e_acc })
}
