use rayon::prelude::*;

use super::{
    summarize_question, ChainConfig, ChainTrace, InferenceError, PosteriorSummary, QuestionChain,
    QuestionLikelihood, QuestionPosterior, Trace,
};
use crate::dataset::{QuestionResponses, ResponseDataset};
use crate::rng::{self, tag};

/// FNV-1a of a question id; keys the question's random streams.
pub(crate) fn id_key(id: &str) -> u64 {
    id.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

/// Runs `cfg.n_chains` independent chains on one question with respondent
/// expertise held at `expertise` (zeros when empty).
pub fn run_single_question(
    id: &str,
    responses: &QuestionResponses<'_>,
    expertise: &[f64],
    cfg: &ChainConfig,
) -> Result<(QuestionPosterior, Trace), InferenceError> {
    cfg.validate()?;
    let lik = QuestionLikelihood::new(responses, cfg.flags());
    if lik.observed.is_empty() {
        return Err(InferenceError::NoVotes(id.to_string()));
    }
    let key = id_key(id);
    let results: Vec<Result<(ChainTrace, (u64, u64), super::Moves), InferenceError>> = (0..cfg.n_chains)
        .into_par_iter()
        .map(|chain| {
            let mut rng = rng::stream(cfg.seed, &[tag::SINGLE_CHAIN, key, chain as u64]);
            let mut qc = QuestionChain::init(&lik, expertise, cfg, id, &mut rng)?;
            let mut trace = ChainTrace::default();
            let mut world_a = 0u64;
            for step in 0..cfg.n_steps {
                qc.step(&cfg.proposal_sds, expertise, step < cfg.n_burnin, &mut rng);
                if step >= cfg.n_burnin {
                    world_a += u64::from(qc.state.world.is_a());
                    if (step - cfg.n_burnin) % cfg.thin == 0 {
                        trace.record(&qc.state);
                    }
                }
            }
            trace.acceptance = qc.acceptance;
            Ok((trace, (world_a, (cfg.n_steps - cfg.n_burnin) as u64), qc.moves))
        })
        .collect();
    let mut chains = Vec::with_capacity(cfg.n_chains);
    let mut counts = (0, 0);
    let mut moves = None;
    for r in results {
        let (trace, (a, n), m) = r?;
        counts.0 += a;
        counts.1 += n;
        moves = Some(m);
        chains.push(trace);
    }
    let summary = summarize_question(id, &chains, counts, moves.expect("at least one chain"));
    Ok((summary, Trace { chains }))
}

/// Single-question inference on every question of a dataset independently.
pub fn run_single_questions(
    ds: &ResponseDataset,
    cfg: &ChainConfig,
) -> Result<(PosteriorSummary, Vec<Trace>), InferenceError> {
    let results: Vec<_> = (0..ds.n_questions())
        .into_par_iter()
        .map(|q| run_single_question(&ds.question_ids()[q], &ds.question(q), &[], cfg))
        .collect();
    let mut questions = Vec::new();
    let mut traces = Vec::new();
    for r in results {
        let (p, t) = r?;
        questions.push(p);
        traces.push(t);
    }
    Ok((
        PosteriorSummary { questions, expertise: None, respondent_diagnostics: None, respondent_acceptance: None },
        traces,
    ))
}
