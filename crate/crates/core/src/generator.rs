//! Forward simulation of the single- and multi-question generative model.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Answer, DatasetError, ResponseDataset};
use crate::dist::sample_truncated_normal;
use crate::respondent::{
    posterior_on, signal_probability, signal_views, Expertise, NoiseParams, Signal, SignalMatrix,
    WorldPrior, MAX_NOISE_VARIANCE,
};
use crate::rng::{self, tag};

/// Shape and rate of the vote-temperature prior.
pub const NV_PRIOR_SHAPE: f64 = 3.0;
pub const NV_PRIOR_RATE: f64 = 3.0;

/// Latent per-question state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuestionParams {
    pub prior: WorldPrior,
    pub world: Answer,
    pub signals: SignalMatrix,
    pub noise: NoiseParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_respondents: usize,
    pub n_questions: usize,
    pub with_confidence: bool,
    pub with_expertise: bool,
    pub expertise_aware_respondents: bool,
    pub seed: u64,
    /// Used for every question instead of prior draws.
    pub overrides: Option<QuestionParams>,
}

impl SimConfig {
    pub fn new(n_questions: usize, n_respondents: usize, seed: u64) -> Self {
        SimConfig {
            n_respondents,
            n_questions,
            with_confidence: false,
            with_expertise: false,
            expertise_aware_respondents: false,
            seed,
            overrides: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("{0} must be at least 1")]
    Count(&'static str),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// Known generating values of a simulated study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub params: Vec<QuestionParams>,
    pub expertise: Vec<f64>,
    pub key: Vec<Answer>,
}

/// One simulated question.
#[derive(Clone, Debug, PartialEq)]
pub struct SimulatedQuestion {
    pub signals: Vec<Signal>,
    pub votes: Vec<Answer>,
    pub predictions: Vec<f64>,
    pub confidences: Option<Vec<f64>>,
}

/// `(s_a, s_b)` uniform on `{0 <= s_b < s_a <= 1}`: sort two uniforms.
pub fn sample_signal_matrix<R: Rng + ?Sized>(rng: &mut R) -> SignalMatrix {
    loop {
        let u: f64 = rng.random();
        let v: f64 = rng.random();
        if u != v {
            return SignalMatrix::new(u.max(v), u.min(v)).expect("sorted distinct uniforms");
        }
    }
}

pub fn sample_question_params<R: Rng + ?Sized>(rng: &mut R) -> QuestionParams {
    let psi: f64 = rng.random();
    let world = Answer::from_is_a(rng.random::<f64>() < psi);
    let signals = sample_signal_matrix(rng);
    let gamma = Gamma::new(NV_PRIOR_SHAPE, 1.0 / NV_PRIOR_RATE).expect("valid gamma");
    let n_v = loop {
        let x = gamma.sample(rng);
        if x > 0.0 {
            break x;
        }
    };
    let n_m = rng.random::<f64>() * MAX_NOISE_VARIANCE;
    let n_c = rng.random::<f64>() * MAX_NOISE_VARIANCE;
    QuestionParams {
        prior: WorldPrior::new(psi).expect("uniform draw in [0, 1)"),
        world,
        signals,
        noise: NoiseParams::new(n_v, n_m, Some(n_c)).expect("prior draws are in range"),
    }
}

pub fn sample_signal<R: Rng + ?Sized>(
    rng: &mut R,
    s: &SignalMatrix,
    world: Answer,
    e: Expertise,
) -> Signal {
    let p_a = signal_probability(s.s_a(), s.s_b(), world.is_a(), e.value(), Signal::A);
    if rng.random::<f64>() < p_a {
        Signal::A
    } else {
        Signal::B
    }
}

/// Simulates one question: signals from the (expertise-lifted) world column,
/// then votes, predictions and optional confidences.
pub fn simulate_question<R: Rng + ?Sized>(
    params: &QuestionParams,
    expertise: &[f64],
    cfg: &SimConfig,
    rng: &mut R,
) -> SimulatedQuestion {
    let signals: Vec<Signal> = (0..cfg.n_respondents)
        .map(|r| {
            let e = Expertise::new(expertise.get(r).copied().unwrap_or(0.0)).unwrap_or(Expertise::NONE);
            sample_signal(rng, &params.signals, params.world, e)
        })
        .collect();
    simulate_responses(params, &signals, expertise, cfg, rng)
}

/// Votes, predictions and confidences for respondents holding the given
/// signals.
pub fn simulate_responses<R: Rng + ?Sized>(
    params: &QuestionParams,
    signals: &[Signal],
    expertise: &[f64],
    cfg: &SimConfig,
    rng: &mut R,
) -> SimulatedQuestion {
    let base = signal_views(&params.signals, params.prior, None);
    let NoiseParams { n_v, n_m, n_c } = params.noise;
    let n_c = n_c.unwrap_or(0.0);
    let mut votes = Vec::with_capacity(signals.len());
    let mut predictions = Vec::with_capacity(signals.len());
    let mut confidences = Vec::with_capacity(signals.len());
    for (r, &t) in signals.iter().enumerate() {
        let views = if cfg.expertise_aware_respondents {
            let e = Expertise::new(expertise.get(r).copied().unwrap_or(0.0)).unwrap_or(Expertise::NONE);
            signal_views(&params.signals, params.prior, Some(e))
        } else {
            base
        };
        let view = views[t as usize];
        let p_vote_a = crate::respondent::vote_probability(view.posterior_a, n_v);
        let vote = Answer::from_is_a(rng.random::<f64>() < p_vote_a);
        let prediction = sample_truncated_normal(rng, view.predicted_fraction, n_m.sqrt(), 0.0, 1.0);
        votes.push(vote);
        predictions.push(prediction);
        if cfg.with_confidence {
            let mean = posterior_on(view.posterior_a, vote);
            confidences.push(sample_truncated_normal(rng, mean, n_c.sqrt(), 0.0, 1.0));
        }
    }
    SimulatedQuestion {
        signals: signals.to_vec(),
        votes,
        predictions,
        confidences: cfg.with_confidence.then_some(confidences),
    }
}

/// Simulates a full study. Each question draws from its own stream keyed by
/// `(seed, question)`, expertise from a separate stream.
pub fn simulate_study(cfg: &SimConfig) -> Result<(ResponseDataset, GroundTruth), SimError> {
    if cfg.n_questions == 0 {
        return Err(SimError::Count("questions"));
    }
    if cfg.n_respondents == 0 {
        return Err(SimError::Count("respondents"));
    }
    let expertise: Vec<f64> = if cfg.with_expertise {
        let mut r = rng::stream(cfg.seed, &[tag::SIM_EXPERTISE]);
        (0..cfg.n_respondents).map(|_| r.random::<f64>()).collect()
    } else {
        vec![0.0; cfg.n_respondents]
    };
    let mut params = Vec::with_capacity(cfg.n_questions);
    let mut ids = Vec::new();
    let mut votes = Vec::new();
    let mut preds = Vec::new();
    let mut confs = Vec::new();
    for q in 0..cfg.n_questions {
        let mut r = rng::stream(cfg.seed, &[tag::SIM_QUESTION, q as u64]);
        let p = match cfg.overrides {
            Some(p) => p,
            None => sample_question_params(&mut r),
        };
        let sim = simulate_question(&p, &expertise, cfg, &mut r);
        ids.push(format!("q{q}"));
        votes.push(sim.votes.into_iter().map(Some).collect());
        preds.push(sim.predictions.into_iter().map(Some).collect());
        if let Some(c) = sim.confidences {
            confs.push(c.into_iter().map(Some).collect());
        }
        params.push(p);
    }
    let key: Vec<Answer> = params.iter().map(|p| p.world).collect();
    let ds = ResponseDataset::new(
        ids,
        votes,
        preds,
        cfg.with_confidence.then_some(confs),
        Some(key.clone()),
    )?;
    Ok((ds, GroundTruth { params, expertise, key }))
}
