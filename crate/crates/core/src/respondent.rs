//! The ideal Bayesian respondent.
//!
//! A respondent shares common knowledge of the world prior `psi` and the
//! signal matrix `S` (`s_a = P(signal a | world A)`, `s_b = P(signal a | world
//! B)`), receives one private signal, and from it derives a posterior over
//! worlds, a vote, a prediction of the fraction of others voting `A`, and a
//! confidence. These functions are shared by the simulator and the
//! likelihood.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Answer;

#[derive(Debug, Error, PartialEq)]
pub enum ParamError {
    #[error("signal matrix requires 0 <= s_b < s_a <= 1, got s_a={s_a}, s_b={s_b}")]
    SignalMatrix { s_a: f64, s_b: f64 },
    #[error("{name} = {value} outside {domain}")]
    Domain { name: &'static str, value: f64, domain: &'static str },
}

fn check(name: &'static str, value: f64, ok: bool, domain: &'static str) -> Result<(), ParamError> {
    if ok {
        Ok(())
    } else {
        Err(ParamError::Domain { name, value, domain })
    }
}

/// A private signal; `a` is the signal more probable in world `A`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Signal {
    A,
    B,
}

impl Signal {
    pub const BOTH: [Signal; 2] = [Signal::A, Signal::B];

    /// The world whose label the signal carries.
    pub fn label(self) -> Answer {
        match self {
            Signal::A => Answer::A,
            Signal::B => Answer::B,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalMatrix {
    s_a: f64,
    s_b: f64,
}

impl SignalMatrix {
    pub fn new(s_a: f64, s_b: f64) -> Result<Self, ParamError> {
        if (0.0..=1.0).contains(&s_a) && (0.0..=1.0).contains(&s_b) && s_b < s_a {
            Ok(SignalMatrix { s_a, s_b })
        } else {
            Err(ParamError::SignalMatrix { s_a, s_b })
        }
    }

    /// P(signal a | world A).
    pub fn s_a(&self) -> f64 {
        self.s_a
    }

    /// P(signal a | world B).
    pub fn s_b(&self) -> f64 {
        self.s_b
    }

    /// P(signal | world).
    pub fn likelihood(&self, signal: Signal, world: Answer) -> f64 {
        let p_a = match world {
            Answer::A => self.s_a,
            Answer::B => self.s_b,
        };
        match signal {
            Signal::A => p_a,
            Signal::B => 1.0 - p_a,
        }
    }

    /// Probability of the correct signal in `world` (`s_a` in A, `1 - s_b`
    /// in B).
    pub fn correct_signal_probability(&self, world: Answer) -> f64 {
        match world {
            Answer::A => self.s_a,
            Answer::B => 1.0 - self.s_b,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WorldPrior(f64);

impl WorldPrior {
    pub fn new(psi: f64) -> Result<Self, ParamError> {
        check("psi", psi, (0.0..=1.0).contains(&psi), "[0, 1]")?;
        Ok(WorldPrior(psi))
    }

    pub fn psi(&self) -> f64 {
        self.0
    }
}

/// Vote temperature and prediction/confidence noise variances.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub n_v: f64,
    pub n_m: f64,
    #[serde(default)]
    pub n_c: Option<f64>,
}

pub const MAX_NOISE_VARIANCE: f64 = 0.5;

impl NoiseParams {
    pub fn new(n_v: f64, n_m: f64, n_c: Option<f64>) -> Result<Self, ParamError> {
        check("n_v", n_v, n_v > 0.0 && n_v.is_finite(), "(0, inf)")?;
        check("n_m", n_m, (0.0..=MAX_NOISE_VARIANCE).contains(&n_m), "[0, 0.5]")?;
        if let Some(c) = n_c {
            check("n_c", c, (0.0..=MAX_NOISE_VARIANCE).contains(&c), "[0, 0.5]")?;
        }
        Ok(NoiseParams { n_v, n_m, n_c })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Expertise(f64);

impl Expertise {
    pub const NONE: Expertise = Expertise(0.0);

    pub fn new(e: f64) -> Result<Self, ParamError> {
        check("expertise", e, (0.0..=1.0).contains(&e), "[0, 1]")?;
        Ok(Expertise(e))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

/// Bayes rule over the two worlds given per-world signal likelihoods. An
/// impossible signal (zero evidence) leaves the prior unchanged.
#[inline]
pub(crate) fn bayes(lik_a: f64, lik_b: f64, psi: f64) -> f64 {
    let num = lik_a * psi;
    let den = num + lik_b * (1.0 - psi);
    if den > 0.0 {
        num / den
    } else {
        psi
    }
}

/// P(world = A | signal).
pub fn world_posterior(signal: Signal, s: &SignalMatrix, prior: WorldPrior) -> f64 {
    bayes(
        s.likelihood(signal, Answer::A),
        s.likelihood(signal, Answer::B),
        prior.psi(),
    )
}

/// P(another respondent receives `a` | own signal), marginalizing worlds.
pub fn other_signal_posterior(signal: Signal, s: &SignalMatrix, prior: WorldPrior) -> f64 {
    signal_a_given_posterior(world_posterior(signal, s, prior), s)
}

#[inline]
fn signal_a_given_posterior(post_a: f64, s: &SignalMatrix) -> f64 {
    s.s_a * post_a + s.s_b * (1.0 - post_a)
}

/// Vote for the more probable world; an exact tie goes to the signal's label.
pub fn ideal_vote(signal: Signal, s: &SignalMatrix, prior: WorldPrior) -> Answer {
    vote_from_posterior(world_posterior(signal, s, prior), signal)
}

#[inline]
fn vote_from_posterior(post_a: f64, signal: Signal) -> Answer {
    if post_a > 0.5 {
        Answer::A
    } else if post_a < 0.5 {
        Answer::B
    } else {
        signal.label()
    }
}

/// Expected fraction of others voting `A`, as computed by a noiseless ideal
/// respondent holding `signal`.
pub fn predicted_vote_fraction(signal: Signal, s: &SignalMatrix, prior: WorldPrior) -> f64 {
    predicted_fraction_from_posterior(world_posterior(signal, s, prior), s, prior)
}

/// Others are modelled as base (expertise-unaware) ideal voters.
fn predicted_fraction_from_posterior(own_post_a: f64, s: &SignalMatrix, prior: WorldPrior) -> f64 {
    let other_a = signal_a_given_posterior(own_post_a, s);
    let mut fraction = 0.0;
    if ideal_vote(Signal::A, s, prior) == Answer::A {
        fraction += other_a;
    }
    if ideal_vote(Signal::B, s, prior) == Answer::A {
        fraction += 1.0 - other_a;
    }
    fraction
}

/// Softmax (temperature `n_v`) probability of voting `A` given the posterior
/// on `A`: `exp(p/n_v) / (exp(p/n_v) + exp((1-p)/n_v))`.
pub fn vote_probability(posterior_a: f64, n_v: f64) -> f64 {
    log_vote_probability(posterior_a, n_v, Answer::A).exp()
}

/// Log of the softmax vote mass for `vote`.
#[inline]
pub fn log_vote_probability(posterior_a: f64, n_v: f64, vote: Answer) -> f64 {
    let x = (2.0 * posterior_a - 1.0) / n_v;
    match vote {
        Answer::A => log_sigmoid(x),
        Answer::B => log_sigmoid(-x),
    }
}

#[inline]
pub(crate) fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Signal distribution of a respondent with expertise `e` in `world`:
/// `(P(correct signal), P(incorrect signal))`, the correct-signal probability
/// lifted linearly from the matrix value toward 1.
pub fn adjust_signal_column(s: &SignalMatrix, world: Answer, e: Expertise) -> (f64, f64) {
    let correct = lift(s.correct_signal_probability(world), e.value());
    (correct, 1.0 - correct)
}

#[inline]
fn lift(p: f64, e: f64) -> f64 {
    p + e * (1.0 - p)
}

/// P(receive `signal` | world, expertise).
#[inline]
pub(crate) fn signal_probability(s_a: f64, s_b: f64, world_a: bool, e: f64, signal: Signal) -> f64 {
    // In world B the correct signal is b; 1 - lift(1 - s_b, e), written so
    // that e = 0 reproduces s_b exactly.
    let p_a = if world_a { lift(s_a, e) } else { s_b * (1.0 - e) };
    match signal {
        Signal::A => p_a,
        Signal::B => 1.0 - p_a,
    }
}

/// P(world = A | signal) for a respondent who knows their own expertise and
/// applies the lifted signal likelihoods in both hypothesized worlds.
pub fn world_posterior_expertise_aware(
    signal: Signal,
    s: &SignalMatrix,
    prior: WorldPrior,
    e: Expertise,
) -> f64 {
    let ev = e.value();
    bayes(
        signal_probability(s.s_a, s.s_b, true, ev, signal),
        signal_probability(s.s_a, s.s_b, false, ev, signal),
        prior.psi(),
    )
}

/// Prediction of an expertise-aware respondent. Their world posterior uses
/// their own expertise; others are treated as base respondents.
pub fn predicted_vote_fraction_expertise_aware(
    signal: Signal,
    s: &SignalMatrix,
    prior: WorldPrior,
    e: Expertise,
) -> f64 {
    predicted_fraction_from_posterior(world_posterior_expertise_aware(signal, s, prior, e), s, prior)
}

/// Mean of the confidence distribution: the posterior on the answer voted.
pub fn confidence_mean(signal: Signal, vote: Answer, s: &SignalMatrix, prior: WorldPrior) -> f64 {
    posterior_on(world_posterior(signal, s, prior), vote)
}

#[inline]
pub(crate) fn posterior_on(post_a: f64, answer: Answer) -> f64 {
    match answer {
        Answer::A => post_a,
        Answer::B => 1.0 - post_a,
    }
}

/// Everything a respondent with a given signal computes, for one question.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SignalView {
    pub posterior_a: f64,
    pub vote: Answer,
    pub predicted_fraction: f64,
}

/// Respondent computations for both signals. With `expertise` the
/// expertise-aware posteriors are used.
pub fn signal_views(
    s: &SignalMatrix,
    prior: WorldPrior,
    expertise: Option<Expertise>,
) -> [SignalView; 2] {
    Signal::BOTH.map(|t| {
        let post = match expertise {
            Some(e) => world_posterior_expertise_aware(t, s, prior, e),
            None => world_posterior(t, s, prior),
        };
        SignalView {
            posterior_a: post,
            vote: vote_from_posterior(post, t),
            predicted_fraction: predicted_fraction_from_posterior(post, s, prior),
        }
    })
}
