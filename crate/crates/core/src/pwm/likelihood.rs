//! Marginalized likelihood of one question's responses.
//!
//! For respondent `r` with expertise `e`, the private signal is summed out:
//!
//! ```text
//! L_r = sum_t P(t | world, S, e) * P(vote | t) * f(prediction | t) * f(confidence | t)
//! ```
//!
//! with a softmax vote mass and truncated-normal densities on `[0, 1]`.
//! Missing predictions or confidences drop their factor; a missing vote drops
//! the respondent.

use crate::dataset::{Answer, QuestionResponses};
use crate::dist::{ln_add_exp, ln_normal_mass, truncated_normal_ln_pdf, MIN_VARIANCE};
use crate::generator::QuestionParams;
use crate::respondent::{
    log_vote_probability, posterior_on, signal_probability, signal_views, Expertise, Signal,
    SignalView,
};

/// Which optional channels and respondent model the likelihood uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LikelihoodFlags {
    pub use_confidences: bool,
    pub expertise_aware: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observation {
    pub respondent: usize,
    pub vote: Answer,
    pub prediction: Option<f64>,
    pub confidence: Option<f64>,
}

/// The respondents of one question who cast a vote.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservedQuestion {
    pub observations: Vec<Observation>,
    pub has_confidences: bool,
}

impl ObservedQuestion {
    pub fn new(responses: &QuestionResponses<'_>, use_confidences: bool) -> Self {
        let observations: Vec<Observation> = responses
            .votes
            .iter()
            .enumerate()
            .filter_map(|(r, v)| {
                v.map(|vote| Observation {
                    respondent: r,
                    vote,
                    prediction: responses.predictions.get(r).copied().flatten(),
                    confidence: if use_confidences {
                        responses.confidences.and_then(|c| c[r])
                    } else {
                        None
                    },
                })
            })
            .collect();
        let has_confidences = observations.iter().any(|o| o.confidence.is_some());
        ObservedQuestion { observations, has_confidences }
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}

/// Normal density on `[0, 1]` with fixed mean and variance, with the
/// normalizer precomputed.
#[derive(Clone, Copy, Debug)]
struct UnitNormal {
    mean: f64,
    variance: f64,
    inv_two_var: f64,
    ln_norm: f64,
}

impl UnitNormal {
    fn new(mean: f64, variance: f64) -> Self {
        if variance > MIN_VARIANCE {
            let sd = variance.sqrt();
            let mass = ln_normal_mass(-mean / sd, (1.0 - mean) / sd);
            UnitNormal {
                mean,
                variance,
                inv_two_var: 0.5 / variance,
                ln_norm: -0.918_938_533_204_672_8 - sd.ln() - mass,
            }
        } else {
            UnitNormal { mean, variance, inv_two_var: f64::NAN, ln_norm: f64::NAN }
        }
    }

    #[inline]
    fn ln_pdf(&self, x: f64) -> f64 {
        if self.inv_two_var.is_nan() {
            return truncated_normal_ln_pdf(x, self.mean, self.variance, 0.0, 1.0);
        }
        if !(0.0..=1.0).contains(&x) {
            return f64::NEG_INFINITY;
        }
        let d = x - self.mean;
        self.ln_norm - d * d * self.inv_two_var
    }
}

/// Per-signal quantities of a respondent model, for a fixed question state.
#[derive(Clone, Copy, Debug)]
pub(crate) struct SignalTerms {
    /// `[signal][vote]` log vote mass.
    ln_vote: [[f64; 2]; 2],
    prediction: [UnitNormal; 2],
    /// `[signal][vote]` confidence density.
    confidence: Option<[[UnitNormal; 2]; 2]>,
}

impl SignalTerms {
    pub(crate) fn new(params: &QuestionParams, expertise: Option<f64>, with_confidence: bool) -> Self {
        let views: [SignalView; 2] = signal_views(
            &params.signals,
            params.prior,
            expertise.map(|e| Expertise::new(e.clamp(0.0, 1.0)).expect("clamped")),
        );
        let n_v = params.noise.n_v;
        let ln_vote = views.map(|v| {
            [
                log_vote_probability(v.posterior_a, n_v, Answer::A),
                log_vote_probability(v.posterior_a, n_v, Answer::B),
            ]
        });
        let prediction = views.map(|v| UnitNormal::new(v.predicted_fraction, params.noise.n_m));
        let confidence = if with_confidence {
            let n_c = params.noise.n_c.unwrap_or(0.0);
            Some(views.map(|v| {
                [
                    UnitNormal::new(posterior_on(v.posterior_a, Answer::A), n_c),
                    UnitNormal::new(posterior_on(v.posterior_a, Answer::B), n_c),
                ]
            }))
        } else {
            None
        };
        SignalTerms { ln_vote, prediction, confidence }
    }

    /// Log likelihood of `obs` given that the respondent holds `signal`.
    #[inline]
    fn ln_given_signal(&self, signal: Signal, obs: &Observation) -> f64 {
        let t = signal as usize;
        let mut l = self.ln_vote[t][obs.vote as usize];
        if let Some(m) = obs.prediction {
            l += self.prediction[t].ln_pdf(m);
        }
        if let (Some(c), Some(conf)) = (obs.confidence, &self.confidence) {
            l += conf[t][obs.vote as usize].ln_pdf(c);
        }
        l
    }
}

/// Signal-marginalized log likelihood of one respondent.
#[inline]
pub(crate) fn respondent_ln_likelihood(
    params: &QuestionParams,
    terms: &SignalTerms,
    obs: &Observation,
    expertise: f64,
) -> f64 {
    let (s_a, s_b) = (params.signals.s_a(), params.signals.s_b());
    let world_a = params.world.is_a();
    let mut acc = f64::NEG_INFINITY;
    for t in Signal::BOTH {
        let w = signal_probability(s_a, s_b, world_a, expertise, t);
        if w > 0.0 {
            acc = ln_add_exp(acc, w.ln() + terms.ln_given_signal(t, obs));
        }
    }
    acc
}

/// Per-question likelihood evaluator.
#[derive(Clone, Debug)]
pub struct QuestionLikelihood {
    pub observed: ObservedQuestion,
    pub flags: LikelihoodFlags,
}

impl QuestionLikelihood {
    pub fn new(responses: &QuestionResponses<'_>, flags: LikelihoodFlags) -> Self {
        QuestionLikelihood { observed: ObservedQuestion::new(responses, flags.use_confidences), flags }
    }

    fn with_confidence(&self) -> bool {
        self.flags.use_confidences && self.observed.has_confidences
    }

    pub(crate) fn base_terms(&self, params: &QuestionParams) -> SignalTerms {
        SignalTerms::new(params, None, self.with_confidence())
    }

    fn expertise_of(expertise: &[f64], r: usize) -> f64 {
        expertise.get(r).copied().unwrap_or(0.0)
    }

    /// Log likelihood of the whole question. `expertise` is indexed by
    /// respondent; absent entries count as 0.
    pub fn ln_likelihood(&self, params: &QuestionParams, expertise: &[f64]) -> f64 {
        let conf = self.with_confidence();
        let base = (!self.flags.expertise_aware).then(|| SignalTerms::new(params, None, conf));
        let mut total = 0.0;
        for obs in &self.observed.observations {
            let e = Self::expertise_of(expertise, obs.respondent);
            let l = match &base {
                Some(terms) => respondent_ln_likelihood(params, terms, obs, e),
                None => respondent_ln_likelihood(params, &SignalTerms::new(params, Some(e), conf), obs, e),
            };
            total += l;
            if total == f64::NEG_INFINITY {
                break;
            }
        }
        total
    }

    /// Log likelihood of observation `i` under expertise `e`, using `base`
    /// terms unless the respondent model is expertise-aware.
    pub(crate) fn observation_ln_likelihood(
        &self,
        params: &QuestionParams,
        base: &SignalTerms,
        i: usize,
        e: f64,
    ) -> f64 {
        let obs = &self.observed.observations[i];
        if self.flags.expertise_aware {
            let terms = SignalTerms::new(params, Some(e), self.with_confidence());
            respondent_ln_likelihood(params, &terms, obs, e)
        } else {
            respondent_ln_likelihood(params, base, obs, e)
        }
    }
}

/// Signal-marginalized log likelihood of one question's responses.
pub fn log_likelihood_question(
    params: &QuestionParams,
    responses: &QuestionResponses<'_>,
    expertise: &[f64],
    flags: LikelihoodFlags,
) -> f64 {
    QuestionLikelihood::new(responses, flags).ln_likelihood(params, expertise)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::respondent::{NoiseParams, SignalMatrix, WorldPrior};

    #[test]
    fn flat_vote_only_respondent_gives_log_half() {
        let params = QuestionParams {
            prior: WorldPrior::new(0.3).unwrap(),
            world: Answer::B,
            signals: SignalMatrix::new(0.9, 0.2).unwrap(),
            noise: NoiseParams::new(1e9, 0.1, None).unwrap(),
        };
        let votes = [Some(Answer::A)];
        let preds = [None];
        let responses = QuestionResponses { votes: &votes, predictions: &preds, confidences: None };
        let l = log_likelihood_question(&params, &responses, &[], LikelihoodFlags::default());
        assert!((l - 0.5f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn zero_prediction_noise_off_mean_is_impossible() {
        let params = QuestionParams {
            prior: WorldPrior::new(0.5).unwrap(),
            world: Answer::A,
            signals: SignalMatrix::new(0.8, 0.7).unwrap(),
            noise: NoiseParams::new(1.0, 0.0, None).unwrap(),
        };
        let votes = [Some(Answer::A)];
        let preds = [Some(0.1)];
        let responses = QuestionResponses { votes: &votes, predictions: &preds, confidences: None };
        let l = log_likelihood_question(&params, &responses, &[], LikelihoodFlags::default());
        assert_eq!(l, f64::NEG_INFINITY);
    }
}
