//! Metropolis–Hastings inference for the possible-worlds model.
//!
//! Each question's state `(psi, world, s_a, s_b, n_v, n_m[, n_c])` is updated
//! one coordinate at a time with truncated-normal random walks, followed by a
//! proposed flip of the world on every step. In multi-question mode question
//! blocks (run concurrently, expertise frozen) alternate with a block of
//! expertise updates (question states frozen).

mod adapt;
pub mod likelihood;
mod multi;
mod single;

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Answer;
use crate::generator::{sample_question_params, QuestionParams, NV_PRIOR_RATE, NV_PRIOR_SHAPE};
use crate::mcmc::{accept, propose_truncated, AcceptTable, Diagnostics, ParamSummary};
use crate::respondent::{NoiseParams, SignalMatrix, WorldPrior, MAX_NOISE_VARIANCE};

pub use likelihood::{log_likelihood_question, LikelihoodFlags, ObservedQuestion, QuestionLikelihood};
pub use multi::{run_multi_question, MultiTrace};
pub use single::{run_single_question, run_single_questions};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProposalSds {
    pub psi: f64,
    pub s_a: f64,
    pub s_b: f64,
    pub n_v: f64,
    pub n_m: f64,
    pub n_c: f64,
    pub expertise: f64,
}

impl Default for ProposalSds {
    fn default() -> Self {
        ProposalSds { psi: 0.05, s_a: 0.05, s_b: 0.05, n_v: 0.2, n_m: 0.05, n_c: 0.05, expertise: 0.05 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    /// Single-question steps per chain, burn-in included.
    pub n_steps: usize,
    pub n_burnin: usize,
    pub n_chains: usize,
    pub seed: u64,
    pub proposal_sds: ProposalSds,
    pub use_confidences: bool,
    pub expertise_aware: bool,
    /// Multi-question schedule.
    pub n_loops: usize,
    pub burnin_loops: usize,
    pub question_steps: usize,
    pub respondent_steps: usize,
    /// Keep every `thin`-th question state in traces.
    pub thin: usize,
    /// Hold noise parameters at these values instead of sampling them.
    pub fixed_noise: Option<NoiseParams>,
    /// Short adaptive runs from independent starts before burn-in; each
    /// chain keeps the best.
    pub pilot_runs: usize,
    pub pilot_steps: usize,
}

impl ChainConfig {
    pub fn single_question(seed: u64) -> Self {
        ChainConfig {
            n_steps: 50_000,
            n_burnin: 5_000,
            n_chains: 4,
            seed,
            proposal_sds: ProposalSds::default(),
            use_confidences: false,
            expertise_aware: false,
            n_loops: 100,
            burnin_loops: 10,
            question_steps: 2_000,
            respondent_steps: 150,
            thin: 1,
            fixed_noise: None,
            pilot_runs: 20,
            pilot_steps: 300,
        }
    }

    pub fn multi_question(seed: u64) -> Self {
        ChainConfig { thin: 40, ..Self::single_question(seed) }
    }

    pub fn flags(&self) -> LikelihoodFlags {
        LikelihoodFlags { use_confidences: self.use_confidences, expertise_aware: self.expertise_aware }
    }

    pub fn validate(&self) -> Result<(), InferenceError> {
        let sds = &self.proposal_sds;
        let bad = |m: &str| Err(InferenceError::Config(m.to_string()));
        if self.n_burnin >= self.n_steps {
            return bad("n_burnin must be smaller than n_steps");
        }
        if self.burnin_loops >= self.n_loops {
            return bad("burnin_loops must be smaller than n_loops");
        }
        if self.n_chains == 0 || self.thin == 0 || self.question_steps == 0 {
            return bad("n_chains, thin and question_steps must be positive");
        }
        if [sds.psi, sds.s_a, sds.s_b, sds.n_v, sds.n_m, sds.n_c, sds.expertise]
            .iter()
            .any(|s| !(*s > 0.0 && s.is_finite()))
        {
            return bad("proposal standard deviations must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("question {0} has no non-missing votes")]
    NoVotes(String),
    #[error("multi-question inference needs at least 2 questions, got {0}")]
    TooFewQuestions(usize),
    #[error("invalid chain configuration: {0}")]
    Config(String),
    #[error("could not find an initial state with finite posterior for question {0}")]
    Initialization(String),
}

/// Posterior of one question.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuestionPosterior {
    pub id: String,
    /// Post-burn-in average of the world indicator, pooled over chains.
    pub p_world_a: f64,
    pub params: BTreeMap<String, ParamSummary>,
    pub diagnostics: Diagnostics,
    pub acceptance: BTreeMap<String, f64>,
}

/// Posterior of a whole dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub questions: Vec<QuestionPosterior>,
    pub expertise: Option<Vec<ParamSummary>>,
    pub respondent_diagnostics: Option<Diagnostics>,
    pub respondent_acceptance: Option<f64>,
}

impl PosteriorSummary {
    pub fn p_world_a(&self) -> Vec<f64> {
        self.questions.iter().map(|q| q.p_world_a).collect()
    }

    /// All diagnostics, question scalars prefixed by question id.
    pub fn diagnostics(&self) -> Diagnostics {
        let mut d = Diagnostics::default();
        for q in &self.questions {
            d.extend_prefixed(&format!("{}.", q.id), &q.diagnostics);
        }
        if let Some(r) = &self.respondent_diagnostics {
            d.extend_prefixed("", r);
        }
        d
    }
}

/// Recorded (thinned, post-burn-in) states of one question in one chain.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ChainTrace {
    pub psi: Vec<f64>,
    pub world_a: Vec<bool>,
    pub s_a: Vec<f64>,
    pub s_b: Vec<f64>,
    pub n_v: Vec<f64>,
    pub n_m: Vec<f64>,
    pub n_c: Vec<f64>,
    pub acceptance: AcceptTable,
}

impl ChainTrace {
    fn record(&mut self, p: &QuestionParams) {
        self.psi.push(p.prior.psi());
        self.world_a.push(p.world.is_a());
        self.s_a.push(p.signals.s_a());
        self.s_b.push(p.signals.s_b());
        self.n_v.push(p.noise.n_v);
        self.n_m.push(p.noise.n_m);
        if let Some(c) = p.noise.n_c {
            self.n_c.push(c);
        }
    }

    pub fn len(&self) -> usize {
        self.psi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psi.is_empty()
    }

    fn scalars(&self) -> [(&'static str, &[f64]); 6] {
        [
            ("psi", &self.psi),
            ("s_a", &self.s_a),
            ("s_b", &self.s_b),
            ("n_v", &self.n_v),
            ("n_m", &self.n_m),
            ("n_c", &self.n_c),
        ]
    }
}

/// Per-chain traces of one question.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub chains: Vec<ChainTrace>,
}

/// Which scalars the sampler moves.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Moves {
    pub noise: bool,
    pub confidence_noise: bool,
}

/// Summarizes per-chain traces of one question. `world_counts` holds
/// `(world A count, total)` accumulated over every post-burn-in step.
pub(crate) fn summarize_question(
    id: &str,
    chains: &[ChainTrace],
    world_counts: (u64, u64),
    moves: Moves,
) -> QuestionPosterior {
    let mut params = BTreeMap::new();
    let mut diagnostics = Diagnostics::default();
    let n_scalars = match (moves.noise, moves.confidence_noise) {
        (false, _) => 3,
        (true, false) => 5,
        (true, true) => 6,
    };
    for i in 0..n_scalars {
        let name = chains[0].scalars()[i].0;
        let series: Vec<&[f64]> = chains.iter().map(|c| c.scalars()[i].1).collect();
        if series.iter().all(|s| !s.is_empty()) {
            params.insert(name.to_string(), ParamSummary::from_samples(series.iter().copied()));
            diagnostics.add(name, &series);
        }
    }
    let mut acc = AcceptTable::new();
    for c in chains {
        crate::mcmc::merge_accept(&mut acc, &c.acceptance);
    }
    QuestionPosterior {
        id: id.to_string(),
        p_world_a: if world_counts.1 == 0 { 0.5 } else { world_counts.0 as f64 / world_counts.1 as f64 },
        params,
        diagnostics,
        acceptance: crate::mcmc::acceptance_rates(&acc),
    }
}

/// Log prior of a question state (constants dropped): uniform `psi`,
/// `world ~ Bernoulli(psi)`, uniform triangle for `S`, `Gamma(3, rate 3)`
/// vote temperature and uniform noise variances.
pub fn log_prior(p: &QuestionParams) -> f64 {
    let psi = p.prior.psi();
    let world = match p.world {
        Answer::A => psi.ln(),
        Answer::B => (1.0 - psi).ln(),
    };
    let n_v = p.noise.n_v;
    world + (NV_PRIOR_SHAPE - 1.0) * n_v.ln() - NV_PRIOR_RATE * n_v
}

/// One question's sampler: state, cached log posterior and acceptance counts.
pub(crate) struct QuestionChain<'a> {
    pub lik: &'a QuestionLikelihood,
    pub state: QuestionParams,
    pub log_post: f64,
    pub acceptance: AcceptTable,
    pub moves: Moves,
    adapter: adapt::Adapter,
}

const INIT_ATTEMPTS: usize = 10_000;

impl<'a> QuestionChain<'a> {
    /// Starts from a prior draw with finite posterior density.
    /// Starts from a prior draw with finite posterior density.
    fn from_prior<R: Rng + ?Sized>(
        lik: &'a QuestionLikelihood,
        expertise: &[f64],
        cfg: &ChainConfig,
        id: &str,
        rng: &mut R,
    ) -> Result<Self, InferenceError> {
        let confidence_noise = cfg.use_confidences && lik.observed.has_confidences;
        let moves = Moves { noise: cfg.fixed_noise.is_none(), confidence_noise };
        for _ in 0..INIT_ATTEMPTS {
            let mut state = sample_question_params(rng);
            match cfg.fixed_noise {
                Some(noise) => state.noise = noise,
                None if !confidence_noise => state.noise.n_c = None,
                None => {}
            }
            let log_post = log_prior(&state) + lik.ln_likelihood(&state, expertise);
            if log_post.is_finite() {
                return Ok(QuestionChain {
                    lik,
                    state,
                    log_post,
                    acceptance: AcceptTable::new(),
                    moves,
                    adapter: adapt::Adapter::default(),
                });
            }
        }
        Err(InferenceError::Initialization(id.to_string()))
    }

    /// Runs `cfg.pilot_runs` short adaptive pilots from independent prior
    /// draws and continues from the one that ended highest. Sharp posteriors
    /// have minor modes that a single start can sit in for the whole run.
    pub fn init<R: Rng + ?Sized>(
        lik: &'a QuestionLikelihood,
        expertise: &[f64],
        cfg: &ChainConfig,
        id: &str,
        rng: &mut R,
    ) -> Result<Self, InferenceError> {
        let mut best: Option<Self> = None;
        for _ in 0..cfg.pilot_runs.max(1) {
            let mut qc = Self::from_prior(lik, expertise, cfg, id, rng)?;
            for _ in 0..cfg.pilot_steps {
                qc.step(&cfg.proposal_sds, expertise, true, rng);
            }
            if best.as_ref().is_none_or(|b| qc.log_post > b.log_post) {
                best = Some(qc);
            }
        }
        let mut qc = best.expect("at least one pilot");
        qc.acceptance.clear();
        qc.adapter.forget_covariance();
        Ok(qc)
    }

    /// Re-evaluates the cached log posterior after expertise changed.
    pub fn refresh(&mut self, expertise: &[f64]) {
        self.log_post = log_prior(&self.state) + self.lik.ln_likelihood(&self.state, expertise);
    }

    /// Accepts or rejects `candidate`; returns whether it was accepted.
    fn try_move<R: Rng + ?Sized>(
        &mut self,
        name: &str,
        candidate: Option<QuestionParams>,
        log_hastings: f64,
        expertise: &[f64],
        rng: &mut R,
    ) -> bool {
        let accepted = match candidate {
            Some(c) => {
                let lp = log_prior(&c) + self.lik.ln_likelihood(&c, expertise);
                if accept(rng, lp - self.log_post + log_hastings) {
                    self.state = c;
                    self.log_post = lp;
                    true
                } else {
                    false
                }
            }
            None => false,
        };
        self.acceptance.entry(name.to_string()).or_default().record(accepted);
        accepted
    }

    /// Truncated random walk on one coordinate; step size is the base sd
    /// times the adapted multiplier, which is tuned only while `adapt`.
    #[allow(clippy::too_many_arguments)]
    fn coordinate<R: Rng + ?Sized>(
        &mut self,
        name: &str,
        coord: usize,
        current: f64,
        sd: f64,
        (lo, hi): (f64, f64),
        build: impl Fn(&QuestionParams, f64) -> Option<QuestionParams>,
        expertise: &[f64],
        adapt: bool,
        rng: &mut R,
    ) {
        let p = propose_truncated(rng, current, sd * self.adapter.scale(coord), lo, hi);
        let c = build(&self.state, p.value);
        let accepted = self.try_move(name, c, p.log_hastings, expertise, rng);
        if adapt {
            self.adapter.tune(coord, accepted);
        }
    }

    /// One sweep: every continuous coordinate, a joint move on
    /// `(psi, s_a, s_b)` once the adapter has a covariance, then a world
    /// flip. With `adapt` the step sizes are tuned on the way.
    pub fn step<R: Rng + ?Sized>(&mut self, sds: &ProposalSds, expertise: &[f64], adapt: bool, rng: &mut R) {
        use adapt::{N_C, N_M, N_V, PSI, S_A, S_B};
        let unit = (0.0, 1.0);
        let noise_range = (0.0, MAX_NOISE_VARIANCE);

        let cur = self.state.prior.psi();
        self.coordinate("psi", PSI, cur, sds.psi, unit, |s, v| {
            WorldPrior::new(v).ok().map(|prior| QuestionParams { prior, ..*s })
        }, expertise, adapt, rng);

        let cur = self.state.signals.s_a();
        self.coordinate("s_a", S_A, cur, sds.s_a, unit, |s, v| {
            SignalMatrix::new(v, s.signals.s_b()).ok().map(|signals| QuestionParams { signals, ..*s })
        }, expertise, adapt, rng);

        let cur = self.state.signals.s_b();
        self.coordinate("s_b", S_B, cur, sds.s_b, unit, |s, v| {
            SignalMatrix::new(s.signals.s_a(), v).ok().map(|signals| QuestionParams { signals, ..*s })
        }, expertise, adapt, rng);

        if self.moves.noise {
            let cur = self.state.noise.n_v;
            self.coordinate("n_v", N_V, cur, sds.n_v, (0.0, f64::INFINITY), |s, v| {
                NoiseParams::new(v, s.noise.n_m, s.noise.n_c).ok().map(|noise| QuestionParams { noise, ..*s })
            }, expertise, adapt, rng);

            let cur = self.state.noise.n_m;
            self.coordinate("n_m", N_M, cur, sds.n_m, noise_range, |s, v| {
                NoiseParams::new(s.noise.n_v, v, s.noise.n_c).ok().map(|noise| QuestionParams { noise, ..*s })
            }, expertise, adapt, rng);

            if self.moves.confidence_noise {
                let cur = self.state.noise.n_c.unwrap_or(0.25);
                self.coordinate("n_c", N_C, cur, sds.n_c, noise_range, |s, v| {
                    NoiseParams::new(s.noise.n_v, s.noise.n_m, Some(v)).ok().map(|noise| QuestionParams { noise, ..*s })
                }, expertise, adapt, rng);
            }
        }

        let s = self.state;
        let x = [s.prior.psi(), s.signals.s_a(), s.signals.s_b()];
        if let Some([psi, s_a, s_b]) = self.adapter.joint_step(rng, x) {
            // Symmetric proposal; points outside the domain are rejected.
            let c = match (WorldPrior::new(psi), SignalMatrix::new(s_a, s_b)) {
                (Ok(prior), Ok(signals)) => Some(QuestionParams { prior, signals, ..s }),
                _ => None,
            };
            let accepted = self.try_move("joint", c, 0.0, expertise, rng);
            if adapt {
                self.adapter.tune_joint(accepted);
            }
        }

        let s = self.state;
        let flipped = QuestionParams { world: s.world.flip(), ..s };
        self.try_move("world", Some(flipped), 0.0, expertise, rng);

        if adapt {
            let s = self.state;
            self.adapter.observe([s.prior.psi(), s.signals.s_a(), s.signals.s_b()]);
        }
    }
}
