//! Independent reference computations shared by the integration tests.
//!
//! Nothing here calls into the crate's likelihood code: the respondent model
//! is re-derived from its definition and the signal vector is enumerated
//! explicitly.

#![allow(dead_code)]

use possible_worlds::dataset::{Answer, QuestionResponses, ResponseDataset};
use possible_worlds::generator::{simulate_responses, GroundTruth, QuestionParams, SimConfig};
use possible_worlds::respondent::{NoiseParams, Signal, SignalMatrix, WorldPrior};
use possible_worlds::rng::stream;
use statrs::distribution::{Continuous, Normal};

/// One respondent's observed responses.
#[derive(Clone, Copy, Debug)]
pub struct Obs {
    pub vote: Answer,
    pub prediction: Option<f64>,
    pub confidence: Option<f64>,
}

pub fn observations(resp: &QuestionResponses<'_>, use_confidences: bool) -> Vec<(usize, Obs)> {
    resp.votes
        .iter()
        .enumerate()
        .filter_map(|(r, v)| {
            v.map(|vote| {
                (
                    r,
                    Obs {
                        vote,
                        prediction: resp.predictions[r],
                        confidence: if use_confidences { resp.confidences.and_then(|c| c[r]) } else { None },
                    },
                )
            })
        })
        .collect()
}

/// Log density of a normal truncated to [0, 1]. The density comes from
/// statrs; the mass uses erf directly since statrs' cdf is only good to
/// ~1e-11, which adds up over ten respondents.
pub fn unit_truncnorm_ln_pdf(x: f64, mean: f64, var: f64) -> f64 {
    if !(0.0..=1.0).contains(&x) {
        return f64::NEG_INFINITY;
    }
    let sd = var.sqrt();
    let z = |v: f64| (v - mean) / (sd * std::f64::consts::SQRT_2);
    let mass = 0.5 * (libm::erf(z(1.0)) - libm::erf(z(0.0)));
    Normal::new(mean, sd).unwrap().ln_pdf(x) - mass.ln()
}

/// P(signal a | world) for a respondent with expertise `e`.
pub fn p_signal_a(s_a: f64, s_b: f64, world: Answer, e: f64) -> f64 {
    match world {
        Answer::A => s_a + e * (1.0 - s_a),
        Answer::B => s_b * (1.0 - e),
    }
}

fn p_signal(s_a: f64, s_b: f64, world: Answer, e: f64, t: Signal) -> f64 {
    let a = p_signal_a(s_a, s_b, world, e);
    if t == Signal::A {
        a
    } else {
        1.0 - a
    }
}

/// What a respondent holding `t` believes and reports, from the definitions.
pub struct Reasoning {
    pub post_a: f64,
    pub predicted: f64,
}

pub fn reason(psi: f64, s_a: f64, s_b: f64, t: Signal, e_aware: Option<f64>) -> Reasoning {
    let post = |t: Signal, e: f64| {
        let la = p_signal(s_a, s_b, Answer::A, e, t) * psi;
        let lb = p_signal(s_a, s_b, Answer::B, e, t) * (1.0 - psi);
        if la + lb > 0.0 {
            la / (la + lb)
        } else {
            psi
        }
    };
    let own = post(t, e_aware.unwrap_or(0.0));
    // Others: base respondents voting for their more probable world,
    // ties going to the signal's own label.
    let base_vote_a = |t: Signal| {
        let p = post(t, 0.0);
        p > 0.5 || (p == 0.5 && t == Signal::A)
    };
    let other_a = own * s_a + (1.0 - own) * s_b;
    let mut predicted = 0.0;
    if base_vote_a(Signal::A) {
        predicted += other_a;
    }
    if base_vote_a(Signal::B) {
        predicted += 1.0 - other_a;
    }
    Reasoning { post_a: own, predicted }
}

/// Log density of one respondent's responses given their signal.
fn response_ln_density(p: &QuestionParams, t: Signal, o: &Obs, e: f64, aware: bool) -> f64 {
    let (psi, s_a, s_b) = (p.prior.psi(), p.signals.s_a(), p.signals.s_b());
    let r = reason(psi, s_a, s_b, t, aware.then_some(e));
    let x = (2.0 * r.post_a - 1.0) / p.noise.n_v;
    let x = if o.vote == Answer::A { x } else { -x };
    // ln(1 / (1 + exp(-x)))
    let mut d = -(-x).exp().ln_1p();
    if x < -30.0 {
        d = x - x.exp().ln_1p();
    }
    if let Some(m) = o.prediction {
        d += unit_truncnorm_ln_pdf(m, r.predicted, p.noise.n_m);
    }
    if let (Some(c), Some(n_c)) = (o.confidence, p.noise.n_c) {
        let mean = if o.vote == Answer::A { r.post_a } else { 1.0 - r.post_a };
        d += unit_truncnorm_ln_pdf(c, mean, n_c);
    }
    d
}

/// Log likelihood by summing over all 2^N joint signal assignments.
pub fn enumeration_ln_likelihood(
    p: &QuestionParams,
    obs: &[(usize, Obs)],
    expertise: &[f64],
    aware: bool,
) -> f64 {
    let n = obs.len();
    assert!(n <= 16, "enumeration is exponential");
    let e_of = |r: usize| expertise.get(r).copied().unwrap_or(0.0);
    // Per-respondent factors for both signals, in log space.
    let terms: Vec<[f64; 2]> = obs
        .iter()
        .map(|(r, o)| {
            Signal::BOTH.map(|t| {
                let e = e_of(*r);
                p_signal(p.signals.s_a(), p.signals.s_b(), p.world, e, t).ln() + response_ln_density(p, t, o, e, aware)
            })
        })
        .collect();
    let mut logs = Vec::with_capacity(1 << n);
    for mask in 0u32..(1u32 << n) {
        let l: f64 = terms.iter().enumerate().map(|(i, t)| t[((mask >> i) & 1) as usize]).sum();
        logs.push(l);
    }
    let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + logs.iter().map(|l| (l - m).exp()).sum::<f64>().ln()
}

/// P(world = A | responses) by quadrature over a lattice in `(psi, s_a,
/// s_b)` with `points` values per axis, noise held at `noise`. The
/// priors are uniform on the lattice (restricted to `s_b < s_a`) and
/// `world ~ Bernoulli(psi)`.
pub fn grid_posterior_world_a(obs: &[(usize, Obs)], noise: NoiseParams, points: usize) -> f64 {
    let step = 1.0 / (points - 1) as f64;
    let mut log_terms: Vec<(f64, bool)> = Vec::new();
    for i in 0..points {
        let psi = i as f64 * step;
        for j in 0..points {
            let s_a = j as f64 * step;
            for k in 0..j {
                let s_b = k as f64 * step;
                for world in [Answer::A, Answer::B] {
                    let w = if world == Answer::A { psi } else { 1.0 - psi };
                    if w == 0.0 {
                        continue;
                    }
                    let p = QuestionParams {
                        prior: WorldPrior::new(psi).unwrap(),
                        world,
                        signals: SignalMatrix::new(s_a, s_b).unwrap(),
                        noise,
                    };
                    // Respondents are independent given the state, so the
                    // enumeration factorizes per respondent.
                    let l: f64 = obs
                        .iter()
                        .map(|(_, o)| {
                            Signal::BOTH
                                .iter()
                                .map(|&t| {
                                    p_signal(s_a, s_b, world, 0.0, t) * response_ln_density(&p, t, o, 0.0, false).exp()
                                })
                                .sum::<f64>()
                                .ln()
                        })
                        .sum();
                    log_terms.push((w.ln() + l, world == Answer::A));
                }
            }
        }
    }
    let m = log_terms.iter().map(|t| t.0).fold(f64::NEG_INFINITY, f64::max);
    let (mut a, mut total) = (0.0, 0.0);
    for (l, is_a) in log_terms {
        let w = (l - m).exp();
        total += w;
        if is_a {
            a += w;
        }
    }
    a / total
}

/// The constructed study in which the majority is wrong on every question:
/// `s_a = 0.8, s_b = 0.7, psi = 0.5`, world `B`, with exactly
/// `round(0.7 N)` respondents receiving signal `a`. The second half of the
/// questions use the relabelled matrix (`s_a = 0.3, s_b = 0.2`, world `A`)
/// so that both answers occur in the key.
pub fn majority_wrong_study(n_questions: usize, n_respondents: usize, n_v: f64, n_m: f64, seed: u64) -> (ResponseDataset, GroundTruth) {
    let cfg = SimConfig::new(n_questions, n_respondents, seed);
    let (mut votes, mut preds, mut params) = (Vec::new(), Vec::new(), Vec::new());
    for q in 0..n_questions {
        let mirrored = q >= n_questions / 2;
        let (s_a, s_b, world) = if mirrored { (0.3, 0.2, Answer::A) } else { (0.8, 0.7, Answer::B) };
        let p = QuestionParams {
            prior: WorldPrior::new(0.5).unwrap(),
            world,
            signals: SignalMatrix::new(s_a, s_b).unwrap(),
            noise: NoiseParams::new(n_v, n_m, None).unwrap(),
        };
        let p_a = p_signal_a(s_a, s_b, world, 0.0);
        let n_a = (p_a * n_respondents as f64).round() as usize;
        let signals: Vec<Signal> = (0..n_respondents).map(|r| if r < n_a { Signal::A } else { Signal::B }).collect();
        let mut rng = stream(seed, &[q as u64]);
        let sim = simulate_responses(&p, &signals, &[], &cfg, &mut rng);
        votes.push(sim.votes.into_iter().map(Some).collect());
        preds.push(sim.predictions.into_iter().map(Some).collect());
        params.push(p);
    }
    let key: Vec<Answer> = params.iter().map(|p| p.world).collect();
    let ds = ResponseDataset::new(
        (0..n_questions).map(|q| format!("q{q}")).collect(),
        votes,
        preds,
        None,
        Some(key.clone()),
    )
    .unwrap();
    (ds, GroundTruth { params, expertise: vec![0.0; n_respondents], key })
}

/// Pearson correlation computed directly.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

/// A study in which signal `a` is common in both worlds (`s_a` in
/// [0.9, 0.97], `s_b` in [0.55, 0.7]), so respondents lean towards `A`
/// whatever the truth. Worlds alternate `A`, `B`; confidences included.
pub fn a_leaning_study(n_questions: usize, n_respondents: usize, seed: u64) -> (ResponseDataset, GroundTruth) {
    use possible_worlds::generator::simulate_question;
    use rand::Rng;
    let mut cfg = SimConfig::new(n_questions, n_respondents, seed);
    cfg.with_confidence = true;
    let (mut votes, mut preds, mut confs, mut params) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for q in 0..n_questions {
        let mut rng = stream(seed, &[q as u64]);
        let s_a = rng.random_range(0.9..0.97);
        let s_b = rng.random_range(0.55..0.7);
        let p = QuestionParams {
            prior: WorldPrior::new(0.5).unwrap(),
            world: if q % 2 == 0 { Answer::A } else { Answer::B },
            signals: SignalMatrix::new(s_a, s_b).unwrap(),
            noise: NoiseParams::new(0.05, 0.002, Some(0.01)).unwrap(),
        };
        let sim = simulate_question(&p, &[], &cfg, &mut rng);
        votes.push(sim.votes.into_iter().map(Some).collect());
        preds.push(sim.predictions.into_iter().map(Some).collect());
        confs.push(sim.confidences.unwrap().into_iter().map(Some).collect());
        params.push(p);
    }
    let key: Vec<Answer> = params.iter().map(|p| p.world).collect();
    let ds = ResponseDataset::new(
        (0..n_questions).map(|q| format!("q{q}")).collect(),
        votes,
        preds,
        Some(confs),
        Some(key.clone()),
    )
    .unwrap();
    (ds, GroundTruth { params, expertise: vec![0.0; n_respondents], key })
}

/// Questions drawn from the prior except for the noise, which is fixed at
/// `noise` for all of them. Expertise is uniform on [0, 1] when
/// `with_expertise`.
pub fn fixed_noise_study(
    n_questions: usize,
    n_respondents: usize,
    noise: NoiseParams,
    with_expertise: bool,
    seed: u64,
) -> (ResponseDataset, GroundTruth) {
    use possible_worlds::generator::{sample_question_params, simulate_question};
    use rand::Rng;
    let cfg = SimConfig::new(n_questions, n_respondents, seed);
    let expertise: Vec<f64> = if with_expertise {
        let mut rng = stream(seed, &[u64::MAX]);
        (0..n_respondents).map(|_| rng.random()).collect()
    } else {
        vec![0.0; n_respondents]
    };
    let (mut votes, mut preds, mut params) = (Vec::new(), Vec::new(), Vec::new());
    for q in 0..n_questions {
        let mut rng = stream(seed, &[q as u64]);
        let p = QuestionParams { noise, ..sample_question_params(&mut rng) };
        let sim = simulate_question(&p, &expertise, &cfg, &mut rng);
        votes.push(sim.votes.into_iter().map(Some).collect());
        preds.push(sim.predictions.into_iter().map(Some).collect());
        params.push(p);
    }
    let key: Vec<Answer> = params.iter().map(|p| p.world).collect();
    let ds = ResponseDataset::new(
        (0..n_questions).map(|q| format!("q{q}")).collect(),
        votes,
        preds,
        None,
        Some(key.clone()),
    )
    .unwrap();
    (ds, GroundTruth { params, expertise, key })
}
