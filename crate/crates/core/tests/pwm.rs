mod common;

use std::collections::BTreeSet;

use possible_worlds::dataset::{Answer, QuestionResponses, ResponseDataset};
use possible_worlds::generator::{sample_question_params, simulate_question, simulate_study, QuestionParams, SimConfig};
use possible_worlds::pwm::*;
use possible_worlds::respondent::{predicted_vote_fraction, NoiseParams, Signal, SignalMatrix, WorldPrior};
use possible_worlds::rng::stream;
use proptest::prelude::*;
use rand::Rng;

use common::{enumeration_ln_likelihood, majority_wrong_study, observations};

fn params(psi: f64, world: Answer, s_a: f64, s_b: f64, noise: NoiseParams) -> QuestionParams {
    QuestionParams {
        prior: WorldPrior::new(psi).unwrap(),
        world,
        signals: SignalMatrix::new(s_a, s_b).unwrap(),
        noise,
    }
}

fn quick(seed: u64) -> ChainConfig {
    ChainConfig { n_steps: 12_000, n_burnin: 2_000, pilot_runs: 6, ..ChainConfig::single_question(seed) }
}

fn quick_multi(seed: u64) -> ChainConfig {
    ChainConfig {
        n_loops: 50,
        burnin_loops: 10,
        question_steps: 300,
        respondent_steps: 60,
        thin: 5,
        pilot_runs: 6,
        ..ChainConfig::multi_question(seed)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn three_respondents_match_enumeration(
        seed in 0u64..1_000_000,
        conf in any::<bool>(),
        aware in any::<bool>(),
        drop_pred in any::<bool>(),
    ) {
        let mut rng = stream(seed, &[]);
        let mut cfg = SimConfig::new(1, 3, seed);
        cfg.with_confidence = conf;
        cfg.expertise_aware_respondents = aware;
        let mut p = sample_question_params(&mut rng);
        let expertise: Vec<f64> = (0..3).map(|_| rng.random()).collect();
        let sim = simulate_question(&p, &expertise, &cfg, &mut rng);
        let votes: Vec<_> = sim.votes.iter().map(|v| Some(*v)).collect();
        let mut preds: Vec<_> = sim.predictions.iter().map(|m| Some(*m)).collect();
        if drop_pred {
            preds[1] = None;
        }
        let confs: Option<Vec<_>> = sim.confidences.map(|c| c.into_iter().map(Some).collect());
        let resp = QuestionResponses { votes: &votes, predictions: &preds, confidences: confs.as_deref() };
        if !conf {
            p.noise.n_c = None;
        }
        let flags = LikelihoodFlags { use_confidences: conf, expertise_aware: aware };
        let got = log_likelihood_question(&p, &resp, &expertise, flags);
        let want = enumeration_ln_likelihood(&p, &observations(&resp, conf), &expertise, aware);
        prop_assert!((got - want).abs() < 1e-9, "{got} vs {want}");
    }

    /// Boundary parameter values may give -inf but never NaN.
    #[test]
    fn never_nan(
        seed in 0u64..1_000_000,
        psi in prop_oneof![Just(0.0), Just(1.0), 0.0..=1.0f64],
        s_a in prop_oneof![Just(1.0), 0.5..=1.0f64],
        s_b in prop_oneof![Just(0.0), 0.0..0.5f64],
        n_m in prop_oneof![Just(0.0), 0.0..=0.5f64],
        n_v in prop_oneof![Just(1e-300), 1e-6..10.0f64],
        world_a in any::<bool>(),
    ) {
        let mut rng = stream(seed, &[]);
        let sim_p = sample_question_params(&mut rng);
        let sim = simulate_question(&sim_p, &[], &SimConfig::new(1, 5, seed), &mut rng);
        let votes: Vec<_> = sim.votes.iter().map(|v| Some(*v)).collect();
        let preds: Vec<_> = sim.predictions.iter().map(|m| Some(*m)).collect();
        let resp = QuestionResponses { votes: &votes, predictions: &preds, confidences: None };
        let p = params(psi, Answer::from_is_a(world_a), s_a, s_b, NoiseParams::new(n_v, n_m, None).unwrap());
        let l = log_likelihood_question(&p, &resp, &[], LikelihoodFlags::default());
        prop_assert!(!l.is_nan());
        prop_assert!(l < f64::INFINITY);
    }
}

#[test]
fn lone_vote_with_flat_softmax_is_log_half() {
    let votes = [Some(Answer::B)];
    let resp = QuestionResponses { votes: &votes, predictions: &[None], confidences: None };
    let p = params(0.3, Answer::A, 0.9, 0.2, NoiseParams::new(1e12, 0.1, None).unwrap());
    let l = log_likelihood_question(&p, &resp, &[], LikelihoodFlags::default());
    assert!((l - 0.5f64.ln()).abs() < 1e-9, "{l}");
}

#[test]
fn zero_prediction_noise_off_the_mean_is_impossible() {
    let votes = [Some(Answer::A)];
    let preds = [Some(0.3)];
    let resp = QuestionResponses { votes: &votes, predictions: &preds, confidences: None };
    let p = params(0.5, Answer::A, 0.8, 0.7, NoiseParams::new(0.5, 0.0, None).unwrap());
    assert_eq!(log_likelihood_question(&p, &resp, &[], LikelihoodFlags::default()), f64::NEG_INFINITY);
}

#[test]
fn generating_prior_maximises_a_consistent_response() {
    // One signal-a respondent reporting the ideal vote and prediction; near
    // the noiseless limit the prediction pins psi.
    let truth = params(0.5, Answer::A, 0.8, 0.7, NoiseParams::new(1e-3, 1e-4, None).unwrap());
    let m = predicted_vote_fraction(Signal::A, &truth.signals, truth.prior);
    let votes = [Some(Answer::A)];
    let preds = [Some(m)];
    let resp = QuestionResponses { votes: &votes, predictions: &preds, confidences: None };
    let at = |psi: f64| {
        let p = QuestionParams { prior: WorldPrior::new(psi).unwrap(), ..truth };
        log_likelihood_question(&p, &resp, &[], LikelihoodFlags::default())
    };
    let grid: Vec<f64> = (0..=100).map(|i| f64::from(i) / 100.0).collect();
    let best = grid.iter().copied().max_by(|a, b| at(*a).total_cmp(&at(*b))).unwrap();
    assert_eq!(best, 0.5);
    assert!(at(0.5).is_finite());
}

#[test]
fn majority_wrong_question_recovers_world_b() {
    let (ds, truth) = majority_wrong_study(2, 20, 0.01, 1e-6, 8);
    assert_eq!(truth.params[0].world, Answer::B);
    assert!(ds.question(0).vote_fraction_a().unwrap() >= 0.65);
    let (post, _) = run_single_question("q0", &ds.question(0), &[], &ChainConfig::single_question(3)).unwrap();
    assert!(post.p_world_a < 0.5, "{}", post.p_world_a);
}

#[test]
fn symmetric_data_gives_even_odds() {
    // Every (A, x) has a matching (B, 1 - x), so flipping labels permutes the
    // respondents. Identical predictions would make the posterior improper
    // as the prediction noise goes to zero.
    let xs = [0.7, 0.4, 0.55, 0.5, 0.62];
    let votes: Vec<_> = xs.iter().flat_map(|_| [Some(Answer::A), Some(Answer::B)]).collect();
    let preds: Vec<_> = xs.iter().flat_map(|x| [Some(*x), Some(1.0 - x)]).collect();
    let resp = QuestionResponses { votes: &votes, predictions: &preds, confidences: None };
    let (post, _) = run_single_question("sym", &resp, &[], &quick(4)).unwrap();
    assert!((0.45..=0.55).contains(&post.p_world_a), "{}", post.p_world_a);
}

#[test]
fn label_flip_complements_world_posterior() {
    let (ds, _) = simulate_study(&SimConfig::new(3, 10, 21)).unwrap();
    let all: BTreeSet<usize> = (0..3).collect();
    let flipped = ds.reverse_questions(&all).unwrap();
    let (a, _) = run_single_questions(&ds, &quick(5)).unwrap();
    let (b, _) = run_single_questions(&flipped, &quick(6)).unwrap();
    for (x, y) in a.p_world_a().iter().zip(b.p_world_a()) {
        assert!((x + y - 1.0).abs() < 0.05, "{x} + {y}");
    }
}

#[test]
fn traces_respect_domains_and_are_reproducible() {
    let (ds, _) = simulate_study(&SimConfig::new(2, 8, 22)).unwrap();
    let cfg = ChainConfig { n_steps: 3_000, n_burnin: 500, ..quick(7) };
    let (p1, t1) = run_single_question("q0", &ds.question(0), &[], &cfg).unwrap();
    let (p2, t2) = run_single_question("q0", &ds.question(0), &[], &cfg).unwrap();
    assert_eq!(p1, p2);
    assert_eq!(t1, t2);
    for c in &t1.chains {
        assert_eq!(c.len(), 2_500);
        for i in 0..c.len() {
            assert!(c.s_a[i] > c.s_b[i] && (0.0..=1.0).contains(&c.s_b[i]) && c.s_a[i] <= 1.0);
            assert!((0.0..=1.0).contains(&c.psi[i]));
            assert!(c.n_v[i] > 0.0 && (0.0..=0.5).contains(&c.n_m[i]));
        }
    }
}

#[test]
fn no_votes_is_an_error() {
    let votes = [None, None];
    let resp = QuestionResponses { votes: &votes, predictions: &[Some(0.5), None], confidences: None };
    assert!(matches!(run_single_question("empty", &resp, &[], &quick(1)), Err(InferenceError::NoVotes(_))));
}

fn multi_study() -> ResponseDataset {
    let (ds, _) = common::fixed_noise_study(8, 12, NoiseParams::new(0.1, 0.01, None).unwrap(), false, 23);
    ds
}

#[test]
fn multi_agrees_with_single_runs_at_its_expertise() {
    // Eight questions barely identify expertise, so the multi run averages
    // over a wide expertise posterior. Conditioning single runs on its
    // posterior means should still land close on every question.
    let ds = multi_study();
    let (multi, _) = run_multi_question(&ds, &quick_multi(8)).unwrap();
    let e: Vec<f64> = multi.expertise.as_ref().unwrap().iter().map(|s| s.mean).collect();
    let ids = ds.question_ids();
    let mut diffs: Vec<f64> = (0..ds.n_questions())
        .map(|q| {
            let (s, _) = run_single_question(&ids[q], &ds.question(q), &e, &quick(9)).unwrap();
            (s.p_world_a - multi.p_world_a()[q]).abs()
        })
        .collect();
    diffs.sort_by(f64::total_cmp);
    assert!(diffs[diffs.len() / 2] < 0.03, "{diffs:?}");
    assert!(diffs[diffs.len() - 1] < 0.3, "{diffs:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Zero expertise everywhere is the same as no expertise at all.
    #[test]
    fn zero_expertise_reduces_to_base_model(seed in 0u64..100_000, aware in any::<bool>()) {
        let mut rng = stream(seed, &[]);
        let p = sample_question_params(&mut rng);
        let sim = simulate_question(&p, &[], &SimConfig::new(1, 6, seed), &mut rng);
        let votes: Vec<_> = sim.votes.iter().map(|v| Some(*v)).collect();
        let preds: Vec<_> = sim.predictions.iter().map(|m| Some(*m)).collect();
        let resp = QuestionResponses { votes: &votes, predictions: &preds, confidences: None };
        let flags = LikelihoodFlags { use_confidences: false, expertise_aware: aware };
        let base = log_likelihood_question(&p, &resp, &[], LikelihoodFlags::default());
        prop_assert_eq!(log_likelihood_question(&p, &resp, &[0.0; 6], flags), base);
    }
}

#[test]
fn multi_seeds_agree() {
    let ds = multi_study();
    let (a, _) = run_multi_question(&ds, &quick_multi(10)).unwrap();
    let (b, _) = run_multi_question(&ds, &quick_multi(11)).unwrap();
    for (x, y) in a.p_world_a().iter().zip(b.p_world_a()) {
        assert!((x - y).abs() < 0.05, "{x} vs {y}");
    }
}

#[test]
fn multi_needs_two_questions() {
    let (ds, _) = simulate_study(&SimConfig::new(1, 5, 1)).unwrap();
    assert!(matches!(run_multi_question(&ds, &quick_multi(1)), Err(InferenceError::TooFewQuestions(1))));
}
