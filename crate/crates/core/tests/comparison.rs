use possible_worlds::comparison::*;
use possible_worlds::dataset::{Answer, ResponseDataset};
use possible_worlds::rng::stream;
use proptest::prelude::*;
use rand::Rng;
use Answer::{A, B};

fn small_bcc(seed: u64) -> SamplerConfig {
    SamplerConfig { n_burnin: 500, n_iter: 3_000, n_chains: 4, ..SamplerConfig::bcc(seed) }
}

fn small_ch(seed: u64) -> SamplerConfig {
    SamplerConfig { n_burnin: 1_000, n_iter: 4_000, n_chains: 4, ..SamplerConfig::ch(seed) }
}

fn dataset(votes: Vec<Vec<Option<Answer>>>, confidences: Option<Vec<Vec<Option<f64>>>>) -> ResponseDataset {
    let (q, n) = (votes.len(), votes[0].len());
    ResponseDataset::new((0..q).map(|i| format!("q{i}")).collect(), votes, vec![vec![None; n]; q], confidences, None)
        .unwrap()
}

/// Direct product of per-vote masses, with competence written out again.
fn enumerated_bcc(s: &BccState, votes: &[Vec<Option<Answer>>]) -> f64 {
    let mut p = 1.0;
    for (q, row) in votes.iter().enumerate() {
        for (r, v) in row.iter().enumerate() {
            let Some(v) = v else { continue };
            let (t, d) = (s.theta[r], s.delta[q]);
            let c = if t * (1.0 - d) + d * (1.0 - t) == 0.0 { 0.5 } else { t * (1.0 - d) / (t * (1.0 - d) + d * (1.0 - t)) };
            let know = if (*v == A) == s.z[q] { c } else { 0.0 };
            let guess = (1.0 - c) * if *v == A { s.g[r] } else { 1.0 - s.g[r] };
            p *= know + guess;
        }
    }
    p.ln()
}

fn opt_answer() -> impl Strategy<Value = Option<Answer>> {
    prop_oneof![Just(None), Just(Some(A)), Just(Some(B))]
}

proptest! {
    #[test]
    fn bcc_two_by_two_matches_enumeration(
        z in proptest::collection::vec(any::<bool>(), 2),
        theta in proptest::collection::vec(0.01..0.99f64, 2),
        delta in proptest::collection::vec(0.01..0.99f64, 2),
        g in proptest::collection::vec(0.01..0.99f64, 2),
        cells in proptest::collection::vec(opt_answer(), 4),
    ) {
        let votes = vec![cells[..2].to_vec(), cells[2..].to_vec()];
        let s = BccState { z, theta, delta, g };
        prop_assert!((bcc_log_likelihood(&s, &votes) - enumerated_bcc(&s, &votes)).abs() < 1e-12);
    }

    #[test]
    fn competence_monotone(t1 in 0.0..=1.0f64, t2 in 0.0..=1.0f64, d in 0.001..0.999f64) {
        let (lo, hi) = (t1.min(t2), t1.max(t2));
        prop_assert!(bcc_competence(lo, d) <= bcc_competence(hi, d) + 1e-15);
        prop_assert!(bcc_competence(d, lo) >= bcc_competence(d, hi) - 1e-15);
        prop_assert!((bcc_competence(d, d) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn perceived_is_odd(pi in 0.001..0.999f64, delta in 0.0..=1.0f64) {
        prop_assert!((ch_perceived(1.0 - pi, delta) + ch_perceived(pi, delta)).abs() < 1e-12);
    }
}

#[test]
fn full_competence_likelihood() {
    let s = BccState { z: vec![true, false], theta: vec![0.7; 2], delta: vec![0.0; 2], g: vec![0.5; 2] };
    let agree = vec![vec![Some(A), Some(A)], vec![Some(B), None]];
    assert_eq!(bcc_log_likelihood(&s, &agree), 0.0);
    let wrong = vec![vec![Some(A), Some(B)], vec![Some(B), None]];
    assert_eq!(bcc_log_likelihood(&s, &wrong), f64::NEG_INFINITY);
}

#[test]
fn identical_correct_respondents() {
    let key = [A, B, B, A, B, A];
    let votes = key.iter().map(|k| vec![Some(*k); 8]).collect();
    let res = run_bcc(&dataset(votes, None), &small_bcc(1)).unwrap();
    for (p, k) in res.p_consensus_a.iter().zip(key) {
        assert!(if k == A { *p > 0.9 } else { *p < 0.1 }, "{p}");
    }
    assert!(res.theta.iter().all(|t| t.mean > 0.6), "{:?}", res.theta);
}

#[test]
fn dissenter_has_lowest_ability() {
    let mut rng = stream(2, &[]);
    let votes = (0..12)
        .map(|_| {
            let k = Answer::from_is_a(rng.random());
            let mut row = vec![Some(k); 10];
            row[3] = Some(k.flip());
            row
        })
        .collect();
    let res = run_bcc(&dataset(votes, None), &small_bcc(2)).unwrap();
    let lowest = (0..10).min_by(|&a, &b| res.theta[a].mean.total_cmp(&res.theta[b].mean)).unwrap();
    assert_eq!(lowest, 3, "{:?}", res.theta.iter().map(|t| t.mean).collect::<Vec<_>>());
}

#[test]
fn bcc_errors() {
    let one = dataset(vec![vec![Some(A), Some(B)]], None);
    assert_eq!(run_bcc(&one, &small_bcc(1)).unwrap_err(), ComparisonError::TooFewQuestions(1));
    assert_eq!(run_ch(&one, &small_ch(1)).unwrap_err(), ComparisonError::MissingConfidences);
}

#[test]
fn flat_reports_centre_pi() {
    let votes = vec![vec![Some(A), Some(B), Some(A), Some(B)]; 4];
    let confs = Some(vec![vec![Some(0.5); 4]; 4]);
    let res = run_ch(&dataset(votes, confs), &small_ch(3)).unwrap();
    for s in &res.pi {
        assert!((s.mean - 0.5).abs() < 0.05, "{}", s.mean);
    }
}

#[test]
fn ch_follows_report_polarity() {
    let (ds, _) = simulate_ch(10, 12, 4).unwrap();
    let all = (0..10).collect();
    let flipped = ds.reverse_questions(&all).unwrap();
    let a = run_ch(&ds, &small_ch(5)).unwrap();
    let b = run_ch(&flipped, &small_ch(6)).unwrap();
    for (x, y) in a.p_pi_above_half.iter().zip(&b.p_pi_above_half) {
        assert!((x + y - 1.0).abs() < 0.06, "{x} + {y}");
    }
}

#[test]
fn sampled_parameters_stay_in_their_domains() {
    let (ds, _) = simulate_ch(6, 8, 7).unwrap();
    let res = run_ch(&ds, &small_ch(7)).unwrap();
    for s in res.pi.iter().chain(&res.sigma) {
        assert!((0.0..=1.0).contains(&s.mean));
    }
    assert!(res.delta.iter().all(|s| s.mean > 0.0 && s.mean <= 1.0));
    let (ds, _) = simulate_bcc(6, 8, 7).unwrap();
    let res = run_bcc(&ds, &small_bcc(7)).unwrap();
    for s in res.theta.iter().chain(&res.delta).chain(&res.g) {
        assert!((0.0..=1.0).contains(&s.mean));
    }
    assert!(res.p_consensus_a.iter().all(|p| (0.0..=1.0).contains(p)));
}

#[test]
fn coin_flip_respondents_are_not_unidimensional() {
    let mut rng = stream(20, &[]);
    let votes: Vec<Vec<Option<Answer>>> =
        (0..200).map(|_| (0..20).map(|_| Some(Answer::from_is_a(rng.random()))).collect()).collect();
    let e = agreement_eigenratio_with(&votes, Agreement::Guessing).unwrap();
    assert!(e.ratio < UNIDIMENSIONAL_RATIO, "{}", e.ratio);
    assert!(!e.is_unidimensional());
    // Raw agreement puts every pair near 0.5, so the first eigenvalue alone
    // grows with the number of respondents.
    let raw = agreement_eigenratio(&votes).unwrap();
    assert!(raw.ratio > UNIDIMENSIONAL_RATIO, "{}", raw.ratio);
}

#[test]
fn agreement_matrix_is_symmetric_with_unit_diagonal() {
    let mut rng = stream(21, &[]);
    let votes: Vec<Vec<Option<Answer>>> = (0..30)
        .map(|_| (0..6).map(|_| (rng.random::<f64>() < 0.8).then(|| Answer::from_is_a(rng.random()))).collect())
        .collect();
    let (m, _) = agreement_matrix(&votes);
    for i in 0..6 {
        assert_eq!(m[(i, i)], 1.0);
        for j in 0..6 {
            assert_eq!(m[(i, j)], m[(j, i)]);
        }
    }
}

#[test]
fn shared_key_is_unidimensional_either_way() {
    let mut rng = stream(22, &[]);
    let votes: Vec<Vec<Option<Answer>>> = (0..100)
        .map(|_| {
            let k: bool = rng.random();
            (0..15).map(|_| Some(Answer::from_is_a(if rng.random::<f64>() < 0.8 { k } else { !k }))).collect()
        })
        .collect();
    assert!(agreement_eigenratio(&votes).unwrap().is_unidimensional());
    assert!(agreement_eigenratio_with(&votes, Agreement::Guessing).unwrap().is_unidimensional());
}

#[test]
fn eigenratio_needs_two_respondents() {
    assert_eq!(agreement_eigenratio(&[vec![Some(A)]]).unwrap_err(), ComparisonError::TooFewRespondents(1));
}
