use possible_worlds::baselines::Baseline;
use possible_worlds::dataset::{Answer, ResponseDataset};
use possible_worlds::generator::{simulate_study, SimConfig};
use possible_worlds::io::to_json_string;
use possible_worlds::metrics::HardAnswer;
use possible_worlds::pwm::{run_single_questions, ChainConfig};
use possible_worlds::report::*;

fn keyed_study(seed: u64) -> ResponseDataset {
    let mut cfg = SimConfig::new(6, 10, seed);
    cfg.with_confidence = true;
    simulate_study(&cfg).unwrap().0
}

#[test]
fn method_names_round_trip() {
    for m in Method::ALL {
        assert_eq!(m.name().parse::<Method>(), Ok(m));
    }
    let err = "oracle".parse::<Method>().unwrap_err();
    assert!(err.contains("pwm-single") && err.contains("ch"), "{err}");
    assert!(!Method::Baseline(Baseline::Majority).is_stochastic());
    assert!(Method::Bcc.is_stochastic());
}

#[test]
fn hard_answers_follow_the_half_threshold() {
    let r = MethodReport::new("x", vec!["a".into(), "b".into(), "c".into()], vec![0.7, 0.5, 0.2]);
    assert_eq!(r.answers, vec![HardAnswer::A, HardAnswer::Tie, HardAnswer::B]);
    assert!(r.validate().is_ok());
}

#[test]
fn validation_catches_bad_reports() {
    let mut r = MethodReport::new("x", vec!["a".into()], vec![1.2]);
    assert!(matches!(r.validate(), Err(ReportError::Probability { .. })));
    r.p_a = vec![0.4];
    assert!(matches!(r.validate(), Err(ReportError::Answer(_))));
    r.answers.push(HardAnswer::A);
    assert!(matches!(r.validate(), Err(ReportError::Shape { .. })));
}

#[test]
fn mismatched_question_ids_are_rejected() {
    let ds = keyed_study(1);
    let mut r = MethodReport::from_baseline(&ds, Baseline::Majority).unwrap();
    r.question_ids.swap(0, 1);
    assert!(matches!(score_report(&r, &ds, 100, 1), Err(ReportError::Mismatch { index: 0, .. })));
    r.question_ids.pop();
    assert!(matches!(r.check_alignment(&ds), Err(ReportError::Count { .. })));
}

#[test]
fn log_pool_report_mentions_the_clamp() {
    let ds = keyed_study(2);
    let r = MethodReport::from_baseline(&ds, Baseline::LogPool).unwrap();
    assert!(r.notes.iter().any(|n| n.contains("clamped")));
}

#[test]
fn score_matches_metrics() {
    let ds = keyed_study(3);
    let r = MethodReport::from_baseline(&ds, Baseline::LinearPool).unwrap();
    let s = score_report(&r, &ds, 200, 9).unwrap();
    let key = ds.answer_key().unwrap();
    let want: f64 =
        r.p_a.iter().zip(key).map(|(p, k)| (p - f64::from(u8::from(*k == Answer::A))).powi(2)).sum::<f64>() / 6.0;
    assert!((s.brier - want).abs() < 1e-15);
    assert!(s.brier_bootstrap_se > 0.0);
    assert_eq!(s, score_report(&r, &ds, 200, 9).unwrap());
}

#[test]
fn pwm_report_round_trips_through_json() {
    let ds = keyed_study(4).lesion_predictions();
    let cfg = ChainConfig { n_steps: 1_500, n_burnin: 500, pilot_runs: 2, ..ChainConfig::single_question(4) };
    let (post, _) = run_single_questions(&ds, &cfg).unwrap();
    let mut r = MethodReport::from_pwm(Method::PwmSingle, &ds, &post);
    assert!(r.lesioned);
    assert!(r.question_params.contains_key("psi"));
    assert!(r.diagnostics.as_ref().is_some_and(|d| !d.rhat.is_empty()));
    // Infinite diagnostics survive as NaN.
    r.diagnostics.as_mut().unwrap().rhat.insert("stuck".into(), f64::INFINITY);
    let text = to_json_string(&r, true).unwrap();
    let back: MethodReport = serde_json::from_str(&text).unwrap();
    assert!(back.diagnostics.as_ref().unwrap().rhat["stuck"].is_nan());
    let mut r2 = r.clone();
    r2.diagnostics.as_mut().unwrap().rhat.remove("stuck");
    let back2: MethodReport = serde_json::from_str(&to_json_string(&r2, false).unwrap()).unwrap();
    assert_eq!(back2, r2);
}

#[test]
fn correlations_only_for_respondent_parameters() {
    let ds = keyed_study(5);
    let r = MethodReport::from_baseline(&ds, Baseline::Majority).unwrap();
    assert!(respondent_correlations(&r, &ds).unwrap().is_empty());
}
