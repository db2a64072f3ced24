//! Browser bindings for the demo page in `www/`. Every entry point takes and
//! returns JSON strings; the `*_json` functions hold the logic so they can be
//! tested natively.

use possible_worlds::baselines::{run_baseline, Baseline};
use possible_worlds::generator::simulate_study;
use possible_worlds::io::{dataset_from_json, dataset_to_json, to_json_string};
use possible_worlds::pwm::{run_single_questions, ChainConfig};
use possible_worlds::report::Method;
use possible_worlds::{
    Answer, MethodReport, NoiseParams, QuestionParams, SignalMatrix, SimConfig, WorldPrior,
};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Upper bound on the chain length the page may request, to keep the tab
/// responsive.
pub const MAX_STEPS: usize = 200_000;

/// One question with fixed parameters. The answer is `world_a ? A : B`;
/// confidences share the prediction noise.
#[allow(clippy::too_many_arguments)]
pub fn simulate_json(
    psi: f64,
    s_a: f64,
    s_b: f64,
    world_a: bool,
    n_v: f64,
    n_m: f64,
    respondents: usize,
    seed: u64,
) -> Result<String, String> {
    let params = QuestionParams {
        prior: WorldPrior::new(psi).map_err(|e| e.to_string())?,
        world: Answer::from_is_a(world_a),
        signals: SignalMatrix::new(s_a, s_b).map_err(|e| e.to_string())?,
        noise: NoiseParams::new(n_v, n_m, Some(n_m)).map_err(|e| e.to_string())?,
    };
    let cfg = SimConfig {
        with_confidence: true,
        overrides: Some(params),
        ..SimConfig::new(1, respondents, seed)
    };
    let (ds, _) = simulate_study(&cfg).map_err(|e| e.to_string())?;
    Ok(dataset_to_json(&ds, None))
}

/// Every baseline that applies to the dataset, as `{name: [p_a per question]}`.
/// Pools are skipped when there are no confidences.
pub fn baselines_json(dataset: &str) -> Result<String, String> {
    let ds = dataset_from_json(dataset).map_err(|e| e.to_string())?;
    let mut out = serde_json::Map::new();
    for b in Baseline::ALL {
        match run_baseline(&ds, b) {
            Ok(p) => out.insert(b.name().into(), json!(p)),
            Err(e) => out.insert(b.name().into(), json!({ "error": e.to_string() })),
        };
    }
    Ok(Value::Object(out).to_string())
}

/// Short single-question pwm run on every question; returns the method report.
pub fn infer_json(dataset: &str, seed: u64, steps: usize) -> Result<String, String> {
    if !(100..=MAX_STEPS).contains(&steps) {
        return Err(format!("steps must be between 100 and {MAX_STEPS}"));
    }
    let ds = dataset_from_json(dataset).map_err(|e| e.to_string())?;
    let cfg = ChainConfig {
        n_steps: steps,
        n_burnin: steps / 5,
        n_chains: 2,
        pilot_runs: 5,
        ..ChainConfig::single_question(seed)
    };
    let (post, _) = run_single_questions(&ds, &cfg).map_err(|e| e.to_string())?;
    let report = MethodReport::from_pwm(Method::PwmSingle, &ds, &post);
    to_json_string(&report, false).map_err(|e| e.to_string())
}

fn js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn simulate(
    psi: f64,
    s_a: f64,
    s_b: f64,
    world_a: bool,
    n_v: f64,
    n_m: f64,
    respondents: usize,
    seed: u32,
) -> Result<String, JsError> {
    js(simulate_json(psi, s_a, s_b, world_a, n_v, n_m, respondents, u64::from(seed)))
}

#[wasm_bindgen]
pub fn baselines(dataset: &str) -> Result<String, JsError> {
    js(baselines_json(dataset))
}

#[wasm_bindgen]
pub fn infer(dataset: &str, seed: u32, steps: usize) -> Result<String, JsError> {
    js(infer_json(dataset, u64::from(seed), steps))
}
