use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use possible_worlds::comparison::{
    agreement_eigenratio_with, run_bcc, run_ch, Agreement, SamplerConfig, UNIDIMENSIONAL_RATIO,
};
use possible_worlds::dataset::{split_half_indices, Half, ResponseDataset};
use possible_worlds::generator::{simulate_study, GroundTruth, SimConfig, SimError};
use possible_worlds::io::{format_float, load_dataset, save_dataset, to_json_string, Format};
use possible_worlds::pwm::{run_multi_question, run_single_questions, ChainConfig, Trace};
use possible_worlds::report::{respondent_correlations, score_report, Method, MethodReport};
use serde::Serialize;
use serde_json::json;

use crate::error::CliError;
use crate::manifest::{file_name, manifest_path, write, ManifestBuilder};
use crate::{DiagnoseArgs, EvaluateArgs, InferArgs, ReverseWhich, SimulateArgs, TransformArgs};

fn format_name(f: Format) -> &'static str {
    match f {
        Format::CanonicalJson => "canonical-json",
        Format::CsvTriple => "csv-triple",
    }
}

/// `study.json` -> `study.truth.json`.
fn truth_path(out: &Path) -> std::path::PathBuf {
    let mut p = manifest_path(out).into_os_string().into_string().unwrap_or_default();
    p.truncate(p.len() - ".manifest.json".len());
    (p + ".truth.json").into()
}

#[derive(Serialize)]
struct TruthFile<'a> {
    manifest: String,
    #[serde(flatten)]
    truth: &'a GroundTruth,
}

pub fn simulate(a: SimulateArgs) -> Result<(), CliError> {
    let m = ManifestBuilder::start("simulate", &a.out);
    let cfg = SimConfig {
        with_confidence: a.confidences,
        with_expertise: a.expertise,
        expertise_aware_respondents: a.expertise_aware,
        ..SimConfig::new(a.questions, a.respondents, a.seed)
    };
    let (ds, truth) = simulate_study(&cfg).map_err(|e| match e {
        SimError::Count(_) => CliError::Usage(e.to_string()),
        SimError::Dataset(d) => d.into(),
    })?;
    save_dataset(&ds, &a.out, a.format, Some(&m.reference()))?;
    let tp = truth_path(&a.out);
    write(&tp, &to_json_string(&TruthFile { manifest: m.reference(), truth: &truth }, true)?)?;
    let config = json!({ "sim": cfg, "format": format_name(a.format) });
    m.finish(config, Some(a.seed), &[], &[&a.out, &tp])
}

pub fn transform(a: TransformArgs) -> Result<(), CliError> {
    if a.reverse.is_none() && !a.lesion_predictions {
        return Err(CliError::Usage("nothing to do: pass --reverse and/or --lesion-predictions".into()));
    }
    let m = ManifestBuilder::start("transform", &a.out);
    let mut ds = load_dataset(&a.input.dataset, a.input.format)?;
    if let Some(which) = a.reverse {
        let q = ds.n_questions();
        let idx: BTreeSet<usize> = match which {
            ReverseWhich::FirstHalf => split_half_indices(q, Half::First),
            ReverseWhich::SecondHalf => split_half_indices(q, Half::Second),
            ReverseWhich::All => (0..q).collect(),
        };
        ds = ds.reverse_questions(&idx)?;
    }
    if a.lesion_predictions {
        ds = ds.lesion_predictions();
    }
    let out_format = a.out_format.unwrap_or(a.input.format);
    save_dataset(&ds, &a.out, out_format, Some(&m.reference()))?;
    let config = json!({
        "reverse": a.reverse.map(|r| format!("{r:?}")),
        "lesion_predictions": a.lesion_predictions,
        "format": format_name(out_format),
    });
    m.finish(config, None, &[&a.input.dataset], &[&a.out])
}

fn chain_config(a: &InferArgs, seed: u64, multi: bool) -> ChainConfig {
    let mut c = if multi { ChainConfig::multi_question(seed) } else { ChainConfig::single_question(seed) };
    if let Some(v) = a.chains {
        c.n_chains = v;
    }
    if let Some(v) = a.steps {
        c.n_steps = v;
    }
    if let Some(v) = a.burnin {
        c.n_burnin = v;
    }
    if let Some(v) = a.loops {
        c.n_loops = v;
    }
    if let Some(v) = a.burnin_loops {
        c.burnin_loops = v;
    }
    if let Some(v) = a.thin {
        c.thin = v;
    }
    c.use_confidences = a.use_confidences;
    c.expertise_aware = a.expertise_aware;
    c
}

fn sampler_config(a: &InferArgs, base: SamplerConfig) -> SamplerConfig {
    SamplerConfig {
        n_chains: a.chains.unwrap_or(base.n_chains),
        n_iter: a.steps.unwrap_or(base.n_iter),
        n_burnin: a.burnin.unwrap_or(base.n_burnin),
        thin: a.thin.unwrap_or(base.thin),
        ..base
    }
}

pub fn infer(a: InferArgs) -> Result<(), CliError> {
    let seed = match (a.method.is_stochastic(), a.seed) {
        (true, None) => {
            return Err(CliError::Usage(format!("--seed is required for {}", a.method)));
        }
        (_, s) => s,
    };
    let m = ManifestBuilder::start("infer", &a.out);
    let mut ds = load_dataset(&a.input.dataset, a.input.format)?;
    if a.lesion_predictions {
        ds = ds.lesion_predictions();
    }
    let s = seed.unwrap_or(0);
    let (mut report, config, traces) = match a.method {
        Method::PwmSingle | Method::PwmMulti => {
            let multi = a.method == Method::PwmMulti;
            let cfg = chain_config(&a, s, multi);
            let (post, traces) = if multi {
                let (post, t) = run_multi_question(&ds, &cfg)?;
                (post, (t.questions, Some(t.expertise)))
            } else {
                let (post, t) = run_single_questions(&ds, &cfg)?;
                (post, (t, None))
            };
            (MethodReport::from_pwm(a.method, &ds, &post), serde_json::to_value(&cfg)?, Some(traces))
        }
        Method::Baseline(b) => (MethodReport::from_baseline(&ds, b)?, json!({ "baseline": b.name() }), None),
        Method::Bcc => {
            let cfg = sampler_config(&a, SamplerConfig::bcc(s));
            (MethodReport::from_bcc(&ds, &run_bcc(&ds, &cfg)?), serde_json::to_value(&cfg)?, None)
        }
        Method::Ch => {
            let cfg = sampler_config(&a, SamplerConfig::ch(s));
            (MethodReport::from_ch(&ds, &run_ch(&ds, &cfg)?), serde_json::to_value(&cfg)?, None)
        }
    };
    if let Some(id) = report.question_ids.iter().zip(&report.p_a).find(|(_, p)| !p.is_finite()).map(|(id, _)| id) {
        return Err(CliError::Numerical(format!("non-finite probability for question {id}")));
    }
    report.lesioned |= a.lesion_predictions;
    report.manifest = Some(m.reference());
    write(&a.out, &to_json_string(&report, true)?)?;
    let mut outputs = vec![a.out.as_path()];
    if let (Some(path), Some((q, e))) = (&a.trace, &traces) {
        write(path, &trace_csv(report.question_ids.as_slice(), q, e.as_deref()))?;
        outputs.push(path);
    } else if a.trace.is_some() {
        log::warn!("--trace only applies to the pwm methods; ignored");
    }
    let config = json!({ "method": a.method.name(), "lesion_predictions": a.lesion_predictions, "sampler": config });
    m.finish(config, seed, &[&a.input.dataset], &outputs)
}

/// Long-format CSV of every recorded state; expertise rows (multi only)
/// use the respondent index as `question` and fill only `value`.
fn trace_csv(ids: &[String], traces: &[Trace], expertise: Option<&[Vec<Vec<f64>>]>) -> String {
    let mut out = String::from("kind,question,chain,step,world_a,psi,s_a,s_b,n_v,n_m,n_c,value\n");
    let f = |v: Option<&f64>| v.map(|x| format_float(*x)).unwrap_or_default();
    for (id, t) in ids.iter().zip(traces) {
        for (c, ch) in t.chains.iter().enumerate() {
            for i in 0..ch.psi.len() {
                let _ = writeln!(
                    out,
                    "question,{id},{c},{i},{},{},{},{},{},{},{},",
                    u8::from(ch.world_a[i]),
                    f(ch.psi.get(i)),
                    f(ch.s_a.get(i)),
                    f(ch.s_b.get(i)),
                    f(ch.n_v.get(i)),
                    f(ch.n_m.get(i)),
                    f(ch.n_c.get(i)),
                );
            }
        }
    }
    for (c, per_r) in expertise.unwrap_or_default().iter().enumerate() {
        for (r, series) in per_r.iter().enumerate() {
            for (i, e) in series.iter().enumerate() {
                let _ = writeln!(out, "expertise,{r},{c},{i},,,,,,,,{}", format_float(*e));
            }
        }
    }
    out
}

fn read_report(path: &Path) -> Result<MethodReport, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let r: MethodReport =
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    r.validate()?;
    Ok(r)
}

fn load(path: &Path, format: Format) -> Result<ResponseDataset, CliError> {
    Ok(load_dataset(path, format)?)
}

pub fn evaluate(a: EvaluateArgs) -> Result<(), CliError> {
    let ds = load(&a.input.dataset, a.input.format)?;
    if ds.answer_key().is_none() {
        return Err(CliError::Data("dataset has no answer key".into()));
    }
    let mut scores = Vec::new();
    let mut correlations = Vec::new();
    for path in &a.report {
        let r = read_report(path)?;
        scores.push(score_report(&r, &ds, a.bootstrap, a.seed)?);
        correlations.extend(respondent_correlations(&r, &ds)?);
    }

    let mut text = String::new();
    let _ = writeln!(text, "{:<12} {:>8} {:>14} {:>14} {:>14} {:>14}", "method", "lesioned", "kappa", "kappa_se", "brier", "brier_se");
    for s in &scores {
        let _ = writeln!(
            text,
            "{:<12} {:>8} {:>14} {:>14} {:>14} {:>14}{}",
            s.method,
            s.lesioned,
            format_float(s.kappa.kappa),
            format_float(s.kappa.se),
            format_float(s.brier),
            format_float(s.brier_bootstrap_se),
            if s.kappa.doubled { "  (ties doubled)" } else { "" },
        );
    }
    if !correlations.is_empty() {
        let _ = writeln!(text, "\nrespondent parameters vs respondent kappa");
        let _ = writeln!(text, "{:<12} {:<10} {:>4} {:>14} {:>14} {:>14}", "method", "parameter", "n", "pearson", "spearman", "partial");
        for c in &correlations {
            let _ = writeln!(
                text,
                "{:<12} {:<10} {:>4} {:>14} {:>14} {:>14}",
                c.method,
                c.parameter,
                c.n,
                format_float(c.pearson),
                format_float(c.spearman),
                c.partial.map_or_else(|| "n/a".into(), format_float),
            );
        }
    }
    print!("{text}");
    if let Some(out) = &a.out {
        let m = ManifestBuilder::start("evaluate", out);
        let body = json!({ "manifest": m.reference(), "scores": scores, "correlations": correlations });
        write(out, &to_json_string(&body, true)?)?;
        let mut inputs: Vec<&Path> = a.report.iter().map(|p| p.as_path()).collect();
        inputs.push(&a.input.dataset);
        m.finish(json!({ "bootstrap": a.bootstrap }), Some(a.seed), &inputs, &[out])?;
    }
    Ok(())
}

pub fn diagnose(a: DiagnoseArgs) -> Result<(), CliError> {
    if a.report.is_none() && !a.eigenratio {
        return Err(CliError::Usage("pass --report and/or --eigenratio".into()));
    }
    let mut body = serde_json::Map::new();
    let mut inputs: Vec<&Path> = Vec::new();
    if let Some(path) = &a.report {
        inputs.push(path);
        let r = read_report(path)?;
        let Some(d) = &r.diagnostics else {
            return Err(CliError::Data(format!("{} ({}) has no chain diagnostics", file_name(path), r.method)));
        };
        println!("{:<28} {:>14} {:>10}  geweke z per chain", "scalar", "rhat", "");
        let mut names: BTreeSet<&String> = d.rhat.keys().collect();
        names.extend(d.geweke.keys());
        for name in names {
            let rhat = d.rhat.get(name).map_or_else(|| "n/a".into(), |v| format_float(*v));
            let flag = if d.rhat.get(name).is_some_and(|v| !(*v < 1.1)) { "rhat>=1.1" } else { "" };
            let zs: Vec<String> = d.geweke.get(name).into_iter().flatten().map(|z| format!("{z:.3}")).collect();
            println!("{name:<28} {rhat:>14} {flag:>10}  {}", zs.join(" "));
        }
        let max = d.max_rhat(&[]);
        println!(
            "max rhat {}; geweke |z| < 3 on {:.1}% of chain series",
            max.map_or_else(|| "n/a".into(), format_float),
            100.0 * d.geweke_chain_pass_fraction(3.0)
        );
        body.insert("method".into(), json!(r.method));
        body.insert("diagnostics".into(), serde_json::to_value(d)?);
    }
    if a.eigenratio {
        let Some(path) = &a.dataset else {
            return Err(CliError::Usage("--eigenratio needs --dataset".into()));
        };
        inputs.push(path);
        let ds = load(path, a.format)?;
        let kind = if a.guessing_correction { Agreement::Guessing } else { Agreement::Raw };
        let e = agreement_eigenratio_with(ds.votes(), kind)?;
        let verdict = if e.is_unidimensional() { "pass" } else { "fail" };
        println!(
            "eigenvalue ratio {} ({:?} agreement): {verdict} against the {UNIDIMENSIONAL_RATIO}:1 heuristic",
            format_float(e.ratio),
            kind
        );
        if !e.disjoint_pairs.is_empty() {
            println!("{} respondent pairs share no question (agreement set to 0.5)", e.disjoint_pairs.len());
        }
        body.insert("eigenratio".into(), serde_json::to_value(&e)?);
        body.insert("agreement".into(), serde_json::to_value(kind)?);
        body.insert("unidimensional".into(), json!(e.is_unidimensional()));
    }
    if let Some(out) = &a.out {
        let m = ManifestBuilder::start("diagnose", out);
        body.insert("manifest".into(), json!(m.reference()));
        write(out, &to_json_string(&body, true)?)?;
        m.finish(json!({ "eigenratio": a.eigenratio, "guessing_correction": a.guessing_correction }), None, &inputs, &[out])?;
    }
    Ok(())
}
