//! Convergence diagnostics: Gelman–Rubin potential scale reduction and the
//! Geweke window-mean z-score.

use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DiagnosticError {
    #[error("need at least {need} chains, got {got}")]
    TooFewChains { need: usize, got: usize },
    #[error("chains must have equal length >= {min}")]
    BadLength { min: usize },
    #[error("window fractions must be positive and sum to at most 1")]
    BadWindows,
}

pub const MIN_CHAIN_LENGTH: usize = 10;

/// Potential scale reduction `sqrt((W + B/n) / W)`, with `W` the mean
/// within-chain variance and `B/n` the variance of chain means. Identical
/// chains give exactly 1; zero within-chain variance with distinct chain
/// means gives `+inf`.
pub fn gelman_rubin(chains: &[&[f64]]) -> Result<f64, DiagnosticError> {
    let m = chains.len();
    if m < 2 {
        return Err(DiagnosticError::TooFewChains { need: 2, got: m });
    }
    let n = chains[0].len();
    if n < MIN_CHAIN_LENGTH || chains.iter().any(|c| c.len() != n) {
        return Err(DiagnosticError::BadLength { min: MIN_CHAIN_LENGTH });
    }
    let means: Vec<f64> = chains.iter().map(|c| c.iter().sum::<f64>() / n as f64).collect();
    let grand = means.iter().sum::<f64>() / m as f64;
    let between_over_n =
        means.iter().map(|mu| (mu - grand).powi(2)).sum::<f64>() / (m - 1) as f64;
    let within = chains
        .iter()
        .zip(&means)
        .map(|(c, mu)| c.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1) as f64)
        .sum::<f64>()
        / m as f64;
    if within <= 0.0 {
        return Ok(if between_over_n <= 0.0 { 1.0 } else { f64::INFINITY });
    }
    Ok(((within + between_over_n) / within).sqrt())
}

/// Spectral density at frequency zero (the asymptotic variance of the mean
/// times `n`), by Geyer's initial monotone sequence estimator.
pub fn spectral_density_at_zero(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let centred: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let autocov = |lag: usize| -> f64 {
        centred[..n - lag].iter().zip(&centred[lag..]).map(|(a, b)| a * b).sum::<f64>() / n as f64
    };
    let gamma0 = autocov(0);
    if gamma0 <= 0.0 {
        return 0.0;
    }
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut k = 0;
    while 2 * k + 1 < n {
        let pair = autocov(2 * k) + autocov(2 * k + 1);
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev);
        sum += pair;
        prev = pair;
        k += 1;
    }
    (2.0 * sum - gamma0).max(gamma0 * 1e-3)
}

/// Geweke z comparing the mean of the first `first_frac` of the series with
/// the last `last_frac`, standardized by spectral-density standard errors.
pub fn geweke(series: &[f64], first_frac: f64, last_frac: f64) -> Result<f64, DiagnosticError> {
    if !(first_frac > 0.0 && last_frac > 0.0 && first_frac + last_frac <= 1.0) {
        return Err(DiagnosticError::BadWindows);
    }
    let n = series.len();
    let na = (first_frac * n as f64).floor() as usize;
    let nb = (last_frac * n as f64).floor() as usize;
    if na < 2 || nb < 2 {
        return Err(DiagnosticError::BadLength { min: (2.0 / first_frac.min(last_frac)).ceil() as usize });
    }
    let a = &series[..na];
    let b = &series[n - nb..];
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let diff = mean(a) - mean(b);
    let var = spectral_density_at_zero(a) / na as f64 + spectral_density_at_zero(b) / nb as f64;
    if var <= 0.0 {
        return Ok(if diff == 0.0 { 0.0 } else { diff.signum() * f64::INFINITY });
    }
    Ok(diff / var.sqrt())
}

pub const GEWEKE_FIRST: f64 = 0.1;
pub const GEWEKE_LAST: f64 = 0.5;

/// Per-scalar diagnostics for one run: R-hat across chains and a Geweke z per
/// chain.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    #[serde(deserialize_with = "rhat_from_json")]
    pub rhat: BTreeMap<String, f64>,
    #[serde(deserialize_with = "geweke_from_json")]
    pub geweke: BTreeMap<String, Vec<f64>>,
}

// JSON has no infinities, so they are written as null and read back as NaN.
fn rhat_from_json<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, f64>, D::Error> {
    let raw = BTreeMap::<String, Option<f64>>::deserialize(d)?;
    Ok(raw.into_iter().map(|(k, v)| (k, v.unwrap_or(f64::NAN))).collect())
}

fn geweke_from_json<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, Vec<f64>>, D::Error> {
    let raw = BTreeMap::<String, Vec<Option<f64>>>::deserialize(d)?;
    Ok(raw.into_iter().map(|(k, v)| (k, v.into_iter().map(|z| z.unwrap_or(f64::NAN)).collect())).collect())
}

impl Diagnostics {
    /// Adds both diagnostics for the scalar `name`. Chains too short or too
    /// few for a statistic leave it out.
    pub fn add(&mut self, name: impl Into<String>, chains: &[&[f64]]) {
        let name = name.into();
        if let Ok(r) = gelman_rubin(chains) {
            self.rhat.insert(name.clone(), r);
        }
        let z: Vec<f64> = chains
            .iter()
            .filter_map(|c| geweke(c, GEWEKE_FIRST, GEWEKE_LAST).ok())
            .collect();
        if !z.is_empty() {
            self.geweke.insert(name, z);
        }
    }

    pub fn extend_prefixed(&mut self, prefix: &str, other: &Diagnostics) {
        for (k, v) in &other.rhat {
            self.rhat.insert(format!("{prefix}{k}"), *v);
        }
        for (k, v) in &other.geweke {
            self.geweke.insert(format!("{prefix}{k}"), v.clone());
        }
    }

    /// Largest R-hat among scalars whose name ends with one of `suffixes`
    /// (all scalars when empty).
    pub fn max_rhat(&self, suffixes: &[&str]) -> Option<f64> {
        self.rhat
            .iter()
            .filter(|(k, _)| suffixes.is_empty() || suffixes.iter().any(|s| k.ends_with(s)))
            .map(|(_, v)| *v)
            .reduce(f64::max)
    }

    /// Fraction of scalars whose Geweke |z| is below `limit` in every chain.
    pub fn geweke_pass_fraction(&self, limit: f64) -> f64 {
        if self.geweke.is_empty() {
            return 1.0;
        }
        let ok = self.geweke.values().filter(|zs| zs.iter().all(|z| z.abs() < limit)).count();
        ok as f64 / self.geweke.len() as f64
    }

    /// Fraction of (scalar, chain) Geweke statistics with |z| below `limit`.
    pub fn geweke_chain_pass_fraction(&self, limit: f64) -> f64 {
        let all: Vec<f64> = self.geweke.values().flatten().copied().collect();
        if all.is_empty() {
            return 1.0;
        }
        all.iter().filter(|z| z.abs() < limit).count() as f64 / all.len() as f64
    }
}
