//! Shared Metropolis–Hastings machinery: truncated-normal random-walk
//! proposals, the accept step, acceptance bookkeeping and posterior
//! summaries.

pub mod diagnostics;

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dist::{ln_normal_mass, sample_truncated_normal};

pub use diagnostics::{gelman_rubin, geweke, DiagnosticError, Diagnostics};

/// A random-walk proposal with its Hastings correction
/// `ln q(current | value) - ln q(value | current)`.
#[derive(Clone, Copy, Debug)]
pub struct Proposal {
    pub value: f64,
    pub log_hastings: f64,
}

/// Normal random walk centred on `current` and truncated to `[lo, hi]`.
pub fn propose_truncated<R: Rng + ?Sized>(
    rng: &mut R,
    current: f64,
    sd: f64,
    lo: f64,
    hi: f64,
) -> Proposal {
    let value = sample_truncated_normal(rng, current, sd, lo, hi);
    let mass = |x: f64| ln_normal_mass((lo - x) / sd, (hi - x) / sd);
    Proposal {
        value,
        log_hastings: mass(current) - mass(value),
    }
}

/// Metropolis acceptance of a move with log acceptance ratio `log_ratio`.
/// NaN ratios are rejected.
pub fn accept<R: Rng + ?Sized>(rng: &mut R, log_ratio: f64) -> bool {
    if log_ratio.is_nan() {
        return false;
    }
    log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcceptCount {
    pub proposed: u64,
    pub accepted: u64,
}

impl AcceptCount {
    pub fn record(&mut self, accepted: bool) {
        self.proposed += 1;
        self.accepted += u64::from(accepted);
    }

    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    pub fn merge(&mut self, other: &AcceptCount) {
        self.proposed += other.proposed;
        self.accepted += other.accepted;
    }
}

pub type AcceptTable = BTreeMap<String, AcceptCount>;

pub fn merge_accept(into: &mut AcceptTable, from: &AcceptTable) {
    for (k, v) in from {
        into.entry(k.clone()).or_default().merge(v);
    }
}

pub fn acceptance_rates(table: &AcceptTable) -> BTreeMap<String, f64> {
    table.iter().map(|(k, v)| (k.clone(), v.rate())).collect()
}

/// Posterior mean with a central 90% interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
}

pub const INTERVAL_LO: f64 = 0.05;
pub const INTERVAL_HI: f64 = 0.95;

impl ParamSummary {
    /// Summarizes pooled samples. Panics on an empty slice.
    pub fn from_samples<'a>(chains: impl IntoIterator<Item = &'a [f64]>) -> Self {
        let mut all: Vec<f64> = chains.into_iter().flatten().copied().collect();
        assert!(!all.is_empty(), "no samples to summarize");
        let mean = all.iter().sum::<f64>() / all.len() as f64;
        all.sort_by(f64::total_cmp);
        ParamSummary {
            mean,
            lo: quantile_sorted(&all, INTERVAL_LO),
            hi: quantile_sorted(&all, INTERVAL_HI),
        }
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn flat_target_on_interval_is_uniform() {
        // With the Hastings correction a flat target restricted to [0, 1]
        // must give a uniform histogram.
        let mut rng = stream(11, &[]);
        let mut x = 0.5;
        let mut bins = [0usize; 10];
        let n = 400_000;
        for _ in 0..n {
            let p = propose_truncated(&mut rng, x, 0.3, 0.0, 1.0);
            if accept(&mut rng, p.log_hastings) {
                x = p.value;
            }
            bins[((x * 10.0) as usize).min(9)] += 1;
        }
        for b in bins {
            let frac = b as f64 / n as f64;
            assert!((frac - 0.1).abs() < 0.006, "{bins:?}");
        }
    }

    #[test]
    fn flat_target_on_triangle_is_uniform() {
        // Joint random walk on (s_a, s_b) with the s_b < s_a constraint
        // enforced by rejection.
        let mut rng = stream(12, &[]);
        let (mut a, mut b) = (0.7, 0.3);
        let mut above_diag_mid = 0usize;
        let n = 400_000;
        let mut mean_a = 0.0;
        for _ in 0..n {
            let p = propose_truncated(&mut rng, a, 0.2, 0.0, 1.0);
            if p.value > b && accept(&mut rng, p.log_hastings) {
                a = p.value;
            }
            let p = propose_truncated(&mut rng, b, 0.2, 0.0, 1.0);
            if p.value < a && accept(&mut rng, p.log_hastings) {
                b = p.value;
            }
            mean_a += a;
            if a > 0.5 && b < 0.5 {
                above_diag_mid += 1;
            }
        }
        // Uniform on the triangle: E[s_a] = 2/3, P(s_a > .5, s_b < .5) = 1/2.
        assert!((mean_a / n as f64 - 2.0 / 3.0).abs() < 0.01);
        assert!((above_diag_mid as f64 / n as f64 - 0.5).abs() < 0.015);
    }

    #[test]
    fn nan_ratio_rejected() {
        let mut rng = stream(0, &[]);
        assert!(!accept(&mut rng, f64::NAN));
        assert!(accept(&mut rng, 0.0));
    }

    #[test]
    fn quantiles() {
        let s: Vec<f64> = (0..=100).map(f64::from).collect();
        assert_eq!(quantile_sorted(&s, 0.05), 5.0);
        let sum = ParamSummary::from_samples([s.as_slice()]);
        assert_eq!(sum.mean, 50.0);
        assert!(sum.lo <= sum.mean && sum.mean <= sum.hi);
    }
}
