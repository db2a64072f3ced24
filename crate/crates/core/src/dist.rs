//! Normal and truncated-normal helpers.

use rand::Rng;
use libm::erfc;
use statrs::function::erf::erfc_inv;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Variances at or below this are treated as this value when the observation
/// sits exactly on the mean.
pub const MIN_VARIANCE: f64 = 1e-12;

pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Inverse of [`std_normal_cdf`], polished with one Newton step.
pub fn std_normal_quantile(p: f64) -> f64 {
    let x = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p);
    if !x.is_finite() {
        return x;
    }
    let density = (-0.5 * x * x - LN_SQRT_2PI).exp();
    if density > 0.0 {
        x - (std_normal_cdf(x) - p) / density
    } else {
        x
    }
}

/// `ln(Phi(b) - Phi(a))` for `a < b`, evaluated on the side of zero that
/// keeps precision.
pub fn ln_normal_mass(a: f64, b: f64) -> f64 {
    if a > 0.0 {
        return ln_normal_mass(-b, -a);
    }
    (std_normal_cdf(b) - std_normal_cdf(a)).ln()
}

/// Log density at `x` of a normal with `mean` and `variance` truncated to
/// `[lo, hi]`. Zero variance is a point mass: `-inf` off the mean.
pub fn truncated_normal_ln_pdf(x: f64, mean: f64, variance: f64, lo: f64, hi: f64) -> f64 {
    if x < lo || x > hi {
        return f64::NEG_INFINITY;
    }
    let variance = if variance > MIN_VARIANCE {
        variance
    } else if x == mean {
        MIN_VARIANCE
    } else if variance <= 0.0 {
        return f64::NEG_INFINITY;
    } else {
        MIN_VARIANCE
    };
    let sd = variance.sqrt();
    let z = (x - mean) / sd;
    let mass = ln_normal_mass((lo - mean) / sd, (hi - mean) / sd);
    -0.5 * z * z - LN_SQRT_2PI - sd.ln() - mass
}

/// Draws from a normal truncated to `[lo, hi]` by inverting the CDF.
pub fn sample_truncated_normal<R: Rng + ?Sized>(
    rng: &mut R,
    mean: f64,
    sd: f64,
    lo: f64,
    hi: f64,
) -> f64 {
    if sd <= 0.0 {
        return mean.clamp(lo, hi);
    }
    let a = (lo - mean) / sd;
    let b = (hi - mean) / sd;
    // Work in the lower tail, where the CDF has full relative precision.
    let (a, b, sign) = if a > 0.0 { (-b, -a, -1.0) } else { (a, b, 1.0) };
    let pa = std_normal_cdf(a);
    let pb = std_normal_cdf(b);
    let u: f64 = rng.random();
    let p = pa + u * (pb - pa);
    let z = std_normal_quantile(p).clamp(a, b);
    (mean + sign * z * sd).clamp(lo, hi)
}

/// `ln(exp(a) + exp(b))` without overflow; `-inf` if both are.
#[inline]
pub fn ln_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}
