//! Burn-in adaptation of the question sampler.
//!
//! Low prediction noise confines `(psi, s_a, s_b)` to a thin ridge that
//! coordinate-wise random walks cross far faster than they travel along.
//! During burn-in each coordinate's step size is tuned by Robbins–Monro
//! towards a target acceptance rate, and a joint Gaussian move on
//! `(psi, s_a, s_b)` learns its covariance from the burn-in states. Both are
//! frozen afterwards, so the retained samples come from a fixed kernel.

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;

/// Coordinates with an adapted step-size multiplier.
pub(crate) const N_COORDS: usize = 6;
pub(crate) const PSI: usize = 0;
pub(crate) const S_A: usize = 1;
pub(crate) const S_B: usize = 2;
pub(crate) const N_V: usize = 3;
pub(crate) const N_M: usize = 4;
pub(crate) const N_C: usize = 5;

const TARGET_SINGLE: f64 = 0.44;
const TARGET_JOINT: f64 = 0.234;
const LOG_SCALE_BOUNDS: (f64, f64) = (-9.0, 2.5);
/// States seen before the joint move switches on.
const JOINT_WARMUP: u64 = 200;
const COVARIANCE_REFRESH: u64 = 50;
const JITTER: f64 = 1e-10;

#[derive(Clone, Debug)]
pub(crate) struct Adapter {
    log_scale: [f64; N_COORDS],
    joint_log_scale: f64,
    seen: u64,
    mean: Vector3<f64>,
    m2: Matrix3<f64>,
    chol: Option<Matrix3<f64>>,
}

impl Default for Adapter {
    fn default() -> Self {
        Adapter {
            log_scale: [0.0; N_COORDS],
            // 2.38^2 / d for d = 3
            joint_log_scale: (2.38f64.powi(2) / 3.0).ln(),
            seen: 0,
            mean: Vector3::zeros(),
            m2: Matrix3::zeros(),
            chol: None,
        }
    }
}

fn gain(t: u64) -> f64 {
    (t as f64 + 1.0).powf(-0.6)
}

impl Adapter {
    pub fn scale(&self, coord: usize) -> f64 {
        self.log_scale[coord].exp()
    }

    pub fn tune(&mut self, coord: usize, accepted: bool) {
        let g = gain(self.seen);
        let s = &mut self.log_scale[coord];
        *s = (*s + g * (f64::from(u8::from(accepted)) - TARGET_SINGLE)).clamp(LOG_SCALE_BOUNDS.0, LOG_SCALE_BOUNDS.1);
    }

    pub fn tune_joint(&mut self, accepted: bool) {
        let g = gain(self.seen);
        self.joint_log_scale += g * (f64::from(u8::from(accepted)) - TARGET_JOINT);
    }

    /// Folds one state into the running covariance.
    pub fn observe(&mut self, x: [f64; 3]) {
        let x = Vector3::from(x);
        self.seen += 1;
        let delta = x - self.mean;
        self.mean += delta / self.seen as f64;
        self.m2 += delta * (x - self.mean).transpose();
        if self.seen >= JOINT_WARMUP && self.seen % COVARIANCE_REFRESH == 0 {
            let cov = self.m2 / (self.seen - 1) as f64 + Matrix3::identity() * JITTER;
            if let Some(c) = cov.cholesky() {
                self.chol = Some(c.l());
            }
        }
    }

    /// Drops the running covariance (e.g. after a pilot's transient) but
    /// keeps the tuned step sizes.
    pub fn forget_covariance(&mut self) {
        let scales = self.log_scale;
        *self = Adapter { log_scale: scales, ..Adapter::default() };
    }

    /// Joint random-walk step, `None` until enough states were seen.
    pub fn joint_step<R: Rng + ?Sized>(&self, rng: &mut R, x: [f64; 3]) -> Option<[f64; 3]> {
        let l = self.chol?;
        let z = Vector3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
        let y = Vector3::from(x) + l * z * (0.5 * self.joint_log_scale).exp();
        Some([y[0], y[1], y[2]])
    }
}
