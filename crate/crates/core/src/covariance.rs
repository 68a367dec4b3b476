//! Model parameters and the closed-form covariance functions of the joint
//! Gaussian driver (Z, B, W).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{hyp2f1, HypArgs};

/// Rough Bergomi model parameters together with the derived exponents.
///
/// `beta = 2*alpha + 1` and `varrho = rho * eta * sqrt(2*alpha+1) / (alpha+1)`
/// are recomputed by the constructor; they are not free fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub alpha: f64,
    pub eta: f64,
    pub rho: f64,
    pub v0: f64,
    pub beta: f64,
    pub varrho: f64,
}

impl ModelParams {
    pub fn new(alpha: f64, eta: f64, rho: f64, v0: f64) -> Result<Self> {
        if !(-0.5..0.0).contains(&alpha) {
            return Err(Error::Domain(format!("alpha must lie in (-1/2, 0), got {alpha}")));
        }
        if alpha == -0.5 {
            return Err(Error::Domain("alpha must be strictly above -1/2".into()));
        }
        if !(eta > 0.0) {
            return Err(Error::Domain(format!("eta must be positive, got {eta}")));
        }
        if !(-1.0..=1.0).contains(&rho) {
            return Err(Error::Domain(format!("rho must lie in [-1, 1], got {rho}")));
        }
        if !(v0 > 0.0) {
            return Err(Error::Domain(format!("v0 must be positive, got {v0}")));
        }
        let beta = 2.0 * alpha + 1.0;
        let varrho = rho * eta * beta.sqrt() / (alpha + 1.0);
        Ok(Self { alpha, eta, rho, v0, beta, varrho })
    }
}

/// E(Z_s Z_t) via the hypergeometric closed form.
pub fn cov_zz(s: f64, t: f64, params: &ModelParams) -> Result<f64> {
    let lo = s.min(t);
    let hi = s.max(t);
    if lo == 0.0 {
        return Ok(0.0);
    }
    if lo == hi {
        return Ok(params.eta * params.eta * hi.powf(params.beta));
    }
    let alpha = params.alpha;
    let f = hyp2f1(HypArgs::new(1.0, -alpha, 2.0 + alpha, lo / hi)?)?;
    Ok(params.eta * params.eta * params.beta / (alpha + 1.0)
        * lo.powf(1.0 + alpha)
        * hi.powf(alpha)
        * f)
}

/// E(Z_t B_t) = varrho * t^(alpha+1).
pub fn cov_zb(t: f64, params: &ModelParams) -> f64 {
    params.varrho * t.powf(params.alpha + 1.0)
}

/// E(Z_s W_t), from the Ito isometry applied to the kernel integral.
pub fn cov_zw(s: f64, t: f64, params: &ModelParams) -> f64 {
    let m = s.min(t);
    if m == 0.0 || s == 0.0 {
        return 0.0;
    }
    let a1 = params.alpha + 1.0;
    params.eta * params.beta.sqrt() / a1 * (s.powf(a1) - (s - m).powf(a1))
}

/// Self-similarity multiplier a^(alpha + 1/2).
pub fn self_similar_scale(a: f64, params: &ModelParams) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::Domain(format!("scale factor must be positive, got {a}")));
    }
    Ok(a.powf(params.alpha + 0.5))
}
