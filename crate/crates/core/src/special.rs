//! Gamma and Gauss hypergeometric functions, and the power-law kernel
//! driving the Volterra process.
//!
//! `hyp2f1` only supports real arguments with `z` in `[0,1]`, which is all
//! the covariance formulas require: there `z = (s ∧ t)/(s ∨ t)`.

use crate::covariance::ModelParams;
use crate::error::{Error, Result};

/// Maximum number of series terms before `hyp2f1` reports non-convergence.
pub const MAX_SERIES_TERMS: usize = 10_000;
/// Absolute floor below which series terms are treated as underflow.
pub const SERIES_FLOOR: f64 = 1e-300;

// Lanczos approximation, g = 7, 9 coefficients.
const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

fn lanczos_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection formula; only reached for non-integer x.
        std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * lanczos_gamma(1.0 - x))
    } else {
        let x = x - 1.0;
        let mut acc = LANCZOS_COEF[0];
        for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
            acc += c / (x + i as f64);
        }
        let t = x + LANCZOS_G + 0.5;
        (2.0 * std::f64::consts::PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * acc
    }
}

/// Gamma function for strictly positive arguments.
pub fn gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!("gamma requires x > 0, got {x}")));
    }
    Ok(lanczos_gamma(x))
}

// Gamma extended to negative non-integer arguments, used internally by the
// z -> 1-z linear transformation of 2F1.
fn gamma_signed(x: f64) -> Result<f64> {
    if x > 0.0 {
        return Ok(lanczos_gamma(x));
    }
    if x == x.floor() {
        return Err(Error::Domain(format!("gamma pole at non-positive integer {x}")));
    }
    Ok(lanczos_gamma(x))
}

/// Arguments of the Gauss hypergeometric function.
#[derive(Debug, Clone, Copy)]
pub struct HypArgs {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub z: f64,
}

impl HypArgs {
    pub fn new(a: f64, b: f64, c: f64, z: f64) -> Result<Self> {
        if c <= 0.0 && c == c.floor() {
            return Err(Error::Domain(format!("c = {c} is a non-positive integer")));
        }
        if !(0.0..=1.0).contains(&z) {
            return Err(Error::Domain(format!("z = {z} outside [0,1]")));
        }
        if z == 1.0 && c - a - b <= 0.0 {
            return Err(Error::Domain(format!(
                "z = 1 requires c - a - b > 0, got {}",
                c - a - b
            )));
        }
        Ok(Self { a, b, c, z })
    }
}

// Plain power series sum_{n>=0} (a)_n (b)_n / (c)_n z^n / n!.
fn hyp2f1_series(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 0..MAX_SERIES_TERMS {
        let nf = n as f64;
        term *= (a + nf) * (b + nf) / ((c + nf) * (nf + 1.0)) * z;
        sum += term;
        if term.abs() < SERIES_FLOOR || term.abs() <= f64::EPSILON * sum.abs() {
            return Ok(sum);
        }
    }
    Err(Error::NonConvergence {
        max_terms: MAX_SERIES_TERMS,
        last_term: term,
    })
}

// Gauss summation at z = 1, valid for c - a - b > 0.
fn hyp2f1_at_one(a: f64, b: f64, c: f64) -> Result<f64> {
    Ok(gamma_signed(c)? * gamma_signed(c - a - b)? / (gamma_signed(c - a)? * gamma_signed(c - b)?))
}

/// Gauss hypergeometric function 2F1(a, b; c; z) for z in [0,1].
///
/// Power series for z <= 0.5, the z -> 1-z linear transformation for
/// z in (0.5, 1), and Gauss summation at z = 1.
pub fn hyp2f1(args: HypArgs) -> Result<f64> {
    let HypArgs { a, b, c, z } = args;
    if z == 0.0 {
        return Ok(1.0);
    }
    if z == 1.0 {
        return hyp2f1_at_one(a, b, c);
    }
    if z <= 0.5 {
        return hyp2f1_series(a, b, c, z);
    }
    let s = c - a - b;
    if s == s.floor() {
        // Transformation degenerates at integer c-a-b; fall back to the
        // series, which still converges (slowly) for z < 1.
        return hyp2f1_series(a, b, c, z);
    }
    let w = 1.0 - z;
    let pre1 = gamma_signed(c)? * gamma_signed(s)? / (gamma_signed(c - a)? * gamma_signed(c - b)?);
    let pre2 = gamma_signed(c)? * gamma_signed(-s)? / (gamma_signed(a)? * gamma_signed(b)?);
    let f1 = hyp2f1_series(a, b, a + b - c + 1.0, w)?;
    let f2 = hyp2f1_series(c - a, c - b, s + 1.0, w)?;
    Ok(pre1 * f1 + w.powf(s) * pre2 * f2)
}

/// Power-law kernel K(s,t) = eta * sqrt(2*alpha + 1) * (t - s)^alpha for s < t.
pub fn kernel(s: f64, t: f64, params: &ModelParams) -> Result<f64> {
    if s >= t {
        return Err(Error::Domain(format!("kernel requires s < t, got s = {s}, t = {t}")));
    }
    Ok(params.eta * params.beta.sqrt() * (t - s).powf(params.alpha))
}
