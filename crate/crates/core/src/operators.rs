//! Deterministic L2 operators: the singular Volterra operator with
//! cell-exact weights, the constant-kernel integrator, the exponential map
//! into variance paths, the pathwise integral, and RKHS costs.

use crate::covariance::ModelParams;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::rbergomi::EXP_GUARD;

/// Piecewise-constant control on the grid cells [t_k, t_{k+1}).
#[derive(Debug, Clone, PartialEq)]
pub struct Control {
    pub values: Vec<f64>,
}

impl Control {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("control contains non-finite entries".into()));
        }
        Ok(Self { values })
    }

    pub fn zeros(n: usize) -> Self {
        Self { values: vec![0.0; n] }
    }
}

/// Lower-triangular matrix of the discretized Volterra operator:
/// row k (for node t_k, k = 1..n) holds the exact cell integrals
/// A[k][j] = eta sqrt(2a+1) [(t_k - t_j)^(a+1) - (t_k - t_{j+1})^(a+1)]/(a+1).
///
/// Row 0 is empty since the operator output vanishes at t = 0.
pub fn volterra_matrix(grid: &Grid, params: &ModelParams) -> Vec<Vec<f64>> {
    let n = grid.n();
    let a1 = params.alpha + 1.0;
    let scale = params.eta * params.beta.sqrt() / a1;
    let mut rows = Vec::with_capacity(n + 1);
    rows.push(Vec::new());
    for k in 1..=n {
        let tk = grid.t(k);
        let row = (0..k)
            .map(|j| scale * ((tk - grid.t(j)).powf(a1) - (tk - grid.t(j + 1)).powf(a1)))
            .collect();
        rows.push(row);
    }
    rows
}

/// g(t_k) = sum_{j<k} f_j * cell integral of the kernel; g(0) = 0.
pub fn apply_volterra(f: &Control, grid: &Grid, params: &ModelParams) -> Vec<f64> {
    let a = volterra_matrix(grid, params);
    apply_volterra_with(&a, f)
}

/// Same as `apply_volterra` with a precomputed matrix.
pub fn apply_volterra_with(matrix: &[Vec<f64>], f: &Control) -> Vec<f64> {
    matrix
        .iter()
        .map(|row| row.iter().zip(&f.values).map(|(a, fj)| a * fj).sum())
        .collect()
}

/// h(t_k) = rho * sum_{j<k} f_j * dt.
pub fn apply_rho(f: &Control, grid: &Grid, rho: f64) -> Vec<f64> {
    let dt = grid.delta();
    let mut h = Vec::with_capacity(grid.n() + 1);
    let mut acc = 0.0;
    h.push(0.0);
    for &fj in &f.values {
        acc += fj * dt;
        h.push(rho * acc);
    }
    h
}

/// Exponential map: (m x)(t_k, eps) = v0 eps^(1+beta) exp(x_k - eta^2/2 (eps t_k)^beta).
pub fn apply_m(x: &[f64], grid: &Grid, params: &ModelParams, eps: f64) -> Result<Vec<f64>> {
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("eps must be positive, got {eps}")));
    }
    let scale = params.v0 * eps.powf(1.0 + params.beta);
    x.iter()
        .enumerate()
        .map(|(k, &xk)| {
            let exponent = xk - 0.5 * params.eta * params.eta * (eps * grid.t(k)).powf(params.beta);
            if exponent.abs() > EXP_GUARD {
                return Err(Error::Overflow { exponent, replica: 0 });
            }
            Ok(scale * exponent.exp())
        })
        .collect()
}

/// Left-point pathwise integral of sqrt(x) against y over [0, 1].
pub fn integral_i(x: &[f64], y: &[f64], grid: &Grid) -> Result<f64> {
    if let Some(bad) = x.iter().find(|&&xk| xk < 0.0) {
        return Err(Error::Domain(format!("integral requires x >= 0, found {bad}")));
    }
    let n = grid.n();
    let mut acc = 0.0;
    for k in 0..n {
        acc += x[k].sqrt() * (y[k + 1] - y[k]);
    }
    Ok(acc)
}

/// RKHS cost 1/2 ||f||^2_{L2} of a piecewise-constant control.
pub fn rkhs_cost(f: &Control, grid: &Grid) -> f64 {
    0.5 * grid.delta() * f.values.iter().map(|v| v * v).sum::<f64>()
}

/// Two-control variant: 1/2 ||f1||^2 + 1/2 ||f2||^2.
pub fn rkhs_cost2(f1: &Control, f2: &Control, grid: &Grid) -> f64 {
    rkhs_cost(f1, grid) + rkhs_cost(f2, grid)
}
