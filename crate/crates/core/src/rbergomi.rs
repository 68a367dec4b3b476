//! Volatility and log-price path construction, the small-noise rescaled
//! model, and the variogram roughness estimator.

use crate::covariance::ModelParams;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::path_sim::{rescale_b, rescale_z, PathBundle};
use crate::stats::ols;

/// Exponent bound before exp() is treated as overflow.
pub const EXP_GUARD: f64 = 700.0;

/// A simulated model replica: variance and log-price paths at a given eps.
#[derive(Debug, Clone)]
pub struct ModelPaths {
    pub bundle: PathBundle,
    pub v: Vec<f64>,
    pub x: Vec<f64>,
    pub eps: f64,
}

/// v^eps_k = eps^(1+beta) v0 exp(Z^eps_k - eta^2/2 (eps t_k)^beta).
pub fn vol_path(bundle: &PathBundle, params: &ModelParams, eps: f64) -> Result<Vec<f64>> {
    let z_eps = rescale_z(&bundle.z, params, eps)?;
    let grid = bundle.grid;
    let scale = eps.powf(1.0 + params.beta) * params.v0;
    let mut v = Vec::with_capacity(z_eps.len());
    for (k, &zk) in z_eps.iter().enumerate() {
        let exponent = zk - 0.5 * params.eta * params.eta * (eps * grid.t(k)).powf(params.beta);
        if exponent.abs() > EXP_GUARD {
            return Err(Error::Overflow { exponent, replica: bundle.replica });
        }
        v.push(scale * exponent.exp());
    }
    Ok(v)
}

/// Left-point Euler log-price: X_{k+1} = X_k - v_k dt / 2 + sqrt(v_k) dB^eps_k.
pub fn logprice_path(
    v: &[f64],
    bundle: &PathBundle,
    params: &ModelParams,
    eps: f64,
) -> Result<Vec<f64>> {
    let b_eps = rescale_b(&bundle.b, params, eps)?;
    let grid = bundle.grid;
    let dt = grid.delta();
    let mut x = vec![0.0; v.len()];
    for k in 0..grid.n() {
        x[k + 1] = x[k] - 0.5 * v[k] * dt + v[k].sqrt() * (b_eps[k + 1] - b_eps[k]);
    }
    Ok(x)
}

/// Build both paths for one bundle.
pub fn model_paths(bundle: &PathBundle, params: &ModelParams, eps: f64) -> Result<ModelPaths> {
    let v = vol_path(bundle, params, eps)?;
    let x = logprice_path(&v, bundle, params, eps)?;
    Ok(ModelPaths { bundle: bundle.clone(), v, x, eps })
}

/// Variogram regression estimate of the Holder roughness of a path.
///
/// m(l) = mean squared increment at lag l, l = 1..5; the slope of
/// log m against log(l dt), divided by 2, estimates alpha + 1/2.
pub fn holder_estimate(logv: &[f64], grid: &Grid) -> Result<f64> {
    if grid.n() < 256 {
        return Err(Error::Domain(format!(
            "holder_estimate needs n >= 256, got {}",
            grid.n()
        )));
    }
    let dt = grid.delta();
    let mut xs = Vec::with_capacity(5);
    let mut ys = Vec::with_capacity(5);
    for lag in 1..=5usize {
        let mut acc = 0.0;
        let count = logv.len() - lag;
        for k in 0..count {
            let d = logv[k + lag] - logv[k];
            acc += d * d;
        }
        let m = acc / count as f64;
        if m == 0.0 {
            return Err(Error::Degenerate("constant path has undefined variogram slope".into()));
        }
        xs.push((lag as f64 * dt).ln());
        ys.push(m.ln());
    }
    let (slope, _, _) = ols(&xs, &ys);
    Ok(slope / 2.0)
}
