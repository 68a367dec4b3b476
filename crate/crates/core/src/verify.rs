//! Monte Carlo verification harness: small-time tail probabilities and
//! their slope against the rate-function reference, the exponential
//! equivalence signature, the Gaussian sup concentration bound, and the
//! self-similarity / roughness checks.

use serde::Serialize;

use crate::covariance::ModelParams;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::path_sim::{build_joint_cholesky, sample_map};
use crate::rbergomi::{holder_estimate, model_paths, vol_path};
use crate::stats::{
    bernoulli_se, ks_critical_one_sample_001, ks_one_sample, mean, normal_cdf, ols, pairwise_sum,
};

/// Tail frequency estimate of {t^beta X_t >= u}.
#[derive(Debug, Clone, Serialize)]
pub struct TailEstimate {
    pub p_hat: f64,
    pub std_err: f64,
    pub n_paths: usize,
    pub u: f64,
    pub t: f64,
    /// 95% rule-of-three upper bound, reported when no hits were observed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zero_hit_upper_bound: Option<f64>,
}

/// Regression of log tail probabilities against the LDP speed.
#[derive(Debug, Clone, Serialize)]
pub struct SlopeReport {
    pub ladder: Vec<f64>,
    pub log_p: Vec<f64>,
    pub p_hat: Vec<f64>,
    pub std_err: Vec<f64>,
    pub fitted_slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub rate_reference: f64,
    pub relative_gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExpEquivRung {
    pub eps: f64,
    pub q_hat: f64,
    pub std_err: f64,
    /// eps^beta log q_hat, when q_hat > 0.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub speed_log: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExpEquivReport {
    pub delta: f64,
    pub rungs: Vec<ExpEquivRung>,
    pub nonincreasing: bool,
    pub final_rung_zero: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BorellTisPoint {
    pub x: f64,
    pub p_hat: f64,
    pub std_err: f64,
    pub bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BorellTisReport {
    pub sup_mean: f64,
    pub sigma_sq: f64,
    pub points: Vec<BorellTisPoint>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SelfSimReport {
    pub a: f64,
    pub ks_statistic: f64,
    pub ks_critical_001: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct HolderReport {
    pub mean_estimate: f64,
    pub std_err: f64,
    pub target: f64,
    pub n_paths: usize,
}

/// Frequency of {t^beta X_t >= u}, realized as X^eps_1 with eps = t.
pub fn mc_tail(
    u: f64,
    t: f64,
    params: &ModelParams,
    grid: &Grid,
    n_paths: usize,
    seed: u64,
) -> Result<TailEstimate> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::Domain(format!("t must lie in (0, 1], got {t}")));
    }
    let factor = build_joint_cholesky(grid, params)?;
    let hits = sample_map(&factor, params, n_paths, seed, |_, bundle| {
        let paths = model_paths(bundle, params, t).expect("overflow in tail simulation");
        if *paths.x.last().unwrap() >= u {
            1.0
        } else {
            0.0
        }
    });
    let p_hat = pairwise_sum(&hits) / n_paths as f64;
    let zero_hit_upper_bound = if p_hat == 0.0 { Some(3.0 / n_paths as f64) } else { None };
    Ok(TailEstimate {
        p_hat,
        std_err: bernoulli_se(p_hat, n_paths),
        n_paths,
        u,
        t,
        zero_hit_upper_bound,
    })
}

/// Regress log p_hat against -t^(-beta) over a decreasing t ladder and
/// compare the slope with a rate-function reference supplied per rung.
pub fn slope_check(
    u: f64,
    ladder: &[f64],
    params: &ModelParams,
    grid: &Grid,
    n_paths: usize,
    seed: u64,
    rate_fn_hook: impl Fn(f64) -> Result<f64>,
) -> Result<SlopeReport> {
    if ladder.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Domain("ladder must be strictly decreasing".into()));
    }
    const MIN_HITS: usize = 50;
    let mut p_hat = Vec::new();
    let mut std_err = Vec::new();
    let mut failing = Vec::new();
    for (i, &t) in ladder.iter().enumerate() {
        let est = mc_tail(u, t, params, grid, n_paths, seed.wrapping_add(i as u64))?;
        if (est.p_hat * n_paths as f64).round() < MIN_HITS as f64 {
            failing.push(t);
        }
        p_hat.push(est.p_hat);
        std_err.push(est.std_err);
    }
    if !failing.is_empty() {
        return Err(Error::InsufficientHits { rungs: failing, min_hits: MIN_HITS });
    }
    let log_p: Vec<f64> = p_hat.iter().map(|p| p.ln()).collect();
    let x: Vec<f64> = ladder.iter().map(|t| -t.powf(-params.beta)).collect();
    let (fitted_slope, intercept, r_squared) = ols(&x, &log_p);
    let refs: Result<Vec<f64>> = ladder.iter().map(|&t| rate_fn_hook(t)).collect();
    let refs = refs?;
    let rate_reference = mean(&refs);
    let relative_gap = if rate_reference == 0.0 {
        fitted_slope.abs()
    } else {
        (fitted_slope - rate_reference).abs() / rate_reference
    };
    Ok(SlopeReport {
        ladder: ladder.to_vec(),
        log_p,
        p_hat,
        std_err,
        fitted_slope,
        intercept,
        r_squared,
        rate_reference,
        relative_gap,
    })
}

/// Superexponential-decay signature for the drift correction: frequency of
/// {sup_t |X^eps - running integral| > delta}, which equals
/// {1/2 int_0^1 v^eps > delta} since the gap is the monotone drift term.
pub fn exp_equiv_check(
    delta: f64,
    eps_ladder: &[f64],
    params: &ModelParams,
    grid: &Grid,
    n_paths: usize,
    seed: u64,
) -> Result<ExpEquivReport> {
    if !(delta >= 0.0) {
        return Err(Error::Domain(format!("delta must be nonnegative, got {delta}")));
    }
    let factor = build_joint_cholesky(grid, params)?;
    let dt = grid.delta();
    let mut rungs = Vec::new();
    for (i, &eps) in eps_ladder.iter().enumerate() {
        let hits = sample_map(&factor, params, n_paths, seed.wrapping_add(i as u64), |_, bundle| {
            let v = vol_path(bundle, params, eps).expect("overflow in drift simulation");
            let drift: f64 = 0.5 * dt * v[..grid.n()].iter().sum::<f64>();
            if drift > delta {
                1.0
            } else {
                0.0
            }
        });
        let q_hat = pairwise_sum(&hits) / n_paths as f64;
        let speed_log = (q_hat > 0.0).then(|| eps.powf(params.beta) * q_hat.ln());
        rungs.push(ExpEquivRung { eps, q_hat, std_err: bernoulli_se(q_hat, n_paths), speed_log });
    }
    let nonincreasing = rungs.windows(2).all(|w| w[1].q_hat <= w[0].q_hat);
    let final_rung_zero = rungs.last().map(|r| r.q_hat == 0.0).unwrap_or(false);
    Ok(ExpEquivReport { delta, rungs, nonincreasing, final_rung_zero, pass: nonincreasing && final_rung_zero })
}

/// Gaussian concentration of sup Z: empirical tail against
/// exp(-(x - m)^2 / (2 sigma^2)) with sigma^2 the maximal pointwise variance.
pub fn borell_tis_check(
    x_grid: &[f64],
    params: &ModelParams,
    grid: &Grid,
    n_paths: usize,
    seed: u64,
) -> Result<BorellTisReport> {
    let factor = build_joint_cholesky(grid, params)?;
    let sups = sample_map(&factor, params, n_paths, seed, |_, bundle| {
        bundle.z.iter().fold(f64::NEG_INFINITY, |m, &z| m.max(z))
    });
    let sup_mean = mean(&sups);
    // sup_{t<=1} Var(Z_t) = eta^2.
    let sigma_sq = params.eta * params.eta;
    let points: Vec<BorellTisPoint> = x_grid
        .iter()
        .map(|&x| {
            let hits: Vec<f64> = sups.iter().map(|&s| if s > x { 1.0 } else { 0.0 }).collect();
            let p_hat = pairwise_sum(&hits) / n_paths as f64;
            let std_err = bernoulli_se(p_hat, n_paths);
            let bound = if x <= sup_mean {
                1.0
            } else {
                (-(x - sup_mean) * (x - sup_mean) / (2.0 * sigma_sq)).exp()
            };
            let holds = p_hat <= bound + 3.0 * std_err;
            BorellTisPoint { x, p_hat, std_err, bound, holds }
        })
        .collect();
    let pass = points.iter().all(|p| p.holds);
    Ok(BorellTisReport { sup_mean, sigma_sq, points, pass })
}

/// One-sample KS of the empirical Z_a marginal against N(0, a^beta eta^2).
pub fn self_similarity_check(
    a: f64,
    params: &ModelParams,
    grid: &Grid,
    n_paths: usize,
    seed: u64,
) -> Result<SelfSimReport> {
    let k = grid
        .index_of(a)
        .ok_or_else(|| Error::Domain(format!("a = {a} does not lie on the grid")))?;
    let factor = build_joint_cholesky(grid, params)?;
    let mut samples = sample_map(&factor, params, n_paths, seed, |_, bundle| bundle.z[k]);
    let sigma = params.eta * a.powf(params.beta / 2.0);
    let d = ks_one_sample(&mut samples, |x| normal_cdf(x, 0.0, sigma));
    let crit = ks_critical_one_sample_001(n_paths);
    Ok(SelfSimReport { a, ks_statistic: d, ks_critical_001: crit, pass: d <= crit })
}

/// Mean variogram roughness estimate of log v over replicas.
pub fn holder_check(
    params: &ModelParams,
    grid: &Grid,
    n_paths: usize,
    seed: u64,
) -> Result<HolderReport> {
    let factor = build_joint_cholesky(grid, params)?;
    let estimates = sample_map(&factor, params, n_paths, seed, |_, bundle| {
        let v = vol_path(bundle, params, 1.0).expect("overflow in holder simulation");
        let logv: Vec<f64> = v.iter().map(|x| x.ln()).collect();
        holder_estimate(&logv, grid).expect("degenerate path")
    });
    Ok(HolderReport {
        mean_estimate: mean(&estimates),
        std_err: crate::stats::std_error(&estimates),
        target: params.alpha + 0.5,
        n_paths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ModelParams {
        ModelParams::new(-0.25, 1.0, -0.7, 0.04).unwrap()
    }

    #[test]
    fn mc_tail_extremes() {
        let p = params();
        let grid = Grid::new(32).unwrap();
        let low = mc_tail(-10.0, 0.5, &p, &grid, 2000, 1).unwrap();
        assert!(low.p_hat > 0.999);
        let mid = mc_tail(0.0, 0.1, &p, &grid, 4000, 2).unwrap();
        assert!(mid.p_hat > 0.4 && mid.p_hat < 0.6, "p = {}", mid.p_hat);
        let a = mc_tail(0.2, 0.5, &p, &grid, 2000, 3).unwrap();
        let b = mc_tail(0.2, 0.5, &p, &grid, 2000, 3).unwrap();
        assert_eq!(a.p_hat, b.p_hat);
    }

    #[test]
    fn mc_tail_zero_hits_reports_bound() {
        let p = params();
        let grid = Grid::new(16).unwrap();
        let est = mc_tail(50.0, 0.5, &p, &grid, 1000, 4).unwrap();
        assert_eq!(est.p_hat, 0.0);
        assert!(est.zero_hit_upper_bound.is_some());
    }

    #[test]
    fn slope_check_insufficient_hits() {
        let p = params();
        let grid = Grid::new(16).unwrap();
        let err = slope_check(5.0, &[0.5, 0.25], &p, &grid, 200, 5, |_| Ok(0.1));
        match err {
            Err(Error::InsufficientHits { .. }) => {}
            other => panic!("expected insufficient hits, got {other:?}"),
        }
    }

    #[test]
    fn slope_check_rejects_bad_ladder() {
        let p = params();
        let grid = Grid::new(16).unwrap();
        assert!(slope_check(0.0, &[0.25, 0.5], &p, &grid, 100, 6, |_| Ok(0.0)).is_err());
    }

    #[test]
    fn exp_equiv_extreme_deltas() {
        let p = params();
        let grid = Grid::new(32).unwrap();
        let big = exp_equiv_check(1e3, &[0.5, 0.25], &p, &grid, 500, 7).unwrap();
        assert!(big.rungs.iter().all(|r| r.q_hat == 0.0));
        assert!(big.pass);
        let zero = exp_equiv_check(0.0, &[0.5, 0.25], &p, &grid, 500, 8).unwrap();
        assert!(zero.rungs.iter().all(|r| r.q_hat == 1.0));
    }

    #[test]
    fn borell_tis_below_mean_trivial() {
        let p = params();
        let grid = Grid::new(64).unwrap();
        let report = borell_tis_check(&[-1.0], &p, &grid, 500, 9).unwrap();
        assert_eq!(report.points[0].bound, 1.0);
        assert!(report.points[0].holds);
    }

    #[test]
    fn self_similarity_requires_grid_node() {
        let p = params();
        let grid = Grid::new(16).unwrap();
        assert!(self_similarity_check(0.3, &p, &grid, 100, 10).is_err());
    }
}
