//! Exact joint Gaussian sampling of (Z, W) on a grid by Cholesky
//! factorization, plus the small-noise rescaling maps.
//!
//! The stacked covariance excludes t_0 since Z_0 = W_0 = 0 almost surely.
//! Sampling is embarrassingly parallel across replicas; every replica draws
//! from its own counter-based stream so results do not depend on scheduling
//! or thread count.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::covariance::{cov_zw, cov_zz, ModelParams};
use crate::error::{Error, Result};
use crate::grid::Grid;

/// Jitter escalation ladder for near-singular covariances.
const JITTERS: [f64; 6] = [0.0, 1e-14, 1e-13, 1e-12, 1e-11, 1e-10];

/// Lower-triangular Cholesky factor of the stacked (Z, W) covariance.
#[derive(Debug, Clone)]
pub struct JointFactor {
    grid: Grid,
    /// Row-major lower triangle, dimension 2n.
    rows: Vec<Vec<f64>>,
    /// Jitter level that made the factorization succeed.
    pub jitter: f64,
}

/// One sampled replica of the joint driver paths, all of length n+1.
#[derive(Debug, Clone)]
pub struct PathBundle {
    pub grid: Grid,
    pub w: Vec<f64>,
    pub wperp: Vec<f64>,
    pub z: Vec<f64>,
    pub b: Vec<f64>,
    pub seed: u64,
    pub replica: usize,
}

/// Assemble the 2n x 2n covariance of (Z_{t_1..t_n}, W_{t_1..t_n}).
pub fn joint_covariance(grid: &Grid, params: &ModelParams) -> Result<DMatrix<f64>> {
    let n = grid.n();
    let mut sigma = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        let ti = grid.t(i + 1);
        for j in 0..=i {
            let tj = grid.t(j + 1);
            let c = cov_zz(ti, tj, params)?;
            sigma[(i, j)] = c;
            sigma[(j, i)] = c;
        }
    }
    for i in 0..n {
        let ti = grid.t(i + 1);
        for j in 0..n {
            let tj = grid.t(j + 1);
            let c = cov_zw(ti, tj, params);
            sigma[(i, n + j)] = c;
            sigma[(n + j, i)] = c;
        }
    }
    for i in 0..n {
        for j in 0..=i {
            let c = grid.t(j + 1); // min of the two node times
            sigma[(n + i, n + j)] = c;
            sigma[(n + j, n + i)] = c;
        }
    }
    Ok(sigma)
}

/// Factor the joint covariance, escalating jitter until it succeeds.
pub fn build_joint_cholesky(grid: &Grid, params: &ModelParams) -> Result<JointFactor> {
    let sigma = joint_covariance(grid, params)?;
    let dim = sigma.nrows();
    for &delta in &JITTERS {
        let mut jittered = sigma.clone();
        for k in 0..dim {
            jittered[(k, k)] += delta;
        }
        if let Some(chol) = jittered.cholesky() {
            let l = chol.l();
            let rows = (0..dim)
                .map(|i| (0..=i).map(|j| l[(i, j)]).collect())
                .collect();
            return Ok(JointFactor { grid: *grid, rows, jitter: delta });
        }
    }
    Err(Error::Factorization { dim, max_jitter: *JITTERS.last().unwrap() })
}

impl JointFactor {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    /// Max-norm reconstruction error |L L^T - Sigma| (diagnostic).
    pub fn reconstruction_error(&self, params: &ModelParams) -> Result<f64> {
        let sigma = joint_covariance(&self.grid, params)?;
        let dim = self.dim();
        let mut worst = 0.0f64;
        for i in 0..dim {
            for j in 0..=i {
                let mut acc = 0.0;
                for k in 0..=j.min(i) {
                    acc += self.rows[i][k] * self.rows[j][k];
                }
                let mut target = sigma[(i, j)];
                if i == j {
                    target += self.jitter;
                }
                worst = worst.max((acc - target).abs());
            }
        }
        Ok(worst)
    }

    /// Correlate a standard normal vector in place: out = L * xi.
    fn correlate(&self, xi: &[f64], out: &mut [f64]) {
        for (i, row) in self.rows.iter().enumerate() {
            let mut acc = 0.0;
            for (j, &lij) in row.iter().enumerate() {
                acc += lij * xi[j];
            }
            out[i] = acc;
        }
    }
}

/// RNG for one replica: a fixed cipher keyed by `seed`, on stream `replica`.
pub fn replica_rng(seed: u64, replica: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica as u64 + 1);
    rng
}

/// Sample one replica from the factored joint law.
pub fn sample_one(factor: &JointFactor, params: &ModelParams, seed: u64, replica: usize) -> PathBundle {
    let grid = factor.grid;
    let n = grid.n();
    let mut rng = replica_rng(seed, replica);
    let xi: Vec<f64> = (0..2 * n).map(|_| rng.sample(StandardNormal)).collect();
    let mut corr = vec![0.0; 2 * n];
    factor.correlate(&xi, &mut corr);

    let mut z = vec![0.0; n + 1];
    let mut w = vec![0.0; n + 1];
    z[1..].copy_from_slice(&corr[..n]);
    w[1..].copy_from_slice(&corr[n..]);

    let sqrt_dt = grid.delta().sqrt();
    let mut wperp = vec![0.0; n + 1];
    for k in 1..=n {
        let incr: f64 = rng.sample(StandardNormal);
        wperp[k] = wperp[k - 1] + sqrt_dt * incr;
    }

    let rho = params.rho;
    let orth = (1.0 - rho * rho).sqrt();
    let b = (0..=n).map(|k| rho * w[k] + orth * wperp[k]).collect();

    PathBundle { grid, w, wperp, z, b, seed, replica }
}

/// Map every replica through `f` in parallel; output order is by replica
/// index, so the result is identical for any worker count.
pub fn sample_map<T: Send>(
    factor: &JointFactor,
    params: &ModelParams,
    n_paths: usize,
    seed: u64,
    f: impl Fn(usize, &PathBundle) -> T + Sync,
) -> Vec<T> {
    (0..n_paths)
        .into_par_iter()
        .map(|replica| {
            let bundle = sample_one(factor, params, seed, replica);
            f(replica, &bundle)
        })
        .collect()
}

/// Sample a full collection of bundles.
pub fn sample_bundle(
    factor: &JointFactor,
    params: &ModelParams,
    n_paths: usize,
    seed: u64,
) -> Vec<PathBundle> {
    sample_map(factor, params, n_paths, seed, |_, b| b.clone())
}

/// Pointwise rescaling Z^eps = eps^(beta/2) Z.
pub fn rescale_z(z: &[f64], params: &ModelParams, eps: f64) -> Result<Vec<f64>> {
    rescale(z, params, eps)
}

/// Pointwise rescaling B^eps = eps^(beta/2) B.
pub fn rescale_b(b: &[f64], params: &ModelParams, eps: f64) -> Result<Vec<f64>> {
    rescale(b, params, eps)
}

fn rescale(path: &[f64], params: &ModelParams, eps: f64) -> Result<Vec<f64>> {
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("eps must be positive, got {eps}")));
    }
    let m = eps.powf(params.beta / 2.0);
    Ok(path.iter().map(|x| m * x).collect())
}
