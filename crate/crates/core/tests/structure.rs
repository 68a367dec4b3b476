//! Structural checks on the joint law: positive semi-definiteness of the
//! assembled covariance, property-based invariants, and Monte Carlo
//! agreement between sampled paths and the closed-form covariances.

use nalgebra::DMatrix;
use proptest::prelude::*;

use rbergomi_core::covariance::{cov_zb, cov_zw, cov_zz};
use rbergomi_core::operators::{apply_volterra, Control};
use rbergomi_core::path_sim::{build_joint_cholesky, joint_covariance, sample_map};
use rbergomi_core::stats::{mean, std_error};
use rbergomi_core::{Grid, ModelParams};

fn params(alpha: f64) -> ModelParams {
    ModelParams::new(alpha, 1.0, -0.7, 0.04).unwrap()
}

#[test]
fn joint_covariance_is_psd() {
    for &alpha in &[-0.25, -0.45, -0.05] {
        let p = params(alpha);
        let grid = Grid::new(100).unwrap();
        let sigma: DMatrix<f64> = joint_covariance(&grid, &p).unwrap();
        let eig = sigma.symmetric_eigen();
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min >= -1e-9, "alpha={alpha}: min eigenvalue {min}");
    }
}

#[test]
fn empirical_covariances_match_closed_forms() {
    let p = params(-0.25);
    let grid = Grid::new(64).unwrap();
    let factor = build_joint_cholesky(&grid, &p).unwrap();
    let n_paths = 20_000;
    // Probe node pairs (i, j) with t = i/n.
    let probes = [(16usize, 48usize), (32, 32), (8, 56), (64, 64), (24, 40)];
    let samples: Vec<Vec<f64>> = sample_map(&factor, &p, n_paths, 7, |_, b| {
        let mut row = Vec::with_capacity(3 * probes.len());
        for &(i, j) in &probes {
            row.push(b.z[i] * b.z[j]);
            row.push(b.z[i] * b.w[j]);
            row.push(b.z[i] * b.b[j]);
        }
        row
    });
    for (k, &(i, j)) in probes.iter().enumerate() {
        let (s, t) = (grid.t(i), grid.t(j));
        let zz: Vec<f64> = samples.iter().map(|r| r[3 * k]).collect();
        let zw: Vec<f64> = samples.iter().map(|r| r[3 * k + 1]).collect();
        let checks = [
            ("zz", mean(&zz), std_error(&zz), cov_zz(s, t, &p).unwrap()),
            ("zw", mean(&zw), std_error(&zw), cov_zw(s, t, &p)),
        ];
        for (name, m, se, exact) in checks {
            assert!(
                (m - exact).abs() <= 5.0 * se,
                "{name} at ({s},{t}): {m} vs {exact} (se {se})"
            );
        }
        if i == j {
            let zb: Vec<f64> = samples.iter().map(|r| r[3 * k + 2]).collect();
            let exact = cov_zb(t, &p);
            let (m, se) = (mean(&zb), std_error(&zb));
            assert!(
                (m - exact).abs() <= 5.0 * se,
                "zb at {t}: {m} vs {exact} (se {se})"
            );
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cov_zz_symmetric(s in 0.01f64..1.0, t in 0.01f64..1.0) {
        let p = params(-0.3);
        let a = cov_zz(s, t, &p).unwrap();
        let b = cov_zz(t, s, &p).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn cov_zz_self_similar(s in 0.05f64..0.9, t in 0.05f64..0.9, a in 0.1f64..1.0) {
        let p = params(-0.3);
        let lhs = cov_zz(a * s, a * t, &p).unwrap();
        let rhs = a.powf(p.beta) * cov_zz(s, t, &p).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1e-6));
    }

    #[test]
    fn volterra_operator_is_linear(
        f in prop::collection::vec(-2.0f64..2.0, 8),
        g in prop::collection::vec(-2.0f64..2.0, 8),
        a in -3.0f64..3.0,
    ) {
        let p = params(-0.25);
        let grid = Grid::new(8).unwrap();
        let combo: Vec<f64> = f.iter().zip(&g).map(|(x, y)| a * x + y).collect();
        let vf = apply_volterra(&Control::new(f).unwrap(), &grid, &p);
        let vg = apply_volterra(&Control::new(g).unwrap(), &grid, &p);
        let vc = apply_volterra(&Control::new(combo).unwrap(), &grid, &p);
        for k in 0..=grid.n() {
            let expect = a * vf[k] + vg[k];
            prop_assert!((vc[k] - expect).abs() <= 1e-10 * expect.abs().max(1.0));
        }
    }
}
