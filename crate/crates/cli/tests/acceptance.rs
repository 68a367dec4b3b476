//! Acceptance suite: thirteen numbered criteria spanning analytic
//! identities, oracle equivalence, Monte Carlo asymptotics and CLI
//! determinism. Each test prints a single pass/fail line (visible with
//! --nocapture, or automatically for failing criteria).

use std::process::Command;

use rbergomi_core::rate_solver::{
    endpoint_map_correlated, gradient_endpoint, solve_endpoint, solve_endpoint_uncorrelated_full,
    Mode, RateProblem,
};
use rbergomi_core::special::{hyp2f1, HypArgs};
use rbergomi_core::covariance::{cov_zb, cov_zz};
use rbergomi_core::path_sim::{build_joint_cholesky, sample_map};
use rbergomi_core::rbergomi::vol_path;
use rbergomi_core::stats::{mean, std_error};
use rbergomi_core::verify::{
    borell_tis_check, exp_equiv_check, holder_check, self_similarity_check, slope_check,
};
use rbergomi_core::{Control, Grid, ModelParams};

fn desk_params() -> ModelParams {
    ModelParams::new(-0.25, 1.0, -0.7, 0.04).unwrap()
}

fn report(criterion: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("criterion {criterion}: {verdict} — {detail}");
    assert!(pass, "criterion {criterion}: FAIL — {detail}");
}

#[test]
fn criterion_01_gauss_identity() {
    let mut worst = 0.0f64;
    for &alpha in &[-0.45, -0.3, -0.25, -0.1] {
        let value = hyp2f1(HypArgs::new(1.0, -alpha, 2.0 + alpha, 1.0).unwrap()).unwrap();
        let target = (1.0 + alpha) / (1.0 + 2.0 * alpha);
        worst = worst.max((value - target).abs());
    }
    report("01 (Gauss identity)", worst <= 1e-10, &format!("max abs error {worst:.3e}"));
}

#[test]
fn criterion_02_covariance_mc() {
    let p = desk_params();
    let grid = Grid::new(256).unwrap();
    let factor = build_joint_cholesky(&grid, &p).unwrap();
    let n_paths = 200_000;
    let probes: [(usize, usize); 10] = [
        (32, 96),
        (64, 64),
        (16, 224),
        (128, 192),
        (48, 80),
        (96, 160),
        (160, 160),
        (8, 120),
        (200, 256),
        (256, 256),
    ];
    let rows: Vec<Vec<f64>> = sample_map(&factor, &p, n_paths, 2024, |_, b| {
        let mut row = Vec::with_capacity(3 * probes.len());
        for &(i, j) in &probes {
            row.push(b.z[i] * b.z[j]);
            row.push(b.z[j] * b.b[j]);
            row.push(b.b[i] * b.b[j]);
        }
        row
    });
    let mut worst_ratio = 0.0f64;
    let mut detail = String::new();
    for (k, &(i, j)) in probes.iter().enumerate() {
        let (s, t) = (grid.t(i), grid.t(j));
        let targets = [
            cov_zz(s, t, &p).unwrap(),
            cov_zb(t, &p),
            s.min(t), // Cov(B_s, B_t) for Brownian B
        ];
        for (c, &target) in targets.iter().enumerate() {
            let col: Vec<f64> = rows.iter().map(|r| r[3 * k + c]).collect();
            let (m, se) = (mean(&col), std_error(&col));
            let ratio = (m - target).abs() / se;
            if ratio > worst_ratio {
                worst_ratio = ratio;
                detail = format!("worst |dev|/SE {ratio:.2} at pair ({s:.3},{t:.3}) column {c}");
            }
        }
    }
    report("02 (covariance MC)", worst_ratio <= 4.0, &detail);
}

#[test]
fn criterion_03_self_similarity_ks() {
    let p = desk_params();
    let grid = Grid::new(64).unwrap();
    let mut pass = true;
    let mut detail = String::new();
    for &a in &[0.25, 0.5] {
        let r = self_similarity_check(a, &p, &grid, 100_000, 77).unwrap();
        pass &= r.pass;
        detail.push_str(&format!(
            "a={a}: D={:.5} (crit {:.5}); ",
            r.ks_statistic, r.ks_critical_001
        ));
    }
    report("03 (self-similarity KS)", pass, &detail);
}

#[test]
fn criterion_04_roughness() {
    let grid = Grid::new(1024).unwrap();
    let mut pass = true;
    let mut detail = String::new();
    for &alpha in &[-0.4, -0.25] {
        let p = ModelParams::new(alpha, 1.0, -0.7, 0.04).unwrap();
        let r = holder_check(&p, &grid, 1000, 11).unwrap();
        let gap = (r.mean_estimate - r.target).abs();
        pass &= gap <= 0.05;
        detail.push_str(&format!(
            "alpha={alpha}: estimate {:.4} target {:.2}; ",
            r.mean_estimate, r.target
        ));
    }
    report("04 (roughness)", pass, &detail);
}

#[test]
fn criterion_05_lognormal_mean() {
    let p = desk_params();
    let grid = Grid::new(64).unwrap();
    let factor = build_joint_cholesky(&grid, &p).unwrap();
    let v1: Vec<f64> = sample_map(&factor, &p, 100_000, 5, |_, b| {
        *vol_path(b, &p, 1.0).unwrap().last().unwrap()
    });
    let (m, se) = (mean(&v1), std_error(&v1));
    let ratio = (m - p.v0).abs() / se;
    report(
        "05 (lognormal mean)",
        ratio <= 4.0,
        &format!("mean v_1 = {m:.6} vs v0 = {} ({ratio:.2} SE)", p.v0),
    );
}

fn grid_min(lo: f64, hi: f64, step: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let count = ((hi - lo) / step).ceil() as usize;
    let mut best = (lo, f(lo));
    for i in 1..=count {
        let x = lo + step * i as f64;
        let v = f(x);
        if v < best.1 {
            best = (x, v);
        }
    }
    best
}

#[test]
fn criterion_06_oracle_equivalence() {
    let params = desk_params();
    let u = 0.15;
    let mut pass = true;
    let mut detail = String::new();

    // n = 1: closed form u^2 / (2 v0 eps^(1+beta) rho^2 dt) and bisection oracle.
    let pb1 = RateProblem::new(params, Grid::new(1).unwrap(), 1.0, Mode::Correlated).unwrap();
    let solved1 = solve_endpoint(&pb1, u).unwrap();
    let closed = u * u / (2.0 * params.v0 * params.rho * params.rho);
    let rel = (solved1.value - closed).abs() / closed;
    pass &= rel <= 1e-8;
    detail.push_str(&format!("n=1 closed-form rel err {rel:.2e}; "));

    let g1 = |f0: f64| {
        endpoint_map_correlated(&Control::new(vec![f0]).unwrap(), &pb1).unwrap() - u
    };
    let (mut lo, mut hi) = (-10.0, 10.0);
    assert!(g1(lo) * g1(hi) <= 0.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if g1(lo) * g1(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let brute1 = 0.5 * lo * lo;
    let gap1 = (solved1.value - brute1).abs();
    pass &= gap1 <= 1e-4;
    detail.push_str(&format!("n=1 oracle gap {gap1:.2e}; "));

    // n = 2: eliminate f1 through the linear-in-f1 constraint, scan f0.
    let pb2 = RateProblem::new(params, Grid::new(2).unwrap(), 1.0, Mode::Correlated).unwrap();
    let dt = pb2.grid.delta();
    let g2 = |f0: f64, f1: f64| {
        endpoint_map_correlated(&Control::new(vec![f0, f1]).unwrap(), &pb2).unwrap()
    };
    let cost2 = |f0: f64| {
        let g0 = g2(f0, 0.0);
        let slope = g2(f0, 1.0) - g0;
        let f1 = (u - g0) / slope;
        0.5 * dt * (f0 * f0 + f1 * f1)
    };
    let (arg, _) = grid_min(-8.0, 8.0, 1e-3, cost2);
    let (_, brute2) = grid_min(arg - 2e-3, arg + 2e-3, 1e-6, cost2);
    let solved2 = solve_endpoint(&pb2, u).unwrap();
    let gap2 = (solved2.value - brute2).abs();
    pass &= gap2 <= 1e-4;
    detail.push_str(&format!("n=2 oracle gap {gap2:.2e}"));

    report("06 (oracle equivalence)", pass, &detail);
}

#[test]
fn criterion_07_zero_rate_at_origin() {
    let params = desk_params();
    let pb = RateProblem::new(params, Grid::new(32).unwrap(), 1.0, Mode::Correlated).unwrap();
    let r = solve_endpoint(&pb, 0.0).unwrap();
    let zero_control = r.control.iter().all(|&f| f == 0.0);
    report(
        "07 (rate zero at origin)",
        r.value == 0.0 && zero_control,
        &format!("value {} with zero control {zero_control}", r.value),
    );
}

#[test]
fn criterion_08_uncorrelated_consistency() {
    let mut pass = true;
    let mut detail = String::new();
    let instances = [
        (-0.25, 1.0, 0.04, 0.2, 8usize),
        (-0.4, 1.2, 0.09, 0.1, 8),
        (-0.1, 0.8, 0.04, 0.3, 8),
        (-0.3, 1.5, 0.02, 0.15, 16),
        (-0.25, 1.0, 0.04, -0.2, 16),
    ];
    for &(alpha, eta, v0, u, n) in &instances {
        let params = ModelParams::new(alpha, eta, 0.0, v0).unwrap();
        let pb = RateProblem::new(params, Grid::new(n).unwrap(), 1.0, Mode::Uncorrelated).unwrap();
        let reduced = solve_endpoint(&pb, u).unwrap();
        let full = solve_endpoint_uncorrelated_full(&pb, u).unwrap();
        let gap = (reduced.value - full.value).abs();
        pass &= gap <= 1e-6;
        let sym = solve_endpoint(&pb, -u).unwrap();
        let sym_gap = (reduced.value - sym.value).abs();
        pass &= sym_gap <= 1e-10;
        detail.push_str(&format!("(a={alpha},u={u}): gap {gap:.1e} sym {sym_gap:.1e}; "));
    }
    report("08 (uncorrelated consistency)", pass, &detail);
}

#[test]
fn criterion_09_adjoint_gradient() {
    use rand::{Rng, SeedableRng};
    let params = desk_params();
    let pb = RateProblem::new(params, Grid::new(16).unwrap(), 1.0, Mode::Correlated).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let f: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let grad = gradient_endpoint(&Control::new(f.clone()).unwrap(), &pb).unwrap();
        let h = 1e-6;
        for j in 0..16 {
            let mut up = f.clone();
            let mut dn = f.clone();
            up[j] += h;
            dn[j] -= h;
            let fd = (endpoint_map_correlated(&Control::new(up).unwrap(), &pb).unwrap()
                - endpoint_map_correlated(&Control::new(dn).unwrap(), &pb).unwrap())
                / (2.0 * h);
            let rel = (grad[j] - fd).abs() / fd.abs().max(1e-8);
            worst = worst.max(rel);
        }
    }
    report("09 (adjoint gradient)", worst <= 1e-5, &format!("max relative error {worst:.2e}"));
}

#[test]
fn criterion_10_ldp_slope() {
    let params = desk_params();
    let grid = Grid::new(256).unwrap();
    let ladder = [0.5, 0.35, 0.25, 0.18, 0.12];
    let u = 0.2;
    let result = slope_check(u, &ladder, &params, &grid, 1_000_000, 31, |t| {
        let pb = RateProblem::new(params, grid, t, Mode::Correlated)?;
        Ok(solve_endpoint(&pb, u)?.value)
    });
    match result {
        Ok(r) => {
            let pass = r.r_squared >= 0.95 && r.fitted_slope > 0.0 && r.relative_gap <= 0.30;
            report(
                "10 (LDP slope)",
                pass,
                &format!(
                    "slope {:.4} reference {:.4} R^2 {:.4} gap {:.2}",
                    r.fitted_slope, r.rate_reference, r.r_squared, r.relative_gap
                ),
            );
        }
        Err(e) => {
            // The pinned ladder/path-count combination cannot reach the
            // required hit counts: the upper tail at u = 0.2 with rho < 0
            // thins out below ~1e-6 for t <= 0.25, so the smallest rungs see
            // no hits at 1e6 paths.
            report("10 (LDP slope)", false, &format!("unattainable as pinned: {e}"));
        }
    }
}

#[test]
fn criterion_11_exponential_equivalence() {
    let params = desk_params();
    let grid = Grid::new(256).unwrap();
    let r = exp_equiv_check(0.01, &[0.5, 0.25, 0.1], &params, &grid, 100_000, 13).unwrap();
    let qs: Vec<f64> = r.rungs.iter().map(|x| x.q_hat).collect();
    report(
        "11 (exponential equivalence)",
        r.pass,
        &format!("q_hat = {qs:?}, nonincreasing {}, final zero {}", r.nonincreasing, r.final_rung_zero),
    );
}

#[test]
fn criterion_12_borell_tis() {
    let params = desk_params();
    let grid = Grid::new(512).unwrap();
    let pilot = borell_tis_check(&[], &params, &grid, 100_000, 21).unwrap();
    let xs = [pilot.sup_mean + 1.0, pilot.sup_mean + 1.5, pilot.sup_mean + 2.0];
    let r = borell_tis_check(&xs, &params, &grid, 100_000, 21).unwrap();
    let detail: Vec<String> = r
        .points
        .iter()
        .map(|p| format!("x={:.3}: p {:.2e} <= bound {:.2e}+3SE", p.x, p.p_hat, p.bound))
        .collect();
    report("12 (Borell-TIS)", r.pass, &detail.join("; "));
}

fn run_cli(args: &[&str]) -> (i32, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_rbergomi"))
        .args(args)
        .output()
        .expect("failed to launch CLI");
    (out.status.code().unwrap_or(-1), out.stdout)
}

#[test]
fn criterion_13_determinism() {
    let cases: Vec<Vec<&str>> = vec![
        vec!["simulate", "--n", "32", "--n-paths", "64", "--seed", "7"],
        vec!["cov", "--s", "0.3", "--t", "0.7"],
        vec!["rate", "--n", "8", "--u", "0.1"],
        vec![
            "verify", "expequiv", "--n", "32", "--n-paths", "500", "--seed", "3", "--ladder",
            "0.5,0.25",
        ],
    ];
    let mut pass = true;
    let mut detail = String::new();
    for case in &cases {
        let (c0, base) = run_cli(case);
        let (c1, again) = run_cli(case);
        let mut t1 = case.clone();
        t1.extend_from_slice(&["--threads", "1"]);
        let mut t8 = case.clone();
        t8.extend_from_slice(&["--threads", "8"]);
        let (c2, one) = run_cli(&t1);
        let (c3, eight) = run_cli(&t8);
        let ok = c0 == 0
            && c1 == 0
            && c2 == 0
            && c3 == 0
            && base == again
            && base == one
            && base == eight;
        pass &= ok;
        detail.push_str(&format!("{}: {}; ", case[0], if ok { "identical" } else { "MISMATCH" }));
    }
    report("13 (determinism)", pass, &detail);
}
