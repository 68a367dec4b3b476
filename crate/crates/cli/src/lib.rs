//! Command-line wiring: configuration parsing (flags or a JSON config file,
//! flags taking precedence), dispatch into the library, and artifact output
//! with a reproducible config echo in every file.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use rbergomi_core::covariance::{cov_zb, cov_zw, cov_zz};
use rbergomi_core::io::{fmt_f64, write_bundle_csv, write_cov_table_csv, write_model_csv};
use rbergomi_core::path_sim::{build_joint_cholesky, sample_map};
use rbergomi_core::rate_solver::{
    solve_endpoint, solve_endpoint_uncorrelated_full, Mode, RateProblem,
};
use rbergomi_core::rbergomi::model_paths;
use rbergomi_core::stats::{mean, quantile, std_error};
use rbergomi_core::verify::{
    borell_tis_check, exp_equiv_check, holder_check, self_similarity_check, slope_check,
};
use rbergomi_core::{Grid, ModelParams};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser, Debug)]
#[command(name = "rbergomi", version, about = "Rough Bergomi simulation, rate functions and verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand. All optional so that a JSON config
/// file can supply values; flags override the file.
#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
struct CommonOpts {
    /// JSON config file with the same keys as the flags
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    eta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    rho: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    v0: Option<f64>,
    /// Grid steps on [0,1]
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "n-paths")]
    n_paths: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    eps: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    u: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    delta: Option<f64>,
    /// Comma-separated decreasing t (or eps) ladder
    #[arg(long, allow_hyphen_values = true)]
    ladder: Option<String>,
    /// Output path base; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker thread cap; results are identical for any value
    #[arg(long)]
    threads: Option<usize>,
    /// Output format: json or csv (where a choice exists)
    #[arg(long)]
    format: Option<String>,
}

impl CommonOpts {
    /// Merge a JSON config file underneath the flags.
    fn merged(mut self) -> Result<Self> {
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read config file {}", path.display()))?;
            let file: CommonOpts =
                serde_json::from_str(&text).context("invalid JSON config file")?;
            self.alpha = self.alpha.or(file.alpha);
            self.eta = self.eta.or(file.eta);
            self.rho = self.rho.or(file.rho);
            self.v0 = self.v0.or(file.v0);
            self.n = self.n.or(file.n);
            self.seed = self.seed.or(file.seed);
            self.n_paths = self.n_paths.or(file.n_paths);
            self.eps = self.eps.or(file.eps);
            self.u = self.u.or(file.u);
            self.delta = self.delta.or(file.delta);
            self.ladder = self.ladder.or(file.ladder);
            self.out = self.out.or(file.out);
            self.threads = self.threads.or(file.threads);
            self.format = self.format.or(file.format);
        }
        Ok(self)
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample joint driver and model paths, writing CSVs and a summary
    Simulate {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Evaluate closed-form covariances (scalar with --s/--t, table otherwise)
    Cov {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long, allow_negative_numbers = true)]
        s: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        t: Option<f64>,
    },
    /// Evaluate the endpoint rate function (optionally a u-sweep table)
    Rate {
        #[command(flatten)]
        common: CommonOpts,
        /// correlated or uncorrelated
        #[arg(long)]
        mode: Option<String>,
        /// Sweep "start:stop:count" producing a CSV of u -> rate value
        #[arg(long = "u-sweep", allow_hyphen_values = true)]
        u_sweep: Option<String>,
        /// Solve the full two-control uncorrelated problem instead of the reduced one
        #[arg(long)]
        full: bool,
    },
    /// Monte Carlo verification checks
    Verify {
        #[command(subcommand)]
        check: VerifyCheck,
    },
}

#[derive(Subcommand, Debug)]
enum VerifyCheck {
    /// Tail-slope regression against the rate-function reference
    Slope {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Exponential-equivalence (drift) signature over an eps ladder
    Expequiv {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Gaussian sup concentration bound for Z
    Borell {
        #[command(flatten)]
        common: CommonOpts,
        /// Comma-separated offsets above the empirical sup mean
        #[arg(long, allow_hyphen_values = true)]
        offsets: Option<String>,
    },
    /// Mean variogram roughness of log v
    Holder {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// KS self-similarity check of the Z marginal
    Selfsim {
        #[command(flatten)]
        common: CommonOpts,
        /// Comma-separated scale factors (grid nodes)
        #[arg(long)]
        scales: Option<String>,
    },
}

/// Fully resolved run configuration, echoed into every artifact.
#[derive(Debug, Clone, Serialize)]
struct ResolvedConfig {
    command: String,
    alpha: f64,
    eta: f64,
    rho: f64,
    v0: f64,
    n: usize,
    seed: u64,
    n_paths: usize,
    eps: f64,
    u: f64,
    delta: f64,
    ladder: Vec<f64>,
    version: String,
}

fn parse_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| anyhow!("bad number '{s}': {e}")))
        .collect()
}

fn resolve(command: &str, c: &CommonOpts) -> Result<(ResolvedConfig, ModelParams, Grid)> {
    let alpha = c.alpha.unwrap_or(-0.25);
    let eta = c.eta.unwrap_or(1.0);
    let rho = c.rho.unwrap_or(-0.7);
    let v0 = c.v0.unwrap_or(0.04);
    let n = c.n.unwrap_or(256);
    let ladder = match &c.ladder {
        Some(text) => parse_list(text)?,
        None => vec![0.5, 0.35, 0.25, 0.18, 0.12],
    };
    let config = ResolvedConfig {
        command: command.to_string(),
        alpha,
        eta,
        rho,
        v0,
        n,
        seed: c.seed.unwrap_or(42),
        n_paths: c.n_paths.unwrap_or(10_000),
        eps: c.eps.unwrap_or(1.0),
        u: c.u.unwrap_or(0.0),
        delta: c.delta.unwrap_or(0.01),
        ladder,
        version: VERSION.to_string(),
    };
    let params = ModelParams::new(alpha, eta, rho, v0)?;
    let grid = Grid::new(n)?;
    Ok((config, params, grid))
}

/// Failure classification for exit codes: 1 validation, 2 numerical.
fn exit_class(err: &anyhow::Error) -> u8 {
    use rbergomi_core::Error as E;
    if let Some(core) = err.downcast_ref::<E>() {
        match core {
            E::Domain(_) | E::Degenerate(_) => 1,
            _ => 2,
        }
    } else if err.downcast_ref::<std::io::Error>().is_some() {
        1
    } else {
        2
    }
}

fn open_out(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path)
        .with_context(|| format!("unwritable output path {}", path.display()))
        .map_err(|e| match e.downcast::<std::io::Error>() {
            Ok(io) => anyhow::Error::new(io).context("unwritable output path"),
            Err(e) => e,
        })?;
    Ok(BufWriter::new(file))
}

fn echo_comment(config: &ResolvedConfig) -> String {
    format!(
        "# config: {}\n# version: {}\n",
        serde_json::to_string(config).unwrap(),
        VERSION
    )
}

fn emit_json(out: &Option<PathBuf>, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(path) => {
            let mut w = open_out(path)?;
            writeln!(w, "{text}")?;
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn with_report(config: &ResolvedConfig, report: serde_json::Value) -> serde_json::Value {
    json!({ "config": config, "version": VERSION, "report": report })
}

fn cmd_simulate(common: CommonOpts) -> Result<()> {
    let c = common.merged()?;
    let (config, params, grid) = resolve("simulate", &c)?;
    let factor = build_joint_cholesky(&grid, &params)?;
    let n_paths = config.n_paths;
    let eps = config.eps;

    let endpoints: Vec<(f64, f64)> = sample_map(&factor, &params, n_paths, config.seed, |_, b| {
        let paths = model_paths(b, &params, eps).expect("overflow in simulation");
        (*paths.x.last().unwrap(), *paths.v.last().unwrap())
    });
    let x1: Vec<f64> = endpoints.iter().map(|e| e.0).collect();
    let v1: Vec<f64> = endpoints.iter().map(|e| e.1).collect();
    let mut x1s = x1.clone();
    x1s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let summary = json!({
        "x1_mean": mean(&x1),
        "x1_std_err": std_error(&x1),
        "x1_q05": quantile(&x1s, 0.05),
        "x1_q50": quantile(&x1s, 0.50),
        "x1_q95": quantile(&x1s, 0.95),
        "v1_mean": mean(&v1),
        "v1_std_err": std_error(&v1),
        "jitter": factor.jitter,
    });

    if let Some(base) = &c.out {
        // Persist the first few paths as CSV, path index in the filename.
        let keep = n_paths.min(16);
        for replica in 0..keep {
            let bundle = rbergomi_core::path_sim::sample_one(&factor, &params, config.seed, replica);
            let paths = model_paths(&bundle, &params, eps)?;
            let bundle_path = with_suffix(base, &format!("_bundle_{replica:03}.csv"));
            let mut w = open_out(&bundle_path)?;
            w.write_all(echo_comment(&config).as_bytes())?;
            write_bundle_csv(&mut w, &bundle)?;
            let model_path = with_suffix(base, &format!("_model_{replica:03}.csv"));
            let mut w = open_out(&model_path)?;
            w.write_all(echo_comment(&config).as_bytes())?;
            write_model_csv(&mut w, &paths)?;
        }
        let summary_path = with_suffix(base, "_summary.json");
        emit_json(&Some(summary_path), &with_report(&config, summary))?;
    } else {
        emit_json(&None, &with_report(&config, summary))?;
    }
    Ok(())
}

fn with_suffix(base: &Path, suffix: &str) -> PathBuf {
    let mut s = base.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

fn cmd_cov(common: CommonOpts, s: Option<f64>, t: Option<f64>) -> Result<()> {
    let c = common.merged()?;
    let (config, params, grid) = resolve("cov", &c)?;
    match (s, t) {
        (Some(s), Some(t)) => {
            let report = json!({
                "s": s,
                "t": t,
                "cov_zz": cov_zz(s, t, &params)?,
                "cov_zb_t": cov_zb(t, &params),
                "cov_zw": cov_zw(s, t, &params),
            });
            match c.format.as_deref() {
                Some("json") => emit_json(&c.out, &with_report(&config, report))?,
                _ => {
                    // Scalar default: just the Z covariance value.
                    let line = fmt_f64(cov_zz(s, t, &params)?);
                    match &c.out {
                        Some(path) => {
                            let mut w = open_out(path)?;
                            writeln!(w, "{line}")?;
                        }
                        None => println!("{line}"),
                    }
                }
            }
        }
        (None, None) => match &c.out {
            Some(path) => {
                let mut w = open_out(path)?;
                w.write_all(echo_comment(&config).as_bytes())?;
                write_cov_table_csv(&mut w, &grid, &params)?;
            }
            None => {
                let mut buf = Vec::new();
                write_cov_table_csv(&mut buf, &grid, &params)?;
                print!("{}", String::from_utf8_lossy(&buf));
            }
        },
        _ => return Err(rbergomi_core::Error::Domain("cov needs both --s and --t, or neither".into()).into()),
    }
    Ok(())
}

fn parse_mode(text: Option<&str>, rho: f64) -> Result<Mode> {
    match text {
        Some("correlated") => Ok(Mode::Correlated),
        Some("uncorrelated") => Ok(Mode::Uncorrelated),
        Some(other) => Err(rbergomi_core::Error::Domain(format!("unknown mode '{other}'")).into()),
        None => Ok(if rho == 0.0 { Mode::Uncorrelated } else { Mode::Correlated }),
    }
}

fn parse_sweep(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(anyhow!("u-sweep must be start:stop:count"));
    }
    let start: f64 = parts[0].parse()?;
    let stop: f64 = parts[1].parse()?;
    let count: usize = parts[2].parse()?;
    if count < 2 {
        return Err(anyhow!("u-sweep count must be at least 2"));
    }
    Ok((0..count)
        .map(|i| start + (stop - start) * i as f64 / (count - 1) as f64)
        .collect())
}

fn cmd_rate(common: CommonOpts, mode: Option<String>, u_sweep: Option<String>, full: bool) -> Result<()> {
    let c = common.merged()?;
    let (config, params, grid) = resolve("rate", &c)?;
    let mode = parse_mode(mode.as_deref(), params.rho)?;
    let problem = RateProblem::new(params, grid, config.eps, mode)?;
    if let Some(sweep) = u_sweep {
        let us = parse_sweep(&sweep)?;
        let mut rows = String::new();
        rows.push_str("u,value,residual,iterations,converged\n");
        for &u in &us {
            let r = solve_rate(&problem, u, full)?;
            rows.push_str(&format!(
                "{},{},{},{},{}\n",
                fmt_f64(u),
                fmt_f64(r.value),
                fmt_f64(r.residual),
                r.iterations,
                r.converged
            ));
        }
        match &c.out {
            Some(path) => {
                let mut w = open_out(path)?;
                w.write_all(echo_comment(&config).as_bytes())?;
                w.write_all(rows.as_bytes())?;
            }
            None => print!("{rows}"),
        }
    } else {
        let r = solve_rate(&problem, config.u, full)?;
        let report = serde_json::to_value(&r)?;
        emit_json(&c.out, &with_report(&config, report))?;
    }
    Ok(())
}

fn solve_rate(problem: &RateProblem, u: f64, full: bool) -> Result<rbergomi_core::RateResult> {
    let r = if full && problem.mode == Mode::Uncorrelated {
        solve_endpoint_uncorrelated_full(problem, u)?
    } else {
        solve_endpoint(problem, u)?
    };
    Ok(r)
}

fn cmd_verify(check: VerifyCheck) -> Result<()> {
    match check {
        VerifyCheck::Slope { common } => {
            let c = common.merged()?;
            let (config, params, grid) = resolve("verify slope", &c)?;
            let mode = if params.rho == 0.0 { Mode::Uncorrelated } else { Mode::Correlated };
            let report = slope_check(
                config.u,
                &config.ladder,
                &params,
                &grid,
                config.n_paths,
                config.seed,
                |t| {
                    let pb = RateProblem::new(params, grid, t, mode)?;
                    Ok(solve_endpoint(&pb, config.u)?.value)
                },
            )?;
            if let Some(out) = &c.out {
                // Plot-ready CSV next to the JSON report.
                let csv_path = with_suffix(out, ".csv");
                let mut w = open_out(&csv_path)?;
                w.write_all(echo_comment(&config).as_bytes())?;
                w.write_all(b"t,p_hat,std_err,log_p\n")?;
                for (i, &t) in report.ladder.iter().enumerate() {
                    writeln!(
                        w,
                        "{},{},{},{}",
                        fmt_f64(t),
                        fmt_f64(report.p_hat[i]),
                        fmt_f64(report.std_err[i]),
                        fmt_f64(report.log_p[i])
                    )?;
                }
            }
            emit_json(&c.out, &with_report(&config, serde_json::to_value(&report)?))
        }
        VerifyCheck::Expequiv { common } => {
            let c = common.merged()?;
            let (config, params, grid) = resolve("verify expequiv", &c)?;
            let report = exp_equiv_check(
                config.delta,
                &config.ladder,
                &params,
                &grid,
                config.n_paths,
                config.seed,
            )?;
            emit_json(&c.out, &with_report(&config, serde_json::to_value(&report)?))
        }
        VerifyCheck::Borell { common, offsets } => {
            let c = common.merged()?;
            let (config, params, grid) = resolve("verify borell", &c)?;
            let offsets = match offsets {
                Some(text) => parse_list(&text)?,
                None => vec![1.0, 1.5, 2.0],
            };
            // Pilot pass for the sup mean, then absolute thresholds.
            let pilot = borell_tis_check(&[], &params, &grid, config.n_paths, config.seed)?;
            let xs: Vec<f64> = offsets.iter().map(|o| pilot.sup_mean + o).collect();
            let report = borell_tis_check(&xs, &params, &grid, config.n_paths, config.seed)?;
            emit_json(&c.out, &with_report(&config, serde_json::to_value(&report)?))
        }
        VerifyCheck::Holder { common } => {
            let c = common.merged()?;
            let (config, params, grid) = resolve("verify holder", &c)?;
            let report = holder_check(&params, &grid, config.n_paths, config.seed)?;
            emit_json(&c.out, &with_report(&config, serde_json::to_value(&report)?))
        }
        VerifyCheck::Selfsim { common, scales } => {
            let c = common.merged()?;
            let (config, params, grid) = resolve("verify selfsim", &c)?;
            let scales = match scales {
                Some(text) => parse_list(&text)?,
                None => vec![0.25, 0.5],
            };
            let reports: Result<Vec<_>> = scales
                .iter()
                .map(|&a| {
                    Ok(self_similarity_check(a, &params, &grid, config.n_paths, config.seed)?)
                })
                .collect();
            emit_json(&c.out, &with_report(&config, serde_json::to_value(&reports?)?))
        }
    }
}

fn threads_of(command: &Command) -> Option<usize> {
    let common = match command {
        Command::Simulate { common } => common,
        Command::Cov { common, .. } => common,
        Command::Rate { common, .. } => common,
        Command::Verify { check } => match check {
            VerifyCheck::Slope { common }
            | VerifyCheck::Expequiv { common }
            | VerifyCheck::Borell { common, .. }
            | VerifyCheck::Holder { common }
            | VerifyCheck::Selfsim { common, .. } => common,
        },
    };
    common.threads
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Simulate { common } => cmd_simulate(common),
        Command::Cov { common, s, t } => cmd_cov(common, s, t),
        Command::Rate { common, mode, u_sweep, full } => cmd_rate(common, mode, u_sweep, full),
        Command::Verify { check } => cmd_verify(check),
    }
}

pub fn run() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help/version requests are successes; anything else is a
            // validation failure.
            use clap::error::ErrorKind;
            let _ = err.print();
            return match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let threads = threads_of(&cli.command);
    let result = match threads {
        Some(t) => {
            let pool = match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
                Ok(pool) => pool,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
            };
            pool.install(|| dispatch(cli.command))
        }
        None => dispatch(cli.command),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_class(&err))
        }
    }
}
