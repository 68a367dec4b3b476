//! Artifact formatting: round-trip-safe float text and CSV writers.

use std::io::Write;

use crate::error::Result as CoreResult;
use crate::grid::Grid;
use crate::path_sim::PathBundle;
use crate::rbergomi::ModelPaths;

/// 17 significant digits; parses back to the identical double.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Bundle CSV: header then one row per node, columns t, W, Wperp, Z, B.
pub fn write_bundle_csv<W: Write>(out: &mut W, bundle: &PathBundle) -> std::io::Result<()> {
    out.write_all(b"t,W,Wperp,Z,B\n")?;
    for k in 0..bundle.z.len() {
        writeln!(
            out,
            "{},{},{},{},{}",
            fmt_f64(bundle.grid.t(k)),
            fmt_f64(bundle.w[k]),
            fmt_f64(bundle.wperp[k]),
            fmt_f64(bundle.z[k]),
            fmt_f64(bundle.b[k]),
        )?;
    }
    Ok(())
}

/// Model CSV: columns t, v, X.
pub fn write_model_csv<W: Write>(out: &mut W, paths: &ModelPaths) -> std::io::Result<()> {
    out.write_all(b"t,v,X\n")?;
    for k in 0..paths.v.len() {
        writeln!(
            out,
            "{},{},{}",
            fmt_f64(paths.bundle.grid.t(k)),
            fmt_f64(paths.v[k]),
            fmt_f64(paths.x[k]),
        )?;
    }
    Ok(())
}

/// Covariance table CSV over all grid node pairs: columns s, t, cov_zz.
pub fn write_cov_table_csv<W: Write>(
    out: &mut W,
    grid: &Grid,
    params: &crate::covariance::ModelParams,
) -> CoreResult<()> {
    let write = |out: &mut W, line: String| -> CoreResult<()> {
        out.write_all(line.as_bytes())
            .map_err(|e| crate::error::Error::Domain(format!("write failed: {e}")))
    };
    write(out, "s,t,cov_zz\n".into())?;
    for i in 0..=grid.n() {
        for j in i..=grid.n() {
            let s = grid.t(i);
            let t = grid.t(j);
            let c = crate::covariance::cov_zz(s, t, params)?;
            write(out, format!("{},{},{}\n", fmt_f64(s), fmt_f64(t), fmt_f64(c)))?;
        }
    }
    Ok(())
}
