//! Diagnostics CSV and the human-readable run summary.

use std::fmt::Write as _;
use std::path::Path;

use msflux_core::diagnostics::{FitResult, RunRecord, Sample, Termination};
use msflux_core::RegimeCertificate64;

use crate::error::CliError;

/// Version tag carried in the CSV header row (first column of every row).
pub const CSV_FORMAT_VERSION: u32 = 1;

pub const CSV_COLUMNS: &str = "format_version,t,norm_l2,norm_hs,norm_hs_weighted,u_tilde_hs,\
mass_residual,sum_zero_residual,equimolar_residual,incompressibility_residual,min_concentration";

fn fmt_f(v: f64) -> String {
    format!("{v:.17e}")
}

/// Renders the diagnostics time series; one row per sample, columns fixed.
pub fn render_csv(samples: &[Sample<f64>]) -> String {
    let mut out = String::new();
    out.push_str(CSV_COLUMNS);
    out.push('\n');
    for s in samples {
        let fields = [
            s.t,
            s.norm_l2,
            s.norm_hs,
            s.norm_hs_weighted,
            s.u_tilde_hs_norm,
            s.mass_residual,
            s.sum_zero_residual,
            s.equimolar_residual,
            s.incompressibility_residual,
            s.min_concentration,
        ];
        let mut row = CSV_FORMAT_VERSION.to_string();
        for v in fields {
            row.push(',');
            row.push_str(&fmt_f(v));
        }
        out.push_str(&row);
        out.push('\n');
    }
    out
}

pub fn write_csv(path: &Path, samples: &[Sample<f64>]) -> Result<(), CliError> {
    std::fs::write(path, render_csv(samples)).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

pub fn render_certificate(cert: &RegimeCertificate64) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "regime certificate");
    let _ = writeln!(out, "  lambda_a         = {:.12e}", cert.lambda_a);
    let _ = writeln!(out, "  mu_a             = {:.12e}", cert.mu_a);
    let _ = writeln!(out, "  C0               = {:.12e}", cert.c0);
    let _ = writeln!(out, "  min c_bar        = {:.12e}", cert.min_c_bar);
    let _ = writeln!(out, "  C_s (parameter)  = {:.12e}", cert.c_s_param);
    let _ = writeln!(out, "  C_p (parameter)  = {:.12e}", cert.c_poincare_param);
    let _ = writeln!(out, "  delta_s          = {:.12e}", cert.delta_s);
    let _ = writeln!(out, "  lambda_s         = {:.12e}", cert.lambda_s);
    let _ = writeln!(
        out,
        "  note: delta_s and lambda_s are relative to the configured C_s and C_p;\n\
         \x20 the fitted rate below is the measured quantity"
    );
    out
}

/// Structured text report of one run.
pub struct SummaryInputs<'a> {
    pub scenario: &'a str,
    pub seed: u64,
    pub record: &'a RunRecord<f64>,
    pub fit: Option<FitResult<f64>>,
    pub certificate: &'a RegimeCertificate64,
    /// Supremum of the exponentially weighted velocity integral at the
    /// certified rate (bounded in-regime; the bound's constant is unknown).
    pub velocity_integral_sup: f64,
}

pub fn render_summary(inp: &SummaryInputs<'_>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "scenario: {}", inp.scenario);
    let _ = writeln!(out, "seed: {}", inp.seed);
    match &inp.record.termination {
        Termination::Completed => {
            let _ = writeln!(out, "status: completed");
        }
        Termination::Breach(reason) => {
            let _ = writeln!(out, "status: invariant breach ({reason})");
        }
        Termination::Incomplete => {
            let _ = writeln!(out, "status: incomplete");
        }
    }
    let _ = writeln!(out, "samples: {}", inp.record.samples.len());
    if let (Some(first), Some(last)) = (inp.record.samples.first(), inp.record.samples.last()) {
        let _ = writeln!(out, "time range: [{:.6}, {:.6}]", first.t, last.t);
        let _ = writeln!(out, "norm_hs: {:.6e} -> {:.6e}", first.norm_hs, last.norm_hs);
    }
    match inp.fit {
        Some(fit) => {
            let _ = writeln!(
                out,
                "fitted decay rate (L2): {:.8e}  (r^2 = {:.8})",
                fit.rate, fit.r_squared
            );
        }
        None => {
            let _ = writeln!(out, "fitted decay rate (L2): undefined");
        }
    }
    let _ = writeln!(out, "invariant maxima over the run:");
    let rec = inp.record;
    let _ = writeln!(
        out,
        "  mass residual             = {:.6e}",
        rec.max_residual(|s| s.mass_residual)
    );
    let _ = writeln!(
        out,
        "  species-sum residual      = {:.6e}",
        rec.max_residual(|s| s.sum_zero_residual)
    );
    let _ = writeln!(
        out,
        "  equimolar residual        = {:.6e}",
        rec.max_residual(|s| s.equimolar_residual)
    );
    let _ = writeln!(
        out,
        "  incompressibility residual = {:.6e}",
        rec.max_residual(|s| s.incompressibility_residual)
    );
    let _ = writeln!(
        out,
        "  min concentration         = {:.6e}",
        rec.min_concentration()
    );
    let _ = writeln!(
        out,
        "weighted velocity integral (sup over t, at rate lambda_s): {:.6e}{}",
        inp.velocity_integral_sup,
        if inp.velocity_integral_sup.is_finite() {
            ""
        } else {
            "  [NOT FINITE]"
        }
    );
    out.push_str(&render_certificate(inp.certificate));
    out
}

pub fn write_summary(path: &Path, inp: &SummaryInputs<'_>) -> Result<(), CliError> {
    std::fs::write(path, render_summary(inp)).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        source: e,
    })
}
