use std::io::Write;

use colombeau::association::{AssociationReport, Verdict};
use serde::Serialize;

use crate::config::{Format, RunConfig};
use crate::{open_out, CliError};

/// One (case, ψ) result ready for rendering.
#[derive(Debug, Serialize)]
pub struct Record {
    pub case: String,
    /// Expression text.
    pub variant: String,
    pub psi: String,
    /// `None` when there is nothing to check against.
    pub pass: Option<bool>,
    pub report: AssociationReport,
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    case: &'a str,
    psi: &'a str,
    verdict: &'static str,
    limit_re: Option<f64>,
    limit_im: Option<f64>,
    limit_err: Option<f64>,
    leading: Option<&'static str>,
    leading_re: Option<f64>,
    leading_im: Option<f64>,
    target: Option<&'a str>,
    target_re: Option<f64>,
    target_im: Option<f64>,
    rel_dev: Option<f64>,
    pass: Option<bool>,
}

#[derive(Serialize)]
struct TableRow<'a> {
    case: &'a str,
    psi: &'a str,
    sigma: f64,
    re: f64,
    im: f64,
    quad_err: f64,
}

fn verdict_name(v: &Verdict) -> &'static str {
    match v {
        Verdict::Associated { .. } => "associated",
        Verdict::Divergent { .. } => "divergent",
        Verdict::Inconclusive { .. } => "inconclusive",
    }
}

fn summary(r: &Record) -> SummaryRow<'_> {
    let (limit, limit_err) = match r.report.verdict {
        Verdict::Associated { limit, error } => (Some(limit), Some(error)),
        _ => (None, None),
    };
    let leading = match r.report.verdict {
        Verdict::Divergent { leading, coeff } => Some((leading.name(), coeff)),
        _ => None,
    };
    let t = r.report.target.as_ref();
    SummaryRow {
        case: &r.case,
        psi: &r.psi,
        verdict: verdict_name(&r.report.verdict),
        limit_re: limit.map(|l| l.re),
        limit_im: limit.map(|l| l.im),
        limit_err,
        leading: leading.map(|l| l.0),
        leading_re: leading.map(|l| l.1.re),
        leading_im: leading.map(|l| l.1.im),
        target: t.map(|t| t.expression.as_str()),
        target_re: t.map(|t| t.value.re),
        target_im: t.map(|t| t.value.im),
        rel_dev: t.map(|t| t.rel).filter(|d| d.is_finite()),
        pass: r.pass,
    }
}

pub fn write_reports(cfg: &RunConfig, records: &[Record]) -> Result<(), CliError> {
    let mut w = open_out(cfg)?;
    match cfg.format {
        Format::Csv => {
            let mut c = csv::Writer::from_writer(&mut w);
            for r in records {
                c.serialize(summary(r)).map_err(csv_err)?;
            }
            c.flush()?;
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut w, records).map_err(|e| CliError::Io(e.into()))?;
            writeln!(w)?;
        }
        Format::Pretty => {
            for r in records {
                writeln!(w, "{:<14} {:<5} {}", r.case, r.psi, r.variant)?;
                if let Some(t) = &r.report.target {
                    writeln!(
                        w,
                        "    target    {} = {:.10} {:+.10}i",
                        t.expression, t.value.re, t.value.im
                    )?;
                }
                writeln!(w, "    verdict   {}", r.report.verdict)?;
                if let Some(t) = r.report.target.as_ref().filter(|t| t.rel.is_finite()) {
                    writeln!(w, "    deviation {:.2e} (relative)", t.rel)?;
                }
                if let Some(p) = r.pass {
                    writeln!(w, "    {}", if p { "PASS" } else { "FAIL" })?;
                }
            }
            let checked: Vec<bool> = records.iter().filter_map(|r| r.pass).collect();
            if !checked.is_empty() {
                let ok = checked.iter().filter(|p| **p).count();
                writeln!(w, "{ok}/{} passed", checked.len())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_table(cfg: &RunConfig, records: &[Record]) -> Result<(), CliError> {
    let rows = records.iter().flat_map(|r| {
        r.report.values.iter().map(move |p| TableRow {
            case: &r.case,
            psi: &r.psi,
            sigma: p.sigma,
            re: p.value.re,
            im: p.value.im,
            quad_err: p.error,
        })
    });
    let mut w = open_out(cfg)?;
    match cfg.format {
        Format::Csv => {
            let mut c = csv::Writer::from_writer(&mut w);
            for row in rows {
                c.serialize(row).map_err(csv_err)?;
            }
            c.flush()?;
        }
        Format::Json => {
            let rows: Vec<TableRow> = rows.collect();
            serde_json::to_writer_pretty(&mut w, &rows).map_err(|e| CliError::Io(e.into()))?;
            writeln!(w)?;
        }
        Format::Pretty => {
            writeln!(
                w,
                "{:<14} {:<5} {:>14} {:>24} {:>24} {:>10}",
                "case", "psi", "sigma", "re", "im", "quad_err"
            )?;
            for r in rows {
                writeln!(
                    w,
                    "{:<14} {:<5} {:>14.8e} {:>24.16e} {:>24.16e} {:>10.2e}",
                    r.case, r.psi, r.sigma, r.re, r.im, r.quad_err
                )?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Io(std::io::Error::other(e))
}
