//! Run configuration: defaults, then the config file, then flags.
//!
//! The config file is flat `key = value` text with two sections:
//!
//! ```text
//! [run]
//! psi = A
//! psi = 1, 0, -2 @ 5
//! sigma_max = 0.0625
//! sigma_min = 0.000244140625
//! grid_ratio = 0.5
//! tol = 1e-11
//! precision = double
//! format = csv
//!
//! [mollifier]
//! # center halfwidth amplitude, one bump per line
//! f = 0 1 1
//! g = -6 1 -1
//! g = -3 1 1
//! g = 3 1 1
//! g = 6 1 -1
//! ```
//!
//! `f` is normalised to unit mass; `g` must integrate to zero.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use colombeau::association::{Precision, SweepPlan};
use colombeau::mollifier::{BumpKernel, ModelMollifier, Mollifier};
use colombeau::testfn::{self, TestFunction};
use ini::Ini;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Pretty,
}

/// Settings shared by every subcommand, each optional so that the file and
/// the flags can be layered.
#[derive(Clone, Debug, Default, clap::Args)]
pub struct Overrides {
    /// Test function: catalog name (A, B, C) or coefficients `c0,c1,...[@radius]`; repeatable
    #[arg(long, global = true)]
    pub psi: Vec<String>,
    #[arg(long, global = true)]
    pub sigma_min: Option<f64>,
    #[arg(long, global = true)]
    pub sigma_max: Option<f64>,
    #[arg(long, global = true)]
    pub grid_ratio: Option<f64>,
    /// Pairing tolerance, relative to the L1 norm of each integrand
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[arg(long, global = true, value_parser = parse_precision)]
    pub precision: Option<Precision>,
    /// Write output here instead of stdout
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Config file with [run] and [mollifier] sections
    #[arg(long, global = true, value_name = "FILE")]
    pub mollifier: Option<PathBuf>,
}

fn parse_precision(s: &str) -> Result<Precision, String> {
    match s.to_ascii_lowercase().as_str() {
        "double" => Ok(Precision::Double),
        "extended" => Ok(Precision::Extended),
        _ => Err(format!("unknown precision `{s}` (double|extended)")),
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub mollifier: Mollifier,
    pub psis: Vec<TestFunction>,
    pub plan: SweepPlan,
    pub format: Format,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn resolve(flags: Overrides) -> Result<Self, CliError> {
        let mut merged = match &flags.mollifier {
            Some(path) => read_file(path)?,
            None => FileConfig::default(),
        };
        let o = &mut merged.run;
        if !flags.psi.is_empty() {
            o.psi = flags.psi;
        }
        o.sigma_min = flags.sigma_min.or(o.sigma_min);
        o.sigma_max = flags.sigma_max.or(o.sigma_max);
        o.grid_ratio = flags.grid_ratio.or(o.grid_ratio);
        o.tol = flags.tol.or(o.tol);
        o.format = flags.format.or(o.format);
        o.precision = flags.precision.or(o.precision);
        o.out = flags.out.or(o.out.take());

        let psis = if o.psi.is_empty() {
            testfn::catalog()
        } else {
            o.psi
                .iter()
                .map(|p| testfn::by_name(p))
                .collect::<Result<_, _>>()
                .map_err(usage)?
        };
        let default = SweepPlan::default();
        let mut plan = SweepPlan::geometric(
            o.sigma_max.unwrap_or(default.sigma_grid[0]),
            o.sigma_min
                .unwrap_or(*default.sigma_grid.last().expect("non-empty grid")),
            o.grid_ratio.unwrap_or(0.5),
        )
        .map_err(usage)?
        .with_precision(o.precision.unwrap_or_default());
        if let Some(t) = o.tol {
            plan = plan.with_tol(t);
        }
        plan.validate().map_err(usage)?;
        Ok(RunConfig {
            mollifier: merged.mollifier.unwrap_or_default(),
            psis,
            plan,
            format: o.format.unwrap_or(Format::Pretty),
            out: o.out.take(),
        })
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

#[derive(Default)]
struct FileConfig {
    run: Overrides,
    mollifier: Option<Mollifier>,
}

fn read_file(path: &Path) -> Result<FileConfig, CliError> {
    let ini = Ini::load_from_file(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let mut cfg = FileConfig::default();
    let bad = |what: String| usage(format!("{}: {what}", path.display()));
    for (section, props) in ini.iter() {
        match section {
            None if props.is_empty() => {}
            Some("run") => {
                for (k, v) in props.iter() {
                    let r = &mut cfg.run;
                    match k {
                        "psi" => r.psi.push(v.to_string()),
                        "sigma_min" => r.sigma_min = Some(num(k, v).map_err(bad)?),
                        "sigma_max" => r.sigma_max = Some(num(k, v).map_err(bad)?),
                        "grid_ratio" => r.grid_ratio = Some(num(k, v).map_err(bad)?),
                        "tol" => r.tol = Some(num(k, v).map_err(bad)?),
                        "precision" => r.precision = Some(parse_precision(v).map_err(bad)?),
                        "format" => {
                            r.format = Some(
                                <Format as clap::ValueEnum>::from_str(v, true)
                                    .map_err(|_| bad(format!("unknown format `{v}`")))?,
                            )
                        }
                        "out" => r.out = Some(PathBuf::from(v)),
                        _ => return Err(bad(format!("unknown key `{k}` in [run]"))),
                    }
                }
            }
            Some("mollifier") => {
                let (mut f, mut g) = (Vec::new(), Vec::new());
                for (k, v) in props.iter() {
                    let b = bump(v).map_err(|e| bad(format!("`{k} = {v}`: {e}")))?;
                    match k {
                        "f" => f.push(b),
                        "g" => g.push(b),
                        _ => return Err(bad(format!("unknown key `{k}` in [mollifier]"))),
                    }
                }
                let m = ModelMollifier::build(f, g).map_err(|e| bad(e.to_string()))?;
                cfg.mollifier = Some(m.into());
            }
            Some(other) => return Err(bad(format!("unknown section [{other}]"))),
            None => return Err(bad("keys outside a section".into())),
        }
    }
    Ok(cfg)
}

fn num<T: FromStr>(k: &str, v: &str) -> Result<T, String> {
    v.trim()
        .parse()
        .map_err(|_| format!("bad value for `{k}`: `{v}`"))
}

fn bump(v: &str) -> Result<BumpKernel, String> {
    let xs: Vec<f64> = v
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| format!("not a number: `{s}`")))
        .collect::<Result<_, _>>()?;
    let [center, halfwidth, amplitude] = xs[..] else {
        return Err(format!(
            "expected center, halfwidth, amplitude; got {} values",
            xs.len()
        ));
    };
    BumpKernel::new(center, halfwidth, amplitude).map_err(|e| e.to_string())
}
