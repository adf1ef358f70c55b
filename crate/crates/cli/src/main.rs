mod config;
mod output;

use std::io::Write;
use std::process::ExitCode;
use std::sync::Mutex;

use clap::{Parser, Subcommand};
use colombeau::association::{
    catalog, evaluate, find_case, verify_case, AssociationReport, Case, Expectation, VariantReport,
    Verdict, EMBED_ID,
};
use colombeau::expr::{compile, parse, to_reference};
use thiserror::Error;

use config::{Overrides, RunConfig};
use output::Record;

/// Sweeps model representatives of singular products over σ and reports
/// their association limits.
#[derive(Parser, Debug)]
#[command(name = "colombeau", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check catalog cases against their targets
    Verify {
        /// Case ids, or `all`
        #[arg(default_value = "all")]
        cases: Vec<String>,
    },
    /// Sweep and fit an expression such as "Xm^-2 * H - LnP * D'"
    Eval {
        expr: String,
        /// Reference distribution to compare with, e.g. "-D"
        #[arg(long)]
        target: Option<String>,
    },
    /// Raw pairing table over cases, test functions and σ
    Table {
        /// Case ids, or `all`
        #[arg(default_value = "all")]
        cases: Vec<String>,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Numerical(String),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numerical(_) | CliError::Io(_) => 1,
        }
    }
}

fn main() -> ExitCode {
    // reserved: nothing in the computation is random
    let _ = std::env::var_os("COLOMBEAU_SEED");
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<u8, CliError> {
    let cfg = RunConfig::resolve(cli.overrides)?;
    match cli.command {
        Command::Verify { cases } => {
            let cases = select(&cases)?;
            let (records, failure) = run_cases(&cases, &cfg);
            let all_pass = records.iter().all(|r| r.pass.unwrap_or(true));
            output::write_reports(&cfg, &records)?;
            finish(failure, u8::from(!all_pass))
        }
        Command::Eval { expr, target } => {
            let ast =
                parse(&expr).map_err(|e| CliError::Usage(format!("cannot parse `{expr}`: {e}")))?;
            compile(&ast, &cfg.mollifier).map_err(|e| CliError::Usage(format!("`{expr}`: {e}")))?;
            if let Some(t) = &target {
                let tast = parse(t)
                    .map_err(|e| CliError::Usage(format!("cannot parse target `{t}`: {e}")))?;
                to_reference(&tast).map_err(|e| CliError::Usage(format!("target `{t}`: {e}")))?;
            }
            let reports = evaluate(
                &expr,
                target.as_deref(),
                &cfg.mollifier,
                &cfg.psis,
                &cfg.plan,
            )
            .map_err(|e| CliError::Numerical(e.to_string()))?;
            let printed = ast.print();
            let records: Vec<Record> = reports
                .into_iter()
                .zip(&cfg.psis)
                .map(|(report, psi)| Record {
                    case: "eval".into(),
                    variant: printed.clone(),
                    psi: psi.name().to_string(),
                    pass: None,
                    report,
                })
                .collect();
            output::write_reports(&cfg, &records)?;
            Ok(0)
        }
        Command::Table { cases } => {
            let cases = select(&cases)?;
            let (records, failure) = run_cases(&cases, &cfg);
            output::write_table(&cfg, &records)?;
            finish(failure, 0)
        }
    }
}

fn finish(failure: Option<String>, code: u8) -> Result<u8, CliError> {
    match failure {
        Some(msg) => Err(CliError::Numerical(msg)),
        None => Ok(code),
    }
}

fn select(ids: &[String]) -> Result<Vec<Case>, CliError> {
    if ids.iter().any(|i| i.eq_ignore_ascii_case("all")) {
        return Ok(catalog());
    }
    ids.iter()
        .map(|id| find_case(id).map_err(|e| CliError::Usage(e.to_string())))
        .collect()
}

/// Runs every case on a bounded pool and returns the records in catalog
/// order, with the first failure message if any case could not be computed.
fn run_cases(cases: &[Case], cfg: &RunConfig) -> (Vec<Record>, Option<String>) {
    let results = pool_map(cases, |case| {
        verify_case(case.id, &cfg.mollifier, &cfg.psis, &cfg.plan)
    });
    let mut records = Vec::new();
    let mut failure = None;
    for (case, result) in cases.iter().zip(results) {
        match result {
            Ok(variants) => records.extend(case_records(case, variants, cfg)),
            Err(e) => {
                failure.get_or_insert_with(|| format!("case {}: {e}", case.id));
            }
        }
    }
    (records, failure)
}

fn pool_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(items.len())
        .max(1);
    let next = Mutex::new(0usize);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new(items.iter().map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = {
                    let mut n = next.lock().expect("job counter");
                    let i = *n;
                    *n += 1;
                    i
                };
                let Some(item) = items.get(i) else { break };
                let r = f(item);
                slots.lock().expect("result slots")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("result slots")
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect()
}

fn case_records(case: &Case, variants: Vec<VariantReport>, cfg: &RunConfig) -> Vec<Record> {
    let multi = variants.len() > 1;
    let passes: Vec<bool> = match case.expect {
        Expectation::Associated => Vec::new(),
        Expectation::Divergent => {
            // per ψ: some variant diverges, or the constants disagree
            (0..cfg.psis.len())
                .map(|k| {
                    let vs: Vec<&Verdict> =
                        variants.iter().map(|v| &v.reports[k].verdict).collect();
                    vs.iter().any(|v| v.is_divergent())
                        || vs.windows(2).any(|w| match (w[0].limit(), w[1].limit()) {
                            (Some(a), Some(b)) => {
                                (a - b).norm() > 10.0 * case.tol * a.norm().max(b.norm())
                            }
                            _ => false,
                        })
                })
                .collect()
        }
    };
    let mut out = Vec::new();
    for v in variants {
        for (k, (report, psi)) in v.reports.into_iter().zip(&cfg.psis).enumerate() {
            let pass = match case.expect {
                Expectation::Associated => associated_pass(&report, case.tol),
                Expectation::Divergent => passes[k],
            };
            out.push(Record {
                case: if multi || case.id == EMBED_ID {
                    format!("{}/{}", case.id, v.variant)
                } else {
                    case.id.to_string()
                },
                variant: v.expr.to_string(),
                psi: psi.name().to_string(),
                pass: Some(pass),
                report,
            });
        }
    }
    out
}

fn associated_pass(r: &AssociationReport, tol: f64) -> bool {
    r.verdict.limit().is_some() && r.target.as_ref().is_some_and(|t| t.rel <= tol)
}

pub(crate) fn open_out(cfg: &RunConfig) -> Result<Box<dyn Write>, CliError> {
    Ok(match &cfg.out {
        Some(p) => Box::new(std::io::BufWriter::new(std::fs::File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    })
}
