//! Command-line front end for the `vmdp` solver.
//!
//! Exit codes: 0 on success, 1 when the input violates a model constraint
//! or a check fails, 2 on I/O and parse errors.

pub mod bench;
pub mod io;
pub mod report;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;
use vmdp::design::{build_design_model, generate_random_instance};
use vmdp::dynamics::{evaluate_policy, regularity_report};
use vmdp::pareto::{
    brute_force_oracle, enumerate_efficient, recover_weights, EnumerationOptions, ORACLE_LIMIT,
};
use vmdp::vlp::{build_program, MAX_REGULAR_BASES};

use crate::bench::{parse_groups, run_group, BenchGroup};
use crate::report::OracleComparison;

#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable or malformed input, or a failed write.
    #[error("{0}")]
    Input(String),
    /// Well-formed input that the solver rejects.
    #[error("{0}")]
    Domain(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Domain(_) => 1,
        }
    }
}

impl From<vmdp::Error> for CliError {
    fn from(e: vmdp::Error) -> Self {
        CliError::Domain(e.to_string())
    }
}

fn io_err(e: std::io::Error) -> CliError {
    CliError::Input(format!("write failed: {e}"))
}

fn json_err(e: serde_json::Error) -> CliError {
    CliError::Input(format!("serialization failed: {e}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Markdown,
}

fn positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{s} is not a positive number"))
    }
}

fn probability_pair(s: &str) -> Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(format!("expected two comma separated numbers, got '{s}'"));
    }
    let a: f64 = parts[0].trim().parse().map_err(|e| format!("{e}"))?;
    let b: f64 = parts[1].trim().parse().map_err(|e| format!("{e}"))?;
    Ok([a, b])
}

#[derive(Debug, Parser)]
#[command(
    name = "vmdp",
    version,
    about = "Efficient deterministic policies of finite-horizon multi-objective MDPs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a model file; exit 1 lists the violations.
    Validate { model: PathBuf },
    /// Dimensions, regularity and the number of deterministic policies.
    Info {
        model: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Markdown)]
        format: Format,
    },
    /// List all efficient deterministic policies.
    Enumerate {
        model: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Markdown)]
        format: Format,
        /// Attach scalarization weights to every policy.
        #[arg(long)]
        weights: bool,
        /// Cross-check against exhaustive enumeration.
        #[arg(long)]
        oracle: bool,
        /// Allow more than 10^7 deterministic policies.
        #[arg(long)]
        force: bool,
        /// Per-coordinate tolerance of the oracle comparison.
        #[arg(long, default_value_t = 1e-6, value_parser = positive)]
        tol: f64,
    },
    /// Value of a policy file under a model.
    Evaluate {
        model: PathBuf,
        policy: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Markdown)]
        format: Format,
    },
    /// Build the two-component design model from a CSV of alternatives.
    Design {
        csv: PathBuf,
        /// Initial distribution over the two states, e.g. `0.5,0.5`.
        #[arg(long, value_parser = probability_pair)]
        alpha: Option<[f64; 2]>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Sample a random design instance as CSV.
    Generate {
        #[arg(long)]
        k1: usize,
        #[arg(long)]
        k2: usize,
        #[arg(long, default_value_t = 0.7)]
        rho: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Count efficient policies over groups of random design instances.
    Bench {
        /// Comma separated `K1xK2` groups.
        #[arg(long, default_value = "5x5,25x25,100x100")]
        groups: String,
        #[arg(long, default_value_t = 0.7)]
        rho: f64,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Format::Markdown)]
        format: Format,
    },
    /// Write A, b and C in MatrixMarket format.
    Export {
        model: PathBuf,
        #[arg(long)]
        dir: PathBuf,
    },
}

#[derive(Debug, Serialize)]
struct Info {
    states: usize,
    horizon: usize,
    objectives: usize,
    actions_per_state: Vec<usize>,
    total_actions: usize,
    rows: usize,
    columns: usize,
    nonzeros: usize,
    deterministic_policies: Option<u128>,
    regularity: vmdp::dynamics::RegularityReport,
}

#[derive(Debug, Serialize)]
struct EnumerationReport<'a> {
    result: &'a vmdp::pareto::EnumerationResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle: Option<&'a OracleComparison>,
}

/// Runs one command, writing reports to `out`.
pub fn run<W: Write>(cli: Cli, out: &mut W) -> Result<(), CliError> {
    match cli.command {
        Command::Validate { model } => validate(&model, out),
        Command::Info { model, format } => info(&model, format, out),
        Command::Enumerate {
            model,
            format,
            weights,
            oracle,
            force,
            tol,
        } => enumerate(&model, format, weights, oracle, force, tol, out),
        Command::Evaluate {
            model,
            policy,
            format,
        } => evaluate(&model, &policy, format, out),
        Command::Design { csv, alpha, output } => {
            let file =
                File::open(&csv).map_err(|e| CliError::Input(format!("{}: {e}", csv.display())))?;
            let design = io::read_design_csv(file)?;
            let model = build_design_model(&design, alpha)?;
            let text = serde_json::to_string_pretty(&model).map_err(json_err)?;
            emit(output.as_deref(), out, |w| {
                writeln!(w, "{text}").map_err(io_err)
            })
        }
        Command::Generate {
            k1,
            k2,
            rho,
            seed,
            output,
        } => {
            let design = generate_random_instance(k1, k2, rho, seed)?;
            emit(output.as_deref(), out, |w| io::write_design_csv(&design, w))
        }
        Command::Bench {
            groups,
            rho,
            count,
            seed,
            format,
        } => {
            if count == 0 {
                return Err(CliError::Input("--count must be positive".into()));
            }
            let results = parse_groups(&groups)?
                .into_iter()
                .map(|(k1, k2)| {
                    run_group(&BenchGroup {
                        k1,
                        k2,
                        rho,
                        count,
                        seed,
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            match format {
                Format::Markdown => report::bench_markdown(&results, out),
                Format::Csv => report::bench_csv(&results, out),
                Format::Json => {
                    let text = serde_json::to_string_pretty(&results).map_err(json_err)?;
                    writeln!(out, "{text}").map_err(io_err)
                }
            }
        }
        Command::Export { model, dir } => {
            let model = io::load_model(&model)?;
            let cp = build_program(&model)?;
            std::fs::create_dir_all(&dir)
                .map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?;
            cp.export_matrix_market(&dir)
                .map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?;
            writeln!(out, "wrote A.mtx, b.mtx, C.mtx to {}", dir.display()).map_err(io_err)
        }
    }
}

fn emit<W: Write>(
    path: Option<&Path>,
    out: &mut W,
    body: impl FnOnce(&mut dyn Write) -> Result<(), CliError>,
) -> Result<(), CliError> {
    match path {
        Some(p) => {
            let file =
                File::create(p).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?;
            let mut w = BufWriter::new(file);
            body(&mut w)?;
            w.flush().map_err(io_err)
        }
        None => body(out),
    }
}

fn validate<W: Write>(path: &Path, out: &mut W) -> Result<(), CliError> {
    let model = io::parse_model(path)?;
    let report = model.validate();
    if report.is_ok() {
        writeln!(out, "valid").map_err(io_err)
    } else {
        Err(CliError::Domain(format!(
            "{} violation(s):\n  {}",
            report.violations.len(),
            report.violations.join("\n  ")
        )))
    }
}

fn info<W: Write>(path: &Path, format: Format, out: &mut W) -> Result<(), CliError> {
    let model = io::load_model(path)?;
    let cp = build_program(&model)?;
    let info = Info {
        states: model.num_states,
        horizon: model.horizon,
        objectives: model.num_objectives,
        actions_per_state: model.actions_per_state.clone(),
        total_actions: model.total_actions(),
        rows: cp.rows(),
        columns: cp.cols(),
        nonzeros: cp.nnz(),
        deterministic_policies: model.deterministic_policy_count(),
        regularity: regularity_report(&model),
    };
    if format == Format::Json {
        let text = serde_json::to_string_pretty(&info).map_err(json_err)?;
        return writeln!(out, "{text}").map_err(io_err);
    }
    let policies = info
        .deterministic_policies
        .map_or_else(|| "overflow".to_string(), |c| c.to_string());
    let lines = [
        format!("S: {}", info.states),
        format!("T: {}", info.horizon),
        format!("k: {}", info.objectives),
        format!("actions per state: {:?}", info.actions_per_state),
        format!("K: {}", info.total_actions),
        format!("m: {}", info.rows),
        format!("n: {}", info.columns),
        format!("nnz: {}", info.nonzeros),
        format!("deterministic policies: {policies}"),
        format!("regular: {}", info.regularity.regular),
    ];
    for line in lines {
        writeln!(out, "{line}").map_err(io_err)?;
    }
    if let Some(w) = &info.regularity.some_policy_witness {
        let actions: Vec<String> = w.actions.iter().map(|a| (a + 1).to_string()).collect();
        writeln!(
            out,
            "unreachable under some policy: state {} at epoch {} (predecessor actions {})",
            w.state + 1,
            w.epoch + 1,
            actions.join(", ")
        )
        .map_err(io_err)?;
    }
    if let Some(w) = &info.regularity.all_policy_witness {
        writeln!(
            out,
            "unreachable under every policy: state {} at epoch {}",
            w.state + 1,
            w.epoch + 1
        )
        .map_err(io_err)?;
    }
    Ok(())
}

fn enumerate<W: Write>(
    path: &Path,
    format: Format,
    weights: bool,
    oracle: bool,
    force: bool,
    tol: f64,
    out: &mut W,
) -> Result<(), CliError> {
    let model = io::load_model(path)?;
    let count = model.deterministic_policy_count();
    if !force && count.is_none_or(|c| c > MAX_REGULAR_BASES) {
        return Err(vmdp::Error::TooManyPolicies {
            count: count.unwrap_or(u128::MAX),
            limit: MAX_REGULAR_BASES,
        }
        .into());
    }
    if oracle && count.is_none_or(|c| c > ORACLE_LIMIT) {
        return Err(vmdp::Error::TooManyPolicies {
            count: count.unwrap_or(u128::MAX),
            limit: ORACLE_LIMIT,
        }
        .into());
    }

    let cp = build_program(&model)?;
    let mut result = enumerate_efficient(&cp, &EnumerationOptions { parallel: false })?;
    if weights {
        for v in result.vertices.iter_mut() {
            v.weights = Some(recover_weights(&cp, v)?);
        }
    }
    let comparison = if oracle {
        Some(OracleComparison::new(
            &result,
            &brute_force_oracle(&model)?,
            tol,
        ))
    } else {
        None
    };

    match format {
        Format::Markdown => report::enumeration_markdown(&result, comparison.as_ref(), out)?,
        Format::Csv => {
            report::enumeration_csv(&result, out)?;
            if let Some(c) = &comparison {
                writeln!(out, "# {}", c.line()).map_err(io_err)?;
            }
        }
        Format::Json => {
            let report = EnumerationReport {
                result: &result,
                oracle: comparison.as_ref(),
            };
            let text = serde_json::to_string_pretty(&report).map_err(json_err)?;
            writeln!(out, "{text}").map_err(io_err)?;
        }
    }
    match comparison {
        Some(c) if !c.matched => Err(CliError::Domain(c.line())),
        _ => Ok(()),
    }
}

fn evaluate<W: Write>(
    model: &Path,
    policy: &Path,
    format: Format,
    out: &mut W,
) -> Result<(), CliError> {
    let model = io::load_model(model)?;
    let policy = io::load_policy(policy, &model)?;
    let value = evaluate_policy(&model, &policy)?;
    match format {
        Format::Json => {
            let text = serde_json::to_string_pretty(&value).map_err(json_err)?;
            writeln!(out, "{text}").map_err(io_err)
        }
        Format::Csv => {
            let mut csv = csv::Writer::from_writer(out);
            let mut header = vec!["start".to_string()];
            header.extend((1..=model.num_objectives).map(|i| format!("value_{i}")));
            csv.write_record(&header)
                .map_err(|e| CliError::Input(e.to_string()))?;
            let rows = value
                .per_state
                .iter()
                .enumerate()
                .map(|(s, v)| ((s + 1).to_string(), v))
                .chain(std::iter::once(("alpha".to_string(), &value.aggregate)));
            for (label, v) in rows {
                let mut row = vec![label];
                row.extend(v.iter().map(|x| format!("{x:.6}")));
                csv.write_record(&row)
                    .map_err(|e| CliError::Input(e.to_string()))?;
            }
            csv.flush().map_err(io_err)
        }
        Format::Markdown => {
            let header: Vec<String> = (1..=model.num_objectives)
                .map(|i| format!("v_{i}"))
                .collect();
            writeln!(out, "| start | {} |", header.join(" | ")).map_err(io_err)?;
            writeln!(out, "|{}", "---|".repeat(header.len() + 1)).map_err(io_err)?;
            for (s, v) in value.per_state.iter().enumerate() {
                let cells: Vec<String> = v.iter().map(|x| format!("{x:.4}")).collect();
                writeln!(out, "| {} | {} |", s + 1, cells.join(" | ")).map_err(io_err)?;
            }
            let cells: Vec<String> = value.aggregate.iter().map(|x| format!("{x:.4}")).collect();
            writeln!(out, "| alpha | {} |", cells.join(" | ")).map_err(io_err)
        }
    }
}
