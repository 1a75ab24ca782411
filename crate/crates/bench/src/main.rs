//! `mtm-bench`: run the mirror-triangles solvers from a config file, write
//! traces, and verify the convergence envelopes on them.
//!
//! Exit status: 0 pass, 1 bound failure or unverifiable bound, 2 config
//! error, 3 runtime error.

mod config;
mod runner;
mod trace_file;
mod verify;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use config::{Config, ConfigError, Experiment};
use runner::Prepared;
use trace_file::Format;
use verify::Outcome;

#[derive(Parser)]
#[command(name = "mtm-bench", version, about = "Run mirror-triangles solvers and verify their bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration for one or more seeds and write trace files.
    Run(RunArgs),
    /// Check trace files (or directories of them) against the theoretical envelopes.
    Verify(VerifyArgs),
    /// Run a configuration for each value of one parameter, then verify each.
    Sweep(SweepArgs),
    /// List solvers, problems, prox setups and direction schemes.
    List(ListArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Single seed, or the first seed when combined with --seeds.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of consecutive seeds.
    #[arg(long)]
    seeds: Option<u64>,
    /// Output directory (default: `run.out` from the config, else `traces`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Trace files or directories containing them.
    #[arg(required = true)]
    paths: Vec<PathBuf>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report format.
    #[arg(long, default_value = "csv")]
    format: String,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// `section.field=v1,v2,...`
    #[arg(long)]
    param: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    seeds: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args)]
struct ListArgs {
    #[arg(long, default_value = "csv")]
    format: String,
}

enum Failure {
    Config(ConfigError),
    Runtime(anyhow::Error),
    Bounds,
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn error_record(code: &str, message: &str) -> String {
    serde_json::json!({ "error": { "code": code, "message": message } }).to_string()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(&a).map(|_| ()),
        Command::Verify(a) => cmd_verify(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::List(a) => cmd_list(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Bounds) => ExitCode::from(1),
        Err(Failure::Config(e)) => {
            eprintln!("{}", error_record(e.code, &e.message));
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("{}", error_record("RUNTIME", &format!("{e:#}")));
            ExitCode::from(3)
        }
    }
}

fn parse_format(flag: Option<&str>, config: &Config) -> Result<Format, ConfigError> {
    let name = flag.or(config.run.format.as_deref()).unwrap_or("csv");
    Format::parse(name).ok_or_else(|| ConfigError::new("CONFIG_UNKNOWN_FORMAT", format!("unknown format `{name}`; known: csv, json")))
}

fn seed_list(seed: Option<u64>, seeds: Option<u64>, config: &Config) -> Result<Vec<u64>, ConfigError> {
    match (seed, seeds) {
        (_, Some(0)) => Err(ConfigError::new("CONFIG_INVALID", "--seeds must be at least 1")),
        (start, Some(n)) => {
            let start = start.unwrap_or(0);
            Ok((start..start + n).collect())
        }
        (Some(s), None) => Ok(vec![s]),
        (None, None) => Ok(config.run.seeds.clone().unwrap_or_else(|| vec![0])),
    }
}

#[derive(Serialize)]
struct RunSummary {
    schema: &'static str,
    solver: String,
    problem: String,
    prox: String,
    steps_planned: usize,
    runs: Vec<RunEntry>,
    final_gap_mean: Option<f64>,
    final_gap_std: Option<f64>,
}

#[derive(Serialize)]
struct RunEntry {
    seed: u64,
    file: String,
    status: String,
    steps: usize,
    final_value: f64,
    final_gap: Option<f64>,
    calls_f: u64,
    calls_g: u64,
    content_hash: String,
}

/// Runs every seed of `config` into `out`; returns the written trace paths.
fn execute(config: &Config, seeds: &[u64], out: &Path, format: Format) -> Result<Vec<PathBuf>, Failure> {
    let experiment = Experiment::resolve(config)?;
    let prepared = Prepared::new(experiment)?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let e = &prepared.experiment;
    let entries: Vec<RunEntry> = seeds
        .par_iter()
        .map(|&seed| -> Result<RunEntry> {
            let trace = prepared.run(seed).with_context(|| format!("seed {seed}"))?;
            let mut header = prepared.header(seed, &trace);
            let rows = runner::rows(&trace);
            let file = format!("{}-{}-seed{seed:04}.{}", e.solver.as_str(), e.problem.name, format.extension());
            trace_file::write(&out.join(&file), &mut header, &rows, format)?;
            let last = trace.last();
            Ok(RunEntry {
                seed,
                file,
                status: trace.status.as_str().into(),
                steps: trace.steps(),
                final_value: last.f_x,
                final_gap: header.f_star.map(|f| last.f_x - f),
                calls_f: last.calls_f,
                calls_g: last.calls_g,
                content_hash: header.content_hash,
            })
        })
        .collect::<Result<_>>()?;
    let gaps: Vec<f64> = entries.iter().filter_map(|r| r.final_gap).collect();
    let (mean, std) = if gaps.is_empty() {
        (None, None)
    } else {
        let n = gaps.len() as f64;
        let mean = gaps.iter().sum::<f64>() / n;
        let std = if gaps.len() > 1 {
            Some((gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
        } else {
            None
        };
        (Some(mean), std)
    };
    let paths = entries.iter().map(|r| out.join(&r.file)).collect();
    let summary = RunSummary {
        schema: "mtm-summary/1",
        solver: e.solver.as_str().into(),
        problem: e.problem.name.to_string(),
        prox: e.prox_id.clone(),
        steps_planned: prepared.steps_planned,
        runs: entries,
        final_gap_mean: mean,
        final_gap_std: std,
    };
    let text = serde_json::to_string_pretty(&summary).context("serializing summary")? + "\n";
    std::fs::write(out.join("summary.json"), text).context("writing summary.json")?;
    Ok(paths)
}

fn cmd_run(a: &RunArgs) -> Result<Vec<PathBuf>, Failure> {
    let config = Config::load(&a.config)?;
    let format = parse_format(a.format.as_deref(), &config)?;
    let seeds = seed_list(a.seed, a.seeds, &config)?;
    let out = a
        .out
        .clone()
        .or_else(|| config.run.out.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("traces"));
    let paths = execute(&config, &seeds, &out, format)?;
    println!("wrote {} trace(s) and summary.json to {}", paths.len(), out.display());
    Ok(paths)
}

fn collect_traces(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut inner: Vec<PathBuf> = std::fs::read_dir(p)
                .with_context(|| format!("listing {}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| {
                    let ext = f.extension().and_then(|e| e.to_str());
                    matches!(ext, Some("csv" | "json")) && f.file_name().is_some_and(|n| n != "summary.json" && n != "report.json")
                })
                .collect();
            inner.sort();
            files.extend(inner);
        } else {
            files.push(p.clone());
        }
    }
    Ok(files)
}

fn verify_paths(paths: &[PathBuf]) -> Result<verify::Report> {
    let files = collect_traces(paths)?;
    if files.is_empty() {
        anyhow::bail!("no trace files found");
    }
    let loaded = files
        .iter()
        .map(|f| Ok((f.display().to_string(), trace_file::read(f)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(verify::verify(&loaded))
}

fn cmd_verify(a: &VerifyArgs) -> Result<(), Failure> {
    let report_format = match a.format.as_str() {
        "csv" | "json" => a.format.as_str(),
        other => {
            return Err(ConfigError::new("CONFIG_UNKNOWN_FORMAT", format!("unknown format `{other}`; known: csv, json")).into())
        }
    };
    let report = verify_paths(&a.paths)?;
    let text = if report_format == "json" {
        serde_json::to_string_pretty(&report).context("serializing report")? + "\n"
    } else {
        report.to_csv()
    };
    match &a.out {
        Some(path) => std::fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    eprintln!(
        "{} pass, {} fail, {} unverifiable, {} info",
        report.count(Outcome::Pass),
        report.count(Outcome::Fail),
        report.count(Outcome::Unverifiable),
        report.count(Outcome::Info)
    );
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Bounds)
    }
}

#[derive(Serialize)]
struct SweepEntry {
    value: String,
    dir: String,
    pass: usize,
    fail: usize,
    unverifiable: usize,
    passed: bool,
}

fn cmd_sweep(a: &SweepArgs) -> Result<(), Failure> {
    let base = Config::load(&a.config)?;
    let (key, values) = a
        .param
        .split_once('=')
        .ok_or_else(|| ConfigError::new("CONFIG_PARSE", "--param must look like section.field=v1,v2"))?;
    let values: Vec<&str> = values.split(',').map(str::trim).filter(|v| !v.is_empty()).collect();
    if values.is_empty() {
        return Err(ConfigError::new("CONFIG_PARSE", "--param lists no values").into());
    }
    let format = parse_format(a.format.as_deref(), &base)?;
    let seeds = seed_list(a.seed, a.seeds, &base)?;
    let out = a.out.clone().unwrap_or_else(|| PathBuf::from("sweep"));
    // validate every point before running any of them
    let configs = values
        .iter()
        .map(|v| {
            let c = base.with_override(key, v)?;
            Prepared::new(Experiment::resolve(&c)?)?;
            Ok((v.to_string(), c))
        })
        .collect::<Result<Vec<_>, ConfigError>>()?;
    let mut entries = Vec::new();
    for (value, config) in configs {
        let dir = out.join(format!("{key}={value}"));
        let paths = execute(&config, &seeds, &dir, format)?;
        let report = verify_paths(&paths)?;
        std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(&report).context("report")? + "\n")
            .context("writing report.json")?;
        println!(
            "{key}={value}: {} pass, {} fail, {} unverifiable",
            report.count(Outcome::Pass),
            report.count(Outcome::Fail),
            report.count(Outcome::Unverifiable)
        );
        entries.push(SweepEntry {
            value,
            dir: dir.display().to_string(),
            pass: report.count(Outcome::Pass),
            fail: report.count(Outcome::Fail),
            unverifiable: report.count(Outcome::Unverifiable),
            passed: report.passed(),
        });
    }
    let all = entries.iter().all(|e| e.passed);
    let summary = serde_json::json!({ "schema": "mtm-sweep/1", "param": key, "points": entries });
    std::fs::write(out.join("sweep.json"), serde_json::to_string_pretty(&summary).context("sweep")? + "\n")
        .context("writing sweep.json")?;
    if all {
        Ok(())
    } else {
        Err(Failure::Bounds)
    }
}

#[derive(Serialize)]
struct ProblemInfo {
    id: String,
    dim: usize,
    components: usize,
    lipschitz: f64,
    feasible: &'static str,
    prox: &'static str,
    f_star: Option<f64>,
}

fn cmd_list(a: &ListArgs) -> Result<(), Failure> {
    let problems: Vec<ProblemInfo> = mirror_triangles::problems::suite()
        .into_iter()
        .map(|p| ProblemInfo {
            id: p.name.clone(),
            dim: p.dim(),
            components: p.count(),
            lipschitz: p.lipschitz,
            feasible: p.feasible.name(),
            prox: p.prox.name(),
            f_star: p.optimum.as_ref().map(|o| o.value),
        })
        .collect();
    if a.format == "json" {
        let v = serde_json::json!({
            "solvers": config::SOLVERS,
            "problems": problems,
            "prox": config::PROXES,
            "perturbations": config::PERTURBATIONS,
            "schemes": config::SCHEMES,
            "inexact_modes": config::MODES,
        });
        println!("{}", serde_json::to_string_pretty(&v).context("list")?);
        return Ok(());
    }
    println!("solvers: {}", config::SOLVERS.join(", "));
    println!("prox: {}", config::PROXES.join(", "));
    println!("perturbations: {}", config::PERTURBATIONS.join(", "));
    println!("schemes: {}", config::SCHEMES.join(", "));
    println!("inexact modes: {}", config::MODES.join(", "));
    println!("problem,dim,components,L,feasible,default_prox,f_star");
    for p in problems {
        println!(
            "{},{},{},{:?},{},{},{}",
            p.id,
            p.dim,
            p.components,
            p.lipschitz,
            p.feasible,
            p.prox,
            p.f_star.map(|f| format!("{f:?}")).unwrap_or_default()
        );
    }
    Ok(())
}
