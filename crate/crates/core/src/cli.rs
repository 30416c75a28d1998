//! Command-line front end: `explain`, `benchmark`, `verify` and `gen-game`.
//!
//! Every command echoes its resolved configuration to stderr before doing any
//! work. Results go to stdout or to the declared output paths. Exit codes: 0
//! success, 2 configuration error, 3 I/O or parse error, 4 property failure.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::error::Error;
use crate::estimators::{permutation_baseline, polyshap, AttributionResult, Estimator};
use crate::evaluation::{run_benchmark, BenchmarkConfig};
use crate::frontier::FrontierSpec;
use crate::games::{FileGame, Game, MobiusGame};
use crate::sampling::SamplerConfig;
use crate::verify::{run_suite, Suite};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_PROPERTY: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "polyshap", version, about = "Shapley value estimation with interaction-aware regression")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate Shapley values for one game file.
    Explain(ExplainArgs),
    /// Run a benchmark sweep from a TOML config.
    Benchmark(BenchmarkArgs),
    /// Run a numerical property suite.
    Verify(VerifyArgs),
    /// Write a random Möbius game file.
    GenGame(GenGameArgs),
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    /// Game file (`.mobius` for Möbius coefficients, anything else for a value table).
    #[arg(long)]
    pub game: PathBuf,
    #[arg(long, default_value = "polyshap", value_parser = parse_estimator)]
    pub method: Estimator,
    /// Interaction order k of a k-additive frontier.
    #[arg(long, conflicts_with = "frontier")]
    pub order: Option<usize>,
    /// Frontier: `k`, `k@percent`, `log` or `partial:ell`.
    #[arg(long, value_parser = parse_frontier)]
    pub frontier: Option<FrontierSpec>,
    #[arg(long)]
    pub budget: usize,
    #[arg(long)]
    pub paired: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the JSON result here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Aggregated CSV. Per-instance rows and plot data go next to it as
    /// `<stem>.instances.csv` and `<stem>.plot.json`.
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads; overrides the config.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Suite name, or `all`.
    #[arg(long, default_value = "all")]
    pub suite: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct GenGameArgs {
    #[arg(long = "players", short = 'd')]
    pub players: usize,
    #[arg(long)]
    pub max_order: usize,
    #[arg(long)]
    pub n_terms: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_estimator(s: &str) -> Result<Estimator, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_frontier(s: &str) -> Result<FrontierSpec, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Process exit code for a library error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) | Error::Parse { .. } | Error::LookupMiss(_) | Error::NonFinite(_) => EXIT_IO,
        _ => EXIT_CONFIG,
    }
}

fn error_kind(err: &Error) -> &'static str {
    match err {
        Error::InvalidDimension(_) => "invalid_dimension",
        Error::InvalidArgument(_) => "invalid_argument",
        Error::DimensionMismatch { .. } => "dimension_mismatch",
        Error::LookupMiss(_) => "lookup_miss",
        Error::Parse { .. } => "parse",
        Error::Budget { .. } => "budget",
        Error::NonFinite(_) => "non_finite",
        Error::TooLarge { .. } => "too_large",
        Error::NotSizeSymmetric { .. } => "not_size_symmetric",
        Error::Io(_) => "io",
    }
}

fn report_error(err: &Error, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let code = exit_code(err);
    let _ = writeln!(stderr, "error: {err}");
    let body = json!({ "error": { "kind": error_kind(err), "message": err.to_string(), "exit_code": code } });
    let _ = writeln!(stdout, "{body}");
    code
}

fn echo_config(stderr: &mut dyn Write, value: serde_json::Value) {
    let _ = writeln!(stderr, "resolved config: {value}");
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let outcome = match cli.command {
        Command::Explain(a) => explain(&a, stdout, stderr),
        Command::Benchmark(a) => benchmark(&a, stdout, stderr),
        Command::Verify(a) => verify(&a, stdout, stderr),
        Command::GenGame(a) => gen_game(&a, stdout, stderr),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => report_error(&e, stdout, stderr),
    }
}

fn explain(a: &ExplainArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32, Error> {
    let game = FileGame::load(&a.game)?;
    let d = game.num_players();
    let has_frontier = a.order.is_some() || a.frontier.is_some();
    let spec = match a.method {
        Estimator::Permutation if has_frontier => {
            return Err(Error::InvalidArgument("the permutation estimator takes no frontier".into()))
        }
        Estimator::Kernelshap if has_frontier => {
            return Err(Error::InvalidArgument("kernelshap takes no frontier; use --method polyshap".into()))
        }
        Estimator::Permutation => None,
        Estimator::Kernelshap => Some(FrontierSpec::Additive(1)),
        Estimator::Polyshap => Some(match (a.order, &a.frontier) {
            (Some(k), _) => FrontierSpec::Additive(k),
            (None, Some(f)) => f.clone(),
            (None, None) => FrontierSpec::Additive(2),
        }),
    };
    if a.method == Estimator::Permutation && a.paired {
        return Err(Error::InvalidArgument("the permutation estimator has no paired mode".into()));
    }
    let frontier = spec.as_ref().map(|s| s.build(d, a.seed)).transpose()?;
    echo_config(
        stderr,
        json!({
            "command": "explain",
            "game": a.game,
            "players": d,
            "method": a.method,
            "frontier": frontier.as_ref().map(|f| f.label().to_string()),
            "columns": frontier.as_ref().map(|f| f.num_columns()),
            "budget": a.budget,
            "paired": a.paired,
            "seed": a.seed,
        }),
    );
    let mut result: AttributionResult = match &frontier {
        None => permutation_baseline(&game, a.budget, a.seed)?,
        Some(f) => polyshap(&game, f, &SamplerConfig::new(d, a.budget, a.paired, a.seed)?)?,
    };
    result.diagnostics.method = a.method;
    let text = result.to_json();
    if let Some(path) = &a.out {
        std::fs::write(path, format!("{text}\n"))?;
    }
    writeln!(stdout, "{text}")?;
    Ok(EXIT_OK)
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "benchmark".into());
    path.with_file_name(format!("{stem}{suffix}"))
}

fn benchmark(a: &BenchmarkArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32, Error> {
    let mut cfg = BenchmarkConfig::load(&a.config)?;
    if a.jobs.is_some() {
        cfg.jobs = a.jobs;
    }
    cfg.validate()?;
    let instances_path = sibling(&a.out, ".instances.csv");
    let plot_path = sibling(&a.out, ".plot.json");
    echo_config(
        stderr,
        json!({
            "command": "benchmark",
            "config": a.config,
            "out": a.out,
            "instances_out": instances_path,
            "plot_out": plot_path,
            "precision_ranking": "absolute value, ties to lower player index",
            "sem": "pooled over instances and seeds",
            "settings": cfg,
        }),
    );
    let report = run_benchmark(&cfg)?;
    std::fs::write(&a.out, report.to_csv())?;
    std::fs::write(&instances_path, report.instance_csv())?;
    std::fs::write(&plot_path, serde_json::to_string_pretty(&report.plot_json()).expect("json"))?;
    for f in &report.failures {
        let _ = writeln!(
            stderr,
            "run failed: game={} method={} frontier={} paired={} budget={} instance={} seed={}: {}",
            f.game, f.method, f.frontier, f.paired, f.budget, f.instance, f.seed, f.message
        );
    }
    let summary = json!({
        "rows": report.rows.len(),
        "runs": report.runs,
        "failed_runs": report.failures.len(),
        "degenerate_spearman": report.degenerate_spearman,
        "out": a.out,
    });
    writeln!(stdout, "{summary}")?;
    Ok(EXIT_OK)
}

fn verify(a: &VerifyArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32, Error> {
    let suites: Vec<Suite> = if a.suite == "all" { Suite::ALL.to_vec() } else { vec![a.suite.parse()?] };
    echo_config(
        stderr,
        json!({ "command": "verify", "suites": suites, "seed": a.seed }),
    );
    let mut failed = false;
    for suite in suites {
        let report = run_suite(suite, a.seed)?;
        write!(stdout, "{}", report.render())?;
        failed |= !report.passed();
    }
    Ok(if failed { EXIT_PROPERTY } else { EXIT_OK })
}

fn gen_game(a: &GenGameArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32, Error> {
    echo_config(
        stderr,
        json!({
            "command": "gen-game",
            "players": a.players,
            "max_order": a.max_order,
            "n_terms": a.n_terms,
            "seed": a.seed,
            "out": a.out,
        }),
    );
    let game = MobiusGame::random(a.players, a.max_order, a.n_terms, a.seed)?;
    game.save(&a.out)?;
    writeln!(stdout, "{}", json!({ "out": a.out, "players": a.players, "terms": game.num_terms() }))?;
    Ok(EXIT_OK)
}
