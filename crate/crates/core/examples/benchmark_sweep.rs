//! Runs a small benchmark sweep in-process and prints the aggregated CSV.
//!
//! cargo run --release --example benchmark_sweep [config.toml]

use polyshap::evaluation::{run_benchmark, BenchmarkConfig};

const DEFAULT: &str = r#"
budgets = [30, 60, 120]
seeds = [0, 1, 2, 3, 4]
metrics = ["mse", "spearman"]

[[games]]
kind = "random_mobius"
id = "d8"
d = 8
max_order = 3
n_terms = 25
instances = 5
seed = 1

[[methods]]
estimator = "permutation"

[[methods]]
estimator = "kernelshap"
paired = true

[[methods]]
estimator = "polyshap"
frontier = "2"
"#;

fn main() -> polyshap::Result<()> {
    let cfg = match std::env::args().nth(1) {
        Some(path) => BenchmarkConfig::load(path)?,
        None => BenchmarkConfig::parse(DEFAULT)?,
    };
    let report = run_benchmark(&cfg)?;
    print!("{}", report.to_csv());
    eprintln!("{} runs, {} failed", report.runs, report.failures.len());
    Ok(())
}
