//! Numerical property suites: consistency at full budget, paired
//! KernelSHAP / 2-additive equivalence, the projection lemma for constrained
//! fits, the closed-form order-1 leverage scores and the paired odd-order
//! observation.

use std::fmt;
use std::str::FromStr;

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::coalition::binomial_f64;
use crate::error::{Error, Result};
use crate::estimators::{polyshap, polyshap_from_batch, project_2poly_to_sv, AttributionResult, Estimator};
use crate::evaluation::bruteforce_shapley;
use crate::frontier::{FrontierSpec, InteractionFrontier};
use crate::games::{CountingGame, Game, MobiusGame};
use crate::regression::{build_design, constrained_lstsq, solve_constrained};
use crate::sampling::{leverage_scores_bruteforce, sample, SampleBatch, SamplerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Consistency,
    PairedEquivalence,
    ProjectionLemma,
    LeverageClosedForm,
    OddkConjecture,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::Consistency,
        Suite::PairedEquivalence,
        Suite::ProjectionLemma,
        Suite::LeverageClosedForm,
        Suite::OddkConjecture,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Consistency => "consistency",
            Suite::PairedEquivalence => "paired-equivalence",
            Suite::ProjectionLemma => "projection-lemma",
            Suite::LeverageClosedForm => "leverage-closed-form",
            Suite::OddkConjecture => "oddk-conjecture",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown suite {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    /// Observations are reported but never fail a suite.
    pub asserted: bool,
    pub passed: bool,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub trials: usize,
    /// Trials drawn but dropped because a precondition (such as full rank) failed.
    pub discarded: usize,
}

impl CheckResult {
    fn new(name: impl Into<String>, asserted: bool, max_deviation: f64, tolerance: f64, trials: usize, discarded: usize) -> Self {
        CheckResult {
            name: name.into(),
            asserted,
            passed: max_deviation.is_finite() && max_deviation < tolerance && trials > 0,
            max_deviation,
            tolerance,
            trials,
            discarded,
        }
    }

    pub fn line(&self) -> String {
        let status = match (self.asserted, self.passed) {
            (true, true) => "PASS",
            (true, false) => "FAIL",
            (false, true) => "OBSERVED",
            (false, false) => "OBSERVED (above tolerance)",
        };
        let mut s = format!(
            "{status} {}: max deviation {:.3e} (tolerance {:.0e}, {} trials",
            self.name, self.max_deviation, self.tolerance, self.trials
        );
        if self.discarded > 0 {
            s.push_str(&format!(", {} discarded", self.discarded));
        }
        s.push(')');
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub checks: Vec<CheckResult>,
}

impl SuiteReport {
    /// True when every asserted check passed.
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| !c.asserted || c.passed)
    }

    pub fn render(&self) -> String {
        let mut out = format!("suite {}\n", self.suite);
        for check in &self.checks {
            out.push_str("  ");
            out.push_str(&check.line());
            out.push('\n');
        }
        out
    }
}

const EFFICIENCY_TOLERANCE: f64 = 1e-8;

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn efficiency_check(name: &str, results: &[AttributionResult]) -> CheckResult {
    let worst = results.iter().map(AttributionResult::efficiency_gap).fold(0.0, f64::max);
    CheckResult::new(format!("{name} efficiency"), true, worst, EFFICIENCY_TOLERANCE, results.len(), 0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyOptions {
    pub dims: Vec<usize>,
    pub games_per_dim: usize,
    pub frontiers: Vec<FrontierSpec>,
    pub seed: u64,
}

impl Default for ConsistencyOptions {
    fn default() -> Self {
        ConsistencyOptions {
            dims: vec![4, 6, 8, 10],
            games_per_dim: 5,
            frontiers: vec![
                FrontierSpec::Additive(1),
                FrontierSpec::Additive(2),
                FrontierSpec::Additive(3),
                FrontierSpec::PercentOfOrder { k: 3, percent: 50.0 },
            ],
            seed: 0,
        }
    }
}

/// At budget `2^d` every frontier reproduces the exact Shapley values.
pub fn consistency(opts: &ConsistencyOptions) -> Result<SuiteReport> {
    let mut checks = Vec::new();
    let mut all_results = Vec::new();
    for spec in &opts.frontiers {
        let mut worst = 0.0f64;
        let mut trials = 0;
        for &d in &opts.dims {
            let frontier = spec.build(d, opts.seed)?;
            for g in 0..opts.games_per_dim {
                let game_seed = opts.seed.wrapping_mul(1_000_003).wrapping_add((d * 1000 + g) as u64);
                let game = MobiusGame::random(d, d.min(5), 3 * d, game_seed)?;
                let truth = bruteforce_shapley(&game)?.shapley;
                let counted = CountingGame::new(&game);
                let budget = 1usize << d;
                let r = polyshap(&counted, &frontier, &SamplerConfig::new(d, budget, false, game_seed)?)?;
                if counted.evaluations() != budget as u64 {
                    return Err(Error::InvalidArgument(format!("spent {} of {budget} evaluations", counted.evaluations())));
                }
                worst = worst.max(max_abs_diff(&r.shapley, &truth));
                trials += 1;
                all_results.push(r);
            }
        }
        checks.push(CheckResult::new(format!("full budget matches oracle, frontier {spec}"), true, worst, 1e-7, trials, 0));
    }
    checks.push(efficiency_check("consistency", &all_results));
    Ok(SuiteReport { suite: Suite::Consistency, checks })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairedOptions {
    pub dims: Vec<usize>,
    pub trials_per_dim: usize,
    /// Trials of the degree-2 recovery check, at `recovery_dim` players.
    pub recovery_trials: usize,
    pub recovery_dim: usize,
    pub seed: u64,
}

impl Default for PairedOptions {
    fn default() -> Self {
        PairedOptions { dims: vec![6, 8, 10], trials_per_dim: 50, recovery_trials: 30, recovery_dim: 8, seed: 0 }
    }
}

/// Draws paired batches until the design over `frontier` has full rank.
/// Returns the batch and the number of rank-deficient draws discarded.
fn full_rank_paired_batch(
    game: &MobiusGame,
    frontier: &InteractionFrontier,
    rng: &mut ChaCha8Rng,
) -> Result<(SampleBatch, usize)> {
    let d = game.num_players();
    let columns = frontier.num_columns();
    let lo = columns + 2;
    let hi = 1usize << d;
    for discarded in 0..1000 {
        // Even budgets keep every sampled coalition paired with its complement.
        let budget = 2 * rng.random_range(lo.div_ceil(2)..=hi / 2);
        let batch = sample(&SamplerConfig::new(d, budget, true, rng.random())?, game)?;
        let report = solve_constrained(&build_design(&batch, frontier)?)?;
        if report.rank + 1 == columns && !batch.unpaired_leftover {
            return Ok((batch, discarded));
        }
    }
    Err(Error::InvalidArgument(format!("no full-rank paired design found for {} at d = {d}", frontier.label())))
}

/// Paired KernelSHAP equals the projected 2-additive fit, and is exact on
/// games without interactions above order 2.
pub fn paired_equivalence(opts: &PairedOptions) -> Result<SuiteReport> {
    let mut checks = Vec::new();
    let mut results = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for &d in &opts.dims {
        let empty = InteractionFrontier::empty(d)?;
        let pairs = InteractionFrontier::k_additive(d, 2)?;
        let mut worst = 0.0f64;
        let mut discarded = 0;
        for _ in 0..opts.trials_per_dim {
            let game = MobiusGame::random(d, d.min(5), 4 * d, rng.random())?;
            let (batch, dropped) = full_rank_paired_batch(&game, &pairs, &mut rng)?;
            discarded += dropped;
            let kernel = polyshap_from_batch(&batch, &empty, Estimator::Kernelshap, 0)?;
            let two = polyshap_from_batch(&batch, &pairs, Estimator::Polyshap, 0)?;
            let rep2 = &two.representation.as_ref().expect("regression output").values;
            let projected = project_2poly_to_sv(rep2, d)?;
            worst = worst.max(max_abs_diff(&kernel.shapley, &projected));
            results.push(kernel);
            results.push(two);
        }
        checks.push(CheckResult::new(
            format!("paired kernelshap = projected 2-additive fit, d={d}"),
            true,
            worst,
            1e-6,
            opts.trials_per_dim,
            discarded,
        ));
    }

    let d = opts.recovery_dim;
    let pairs = InteractionFrontier::k_additive(d, 2)?;
    let empty = InteractionFrontier::empty(d)?;
    let mut worst = 0.0f64;
    let mut discarded = 0;
    for _ in 0..opts.recovery_trials {
        let game = MobiusGame::random(d, 2, 2 * d, rng.random())?;
        let truth = bruteforce_shapley(&game)?.shapley;
        let (batch, dropped) = full_rank_paired_batch(&game, &pairs, &mut rng)?;
        discarded += dropped;
        let kernel = polyshap_from_batch(&batch, &empty, Estimator::Kernelshap, 0)?;
        worst = worst.max(max_abs_diff(&kernel.shapley, &truth));
        results.push(kernel);
    }
    checks.push(CheckResult::new(
        format!("paired kernelshap exact on order-2 games, d={d}"),
        true,
        worst,
        1e-7,
        opts.recovery_trials,
        discarded,
    ));
    checks.push(efficiency_check("paired", &results));
    Ok(SuiteReport { suite: Suite::PairedEquivalence, checks })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionOptions {
    pub systems: usize,
    pub rows: usize,
    pub columns: usize,
    pub extended_columns: usize,
    pub seed: u64,
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        ProjectionOptions { systems: 20, rows: 100, columns: 6, extended_columns: 10, seed: 0 }
    }
}

/// Fitting `X` to `y` under `Σβ = c` equals fitting `X` to `X₊β₊`, where `β₊`
/// is the constrained fit of the extended matrix `X₊ = [X, Z]`.
pub fn projection_lemma(opts: &ProjectionOptions) -> Result<SuiteReport> {
    if opts.extended_columns <= opts.columns || opts.rows < opts.extended_columns {
        return Err(Error::InvalidArgument("need rows >= extended columns > columns".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut worst = 0.0f64;
    for _ in 0..opts.systems {
        let (n, d, dp) = (opts.rows, opts.columns, opts.extended_columns);
        let x_plus = Mat::from_fn(n, dp, |_, _| rng.sample::<f64, _>(StandardNormal));
        let x = Mat::from_fn(n, d, |i, j| x_plus[(i, j)]);
        let y: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let c: f64 = rng.sample::<f64, _>(StandardNormal) * 3.0;

        let beta_plus = constrained_lstsq(&x_plus, &y, c)?.coefficients;
        let fitted: Vec<f64> = (0..n).map(|i| (0..dp).map(|j| x_plus[(i, j)] * beta_plus[j]).sum()).collect();
        let direct = constrained_lstsq(&x, &y, c)?.coefficients;
        let through = constrained_lstsq(&x, &fitted, c)?.coefficients;
        worst = worst.max(max_abs_diff(&direct, &through));
    }
    Ok(SuiteReport {
        suite: Suite::ProjectionLemma,
        checks: vec![CheckResult::new(
            format!("constrained fits agree, n={} d={} d+={}", opts.rows, opts.columns, opts.extended_columns),
            true,
            worst,
            1e-8,
            opts.systems,
            0,
        )],
    })
}

/// Order-1 leverage scores are proportional to `1 / C(d, |S|)` and sum to `d − 1`.
pub fn leverage_closed_form(dims: &[usize]) -> Result<SuiteReport> {
    let mut checks = Vec::new();
    for &d in dims {
        let scores = leverage_scores_bruteforce(&InteractionFrontier::empty(d)?)?;
        let scaled: Vec<f64> = (1..d).map(|s| scores.per_size[s] * binomial_f64(d, s)).collect();
        let reference = scaled[0];
        let proportional = scaled.iter().map(|v| (v / reference - 1.0).abs()).fold(0.0, f64::max);
        let ends = scores.per_size[0].abs().max(scores.per_size[d].abs());
        checks.push(CheckResult::new(
            format!("leverage ∝ 1/C(d,|S|), d={d}"),
            true,
            proportional.max(ends),
            1e-6,
            1,
            0,
        ));
        checks.push(CheckResult::new(
            format!("leverage total = d - 1, d={d}"),
            true,
            (scores.total - (d - 1) as f64).abs(),
            1e-8,
            1,
            0,
        ));
    }
    Ok(SuiteReport { suite: Suite::LeverageClosedForm, checks })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OddkOptions {
    pub d: usize,
    pub trials: usize,
    pub seed: u64,
}

impl Default for OddkOptions {
    fn default() -> Self {
        OddkOptions { d: 8, trials: 30, seed: 0 }
    }
}

/// Compares paired 3-additive and 4-additive fits on the same batches. Reported only.
pub fn oddk_conjecture(opts: &OddkOptions) -> Result<SuiteReport> {
    let d = opts.d;
    let three = InteractionFrontier::k_additive(d, 3)?;
    let four = InteractionFrontier::k_additive(d, 4)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut worst = 0.0f64;
    let mut discarded = 0;
    let mut results = Vec::new();
    for _ in 0..opts.trials {
        let game = MobiusGame::random(d, d, 5 * d, rng.random())?;
        let (batch, dropped) = full_rank_paired_batch(&game, &four, &mut rng)?;
        discarded += dropped;
        let a = polyshap_from_batch(&batch, &three, Estimator::Polyshap, 0)?;
        let b = polyshap_from_batch(&batch, &four, Estimator::Polyshap, 0)?;
        worst = worst.max(max_abs_diff(&a.shapley, &b.shapley));
        results.push(a);
        results.push(b);
    }
    Ok(SuiteReport {
        suite: Suite::OddkConjecture,
        checks: vec![
            CheckResult::new(format!("paired 3-additive vs 4-additive, d={d}"), false, worst, 1e-6, opts.trials, discarded),
            efficiency_check("odd-order", &results),
        ],
    })
}

/// Runs a suite at its default desk-scale settings.
pub fn run_suite(suite: Suite, seed: u64) -> Result<SuiteReport> {
    match suite {
        Suite::Consistency => consistency(&ConsistencyOptions { seed, ..Default::default() }),
        Suite::PairedEquivalence => paired_equivalence(&PairedOptions { seed, ..Default::default() }),
        Suite::ProjectionLemma => projection_lemma(&ProjectionOptions { seed, ..Default::default() }),
        Suite::LeverageClosedForm => leverage_closed_form(&[4, 5, 6, 8, 10]),
        Suite::OddkConjecture => oddk_conjecture(&OddkOptions { seed, ..Default::default() }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for suite in Suite::ALL {
            assert_eq!(suite.name().parse::<Suite>().unwrap(), suite);
        }
        assert!("paired".parse::<Suite>().is_err());
    }

    #[test]
    fn small_suites_pass() {
        let c = consistency(&ConsistencyOptions { dims: vec![4, 6], games_per_dim: 2, ..Default::default() }).unwrap();
        assert!(c.passed(), "{}", c.render());
        let p = paired_equivalence(&PairedOptions {
            dims: vec![6],
            trials_per_dim: 5,
            recovery_trials: 5,
            recovery_dim: 6,
            seed: 1,
        })
        .unwrap();
        assert!(p.passed(), "{}", p.render());
        assert!(projection_lemma(&ProjectionOptions::default()).unwrap().passed());
        assert!(leverage_closed_form(&[4, 5]).unwrap().passed());
    }

    #[test]
    fn observation_never_fails_suite() {
        let mut report = SuiteReport {
            suite: Suite::OddkConjecture,
            checks: vec![CheckResult::new("x", false, 1.0, 1e-6, 3, 0)],
        };
        assert!(report.passed());
        assert!(report.render().contains("OBSERVED (above tolerance)"));
        report.checks.push(CheckResult::new("y", true, 1.0, 1e-6, 3, 0));
        assert!(!report.passed());
        assert!(report.render().contains("FAIL y"));
    }
}
