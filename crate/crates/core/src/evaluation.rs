//! Ground-truth oracles, accuracy metrics and the benchmark sweep.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coalition::{binomial_f64, Coalition};
use crate::error::{Error, Result};
use crate::estimators::{permutation_baseline, polyshap, AttributionResult, Estimator};
use crate::frontier::{FrontierSpec, InteractionFrontier};
use crate::games::{CountingGame, FileGame, Game, MobiusGame};
use crate::sampling::SamplerConfig;

/// Largest `d` for which brute-force oracles enumerate all coalitions.
pub const BRUTEFORCE_MAX_PLAYERS: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleMethod {
    Bruteforce,
    Mobius,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub shapley: Vec<f64>,
    pub method: OracleMethod,
}

/// `φ_i = (1/d) Σ_{S ⊆ D∖{i}} (ν(S ∪ {i}) − ν(S)) / C(d−1, |S|)`, evaluating all `2^d` coalitions.
pub fn bruteforce_shapley<G: Game + ?Sized>(game: &G) -> Result<OracleResult> {
    let d = game.num_players();
    if d > BRUTEFORCE_MAX_PLAYERS {
        return Err(Error::TooLarge { d, max: BRUTEFORCE_MAX_PLAYERS });
    }
    let n = 1usize << d;
    let mut values = Vec::with_capacity(n);
    for bits in 0..n {
        values.push(game.evaluate(&Coalition::from_bits(d, bits as u128)?)?);
    }
    let inv_binom: Vec<f64> = (0..d).map(|s| 1.0 / binomial_f64(d - 1, s)).collect();
    let mut shapley = vec![0.0; d];
    for (i, phi) in shapley.iter_mut().enumerate() {
        let bit = 1usize << i;
        let mut total = 0.0;
        for s in 0..n {
            if s & bit == 0 {
                total += (values[s | bit] - values[s]) * inv_binom[s.count_ones() as usize];
            }
        }
        *phi = total / d as f64;
    }
    Ok(OracleResult { shapley, method: OracleMethod::Bruteforce })
}

pub fn mobius_oracle(game: &MobiusGame) -> OracleResult {
    OracleResult { shapley: game.exact_shapley(), method: OracleMethod::Mobius }
}

/// Möbius games use their closed form; other games are enumerated.
pub fn oracle_for(game: &FileGame) -> Result<OracleResult> {
    match game {
        FileGame::Mobius(g) => Ok(mobius_oracle(g)),
        FileGame::Lookup(g) => bruteforce_shapley(g),
    }
}

fn check_lengths(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: b.len(), found: a.len() });
    }
    if a.is_empty() {
        return Err(Error::InvalidArgument("empty vectors".into()));
    }
    Ok(())
}

pub fn mse(estimate: &[f64], truth: &[f64]) -> Result<f64> {
    check_lengths(estimate, truth)?;
    Ok(estimate.iter().zip(truth).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / truth.len() as f64)
}

/// Players ranked by decreasing `|value|`, ties to the lower index.
fn top_k(values: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Overlap of the top-`k` players by absolute value, divided by `k`.
pub fn precision_at_k(estimate: &[f64], truth: &[f64], k: usize) -> Result<f64> {
    check_lengths(estimate, truth)?;
    if k == 0 || k > truth.len() {
        return Err(Error::InvalidArgument(format!("k = {k} outside 1..={}", truth.len())));
    }
    let top_truth = top_k(truth, k);
    let hits = top_k(estimate, k).iter().filter(|i| top_truth.contains(i)).count();
    Ok(hits as f64 / k as f64)
}

/// 1-based ranks, ties share the average rank.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && values[idx[end]] == values[idx[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spearman {
    pub value: f64,
    /// One of the rank vectors was constant; `value` is then 0.
    pub degenerate: bool,
}

pub fn spearman(estimate: &[f64], truth: &[f64]) -> Result<Spearman> {
    check_lengths(estimate, truth)?;
    if truth.len() < 2 {
        return Err(Error::InvalidArgument("spearman correlation needs at least 2 players".into()));
    }
    let a = average_ranks(estimate);
    let b = average_ranks(truth);
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(&b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma).powi(2);
        vb += (y - mb).powi(2);
    }
    if va == 0.0 || vb == 0.0 {
        return Ok(Spearman { value: 0.0, degenerate: true });
    }
    Ok(Spearman { value: (cov / (va * vb).sqrt()).clamp(-1.0, 1.0), degenerate: false })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Mse,
    PrecisionAtK,
    Spearman,
}

impl Metric {
    fn column_name(&self, k: usize) -> String {
        match self {
            Metric::Mse => "mse".into(),
            Metric::PrecisionAtK => format!("precision@{k}"),
            Metric::Spearman => "spearman".into(),
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mse" => Ok(Metric::Mse),
            "precision_at_k" | "precision" => Ok(Metric::PrecisionAtK),
            "spearman" => Ok(Metric::Spearman),
            other => Err(Error::InvalidArgument(format!("unknown metric {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GameSpec {
    /// `instances` random Möbius games; instance `i` uses seed `seed + i`.
    RandomMobius { id: String, d: usize, max_order: usize, n_terms: usize, instances: usize, seed: u64 },
    /// Game files, one instance per path; all must share `d`.
    File { id: String, paths: Vec<PathBuf> },
}

impl GameSpec {
    pub fn id(&self) -> &str {
        match self {
            GameSpec::RandomMobius { id, .. } | GameSpec::File { id, .. } => id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSpec {
    pub estimator: Estimator,
    /// Frontier in [`FrontierSpec`] syntax; regression estimators only.
    #[serde(default)]
    pub frontier: Option<String>,
    #[serde(default)]
    pub paired: bool,
}

impl MethodSpec {
    fn frontier_spec(&self) -> Result<Option<FrontierSpec>> {
        match (self.estimator, &self.frontier) {
            (Estimator::Permutation, None) => Ok(None),
            (Estimator::Permutation, Some(_)) => {
                Err(Error::InvalidArgument("the permutation estimator takes no frontier".into()))
            }
            (Estimator::Kernelshap, None) => Ok(Some(FrontierSpec::Additive(1))),
            (Estimator::Kernelshap, Some(f)) => match f.parse()? {
                FrontierSpec::Additive(1) => Ok(Some(FrontierSpec::Additive(1))),
                _ => Err(Error::InvalidArgument(format!("kernelshap cannot use frontier {f:?}"))),
            },
            (Estimator::Polyshap, None) => Err(Error::InvalidArgument("polyshap needs a frontier".into())),
            (Estimator::Polyshap, Some(f)) => Ok(Some(f.parse()?)),
        }
    }
}

fn default_metrics() -> Vec<Metric> {
    vec![Metric::Mse, Metric::PrecisionAtK, Metric::Spearman]
}

fn default_k() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub games: Vec<GameSpec>,
    pub methods: Vec<MethodSpec>,
    pub budgets: Vec<usize>,
    pub seeds: Vec<u64>,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<Metric>,
    #[serde(default = "default_k")]
    pub k_for_precision: usize,
    /// Seed for frontiers with random terms.
    #[serde(default)]
    pub frontier_seed: u64,
    /// Worker threads; `None` uses every core.
    #[serde(default)]
    pub jobs: Option<usize>,
}

impl BenchmarkConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: BenchmarkConfig =
            toml::from_str(text).map_err(|e| Error::Parse { line: 0, message: e.to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a TOML config; relative game paths resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg = Self::parse(&std::fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for game in &mut cfg.games {
            if let GameSpec::File { paths, .. } = game {
                for p in paths.iter_mut() {
                    if p.is_relative() {
                        *p = base.join(&*p);
                    }
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.games.is_empty() {
            return bad("no games configured".into());
        }
        if self.methods.is_empty() {
            return bad("no methods configured".into());
        }
        if self.budgets.is_empty() {
            return bad("no budgets configured".into());
        }
        if self.seeds.is_empty() {
            return bad("no seeds configured".into());
        }
        if self.metrics.is_empty() {
            return bad("no metrics configured".into());
        }
        if self.k_for_precision == 0 {
            return bad("k_for_precision must be positive".into());
        }
        if self.jobs == Some(0) {
            return bad("jobs must be positive".into());
        }
        let mut ids = std::collections::HashSet::new();
        for game in &self.games {
            if !ids.insert(game.id()) {
                return bad(format!("duplicate game id {:?}", game.id()));
            }
            match game {
                GameSpec::RandomMobius { d, instances, .. } => {
                    if *instances == 0 {
                        return bad(format!("game {:?} has no instances", game.id()));
                    }
                    if self.metrics.contains(&Metric::PrecisionAtK) && self.k_for_precision > *d {
                        return bad(format!("k_for_precision exceeds d = {d}"));
                    }
                }
                GameSpec::File { paths, .. } => {
                    if paths.is_empty() {
                        return bad(format!("game {:?} lists no files", game.id()));
                    }
                }
            }
        }
        for method in &self.methods {
            method.frontier_spec()?;
            if method.paired && method.estimator == Estimator::Permutation {
                return bad("the permutation estimator has no paired mode".into());
            }
        }
        Ok(())
    }
}

/// One loaded game instance with its ground truth.
struct Instance {
    game: Arc<dyn Game>,
    truth: Vec<f64>,
}

struct LoadedGame {
    id: String,
    d: usize,
    instances: Vec<Instance>,
}

fn load_games(cfg: &BenchmarkConfig) -> Result<Vec<LoadedGame>> {
    let mut out = Vec::new();
    for spec in &cfg.games {
        let (d, instances) = match spec {
            GameSpec::RandomMobius { d, max_order, n_terms, instances, seed, .. } => {
                let mut list = Vec::new();
                for i in 0..*instances {
                    let g = MobiusGame::random(*d, *max_order, *n_terms, seed.wrapping_add(i as u64))?;
                    let truth = g.exact_shapley();
                    list.push(Instance { game: Arc::new(g), truth });
                }
                (*d, list)
            }
            GameSpec::File { paths, .. } => {
                let mut list = Vec::new();
                let mut dims = None;
                for p in paths {
                    let g = FileGame::load(p)?;
                    let d = g.num_players();
                    if *dims.get_or_insert(d) != d {
                        return Err(Error::InvalidArgument(format!("game {:?} mixes player counts", spec.id())));
                    }
                    let truth = oracle_for(&g)?.shapley;
                    list.push(Instance { game: Arc::new(g), truth });
                }
                (dims.expect("paths non-empty"), list)
            }
        };
        if cfg.metrics.contains(&Metric::PrecisionAtK) && cfg.k_for_precision > d {
            return Err(Error::InvalidArgument(format!("k_for_precision exceeds d = {d} for game {:?}", spec.id())));
        }
        out.push(LoadedGame { id: spec.id().to_string(), d, instances });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CellValue {
    Stats { mean: f64, sem: f64, n_runs: usize },
    /// Not run: the budget cannot support the method on this game.
    Absent,
    /// Every run in the cell failed.
    Failed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub game: String,
    pub method: Estimator,
    pub frontier: String,
    pub paired: bool,
    pub budget: usize,
    pub metric: String,
    pub value: CellValue,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceRow {
    pub instance: usize,
    pub row: MetricsRow,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunFailure {
    pub game: String,
    pub method: Estimator,
    pub frontier: String,
    pub paired: bool,
    pub budget: usize,
    pub instance: usize,
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BenchmarkReport {
    pub rows: Vec<MetricsRow>,
    pub instance_rows: Vec<InstanceRow>,
    pub failures: Vec<RunFailure>,
    /// Runs attempted (absent cells excluded).
    pub runs: usize,
    /// Runs whose Spearman correlation hit a constant rank vector.
    pub degenerate_spearman: usize,
    /// Metric column names, in the order of [`RunRecord::metrics`].
    pub metric_names: Vec<String>,
    /// Every successful run, sorted like the aggregated rows.
    pub records: Vec<RunRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub game: String,
    pub method: Estimator,
    pub frontier: String,
    pub paired: bool,
    pub budget: usize,
    pub instance: usize,
    pub seed: u64,
    pub metrics: Vec<f64>,
    /// Calls the game received, counted independently of the estimator.
    pub evaluations: u64,
    pub budget_used: usize,
    pub efficiency_gap: f64,
}

pub const CSV_HEADER: &str = "game,method,frontier,paired,budget,metric,mean,sem,n_runs";

fn write_cells(out: &mut String, value: &CellValue) {
    match value {
        CellValue::Stats { mean, sem, n_runs } => {
            let _ = writeln!(out, "{mean:.6e},{sem:.6e},{n_runs}");
        }
        CellValue::Absent => out.push_str("absent,absent,0\n"),
        CellValue::Failed => out.push_str("failed,failed,0\n"),
    }
}

impl MetricsRow {
    fn key_fields(&self) -> String {
        format!("{},{},{},{},{},{}", self.game, self.method, self.frontier, self.paired, self.budget, self.metric)
    }

    /// The `mean,sem,n_runs` part of the CSV line.
    pub fn value_fields(&self) -> String {
        let mut s = String::new();
        write_cells(&mut s, &self.value);
        s.trim_end().to_string()
    }
}

impl BenchmarkReport {
    pub fn to_csv(&self) -> String {
        let mut out = format!("{CSV_HEADER}\n");
        for row in &self.rows {
            out.push_str(&row.key_fields());
            out.push(',');
            write_cells(&mut out, &row.value);
        }
        out
    }

    pub fn instance_csv(&self) -> String {
        let mut out = String::from("game,instance,method,frontier,paired,budget,metric,mean,sem,n_runs\n");
        for r in &self.instance_rows {
            let row = &r.row;
            let _ = write!(
                out,
                "{},{},{},{},{},{},{},",
                row.game, r.instance, row.method, row.frontier, row.paired, row.budget, row.metric
            );
            write_cells(&mut out, &row.value);
        }
        out
    }

    /// Per `(game, metric)`, one series per method with budgets, means and SEMs.
    pub fn plot_json(&self) -> serde_json::Value {
        let mut groups: BTreeMap<(String, String), BTreeMap<String, Vec<&MetricsRow>>> = BTreeMap::new();
        for row in &self.rows {
            let label = format!("{} {}{}", row.method, row.frontier, if row.paired { " paired" } else { "" });
            groups.entry((row.game.clone(), row.metric.clone())).or_default().entry(label).or_default().push(row);
        }
        let plots: Vec<serde_json::Value> = groups
            .into_iter()
            .map(|((game, metric), series)| {
                let series: Vec<serde_json::Value> = series
                    .into_iter()
                    .map(|(label, rows)| {
                        let first = rows[0];
                        let mut budgets = Vec::new();
                        let mut means = Vec::new();
                        let mut sems = Vec::new();
                        let mut absent = Vec::new();
                        for r in &rows {
                            match r.value {
                                CellValue::Stats { mean, sem, .. } => {
                                    budgets.push(r.budget);
                                    means.push(mean);
                                    sems.push(sem);
                                }
                                _ => absent.push(r.budget),
                            }
                        }
                        serde_json::json!({
                            "label": label,
                            "method": first.method,
                            "frontier": first.frontier,
                            "paired": first.paired,
                            "budget": budgets,
                            "mean": means,
                            "sem": sems,
                            "absent_budgets": absent,
                        })
                    })
                    .collect();
                serde_json::json!({ "game": game, "metric": metric, "series": series })
            })
            .collect();
        serde_json::json!({ "plots": plots })
    }

    pub fn row(&self, game: &str, method: Estimator, frontier: &str, paired: bool, budget: usize, metric: &str) -> Option<&MetricsRow> {
        self.rows.iter().find(|r| {
            r.game == game
                && r.method == method
                && r.frontier == frontier
                && r.paired == paired
                && r.budget == budget
                && r.metric == metric
        })
    }
}

fn mean_sem(values: &[f64]) -> CellValue {
    let n = values.len();
    if n == 0 {
        return CellValue::Failed;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let sem = if n > 1 {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    CellValue::Stats { mean, sem, n_runs: n }
}

const EFFICIENCY_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckedRun {
    pub result: AttributionResult,
    pub evaluations: u64,
}

/// Runs an estimator on a counting wrapper and checks the evaluation count and efficiency.
pub fn run_checked(
    game: &dyn Game,
    method: &MethodSpec,
    frontier: Option<&InteractionFrontier>,
    budget: usize,
    seed: u64,
) -> Result<CheckedRun> {
    let counted = CountingGame::new(game);
    let result = match method.estimator {
        Estimator::Permutation => permutation_baseline(&counted, budget, seed)?,
        Estimator::Kernelshap | Estimator::Polyshap => {
            let frontier = frontier.expect("regression methods carry a frontier");
            let cfg = SamplerConfig::new(game.num_players(), budget, method.paired, seed)?;
            let mut r = polyshap(&counted, frontier, &cfg)?;
            r.diagnostics.method = method.estimator;
            if r.diagnostics.budget_used != budget {
                return Err(Error::InvalidArgument(format!(
                    "declared budget {budget} but the estimator reported {}",
                    r.diagnostics.budget_used
                )));
            }
            r
        }
    };
    if counted.evaluations() != result.diagnostics.budget_used as u64 {
        return Err(Error::InvalidArgument(format!(
            "game was evaluated {} times but {} evaluations were reported",
            counted.evaluations(),
            result.diagnostics.budget_used
        )));
    }
    let gap = result.efficiency_gap();
    if gap.is_nan() || gap > EFFICIENCY_TOLERANCE {
        return Err(Error::InvalidArgument(format!("efficiency violated by {gap:e}")));
    }
    Ok(CheckedRun { evaluations: counted.evaluations(), result })
}

struct RunData {
    metrics: Vec<f64>,
    degenerate: bool,
    evaluations: u64,
    budget_used: usize,
    efficiency_gap: f64,
}

struct RunOutcome {
    cell: usize,
    instance: usize,
    seed: u64,
    result: std::result::Result<RunData, String>,
}

struct Cell {
    game: usize,
    method: usize,
    frontier: Option<Arc<InteractionFrontier>>,
    frontier_label: String,
    budget: usize,
    absent: bool,
    setup_error: Option<String>,
}

pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<BenchmarkReport> {
    cfg.validate()?;
    let games = load_games(cfg)?;

    let mut cells = Vec::new();
    for (gi, game) in games.iter().enumerate() {
        let d = game.d;
        for (mi, method) in cfg.methods.iter().enumerate() {
            let (frontier, setup_error) = match method.frontier_spec()? {
                None => (None, None),
                Some(spec) => match spec.build(d, cfg.frontier_seed) {
                    Ok(f) => (Some(Arc::new(f)), None),
                    Err(e) => (None, Some(format!("frontier {spec}: {e}"))),
                },
            };
            let frontier_label = match (&frontier, method.frontier_spec()?) {
                (Some(f), _) => f.label().to_string(),
                (None, Some(spec)) => spec.to_string(),
                (None, None) => "none".to_string(),
            };
            for &budget in &cfg.budgets {
                let max = if d >= 127 { u128::MAX } else { 1u128 << d };
                let absent = budget as u128 > max
                    || match method.estimator {
                        Estimator::Permutation => budget < d + 1,
                        _ => {
                            let columns = frontier.as_ref().map_or(d, |f| f.num_columns());
                            budget < d + 2 || columns + 2 > budget
                        }
                    };
                cells.push(Cell {
                    game: gi,
                    method: mi,
                    frontier: frontier.clone(),
                    frontier_label: frontier_label.clone(),
                    budget,
                    absent: absent && setup_error.is_none(),
                    setup_error: setup_error.clone(),
                });
            }
        }
    }

    let mut jobs = Vec::new();
    for (ci, cell) in cells.iter().enumerate() {
        if cell.absent {
            continue;
        }
        for instance in 0..games[cell.game].instances.len() {
            for &seed in &cfg.seeds {
                jobs.push((ci, instance, seed));
            }
        }
    }

    let k = cfg.k_for_precision;
    let work = |&(ci, instance, seed): &(usize, usize, u64)| -> RunOutcome {
        let cell = &cells[ci];
        let inst = &games[cell.game].instances[instance];
        let result = match &cell.setup_error {
            Some(e) => Err(e.clone()),
            None => run_checked(inst.game.as_ref(), &cfg.methods[cell.method], cell.frontier.as_deref(), cell.budget, seed)
                .and_then(|run| {
                    let r = &run.result;
                    let mut degenerate = false;
                    let mut values = Vec::with_capacity(cfg.metrics.len());
                    for metric in &cfg.metrics {
                        values.push(match metric {
                            Metric::Mse => mse(&r.shapley, &inst.truth)?,
                            Metric::PrecisionAtK => precision_at_k(&r.shapley, &inst.truth, k)?,
                            Metric::Spearman => {
                                let s = spearman(&r.shapley, &inst.truth)?;
                                degenerate |= s.degenerate;
                                s.value
                            }
                        });
                    }
                    Ok(RunData {
                        metrics: values,
                        degenerate,
                        evaluations: run.evaluations,
                        budget_used: r.diagnostics.budget_used,
                        efficiency_gap: r.efficiency_gap(),
                    })
                })
                .map_err(|e| e.to_string()),
        };
        RunOutcome { cell: ci, instance, seed, result }
    };
    let mut outcomes: Vec<RunOutcome> = match cfg.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?
            .install(|| jobs.par_iter().map(work).collect()),
        None => jobs.par_iter().map(work).collect(),
    };
    outcomes.sort_by_key(|o| (o.cell, o.instance, o.seed));

    let mut report = BenchmarkReport {
        runs: outcomes.len(),
        metric_names: cfg.metrics.iter().map(|m| m.column_name(k)).collect(),
        ..Default::default()
    };
    let mut per_cell: Vec<Vec<&RunOutcome>> = vec![Vec::new(); cells.len()];
    for o in &outcomes {
        per_cell[o.cell].push(o);
    }
    for (ci, cell) in cells.iter().enumerate() {
        let method = &cfg.methods[cell.method];
        let game = &games[cell.game];
        let make_row = |metric: &Metric, value: CellValue| MetricsRow {
            game: game.id.clone(),
            method: method.estimator,
            frontier: cell.frontier_label.clone(),
            paired: method.paired,
            budget: cell.budget,
            metric: metric.column_name(k),
            value,
        };
        for o in &per_cell[ci] {
            match &o.result {
                Err(message) => report.failures.push(RunFailure {
                    game: game.id.clone(),
                    method: method.estimator,
                    frontier: cell.frontier_label.clone(),
                    paired: method.paired,
                    budget: cell.budget,
                    instance: o.instance,
                    seed: o.seed,
                    message: message.clone(),
                }),
                Ok(data) => {
                    report.degenerate_spearman += data.degenerate as usize;
                    report.records.push(RunRecord {
                        game: game.id.clone(),
                        method: method.estimator,
                        frontier: cell.frontier_label.clone(),
                        paired: method.paired,
                        budget: cell.budget,
                        instance: o.instance,
                        seed: o.seed,
                        metrics: data.metrics.clone(),
                        evaluations: data.evaluations,
                        budget_used: data.budget_used,
                        efficiency_gap: data.efficiency_gap,
                    });
                }
            }
        }
        for (mi, metric) in cfg.metrics.iter().enumerate() {
            if cell.absent {
                report.rows.push(make_row(metric, CellValue::Absent));
                for instance in 0..game.instances.len() {
                    report.instance_rows.push(InstanceRow { instance, row: make_row(metric, CellValue::Absent) });
                }
                continue;
            }
            let pooled: Vec<f64> = per_cell[ci].iter().filter_map(|o| o.result.as_ref().ok().map(|r| r.metrics[mi])).collect();
            report.rows.push(make_row(metric, mean_sem(&pooled)));
            for instance in 0..game.instances.len() {
                let values: Vec<f64> = per_cell[ci]
                    .iter()
                    .filter(|o| o.instance == instance)
                    .filter_map(|o| o.result.as_ref().ok().map(|r| r.metrics[mi]))
                    .collect();
                report.instance_rows.push(InstanceRow { instance, row: make_row(metric, mean_sem(&values)) });
            }
        }
    }
    let order = |r: &MetricsRow| (r.game.clone(), r.method.to_string(), r.frontier.clone(), r.paired, r.budget, r.metric.clone());
    report.rows.sort_by_key(order);
    report.records.sort_by(|a, b| {
        let key = |r: &RunRecord| (r.game.clone(), r.method.to_string(), r.frontier.clone(), r.paired, r.budget, r.instance, r.seed);
        key(a).cmp(&key(b))
    });
    report.instance_rows.sort_by(|a, b| order(&a.row).cmp(&order(&b.row)).then(a.instance.cmp(&b.instance)));
    Ok(report)
}

impl fmt::Display for CellValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CellValue::Stats { mean, sem, n_runs } => write!(f, "{mean:.6e} ± {sem:.2e} (n={n_runs})"),
            CellValue::Absent => f.write_str("absent"),
            CellValue::Failed => f.write_str("failed"),
        }
    }
}
