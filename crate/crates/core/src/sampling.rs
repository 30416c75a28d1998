//! Coalition sampling for the sampled regression.
//!
//! Sizes are drawn from a size distribution (by default uniform over
//! `1..d-1`, which is what order-1 leverage scores reduce to), coalitions are
//! drawn uniformly without replacement within a size, optionally in
//! complement pairs `(S, D \ S)`. Sizes whose expected sample count reaches
//! their number of coalitions are enumerated exhaustively instead (the
//! "border trick").
//!
//! Row weights are `sqrt(μ(S) / p(S))`. Enumerated rows use `p(S) = 1`.
//! A sampled row uses the expected number of times `S` appears among the
//! `n` sampled rows, `p(S) = n · q(|S|) / C(d, |S|)`, so the sampled strata
//! estimate their share of the exact objective on the same scale as the
//! enumerated strata.

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;

use faer::Mat;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coalition::{binomial, binomial_f64, enumerate_subsets, shapley_weight, Coalition, MAX_PLAYERS};
use crate::error::{Error, Result};
use crate::frontier::InteractionFrontier;
use crate::games::Game;

/// Uniform over sizes `1..=d-1`; entry `s` is the probability of size `s`.
pub fn default_size_distribution(d: usize) -> Result<Vec<f64>> {
    if !(2..=MAX_PLAYERS).contains(&d) {
        return Err(Error::InvalidDimension(format!("sampling needs 2 <= d <= {MAX_PLAYERS}, got {d}")));
    }
    let mut q = vec![0.0; d + 1];
    for p in q.iter_mut().take(d).skip(1) {
        *p = 1.0 / (d - 1) as f64;
    }
    Ok(q)
}

/// Per-coalition probability `q(|S|) / C(d, |S|)` under a size distribution.
pub fn coalition_probability(size_distribution: &[f64], coalition: &Coalition) -> f64 {
    let d = coalition.num_players();
    let s = coalition.size();
    size_distribution[s] / binomial_f64(d, s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    /// Total game evaluations, including `ν(∅)` and `ν(D)`.
    pub budget: usize,
    pub paired: bool,
    pub seed: u64,
    size_distribution: Vec<f64>,
}

impl SamplerConfig {
    pub fn new(d: usize, budget: usize, paired: bool, seed: u64) -> Result<Self> {
        Ok(SamplerConfig { budget, paired, seed, size_distribution: default_size_distribution(d)? })
    }

    /// Replaces the size distribution. It must have length `d + 1`, no mass
    /// at sizes 0 and `d`, sum to 1, and be complement-symmetric when paired.
    pub fn with_size_distribution(mut self, q: Vec<f64>) -> Result<Self> {
        validate_distribution(&q, self.paired)?;
        self.size_distribution = q;
        Ok(self)
    }

    pub fn size_distribution(&self) -> &[f64] {
        &self.size_distribution
    }

    pub fn num_players(&self) -> usize {
        self.size_distribution.len() - 1
    }
}

fn validate_distribution(q: &[f64], paired: bool) -> Result<()> {
    let d = q.len().saturating_sub(1);
    if d < 2 {
        return Err(Error::InvalidDimension("size distribution needs d >= 2".into()));
    }
    if q.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::InvalidArgument("size probabilities must be finite and nonnegative".into()));
    }
    if q[0] != 0.0 || q[d] != 0.0 {
        return Err(Error::InvalidArgument("sizes 0 and d must carry no probability".into()));
    }
    let total: f64 = q.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!("size probabilities sum to {total}, not 1")));
    }
    if paired && (1..d).any(|s| (q[s] - q[d - s]).abs() > 1e-12) {
        return Err(Error::InvalidArgument("paired sampling needs p(s) = p(d - s)".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleRow {
    pub coalition: Coalition,
    pub weight: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    players: usize,
    /// `ν(∅)`, uncentered.
    pub empty_value: f64,
    /// `ν(D)`, uncentered.
    pub full_value: f64,
    pub rows: Vec<SampleRow>,
    pub enumerated_sizes: BTreeSet<usize>,
    pub paired: bool,
    /// Set when a paired batch had an odd number of row slots and the last
    /// slot holds an unpaired draw.
    pub unpaired_leftover: bool,
}

impl SampleBatch {
    pub fn num_players(&self) -> usize {
        self.players
    }

    /// Game evaluations consumed: the rows plus `ν(∅)` and `ν(D)`.
    pub fn evaluations(&self) -> usize {
        self.rows.len() + 2
    }

    /// Swaps two players in every row coalition.
    pub fn transpose_players(&self, a: usize, b: usize) -> SampleBatch {
        let mut perm: Vec<usize> = (0..self.players).collect();
        perm.swap(a, b);
        let mut out = self.clone();
        for row in &mut out.rows {
            row.coalition = row.coalition.permuted(&perm);
        }
        out
    }

    /// CSV dump for replaying a batch. The header line carries metadata; the
    /// `∅` and `D` evaluations appear as weight-0 rows.
    pub fn to_csv(&self) -> String {
        let enumerated: Vec<String> = self.enumerated_sizes.iter().map(ToString::to_string).collect();
        let mut out = format!(
            "# d={} paired={} unpaired_leftover={} enumerated={}\ncoalition,weight,value\n",
            self.players,
            self.paired,
            self.unpaired_leftover,
            enumerated.join(";")
        );
        let empty = Coalition::empty(self.players).expect("valid d");
        let full = Coalition::full(self.players).expect("valid d");
        let _ = writeln!(out, "{},0,{:?}", empty, self.empty_value);
        let _ = writeln!(out, "{},0,{:?}", full, self.full_value);
        for row in &self.rows {
            let _ = writeln!(out, "{},{:?},{:?}", row.coalition, row.weight, row.value);
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<SampleBatch> {
        let mut lines = text.lines().enumerate();
        let (_, meta) = lines.next().ok_or(Error::Parse { line: 1, message: "empty batch file".into() })?;
        let meta_err = |message: String| Error::Parse { line: 1, message };
        let meta = meta.strip_prefix("# ").ok_or_else(|| meta_err("missing metadata line".into()))?;
        let mut players = None;
        let mut paired = false;
        let mut unpaired_leftover = false;
        let mut enumerated_sizes = BTreeSet::new();
        for field in meta.split_whitespace() {
            let (key, value) = field.split_once('=').ok_or_else(|| meta_err(format!("bad field {field:?}")))?;
            let bad = || meta_err(format!("bad value in {field:?}"));
            match key {
                "d" => players = Some(value.parse::<usize>().map_err(|_| bad())?),
                "paired" => paired = value.parse().map_err(|_| bad())?,
                "unpaired_leftover" => unpaired_leftover = value.parse().map_err(|_| bad())?,
                "enumerated" => {
                    for s in value.split(';').filter(|s| !s.is_empty()) {
                        enumerated_sizes.insert(s.parse().map_err(|_| bad())?);
                    }
                }
                _ => return Err(meta_err(format!("unknown field {key:?}"))),
            }
        }
        let players = players.ok_or_else(|| meta_err("missing d".into()))?;
        if let Some((idx, header)) = lines.next() {
            if header.trim() != "coalition,weight,value" {
                return Err(Error::Parse { line: idx + 1, message: "expected CSV header".into() });
            }
        }
        let mut empty_value = None;
        let mut full_value = None;
        let mut rows = Vec::new();
        for (idx, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse { line: idx + 1, message };
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(err(format!("expected 3 fields, found {}", fields.len())));
            }
            let coalition = Coalition::parse_bitstring(fields[0]).map_err(|e| err(e.to_string()))?;
            if coalition.num_players() != players {
                return Err(err(format!("coalition {} does not have {players} players", fields[0])));
            }
            let weight: f64 = fields[1].parse().map_err(|_| err("invalid weight".into()))?;
            let value: f64 = fields[2].parse().map_err(|_| err("invalid value".into()))?;
            if coalition.is_empty() {
                empty_value = Some(value);
            } else if coalition.is_full() {
                full_value = Some(value);
            } else {
                if !(weight.is_finite() && weight > 0.0) {
                    return Err(err(format!("row weight {weight} must be positive and finite")));
                }
                rows.push(SampleRow { coalition, weight, value });
            }
        }
        Ok(SampleBatch {
            players,
            empty_value: empty_value.ok_or(Error::Parse { line: 0, message: "missing empty-coalition row".into() })?,
            full_value: full_value.ok_or(Error::Parse { line: 0, message: "missing grand-coalition row".into() })?,
            rows,
            enumerated_sizes,
            paired,
            unpaired_leftover,
        })
    }
}

/// Remaining coalitions of one size, for without-replacement draws.
struct Stratum {
    total: u128,
    used: u128,
}

struct Strata {
    d: usize,
    per_size: Vec<Stratum>,
    used: HashSet<Coalition>,
}

impl Strata {
    fn new(d: usize) -> Self {
        Strata {
            d,
            per_size: (0..=d).map(|s| Stratum { total: binomial(d, s), used: 0 }).collect(),
            used: HashSet::new(),
        }
    }

    fn is_exhausted(&self, size: usize) -> bool {
        self.per_size[size].used >= self.per_size[size].total
    }

    fn mark(&mut self, c: Coalition) {
        if self.used.insert(c) {
            self.per_size[c.size()].used += 1;
        }
    }

    /// Uniform draw among the unused coalitions of `size`.
    fn draw(&self, size: usize, rng: &mut impl Rng) -> Coalition {
        let stratum = &self.per_size[size];
        debug_assert!(stratum.used < stratum.total);
        if stratum.total <= 4096 || stratum.used * 2 >= stratum.total {
            let free = stratum.total - stratum.used;
            let mut pick = rng.random_range(0..free);
            for c in enumerate_subsets(self.d, size).expect("size <= d") {
                if self.used.contains(&c) {
                    continue;
                }
                if pick == 0 {
                    return c;
                }
                pick -= 1;
            }
            unreachable!("stratum bookkeeping out of sync");
        }
        loop {
            let members = index::sample(rng, self.d, size);
            let c = Coalition::from_players(self.d, members.iter()).expect("indices < d");
            if !self.used.contains(&c) {
                return c;
            }
        }
    }
}

/// Draws a batch of coalitions and evaluates the game on each one, spending
/// exactly `cfg.budget` evaluations.
pub fn sample<G: Game + ?Sized>(cfg: &SamplerConfig, game: &G) -> Result<SampleBatch> {
    let d = game.num_players();
    if cfg.num_players() != d {
        return Err(Error::DimensionMismatch { expected: d, found: cfg.num_players() });
    }
    validate_distribution(cfg.size_distribution(), cfg.paired)?;
    let max_budget = if d >= 127 { u128::MAX } else { 1u128 << d };
    if cfg.budget < 3 || cfg.budget as u128 > max_budget {
        return Err(Error::Budget { budget: cfg.budget, min: 3, max: max_budget });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let empty = Coalition::empty(d)?;
    let full = Coalition::full(d)?;
    let empty_value = game.evaluate(&empty)?;
    let full_value = game.evaluate(&full)?;

    let mut remaining = cfg.budget - 2;
    let mut q = cfg.size_distribution().to_vec();
    let mut enumerated = BTreeSet::new();
    let mut rows: Vec<SampleRow> = Vec::with_capacity(remaining);
    let mut strata = Strata::new(d);

    // Border trick: enumerate sizes, extremes first, while the expected
    // number of draws covers the whole stratum.
    loop {
        let mut candidates: Vec<usize> = (1..d).filter(|s| q[*s] > 0.0 && !enumerated.contains(s)).collect();
        candidates.sort_by_key(|&s| (binomial(d, s), s));
        let mut fired = None;
        for &s in &candidates {
            let group: Vec<usize> = if cfg.paired && d - s != s { vec![s, d - s] } else { vec![s] };
            let needed: f64 = group.iter().map(|&g| binomial_f64(d, g)).sum();
            let mass: f64 = group.iter().map(|&g| q[g]).sum();
            if remaining as f64 * mass >= needed {
                fired = Some(group);
                break;
            }
        }
        let Some(group) = fired else { break };
        for &s in &group {
            let weight = shapley_weight(s, d)?.sqrt();
            for c in enumerate_subsets(d, s)? {
                let value = game.evaluate(&c)?;
                strata.mark(c);
                rows.push(SampleRow { coalition: c, weight, value });
            }
            remaining -= binomial(d, s) as usize;
            enumerated.insert(s);
            q[s] = 0.0;
        }
        let mass: f64 = q.iter().sum();
        if mass > 0.0 {
            q.iter_mut().for_each(|p| *p /= mass);
        }
    }

    if remaining > 0 {
        let sizes: Vec<usize> = (1..d).filter(|s| q[*s] > 0.0).collect();
        if sizes.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "{remaining} evaluations left but the size distribution has no unenumerated sizes"
            )));
        }
        let mut weights: Vec<f64> = sizes.iter().map(|&s| q[s]).collect();
        let n = remaining as f64;
        let row_weight = |s: usize| -> Result<f64> {
            let p = n * q[s] / binomial_f64(d, s);
            Ok((shapley_weight(s, d)? / p).sqrt())
        };
        let pairs = if cfg.paired { remaining / 2 } else { 0 };
        let singles = remaining - 2 * pairs;

        for draw in 0..pairs + singles {
            let dist = WeightedIndex::new(&weights).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            let s = loop {
                let s = sizes[dist.sample(&mut rng)];
                if !strata.is_exhausted(s) {
                    break s;
                }
            };
            let c = strata.draw(s, &mut rng);
            strata.mark(c);
            rows.push(SampleRow { coalition: c, weight: row_weight(s)?, value: game.evaluate(&c)? });
            if draw < pairs {
                let comp = c.complement();
                strata.mark(comp);
                rows.push(SampleRow { coalition: comp, weight: row_weight(d - s)?, value: game.evaluate(&comp)? });
            }
            // Retire exhausted sizes so the rejection loop above stays short.
            for (i, &size) in sizes.iter().enumerate() {
                if strata.is_exhausted(size) {
                    weights[i] = 0.0;
                }
            }
        }
    }

    Ok(SampleBatch {
        players: d,
        empty_value,
        full_value,
        rows,
        enumerated_sizes: enumerated,
        paired: cfg.paired,
        unpaired_leftover: cfg.paired && remaining % 2 == 1,
    })
}

/// Leverage scores of the exact (all `2^d` rows, `sqrt(μ)`-weighted) design
/// projected off the all-ones direction.
#[derive(Debug, Clone, PartialEq)]
pub struct LeverageScores {
    /// Score of a coalition of size `s`, for `s = 0..=d`.
    pub per_size: Vec<f64>,
    /// Largest spread of scores within one size.
    pub max_within_size_deviation: f64,
    /// `Σ_S ℓ_S`, which equals `rank`.
    pub total: f64,
    pub rank: usize,
}

/// Brute-force leverage scores over all coalitions (`d <= 14`).
/// Fails with [`Error::NotSizeSymmetric`] if scores vary within a size by more than `1e-8`.
pub fn leverage_scores_bruteforce(frontier: &InteractionFrontier) -> Result<LeverageScores> {
    let d = frontier.num_players();
    if d > 14 {
        return Err(Error::TooLarge { d, max: 14 });
    }
    if d < 2 {
        return Err(Error::InvalidDimension("leverage scores need d >= 2".into()));
    }
    let columns = frontier.columns();
    let k = columns.len();
    let n_rows = 1usize << d;

    // Projected rows [X P]_S; ℓ_S is the squared norm of row S of the
    // left singular vectors that span the column space.
    let mut indicator = Mat::<f64>::zeros(n_rows, k);
    for bits in 0..n_rows {
        let s = Coalition::from_bits(d, bits as u128)?;
        let w = shapley_weight(s.size(), d)?.sqrt();
        if w == 0.0 {
            continue;
        }
        for (j, col) in columns.iter().enumerate() {
            if col.is_subset_of(&s) {
                indicator[(bits, j)] = w;
            }
        }
    }
    let xp = Mat::from_fn(n_rows, k, |i, j| {
        let mean = (0..k).map(|t| indicator[(i, t)]).sum::<f64>() / k as f64;
        indicator[(i, j)] - mean
    });
    let svd = xp.thin_svd().map_err(|e| Error::InvalidArgument(format!("SVD failed: {e:?}")))?;
    let (u, sigma) = (svd.U(), svd.S().column_vector());
    let sigma_max = (0..sigma.nrows()).map(|i| sigma[i]).fold(0.0f64, f64::max);
    let cutoff = sigma_max * n_rows.max(k) as f64 * f64::EPSILON;
    let kept: Vec<usize> = (0..sigma.nrows()).filter(|&i| sigma[i] > cutoff).collect();
    let rank = kept.len();
    let per_row: Vec<f64> = (0..n_rows).map(|r| kept.iter().map(|&i| u[(r, i)].powi(2)).sum()).collect();

    let mut per_size = vec![f64::NAN; d + 1];
    let mut lo = vec![f64::INFINITY; d + 1];
    let mut hi = vec![f64::NEG_INFINITY; d + 1];
    for (bits, &score) in per_row.iter().enumerate() {
        let s = (bits as u128).count_ones() as usize;
        lo[s] = lo[s].min(score);
        hi[s] = hi[s].max(score);
    }
    let mut max_dev = 0.0f64;
    for s in 0..=d {
        let dev = hi[s] - lo[s];
        if dev > 1e-8 {
            return Err(Error::NotSizeSymmetric { size: s, deviation: dev });
        }
        max_dev = max_dev.max(dev);
        per_size[s] = 0.5 * (hi[s] + lo[s]);
    }
    Ok(LeverageScores {
        per_size,
        max_within_size_deviation: max_dev,
        total: per_row.iter().sum(),
        rank,
    })
}
