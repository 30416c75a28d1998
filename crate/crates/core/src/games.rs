//! Cooperative games: the [`Game`] trait, evaluation counting, Möbius-form
//! synthetic games and table-backed games loaded from disk.
//!
//! File formats (line oriented, `#` starts a comment line):
//!
//! ```text
//! d=3
//! 000,0.0
//! 100,1.5
//! 110,2.25
//! ```
//!
//! A `.game` file lists game values `ν(S)`; a `.mobius` file lists Möbius
//! coefficients `m(T)` with `ν(S) = Σ_{T ⊆ S} m(T)`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::coalition::{binomial, enumerate_subsets, Coalition, MAX_PLAYERS};
use crate::error::{Error, Result};

/// A set function `ν: 2^D → ℝ`. Evaluation must be deterministic.
pub trait Game: Send + Sync {
    fn num_players(&self) -> usize;

    fn evaluate(&self, coalition: &Coalition) -> Result<f64>;
}

impl<G: Game + ?Sized> Game for &G {
    fn num_players(&self) -> usize {
        (**self).num_players()
    }

    fn evaluate(&self, coalition: &Coalition) -> Result<f64> {
        (**self).evaluate(coalition)
    }
}

impl<G: Game + ?Sized> Game for Box<G> {
    fn num_players(&self) -> usize {
        (**self).num_players()
    }

    fn evaluate(&self, coalition: &Coalition) -> Result<f64> {
        (**self).evaluate(coalition)
    }
}

impl<G: Game + ?Sized> Game for Arc<G> {
    fn num_players(&self) -> usize {
        (**self).num_players()
    }

    fn evaluate(&self, coalition: &Coalition) -> Result<f64> {
        (**self).evaluate(coalition)
    }
}

pub(crate) fn check_dims(game: &impl Game, coalition: &Coalition) -> Result<()> {
    if coalition.num_players() != game.num_players() {
        return Err(Error::DimensionMismatch {
            expected: game.num_players(),
            found: coalition.num_players(),
        });
    }
    Ok(())
}

/// Wraps a game and counts every `evaluate` call, failed lookups included.
#[derive(Debug)]
pub struct CountingGame<G> {
    inner: G,
    calls: AtomicU64,
}

impl<G: Game> CountingGame<G> {
    pub fn new(inner: G) -> Self {
        CountingGame { inner, calls: AtomicU64::new(0) }
    }

    pub fn evaluations(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.calls.store(0, Ordering::Relaxed);
    }

    pub fn inner(&self) -> &G {
        &self.inner
    }

    pub fn into_inner(self) -> G {
        self.inner
    }
}

impl<G: Game> Game for CountingGame<G> {
    fn num_players(&self) -> usize {
        self.inner.num_players()
    }

    fn evaluate(&self, coalition: &Coalition) -> Result<f64> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.evaluate(coalition)
    }
}

/// A game defined by a closure.
pub struct FnGame<F> {
    players: usize,
    f: F,
}

impl<F> FnGame<F>
where
    F: Fn(&Coalition) -> f64 + Send + Sync,
{
    pub fn new(players: usize, f: F) -> Result<Self> {
        if players == 0 || players > MAX_PLAYERS {
            return Err(Error::InvalidDimension(format!("player count {players}")));
        }
        Ok(FnGame { players, f })
    }
}

impl<F> Game for FnGame<F>
where
    F: Fn(&Coalition) -> f64 + Send + Sync,
{
    fn num_players(&self) -> usize {
        self.players
    }

    fn evaluate(&self, coalition: &Coalition) -> Result<f64> {
        check_dims(self, coalition)?;
        Ok((self.f)(coalition))
    }
}

/// A game given by its Möbius coefficients, `ν(S) = Σ_{T ⊆ S} m(T)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MobiusGame {
    players: usize,
    terms: BTreeMap<Coalition, f64>,
}

impl MobiusGame {
    pub fn new<I>(players: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Coalition, f64)>,
    {
        if players == 0 || players > MAX_PLAYERS {
            return Err(Error::InvalidDimension(format!("player count {players}")));
        }
        let mut map = BTreeMap::new();
        for (t, m) in terms {
            if t.num_players() != players {
                return Err(Error::DimensionMismatch { expected: players, found: t.num_players() });
            }
            if !m.is_finite() {
                return Err(Error::NonFinite("Möbius coefficient"));
            }
            if map.insert(t, m).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate Möbius term {t}")));
            }
        }
        Ok(MobiusGame { players, terms: map })
    }

    /// Draws `n_terms` distinct terms of size `1..=max_order` with standard
    /// normal coefficients. Each term picks its size uniformly among the sizes
    /// that still have unused coalitions, then a coalition of that size
    /// uniformly among the unused ones.
    pub fn random(d: usize, max_order: usize, n_terms: usize, seed: u64) -> Result<Self> {
        if d == 0 || d > MAX_PLAYERS {
            return Err(Error::InvalidDimension(format!("player count {d}")));
        }
        if max_order == 0 || max_order > d {
            return Err(Error::InvalidArgument(format!(
                "max_order must lie in 1..={d}, got {max_order}"
            )));
        }
        if n_terms == 0 {
            return Err(Error::InvalidArgument("n_terms must be at least 1".into()));
        }
        let available: u128 = (1..=max_order).fold(0u128, |acc, s| acc.saturating_add(binomial(d, s)));
        if (n_terms as u128) > available {
            return Err(Error::InvalidArgument(format!(
                "{n_terms} terms requested but only {available} coalitions of size 1..={max_order} exist"
            )));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut used: HashSet<Coalition> = HashSet::with_capacity(n_terms);
        let mut used_per_size = vec![0u128; max_order + 1];
        let mut terms = Vec::with_capacity(n_terms);
        for _ in 0..n_terms {
            let open: Vec<usize> = (1..=max_order).filter(|&s| used_per_size[s] < binomial(d, s)).collect();
            let size = open[rng.random_range(0..open.len())];
            let term = draw_unused(d, size, &used, &mut rng);
            used.insert(term);
            used_per_size[size] += 1;
            let coefficient: f64 = rng.sample(StandardNormal);
            terms.push((term, coefficient));
        }
        MobiusGame::new(d, terms)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Coalition, &f64)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn max_order(&self) -> usize {
        self.terms.keys().map(Coalition::size).max().unwrap_or(0)
    }

    /// `Σ_{T ⊆ s} m(T)` without the dimension check.
    pub fn value_of(&self, s: &Coalition) -> f64 {
        self.terms
            .iter()
            .filter(|(t, _)| t.is_subset_of(s))
            .map(|(_, m)| m)
            .sum::<f64>()
            + 0.0
    }

    /// Exact Shapley values, `φ_i = Σ_{T ∋ i} m(T) / |T|`.
    pub fn exact_shapley(&self) -> Vec<f64> {
        let mut phi = vec![0.0; self.players];
        for (t, m) in &self.terms {
            let size = t.size();
            if size == 0 {
                continue;
            }
            let share = m / size as f64;
            for i in t.members() {
                phi[i] += share;
            }
        }
        phi
    }

    pub fn to_text(&self) -> String {
        let mut rows: Vec<_> = self.terms.iter().collect();
        rows.sort_by_key(|(t, _)| (t.size(), t.bits()));
        write_table(self.players, rows.into_iter().map(|(t, m)| (*t, *m)))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (d, rows) = parse_table(text)?;
        MobiusGame::new(d, rows)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        MobiusGame::parse(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

impl Game for MobiusGame {
    fn num_players(&self) -> usize {
        self.players
    }

    fn evaluate(&self, coalition: &Coalition) -> Result<f64> {
        check_dims(self, coalition)?;
        Ok(self.value_of(coalition))
    }
}

fn draw_unused(d: usize, size: usize, used: &HashSet<Coalition>, rng: &mut impl Rng) -> Coalition {
    // Small strata are scanned; large ones use rejection.
    if binomial(d, size) <= 4096 {
        let free: Vec<Coalition> = enumerate_subsets(d, size)
            .expect("size <= d")
            .filter(|c| !used.contains(c))
            .collect();
        return free[rng.random_range(0..free.len())];
    }
    loop {
        let members = index::sample(rng, d, size);
        let c = Coalition::from_players(d, members.iter()).expect("indices < d");
        if !used.contains(&c) {
            return c;
        }
    }
}

/// A game answering from a precomputed (possibly partial) value table.
#[derive(Debug, Clone, PartialEq)]
pub struct LookupGame {
    players: usize,
    table: HashMap<Coalition, f64>,
}

impl LookupGame {
    pub fn new<I>(players: usize, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Coalition, f64)>,
    {
        if players == 0 || players > MAX_PLAYERS {
            return Err(Error::InvalidDimension(format!("player count {players}")));
        }
        let mut table = HashMap::new();
        for (c, v) in rows {
            if c.num_players() != players {
                return Err(Error::DimensionMismatch { expected: players, found: c.num_players() });
            }
            if table.insert(c, v).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate coalition {c}")));
            }
        }
        Ok(LookupGame { players, table })
    }

    /// Evaluates `game` on all `2^d` coalitions (`d <= 24`).
    pub fn tabulate(game: &impl Game) -> Result<Self> {
        let d = game.num_players();
        if d > 24 {
            return Err(Error::TooLarge { d, max: 24 });
        }
        let mut rows = Vec::with_capacity(1 << d);
        for bits in 0..(1u128 << d) {
            let c = Coalition::from_bits(d, bits)?;
            rows.push((c, game.evaluate(&c)?));
        }
        LookupGame::new(d, rows)
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.players < 128 && self.table.len() as u128 == 1u128 << self.players
    }

    pub fn to_text(&self) -> String {
        let mut rows: Vec<_> = self.table.iter().map(|(c, v)| (*c, *v)).collect();
        rows.sort_by_key(|(c, _)| c.bits());
        write_table(self.players, rows.into_iter())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (d, rows) = parse_table(text)?;
        LookupGame::new(d, rows)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        LookupGame::parse(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

impl Game for LookupGame {
    fn num_players(&self) -> usize {
        self.players
    }

    fn evaluate(&self, coalition: &Coalition) -> Result<f64> {
        check_dims(self, coalition)?;
        self.table
            .get(coalition)
            .copied()
            .ok_or_else(|| Error::LookupMiss(coalition.to_bitstring()))
    }
}

/// Either file-backed game kind.
#[derive(Debug, Clone)]
pub enum FileGame {
    Lookup(LookupGame),
    Mobius(MobiusGame),
}

impl FileGame {
    /// Loads a `.mobius` file as a [`MobiusGame`] and anything else as a [`LookupGame`].
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if path.extension().is_some_and(|e| e == "mobius") {
            Ok(FileGame::Mobius(MobiusGame::load(path)?))
        } else {
            Ok(FileGame::Lookup(LookupGame::load(path)?))
        }
    }
}

impl Game for FileGame {
    fn num_players(&self) -> usize {
        match self {
            FileGame::Lookup(g) => g.num_players(),
            FileGame::Mobius(g) => g.num_players(),
        }
    }

    fn evaluate(&self, coalition: &Coalition) -> Result<f64> {
        match self {
            FileGame::Lookup(g) => g.evaluate(coalition),
            FileGame::Mobius(g) => g.evaluate(coalition),
        }
    }
}

fn write_table(d: usize, rows: impl Iterator<Item = (Coalition, f64)>) -> String {
    let mut out = format!("d={d}\n");
    for (c, v) in rows {
        // `{:?}` round-trips f64 exactly.
        let _ = writeln!(out, "{},{:?}", c.to_bitstring(), v);
    }
    out
}

fn parse_table(text: &str) -> Result<(usize, Vec<(Coalition, f64)>)> {
    let mut d: Option<usize> = None;
    let mut rows = Vec::new();
    let mut seen = HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |message: String| Error::Parse { line: line_no, message };
        let Some(players) = d else {
            let value = line
                .strip_prefix("d=")
                .ok_or_else(|| parse_err(format!("expected header `d=<int>`, found {line:?}")))?;
            let players: usize = value
                .trim()
                .parse()
                .map_err(|_| parse_err(format!("invalid player count {value:?}")))?;
            if players == 0 || players > MAX_PLAYERS {
                return Err(parse_err(format!("player count {players} out of range 1..={MAX_PLAYERS}")));
            }
            d = Some(players);
            continue;
        };
        let (bits, value) = line
            .split_once(',')
            .ok_or_else(|| parse_err(format!("expected `<bitstring>,<float>`, found {line:?}")))?;
        let bits = bits.trim();
        if bits.len() != players {
            return Err(parse_err(format!("bitstring {bits:?} does not have length {players}")));
        }
        let c = Coalition::parse_bitstring(bits).map_err(|e| parse_err(e.to_string()))?;
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|_| parse_err(format!("invalid number {:?}", value.trim())))?;
        if !v.is_finite() {
            return Err(parse_err(format!("non-finite value {v}")));
        }
        if !seen.insert(c) {
            return Err(parse_err(format!("duplicate coalition {bits}")));
        }
        rows.push((c, v));
    }
    let d = d.ok_or(Error::Parse { line: 0, message: "missing `d=<int>` header".into() })?;
    Ok((d, rows))
}
