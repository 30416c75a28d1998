//! Interaction frontiers: the interaction terms (coalitions of size >= 2)
//! that become extra regression columns next to the `d` singletons.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coalition::{binomial, enumerate_subsets, Coalition, MAX_PLAYERS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteractionFrontier {
    players: usize,
    terms: Vec<Coalition>,
    label: String,
}

impl InteractionFrontier {
    /// Validates and canonically orders `terms` (by size, then colex).
    pub fn new(players: usize, mut terms: Vec<Coalition>, label: impl Into<String>) -> Result<Self> {
        if players == 0 || players > MAX_PLAYERS {
            return Err(Error::InvalidDimension(format!("player count {players}")));
        }
        for t in &terms {
            if t.num_players() != players {
                return Err(Error::DimensionMismatch { expected: players, found: t.num_players() });
            }
            if t.size() < 2 {
                return Err(Error::InvalidArgument(format!("interaction term {t} has fewer than 2 players")));
            }
        }
        terms.sort_by_key(|t| (t.size(), t.bits()));
        if let Some(w) = terms.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument(format!("duplicate interaction term {}", w[0])));
        }
        Ok(InteractionFrontier { players, terms, label: label.into() })
    }

    /// The empty frontier; PolySHAP with it is KernelSHAP.
    pub fn empty(players: usize) -> Result<Self> {
        InteractionFrontier::new(players, Vec::new(), "k=1")
    }

    /// All interactions of size `2..=k`.
    pub fn k_additive(d: usize, k: usize) -> Result<Self> {
        if k == 0 || k > d {
            return Err(Error::InvalidArgument(format!("order k must lie in 1..={d}, got {k}")));
        }
        let mut terms = Vec::new();
        for size in 2..=k {
            terms.extend(enumerate_subsets(d, size)?);
        }
        InteractionFrontier::new(d, terms, format!("k={k}"))
    }

    /// Exactly `ell` terms: the largest k-additive frontier that fits, topped
    /// up with random terms of the next order.
    pub fn partial(d: usize, ell: usize, seed: u64) -> Result<Self> {
        if d == 0 || d > MAX_PLAYERS {
            return Err(Error::InvalidDimension(format!("player count {d}")));
        }
        let max_terms = if d >= 127 { u128::MAX } else { (1u128 << d) - d as u128 - 2 };
        if ell as u128 > max_terms {
            return Err(Error::InvalidArgument(format!(
                "ell = {ell} exceeds the {max_terms} available interaction terms"
            )));
        }
        let mut covered = 0u128;
        let mut k = 1;
        while k < d && covered + binomial(d, k + 1) <= ell as u128 {
            covered += binomial(d, k + 1);
            k += 1;
        }
        let extra = ell as u128 - covered;
        let mut terms = Vec::with_capacity(ell);
        for size in 2..=k {
            terms.extend(enumerate_subsets(d, size)?);
        }
        if extra > 0 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            terms.extend(reservoir(d, k + 1, extra as usize, &mut rng)?);
        }
        InteractionFrontier::new(d, terms, format!("partial={ell}"))
    }

    /// The `(k-1)`-additive frontier plus `⌊fraction · C(d, k)⌋` random order-k terms.
    pub fn percent_of_order(d: usize, k: usize, fraction: f64, seed: u64) -> Result<Self> {
        if k < 2 || k > d {
            return Err(Error::InvalidArgument(format!("order k must lie in 2..={d}, got {k}")));
        }
        if !(0.0..=1.0).contains(&fraction) {
            return Err(Error::InvalidArgument(format!("fraction {fraction} outside [0, 1]")));
        }
        let count = (fraction * binomial(d, k) as f64).floor() as usize;
        let mut terms = Vec::new();
        for size in 2..k {
            terms.extend(enumerate_subsets(d, size)?);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        terms.extend(reservoir(d, k, count, &mut rng)?);
        let percent = fraction * 100.0;
        InteractionFrontier::new(d, terms, format!("k={k}@{percent}%"))
    }

    /// All pairs plus `min(⌊d · ln C(d, 3)⌋, C(d, 3))` random triples.
    pub fn log_frontier(d: usize, seed: u64) -> Result<Self> {
        if !(4..=MAX_PLAYERS).contains(&d) {
            return Err(Error::InvalidArgument(format!("the log frontier needs d >= 4, got {d}")));
        }
        let triples = binomial(d, 3);
        let wanted = (d as f64 * (triples as f64).ln()).floor() as u128;
        let count = wanted.min(triples) as usize;
        let mut terms: Vec<Coalition> = enumerate_subsets(d, 2)?.collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        terms.extend(reservoir(d, 3, count, &mut rng)?);
        InteractionFrontier::new(d, terms, "log")
    }

    pub fn num_players(&self) -> usize {
        self.players
    }

    pub fn terms(&self) -> &[Coalition] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Total regression columns `d' = d + |I|`.
    pub fn num_columns(&self) -> usize {
        self.players + self.terms.len()
    }

    /// All regression columns: singletons first, then the frontier terms.
    pub fn columns(&self) -> Vec<Coalition> {
        let mut cols: Vec<Coalition> = (0..self.players)
            .map(|i| Coalition::from_players(self.players, [i]).expect("i < d"))
            .collect();
        cols.extend_from_slice(&self.terms);
        cols
    }

    /// One bitstring per line, preceded by `d=` and `label=` header lines.
    pub fn to_text(&self) -> String {
        let mut out = format!("d={}\nlabel={}\n", self.players, self.label);
        for t in &self.terms {
            out.push_str(&t.to_bitstring());
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut players = None;
        let mut label = String::from("custom");
        let mut terms = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let err = |message: String| Error::Parse { line: idx + 1, message };
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(v) = line.strip_prefix("d=") {
                players = Some(v.parse::<usize>().map_err(|_| err(format!("invalid player count {v:?}")))?);
            } else if let Some(v) = line.strip_prefix("label=") {
                label = v.to_string();
            } else {
                let t = Coalition::parse_bitstring(line).map_err(|e| err(e.to_string()))?;
                terms.push(t);
            }
        }
        let players = players.ok_or(Error::Parse { line: 0, message: "missing `d=` header".into() })?;
        InteractionFrontier::new(players, terms, label)
    }
}

/// Uniform sample of `count` size-`k` coalitions without replacement,
/// by reservoir sampling over the colex enumeration. Output is colex ordered.
fn reservoir(d: usize, k: usize, count: usize, rng: &mut impl Rng) -> Result<Vec<Coalition>> {
    let total = binomial(d, k);
    if count as u128 > total {
        return Err(Error::InvalidArgument(format!("{count} terms requested but only {total} of order {k}")));
    }
    if count == 0 {
        return Ok(Vec::new());
    }
    let mut picked: Vec<Coalition> = Vec::with_capacity(count);
    for (seen, c) in enumerate_subsets(d, k)?.enumerate() {
        if seen < count {
            picked.push(c);
        } else {
            let j = rng.random_range(0..=seen);
            if j < count {
                picked[j] = c;
            }
        }
    }
    picked.sort_by_key(Coalition::bits);
    Ok(picked)
}

/// A frontier recipe as written on the command line or in a config file:
/// `k` (k-additive), `k@percent` (e.g. `3@50`), `log`, or `partial:ell`.
#[derive(Debug, Clone, PartialEq)]
pub enum FrontierSpec {
    Additive(usize),
    PercentOfOrder { k: usize, percent: f64 },
    Log,
    Partial(usize),
}

impl FrontierSpec {
    pub fn build(&self, d: usize, seed: u64) -> Result<InteractionFrontier> {
        match *self {
            FrontierSpec::Additive(1) => InteractionFrontier::empty(d),
            FrontierSpec::Additive(k) => InteractionFrontier::k_additive(d, k),
            FrontierSpec::PercentOfOrder { k, percent } => {
                InteractionFrontier::percent_of_order(d, k, percent / 100.0, seed)
            }
            FrontierSpec::Log => InteractionFrontier::log_frontier(d, seed),
            FrontierSpec::Partial(ell) => InteractionFrontier::partial(d, ell, seed),
        }
    }

    /// Column count `d'` without materializing the frontier.
    pub fn num_columns(&self, d: usize) -> u128 {
        let upto = |k: usize| (1..=k.min(d)).map(|s| binomial(d, s)).sum::<u128>();
        match *self {
            FrontierSpec::Additive(k) => upto(k),
            FrontierSpec::PercentOfOrder { k, percent } => {
                upto(k.saturating_sub(1)) + (percent / 100.0 * binomial(d, k) as f64).floor() as u128
            }
            FrontierSpec::Log => {
                let t = binomial(d, 3);
                upto(2) + ((d as f64 * (t as f64).ln()).floor() as u128).min(t)
            }
            FrontierSpec::Partial(ell) => d as u128 + ell as u128,
        }
    }
}

impl FromStr for FrontierSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidArgument(format!("unrecognized frontier spec {s:?}"));
        if s == "log" {
            return Ok(FrontierSpec::Log);
        }
        // Labels (`k=2`, `k=3@50%`, `partial=12`) parse back to their spec.
        if let Some(ell) = s.strip_prefix("partial:").or_else(|| s.strip_prefix("partial=")) {
            return ell.parse().map(FrontierSpec::Partial).map_err(|_| bad());
        }
        let s = s.strip_prefix("k=").unwrap_or(s);
        if let Some((k, pct)) = s.split_once('@') {
            let k: usize = k.parse().map_err(|_| bad())?;
            let percent: f64 = pct.trim_end_matches('%').parse().map_err(|_| bad())?;
            if k < 2 || !(0.0..=100.0).contains(&percent) {
                return Err(bad());
            }
            return Ok(FrontierSpec::PercentOfOrder { k, percent });
        }
        match s.parse::<usize>() {
            Ok(k) if k >= 1 => Ok(FrontierSpec::Additive(k)),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for FrontierSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FrontierSpec::Additive(k) => write!(f, "k={k}"),
            FrontierSpec::PercentOfOrder { k, percent } => write!(f, "k={k}@{percent}%"),
            FrontierSpec::Log => f.write_str("log"),
            FrontierSpec::Partial(ell) => write!(f, "partial={ell}"),
        }
    }
}
