//! Coalitions of players, exact binomial coefficients and the Shapley kernel.
//!
//! A [`Coalition`] is a subset of the players `{0, .., d-1}` stored as a
//! 128-bit mask, so games with up to [`MAX_PLAYERS`] players are supported.
//! Player `i` is present iff bit `i` is set. The textual form is a bitstring
//! of length `d` with player 0 leftmost: `"1010"` is `{0, 2}` for `d = 4`.

use std::fmt;
use std::sync::OnceLock;

use crate::error::{Error, Result};

pub const MAX_PLAYERS: usize = 128;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Coalition {
    bits: u128,
    players: u8,
}

fn full_mask(d: usize) -> u128 {
    if d >= 128 {
        u128::MAX
    } else {
        (1u128 << d) - 1
    }
}

fn check_players(d: usize) -> Result<()> {
    if d == 0 || d > MAX_PLAYERS {
        return Err(Error::InvalidDimension(format!(
            "player count must lie in 1..={MAX_PLAYERS}, got {d}"
        )));
    }
    Ok(())
}

impl Coalition {
    pub fn empty(d: usize) -> Result<Self> {
        check_players(d)?;
        Ok(Coalition { bits: 0, players: d as u8 })
    }

    pub fn full(d: usize) -> Result<Self> {
        check_players(d)?;
        Ok(Coalition { bits: full_mask(d), players: d as u8 })
    }

    /// Builds a coalition from a raw mask; bits at positions `>= d` are rejected.
    pub fn from_bits(d: usize, bits: u128) -> Result<Self> {
        check_players(d)?;
        if bits & !full_mask(d) != 0 {
            return Err(Error::InvalidArgument(format!(
                "mask {bits:#x} has bits beyond player count {d}"
            )));
        }
        Ok(Coalition { bits, players: d as u8 })
    }

    pub fn from_players<I>(d: usize, members: I) -> Result<Self>
    where
        I: IntoIterator<Item = usize>,
    {
        check_players(d)?;
        let mut bits = 0u128;
        for i in members {
            if i >= d {
                return Err(Error::InvalidArgument(format!(
                    "player {i} out of range for d = {d}"
                )));
            }
            bits |= 1u128 << i;
        }
        Ok(Coalition { bits, players: d as u8 })
    }

    /// Parses the bitstring form (`'1'` = present, player 0 leftmost).
    pub fn parse_bitstring(s: &str) -> Result<Self> {
        let d = s.len();
        check_players(d)?;
        let mut bits = 0u128;
        for (i, ch) in s.chars().enumerate() {
            match ch {
                '1' => bits |= 1u128 << i,
                '0' => {}
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "unexpected character {other:?} in coalition bitstring {s:?}"
                    )))
                }
            }
        }
        Ok(Coalition { bits, players: d as u8 })
    }

    pub fn to_bitstring(&self) -> String {
        (0..self.num_players())
            .map(|i| if self.contains(i) { '1' } else { '0' })
            .collect()
    }

    #[inline]
    pub fn bits(&self) -> u128 {
        self.bits
    }

    #[inline]
    pub fn num_players(&self) -> usize {
        self.players as usize
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.bits.count_ones() as usize
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.bits == 0
    }

    #[inline]
    pub fn is_full(&self) -> bool {
        self.bits == full_mask(self.num_players())
    }

    #[inline]
    pub fn contains(&self, player: usize) -> bool {
        player < self.num_players() && (self.bits >> player) & 1 == 1
    }

    /// `self ⊆ other`. Both must share the player count.
    #[inline]
    pub fn is_subset_of(&self, other: &Coalition) -> bool {
        debug_assert_eq!(self.players, other.players);
        self.bits & !other.bits == 0
    }

    pub fn with(&self, player: usize) -> Coalition {
        assert!(player < self.num_players(), "player {player} out of range");
        Coalition { bits: self.bits | (1u128 << player), players: self.players }
    }

    pub fn without(&self, player: usize) -> Coalition {
        assert!(player < self.num_players(), "player {player} out of range");
        Coalition { bits: self.bits & !(1u128 << player), players: self.players }
    }

    pub fn union(&self, other: &Coalition) -> Coalition {
        debug_assert_eq!(self.players, other.players);
        Coalition { bits: self.bits | other.bits, players: self.players }
    }

    pub fn intersection(&self, other: &Coalition) -> Coalition {
        debug_assert_eq!(self.players, other.players);
        Coalition { bits: self.bits & other.bits, players: self.players }
    }

    pub fn complement(&self) -> Coalition {
        Coalition { bits: !self.bits & full_mask(self.num_players()), players: self.players }
    }

    /// Member players in increasing order.
    pub fn members(&self) -> impl Iterator<Item = usize> + '_ {
        let mut rest = self.bits;
        std::iter::from_fn(move || {
            if rest == 0 {
                None
            } else {
                let i = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(i)
            }
        })
    }

    /// Applies a player relabeling: player `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Coalition {
        assert_eq!(perm.len(), self.num_players());
        let bits = self.members().fold(0u128, |acc, i| acc | (1u128 << perm[i]));
        Coalition { bits, players: self.players }
    }
}

impl fmt::Display for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_bitstring())
    }
}

impl fmt::Debug for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Coalition({})", self.to_bitstring())
    }
}

/// Exact binomial coefficients `C(n, k)` for `n <= max_n`, filled by Pascal's rule.
#[derive(Debug, Clone)]
pub struct BinomialTable {
    rows: Vec<Vec<u128>>,
}

impl BinomialTable {
    pub fn new(max_n: usize) -> Self {
        let mut rows: Vec<Vec<u128>> = Vec::with_capacity(max_n + 1);
        for n in 0..=max_n {
            let mut row = vec![1u128; n + 1];
            for k in 1..n {
                row[k] = rows[n - 1][k - 1] + rows[n - 1][k];
            }
            rows.push(row);
        }
        BinomialTable { rows }
    }

    pub fn max_n(&self) -> usize {
        self.rows.len() - 1
    }

    /// `C(n, k)`, zero when `k > n`.
    pub fn get(&self, n: usize, k: usize) -> u128 {
        if k > n {
            0
        } else {
            self.rows[n][k]
        }
    }
}

fn table() -> &'static BinomialTable {
    static TABLE: OnceLock<BinomialTable> = OnceLock::new();
    TABLE.get_or_init(|| BinomialTable::new(MAX_PLAYERS))
}

/// `C(n, k)` for `n <= 128`.
pub fn binomial(n: usize, k: usize) -> u128 {
    table().get(n, k)
}

pub fn binomial_f64(n: usize, k: usize) -> f64 {
    binomial(n, k) as f64
}

/// Shapley kernel weight `1 / C(d-2, s-1)` for `0 < s < d`, zero at `s = 0` and `s = d`.
pub fn shapley_weight(s: usize, d: usize) -> Result<f64> {
    if !(2..=MAX_PLAYERS).contains(&d) {
        return Err(Error::InvalidDimension(format!(
            "the Shapley kernel needs 2 <= d <= {MAX_PLAYERS}, got {d}"
        )));
    }
    if s > d {
        return Err(Error::InvalidArgument(format!("coalition size {s} exceeds d = {d}")));
    }
    if s == 0 || s == d {
        return Ok(0.0);
    }
    Ok(1.0 / binomial_f64(d - 2, s - 1))
}

/// All coalitions of `size` players out of `d`, in colexicographic order.
pub fn enumerate_subsets(d: usize, size: usize) -> Result<SubsetIter> {
    check_players(d)?;
    if size > d {
        return Err(Error::InvalidArgument(format!("subset size {size} exceeds d = {d}")));
    }
    let first = if size == 0 { 0 } else { full_mask(size) };
    Ok(SubsetIter { d: d as u8, next: first, remaining: binomial(d, size) })
}

/// Colex iterator over fixed-size subsets (Gosper's hack).
#[derive(Debug, Clone)]
pub struct SubsetIter {
    d: u8,
    next: u128,
    remaining: u128,
}

impl Iterator for SubsetIter {
    type Item = Coalition;

    fn next(&mut self) -> Option<Coalition> {
        if self.remaining == 0 {
            return None;
        }
        let current = self.next;
        self.remaining -= 1;
        if self.remaining > 0 {
            let t = current | (current - 1);
            let low = (!t & t.wrapping_add(1)).wrapping_sub(1);
            self.next = t.wrapping_add(1) | (low >> (current.trailing_zeros() + 1));
        }
        Some(Coalition { bits: current, players: self.d })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = usize::try_from(self.remaining).unwrap_or(usize::MAX);
        (n, usize::try_from(self.remaining).ok())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashSet;

    #[test]
    fn shapley_weight_values() {
        assert_eq!(shapley_weight(1, 4).unwrap(), 1.0);
        assert_eq!(shapley_weight(2, 4).unwrap(), 0.5);
        assert_eq!(shapley_weight(0, 4).unwrap(), 0.0);
        assert_eq!(shapley_weight(4, 4).unwrap(), 0.0);
        assert!(matches!(shapley_weight(0, 1), Err(Error::InvalidDimension(_))));
        assert!(shapley_weight(5, 4).is_err());
    }

    #[test]
    fn shapley_weight_complement_symmetry() {
        for d in 2..=40 {
            for s in 0..=d {
                assert_eq!(shapley_weight(s, d).unwrap(), shapley_weight(d - s, d).unwrap());
            }
        }
    }

    #[test]
    fn enumerate_small_cases() {
        let empty: Vec<_> = enumerate_subsets(3, 0).unwrap().collect();
        assert_eq!(empty, vec![Coalition::empty(3).unwrap()]);

        let pairs: Vec<String> = enumerate_subsets(3, 2).unwrap().map(|c| c.to_bitstring()).collect();
        assert_eq!(pairs, vec!["110", "101", "011"]);

        let triples: Vec<_> = enumerate_subsets(5, 3).unwrap().collect();
        assert_eq!(triples.len(), 10);
        assert!(triples.iter().all(|c| c.size() == 3));
        assert_eq!(triples.iter().collect::<HashSet<_>>().len(), 10);
        assert!(triples.windows(2).all(|w| w[0].bits() < w[1].bits()));

        assert!(enumerate_subsets(3, 4).is_err());
    }

    #[test]
    fn enumerate_at_full_capacity() {
        let all: Vec<_> = enumerate_subsets(128, 127).unwrap().collect();
        assert_eq!(all.len(), 128);
        assert_eq!(all.last().unwrap().bits(), u128::MAX - 1);
        assert_eq!(enumerate_subsets(128, 128).unwrap().count(), 1);
    }

    #[test]
    fn binomial_table_pascal() {
        let t = BinomialTable::new(128);
        for n in 1..=128 {
            assert_eq!(t.get(n, 0), 1);
            assert_eq!(t.get(n, n), 1);
            for k in 1..n {
                assert_eq!(t.get(n, k), t.get(n - 1, k - 1) + t.get(n - 1, k));
            }
        }
        assert!(t.get(126, 63) > u64::MAX as u128);
        assert_eq!(binomial(10, 3), 120);
        assert_eq!(binomial(3, 5), 0);
    }

    #[test]
    fn bitstring_form() {
        let c = Coalition::parse_bitstring("1010").unwrap();
        assert_eq!(c.members().collect::<Vec<_>>(), vec![0, 2]);
        assert_eq!(c.to_string(), "1010");
        assert!(Coalition::parse_bitstring("10a0").is_err());
        assert!(Coalition::parse_bitstring("").is_err());
        assert!(Coalition::from_players(3, [3]).is_err());
        assert!(Coalition::from_bits(3, 0b1000).is_err());
    }

    proptest! {
        #[test]
        fn complement_laws(d in 1usize..=128, raw in any::<u128>()) {
            let c = Coalition::from_bits(d, raw & full_mask(d)).unwrap();
            let full = Coalition::full(d).unwrap();
            prop_assert_eq!(c.complement().union(&c), full);
            prop_assert_eq!(c.complement().complement(), c);
            prop_assert!(c.size() <= d);
            prop_assert_eq!(c.size() + c.complement().size(), d);
            prop_assert_eq!(Coalition::parse_bitstring(&c.to_bitstring()).unwrap(), c);
        }
    }
}
