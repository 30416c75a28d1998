//! Shapley value estimators: PolySHAP over an interaction frontier,
//! KernelSHAP (PolySHAP with no interaction terms) and permutation sampling.

use std::fmt;
use std::str::FromStr;

use faer::Mat;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coalition::{binomial, Coalition};
use crate::error::{Error, Result};
use crate::frontier::InteractionFrontier;
use crate::games::Game;
use crate::regression::{build_design, solve_constrained};
use crate::sampling::{sample, SampleBatch, SamplerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Polyshap,
    Kernelshap,
    Permutation,
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Estimator::Polyshap => "polyshap",
            Estimator::Kernelshap => "kernelshap",
            Estimator::Permutation => "permutation",
        })
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "polyshap" => Ok(Estimator::Polyshap),
            "kernelshap" => Ok(Estimator::Kernelshap),
            "permutation" => Ok(Estimator::Permutation),
            other => Err(Error::InvalidArgument(format!("unknown estimator {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Representation {
    /// Column terms as bitstrings, singletons first.
    pub terms: Vec<String>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub method: Estimator,
    pub budget_used: usize,
    pub seed: u64,
    pub paired: bool,
    pub rank: Option<usize>,
    pub rank_deficient: bool,
    pub enumerated_sizes: Vec<usize>,
    pub unpaired_leftover: bool,
    pub residual_norm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionResult {
    /// `ν(∅)`.
    pub baseline: f64,
    /// `ν(D)`.
    pub full_value: f64,
    pub shapley: Vec<f64>,
    pub frontier_label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub representation: Option<Representation>,
    pub diagnostics: Diagnostics,
}

impl AttributionResult {
    /// `|Σφ − (ν(D) − ν(∅))|` relative to `max(1, |ν(D) − ν(∅)|)`.
    pub fn efficiency_gap(&self) -> f64 {
        let target = self.full_value - self.baseline;
        let sum: f64 = self.shapley.iter().sum();
        (sum - target).abs() / target.abs().max(1.0)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }
}

/// `φ_i + Σ_{T ∋ i} φ_T / |T|` over the frontier terms.
pub fn polyshap_to_sv(rep: &[f64], frontier: &InteractionFrontier) -> Result<Vec<f64>> {
    let d = frontier.num_players();
    if rep.len() != frontier.num_columns() {
        return Err(Error::DimensionMismatch { expected: frontier.num_columns(), found: rep.len() });
    }
    let mut sv = rep[..d].to_vec();
    for (term, &value) in frontier.terms().iter().zip(&rep[d..]) {
        let share = value / term.size() as f64;
        for i in term.members() {
            sv[i] += share;
        }
    }
    Ok(sv)
}

/// `[M]_{i,S} = 1[i ∈ S] / |S|` over the columns of the 2-additive frontier.
pub fn m21_matrix(d: usize) -> Result<Mat<f64>> {
    let columns = InteractionFrontier::k_additive(d, 2)?.columns();
    Ok(Mat::from_fn(d, columns.len(), |i, j| {
        if columns[j].contains(i) {
            1.0 / columns[j].size() as f64
        } else {
            0.0
        }
    }))
}

/// Maps a 2-additive representation (singletons, then pairs in colex order)
/// to Shapley values.
pub fn project_2poly_to_sv(rep2: &[f64], d: usize) -> Result<Vec<f64>> {
    let expected = d + binomial(d, 2) as usize;
    if rep2.len() != expected {
        return Err(Error::DimensionMismatch { expected, found: rep2.len() });
    }
    let m = m21_matrix(d)?;
    Ok((0..d).map(|i| (0..expected).map(|j| m[(i, j)] * rep2[j]).sum()).collect())
}

fn check_budget(d: usize, budget: usize) -> Result<()> {
    let max = if d >= 127 { u128::MAX } else { 1u128 << d };
    if budget < d + 2 || budget as u128 > max {
        return Err(Error::Budget { budget, min: d + 2, max });
    }
    Ok(())
}

pub fn polyshap<G: Game + ?Sized>(game: &G, frontier: &InteractionFrontier, cfg: &SamplerConfig) -> Result<AttributionResult> {
    let d = game.num_players();
    if frontier.num_players() != d {
        return Err(Error::DimensionMismatch { expected: d, found: frontier.num_players() });
    }
    check_budget(d, cfg.budget)?;
    let batch = sample(cfg, game)?;
    let method = if frontier.is_empty() { Estimator::Kernelshap } else { Estimator::Polyshap };
    polyshap_from_batch(&batch, frontier, method, cfg.seed)
}

pub fn kernelshap<G: Game + ?Sized>(game: &G, cfg: &SamplerConfig) -> Result<AttributionResult> {
    polyshap(game, &InteractionFrontier::empty(game.num_players())?, cfg)
}

/// Fits a frontier on an existing batch, so several estimators can share one sample.
pub fn polyshap_from_batch(
    batch: &SampleBatch,
    frontier: &InteractionFrontier,
    method: Estimator,
    seed: u64,
) -> Result<AttributionResult> {
    let sys = build_design(batch, frontier)?;
    let report = solve_constrained(&sys)?;
    let shapley = polyshap_to_sv(&report.coefficients, frontier)?;
    Ok(AttributionResult {
        baseline: batch.empty_value,
        full_value: batch.full_value,
        shapley,
        frontier_label: frontier.label().to_string(),
        representation: Some(Representation {
            terms: sys.columns.iter().map(Coalition::to_bitstring).collect(),
            values: report.coefficients,
        }),
        diagnostics: Diagnostics {
            method,
            budget_used: batch.evaluations(),
            seed,
            paired: batch.paired,
            rank: Some(report.rank),
            rank_deficient: report.rank_deficient,
            enumerated_sizes: batch.enumerated_sizes.iter().copied().collect(),
            unpaired_leftover: batch.unpaired_leftover,
            residual_norm: Some(report.residual_norm),
        },
    })
}

/// Averages marginal contributions along `⌊(m − 1)/d⌋` random permutations.
/// `ν(∅)` and `ν(D)` are evaluated once, so a run spends `2 + P(d − 1)`
/// evaluations, which `budget_used` reports.
pub fn permutation_baseline<G: Game + ?Sized>(game: &G, budget: usize, seed: u64) -> Result<AttributionResult> {
    let d = game.num_players();
    if budget < d + 1 {
        return Err(Error::Budget { budget, min: d + 1, max: u128::MAX });
    }
    let permutations = (budget - 1) / d;
    let empty = Coalition::empty(d)?;
    let full = Coalition::full(d)?;
    let empty_value = game.evaluate(&empty)?;
    let full_value = game.evaluate(&full)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..d).collect();
    let mut totals = vec![0.0; d];
    let mut used = 2;
    for _ in 0..permutations {
        order.shuffle(&mut rng);
        let mut prefix = empty;
        let mut prev = empty_value;
        for (step, &player) in order.iter().enumerate() {
            prefix = prefix.with(player);
            let value = if step + 1 == d {
                full_value
            } else {
                used += 1;
                game.evaluate(&prefix)?
            };
            totals[player] += value - prev;
            prev = value;
        }
    }
    let shapley = totals.iter().map(|t| t / permutations as f64).collect();
    Ok(AttributionResult {
        baseline: empty_value,
        full_value,
        shapley,
        frontier_label: "none".into(),
        representation: None,
        diagnostics: Diagnostics {
            method: Estimator::Permutation,
            budget_used: used,
            seed,
            paired: false,
            rank: None,
            rank_deficient: false,
            enumerated_sizes: Vec::new(),
            unpaired_leftover: false,
            residual_norm: None,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::{CountingGame, FnGame, MobiusGame};
    use rand::Rng;

    fn additive(weights: Vec<f64>) -> impl Game {
        let d = weights.len();
        FnGame::new(d, move |s: &Coalition| s.members().map(|i| weights[i]).sum()).unwrap()
    }

    #[test]
    fn conversion_examples() {
        let f = InteractionFrontier::new(3, vec![Coalition::from_players(3, [0, 1]).unwrap()], "pair").unwrap();
        assert_eq!(polyshap_to_sv(&[1.0, 0.0, 2.0, 1.0], &f).unwrap(), vec![1.5, 0.5, 2.0]);
        let f = InteractionFrontier::new(4, vec![Coalition::from_players(4, [0, 1, 2]).unwrap()], "triple").unwrap();
        assert_eq!(polyshap_to_sv(&[0.0, 0.0, 0.0, 0.0, 3.0], &f).unwrap(), vec![1.0, 1.0, 1.0, 0.0]);
        let empty = InteractionFrontier::empty(3).unwrap();
        assert_eq!(polyshap_to_sv(&[1.0, -2.0, 0.5], &empty).unwrap(), vec![1.0, -2.0, 0.5]);
        assert!(polyshap_to_sv(&[1.0, 2.0], &empty).is_err());
    }

    #[test]
    fn m21_matches_conversion() {
        let d = 6;
        let f = InteractionFrontier::k_additive(d, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let rep: Vec<f64> = (0..f.num_columns()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let a = project_2poly_to_sv(&rep, d).unwrap();
            let b = polyshap_to_sv(&rep, &f).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-12);
            }
        }
        assert_eq!(project_2poly_to_sv(&[0.0; 21], 6).unwrap(), vec![0.0; 6]);
        assert!(project_2poly_to_sv(&[0.0; 20], 6).is_err());
    }

    #[test]
    fn m21_normalization() {
        for d in 2..9 {
            let d2 = d + binomial(d, 2) as usize;
            let c = 2.5;
            let out = project_2poly_to_sv(&vec![c / d2 as f64; d2], d).unwrap();
            for v in out {
                assert!((v - c / d as f64).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn kernelshap_is_empty_frontier_polyshap() {
        let g = MobiusGame::random(8, 3, 15, 4).unwrap();
        let cfg = SamplerConfig::new(8, 60, false, 11).unwrap();
        let a = kernelshap(&g, &cfg).unwrap();
        let b = polyshap(&g, &InteractionFrontier::empty(8).unwrap(), &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.diagnostics.method, Estimator::Kernelshap);
    }

    #[test]
    fn additive_game_recovered() {
        let w = vec![1.0, -2.0, 0.5, 3.0, 0.0, 1.5, -0.25];
        let g = additive(w.clone());
        for (budget, seed) in [(9, 0), (20, 1), (50, 2)] {
            let r = kernelshap(&g, &SamplerConfig::new(7, budget, false, seed).unwrap()).unwrap();
            assert!(!r.diagnostics.rank_deficient);
            for (a, b) in r.shapley.iter().zip(&w) {
                assert!((a - b).abs() < 1e-9, "{:?}", r.shapley);
            }
        }
    }

    #[test]
    fn budget_is_spent_exactly() {
        let g = CountingGame::new(MobiusGame::random(9, 3, 20, 1).unwrap());
        for (budget, paired) in [(11, false), (40, true), (41, true), (300, false), (512, true)] {
            g.reset();
            let r = kernelshap(&g, &SamplerConfig::new(9, budget, paired, 5).unwrap()).unwrap();
            assert_eq!(g.evaluations(), budget as u64);
            assert_eq!(r.diagnostics.budget_used, budget);
        }
        assert!(matches!(
            kernelshap(&g, &SamplerConfig::new(9, 10, false, 5).unwrap()),
            Err(Error::Budget { .. })
        ));
    }

    #[test]
    fn paired_kernelshap_exact_on_pairwise_game() {
        let g = MobiusGame::random(8, 2, 20, 7).unwrap();
        let truth = g.exact_shapley();
        let r = kernelshap(&g, &SamplerConfig::new(8, 60, true, 2).unwrap()).unwrap();
        for (a, b) in r.shapley.iter().zip(&truth) {
            assert!((a - b).abs() < 1e-7);
        }
        let unpaired = kernelshap(&g, &SamplerConfig::new(8, 60, false, 2).unwrap()).unwrap();
        let worst = unpaired.shapley.iter().zip(&truth).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(worst > 1e-6);
    }

    #[test]
    fn swapping_symmetric_players_swaps_estimates() {
        // Players 1 and 4 play identical roles.
        let g = FnGame::new(6, |s: &Coalition| {
            let a = s.contains(1) as u8 as f64;
            let b = s.contains(4) as u8 as f64;
            let rest: f64 = [0usize, 2, 3, 5].iter().map(|&i| (i + 1) as f64 * s.contains(i) as u8 as f64).sum();
            a + b + 2.0 * a * b * rest + rest * rest / 10.0
        })
        .unwrap();
        let batch = sample(&SamplerConfig::new(6, 30, false, 9).unwrap(), &g).unwrap();
        let swapped = batch.transpose_players(1, 4);
        let f = InteractionFrontier::k_additive(6, 2).unwrap();
        let a = polyshap_from_batch(&batch, &f, Estimator::Polyshap, 9).unwrap();
        let b = polyshap_from_batch(&swapped, &f, Estimator::Polyshap, 9).unwrap();
        let mut expected = a.shapley.clone();
        expected.swap(1, 4);
        for (x, y) in b.shapley.iter().zip(&expected) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn permutation_two_players_is_exact() {
        let g = FnGame::new(2, |s: &Coalition| match s.bits() {
            0 => 0.0,
            1 => 1.0,
            2 => 2.0,
            _ => 5.0,
        })
        .unwrap();
        // ν({0}) = 1, ν({1}) = 2, ν(D) = 5, φ = (2, 3). One permutation gives
        // one of the two marginal vectors; both are efficient and they
        // average to φ.
        let mut seen = std::collections::BTreeSet::new();
        for seed in 0..20 {
            let r = permutation_baseline(&g, 3, seed).unwrap();
            assert_eq!(r.diagnostics.budget_used, 3);
            assert!(r.efficiency_gap() < 1e-15);
            let pair = (r.shapley[0] as i64, r.shapley[1] as i64);
            assert!(pair == (1, 4) || pair == (3, 2), "{pair:?}");
            seen.insert(pair);
        }
        assert_eq!(seen.len(), 2);
        let r = permutation_baseline(&g, 2001, 0).unwrap();
        assert!((r.shapley[0] - 2.0).abs() < 0.1 && (r.shapley[1] - 3.0).abs() < 0.1);
    }

    #[test]
    fn permutation_two_players_exact_when_marginals_agree() {
        // ν({0}) − ν(∅) = ν(D) − ν({1}), so every order gives the same marginals.
        let g = FnGame::new(2, |s: &Coalition| [0.0, 1.0, 2.0, 3.0][s.bits() as usize]).unwrap();
        for seed in 0..5 {
            assert_eq!(permutation_baseline(&g, 3, seed).unwrap().shapley, vec![1.0, 2.0]);
        }
    }

    #[test]
    fn permutation_additive_and_efficient() {
        let g = CountingGame::new(additive(vec![1.0, 2.0, 3.0, -1.0]));
        let r = permutation_baseline(&g, 5, 0).unwrap();
        assert_eq!(r.shapley, vec![1.0, 2.0, 3.0, -1.0]);
        assert_eq!(g.evaluations(), 5);
        let m = MobiusGame::random(7, 3, 12, 0).unwrap();
        let r = permutation_baseline(&m, 50, 1).unwrap();
        assert!(r.efficiency_gap() < 1e-12);
        assert_eq!(r.diagnostics.budget_used, 2 + 7 * 6);
        assert!(permutation_baseline(&m, 7, 0).is_err());
    }

    #[test]
    fn json_round_trip() {
        let g = MobiusGame::random(5, 2, 6, 0).unwrap();
        let r = polyshap(&g, &InteractionFrontier::k_additive(5, 2).unwrap(), &SamplerConfig::new(5, 25, true, 1).unwrap()).unwrap();
        let back: AttributionResult = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
        let value: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(value["diagnostics"]["method"], "polyshap");
        assert_eq!(value["frontier_label"], "k=2");
    }
}
