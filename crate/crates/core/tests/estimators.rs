mod common;

use common::{max_abs_diff, permutation_shapley, subset_shapley};
use polyshap::estimators::polyshap_from_batch;
use polyshap::evaluation::bruteforce_shapley;
use polyshap::games::LookupGame;
use polyshap::{
    kernelshap, permutation_baseline, polyshap, sample, Coalition, CountingGame, Estimator, FnGame, Game,
    InteractionFrontier, MobiusGame, SamplerConfig,
};

#[test]
fn oracles_agree_on_small_games() {
    for seed in 0..5 {
        let game = MobiusGame::random(6, 4, 14, seed).unwrap();
        let by_subsets = subset_shapley(&game);
        assert!(max_abs_diff(&by_subsets, &permutation_shapley(&game)) < 1e-12);
        assert!(max_abs_diff(&by_subsets, &game.exact_shapley()) < 1e-12);
        assert!(max_abs_diff(&by_subsets, &bruteforce_shapley(&game).unwrap().shapley) < 1e-12);
    }
}

#[test]
fn full_budget_is_exact_at_eight_players() {
    let game = MobiusGame::random(8, 5, 30, 77).unwrap();
    let truth = subset_shapley(&game);
    for k in 1..=3 {
        let frontier = InteractionFrontier::k_additive(8, k).unwrap();
        for paired in [false, true] {
            let counted = CountingGame::new(&game);
            let r = polyshap(&counted, &frontier, &SamplerConfig::new(8, 256, paired, 3).unwrap()).unwrap();
            assert_eq!(counted.evaluations(), 256);
            assert!(max_abs_diff(&r.shapley, &truth) < 1e-9, "k={k} paired={paired}");
        }
    }
}

#[test]
fn kernelshap_is_the_empty_frontier() {
    let game = MobiusGame::random(7, 3, 20, 8).unwrap();
    let cfg = SamplerConfig::new(7, 50, false, 12).unwrap();
    let a = kernelshap(&game, &cfg).unwrap();
    let b = polyshap(&game, &InteractionFrontier::empty(7).unwrap(), &cfg).unwrap();
    assert_eq!(a.shapley, b.shapley);
    assert_eq!(a.diagnostics.method, Estimator::Kernelshap);
}

#[test]
fn additive_game_is_recovered_at_any_budget() {
    let weights = [0.5, -1.25, 2.0, 0.0, 3.5, -0.75];
    let game = FnGame::new(6, move |s: &Coalition| s.members().map(|i| weights[i]).sum::<f64>() + 1.0).unwrap();
    for budget in [8, 13, 30] {
        let r = kernelshap(&game, &SamplerConfig::new(6, budget, false, budget as u64).unwrap()).unwrap();
        assert!(max_abs_diff(&r.shapley, &weights) < 1e-10, "budget {budget}");
    }
}

#[test]
fn relabeling_players_permutes_estimates() {
    let game = MobiusGame::random(7, 3, 20, 4).unwrap();
    let batch = sample(&SamplerConfig::new(7, 60, true, 9).unwrap(), &game).unwrap();
    let swapped = batch.transpose_players(1, 5);
    for k in [1, 2] {
        let frontier = InteractionFrontier::k_additive(7, k).unwrap();
        let a = polyshap_from_batch(&batch, &frontier, Estimator::Polyshap, 0).unwrap();
        let b = polyshap_from_batch(&swapped, &frontier, Estimator::Polyshap, 0).unwrap();
        let mut expected = a.shapley.clone();
        expected.swap(1, 5);
        assert!(max_abs_diff(&b.shapley, &expected) < 1e-10, "k={k}");
    }
}

#[test]
fn symmetric_players_get_equal_full_budget_estimates() {
    // Players 0 and 1 are interchangeable.
    let game = FnGame::new(5, |s: &Coalition| {
        let pair = s.contains(0) as u8 + s.contains(1) as u8;
        f64::from(pair * pair) + if s.contains(2) && s.contains(3) { 2.0 } else { 0.0 } + s.size() as f64 * 0.1
    })
    .unwrap();
    let r = polyshap(&game, &InteractionFrontier::k_additive(5, 2).unwrap(), &SamplerConfig::new(5, 32, false, 0).unwrap())
        .unwrap();
    assert!((r.shapley[0] - r.shapley[1]).abs() < 1e-12);
    assert!((r.shapley[2] - r.shapley[3]).abs() < 1e-12);
}

#[test]
fn permutation_baseline_is_unbiased() {
    let game = MobiusGame::random(5, 3, 12, 31).unwrap();
    let truth = permutation_shapley(&game);
    let runs: Vec<Vec<f64>> = (0..200).map(|seed| permutation_baseline(&game, 21, seed).unwrap().shapley).collect();
    let n = runs.len() as f64;
    for i in 0..5 {
        let mean = runs.iter().map(|r| r[i]).sum::<f64>() / n;
        let var = runs.iter().map(|r| (r[i] - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let sem = (var / n).sqrt();
        assert!((mean - truth[i]).abs() <= 4.0 * sem + 1e-12, "player {i}: {mean} vs {} (sem {sem})", truth[i]);
    }
}

#[test]
fn permutation_baseline_is_exact_on_additive_games() {
    let game = LookupGame::tabulate(&FnGame::new(4, |s: &Coalition| s.members().map(|i| i as f64).sum()).unwrap())
        .unwrap();
    let r = permutation_baseline(&game, 13, 1).unwrap();
    assert_eq!(r.shapley, vec![0.0, 1.0, 2.0, 3.0]);
    let counted = CountingGame::new(&game);
    let r = permutation_baseline(&counted, 13, 1).unwrap();
    assert_eq!(counted.evaluations(), r.diagnostics.budget_used as u64);
}

#[test]
fn lookup_miss_is_reported() {
    let game = LookupGame::new(3, [(Coalition::empty(3).unwrap(), 0.0), (Coalition::full(3).unwrap(), 1.0)]).unwrap();
    assert!(game.evaluate(&Coalition::from_players(3, [0]).unwrap()).is_err());
    assert!(kernelshap(&game, &SamplerConfig::new(3, 6, false, 0).unwrap()).is_err());
}
