//! Permutation sampling against regression at equal evaluation cost.
//!
//! cargo run --example permutation_baseline

use polyshap::{kernelshap, permutation_baseline, MobiusGame, SamplerConfig};

fn main() -> polyshap::Result<()> {
    let d = 10;
    let game = MobiusGame::random(d, 3, 40, 2)?;
    let exact = game.exact_shapley();
    let mse = |v: &[f64]| v.iter().zip(&exact).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / d as f64;
    for budget in [50, 100, 200, 400] {
        let (mut perm, mut kern) = (0.0, 0.0);
        for seed in 0..10 {
            perm += mse(&permutation_baseline(&game, budget, seed)?.shapley);
            kern += mse(&kernelshap(&game, &SamplerConfig::new(d, budget, true, seed)?)?.shapley);
        }
        println!("m={budget:<4} permutation {:.3e}  paired kernelshap {:.3e}", perm / 10.0, kern / 10.0);
    }
    Ok(())
}
