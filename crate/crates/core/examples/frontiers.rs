//! Builds each kind of interaction frontier and compares their accuracy at a fixed budget.
//!
//! cargo run --example frontiers

use polyshap::{polyshap, FrontierSpec, MobiusGame, SamplerConfig};

fn main() -> polyshap::Result<()> {
    let d = 10;
    let game = MobiusGame::random(d, 3, 40, 11)?;
    let exact = game.exact_shapley();
    let budget = 400;
    println!("{:<12} {:>8} {:>12}", "frontier", "columns", "mean mse");
    for text in ["1", "2", "3@25", "3@50", "3", "log", "partial:60"] {
        let spec: FrontierSpec = text.parse()?;
        let frontier = spec.build(d, 0)?;
        let mut total = 0.0;
        let seeds = 20;
        for seed in 0..seeds {
            let r = polyshap(&game, &frontier, &SamplerConfig::new(d, budget, false, seed)?)?;
            total += r.shapley.iter().zip(&exact).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / d as f64;
        }
        println!("{:<12} {:>8} {:>12.3e}", frontier.label(), frontier.num_columns(), total / seeds as f64);
    }
    Ok(())
}
