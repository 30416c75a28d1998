//! Wraps a closure as a game and counts how often it is queried.
//!
//! cargo run --example custom_game

use polyshap::{polyshap, Coalition, CountingGame, FnGame, InteractionFrontier, SamplerConfig};

fn main() -> polyshap::Result<()> {
    // A toy model: y = 2·x0 + x1·x2 − x3, with absent features set to zero
    // and present ones to one.
    let model = FnGame::new(6, |s: &Coalition| {
        let x = |i| if s.contains(i) { 1.0 } else { 0.0 };
        2.0 * x(0) + x(1) * x(2) - x(3)
    })?;
    let counted = CountingGame::new(&model);
    let frontier = InteractionFrontier::k_additive(6, 2)?;
    let result = polyshap(&counted, &frontier, &SamplerConfig::new(6, 30, true, 1)?)?;
    println!("shapley     {:.4?}", result.shapley);
    println!("evaluations {}", counted.evaluations());
    println!("efficiency gap {:.1e}", result.efficiency_gap());
    Ok(())
}
