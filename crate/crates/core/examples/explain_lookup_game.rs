//! Explains the bundled 4-player glove game with every estimator.
//!
//! cargo run --example explain_lookup_game

use polyshap::evaluation::bruteforce_shapley;
use polyshap::games::LookupGame;
use polyshap::{kernelshap, permutation_baseline, polyshap, InteractionFrontier, SamplerConfig};

fn main() -> polyshap::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/glove_d4.csv");
    let game = LookupGame::load(path)?;
    let exact = bruteforce_shapley(&game)?.shapley;
    println!("exact           {exact:.4?}");

    let cfg = SamplerConfig::new(4, 12, false, 0)?;
    println!("kernelshap m=12 {:.4?}", kernelshap(&game, &cfg)?.shapley);
    let pairs = InteractionFrontier::k_additive(4, 2)?;
    println!("2-polyshap m=12 {:.4?}", polyshap(&game, &pairs, &cfg)?.shapley);
    println!("permutation     {:.4?}", permutation_baseline(&game, 13, 0)?.shapley);

    let full = polyshap(&game, &pairs, &SamplerConfig::new(4, 16, false, 0)?)?;
    println!("\nfull budget result as JSON:\n{}", full.to_json());
    Ok(())
}
