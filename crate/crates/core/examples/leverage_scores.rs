//! Leverage scores of the full design, per coalition size.
//!
//! cargo run --example leverage_scores

use polyshap::sampling::leverage_scores_bruteforce;
use polyshap::{binomial, InteractionFrontier};

fn main() -> polyshap::Result<()> {
    let d = 8;
    for k in 1..=3 {
        let frontier = InteractionFrontier::k_additive(d, k)?;
        let scores = leverage_scores_bruteforce(&frontier)?;
        println!("{} (rank {}, total {:.3})", frontier.label(), scores.rank, scores.total);
        for s in 1..d {
            // Mass of the whole size stratum; flat for k = 1.
            let mass = scores.per_size[s] * binomial(d, s) as f64;
            println!("  |S|={s}  per coalition {:.5}  stratum mass {mass:.4}", scores.per_size[s]);
        }
    }
    Ok(())
}
