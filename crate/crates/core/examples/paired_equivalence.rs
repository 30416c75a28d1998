//! Paired KernelSHAP and paired 2-PolySHAP give the same Shapley values on a
//! shared batch, once the pairs are split back onto players.
//!
//! cargo run --example paired_equivalence

use polyshap::estimators::{polyshap_from_batch, project_2poly_to_sv};
use polyshap::{sample, Estimator, InteractionFrontier, MobiusGame, SamplerConfig};

fn main() -> polyshap::Result<()> {
    let d = 8;
    let game = MobiusGame::random(d, 4, 30, 3)?;
    let exact = game.exact_shapley();
    let empty = InteractionFrontier::empty(d)?;
    let pairs = InteractionFrontier::k_additive(d, 2)?;

    for paired in [false, true] {
        let batch = sample(&SamplerConfig::new(d, 80, paired, 5)?, &game)?;
        let kernel = polyshap_from_batch(&batch, &empty, Estimator::Kernelshap, 5)?;
        let poly = polyshap_from_batch(&batch, &pairs, Estimator::Polyshap, 5)?;
        let rep = poly.representation.as_ref().expect("regression result");
        let projected = project_2poly_to_sv(&rep.values, d)?;
        let gap = kernel.shapley.iter().zip(&projected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let err = |v: &[f64]| v.iter().zip(&exact).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / d as f64;
        println!(
            "paired={paired:<5} kernel mse {:.3e}  2-poly mse {:.3e}  max |kernel - projected| {gap:.1e}",
            err(&kernel.shapley),
            err(&poly.shapley)
        );
    }
    Ok(())
}
