//! At the full budget every frontier reproduces the exact Shapley values.
//!
//! cargo run --example consistency

use polyshap::verify::{consistency, ConsistencyOptions};

fn main() -> polyshap::Result<()> {
    let report = consistency(&ConsistencyOptions { dims: vec![4, 6, 8], games_per_dim: 3, ..Default::default() })?;
    print!("{}", report.render());
    Ok(())
}
