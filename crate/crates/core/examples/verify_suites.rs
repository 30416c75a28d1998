//! Runs every numerical property suite at its default size.
//!
//! cargo run --release --example verify_suites

use polyshap::verify::{run_suite, Suite};

fn main() -> polyshap::Result<()> {
    for suite in Suite::ALL {
        print!("{}", run_suite(suite, 0)?.render());
    }
    Ok(())
}
