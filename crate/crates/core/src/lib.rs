pub mod cli;
pub mod coalition;
pub mod error;
pub mod estimators;
pub mod evaluation;
pub mod frontier;
pub mod games;
pub mod regression;
pub mod sampling;
pub mod verify;

pub use coalition::{binomial, shapley_weight, Coalition};
pub use error::{Error, Result};
pub use estimators::{kernelshap, permutation_baseline, polyshap, AttributionResult, Estimator};
pub use frontier::{FrontierSpec, InteractionFrontier};
pub use games::{CountingGame, FnGame, Game, LookupGame, MobiusGame};
pub use sampling::{sample, SampleBatch, SampleRow, SamplerConfig};
