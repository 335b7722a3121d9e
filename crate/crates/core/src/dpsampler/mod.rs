//! Column chain construction, the backward recursion, and the full-matrix
//! sampler built on them.

mod chain;
mod engine;

pub use chain::{
    backward_pass, build_factors, eval_column, sample_column, ColumnChain, ColumnChainFactors,
};
pub use engine::{eval_matrix, sample_matrix, SampledMatrix, Sampler, SamplerConfig};

