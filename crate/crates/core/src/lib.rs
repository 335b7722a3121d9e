//! Sequential importance sampling of binary matrices with fixed row and
//! column sums, optionally with structural zeros.
//!
//! Each column is drawn from an exact dynamic-programming proposal over its
//! partial sums, weighted by an asymptotic approximation to the number of
//! completions. Every draw carries its exact log proposal probability, so
//! the importance weights give an unbiased estimate of the number of
//! matrices and can reweight any statistic to the uniform distribution.

pub mod dpsampler;
pub mod enumeration;
pub mod error;
pub mod margins;
pub mod matrix;
pub mod oracle;
pub mod parallel;
pub mod rng;
pub mod szero;
pub mod weights;

pub use dpsampler::{eval_matrix, sample_matrix, SampledMatrix, Sampler, SamplerConfig};
pub use enumeration::{bernoulli_profile, BernoulliProfile, Heuristic};
pub use error::{Error, Result};
pub use margins::{first_column_support, gale_ryser_feasible, ColumnSupport, MarginPair};
pub use matrix::BinaryMatrix;
pub use szero::StructuralZeroMask;
