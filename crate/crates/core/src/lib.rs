// Numeric kernels index several parallel arrays; `!(x > 0.0)` also rejects NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod corpus;
pub mod doc;
pub mod error;
pub mod evalkit;
pub mod ingest;
pub mod pairmatch;
pub mod pipeline;
pub mod polarity;
pub mod scalar;
pub mod spanex;
pub mod synth;
pub mod textnorm;

pub use error::{Error, Result};

pub type PairGraphF64 = pairmatch::PairGraph<f64>;
pub type PairGraphF32 = pairmatch::PairGraph<f32>;
pub type MatchPolicyF64 = pairmatch::MatchPolicy<f64>;
pub type MatchPolicyF32 = pairmatch::MatchPolicy<f32>;
