//! Corpus-semantics pipelines: embedding-space topic discovery, word-sense
//! induction and behavioral-profile correspondence analysis.

pub mod coherence;
pub mod corpus;
pub mod density;
pub mod error;
pub mod hyperopt;
pub mod manifold;
pub mod profile;
pub mod rng;
pub mod senses;
pub mod svg;
pub mod topic;

pub use error::{Error, Result};
