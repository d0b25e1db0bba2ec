//! Order selection for Markov chains fitted to corpora of navigation paths.
//!
//! Paths are padded with a RESET state, counted into sparse context tables,
//! and compared across orders with likelihood-ratio tests, information
//! criteria, Bayesian evidence and cross-validated prediction ranks.

pub mod bayes;
pub mod corpus;
pub mod counts;
pub mod crossval;
pub mod error;
pub mod infocrit;
pub mod likelihood;
pub mod numerics;
pub mod report;
pub mod seeds;
pub mod structure;
pub(crate) mod serde_float;

pub use corpus::{PathCorpus, StateId, StateVocabulary, RESET, RESET_LABEL};
pub use counts::{count_transitions, ContextCounts};
pub use error::{Error, Result};
pub use likelihood::MarkovModel;
