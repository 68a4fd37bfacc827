//! Cross-platform ordinal hate-speech classification.
//!
//! The pipeline cleans raw posts ([`preprocess`]), extracts lexicon, syntactic
//! and log-odds features ([`features`]), reduces message embeddings with
//! supervised PLS ([`embeddings`]), and fits a pair of binary learners per
//! platform whose outputs are combined into a clean < offensive < hate
//! distribution ([`ordinal`]). Platform models are stacked by a small neural
//! meta-learner that is trained only on out-of-fold predictions ([`stack`]).

pub mod archive;
pub mod config;
pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod features;
pub mod linalg;
pub mod learners;
pub mod ordinal;
pub mod preprocess;
pub mod rng;
pub mod serial;
pub mod stack;
pub mod synth;

pub use corpus::{Dataset, LabeledMessage, SeverityLabel};
pub use error::{Error, Result};
