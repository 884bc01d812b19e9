//! Human- vs AI-generated text detection from stylometric features.
//!
//! The pipeline: load a labelled corpus ([`corpus`]), segment and annotate
//! each document ([`textproc`]), compute scalar features ([`features`]),
//! perplexity ([`lm`]) and text vectors ([`vectorize`]), then train and
//! evaluate tree ensembles and a small neural network ([`ml`], [`eval`]).
//! External services (grammar checker, chat model, embeddings, neural LM)
//! sit behind the cached clients in [`clients`].

pub mod corpus;
pub mod clients;
pub mod error;
pub mod eval;
pub mod features;
pub mod lm;
pub mod ml;
pub mod textproc;
pub mod vectorize;

pub use error::{Error, Result};
