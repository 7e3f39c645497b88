//! Finite-blocklength limits of lossless compression with side information
//! at the decoder: optimal one-to-one codes, exact excess-rate
//! probabilities, information measures, Markov rate constants and
//! normal-approximation bounds.

pub mod bounds;
pub mod chain;
pub mod code;
pub mod error;
pub mod gaussian;
pub mod limits;
pub mod markov;
pub mod measures;
pub mod model;
pub mod prob;

pub use error::{Error, Result};
pub use model::{CondIidModel, MarkovPairModel, SideInfoString, SourceModel};
pub use prob::Prob;
