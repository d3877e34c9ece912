//! Discriminative adversarial search for abstractive summarization.
//!
//! A frozen n-gram + copy [`generator`] proposes continuations, a sequential
//! [`discriminator`] scores every prefix as human-written or generated, and the
//! [`decoder`] fuses the two during beam search. [`selftrain`] retrains the
//! discriminator on its own decoding outputs, and [`metrics`] measures how far
//! the outputs drift from human references.

pub mod corpus;
pub mod decoder;
pub mod discriminator;
mod error;
pub mod generator;
pub mod metrics;
pub mod run;
pub mod selftrain;

pub use error::{Error, Result};
