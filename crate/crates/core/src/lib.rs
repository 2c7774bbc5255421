//! Margin-bound laboratory for halfspaces.
//!
//! The crate evaluates closed-form margin generalization bounds, implements
//! the randomized Gaussian projection + grid snapping used to discretize
//! hypotheses, builds the explicit lower-bound distribution, and checks the
//! supporting probabilistic facts by seeded Monte Carlo simulation.
//!
//! Modules:
//!
//! - [`margins`]: margins, margin losses and the lifting embedding.
//! - [`discretize`]: projection draws, unbiased grid snapping, grid families.
//! - [`bounds`]: closed-form generalization bound evaluators.
//! - [`lowerbound`]: adversarial distribution and witness hyperplanes.
//! - [`verify`]: Monte Carlo and exact checks producing [`verify::CheckReport`]s.
//! - [`learn`]: margin perceptron and bound-vs-gap experiments.
//! - [`cli`]: configuration files, CSV emission and command dispatch.

pub mod bounds;
pub mod cli;
pub mod discretize;
pub mod error;
pub mod learn;
pub mod lowerbound;
pub mod margins;
pub mod rng;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
