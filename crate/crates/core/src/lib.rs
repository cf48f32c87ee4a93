//! Robustness lab for retrieval-augmented question answering.
//!
//! The crate builds noise-augmented QA benchmarks (golden context plus relevant,
//! irrelevant and counterfactual retrieval noise), trains a small reference
//! language model with an adaptive adversarial multi-task objective or one of
//! several baseline fine-tuning regimes, and scores predictions with EM/F1
//! across the four noise conditions.
//!
//! Modules:
//! - [`bench`]: ingestion, filtering and benchmark construction.
//! - [`metrics`]: answer normalization, EM, token F1 and condition tables.
//! - [`tinylm`]: the toy language model with exact gradients.
//! - [`trainer`]: the adversarial objective, baselines and the training loop.
//! - [`eval`]: evaluation conditions, reports and exports.
//! - [`cli`]: the `raat` command-line entry point.

pub mod bench;
pub mod cli;
pub mod error;
pub mod eval;
pub mod hash;
pub mod metrics;
pub mod tinylm;
pub mod trainer;

pub use error::{RaatError, Result};
