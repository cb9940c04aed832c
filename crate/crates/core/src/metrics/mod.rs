//! Clustering evaluation: Hungarian-aligned accuracy, NMI, ARI, the
//! All/Novel/Known reporting protocol, and confidence-skew observables.

mod eval;
mod hungarian;
mod scores;

pub use eval::{evaluate, evaluate_predictions, lowconf_noise, skew_delta, EvalReport};
pub use hungarian::{hungarian_align, matched_count};
pub use scores::{acc, ari, ari_adjusted, nmi};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("empty input")]
    EmptyInput,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
}
