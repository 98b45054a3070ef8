//! Exact information-theoretic kernel over finite alphabets.
//!
//! Everything here is a closed-form summation over probability tables: no
//! sampling, no estimators. Quantities are in nats.

mod dist;
mod expfam;
mod ib;
mod info;
mod rd;

pub use dist::{Channel, Dist, JointDist, INPUT_TOLERANCE};
pub use expfam::{expfam_mean, ExpFam};
pub use ib::{ib_solve, IbOptions, IbResult};
pub use info::{entropy, kl_divergence, mutual_information};
pub use rd::{rd_curve, Distortion, RdPoint};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProbError {
    #[error("empty alphabet")]
    Empty,
    #[error("invalid probability entry {value} at index {index}")]
    InvalidEntry { index: usize, value: f64 },
    #[error("table sums to {sum}, expected 1")]
    NotNormalized { sum: f64 },
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("row {row}: {source}")]
    InvalidRow {
        row: usize,
        #[source]
        source: Box<ProbError>,
    },
    #[error("KL support violation: q[{index}] = 0 where p[{index}] > 0")]
    SupportViolation { index: usize },
}
