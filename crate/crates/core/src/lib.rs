//! Models that are linear in their parameters, the incremental learners that
//! train them, and online stability monitoring of the resulting weight
//! dynamics.
//!
//! Each learner step is written as `ξ(k+1) = A(k)ξ(k) + B(k)u(k)`; the
//! [`monitor`] watches the sequence of `A(k)` for loss of stability.

pub mod architectures;
pub mod error;
mod grammar;
pub mod harness;
pub mod learners;
pub mod linalg;
pub mod monitor;
pub mod statespace;

pub use architectures::{FeatureMap, IplnaModel};
pub use error::{Error, Result};
pub use linalg::{Matrix, Vector};
pub use monitor::{Monitor, MonitorConfig, StabilityReport};
pub use statespace::StateSpaceStep;
