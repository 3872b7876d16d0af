//! Observables, stationary estimation and the statistical checkers.

pub mod checks;
pub mod estimate;
pub mod observables;

pub use checks::{CheckReport, Tolerance, Verdict};
pub use estimate::{stationary_estimate, Accumulator, EnsembleStats};
pub use observables::{observe, ObservableRecord, OBSERVABLE_NAMES};
