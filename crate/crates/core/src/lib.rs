//! Simulation and analysis toolkit for a current-controlled 3T1R memristive
//! synapse: device models, DC operating points of the SET and READ paths,
//! process-variation Monte Carlo, multi-level readability, and the effect of
//! synapse precision on a spiking classifier.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod devices;
pub mod error;
pub mod numeric;
mod parallel;
pub mod snn;
pub mod solver;
pub mod table;
pub mod variation;

pub use error::{Error, Result};
