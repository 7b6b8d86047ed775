//! Cesàro uniform integrability for d-dimensional arrays of random vectors
//! in (truncated) Hilbert spaces: tail diagnostics, the integrability
//! criterion with events, de La Vallée Poussin functions built from tail
//! thresholds, and Monte Carlo experiments on maximal partial normed sums.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod convergence;
pub mod cui;
pub mod distributions;
pub mod error;
pub mod hilbert;
pub mod lattice;
pub mod moments;
pub mod oracle;
mod par;
pub mod poussin;
pub mod rng;

pub use distributions::{DistributionSpec, Family, Indicator, MomentMode, NormLaw};
pub use error::{Error, Result};
pub use hilbert::HVector;
pub use lattice::{LatticeSample, MultiIndex};
pub use moments::{Estimate, MomentSource};
pub use convergence::{ConvergenceSeries, ExperimentConfig};
pub use cui::CuiReport;
pub use poussin::PhiFunction;
