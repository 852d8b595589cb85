//! Multi-server coded caching with MDS-coded storage and random user-server
//! connectivity: placement, delivery planning, decoding checks, closed-form
//! latency analysis and a Monte Carlo engine.
//!
//! Exact quantities use [`Rational`]; estimates and averages use [`Real`].
//! The analysis routines are generic over [`Scalar`] so they can also run on
//! big rationals or plain floats.

pub mod analysis;
pub mod binomial;
pub mod delivery;
pub mod error;
pub mod mds;
pub mod model;
pub mod placement;
pub mod scalar;
pub mod simulate;
pub mod subset;
pub mod topology;

/// Exact rational used for parameters, rates and latencies.
pub type Rational = num_rational::Ratio<i128>;
/// Floating-point type used for estimates and Monte Carlo statistics.
pub type Real = f64;

pub use error::{Error, Result};
pub use model::{validate_params, DemandVector, FileLibrary, RawParams, SegmentId, SystemParams};
pub use scalar::Scalar;
pub use subset::UserSet;
pub use topology::Topology;
