//! Causal spatio-temporal ambit fields driven by homogeneous Lévy bases.
//!
//! The field is `eps(x, t) = exp(Z(S(x, t)))` where `S(x, t) = (x, t) + S0` is
//! a causal ambit set and `Z` a Lévy basis. Every n-point correlator is an
//! exponential of coverage areas weighted by the cumulant function, so the
//! crate splits into:
//!
//! - [`levy`]: cumulant functions and cell samplers,
//! - [`ambit`]: the ambit set built from a prescribed two-point scaling law,
//!   overlap areas, coverage profiles and lattice stencils,
//! - [`correlators`], [`exponents`], [`appendix`]: closed-form correlators,
//!   scaling exponents and the coarse-graining bounds,
//! - [`simulate`]: lattice realizations,
//! - [`estimate`]: empirical correlators, coarse moments and power-law fits.

pub mod ambit;
pub mod appendix;
pub mod correlators;
pub mod error;
pub mod estimate;
pub mod exponents;
pub mod levy;
pub mod quad;
pub mod simulate;

pub use ambit::{AmbitBoundary, AmbitMask, MultiplicityProfile, Point, ScalingSpec, DEFAULT_QUAD_TOL};
pub use error::{DomainError, Error, Result};
pub use levy::{BasisKind, LevyBasis};
pub use correlators::AmbitModel;
pub use estimate::{Axis, PowerLawFit};
pub use exponents::ExponentTable;
pub use simulate::{FieldRealization, LatticeConfig, Simulator};
