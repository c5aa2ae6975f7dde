//! Weighted conditional expectation operators `T = M_w E M_u` on finite
//! atomic measure spaces, their spectral radius algebras `B_T` and `Q_T`,
//! and operator majorization.
//!
//! Everything is finite-dimensional: a measure space is a list of positive
//! atom weights, a sub-sigma-algebra is a partition of the atoms, and
//! operators are dense complex matrices whose adjoints are taken with
//! respect to the weighted inner product `<f, g> = sum_i mu_i f_i conj(g_i)`.

// `!(x > 0.0)` deliberately treats NaN as failing the comparison.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod condexp;
pub mod error;
pub mod fixtures;
pub mod harness;
pub mod hilbert;
pub mod majorize;
pub mod settings;
pub mod sra;
pub mod wce;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use settings::{Settings, Tolerances};
