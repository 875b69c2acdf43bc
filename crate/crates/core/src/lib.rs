//! Optimal thermal insulation of a fixed body `K` by a layer `Ω ∖ K`.
//!
//! The energy of a pair `(K, Ω)` is `min ∫_Ω |∇u|² + ∫_{∂Ω} Θ(u)` over
//! temperatures `u` with `u = 1` on `K`. The crate provides the dissipation
//! laws `Θ`, closed forms for concentric balls, a finite element solver for
//! star-shaped planar pairs, a shape optimizer and numerical checks of the
//! level-set arguments behind ball optimality.

// Negated comparisons are how NaN parameters get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod annulus;
pub mod checks;
pub mod dissipation;
pub mod error;
pub mod geometry;
pub mod numeric;
pub mod radial;
pub mod registry;
pub mod shape;

pub use annulus::{energy_of, scale_field, solve_state, Mesh, ScalarField};
pub use dissipation::{DissipationLaw, FlatCriterion};
pub use error::{Error, Result};
pub use geometry::{FourierRadius, StarPair};
pub use radial::EnergyBreakdown;
