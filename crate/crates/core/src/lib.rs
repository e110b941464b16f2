//! Numerical integral geometry on flat tori.
//!
//! A compact family of diffeomorphisms of `T^n` (n = 2, 3) is assembled from
//! chart-local cut-off rotations and translation flows. On top of it the
//! crate counts intersections `h(V) ∩ W` of complementary dimensional
//! discrete submanifolds, estimates the family average of that count by
//! Monte Carlo, and checks the normal-Jacobian identities that relate the
//! average to `vol(V) * vol(W)`.

// Validity checks are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod family;
pub mod geom;
pub mod intersect;
pub mod kinematic;
pub mod sampling;
pub mod submanifold;
pub mod verify;

pub use error::{Error, Result};
