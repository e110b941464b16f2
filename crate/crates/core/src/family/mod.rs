//! Families of torus diffeomorphisms parametrized by a Euclidean domain.
//!
//! [`FamilySpec`] is the compact family built from ball charts: in each
//! chart, a cut-off rotation followed by cut-off coordinate flows, composed
//! over all charts and repeated for `D + 1` rounds (`D` the diameter of the
//! nerve of the cover). [`TranslationFamily`] is the rigid translation
//! family used as an exactly solvable reference.

mod atlas;
mod bump;
mod chart_family;
mod local;
mod params;
mod translation;
mod witness;

use nalgebra::{DMatrix, Matrix3};
use rand::RngCore;

pub use atlas::{Chart, ChartAtlas, GridAtlasConfig};
pub use bump::{bump_deriv, bump_eval, BumpProfile, CHART_RADIUS, FLAT_RADIUS, SUPPORT_RADIUS};
pub use chart_family::{FamilySpec, DEFAULT_FD_STEP, DEFAULT_FLOW_STEP};
pub use local::{
    block_dim, local_rotation_apply, local_rotation_jacobian, translation_flow, translation_flow_jacobian, LocalParams,
};
pub use params::FamilyParams;
pub use translation::TranslationFamily;
pub use witness::{calibrate_radius, random_plane_pair, verify_witness, witness_a2, WitnessCheck};

use crate::error::Result;
use crate::geom::TorusPoint;

/// A smooth family `h = Psi(w)` of torus diffeomorphisms over a parameter
/// domain of finite Lebesgue measure.
///
/// Methods assume `w` and `x` have the dimensions reported by the family;
/// the free functions in this module check them.
pub trait Family: Send + Sync {
    /// Torus dimension `n`.
    fn dim(&self) -> usize;
    /// Parameter dimension.
    fn param_dim(&self) -> usize;
    /// Log of the Lebesgue measure of the parameter domain.
    fn ln_param_volume(&self) -> f64;
    /// Uniform draw from the parameter domain.
    fn sample_params(&self, rng: &mut dyn RngCore) -> FamilyParams;
    fn apply(&self, w: &FamilyParams, x: &TorusPoint) -> TorusPoint;
    /// Image point and spatial Jacobian, zero padded to 3x3 (identity in the
    /// unused block).
    fn apply_with_jacobian(&self, w: &FamilyParams, x: &TorusPoint) -> (TorusPoint, Matrix3<f64>);
    /// `n x param_dim` derivative of `w -> Psi(w)(x)`.
    fn param_derivative(&self, w: &FamilyParams, x: &TorusPoint) -> DMatrix<f64>;

    /// `n x n` spatial Jacobian `dPsi(w)_x`.
    fn jacobian(&self, w: &FamilyParams, x: &TorusPoint) -> DMatrix<f64> {
        let n = self.dim();
        let (_, j) = self.apply_with_jacobian(w, x);
        DMatrix::from_fn(n, n, |r, c| j[(r, c)])
    }
}

fn check<F: Family + ?Sized>(family: &F, w: &FamilyParams, x: &TorusPoint) -> Result<()> {
    use crate::error::invalid;
    if w.len() != family.param_dim() {
        return Err(invalid(format!("parameter vector has length {}, expected {}", w.len(), family.param_dim())));
    }
    if !w.is_finite() {
        return Err(invalid("non-finite family parameters"));
    }
    if x.dim() != family.dim() {
        return Err(invalid("point dimension differs from family dimension"));
    }
    Ok(())
}

/// Checked `Psi(w)(x)`.
pub fn family_apply<F: Family + ?Sized>(family: &F, w: &FamilyParams, x: &TorusPoint) -> Result<TorusPoint> {
    check(family, w, x)?;
    Ok(family.apply(w, x))
}

/// Checked `dPsi(w)_x`.
pub fn family_jacobian<F: Family + ?Sized>(family: &F, w: &FamilyParams, x: &TorusPoint) -> Result<DMatrix<f64>> {
    check(family, w, x)?;
    Ok(family.jacobian(w, x))
}

/// Checked derivative of the evaluation map `w -> Psi(w)(x)`.
pub fn family_param_derivative<F: Family + ?Sized>(
    family: &F,
    w: &FamilyParams,
    x: &TorusPoint,
) -> Result<DMatrix<f64>> {
    check(family, w, x)?;
    Ok(family.param_derivative(w, x))
}
