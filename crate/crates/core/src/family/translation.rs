//! The translation family `psi_a(x) = x + a`, `a` in the torus itself.

use nalgebra::{DMatrix, Matrix3, Vector3};
use rand::RngCore;

use super::{Family, FamilyParams};
use crate::error::{invalid, Result};
use crate::geom::{TorusPoint, MAX_DIM};
use crate::sampling::uniform_cube;

/// Parameters `a in [0,1)^n` with Lebesgue (Haar) measure of total mass 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TranslationFamily {
    dim: usize,
}

impl TranslationFamily {
    pub fn new(dim: usize) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(invalid(format!("translation family dimension {dim} not in 1..=3")));
        }
        Ok(Self { dim })
    }

    fn shift(&self, w: &FamilyParams) -> Vector3<f64> {
        let mut a = Vector3::zeros();
        a.as_mut_slice()[..self.dim].copy_from_slice(w.as_slice());
        a
    }
}

impl Family for TranslationFamily {
    fn dim(&self) -> usize {
        self.dim
    }

    fn param_dim(&self) -> usize {
        self.dim
    }

    fn ln_param_volume(&self) -> f64 {
        0.0
    }

    fn sample_params(&self, rng: &mut dyn RngCore) -> FamilyParams {
        FamilyParams::new(uniform_cube(self.dim, rng))
    }

    fn apply(&self, w: &FamilyParams, x: &TorusPoint) -> TorusPoint {
        x.translate(&self.shift(w))
    }

    fn apply_with_jacobian(&self, w: &FamilyParams, x: &TorusPoint) -> (TorusPoint, Matrix3<f64>) {
        (self.apply(w, x), Matrix3::identity())
    }

    fn param_derivative(&self, _w: &FamilyParams, _x: &TorusPoint) -> DMatrix<f64> {
        DMatrix::identity(self.dim, self.dim)
    }
}
