use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::torus::TorusPoint;
use crate::error::{invalid, Result};

const ORTHONORMAL_TOL: f64 = 1e-12;

/// A `k`-plane tangent to the torus at `base`, stored as an `n x k`
/// matrix with orthonormal columns.
#[derive(Clone, Debug, PartialEq)]
pub struct GrassmannPlane {
    base: TorusPoint,
    basis: DMatrix<f64>,
}

impl GrassmannPlane {
    /// Wrap an already orthonormal basis.
    pub fn new(base: TorusPoint, basis: DMatrix<f64>) -> Result<Self> {
        let n = base.dim();
        if basis.nrows() != n {
            return Err(invalid(format!("plane basis has {} rows, ambient dimension is {n}", basis.nrows())));
        }
        if basis.ncols() > n {
            return Err(invalid("plane dimension exceeds ambient dimension"));
        }
        let k = basis.ncols();
        let gram = basis.transpose() * &basis;
        let err = (gram - DMatrix::<f64>::identity(k, k)).abs().max();
        if k > 0 && !(err <= ORTHONORMAL_TOL) {
            return Err(invalid(format!("plane basis is not orthonormal (error {err:e})")));
        }
        Ok(Self { base, basis })
    }

    /// Orthonormalize the columns of `spanning`; fails if they are dependent.
    pub fn from_spanning(base: TorusPoint, spanning: &DMatrix<f64>) -> Result<Self> {
        if spanning.nrows() != base.dim() {
            return Err(invalid("spanning vectors have the wrong length"));
        }
        let basis = orthonormalize(spanning)?;
        Self::new(base, basis)
    }

    /// Orthonormalize spanning vectors given as a list of columns.
    pub fn from_columns(base: TorusPoint, columns: &[Vec<f64>]) -> Result<Self> {
        let n = base.dim();
        if let Some(c) = columns.iter().find(|c| c.len() != n) {
            return Err(invalid(format!("spanning vector has length {}, expected {n}", c.len())));
        }
        let m = DMatrix::from_fn(n, columns.len(), |r, c| columns[c][r]);
        Self::from_spanning(base, &m)
    }

    /// The zero subspace at `base`.
    pub fn zero(base: TorusPoint) -> Self {
        let n = base.dim();
        Self { base, basis: DMatrix::zeros(n, 0) }
    }

    /// Haar-random `k`-plane at `base`.
    pub fn random<R: Rng + ?Sized>(base: TorusPoint, k: usize, rng: &mut R) -> Result<Self> {
        let n = base.dim();
        if k > n {
            return Err(invalid("plane dimension exceeds ambient dimension"));
        }
        loop {
            let g = DMatrix::from_fn(n, k, |_, _| rng.sample::<f64, _>(StandardNormal));
            if let Ok(plane) = Self::from_spanning(base, &g) {
                return Ok(plane);
            }
        }
    }

    pub fn base(&self) -> &TorusPoint {
        &self.base
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    /// Orthogonal projector onto the plane.
    pub fn projector(&self) -> DMatrix<f64> {
        &self.basis * self.basis.transpose()
    }

    /// Frobenius distance between orthogonal projectors (an upper bound on
    /// the spectral subspace gap).
    pub fn gap(&self, other: &GrassmannPlane) -> f64 {
        if self.dim() != other.dim() || self.ambient_dim() != other.ambient_dim() {
            return f64::INFINITY;
        }
        (self.projector() - other.projector()).norm()
    }

    /// Image of the plane under a linear map, re-orthonormalized, at a new base point.
    pub fn pushed(&self, map: &DMatrix<f64>, base: TorusPoint) -> Result<Self> {
        Self::from_spanning(base, &(map * &self.basis))
    }

    pub fn with_base(&self, base: TorusPoint) -> Self {
        Self { base, basis: self.basis.clone() }
    }
}

/// Modified Gram-Schmidt with one re-orthogonalization pass.
pub fn orthonormalize(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (n, k) = a.shape();
    let mut q = DMatrix::zeros(n, k);
    for j in 0..k {
        let mut v: DVector<f64> = a.column(j).into_owned();
        let scale = v.norm();
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(invalid("spanning vectors are degenerate"));
        }
        for _ in 0..2 {
            for i in 0..j {
                let qi = q.column(i);
                let c = qi.dot(&v);
                v.axpy(-c, &qi, 1.0);
            }
        }
        let norm = v.norm();
        if norm <= 1e-10 * scale {
            return Err(invalid("spanning vectors are linearly dependent"));
        }
        q.set_column(j, &(v / norm));
    }
    Ok(q)
}

/// Orthonormal basis of the orthogonal complement of the column span of an
/// orthonormal `n x k` matrix.
pub fn orthonormal_complement(b: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, k) = b.shape();
    let mut cols: Vec<DVector<f64>> = b.column_iter().map(|c| c.into_owned()).collect();
    let mut out = Vec::with_capacity(n - k);
    while out.len() < n - k {
        // pick the standard vector with the largest residual
        let mut best: Option<DVector<f64>> = None;
        let mut best_norm = 0.0;
        for e in 0..n {
            let mut v = DVector::zeros(n);
            v[e] = 1.0;
            for _ in 0..2 {
                for c in &cols {
                    let d = c.dot(&v);
                    v.axpy(-d, c, 1.0);
                }
            }
            let nv = v.norm();
            if nv > best_norm {
                best_norm = nv;
                best = Some(v);
            }
        }
        let v = best.expect("complement exists for k < n") / best_norm;
        cols.push(v.clone());
        out.push(v);
    }
    if out.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_planes_are_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for k in 0..=3 {
            let p = GrassmannPlane::random(TorusPoint::origin(3), k, &mut rng).unwrap();
            assert_eq!(p.dim(), k);
        }
    }

    #[test]
    fn complement_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = GrassmannPlane::random(TorusPoint::origin(3), 1, &mut rng).unwrap();
        let c = orthonormal_complement(p.basis());
        assert_eq!(c.ncols(), 2);
        assert!((p.basis().transpose() * &c).abs().max() < 1e-14);
        assert!((c.transpose() * &c - DMatrix::identity(2, 2)).abs().max() < 1e-14);
    }

    #[test]
    fn from_columns_orthonormalizes() {
        let p =
            GrassmannPlane::from_columns(TorusPoint::origin(3), &[vec![2.0, 0.0, 0.0], vec![1.0, 1.0, 0.0]]).unwrap();
        assert_eq!(p.dim(), 2);
        assert!((p.basis()[(1, 1)] - 1.0).abs() < 1e-15);
        assert!(GrassmannPlane::from_columns(TorusPoint::origin(2), &[vec![1.0]]).is_err());
    }

    #[test]
    fn dependent_spanning_set_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 1.0, 2.0]);
        assert!(GrassmannPlane::from_spanning(TorusPoint::origin(2), &m).is_err());
    }

    #[test]
    fn non_orthonormal_basis_rejected() {
        let m = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        assert!(GrassmannPlane::new(TorusPoint::origin(2), m).is_err());
    }
}
