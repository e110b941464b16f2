//! Determinant-type quantities: normal Jacobians, the intersection
//! determinant and the transversality sine.

use nalgebra::DMatrix;

use super::plane::GrassmannPlane;
use crate::error::{invalid, Result};

fn check_finite(a: &DMatrix<f64>, what: &str) -> Result<()> {
    if a.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(invalid(format!("{what} has non-finite entries")))
    }
}

/// `sqrt(det(A A^T))`: the volume distortion of `A` restricted to the
/// orthogonal complement of its kernel. Zero exactly when `A` has more rows
/// than columns; otherwise zero up to rounding iff `A` is not surjective.
pub fn normal_jacobian(a: &DMatrix<f64>) -> Result<f64> {
    check_finite(a, "linear map")?;
    let (rows, cols) = a.shape();
    if rows == 0 {
        return Ok(1.0);
    }
    if rows > cols {
        return Ok(0.0);
    }
    let gram = a * a.transpose();
    let det = gram.lu().determinant();
    Ok(det.max(0.0).sqrt())
}

/// `det [ -dh * B_V | B_W ]`, the determinant of `(v, w) -> w - dh(v)`
/// written in the given bases.
pub fn det_j(dh: &DMatrix<f64>, b_v: &DMatrix<f64>, b_w: &DMatrix<f64>) -> Result<f64> {
    let n = dh.nrows();
    if dh.ncols() != n {
        return Err(invalid("dh must be square"));
    }
    if b_v.nrows() != n || b_w.nrows() != n {
        return Err(invalid("plane bases must have n rows"));
    }
    if b_v.ncols() + b_w.ncols() != n {
        return Err(invalid(format!("plane dimensions {} + {} do not sum to {n}", b_v.ncols(), b_w.ncols())));
    }
    check_finite(dh, "dh")?;
    let mut m = DMatrix::zeros(n, n);
    let image = -(dh * b_v);
    m.columns_mut(0, b_v.ncols()).copy_from(&image);
    m.columns_mut(b_v.ncols(), b_w.ncols()).copy_from(b_w);
    Ok(m.determinant())
}

/// `|det [B_P | B_Q]|` for complementary planes at the same point: the
/// product of the cosines of the principal angles between `P` and `Q^perp`.
pub fn sin_angle(p: &GrassmannPlane, q: &GrassmannPlane) -> Result<f64> {
    let n = p.ambient_dim();
    if q.ambient_dim() != n || p.dim() + q.dim() != n {
        return Err(invalid(format!("planes of dimension {} and {} are not complementary in R^{n}", p.dim(), q.dim())));
    }
    if p.base().distance(q.base()) > 1e-9 {
        return Err(invalid("planes are based at different points"));
    }
    Ok(sin_angle_bases(p.basis(), q.basis()))
}

/// [`sin_angle`] on raw orthonormal bases.
pub fn sin_angle_bases(b_p: &DMatrix<f64>, b_q: &DMatrix<f64>) -> f64 {
    let n = b_p.nrows();
    let mut m = DMatrix::zeros(n, n);
    m.columns_mut(0, b_p.ncols()).copy_from(b_p);
    m.columns_mut(b_p.ncols(), b_q.ncols()).copy_from(b_q);
    m.determinant().abs().min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::TorusPoint;

    fn line(theta: f64) -> GrassmannPlane {
        let b = DMatrix::from_column_slice(2, 1, &[theta.cos(), theta.sin()]);
        GrassmannPlane::new(TorusPoint::origin(2), b).unwrap()
    }

    #[test]
    fn normal_jacobian_examples() {
        assert_eq!(normal_jacobian(&DMatrix::identity(2, 2)).unwrap(), 1.0);
        let proj = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert_eq!(normal_jacobian(&proj).unwrap(), 1.0);
        let diag = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0]);
        assert!((normal_jacobian(&diag).unwrap() - 6.0).abs() < 1e-14);
    }

    #[test]
    fn normal_jacobian_non_surjective() {
        let tall = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        assert_eq!(normal_jacobian(&tall).unwrap(), 0.0);
        let rank1 = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
        assert!(normal_jacobian(&rank1).unwrap() < 1e-7);
        let bad = DMatrix::from_row_slice(1, 1, &[f64::INFINITY]);
        assert!(normal_jacobian(&bad).is_err());
    }

    #[test]
    fn sin_angle_examples() {
        let e1 = line(0.0);
        let e2 = line(std::f64::consts::FRAC_PI_2);
        assert!((sin_angle(&e1, &e2).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(sin_angle(&e1, &e1).unwrap(), 0.0);
        let l = line(std::f64::consts::FRAC_PI_6);
        assert!((sin_angle(&e1, &l).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn sin_angle_rejects_mismatch() {
        let e1 = line(0.0);
        let plane = GrassmannPlane::new(TorusPoint::origin(2), DMatrix::identity(2, 2)).unwrap();
        assert!(sin_angle(&e1, &plane).is_err());
        let moved = e1.with_base(TorusPoint::new(&[0.3, 0.3]).unwrap());
        assert!(sin_angle(&e1, &moved).is_err());
    }

    #[test]
    fn det_j_examples() {
        let id = DMatrix::<f64>::identity(2, 2);
        let e1 = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let e2 = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        assert_eq!(det_j(&id, &e1, &e2).unwrap(), -1.0);
        assert_eq!(det_j(&id, &e1, &e1).unwrap(), 0.0);
        assert_eq!(det_j(&(id * 2.0), &e1, &e2).unwrap().abs(), 2.0);
        assert!(det_j(&DMatrix::identity(2, 2), &e1, &DMatrix::identity(2, 2)).is_err());
    }
}
