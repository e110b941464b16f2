//! SO(n) for n <= 3: skew matrices, the Lie exponential and its principal
//! logarithm, and rotations carrying one plane onto another.

use nalgebra::{DMatrix, Matrix3, Vector3};

use super::plane::{orthonormal_complement, GrassmannPlane};
use crate::error::{invalid, Result};

const SKEW_TOL: f64 = 1e-12;
const ROTATION_TOL: f64 = 1e-10;

/// An element of `so(n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SkewMatrix {
    mat: DMatrix<f64>,
}

impl SkewMatrix {
    pub fn new(mat: DMatrix<f64>) -> Result<Self> {
        if !mat.is_square() {
            return Err(invalid("skew matrix must be square"));
        }
        if mat.iter().any(|x| !x.is_finite()) {
            return Err(invalid("skew matrix has non-finite entries"));
        }
        let err = (&mat + mat.transpose()).abs().max();
        if mat.nrows() > 0 && err > SKEW_TOL {
            return Err(invalid(format!("matrix is not skew-symmetric (error {err:e})")));
        }
        Ok(Self { mat })
    }

    pub fn zeros(n: usize) -> Self {
        Self { mat: DMatrix::zeros(n, n) }
    }

    /// Build from the strictly upper triangular entries, row-major:
    /// `(0,1), (0,2), ..., (1,2), ...`.
    pub fn from_upper(n: usize, coeffs: &[f64]) -> Result<Self> {
        if coeffs.len() != n * n.saturating_sub(1) / 2 {
            return Err(invalid(format!(
                "so({n}) needs {} coefficients, got {}",
                n * n.saturating_sub(1) / 2,
                coeffs.len()
            )));
        }
        let mut mat = DMatrix::zeros(n, n);
        let mut c = coeffs.iter();
        for i in 0..n {
            for j in i + 1..n {
                let x = *c.next().unwrap();
                mat[(i, j)] = x;
                mat[(j, i)] = -x;
            }
        }
        Self::new(mat)
    }

    /// Strictly upper triangular entries, row-major.
    pub fn upper(&self) -> Vec<f64> {
        let n = self.dim();
        let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                out.push(self.mat[(i, j)]);
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn mat(&self) -> &DMatrix<f64> {
        &self.mat
    }

    /// Euclidean norm of the upper coefficients; for n <= 3 this is the
    /// rotation angle of `exp`.
    pub fn norm(&self) -> f64 {
        self.upper().iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Zero-padded 3x3 copy (n <= 3).
    pub(crate) fn padded(&self) -> Matrix3<f64> {
        let mut m = Matrix3::zeros();
        for i in 0..self.dim().min(3) {
            for j in 0..self.dim().min(3) {
                m[(i, j)] = self.mat[(i, j)];
            }
        }
        m
    }
}

/// An element of `SO(n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Rotation {
    mat: DMatrix<f64>,
}

impl Rotation {
    pub fn new(mat: DMatrix<f64>) -> Result<Self> {
        if !mat.is_square() {
            return Err(invalid("rotation must be square"));
        }
        let n = mat.nrows();
        let ortho = (mat.transpose() * &mat - DMatrix::<f64>::identity(n, n)).abs().max();
        if n > 0 && !(ortho <= ROTATION_TOL) {
            return Err(invalid(format!("matrix is not orthogonal (error {ortho:e})")));
        }
        let det = mat.determinant();
        if n > 0 && (det - 1.0).abs() > ROTATION_TOL {
            return Err(invalid(format!("rotation has determinant {det}")));
        }
        Ok(Self { mat })
    }

    pub fn identity(n: usize) -> Self {
        Self { mat: DMatrix::identity(n, n) }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn mat(&self) -> &DMatrix<f64> {
        &self.mat
    }
}

/// Principal logarithm together with a flag for the ambiguous branch at
/// rotation angle exactly `pi`.
#[derive(Clone, Debug, PartialEq)]
pub struct RotationLog {
    pub skew: SkewMatrix,
    pub branch_ambiguous: bool,
}

#[inline]
pub(crate) fn vee3(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

#[inline]
pub(crate) fn hat3(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w[2], w[1], w[2], 0.0, -w[0], -w[1], w[0], 0.0)
}

/// Rodrigues formula on a (possibly zero-padded) 3x3 skew matrix.
#[inline]
pub(crate) fn exp_skew3(k: &Matrix3<f64>) -> Matrix3<f64> {
    let w = vee3(k);
    let theta2 = w.norm_squared();
    let (a, b) = if theta2 < 1e-12 {
        // series to O(theta^4)
        (1.0 - theta2 / 6.0, 0.5 - theta2 / 24.0)
    } else {
        let theta = theta2.sqrt();
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    Matrix3::identity() + k * a + k * k * b
}

/// Lie exponential `so(n) -> SO(n)`; closed forms for n <= 3, Pade
/// scaling-and-squaring otherwise.
pub fn rotation_exp(v: &SkewMatrix) -> Rotation {
    let n = v.dim();
    let mat = match n {
        0 | 1 => DMatrix::identity(n, n),
        2 => {
            let theta = v.mat[(1, 0)];
            let (s, c) = theta.sin_cos();
            DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
        }
        3 => {
            let r = exp_skew3(&v.padded());
            DMatrix::from_fn(3, 3, |i, j| r[(i, j)])
        }
        _ => v.mat.clone().exp(),
    };
    Rotation { mat }
}

/// Principal logarithm with planar angles in `(-pi, pi]`.
pub fn rotation_log(a: &Rotation) -> Result<RotationLog> {
    let n = a.dim();
    match n {
        0 | 1 => Ok(RotationLog { skew: SkewMatrix::zeros(n), branch_ambiguous: false }),
        2 => {
            let m = &a.mat;
            let mut theta = m[(1, 0)].atan2(m[(0, 0)]);
            let ambiguous = std::f64::consts::PI - theta.abs() <= 1e-9;
            if ambiguous {
                theta = std::f64::consts::PI;
            }
            Ok(RotationLog { skew: SkewMatrix::from_upper(2, &[-theta])?, branch_ambiguous: ambiguous })
        }
        3 => {
            let m = Matrix3::from_fn(|i, j| a.mat[(i, j)]);
            let (w, ambiguous) = log_so3(&m);
            let k = hat3(&w);
            let skew = SkewMatrix::new(DMatrix::from_fn(3, 3, |i, j| k[(i, j)]))?;
            Ok(RotationLog { skew, branch_ambiguous: ambiguous })
        }
        _ => Err(invalid(format!("rotation_log supports n <= 3, got {n}"))),
    }
}

/// Axis-angle vector of a 3x3 rotation; flag set at angle exactly pi.
pub(crate) fn log_so3(m: &Matrix3<f64>) -> (Vector3<f64>, bool) {
    let skew_part = vee3(&((m - m.transpose()) * 0.5));
    let s = skew_part.norm();
    let c = ((m.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let theta = s.atan2(c);
    if theta < 3.0 {
        // theta / sin(theta), stable near zero
        let f = if theta < 1e-6 { 1.0 + theta * theta / 6.0 } else { theta / theta.sin() };
        return (skew_part * f, false);
    }
    // near pi: the axis comes from the symmetric part
    let sym = (m + m.transpose()) * 0.5;
    let uut = (sym - Matrix3::identity() * c) / (1.0 - c);
    let j = (0..3).max_by(|&a, &b| uut[(a, a)].partial_cmp(&uut[(b, b)]).unwrap()).unwrap();
    let mut u: Vector3<f64> = uut.column(j).into_owned() / uut[(j, j)].max(0.0).sqrt();
    u /= u.norm();
    let ambiguous = s <= 1e-12;
    if u.dot(&skew_part) < 0.0 {
        u = -u;
    }
    (u * theta, ambiguous)
}

/// A rotation `A` with `A * span(p) = span(q)`.
///
/// Within each of the plane and its complement the bases are aligned by
/// orthogonal Procrustes, which keeps the rotation angle small. Returns the
/// identity when the spans already coincide.
pub fn align_rotation(p: &GrassmannPlane, q: &GrassmannPlane) -> Result<Rotation> {
    let n = p.ambient_dim();
    if q.ambient_dim() != n || p.dim() != q.dim() {
        return Err(invalid("align_rotation needs planes of equal dimension in the same R^n"));
    }
    if p.gap(q) <= 1e-12 {
        return Ok(Rotation::identity(n));
    }
    let b1 = p.basis();
    let b2 = q.basis();
    let c1 = orthonormal_complement(b1);
    let c2 = orthonormal_complement(b2);
    let b2r = procrustes_align(b1, b2);
    let mut c2r = procrustes_align(&c1, &c2);

    let mut src = DMatrix::zeros(n, n);
    let mut dst = DMatrix::zeros(n, n);
    let k = b1.ncols();
    src.columns_mut(0, k).copy_from(b1);
    src.columns_mut(k, n - k).copy_from(&c1);
    let mut b2r = b2r;
    let det_guess = {
        dst.columns_mut(0, k).copy_from(&b2r);
        dst.columns_mut(k, n - k).copy_from(&c2r);
        (&dst * src.transpose()).determinant()
    };
    if det_guess < 0.0 {
        // flip one destination column; spans are unchanged
        if n - k > 0 {
            let mut col = c2r.column_mut(n - k - 1);
            col.neg_mut();
        } else {
            let mut col = b2r.column_mut(k - 1);
            col.neg_mut();
        }
        dst.columns_mut(0, k).copy_from(&b2r);
        dst.columns_mut(k, n - k).copy_from(&c2r);
    }
    let a = dst * src.transpose();
    Rotation::new(a)
}

/// `dst * R` with `R` orthogonal chosen to bring `dst` closest to `src`.
fn procrustes_align(src: &DMatrix<f64>, dst: &DMatrix<f64>) -> DMatrix<f64> {
    let k = src.ncols();
    if k == 0 {
        return dst.clone();
    }
    let x = src.transpose() * dst;
    let svd = x.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    dst * (vt.transpose() * u.transpose())
}
