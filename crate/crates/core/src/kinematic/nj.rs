//! Normal-Jacobian ratios relating the transversality determinant to the
//! submersion `ev_p`, computed two independent ways.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::family::{family_jacobian, family_param_derivative, Family, FamilyParams};
use crate::geom::{det_j, normal_jacobian, orthonormalize, sin_angle_bases, TorusPoint};

/// Normal Jacobians below this signal a failed submersion or projection.
pub const NJ_FLOOR: f64 = 1e-12;
const ORTHONORMAL_TOL: f64 = 1e-10;

fn check_bases(n: usize, b_v: &DMatrix<f64>, b_w: &DMatrix<f64>) -> Result<()> {
    if b_v.nrows() != n || b_w.nrows() != n {
        return Err(invalid("plane bases must have n rows"));
    }
    if b_v.ncols() + b_w.ncols() != n {
        return Err(invalid("plane dimensions are not complementary"));
    }
    for b in [b_v, b_w] {
        let k = b.ncols();
        let err = (b.transpose() * b - DMatrix::<f64>::identity(k, k)).abs().max();
        if k > 0 && !(err <= ORTHONORMAL_TOL) {
            return Err(invalid(format!("plane basis is not orthonormal (error {err:e})")));
        }
    }
    Ok(())
}

/// `|det J(h, B_V, B_W)| / NJ(d(ev_p)_h)` with `dh` and `d(ev_p)` taken
/// from the family.
pub fn nj_ratio_formula<F: Family + ?Sized>(
    family: &F,
    w: &FamilyParams,
    p: &TorusPoint,
    b_v: &DMatrix<f64>,
    b_w: &DMatrix<f64>,
) -> Result<f64> {
    check_bases(family.dim(), b_v, b_w)?;
    let dh = family_jacobian(family, w, p)?;
    let dev = family_param_derivative(family, w, p)?;
    let nj = normal_jacobian(&dev)?;
    if nj < NJ_FLOOR {
        return Err(Error::SubmersionFailure { normal_jacobian: nj });
    }
    Ok(det_j(&dh, b_v, b_w)?.abs() / nj)
}

/// The same ratio from the solution space
/// `E = {(hdot, a, b) : B_W b - dh B_V a = d(ev_p) hdot}`: an orthonormal
/// basis of `E` is built from a full QR factorization of the constraint
/// matrix, then `|det Pi_1| / NJ(Pi_2)` is evaluated for the projections
/// onto the parameter and plane coordinates.
///
/// Parameter columns on which `d(ev_p)` vanishes contribute an orthogonal
/// identity block to `Pi_1` and nothing to `Pi_2`, so they are dropped
/// before factoring.
pub fn nj_ratio_direct<F: Family + ?Sized>(
    family: &F,
    w: &FamilyParams,
    p: &TorusPoint,
    b_v: &DMatrix<f64>,
    b_w: &DMatrix<f64>,
) -> Result<f64> {
    let n = family.dim();
    check_bases(n, b_v, b_w)?;
    let dh = family_jacobian(family, w, p)?;
    let dev = family_param_derivative(family, w, p)?;
    let active: Vec<usize> = (0..dev.ncols()).filter(|&c| dev.column(c).iter().any(|&x| x != 0.0)).collect();
    let na = active.len();
    if na < n {
        return Err(Error::SubmersionFailure { normal_jacobian: 0.0 });
    }
    // constraint M z = 0 with z = (hdot_active, a, b)
    let k = b_v.ncols();
    let m = na + n;
    let mut c = DMatrix::zeros(n, m);
    for (j, &col) in active.iter().enumerate() {
        c.set_column(j, &(-dev.column(col)));
    }
    c.columns_mut(na, k).copy_from(&(-(&dh * b_v)));
    c.columns_mut(na + k, n - k).copy_from(b_w);
    // rows n.. of Q^T span ker M when M has rank n
    let qr = c.transpose().qr();
    let r = qr.r();
    let rmax = r.diagonal().abs().max();
    if r.diagonal().iter().any(|d| d.abs() <= 1e-13 * rmax.max(1.0)) {
        return Err(Error::SubmersionFailure { normal_jacobian: 0.0 });
    }
    let mut qt = DMatrix::<f64>::identity(m, m);
    qr.q_tr_mul(&mut qt);
    let basis = qt.rows(n, na).transpose(); // m x na, orthonormal columns
    let pi1 = basis.rows(0, na).into_owned();
    let pi2 = basis.rows(na, n).into_owned();
    let nj2 = normal_jacobian(&pi2)?;
    if nj2 < NJ_FLOOR {
        return Err(Error::Internal(format!("projection to the plane factor is rank deficient ({nj2:e})")));
    }
    Ok(pi1.determinant().abs() / nj2)
}

/// Both sides of `det(G G^T)^{-1/2} = |det(pi_1|S)| / NJ(pi_2|S)` for the
/// graph `S = {(x, G x)}` of a surjective `G: R^a -> R^b`.
pub fn graph_nj_sides(g: &DMatrix<f64>) -> Result<(f64, f64)> {
    let (b, a) = g.shape();
    if a == 0 || b == 0 || b > a {
        return Err(invalid("G must map R^a onto R^b with 1 <= b <= a"));
    }
    if g.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("G has non-finite entries".into()));
    }
    let gram_det = (g * g.transpose()).determinant();
    if !(gram_det > 0.0) {
        return Err(invalid("G is not surjective"));
    }
    let lhs = 1.0 / gram_det.sqrt();
    let mut span = DMatrix::zeros(a + b, a);
    span.view_mut((0, 0), (a, a)).fill_with_identity();
    span.view_mut((a, 0), (b, a)).copy_from(g);
    let q = span.qr().q();
    let pi1 = q.rows(0, a).into_owned();
    let pi2 = q.rows(a, b).into_owned();
    let rhs = pi1.determinant().abs() / normal_jacobian(&pi2)?;
    Ok((lhs, rhs))
}

/// The sine-angle comparison `|det J| ~ sin(dh(P), Q)` up to `eta^k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SineBound {
    pub det_j: f64,
    pub sin_angle: f64,
    /// `max(|dh|, |dh^{-1}|)` in operator norm.
    pub eta: f64,
    pub k: usize,
    pub holds: bool,
}

pub fn det_j_sine_bound(dh: &DMatrix<f64>, b_v: &DMatrix<f64>, b_w: &DMatrix<f64>) -> Result<SineBound> {
    let n = dh.nrows();
    check_bases(n, b_v, b_w)?;
    let dj = det_j(dh, b_v, b_w)?.abs();
    let k = b_v.ncols();
    let sin = if k == 0 { sin_angle_bases(b_v, b_w) } else { sin_angle_bases(&orthonormalize(&(dh * b_v))?, b_w) };
    let sv = dh.clone().svd(false, false).singular_values;
    let (smax, smin) = (sv.max(), sv.min());
    if !(smin > 0.0) {
        return Err(invalid("dh is singular"));
    }
    let eta = smax.max(1.0 / smin);
    let bound = eta.powi(k as i32);
    let slack = 1e-9;
    let holds = if sin == 0.0 {
        dj <= slack
    } else {
        let ratio = dj / sin;
        ratio >= (1.0 - slack) / bound && ratio <= bound * (1.0 + slack)
    };
    Ok(SineBound { det_j: dj, sin_angle: sin, eta, k, holds })
}
