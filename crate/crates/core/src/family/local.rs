//! Maps on the model ball `B(0, 4) ⊂ R^n`: the cut-off rotation
//! `p -> exp(beta(|p|) v) p`, the flows of `beta(|p|) e_i`, and their
//! composition `tau(t) ∘ L(v)`.
//!
//! Points are zero-padded to three components so that n = 2 and n = 3 share
//! the fixed-size kernels; a padded 2D skew matrix only rotates the first
//! two coordinates and the flows only move axes `< n`.

use nalgebra::{DMatrix, Matrix3, Vector3};

use super::bump::{BumpProfile, FLAT_RADIUS, SUPPORT_RADIUS};
use crate::error::{invalid, Result};
use crate::geom::{exp_skew3, SkewMatrix, MAX_DIM};

/// One parameter block `(t, v)` in padded form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalParams {
    pub t: Vector3<f64>,
    pub v: Matrix3<f64>,
}

impl LocalParams {
    pub fn identity() -> Self {
        Self { t: Vector3::zeros(), v: Matrix3::zeros() }
    }

    /// Decode `[t_0..t_{n-1}, v_01, v_02, v_12]` (upper skew entries row-major).
    pub fn decode(n: usize, block: &[f64]) -> Self {
        debug_assert_eq!(block.len(), block_dim(n));
        let mut t = Vector3::zeros();
        t.as_mut_slice()[..n].copy_from_slice(&block[..n]);
        let mut v = Matrix3::zeros();
        let mut k = n;
        for i in 0..n {
            for j in i + 1..n {
                v[(i, j)] = block[k];
                v[(j, i)] = -block[k];
                k += 1;
            }
        }
        Self { t, v }
    }

    pub fn encode(&self, n: usize, out: &mut [f64]) {
        out[..n].copy_from_slice(&self.t.as_slice()[..n]);
        let mut k = n;
        for i in 0..n {
            for j in i + 1..n {
                out[k] = self.v[(i, j)];
                k += 1;
            }
        }
    }
}

/// Parameters per block: `n` translation times plus `n(n-1)/2` rotation generators.
pub const fn block_dim(n: usize) -> usize {
    n + n * (n - 1) / 2
}

#[inline]
fn is_zero_skew(v: &Matrix3<f64>) -> bool {
    v[(1, 0)] == 0.0 && v[(2, 0)] == 0.0 && v[(2, 1)] == 0.0
}

/// `L(v)(p) = exp(beta(|p|) v) p`.
#[inline]
pub(crate) fn rotate(v: &Matrix3<f64>, p: &Vector3<f64>) -> Vector3<f64> {
    let r = p.norm();
    if r >= SUPPORT_RADIUS || is_zero_skew(v) {
        return *p;
    }
    exp_skew3(&(v * BumpProfile::eval(r))) * p
}

/// `L(v)(p)` and its spatial Jacobian
/// `exp(beta v) + beta'(r) (v exp(beta v) p) (p / r)^T`.
#[inline]
pub(crate) fn rotate_jac(v: &Matrix3<f64>, p: &Vector3<f64>) -> (Vector3<f64>, Matrix3<f64>) {
    let r = p.norm();
    if r >= SUPPORT_RADIUS || is_zero_skew(v) {
        return (*p, Matrix3::identity());
    }
    let (beta, dbeta) = BumpProfile::eval_with_deriv(r);
    let e = exp_skew3(&(v * beta));
    let out = e * p;
    let mut jac = e;
    if dbeta != 0.0 {
        jac += (v * out) * (p.transpose() * (dbeta / r));
    }
    (out, jac)
}

/// Number of uniform RK4 steps used for a flow of duration `t`.
#[inline]
pub(crate) fn step_count(t: f64, step: f64) -> usize {
    ((t.abs() / step).ceil() as usize).max(1)
}

/// Time-`t` flow of `beta(|p|) e_axis`, classical RK4 with uniform steps of
/// size at most `step`.
///
/// The flow only moves coordinate `axis`, so the integration is scalar.
/// Inside `B(0, 2)` the field is constant and the flow is an exact
/// translation; outside `B(0, 3)` it is the identity.
#[inline]
pub(crate) fn flow(axis: usize, t: f64, p: &Vector3<f64>, step: f64) -> Vector3<f64> {
    if t == 0.0 {
        return *p;
    }
    flow_fixed(axis, t, p, step_count(t, step))
}

/// Motion below this (absolute, model units) is dropped when the remaining
/// trajectory heads out into the decay region of the field.
const NEGLIGIBLE: f64 = 1e-16;

/// Number of leading RK4 steps of size `dt` (sign included) from `x` that
/// stay inside the flat slab `|x| < a`, where each step is an exact
/// translation by `dt`.
#[inline]
fn flat_steps(x: f64, dt: f64, a: f64, remaining: usize) -> usize {
    if a <= 0.0 || x.abs() >= a {
        return 0;
    }
    let room = if dt > 0.0 { a - x } else { x + a };
    ((room / dt.abs()).floor() as usize).min(remaining)
}

/// [`flow`] with a prescribed number of RK4 steps.
///
/// Steps lying entirely in the flat ball are taken as exact translations and
/// the integration stops once the remaining outward motion is negligible;
/// both agree with plain RK4 on the same step grid up to roundoff.
pub(crate) fn flow_fixed(axis: usize, t: f64, p: &Vector3<f64>, steps: usize) -> Vector3<f64> {
    let r2 = p.norm_squared();
    if r2 >= SUPPORT_RADIUS * SUPPORT_RADIUS {
        return *p;
    }
    let mut q = *p;
    q[axis] += t;
    if r2 < FLAT_RADIUS * FLAT_RADIUS && q.norm_squared() < FLAT_RADIUS * FLAT_RADIUS {
        return q;
    }
    let rho2 = r2 - p[axis] * p[axis];
    let a = (FLAT_RADIUS * FLAT_RADIUS - rho2).max(0.0).sqrt();
    let speed = |x: f64| BumpProfile::eval((x * x + rho2).sqrt());
    let dt = t / steps as f64;
    let mut x = p[axis];
    let mut k = 0;
    while k < steps {
        let skip = flat_steps(x, dt, a, steps - k);
        if skip > 0 {
            x += skip as f64 * dt;
            k += skip;
            continue;
        }
        let k1 = speed(x);
        if x * dt > 0.0 && k1 * dt.abs() * ((steps - k) as f64) < NEGLIGIBLE {
            break;
        }
        let k2 = speed(x + 0.5 * dt * k1);
        let k3 = speed(x + 0.5 * dt * k2);
        let k4 = speed(x + dt * k3);
        x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        k += 1;
    }
    q[axis] = x;
    q
}

/// Flow plus its spatial Jacobian, obtained by integrating the variational
/// equation with the same RK4 scheme (so the Jacobian is the exact
/// derivative of the discrete map).
pub(crate) fn flow_jac(axis: usize, t: f64, p: &Vector3<f64>, step: f64) -> (Vector3<f64>, Matrix3<f64>) {
    if t == 0.0 {
        return (*p, Matrix3::identity());
    }
    let r2 = p.norm_squared();
    if r2 >= SUPPORT_RADIUS * SUPPORT_RADIUS {
        return (*p, Matrix3::identity());
    }
    let mut q = *p;
    q[axis] += t;
    if r2 < FLAT_RADIUS * FLAT_RADIUS && q.norm_squared() < FLAT_RADIUS * FLAT_RADIUS {
        return (q, Matrix3::identity());
    }
    let rho2 = r2 - p[axis] * p[axis];
    let a = (FLAT_RADIUS * FLAT_RADIUS - rho2).max(0.0).sqrt();
    // off-axis part of the position; constant along the flow
    let mut off = *p;
    off[axis] = 0.0;
    // only row `axis` of the Jacobian evolves:
    // y' = beta'(r)/r * (x y + off)
    let rhs = |x: f64, y: &Vector3<f64>| -> (f64, f64, Vector3<f64>) {
        let r = (x * x + rho2).sqrt();
        let (b, db) = BumpProfile::eval_with_deriv(r);
        if db == 0.0 {
            (b, 0.0, Vector3::zeros())
        } else {
            (b, db, (y * x + off) * (db / r))
        }
    };
    let steps = step_count(t, step);
    let dt = t / steps as f64;
    let mut x = p[axis];
    let mut y = Vector3::zeros();
    y[axis] = 1.0;
    let mut k = 0;
    while k < steps {
        let skip = flat_steps(x, dt, a, steps - k);
        if skip > 0 {
            x += skip as f64 * dt;
            k += skip;
            continue;
        }
        let (k1, d1, l1) = rhs(x, &y);
        let horizon = dt.abs() * ((steps - k) as f64);
        if x * dt > 0.0
            && k1 * horizon < NEGLIGIBLE
            && d1.abs() * horizon * (1.0 + y.norm() * (x.abs() + off.norm())) < NEGLIGIBLE
        {
            break;
        }
        let (k2, _, l2) = rhs(x + 0.5 * dt * k1, &(y + l1 * (0.5 * dt)));
        let (k3, _, l3) = rhs(x + 0.5 * dt * k2, &(y + l2 * (0.5 * dt)));
        let (k4, _, l4) = rhs(x + dt * k3, &(y + l3 * dt));
        x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        y += (l1 + l2 * 2.0 + l3 * 2.0 + l4) * (dt / 6.0);
        k += 1;
    }
    q[axis] = x;
    let mut jac = Matrix3::identity();
    jac.set_row(axis, &y.transpose());
    (q, jac)
}

/// `psi(t, v)(p) = h_n^{t_n} ∘ ... ∘ h_1^{t_1} ∘ L(v) (p)`.
#[inline]
pub(crate) fn local_map(params: &LocalParams, n: usize, p: &Vector3<f64>, step: f64) -> Vector3<f64> {
    let mut q = rotate(&params.v, p);
    for axis in 0..n {
        q = flow(axis, params.t[axis], &q, step);
    }
    q
}

/// Step counts of the `n` flows of a block.
#[inline]
pub(crate) fn block_steps(params: &LocalParams, n: usize, step: f64) -> [usize; MAX_DIM] {
    let mut out = [1; MAX_DIM];
    for (axis, o) in out.iter_mut().enumerate().take(n) {
        *o = step_count(params.t[axis], step);
    }
    out
}

/// [`local_map`] with prescribed step counts; smooth in the parameters, which
/// finite differences rely on.
pub(crate) fn local_map_fixed(
    params: &LocalParams,
    n: usize,
    p: &Vector3<f64>,
    steps: &[usize; MAX_DIM],
) -> Vector3<f64> {
    let mut q = rotate(&params.v, p);
    for (axis, &s) in steps.iter().enumerate().take(n) {
        q = flow_fixed(axis, params.t[axis], &q, s);
    }
    q
}

/// Approximate inverse of [`local_map`]: backward flows, then `L(-v)`,
/// polished by Newton steps on the forward map.
pub(crate) fn local_map_inverse(params: &LocalParams, n: usize, y: &Vector3<f64>, step: f64) -> Vector3<f64> {
    if y.norm_squared() >= SUPPORT_RADIUS * SUPPORT_RADIUS {
        return *y;
    }
    let mut q = *y;
    for axis in (0..n).rev() {
        q = flow(axis, -params.t[axis], &q, step);
    }
    q = rotate(&(-params.v), &q);
    for _ in 0..4 {
        let (fq, jac) = local_map_jac(params, n, &q, step);
        let r = fq - y;
        if r.norm() < 1e-15 {
            break;
        }
        match jac.try_inverse() {
            Some(inv) => q -= inv * r,
            None => break,
        }
    }
    q
}

pub(crate) fn local_map_jac(
    params: &LocalParams,
    n: usize,
    p: &Vector3<f64>,
    step: f64,
) -> (Vector3<f64>, Matrix3<f64>) {
    let (mut q, mut jac) = rotate_jac(&params.v, p);
    for axis in 0..n {
        let (q2, j2) = flow_jac(axis, params.t[axis], &q, step);
        q = q2;
        jac = j2 * jac;
    }
    (q, jac)
}

fn pad(p: &[f64]) -> Result<Vector3<f64>> {
    if p.is_empty() || p.len() > MAX_DIM {
        return Err(invalid(format!("point dimension {} not in 1..=3", p.len())));
    }
    if p.iter().any(|x| !x.is_finite()) {
        return Err(invalid("non-finite point"));
    }
    let mut v = Vector3::zeros();
    v.as_mut_slice()[..p.len()].copy_from_slice(p);
    Ok(v)
}

fn unpad_matrix(m: &Matrix3<f64>, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| m[(i, j)])
}

/// Cut-off rotation `exp(beta(|p|) v) p` on `R^n`.
pub fn local_rotation_apply(v: &SkewMatrix, p: &[f64]) -> Result<Vec<f64>> {
    let n = check_skew(v, p)?;
    let q = rotate(&v.padded(), &pad(p)?);
    Ok(q.as_slice()[..n].to_vec())
}

/// Spatial Jacobian of [`local_rotation_apply`].
pub fn local_rotation_jacobian(v: &SkewMatrix, p: &[f64]) -> Result<DMatrix<f64>> {
    let n = check_skew(v, p)?;
    let (_, j) = rotate_jac(&v.padded(), &pad(p)?);
    Ok(unpad_matrix(&j, n))
}

fn check_skew(v: &SkewMatrix, p: &[f64]) -> Result<usize> {
    if v.dim() != p.len() {
        return Err(invalid("skew matrix and point dimensions differ"));
    }
    Ok(p.len())
}

fn check_flow(axis: usize, t: f64, p: &[f64], step: f64) -> Result<()> {
    if axis >= p.len() {
        return Err(invalid(format!("axis {axis} out of range for dimension {}", p.len())));
    }
    if !t.is_finite() || !(step > 0.0) {
        return Err(invalid("flow time must be finite and step positive"));
    }
    Ok(())
}

/// Time-`t` flow of `beta(|p|) e_axis` (RK4, step at most `step`).
pub fn translation_flow(axis: usize, t: f64, p: &[f64], step: f64) -> Result<Vec<f64>> {
    check_flow(axis, t, p, step)?;
    let q = flow(axis, t, &pad(p)?, step);
    Ok(q.as_slice()[..p.len()].to_vec())
}

/// Spatial Jacobian of [`translation_flow`].
pub fn translation_flow_jacobian(axis: usize, t: f64, p: &[f64], step: f64) -> Result<DMatrix<f64>> {
    check_flow(axis, t, p, step)?;
    let (_, j) = flow_jac(axis, t, &pad(p)?, step);
    Ok(unpad_matrix(&j, p.len()))
}
