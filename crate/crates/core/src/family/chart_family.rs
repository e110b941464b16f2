//! The composed family `Psi(w) = psi_hat(q_{D+1}) ∘ ... ∘ psi_hat(q_1)` with
//! `psi_hat(q) = psi_L(q_L) ∘ ... ∘ psi_1(q_1)`.

use nalgebra::{DMatrix, Matrix3, Vector3};
use rand::RngCore;

use super::atlas::{Chart, ChartAtlas};
use super::bump::SUPPORT_RADIUS;
use super::local::{block_dim, block_steps, local_map, local_map_fixed, local_map_inverse, local_map_jac, LocalParams};
use super::{Family, FamilyParams};
use crate::error::{invalid, Result};
use crate::geom::{SkewMatrix, TorusPoint};
use crate::sampling::{ln_ball_volume, uniform_ball};

pub const DEFAULT_FLOW_STEP: f64 = 1e-2;
pub const DEFAULT_FD_STEP: f64 = 1e-6;

const SUPPORT2: f64 = SUPPORT_RADIUS * SUPPORT_RADIUS;

/// Structural data of the chart family: atlas, ball radius and numerical steps.
#[derive(Clone, Debug)]
pub struct FamilySpec {
    atlas: ChartAtlas,
    radius: f64,
    flow_step: f64,
    fd_step: f64,
}

/// One block that touched the evaluation point, recorded on the forward pass.
struct Touch {
    block: usize,
    local: Vector3<f64>,
    jac: Matrix3<f64>,
}

impl FamilySpec {
    pub fn new(atlas: ChartAtlas, radius: f64, flow_step: f64, fd_step: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(invalid(format!("family.radius must be positive and finite, got {radius}")));
        }
        if !(flow_step > 0.0) || flow_step > 1.0 {
            return Err(invalid(format!("family.flow_step must lie in (0, 1], got {flow_step}")));
        }
        if !(fd_step > 0.0) || fd_step > 1e-2 {
            return Err(invalid(format!("family.fd_step must lie in (0, 1e-2], got {fd_step}")));
        }
        Ok(Self { atlas, radius, flow_step, fd_step })
    }

    /// Same structure with another ball radius.
    pub fn with_radius(&self, radius: f64) -> Result<Self> {
        Self::new(self.atlas.clone(), radius, self.flow_step, self.fd_step)
    }

    pub fn atlas(&self) -> &ChartAtlas {
        &self.atlas
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn flow_step(&self) -> f64 {
        self.flow_step
    }

    pub fn fd_step(&self) -> f64 {
        self.fd_step
    }

    pub fn n(&self) -> usize {
        self.atlas.dim()
    }

    pub fn block_dim(&self) -> usize {
        block_dim(self.n())
    }

    /// `D + 1`.
    pub fn rounds(&self) -> usize {
        self.atlas.cech_diameter() + 1
    }

    pub fn num_blocks(&self) -> usize {
        self.rounds() * self.atlas.len()
    }

    /// `N = block_dim * (D + 1) * L`.
    pub fn big_n(&self) -> usize {
        self.block_dim() * self.num_blocks()
    }

    /// Offset of block `(round, chart)` in the parameter vector.
    pub fn block_offset(&self, round: usize, chart: usize) -> usize {
        (round * self.atlas.len() + chart) * self.block_dim()
    }

    pub fn check_params(&self, w: &FamilyParams) -> Result<()> {
        if w.len() != self.big_n() {
            return Err(invalid(format!("parameter vector has length {}, expected {}", w.len(), self.big_n())));
        }
        if !w.is_finite() {
            return Err(invalid("non-finite family parameters"));
        }
        Ok(())
    }

    pub fn check_point(&self, x: &TorusPoint) -> Result<()> {
        if x.dim() != self.n() {
            return Err(invalid(format!("point dimension {} differs from family dimension {}", x.dim(), self.n())));
        }
        Ok(())
    }

    #[inline]
    fn chart_of(&self, block: usize) -> &Chart {
        &self.atlas.charts()[block % self.atlas.len()]
    }

    #[inline]
    fn block_slice<'a>(&self, w: &'a FamilyParams, block: usize) -> &'a [f64] {
        let bd = self.block_dim();
        &w.as_slice()[block * bd..(block + 1) * bd]
    }

    fn local_params(&self, t: &[f64], v: &SkewMatrix) -> Result<LocalParams> {
        let n = self.n();
        if t.len() != n || v.dim() != n || t.iter().any(|x| !x.is_finite()) {
            return Err(invalid("chart block has wrong dimension or non-finite entries"));
        }
        let mut tt = Vector3::zeros();
        tt.as_mut_slice()[..n].copy_from_slice(t);
        Ok(LocalParams { t: tt, v: v.padded() })
    }

    /// `psi_i(t, v)(x)`: the local map conjugated by chart `i`, identity off
    /// the chart's support ball.
    pub fn chart_local_apply(&self, chart: usize, t: &[f64], v: &SkewMatrix, x: &TorusPoint) -> Result<TorusPoint> {
        self.check_point(x)?;
        let c = self.atlas.chart(chart)?;
        let lp = self.local_params(t, v)?;
        let p = c.to_local(x);
        if p.norm_squared() >= SUPPORT2 {
            return Ok(*x);
        }
        Ok(c.from_local(&local_map(&lp, self.n(), &p, self.flow_step)))
    }

    /// Spatial Jacobian of [`Self::chart_local_apply`].
    pub fn chart_local_jacobian(
        &self,
        chart: usize,
        t: &[f64],
        v: &SkewMatrix,
        x: &TorusPoint,
    ) -> Result<DMatrix<f64>> {
        self.check_point(x)?;
        let c = self.atlas.chart(chart)?;
        let lp = self.local_params(t, v)?;
        let p = c.to_local(x);
        let n = self.n();
        if p.norm_squared() >= SUPPORT2 {
            return Ok(DMatrix::identity(n, n));
        }
        let (_, j) = local_map_jac(&lp, n, &p, self.flow_step);
        Ok(unpad(&j, n))
    }

    /// Forward pass. When `touches` is given, every block whose support
    /// contains the running point is recorded together with its Jacobian
    /// (blocks with zero parameters included).
    fn forward(
        &self,
        w: &FamilyParams,
        x: &TorusPoint,
        mut jac: Option<&mut Matrix3<f64>>,
        mut touches: Option<&mut Vec<Touch>>,
    ) -> TorusPoint {
        let n = self.n();
        let mut cur = *x;
        for block in 0..self.num_blocks() {
            let coeffs = self.block_slice(w, block);
            let zero = coeffs.iter().all(|c| *c == 0.0);
            if zero && touches.is_none() {
                continue;
            }
            let chart = self.chart_of(block);
            let p = chart.to_local(&cur);
            if p.norm_squared() >= SUPPORT2 {
                continue;
            }
            if zero {
                if let Some(t) = touches.as_deref_mut() {
                    t.push(Touch { block, local: p, jac: Matrix3::identity() });
                }
                continue;
            }
            let lp = LocalParams::decode(n, coeffs);
            if jac.is_some() || touches.is_some() {
                let (q, j) = local_map_jac(&lp, n, &p, self.flow_step);
                if let Some(acc) = jac.as_deref_mut() {
                    *acc = j * *acc;
                }
                if let Some(t) = touches.as_deref_mut() {
                    t.push(Touch { block, local: p, jac: j });
                }
                cur = chart.from_local(&q);
            } else {
                cur = chart.from_local(&local_map(&lp, n, &p, self.flow_step));
            }
        }
        cur
    }

    /// Derivative of a block's local map in its own parameters at local
    /// point `p`, by central differences at fixed RK4 step counts.
    fn local_param_derivative(&self, coeffs: &[f64], p: &Vector3<f64>) -> DMatrix<f64> {
        let n = self.n();
        let bd = self.block_dim();
        let base = LocalParams::decode(n, coeffs);
        let steps = block_steps(&base, n, self.flow_step);
        let h = self.fd_step;
        let mut out = DMatrix::zeros(n, bd);
        let mut buf = coeffs.to_vec();
        for c in 0..bd {
            let orig = buf[c];
            buf[c] = orig + h;
            let plus = local_map_fixed(&LocalParams::decode(n, &buf), n, p, &steps);
            buf[c] = orig - h;
            let minus = local_map_fixed(&LocalParams::decode(n, &buf), n, p, &steps);
            buf[c] = orig;
            for r in 0..n {
                out[(r, c)] = (plus[r] - minus[r]) / (2.0 * h);
            }
        }
        out
    }

    /// Inverse of `Psi(w)`: blocks undone in reverse order, each inverted in
    /// its chart with Newton polishing.
    pub fn inverse_apply(&self, w: &FamilyParams, y: &TorusPoint) -> Result<TorusPoint> {
        self.check_params(w)?;
        self.check_point(y)?;
        let n = self.n();
        let mut cur = *y;
        for block in (0..self.num_blocks()).rev() {
            let coeffs = self.block_slice(w, block);
            if coeffs.iter().all(|c| *c == 0.0) {
                continue;
            }
            let chart = self.chart_of(block);
            let p = chart.to_local(&cur);
            if p.norm_squared() >= SUPPORT2 {
                continue;
            }
            let lp = LocalParams::decode(n, coeffs);
            cur = chart.from_local(&local_map_inverse(&lp, n, &p, self.flow_step));
        }
        Ok(cur)
    }

    /// Step-halving error monitor: distance between `Psi(w)(x)` at the
    /// configured flow step and at half of it.
    pub fn step_halving_error(&self, w: &FamilyParams, x: &TorusPoint) -> Result<f64> {
        self.check_params(w)?;
        self.check_point(x)?;
        let fine = Self { flow_step: self.flow_step / 2.0, ..self.clone() };
        Ok(self.apply(w, x).distance(&fine.apply(w, x)))
    }

    /// `Psi(w)(x)` integrated with the RK4 step counts that `w_ref` uses.
    /// Equals `apply(w, x)` whenever both give the same counts, and is
    /// smooth in `w` around `w_ref`, which finite differences need.
    pub fn apply_with_steps_of(&self, w_ref: &FamilyParams, w: &FamilyParams, x: &TorusPoint) -> Result<TorusPoint> {
        self.check_params(w_ref)?;
        self.check_params(w)?;
        self.check_point(x)?;
        let n = self.n();
        let mut cur = *x;
        for block in 0..self.num_blocks() {
            let coeffs = self.block_slice(w, block);
            let ref_coeffs = self.block_slice(w_ref, block);
            if coeffs.iter().chain(ref_coeffs).all(|c| *c == 0.0) {
                continue;
            }
            let chart = self.chart_of(block);
            let p = chart.to_local(&cur);
            if p.norm_squared() >= SUPPORT2 {
                continue;
            }
            let steps = block_steps(&LocalParams::decode(n, ref_coeffs), n, self.flow_step);
            cur = chart.from_local(&local_map_fixed(&LocalParams::decode(n, coeffs), n, &p, &steps));
        }
        Ok(cur)
    }

    /// Parameter derivative by global central differences (`2N` family
    /// evaluations at the step counts of `w`); with `richardson`, combines
    /// steps `h` and `h/2`.
    pub fn param_derivative_fd(&self, w: &FamilyParams, x: &TorusPoint, richardson: bool) -> Result<DMatrix<f64>> {
        self.check_params(w)?;
        self.check_point(x)?;
        let n = self.n();
        let big_n = self.big_n();
        let base = self.apply(w, x);
        let diff = |c: usize, h: f64| -> Vector3<f64> {
            let mut wp = w.clone();
            wp.as_mut_slice()[c] += h;
            let mut wm = w.clone();
            wm.as_mut_slice()[c] -= h;
            let frozen = |v: &FamilyParams| self.apply_with_steps_of(w, v, x).expect("checked inputs");
            let dp = base.displacement_to(&frozen(&wp));
            let dm = base.displacement_to(&frozen(&wm));
            (dp - dm) / (2.0 * h)
        };
        let h = self.fd_step;
        let mut out = DMatrix::zeros(n, big_n);
        for c in 0..big_n {
            let d = if richardson { (diff(c, h / 2.0) * 4.0 - diff(c, h)) / 3.0 } else { diff(c, h) };
            for r in 0..n {
                out[(r, c)] = d[r];
            }
        }
        Ok(out)
    }

    /// Spatial Jacobian by central differences in `x` with step `h`; with
    /// `richardson`, combines steps `h` and `h/2`.
    pub fn jacobian_fd(&self, w: &FamilyParams, x: &TorusPoint, h: f64, richardson: bool) -> Result<DMatrix<f64>> {
        self.check_params(w)?;
        self.check_point(x)?;
        let n = self.n();
        let base = self.apply(w, x);
        let diff = |c: usize, h: f64| -> Vector3<f64> {
            let mut e = Vector3::zeros();
            e[c] = h;
            let dp = base.displacement_to(&self.apply(w, &x.translate(&e)));
            let dm = base.displacement_to(&self.apply(w, &x.translate(&(-e))));
            (dp - dm) / (2.0 * h)
        };
        let mut out = DMatrix::zeros(n, n);
        for c in 0..n {
            let d = if richardson { (diff(c, h / 2.0) * 4.0 - diff(c, h)) / 3.0 } else { diff(c, h) };
            for r in 0..n {
                out[(r, c)] = d[r];
            }
        }
        Ok(out)
    }
}

fn unpad(m: &Matrix3<f64>, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| m[(i, j)])
}

impl Family for FamilySpec {
    fn dim(&self) -> usize {
        self.n()
    }

    fn param_dim(&self) -> usize {
        self.big_n()
    }

    fn ln_param_volume(&self) -> f64 {
        ln_ball_volume(self.big_n(), self.radius)
    }

    fn sample_params(&self, rng: &mut dyn RngCore) -> FamilyParams {
        FamilyParams::new(uniform_ball(self.big_n(), self.radius, rng))
    }

    fn apply(&self, w: &FamilyParams, x: &TorusPoint) -> TorusPoint {
        debug_assert_eq!(w.len(), self.big_n());
        self.forward(w, x, None, None)
    }

    fn apply_with_jacobian(&self, w: &FamilyParams, x: &TorusPoint) -> (TorusPoint, Matrix3<f64>) {
        debug_assert_eq!(w.len(), self.big_n());
        let mut jac = Matrix3::identity();
        let y = self.forward(w, x, Some(&mut jac), None);
        (y, jac)
    }

    /// Chain rule over the composition: blocks not touching the running
    /// point contribute zero columns; each touching block contributes
    /// `s_i * G * dpsi/dq`, with `G` the Jacobian of the blocks after it.
    fn param_derivative(&self, w: &FamilyParams, x: &TorusPoint) -> DMatrix<f64> {
        debug_assert_eq!(w.len(), self.big_n());
        let n = self.n();
        let bd = self.block_dim();
        let mut touches = Vec::new();
        self.forward(w, x, None, Some(&mut touches));
        let mut out = DMatrix::zeros(n, self.big_n());
        let mut g = Matrix3::<f64>::identity();
        for touch in touches.iter().rev() {
            let chart = self.chart_of(touch.block);
            let local = self.local_param_derivative(self.block_slice(w, touch.block), &touch.local);
            let gn = g.fixed_view::<3, 3>(0, 0);
            for c in 0..bd {
                for r in 0..n {
                    let mut acc = 0.0;
                    for k in 0..n {
                        acc += gn[(r, k)] * local[(k, c)];
                    }
                    out[(r, touch.block * bd + c)] = chart.scale * acc;
                }
            }
            g *= touch.jac;
        }
        out
    }
}
