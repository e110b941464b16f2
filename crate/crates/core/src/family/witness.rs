//! Explicit parameters carrying a tangent plane at `p` onto one at `q`.

use nalgebra::Vector3;
use rand::Rng;

use super::{Family, FamilyParams, FamilySpec};
use crate::error::{invalid, Error, Result};
use crate::geom::{align_rotation, rotation_log, GrassmannPlane, TorusPoint};
use crate::sampling::sample_rng;

/// Residuals of a witness: `|Psi(w)(p) - q|` and the projector gap between
/// `dPsi(w)(sigma_p)` and `sigma_q`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WitnessCheck {
    pub point_error: f64,
    pub plane_gap: f64,
}

fn write_block(spec: &FamilySpec, w: &mut FamilyParams, round: usize, chart: usize, t: &[f64], v: &[f64]) {
    let n = spec.n();
    let off = spec.block_offset(round, chart);
    let s = w.as_mut_slice();
    s[off..off + n].copy_from_slice(t);
    s[off + n..off + spec.block_dim()].copy_from_slice(v);
}

/// Route through the nerve from the chart of `p` to the chart of `q`,
/// one pure translation per hop (into the midpoint of consecutive chart
/// centers), then rotate and translate in the chart of `q`. Every step acts
/// where the local maps are exactly linear.
fn construct(spec: &FamilySpec, sp: &GrassmannPlane, sq: &GrassmannPlane) -> Result<FamilyParams> {
    let n = spec.n();
    if sp.ambient_dim() != n || sq.ambient_dim() != n || sp.base().dim() != n || sq.base().dim() != n {
        return Err(invalid("planes must live on the family's torus"));
    }
    if sp.dim() != sq.dim() {
        return Err(invalid("witness needs planes of equal dimension"));
    }
    let p = *sp.base();
    let q = *sq.base();
    let mut w = FamilyParams::zeros(spec.big_n());
    if p == q && sp.gap(sq) <= 1e-12 {
        return Ok(w);
    }
    let atlas = spec.atlas();
    let uncovered = |x: &TorusPoint| Error::Internal(format!("{x} lies in no inner chart set"));
    let start = atlas.containing_inner(&p).ok_or_else(|| uncovered(&p))?;
    let end = atlas.containing_inner(&q).ok_or_else(|| uncovered(&q))?;
    let path = atlas.route(start, end)?;
    if path.len() > spec.rounds() {
        return Err(Error::Internal("nerve route longer than the number of rounds".into()));
    }
    let no_rotation = vec![0.0; spec.block_dim() - n];
    let mut cur = p;
    for (round, hop) in path.windows(2).enumerate() {
        let a = atlas.charts()[hop[0]];
        let b = atlas.charts()[hop[1]];
        let mid = a.center.translate(&(a.center.displacement_to(&b.center) * 0.5));
        let t = a.to_local(&mid) - a.to_local(&cur);
        write_block(spec, &mut w, round, hop[0], &t.as_slice()[..n], &no_rotation);
        cur = mid;
    }
    let round = path.len() - 1;
    let chart = atlas.charts()[end];
    let rot = align_rotation(sp, sq)?;
    let log = rotation_log(&rot)?;
    let mut a3 = nalgebra::Matrix3::identity();
    for i in 0..n {
        for j in 0..n {
            a3[(i, j)] = rot.mat()[(i, j)];
        }
    }
    let c0: Vector3<f64> = chart.to_local(&cur);
    let t = chart.to_local(&q) - a3 * c0;
    write_block(spec, &mut w, round, end, &t.as_slice()[..n], &log.skew.upper());
    Ok(w)
}

/// Parameters `w` with `Psi(w)(p) = q` and `dPsi(w)_p(sigma_p) = sigma_q`.
///
/// Fails with [`Error::RTooSmall`] when the witness leaves the parameter ball.
pub fn witness_a2(spec: &FamilySpec, sp: &GrassmannPlane, sq: &GrassmannPlane) -> Result<FamilyParams> {
    let w = construct(spec, sp, sq)?;
    let norm = w.norm();
    if norm > spec.radius() {
        return Err(Error::RTooSmall { radius: spec.radius(), required: norm });
    }
    Ok(w)
}

/// Evaluate the witness postconditions.
pub fn verify_witness(
    spec: &FamilySpec,
    w: &FamilyParams,
    sp: &GrassmannPlane,
    sq: &GrassmannPlane,
) -> Result<WitnessCheck> {
    spec.check_params(w)?;
    let p = *sp.base();
    let y = spec.apply(w, &p);
    let point_error = y.distance(sq.base());
    let pushed = sp.pushed(&spec.jacobian(w, &p), y)?;
    Ok(WitnessCheck { point_error, plane_gap: pushed.gap(sq) })
}

/// Random pair of `k`-planes at independent uniform base points.
pub fn random_plane_pair(n: usize, k: usize, rng: &mut impl Rng) -> Result<(GrassmannPlane, GrassmannPlane)> {
    let mut point = || {
        let c: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        TorusPoint::new(&c)
    };
    let p = point()?;
    let q = point()?;
    Ok((GrassmannPlane::random(p, k, rng)?, GrassmannPlane::random(q, k, rng)?))
}

/// Twice the largest witness norm over `pairs` random plane pairs (all
/// plane dimensions `0..=n` in turn).
pub fn calibrate_radius(spec: &FamilySpec, pairs: usize, seed: u64) -> Result<f64> {
    let n = spec.n();
    let mut rng = sample_rng(seed, 0);
    let mut max_norm: f64 = 0.0;
    for i in 0..pairs {
        let (sp, sq) = random_plane_pair(n, i % (n + 1), &mut rng)?;
        max_norm = max_norm.max(construct(spec, &sp, &sq)?.norm());
    }
    Ok(2.0 * max_norm)
}
