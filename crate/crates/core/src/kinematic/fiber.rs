//! Co-area estimator for the fiber integral of `|det J| / NJ(d ev_p)` over
//! `{h : h(p) = q}`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::family::Family;
use crate::geom::{det_j, GrassmannPlane};
use crate::sampling::{ln_ball_volume, sample_rng};

use super::mc::{family_bytes, input_hash, EstimateReport, UNRELIABLE_DEGENERATE_FRACTION};

/// Default radius of the target ball around `q`.
pub const DEFAULT_FIBER_EPS: f64 = 0.02;
/// `|det J|` below this counts as a tangential (degenerate) accepted sample.
const TANGENT_DET: f64 = 1e-12;

/// Estimates at `eps` and `eps / 2` from one sample set, with the
/// agreement check between them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiberReport {
    pub eps: f64,
    pub estimate: EstimateReport,
    pub accepted: usize,
    /// `None` when no sample landed in the smaller ball.
    pub half: Option<EstimateReport>,
    pub accepted_half: usize,
    /// `|e - e_half| <= 3 sqrt(se^2 + se_half^2)`.
    pub consistent: bool,
}

fn check_planes(n: usize, sp: &GrassmannPlane, sq: &GrassmannPlane, eps: f64) -> Result<()> {
    if sp.ambient_dim() != n || sq.ambient_dim() != n {
        return Err(invalid("plane and family dimensions differ"));
    }
    if sp.dim() + sq.dim() != n {
        return Err(invalid("planes are not complementary"));
    }
    if !(eps > 0.0 && eps < 0.5) {
        return Err(invalid("eps must lie in (0, 1/2)"));
    }
    Ok(())
}

/// Samples are processed in chunks of this size; each chunk keeps only its
/// accepted samples, and chunks are combined in index order.
const CHUNK: u64 = 4096;

/// Accepted samples: `|det J|` and whether the sample is in the half ball.
struct Pass {
    num_samples: usize,
    accepted: Vec<(f64, bool)>,
}

fn run_pass<F: Family + ?Sized>(
    family: &F,
    sp: &GrassmannPlane,
    sq: &GrassmannPlane,
    eps: f64,
    num_samples: usize,
    seed: u64,
) -> Result<Pass> {
    let n = family.dim();
    check_planes(n, sp, sq, eps)?;
    if num_samples == 0 {
        return Err(invalid("num_samples must be at least 1"));
    }
    let p = *sp.base();
    let q = *sq.base();
    let total = num_samples as u64;
    let chunks: Vec<Result<Vec<(f64, bool)>>> = (0..total.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut out = Vec::new();
            for j in c * CHUNK..((c + 1) * CHUNK).min(total) {
                let mut rng = sample_rng(seed, j);
                let h = family.sample_params(&mut rng);
                let (y, jac) = family.apply_with_jacobian(&h, &p);
                let d = y.distance(&q);
                if d >= eps {
                    continue;
                }
                let dh = DMatrix::from_fn(n, n, |r, c| jac[(r, c)]);
                out.push((det_j(&dh, sp.basis(), sq.basis())?.abs(), d < eps / 2.0));
            }
            Ok(out)
        })
        .collect();
    let mut accepted = Vec::new();
    for c in chunks {
        accepted.extend(c?);
    }
    Ok(Pass { num_samples, accepted })
}

/// Mean and standard error of a length-`total` sample that is zero except
/// for `values`.
fn sparse_mean_and_se(values: &[f64], total: usize) -> (f64, f64) {
    let s = total as f64;
    let mean = values.iter().sum::<f64>() / s;
    if total < 2 {
        return (mean, 0.0);
    }
    let dev: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    let zeros = (total - values.len()) as f64;
    let var = (dev + zeros * mean * mean) / (s - 1.0);
    (mean, (var / s).sqrt())
}

fn report_from(
    family_ln_vol: f64,
    n: usize,
    eps: f64,
    accepted: &[f64],
    total: usize,
    seed: u64,
    hash: &str,
) -> Result<EstimateReport> {
    let (mean, se) = sparse_mean_and_se(accepted, total);
    let scale = (family_ln_vol - ln_ball_volume(n, eps)).exp();
    let estimate = scale * mean;
    let std_error = scale * se;
    if !estimate.is_finite() || !std_error.is_finite() {
        return Err(Error::NonFinite(format!("estimate {estimate}, std error {std_error}")));
    }
    let tangent = accepted.iter().filter(|&&v| v < TANGENT_DET).count() as f64;
    let degenerate = if accepted.is_empty() { 0.0 } else { tangent / accepted.len() as f64 };
    Ok(EstimateReport {
        estimate,
        std_error,
        num_samples: total,
        seed,
        degenerate_fraction: degenerate,
        config_hash: hash.to_string(),
        ln_param_volume: family_ln_vol,
        mean_count: accepted.len() as f64 / total as f64,
        low_angle_fraction: 0.0,
        unreliable: degenerate > UNRELIABLE_DEGENERATE_FRACTION,
    })
}

fn plane_bytes(s: &GrassmannPlane) -> Vec<u8> {
    let mut out = Vec::new();
    for c in s.base().coords() {
        out.extend(c.to_bits().to_le_bytes());
    }
    for x in s.basis().iter() {
        out.extend(x.to_bits().to_le_bytes());
    }
    out
}

/// Fiber-integral estimate at `eps` and `eps / 2` from a single sample set.
/// `mean_count` in each report holds the acceptance rate.
pub fn fiber_integral_with_check<F: Family + ?Sized>(
    family: &F,
    sp: &GrassmannPlane,
    sq: &GrassmannPlane,
    eps: f64,
    num_samples: usize,
    seed: u64,
) -> Result<FiberReport> {
    let pass = run_pass(family, sp, sq, eps, num_samples, seed)?;
    let n = family.dim();
    let hash = input_hash(&[
        &family_bytes(family),
        &plane_bytes(sp),
        &plane_bytes(sq),
        &eps.to_bits().to_le_bytes(),
        &(num_samples as u64).to_le_bytes(),
        &seed.to_le_bytes(),
    ]);
    let acc_full: Vec<f64> = pass.accepted.iter().map(|x| x.0).collect();
    let acc_half: Vec<f64> = pass.accepted.iter().filter(|x| x.1).map(|x| x.0).collect();
    if acc_full.is_empty() {
        return Err(Error::InsufficientSamples { acceptance_rate: 0.0 });
    }
    let lnv = family.ln_param_volume();
    let total = pass.num_samples;
    let estimate = report_from(lnv, n, eps, &acc_full, total, seed, &hash)?;
    let half_report =
        if acc_half.is_empty() { None } else { Some(report_from(lnv, n, eps / 2.0, &acc_half, total, seed, &hash)?) };
    let consistent = half_report
        .as_ref()
        .is_some_and(|h| (estimate.estimate - h.estimate).abs() <= 3.0 * estimate.std_error.hypot(h.std_error));
    Ok(FiberReport {
        eps,
        estimate,
        accepted: acc_full.len(),
        half: half_report,
        accepted_half: acc_half.len(),
        consistent,
    })
}

/// `Leb(H) / Leb(B_eps) * mean_j [ 1{Psi(h_j)(p) in B_eps(q)} |det J(dh_j, B_P, B_Q)| ]`.
pub fn fiber_integral_estimate<F: Family + ?Sized>(
    family: &F,
    sp: &GrassmannPlane,
    sq: &GrassmannPlane,
    eps: f64,
    num_samples: usize,
    seed: u64,
) -> Result<EstimateReport> {
    Ok(fiber_integral_with_check(family, sp, sq, eps, num_samples, seed)?.estimate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::TranslationFamily;
    use crate::geom::{sin_angle, TorusPoint};

    fn planes(theta: f64) -> (GrassmannPlane, GrassmannPlane) {
        let p = TorusPoint::new(&[0.2, 0.3]).unwrap();
        let q = TorusPoint::new(&[0.7, 0.1]).unwrap();
        let bv = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let bw = DMatrix::from_column_slice(2, 1, &[theta.cos(), theta.sin()]);
        (GrassmannPlane::new(p, bv).unwrap(), GrassmannPlane::new(q, bw).unwrap())
    }

    #[test]
    fn translation_fiber_is_the_sine() {
        let fam = TranslationFamily::new(2).unwrap();
        let (sp, sq) = planes(0.7);
        let r = fiber_integral_with_check(&fam, &sp, &sq, 0.05, 200_000, 3).unwrap();
        let truth = sin_angle(&sp.with_base(*sq.base()), &sq).unwrap();
        assert!((r.estimate.estimate - truth).abs() < 4.0 * r.estimate.std_error, "{r:?}");
        assert!(r.half.is_some());
    }

    #[test]
    fn sparse_statistics_match_dense() {
        let vals = [0.5, 2.0, 1.5];
        let mut dense = vec![0.0; 10];
        dense[..3].copy_from_slice(&vals);
        let (m, se) = sparse_mean_and_se(&vals, 10);
        let (md, sed) = crate::kinematic::mc::mean_and_se(&dense);
        assert!((m - md).abs() < 1e-15 && (se - sed).abs() < 1e-15);
    }

    #[test]
    fn no_acceptance_is_an_error() {
        let fam = TranslationFamily::new(2).unwrap();
        let (sp, sq) = planes(0.7);
        let e = fiber_integral_estimate(&fam, &sp, &sq, 1e-4, 10, 3).unwrap_err();
        assert!(matches!(e, Error::InsufficientSamples { .. }));
    }
}
