//! Monte Carlo estimate of the family integral of the intersection count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};
use crate::family::{Family, FamilyParams, TranslationFamily};
use crate::intersect::{count_intersections, DEFAULT_TAU_TRANS, REPORT_SIN_THRESHOLD};
use crate::sampling::sample_rng;
use crate::submanifold::{pushforward_with, DiscreteSubmanifold, SubmanifoldSpec, TangentMode, DEFAULT_MAX_DEPTH};

/// Runs whose degenerate fraction exceeds this are flagged unreliable.
pub const UNRELIABLE_DEGENERATE_FRACTION: f64 = 0.05;
/// Vertex spacing used to discretize geodesic segments for the translation harness.
pub const TRANSLATION_SPACING: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub estimate: f64,
    /// Sample standard deviation of the scaled summand over `sqrt(num_samples)`.
    pub std_error: f64,
    pub num_samples: usize,
    pub seed: u64,
    /// Fraction of samples with at least one degenerate record.
    pub degenerate_fraction: f64,
    pub config_hash: String,
    /// `ln Leb(H)`; the estimate is `exp` of this times `mean_count`.
    pub ln_param_volume: f64,
    pub mean_count: f64,
    /// Fraction of counted records whose `sin_angle` is below the report threshold.
    pub low_angle_fraction: f64,
    pub unreliable: bool,
}

impl EstimateReport {
    pub fn with_config_hash(mut self, hash: impl Into<String>) -> Self {
        self.config_hash = hash.into();
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McOptions {
    pub tau_trans: f64,
    pub tangent_mode: TangentMode,
    pub max_depth: usize,
    pub low_angle_threshold: f64,
}

impl Default for McOptions {
    fn default() -> Self {
        Self {
            tau_trans: DEFAULT_TAU_TRANS,
            tangent_mode: TangentMode::Chord,
            max_depth: DEFAULT_MAX_DEPTH,
            low_angle_threshold: REPORT_SIN_THRESHOLD,
        }
    }
}

/// Outcome of one sampled family member for one `(V, W)` pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub index: u64,
    pub count: u32,
    pub degenerate: bool,
    pub low_angle: u32,
}

impl SampleRecord {
    pub const CSV_HEADER: &'static str = "index,count,degenerate,low_angle";

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{}", self.index, self.count, self.degenerate, self.low_angle)
    }
}

/// All per-sample records of one estimator run, in sample-index order.
#[derive(Clone, Debug, PartialEq)]
pub struct McRun {
    pub seed: u64,
    pub ln_param_volume: f64,
    pub config_hash: String,
    pub samples: Vec<SampleRecord>,
}

impl McRun {
    pub fn report(&self) -> Result<EstimateReport> {
        self.prefix_report(self.samples.len())
    }

    /// Report over the first `k` samples. Samples depend only on
    /// `(seed, index)`, so this equals a fresh run with `num_samples = k`.
    pub fn prefix_report(&self, k: usize) -> Result<EstimateReport> {
        if k == 0 || k > self.samples.len() {
            return Err(invalid(format!("prefix length {k} outside 1..={}", self.samples.len())));
        }
        let s = &self.samples[..k];
        let counts: Vec<f64> = s.iter().map(|r| r.count as f64).collect();
        let (mean, se) = mean_and_se(&counts);
        let scale = self.ln_param_volume.exp();
        let estimate = scale * mean;
        let std_error = scale * se;
        if !estimate.is_finite() || !std_error.is_finite() {
            return Err(Error::NonFinite(format!("estimate {estimate}, std error {std_error}")));
        }
        let degenerate = s.iter().filter(|r| r.degenerate).count() as f64 / k as f64;
        let total: u64 = s.iter().map(|r| r.count as u64).sum();
        let low: u64 = s.iter().map(|r| r.low_angle as u64).sum();
        Ok(EstimateReport {
            estimate,
            std_error,
            num_samples: k,
            seed: self.seed,
            degenerate_fraction: degenerate,
            config_hash: self.config_hash.clone(),
            ln_param_volume: self.ln_param_volume,
            mean_count: mean,
            low_angle_fraction: if total > 0 { low as f64 / total as f64 } else { 0.0 },
            unreliable: degenerate > UNRELIABLE_DEGENERATE_FRACTION,
        })
    }
}

/// Mean and standard error (`n - 1` denominator; zero for a single value).
pub(crate) fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// SHA-256 over the estimator inputs, used when no config hash is supplied.
pub(crate) fn input_hash(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    hex::encode(h.finalize())
}

pub(crate) fn mesh_bytes(mesh: &DiscreteSubmanifold) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend((mesh.ambient_dim() as u64).to_le_bytes());
    out.extend((mesh.dim() as u64).to_le_bytes());
    for v in mesh.vertices() {
        for c in v.coords() {
            out.extend(c.to_bits().to_le_bytes());
        }
    }
    for e in 0..mesh.num_elements() {
        for i in mesh.element_vertices(e) {
            out.extend((i as u64).to_le_bytes());
        }
    }
    out
}

pub(crate) fn family_bytes<F: Family + ?Sized>(family: &F) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend((family.dim() as u64).to_le_bytes());
    out.extend((family.param_dim() as u64).to_le_bytes());
    out.extend(family.ln_param_volume().to_bits().to_le_bytes());
    out
}

fn check_pair(v: &DiscreteSubmanifold, w: &DiscreteSubmanifold, n: usize) -> Result<()> {
    if v.ambient_dim() != n || w.ambient_dim() != n {
        return Err(invalid("submanifold and family dimensions differ"));
    }
    if v.dim() + w.dim() != n {
        return Err(invalid(format!("dimensions {} and {} are not complementary in T^{n}", v.dim(), w.dim())));
    }
    Ok(())
}

/// Run the estimator for several `(V, W)` pairs with common random numbers:
/// sample `j` uses the same `h_j` for every pair, and each `V` is pushed
/// forward once per sample. Each pair's result fails independently with the
/// error of its lowest-index failing sample.
pub fn mc_run_pairs<F: Family + ?Sized>(
    family: &F,
    vs: &[DiscreteSubmanifold],
    ws: &[DiscreteSubmanifold],
    pairs: &[(usize, usize)],
    num_samples: usize,
    seed: u64,
    opts: &McOptions,
) -> Result<Vec<Result<McRun>>> {
    if num_samples == 0 {
        return Err(invalid("num_samples must be at least 1"));
    }
    if pairs.is_empty() {
        return Err(invalid("no pairs given"));
    }
    let n = family.dim();
    for &(a, b) in pairs {
        let (v, w) = (
            vs.get(a).ok_or_else(|| invalid(format!("pair references missing V {a}")))?,
            ws.get(b).ok_or_else(|| invalid(format!("pair references missing W {b}")))?,
        );
        check_pair(v, w, n)?;
    }
    if !(opts.tau_trans > 0.0) {
        return Err(invalid("tau_trans must be positive"));
    }
    let mut used = vec![false; vs.len()];
    for &(a, _) in pairs {
        used[a] = true;
    }

    let per_sample: Vec<Vec<Result<SampleRecord>>> = (0..num_samples as u64)
        .into_par_iter()
        .map(|j| {
            let mut rng = sample_rng(seed, j);
            let h = family.sample_params(&mut rng);
            let pushed: Vec<Option<Result<DiscreteSubmanifold>>> = vs
                .iter()
                .zip(&used)
                .map(|(v, &u)| u.then(|| pushforward_with(v, family, &h, opts.tangent_mode, opts.max_depth)))
                .collect();
            pairs
                .iter()
                .map(|&(a, b)| {
                    let pv = pushed[a].as_ref().expect("pushed for used V").as_ref().map_err(Clone::clone)?;
                    let set = count_intersections(pv, &ws[b], opts.tau_trans)?;
                    Ok(SampleRecord {
                        index: j,
                        count: set.count as u32,
                        degenerate: set.any_degenerate(),
                        low_angle: set.low_angle_count(opts.low_angle_threshold) as u32,
                    })
                })
                .collect()
        })
        .collect();

    let fam = family_bytes(family);
    let ln_vol = family.ln_param_volume();
    let runs = pairs
        .iter()
        .enumerate()
        .map(|(pi, &(a, b))| {
            let mut samples = Vec::with_capacity(num_samples);
            for row in &per_sample {
                samples.push(row[pi].clone()?);
            }
            let hash = input_hash(&[
                &fam,
                &mesh_bytes(&vs[a]),
                &mesh_bytes(&ws[b]),
                &(num_samples as u64).to_le_bytes(),
                &seed.to_le_bytes(),
                &opts.tau_trans.to_bits().to_le_bytes(),
            ]);
            Ok(McRun { seed, ln_param_volume: ln_vol, config_hash: hash, samples })
        })
        .collect();
    Ok(runs)
}

/// Per-sample records for a single pair.
pub fn mc_total_intersections_run<F: Family + ?Sized>(
    family: &F,
    v: &DiscreteSubmanifold,
    w: &DiscreteSubmanifold,
    num_samples: usize,
    seed: u64,
    opts: &McOptions,
) -> Result<McRun> {
    let mut runs =
        mc_run_pairs(family, std::slice::from_ref(v), std::slice::from_ref(w), &[(0, 0)], num_samples, seed, opts)?;
    runs.pop().expect("one pair")
}

/// `Leb(H) * mean_j #(Psi(h_j)(V) ∩ W)` with `h_j` uniform on the parameter
/// domain, drawn from the per-index stream `(seed, j)`.
pub fn mc_total_intersections<F: Family + ?Sized>(
    family: &F,
    v: &DiscreteSubmanifold,
    w: &DiscreteSubmanifold,
    num_samples: usize,
    seed: u64,
) -> Result<EstimateReport> {
    mc_total_intersections_run(family, v, w, num_samples, seed, &McOptions::default())?.report()
}

/// `|sin theta| * len_i * len_j`: the exact translation-family integral for
/// two geodesic segments meeting at angle `theta`.
pub fn translation_family_oracle(theta: f64, len_i: f64, len_j: f64) -> f64 {
    theta.sin().abs() * len_i * len_j
}

/// Geodesic segments discretized for the translation harness.
pub fn translation_meshes(
    i: &SubmanifoldSpec,
    j: &SubmanifoldSpec,
) -> Result<(DiscreteSubmanifold, DiscreteSubmanifold)> {
    for s in [i, j] {
        s.validate()?;
        if !matches!(s, SubmanifoldSpec::Geodesic { .. }) || s.ambient_dim() != 2 {
            return Err(invalid("translation harness takes geodesic segments on T^2"));
        }
    }
    let mi = i.discretize(i.resolution_for_spacing(TRANSLATION_SPACING))?;
    let mj = j.discretize(j.resolution_for_spacing(TRANSLATION_SPACING))?;
    Ok((mi, mj))
}

/// Average of `#((I + a) ∩ J)` over `a` uniform on `T^2`.
pub fn mc_translation_family(
    i: &SubmanifoldSpec,
    j: &SubmanifoldSpec,
    num_samples: usize,
    seed: u64,
) -> Result<EstimateReport> {
    mc_translation_family_run(i, j, num_samples, seed)?.report()
}

pub fn mc_translation_family_run(
    i: &SubmanifoldSpec,
    j: &SubmanifoldSpec,
    num_samples: usize,
    seed: u64,
) -> Result<McRun> {
    let (mi, mj) = translation_meshes(i, j)?;
    let family = TranslationFamily::new(2)?;
    mc_total_intersections_run(&family, &mi, &mj, num_samples, seed, &McOptions::default())
}

/// A family that always returns the given parameters; used to pin `h`.
#[derive(Clone, Debug)]
pub struct PinnedFamily<'a, F: Family + ?Sized> {
    pub family: &'a F,
    pub params: FamilyParams,
}

impl<F: Family + ?Sized> Family for PinnedFamily<'_, F> {
    fn dim(&self) -> usize {
        self.family.dim()
    }

    fn param_dim(&self) -> usize {
        self.family.param_dim()
    }

    fn ln_param_volume(&self) -> f64 {
        self.family.ln_param_volume()
    }

    fn sample_params(&self, _rng: &mut dyn rand::RngCore) -> FamilyParams {
        self.params.clone()
    }

    fn apply(&self, w: &FamilyParams, x: &crate::geom::TorusPoint) -> crate::geom::TorusPoint {
        self.family.apply(w, x)
    }

    fn apply_with_jacobian(
        &self,
        w: &FamilyParams,
        x: &crate::geom::TorusPoint,
    ) -> (crate::geom::TorusPoint, nalgebra::Matrix3<f64>) {
        self.family.apply_with_jacobian(w, x)
    }

    fn param_derivative(&self, w: &FamilyParams, x: &crate::geom::TorusPoint) -> nalgebra::DMatrix<f64> {
        self.family.param_derivative(w, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn geo(start: [f64; 2], angle: f64, len: f64) -> SubmanifoldSpec {
        SubmanifoldSpec::Geodesic { start: start.to_vec(), direction: vec![angle.cos(), angle.sin()], length: len }
    }

    #[test]
    fn oracle_examples() {
        assert_eq!(translation_family_oracle(PI / 2.0, 1.0, 1.0), 1.0);
        assert_eq!(translation_family_oracle(0.0, 0.7, 0.3), 0.0);
        assert!((translation_family_oracle(PI / 6.0, 0.5, 0.8) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn orthogonal_closed_lines_always_meet_once() {
        let r = mc_translation_family(&geo([0.1, 0.2], 0.0, 1.0), &geo([0.3, 0.05], PI / 2.0, 1.0), 2000, 1).unwrap();
        assert_eq!(r.estimate, 1.0);
        assert_eq!(r.std_error, 0.0);
    }

    #[test]
    fn translation_estimate_close_to_oracle() {
        let r = mc_translation_family(&geo([0.1, 0.2], 0.0, 0.5), &geo([0.3, 0.05], PI / 6.0, 0.8), 20000, 7).unwrap();
        let truth = translation_family_oracle(PI / 6.0, 0.5, 0.8);
        assert!((r.estimate - truth).abs() < 4.0 * r.std_error, "{r:?}");
    }

    #[test]
    fn prefix_matches_fresh_run() {
        let (i, j) = (geo([0.1, 0.2], 0.3, 0.6), geo([0.3, 0.05], 1.2, 0.7));
        let long = mc_translation_family_run(&i, &j, 400, 3).unwrap();
        let short = mc_translation_family(&i, &j, 200, 3).unwrap();
        let mut pre = long.prefix_report(200).unwrap();
        pre.config_hash = short.config_hash.clone();
        assert_eq!(pre, short);
    }

    #[test]
    fn parallel_segments_give_zero() {
        let r = mc_translation_family(&geo([0.1, 0.2], 0.4, 0.9), &geo([0.5, 0.7], 0.4, 0.8), 5000, 2).unwrap();
        assert_eq!(r.estimate, 0.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let c = SubmanifoldSpec::Circle { center: vec![0.5, 0.5], radius: 0.1, axes: [0, 1] };
        assert!(mc_translation_family(&c, &geo([0.0, 0.0], 0.0, 0.5), 10, 0).is_err());
        assert!(mc_translation_family(&geo([0.0, 0.0], 0.0, 0.5), &geo([0.0, 0.0], 1.0, 0.5), 0, 0).is_err());
    }
}
