//! Named property suites, each tied to one structural claim about the
//! family or the normal-Jacobian identities, runnable as a batch.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, Vector3};
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::family::{
    random_plane_pair, verify_witness, witness_a2, BumpProfile, Family, FamilyParams, FamilySpec, FLAT_RADIUS,
};
use crate::geom::{GrassmannPlane, TorusPoint};
use crate::kinematic::{graph_nj_sides, nj_ratio_direct, nj_ratio_formula};
use crate::sampling::{sample_rng, sub_seed};

/// Relative singular-value floor below which a derivative counts as rank deficient.
pub const RANK_TOL: f64 = 1e-12;
/// Witness tolerances: point transport and plane gap.
pub const WITNESS_POINT_TOL: f64 = 1e-8;
pub const WITNESS_GAP_TOL: f64 = 1e-6;
pub const CLAIM_2_2_TOL: f64 = 1e-5;
pub const LEMMA_B2_TOL: f64 = 1e-9;
pub const PROP_B1_TOL: f64 = 1e-6;
pub const JACOBIAN_FD_TOL: f64 = 1e-5;
/// Tolerance on the diagonal of the translation block at `w = 0`.
pub const TRIANGULAR_DIAG_TOL: f64 = 1e-8;
/// At most this many failure messages are kept per suite.
const MAX_MESSAGES: usize = 20;

const TAG_A1: u64 = 1;
const TAG_A2: u64 = 2;
const TAG_CLAIM_2_2: u64 = 3;
const TAG_LEMMA_B2: u64 = 4;
const TAG_PROP_B1: u64 = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub claim: String,
    pub trials: usize,
    pub failures: usize,
    /// Largest error in the suite's own metric (see `metric`).
    pub worst_error: f64,
    pub metric: String,
    pub passed: bool,
    /// Suite-specific statistics, ordered by key.
    pub stats: BTreeMap<String, f64>,
    pub messages: Vec<String>,
}

impl SuiteReport {
    fn new(claim: &str, metric: &str) -> Self {
        Self {
            claim: claim.into(),
            trials: 0,
            failures: 0,
            worst_error: 0.0,
            metric: metric.into(),
            passed: true,
            stats: BTreeMap::new(),
            messages: Vec::new(),
        }
    }

    fn record(&mut self, error: f64, ok: bool, msg: impl FnOnce() -> String) {
        self.trials += 1;
        if error.is_nan() || error > self.worst_error {
            self.worst_error = error;
        }
        if !ok {
            self.failures += 1;
            if self.messages.len() < MAX_MESSAGES {
                self.messages.push(msg());
            }
        }
    }

    fn fail(&mut self, msg: String) {
        self.trials += 1;
        self.failures += 1;
        if self.messages.len() < MAX_MESSAGES {
            self.messages.push(msg);
        }
    }

    fn finish(mut self) -> Self {
        self.passed = self.failures == 0 && self.trials > 0;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub seed: u64,
    pub suites: Vec<SuiteReport>,
    pub passed: bool,
}

fn random_point(n: usize, rng: &mut dyn RngCore) -> TorusPoint {
    let c: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    TorusPoint::new(&c).expect("finite coordinates")
}

fn gaussian_vec(len: usize, rng: &mut dyn RngCore) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn median(mut xs: Vec<f64>) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.sort_by(|a, b| a.total_cmp(b));
    xs[xs.len() / 2]
}

const RIDDERS_START: f64 = 1e-4;
const RIDDERS_SHRINK: f64 = 1.4;
const RIDDERS_TABLE: usize = 24;

/// Derivative at 0 of a vector curve by Ridders' method: central
/// differences at geometrically shrinking steps, Neville-extrapolated to
/// zero step, returning the tableau entry with the smallest error estimate.
/// The whole table is scanned: strongly stretching maps make the large-step
/// columns unreliable, so the usual early exit would stop too soon.
fn ridders(f: impl Fn(f64) -> Result<Vector3<f64>>, h0: f64) -> Result<Vector3<f64>> {
    let c2 = RIDDERS_SHRINK * RIDDERS_SHRINK;
    let central = |h: f64| -> Result<Vector3<f64>> { Ok((f(h)? - f(-h)?) / (2.0 * h)) };
    let mut prev: Vec<Vector3<f64>> = vec![central(h0)?];
    let mut best = prev[0];
    let mut err = f64::INFINITY;
    let mut h = h0;
    for _ in 1..RIDDERS_TABLE {
        h /= RIDDERS_SHRINK;
        let mut row = vec![central(h)?];
        let mut fac = c2;
        for j in 1..=prev.len() {
            let next = (row[j - 1] * fac - prev[j - 1]) / (fac - 1.0);
            fac *= c2;
            let e = (next - row[j - 1]).norm().max((next - prev[j - 1]).norm());
            if e <= err {
                err = e;
                best = next;
            }
            row.push(next);
        }
        prev = row;
    }
    Ok(best)
}

/// Surjectivity of `d(ev_x)` at random `(w, x)`, plus the triangular shape
/// of the translation block at `w = 0` of the first chart whose inner ball
/// `|phi| < 2` contains `x`.
///
/// Worst error is the largest deviation of that block from
/// `s * diag(beta(|phi(x)|))`.
pub fn suite_a1(spec: &FamilySpec, trials: usize, seed: u64) -> SuiteReport {
    let mut rep = SuiteReport::new("suite_A1", "translation block deviation at w = 0");
    let n = spec.n();
    let mut sv_min = Vec::with_capacity(trials);
    let base = sub_seed(seed, TAG_A1);
    for i in 0..trials as u64 {
        let mut rng = sample_rng(base, i);
        let w = spec.sample_params(&mut rng);
        let x = random_point(n, &mut rng);
        let d = spec.param_derivative(&w, &x);
        let sv = d.singular_values();
        let (lo, hi) = (sv.min(), sv.max());
        sv_min.push(lo);
        let ok = sv.len() == n && lo > RANK_TOL * hi && lo > 0.0;
        rep.record(0.0, ok, || format!("trial {i}: singular values {:?}", sv.as_slice()));
    }
    // triangular structure at the identity, at every chart center and at random points
    let zero = FamilyParams::zeros(spec.big_n());
    let atlas = spec.atlas();
    let mut rng = sample_rng(base, u64::MAX);
    let mut points: Vec<TorusPoint> = atlas.charts().iter().map(|c| c.center).collect();
    points.extend((0..trials.min(200)).map(|_| random_point(n, &mut rng)));
    for x in &points {
        let Some(chart) = (0..atlas.len()).find(|&c| atlas.charts()[c].to_local(x).norm() < FLAT_RADIUS) else {
            rep.fail(format!("{x} lies in no inner chart ball"));
            continue;
        };
        let ch = atlas.charts()[chart];
        let d = spec.param_derivative(&zero, x);
        let off = spec.block_offset(0, chart);
        let beta = BumpProfile::eval(ch.to_local(x).norm());
        let mut upper_exact = true;
        let mut diag_err: f64 = 0.0;
        let mut diag_positive = true;
        for r in 0..n {
            for c in 0..n {
                let v = d[(r, off + c)];
                if c > r && v != 0.0 {
                    upper_exact = false;
                }
                if r == c {
                    diag_positive &= v > 0.0;
                    diag_err = diag_err.max((v - ch.scale * beta).abs());
                }
            }
        }
        let ok = upper_exact && diag_positive && diag_err <= TRIANGULAR_DIAG_TOL;
        rep.record(diag_err, ok, || {
            format!("chart {chart} at {x}: upper zero {upper_exact}, diag positive {diag_positive}, diag error {diag_err:e}")
        });
    }
    rep.stats.insert("rank_trials".into(), trials as f64);
    rep.stats.insert("min_singular_value_min".into(), sv_min.iter().cloned().fold(f64::INFINITY, f64::min));
    rep.stats.insert("min_singular_value_max".into(), sv_min.iter().cloned().fold(0.0, f64::max));
    rep.stats.insert("min_singular_value_median".into(), median(sv_min));
    rep.stats.insert("structure_points".into(), points.len() as f64);
    rep.finish()
}

/// Witnesses for random plane pairs at every plane dimension `k < n`.
/// Worst error is the largest plane gap.
pub fn suite_a2(spec: &FamilySpec, trials: usize, seed: u64) -> SuiteReport {
    let mut rep = SuiteReport::new("suite_A2", "plane gap of the pushed plane");
    let n = spec.n();
    let mut max_norm: f64 = 0.0;
    let mut max_point: f64 = 0.0;
    for k in 0..n {
        let mut rng = sample_rng(sub_seed(seed, TAG_A2), k as u64);
        for i in 0..trials {
            let (sp, sq) = match random_plane_pair(n, k, &mut rng) {
                Ok(p) => p,
                Err(e) => {
                    rep.fail(format!("k={k} trial {i}: {e}"));
                    continue;
                }
            };
            let res = witness_a2(spec, &sp, &sq).and_then(|w| Ok((verify_witness(spec, &w, &sp, &sq)?, w.norm())));
            match res {
                Ok((chk, norm)) => {
                    max_norm = max_norm.max(norm);
                    max_point = max_point.max(chk.point_error);
                    let ok = chk.point_error <= WITNESS_POINT_TOL
                        && chk.plane_gap <= WITNESS_GAP_TOL
                        && norm <= spec.radius();
                    rep.record(chk.plane_gap, ok, || format!("k={k} trial {i}: {chk:?}, |w| = {norm}"));
                }
                Err(e) => rep.fail(format!("k={k} trial {i}: {e}")),
            }
        }
    }
    rep.stats.insert("max_witness_norm".into(), max_norm);
    rep.stats.insert("radius".into(), spec.radius());
    rep.stats.insert("max_point_error".into(), max_point);
    rep.finish()
}

/// Along random curves `s -> (w + s hdot, p + s pdot)`, the numerical
/// derivative of `q(s) = Psi(w(s))(p(s))` satisfies
/// `qdot - dh pdot = d(ev_p) hdot`, i.e. `J(pdot, qdot) = d(ev_p) hdot`.
///
/// The curve is evaluated at the RK4 step counts of `w` so it is smooth in
/// `s`, and differentiated by Ridders' extrapolation since the family can
/// stretch by several orders of magnitude. Worst error is relative to
/// `|dh pdot| + |d(ev_p) hdot|`.
pub fn suite_claim_2_2(spec: &FamilySpec, trials: usize, seed: u64) -> SuiteReport {
    let mut rep = SuiteReport::new("suite_claim_2_2", "relative residual of the constraint identity");
    let n = spec.n();
    let big_n = spec.big_n();
    let base = sub_seed(seed, TAG_CLAIM_2_2);
    for i in 0..trials as u64 {
        let mut rng = sample_rng(base, i);
        let w = spec.sample_params(&mut rng);
        let p = random_point(n, &mut rng);
        let hdot = gaussian_vec(big_n, &mut rng).normalize();
        let mut pdot3 = Vector3::zeros();
        let pd = gaussian_vec(n, &mut rng).normalize();
        pdot3.as_mut_slice()[..n].copy_from_slice(pd.as_slice());
        let q0 = spec.apply(&w, &p);
        let curve = |s: f64| -> Result<Vector3<f64>> {
            let ws = FamilyParams::new((w.as_slice().iter().zip(hdot.iter())).map(|(a, b)| a + s * b).collect());
            let ps = p.translate(&(pdot3 * s));
            Ok(q0.displacement_to(&spec.apply_with_steps_of(&w, &ws, &ps)?))
        };
        let qdot = match ridders(curve, RIDDERS_START) {
            Ok(d) => d,
            Err(e) => {
                rep.fail(format!("trial {i}: {e}"));
                continue;
            }
        };
        let dh = spec.jacobian(&w, &p);
        let dev = spec.param_derivative(&w, &p);
        let lhs = DVector::from_fn(n, |r, _| qdot[r]) - &dh * &pd;
        let rhs = &dev * &hdot;
        let scale = (&dh * &pd).norm() + rhs.norm();
        let err = (&lhs - &rhs).norm() / scale;
        rep.record(err, err <= CLAIM_2_2_TOL, || format!("trial {i}: relative residual {err:e}"));
    }
    rep.finish()
}

/// Both sides of the graph identity for random `G: R^a -> R^b`, `b <= a <= 8`.
pub fn suite_lemma_b2(trials: usize, seed: u64) -> SuiteReport {
    let mut rep = SuiteReport::new("suite_lemma_B2", "relative error between the two sides");
    let base = sub_seed(seed, TAG_LEMMA_B2);
    for i in 0..trials as u64 {
        let mut rng = sample_rng(base, i);
        let a = rng.random_range(1..=8usize);
        let b = rng.random_range(1..=a);
        let g = DMatrix::from_fn(b, a, |_, _| rng.sample::<f64, _>(StandardNormal));
        match graph_nj_sides(&g) {
            Ok((l, r)) => {
                let err = ((l - r) / l).abs();
                rep.record(err, err <= LEMMA_B2_TOL, || format!("trial {i} (a={a}, b={b}): {l} vs {r}"));
            }
            Err(e) => rep.fail(format!("trial {i} (a={a}, b={b}): {e}")),
        }
    }
    rep.finish()
}

/// Formula and solution-space routes for the normal-Jacobian ratio at
/// random `(w, p, planes)`, with the spatial Jacobian checked against
/// Richardson differences on every instance and the parameter derivative
/// checked against global differences on the first `param_fd_checks`.
pub fn suite_prop_b1(spec: &FamilySpec, trials: usize, param_fd_checks: usize, seed: u64) -> SuiteReport {
    let mut rep = SuiteReport::new("suite_prop_B1", "relative error between formula and direct ratios");
    let n = spec.n();
    let base = sub_seed(seed, TAG_PROP_B1);
    let min_scale = spec.atlas().charts().iter().map(|c| c.scale).fold(f64::INFINITY, f64::min);
    let h = spec.fd_step() * min_scale;
    let mut worst_jac: f64 = 0.0;
    let mut worst_dev: f64 = 0.0;
    for i in 0..trials as u64 {
        let mut rng = sample_rng(base, i);
        let w = spec.sample_params(&mut rng);
        let p = random_point(n, &mut rng);
        let k = rng.random_range(1..n);
        let q = spec.apply(&w, &p);
        let planes =
            GrassmannPlane::random(p, k, &mut rng).and_then(|sp| Ok((sp, GrassmannPlane::random(q, n - k, &mut rng)?)));
        let (sp, sq) = match planes {
            Ok(x) => x,
            Err(e) => {
                rep.fail(format!("trial {i}: {e}"));
                continue;
            }
        };
        let jac = spec.jacobian(&w, &p);
        let jac_err = match spec.jacobian_fd(&w, &p, h, true) {
            Ok(fd) => (&jac - &fd).norm() / jac.norm(),
            Err(e) => {
                rep.fail(format!("trial {i}: {e}"));
                continue;
            }
        };
        worst_jac = worst_jac.max(jac_err);
        let mut dev_err = 0.0;
        if (i as usize) < param_fd_checks {
            let dev = spec.param_derivative(&w, &p);
            dev_err = match spec.param_derivative_fd(&w, &p, true) {
                Ok(fd) => (&dev - &fd).norm() / dev.norm(),
                Err(_) => f64::INFINITY,
            };
            worst_dev = worst_dev.max(dev_err);
        }
        let f = nj_ratio_formula(spec, &w, &p, sp.basis(), sq.basis());
        let d = nj_ratio_direct(spec, &w, &p, sp.basis(), sq.basis());
        match (f, d) {
            (Ok(f), Ok(d)) => {
                let err = ((f - d) / f.abs().max(d.abs())).abs();
                let err = if f == 0.0 && d == 0.0 { 0.0 } else { err };
                let ok = err <= PROP_B1_TOL && jac_err <= JACOBIAN_FD_TOL && dev_err <= JACOBIAN_FD_TOL;
                rep.record(err, ok, || {
                    format!(
                        "trial {i}: formula {f}, direct {d}, jacobian fd error {jac_err:e}, param fd error {dev_err:e}"
                    )
                });
            }
            (Err(e), _) | (_, Err(e)) => rep.fail(format!("trial {i}: {e}")),
        }
    }
    rep.stats.insert("worst_jacobian_fd_error".into(), worst_jac);
    rep.stats.insert("worst_param_derivative_fd_error".into(), worst_dev);
    rep.stats.insert("param_fd_checks".into(), param_fd_checks.min(trials) as f64);
    rep.finish()
}

/// Trial counts for [`run_all`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchConfig {
    pub a1_trials: usize,
    pub a2_trials: usize,
    pub claim_2_2_trials: usize,
    pub lemma_b2_trials: usize,
    pub prop_b1_trials: usize,
    pub prop_b1_param_fd_checks: usize,
}

impl Default for BatchConfig {
    fn default() -> Self {
        Self {
            a1_trials: 1000,
            a2_trials: 100,
            claim_2_2_trials: 100,
            lemma_b2_trials: 1000,
            prop_b1_trials: 200,
            prop_b1_param_fd_checks: 5,
        }
    }
}

/// Every suite in a fixed order; passes iff all pass.
pub fn run_all(spec: &FamilySpec, cfg: &BatchConfig, seed: u64) -> Result<BatchReport> {
    if spec.n() < 2 {
        return Err(invalid("suites need a torus of dimension at least 2"));
    }
    let suites = vec![
        suite_a1(spec, cfg.a1_trials, seed),
        suite_a2(spec, cfg.a2_trials, seed),
        suite_claim_2_2(spec, cfg.claim_2_2_trials, seed),
        suite_lemma_b2(cfg.lemma_b2_trials, seed),
        suite_prop_b1(spec, cfg.prop_b1_trials, cfg.prop_b1_param_fd_checks, seed),
    ];
    let passed = suites.iter().all(|s| s.passed);
    Ok(BatchReport { seed, suites, passed })
}
