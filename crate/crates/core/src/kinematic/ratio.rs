//! Ratios of the family integral to `vol(V) * vol(W)` across many pairs.

use serde::{Deserialize, Serialize};

use rand::Rng;

use crate::error::{invalid, Result};
use crate::family::Family;
use crate::sampling::{sample_rng, unit_vector};
use crate::submanifold::{DiscreteSubmanifold, SubmanifoldSpec};

use super::mc::{mc_run_pairs, McOptions, McRun};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioEntry {
    pub pair: usize,
    pub v: usize,
    pub w: usize,
    pub vol_v: f64,
    pub vol_w: f64,
    pub estimate: f64,
    pub std_error: f64,
    /// `estimate / (vol_v * vol_w)`.
    pub ratio: f64,
    /// `mean_count / (vol_v * vol_w)`: the ratio for `H` rescaled to a probability measure.
    pub normalized_ratio: f64,
    pub degenerate_fraction: f64,
    pub unreliable: bool,
    /// Set when the pair's estimator failed; the other fields are then zero.
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub ratios: Vec<RatioEntry>,
    /// `max(max ratio, 1 / min ratio)` over successful pairs; infinite if
    /// some successful pair has a zero estimate.
    pub c_emp: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// `c_emp` computed from the normalized ratios.
    pub c_emp_normalized: f64,
    /// `max ratio / min ratio`, independent of the measure on `H`.
    pub spread: f64,
    pub num_samples: usize,
    pub seed: u64,
    pub failed_pairs: usize,
}

/// Pairs built from pools of `V` and `W` meshes; pair `i` is `(vs[pairs[i].0], ws[pairs[i].1])`.
#[derive(Clone, Debug)]
pub struct PairTable {
    pub vs: Vec<DiscreteSubmanifold>,
    pub ws: Vec<DiscreteSubmanifold>,
    pub pairs: Vec<(usize, usize)>,
}

impl PairTable {
    /// One pool entry per pair.
    pub fn from_pairs(pairs: Vec<(DiscreteSubmanifold, DiscreteSubmanifold)>) -> Self {
        let idx = (0..pairs.len()).map(|i| (i, i)).collect();
        let (vs, ws) = pairs.into_iter().unzip();
        Self { vs, ws, pairs: idx }
    }
}

/// Random geodesic segments on `T^n` (`n = 2` or `3` for curves) pooled
/// into a table of pairs. Lengths are log-spaced over
/// `[min_length, max_length]` within each pool, starts and directions are
/// uniform, and pairs are all `V x W` combinations in row-major order
/// (truncated to `max_pairs` when given).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeodesicPool {
    pub num_v: usize,
    pub num_w: usize,
    pub min_length: f64,
    pub max_length: f64,
    pub spacing: f64,
    pub max_pairs: Option<usize>,
}

impl Default for GeodesicPool {
    fn default() -> Self {
        Self { num_v: 8, num_w: 8, min_length: 0.25, max_length: 1.0, spacing: 0.05, max_pairs: None }
    }
}

impl GeodesicPool {
    /// Geodesic specs for the `V` and `W` pools on `T^2`.
    pub fn specs(&self, seed: u64) -> Result<(Vec<SubmanifoldSpec>, Vec<SubmanifoldSpec>)> {
        if self.num_v == 0 || self.num_w == 0 {
            return Err(invalid("pools must be non-empty"));
        }
        if !(self.min_length > 0.0 && self.max_length >= self.min_length && self.spacing > 0.0) {
            return Err(invalid("need 0 < min_length <= max_length and positive spacing"));
        }
        let make = |count: usize, stream: u64| -> Vec<SubmanifoldSpec> {
            let mut rng = sample_rng(seed, stream);
            (0..count)
                .map(|i| {
                    let f = if count > 1 { i as f64 / (count - 1) as f64 } else { 0.0 };
                    let length = self.min_length * (self.max_length / self.min_length).powf(f);
                    let start: Vec<f64> = (0..2).map(|_| rng.random::<f64>()).collect();
                    SubmanifoldSpec::Geodesic { start, direction: unit_vector(2, &mut rng), length }
                })
                .collect()
        };
        Ok((make(self.num_v, 0), make(self.num_w, 1)))
    }

    pub fn table(&self, seed: u64) -> Result<PairTable> {
        let (sv, sw) = self.specs(seed)?;
        let disc = |s: &SubmanifoldSpec| s.discretize(s.resolution_for_spacing(self.spacing));
        let vs = sv.iter().map(disc).collect::<Result<Vec<_>>>()?;
        let ws = sw.iter().map(disc).collect::<Result<Vec<_>>>()?;
        let mut pairs: Vec<(usize, usize)> =
            (0..self.num_v).flat_map(|a| (0..self.num_w).map(move |b| (a, b))).collect();
        if let Some(m) = self.max_pairs {
            pairs.truncate(m);
        }
        Ok(PairTable { vs, ws, pairs })
    }
}

fn c_of(min: f64, max: f64) -> f64 {
    if min > 0.0 {
        max.max(1.0 / min).max(1.0)
    } else {
        f64::INFINITY
    }
}

/// Assemble a ratio report from per-pair runs, using the first `k` samples of each.
pub fn ratio_report(table: &PairTable, runs: &[Result<McRun>], k: usize, seed: u64) -> Result<RatioReport> {
    let mut ratios = Vec::with_capacity(table.pairs.len());
    for (i, (&(a, b), run)) in table.pairs.iter().zip(runs).enumerate() {
        let vol_v = table.vs[a].total_volume();
        let vol_w = table.ws[b].total_volume();
        let mut e = RatioEntry {
            pair: i,
            v: a,
            w: b,
            vol_v,
            vol_w,
            estimate: 0.0,
            std_error: 0.0,
            ratio: 0.0,
            normalized_ratio: 0.0,
            degenerate_fraction: 0.0,
            unreliable: false,
            error: None,
        };
        match run.as_ref().map_err(|e| e.to_string()).and_then(|r| r.prefix_report(k).map_err(|e| e.to_string())) {
            Ok(rep) => {
                let vv = vol_v * vol_w;
                e.estimate = rep.estimate;
                e.std_error = rep.std_error;
                e.ratio = rep.estimate / vv;
                e.normalized_ratio = rep.mean_count / vv;
                e.degenerate_fraction = rep.degenerate_fraction;
                e.unreliable = rep.unreliable;
            }
            Err(msg) => e.error = Some(msg),
        }
        ratios.push(e);
    }
    let ok: Vec<&RatioEntry> = ratios.iter().filter(|e| e.error.is_none()).collect();
    let fold =
        |f: fn(&RatioEntry) -> f64| ok.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), e| (lo.min(f(e)), hi.max(f(e))));
    let (min_ratio, max_ratio) = fold(|e| e.ratio);
    let (min_n, max_n) = fold(|e| e.normalized_ratio);
    let failed_pairs = ratios.len() - ok.len();
    let (c_emp, c_n, spread) = if ok.is_empty() {
        (f64::INFINITY, f64::INFINITY, f64::INFINITY)
    } else {
        (
            c_of(min_ratio, max_ratio),
            c_of(min_n, max_n),
            if min_ratio > 0.0 { max_ratio / min_ratio } else { f64::INFINITY },
        )
    };
    Ok(RatioReport {
        ratios,
        c_emp,
        min_ratio,
        max_ratio,
        c_emp_normalized: c_n,
        spread,
        num_samples: k,
        seed,
        failed_pairs,
    })
}

/// Run the total-integral estimator on every pair (common random numbers
/// across pairs) and report `c_emp` with the ratio table.
pub fn empirical_c<F: Family + ?Sized>(
    family: &F,
    table: &PairTable,
    num_samples: usize,
    seed: u64,
    opts: &McOptions,
) -> Result<RatioReport> {
    if table.pairs.len() < 2 {
        return Err(invalid("empirical C needs at least two pairs"));
    }
    let runs = mc_run_pairs(family, &table.vs, &table.ws, &table.pairs, num_samples, seed, opts)?;
    ratio_report(table, &runs, num_samples, seed)
}

/// Reports at `num_samples` and `2 * num_samples` from one run of length
/// `2 * num_samples`; the first is its prefix.
pub fn empirical_c_doubling<F: Family + ?Sized>(
    family: &F,
    table: &PairTable,
    num_samples: usize,
    seed: u64,
    opts: &McOptions,
) -> Result<(RatioReport, RatioReport)> {
    if table.pairs.len() < 2 {
        return Err(invalid("empirical C needs at least two pairs"));
    }
    let runs = mc_run_pairs(family, &table.vs, &table.ws, &table.pairs, 2 * num_samples, seed, opts)?;
    Ok((ratio_report(table, &runs, num_samples, seed)?, ratio_report(table, &runs, 2 * num_samples, seed)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::TranslationFamily;
    use crate::submanifold::SubmanifoldSpec;

    fn geo(angle: f64, len: f64) -> DiscreteSubmanifold {
        SubmanifoldSpec::Geodesic { start: vec![0.1, 0.2], direction: vec![angle.cos(), angle.sin()], length: len }
            .discretize(20)
            .unwrap()
    }

    #[test]
    fn translation_ratios_are_sines() {
        let fam = TranslationFamily::new(2).unwrap();
        let table = PairTable::from_pairs(vec![
            (geo(0.0, 0.5), geo(1.2, 0.6)),
            (geo(0.3, 0.4), geo(0.8, 0.9)),
            (geo(0.0, 0.7), geo(std::f64::consts::FRAC_PI_2, 0.5)),
        ]);
        let r = empirical_c(&fam, &table, 40_000, 5, &McOptions::default()).unwrap();
        let truths = [1.2f64.sin(), 0.5f64.sin(), 1.0];
        for (e, t) in r.ratios.iter().zip(truths) {
            let se = e.std_error / (e.vol_v * e.vol_w);
            assert!((e.ratio - t).abs() < 4.0 * se + 1e-12, "{e:?} {t}");
        }
        assert!(r.c_emp >= 1.0 && r.c_emp.is_finite());
        assert!((r.c_emp - 1.0 / r.min_ratio).abs() < 1e-12);
    }

    #[test]
    fn identical_pairs_give_identical_ratios() {
        let fam = TranslationFamily::new(2).unwrap();
        let p = (geo(0.0, 0.5), geo(1.0, 0.6));
        let table = PairTable::from_pairs(vec![p.clone(), p]);
        let r = empirical_c(&fam, &table, 2000, 1, &McOptions::default()).unwrap();
        assert_eq!(r.ratios[0].ratio, r.ratios[1].ratio);
    }

    #[test]
    fn single_pair_rejected() {
        let fam = TranslationFamily::new(2).unwrap();
        let table = PairTable::from_pairs(vec![(geo(0.0, 0.5), geo(1.0, 0.6))]);
        assert!(empirical_c(&fam, &table, 10, 1, &McOptions::default()).is_err());
    }
}
