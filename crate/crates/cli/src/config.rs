//! The experiment document: one JSON object per run.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use torkin_core::kinematic::GeodesicPool;
use torkin_core::submanifold::SubmanifoldSpec;
use torkin_core::verify::BatchConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Manifold {
    T2,
    T3,
}

impl Manifold {
    pub fn dim(self) -> usize {
        match self {
            Self::T2 => 2,
            Self::T3 => 3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    /// The chart-built compact family.
    Chart,
    /// Rigid translations by the unit cube.
    Translation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtlasConfig {
    pub per_axis: usize,
    pub scale: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    #[serde(default = "default_family_kind")]
    pub kind: FamilyKind,
    /// Grid atlas; the smallest covering grid when absent.
    #[serde(default)]
    pub atlas: Option<AtlasConfig>,
    /// Parameter-ball radius; calibrated from witnesses when absent.
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default = "default_calibration_pairs")]
    pub calibration_pairs: usize,
    #[serde(default)]
    pub calibration_seed: u64,
    #[serde(default = "default_flow_step")]
    pub flow_step: f64,
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
}

fn default_family_kind() -> FamilyKind {
    FamilyKind::Chart
}
fn default_calibration_pairs() -> usize {
    200
}
fn default_flow_step() -> f64 {
    torkin_core::family::DEFAULT_FLOW_STEP
}
fn default_fd_step() -> f64 {
    torkin_core::family::DEFAULT_FD_STEP
}

impl Default for FamilyConfig {
    fn default() -> Self {
        Self {
            kind: default_family_kind(),
            atlas: None,
            radius: None,
            calibration_pairs: default_calibration_pairs(),
            calibration_seed: 0,
            flow_step: default_flow_step(),
            fd_step: default_fd_step(),
        }
    }
}

/// A pair of complementary planes; bases are lists of column vectors and
/// are orthonormalized on load.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanePairConfig {
    pub p: Vec<f64>,
    pub basis_p: Vec<Vec<f64>>,
    pub q: Vec<f64>,
    pub basis_q: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", deny_unknown_fields)]
pub enum Experiment {
    /// Monte Carlo family integral of `#(h(V) ∩ W)`.
    #[serde(rename = "total-integral")]
    TotalIntegral { v: String, w: String },
    /// Co-area fiber estimates for explicit plane pairs and/or `random`
    /// pairs with uniform base points and plane dimension `k`.
    #[serde(rename = "fiber-integral")]
    FiberIntegral {
        #[serde(default = "default_eps")]
        eps: f64,
        #[serde(default)]
        planes: Vec<PlanePairConfig>,
        #[serde(default)]
        random: usize,
        /// Dimension of `P` in the random pairs (`Q` gets `n - k`); cycles
        /// through `1..n` when absent.
        #[serde(default)]
        k: Option<usize>,
    },
    /// Translations of one geodesic segment against another on `T^2`, at
    /// angle `theta` and with the given lengths.
    #[serde(rename = "translation-example")]
    TranslationExample {
        theta: f64,
        len_i: f64,
        len_j: f64,
        #[serde(default = "default_start_i")]
        start_i: [f64; 2],
        #[serde(default = "default_start_j")]
        start_j: [f64; 2],
    },
    /// Ratios against `vol(V) vol(W)` over named pairs or a random geodesic pool.
    #[serde(rename = "empirical-C")]
    EmpiricalC {
        #[serde(default)]
        pairs: Vec<[String; 2]>,
        #[serde(default)]
        pool: Option<GeodesicPool>,
        /// Also report the estimate from the first half of the samples.
        #[serde(default)]
        doubling: bool,
    },
    /// The property suites as one batch.
    #[serde(rename = "verify")]
    Verify {
        #[serde(default)]
        trials: Option<BatchConfig>,
    },
}

fn default_eps() -> f64 {
    torkin_core::kinematic::DEFAULT_FIBER_EPS
}
fn default_start_i() -> [f64; 2] {
    [0.1, 0.2]
}
fn default_start_j() -> [f64; 2] {
    [0.35, 0.05]
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Self::TotalIntegral { .. } => "total-integral",
            Self::FiberIntegral { .. } => "fiber-integral",
            Self::TranslationExample { .. } => "translation-example",
            Self::EmpiricalC { .. } => "empirical-C",
            Self::Verify { .. } => "verify",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    pub num_samples: usize,
    #[serde(default)]
    pub seed: u64,
    /// Vertex spacing used to discretize submanifolds.
    #[serde(default = "default_spacing")]
    pub spacing: f64,
    #[serde(default = "default_tau")]
    pub tau_trans: f64,
    #[serde(default = "default_max_depth")]
    pub max_depth: usize,
}

fn default_spacing() -> f64 {
    0.05
}
fn default_tau() -> f64 {
    torkin_core::intersect::DEFAULT_TAU_TRANS
}
fn default_max_depth() -> usize {
    torkin_core::submanifold::DEFAULT_MAX_DEPTH
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: String,
    #[serde(default = "default_true")]
    pub csv: bool,
}

fn default_dir() -> String {
    "out".into()
}
fn default_true() -> bool {
    true
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: default_dir(), csv: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub manifold: Manifold,
    #[serde(default)]
    pub family: FamilyConfig,
    pub experiment: Experiment,
    #[serde(default)]
    pub submanifolds: BTreeMap<String, SubmanifoldSpec>,
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Set `path` (dot separated) in a JSON object, creating objects as needed.
/// The value is parsed as JSON, falling back to a plain string.
pub fn apply_override(doc: &mut Value, path: &str, raw: &str) -> Result<(), String> {
    if path.is_empty() || path.split('.').any(str::is_empty) {
        return Err(format!("bad override path `{path}`"));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cur = doc;
    let keys: Vec<&str> = path.split('.').collect();
    for (i, key) in keys.iter().enumerate() {
        let obj = match cur {
            Value::Object(m) => m,
            _ => return Err(format!("override `{path}`: `{}` is not an object", keys[..i].join("."))),
        };
        if i + 1 == keys.len() {
            obj.insert((*key).to_string(), value);
            return Ok(());
        }
        cur = obj.entry((*key).to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("path has at least one key")
}

/// Semantic checks that serde cannot express; errors name the field.
pub fn validate(cfg: &Config) -> Result<(), String> {
    let f = &cfg.family;
    if let Some(r) = f.radius {
        if !(r > 0.0 && r.is_finite()) {
            return Err(format!("family.radius: must be positive and finite, got {r}"));
        }
    }
    if !(f.flow_step > 0.0 && f.flow_step <= 1.0) {
        return Err(format!("family.flow_step: must lie in (0, 1], got {}", f.flow_step));
    }
    if !(f.fd_step > 0.0 && f.fd_step <= 1e-2) {
        return Err(format!("family.fd_step: must lie in (0, 1e-2], got {}", f.fd_step));
    }
    if f.calibration_pairs == 0 && f.radius.is_none() {
        return Err("family.calibration_pairs: must be positive when family.radius is absent".into());
    }
    if let Some(a) = &f.atlas {
        if a.per_axis == 0 || !(a.scale > 0.0) {
            return Err("family.atlas: per_axis and scale must be positive".into());
        }
    }
    let s = &cfg.sampling;
    if s.num_samples == 0 {
        return Err("sampling.num_samples: must be at least 1".into());
    }
    if !(s.spacing > 0.0 && s.spacing <= 0.4) {
        return Err(format!("sampling.spacing: must lie in (0, 0.4], got {}", s.spacing));
    }
    if !(s.tau_trans > 0.0) {
        return Err("sampling.tau_trans: must be positive".into());
    }
    for (name, spec) in &cfg.submanifolds {
        spec.validate().map_err(|e| format!("submanifolds.{name}: {e}"))?;
        if spec.ambient_dim() != cfg.manifold.dim() {
            return Err(format!(
                "submanifolds.{name}: lives on T^{}, manifold is T^{}",
                spec.ambient_dim(),
                cfg.manifold.dim()
            ));
        }
    }
    let named = |field: &str, key: &str| -> Result<(), String> {
        if cfg.submanifolds.contains_key(key) {
            Ok(())
        } else {
            Err(format!("experiment.{field}: unknown submanifold `{key}`"))
        }
    };
    match &cfg.experiment {
        Experiment::TotalIntegral { v, w } => {
            named("v", v)?;
            named("w", w)?;
        }
        Experiment::FiberIntegral { eps, planes, random, k } => {
            if !(*eps > 0.0 && *eps < 0.5) {
                return Err(format!("experiment.eps: must lie in (0, 0.5), got {eps}"));
            }
            if planes.is_empty() && *random == 0 {
                return Err("experiment: give `planes` or a positive `random` count".into());
            }
            if let Some(k) = k {
                if *k > cfg.manifold.dim() {
                    return Err(format!("experiment.k: must be at most {}", cfg.manifold.dim()));
                }
            }
        }
        Experiment::TranslationExample { len_i, len_j, theta, .. } => {
            if cfg.manifold != Manifold::T2 {
                return Err("manifold: translation-example runs on t2".into());
            }
            if !(*len_i > 0.0 && *len_j > 0.0 && theta.is_finite()) {
                return Err("experiment: lengths must be positive and theta finite".into());
            }
        }
        Experiment::EmpiricalC { pairs, pool, .. } => {
            if pairs.is_empty() == pool.is_none() {
                return Err("experiment: give exactly one of `pairs` and `pool`".into());
            }
            for (i, [v, w]) in pairs.iter().enumerate() {
                named(&format!("pairs[{i}]"), v)?;
                named(&format!("pairs[{i}]"), w)?;
            }
            if pool.is_some() && cfg.manifold != Manifold::T2 {
                return Err("experiment.pool: geodesic pools are generated on t2".into());
            }
        }
        Experiment::Verify { .. } => {
            if f.kind != FamilyKind::Chart {
                return Err("family.kind: verify needs the chart family".into());
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn base() -> Value {
        json!({
            "manifold": "t2",
            "family": { "kind": "translation" },
            "experiment": { "name": "translation-example", "theta": 0.5, "len_i": 1.0, "len_j": 0.5 },
            "sampling": { "num_samples": 10 }
        })
    }

    fn parse(v: Value) -> Config {
        serde_json::from_value(v).unwrap()
    }

    #[test]
    fn overrides_set_nested_values() {
        let mut doc = base();
        apply_override(&mut doc, "sampling.seed", "42").unwrap();
        apply_override(&mut doc, "family.atlas.per_axis", "5").unwrap();
        apply_override(&mut doc, "output.dir", "somewhere").unwrap();
        assert_eq!(doc["sampling"]["seed"], 42);
        assert_eq!(doc["family"]["atlas"]["per_axis"], 5);
        assert_eq!(doc["output"]["dir"], "somewhere");
        assert!(apply_override(&mut doc, "sampling.seed.x", "1").is_err());
        assert!(apply_override(&mut doc, "a..b", "1").is_err());
    }

    #[test]
    fn defaults_fill_in() {
        let c = parse(base());
        assert_eq!(c.family.calibration_pairs, 200);
        assert_eq!(c.sampling.seed, 0);
        assert!(c.output.csv);
        validate(&c).unwrap();
    }

    #[test]
    fn negative_radius_names_the_field() {
        let mut doc = base();
        doc["family"]["radius"] = json!(-2.0);
        let e = validate(&parse(doc)).unwrap_err();
        assert!(e.starts_with("family.radius"), "{e}");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let mut doc = base();
        doc["sampling"]["num_sample"] = json!(3);
        assert!(serde_json::from_value::<Config>(doc).is_err());
    }

    #[test]
    fn submanifold_references_are_checked() {
        let doc = json!({
            "manifold": "t2",
            "experiment": { "name": "total-integral", "v": "a", "w": "missing" },
            "submanifolds": { "a": { "kind": "geodesic", "start": [0.0, 0.0], "direction": [1.0, 0.0], "length": 0.5 } },
            "sampling": { "num_samples": 10 }
        });
        let e = validate(&parse(doc)).unwrap_err();
        assert!(e.contains("experiment.w") && e.contains("missing"), "{e}");
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let doc = json!({
            "manifold": "t3",
            "experiment": { "name": "total-integral", "v": "a", "w": "a" },
            "submanifolds": { "a": { "kind": "geodesic", "start": [0.0, 0.0], "direction": [1.0, 0.0], "length": 0.5 } },
            "sampling": { "num_samples": 10 }
        });
        assert!(validate(&parse(doc)).unwrap_err().starts_with("submanifolds.a"));
    }
}
