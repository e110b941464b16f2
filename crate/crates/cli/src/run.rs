//! Experiment dispatch and artifact writing.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use torkin_core::family::{calibrate_radius, ChartAtlas, Family, FamilySpec, GridAtlasConfig, TranslationFamily};
use torkin_core::geom::{sin_angle, GrassmannPlane, TorusPoint};
use torkin_core::kinematic::{
    fiber_integral_with_check, mc_run_pairs, mc_total_intersections_run, mc_translation_family_run, ratio_report,
    translation_family_oracle, FiberReport, McOptions, McRun, PairTable, RatioReport,
};
use torkin_core::sampling::{sample_rng, sub_seed, uniform_cube};
use torkin_core::submanifold::{DiscreteSubmanifold, SubmanifoldSpec};
use torkin_core::verify::{run_all, BatchConfig};

use crate::config::{apply_override, validate, AtlasConfig, Config, Experiment, FamilyKind, PlanePairConfig};
use crate::CliError;

/// Command-line inputs beyond the config document itself.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub overrides: Vec<String>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

/// What a finished run produced.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub summary_path: PathBuf,
    pub summary: Value,
}

/// Parse a config document, apply `--set`/`--seed`/`--out`, and validate.
/// Parse errors carry the line and column of the offending token.
pub fn load_config(text: &str, opts: &RunOptions) -> Result<Config, CliError> {
    let mut cfg: Config = if opts.overrides.is_empty() {
        serde_json::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))?
    } else {
        let mut doc: Value = serde_json::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))?;
        for item in &opts.overrides {
            let (path, raw) = item
                .split_once('=')
                .ok_or_else(|| CliError::Validation(format!("--set `{item}`: expected key=value")))?;
            apply_override(&mut doc, path.trim(), raw.trim()).map_err(CliError::Validation)?;
        }
        serde_json::from_value(doc).map_err(|e| CliError::Validation(format!("config after --set: {e}")))?
    };
    if let Some(seed) = opts.seed {
        cfg.sampling.seed = seed;
    }
    if let Some(out) = &opts.out {
        cfg.output.dir = out.to_string_lossy().into_owned();
    }
    validate(&cfg).map_err(CliError::Validation)?;
    Ok(cfg)
}

/// Read, run and write artifacts. On a suite failure the summary is still
/// written before the error is returned.
pub fn run_path(path: &Path, opts: &RunOptions) -> Result<RunOutcome, CliError> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    let cfg = load_config(&text, opts)?;
    match opts.threads {
        Some(0) => Err(CliError::Validation("--threads: must be at least 1".into())),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| CliError::Estimator(format!("thread pool: {e}")))?;
            pool.install(|| run_config(cfg))
        }
        None => run_config(cfg),
    }
}

enum BuiltFamily {
    Chart(FamilySpec),
    Translation(TranslationFamily),
}

impl BuiltFamily {
    fn as_dyn(&self) -> &dyn Family {
        match self {
            Self::Chart(s) => s,
            Self::Translation(t) => t,
        }
    }
}

fn estimator(e: torkin_core::Error) -> CliError {
    CliError::Estimator(e.to_string())
}

/// Build the family, recording the atlas and any calibrated radius in `cfg`.
fn build_family(cfg: &mut Config) -> Result<BuiltFamily, CliError> {
    let n = cfg.manifold.dim();
    let f = &mut cfg.family;
    match f.kind {
        FamilyKind::Translation => Ok(BuiltFamily::Translation(TranslationFamily::new(n).map_err(estimator)?)),
        FamilyKind::Chart => {
            let grid = match &f.atlas {
                Some(a) => GridAtlasConfig { per_axis: a.per_axis, scale: a.scale },
                None => GridAtlasConfig::default_for(n),
            };
            f.atlas = Some(AtlasConfig { per_axis: grid.per_axis, scale: grid.scale });
            let atlas = ChartAtlas::grid(n, grid).map_err(|e| CliError::Validation(format!("family.atlas: {e}")))?;
            let spec = FamilySpec::new(atlas, f.radius.unwrap_or(1.0), f.flow_step, f.fd_step)
                .map_err(|e| CliError::Validation(format!("family: {e}")))?;
            let spec = match f.radius {
                Some(_) => spec,
                None => {
                    let r = calibrate_radius(&spec, f.calibration_pairs, f.calibration_seed).map_err(estimator)?;
                    f.radius = Some(r);
                    spec.with_radius(r).map_err(estimator)?
                }
            };
            Ok(BuiltFamily::Chart(spec))
        }
    }
}

fn mc_options(cfg: &Config) -> McOptions {
    McOptions { tau_trans: cfg.sampling.tau_trans, max_depth: cfg.sampling.max_depth, ..McOptions::default() }
}

fn mesh(cfg: &Config, name: &str) -> Result<DiscreteSubmanifold, CliError> {
    let spec = &cfg.submanifolds[name];
    spec.discretize(spec.resolution_for_spacing(cfg.sampling.spacing))
        .map_err(|e| CliError::Validation(format!("submanifolds.{name}: {e}")))
}

/// SHA-256 of the resolved config without its output section, so the hash
/// names the computation rather than where it was written.
pub fn config_hash(cfg: &Config) -> String {
    let mut v = serde_json::to_value(cfg).expect("config serializes");
    if let Value::Object(m) = &mut v {
        m.remove("output");
    }
    hex::encode(Sha256::digest(serde_json::to_vec(&v).expect("value serializes")))
}

/// Sample counts for convergence traces: powers of two, then the total.
fn trace_points(total: usize) -> Vec<usize> {
    let mut ks: Vec<usize> =
        std::iter::successors(Some(1usize), |k| k.checked_mul(2)).take_while(|&k| k < total).collect();
    ks.push(total);
    ks
}

#[derive(Serialize)]
struct TraceRow {
    num_samples: usize,
    estimate: f64,
    std_error: f64,
}

#[derive(Serialize)]
struct RatioTraceRow {
    num_samples: usize,
    c_emp: f64,
    c_emp_normalized: f64,
    spread: f64,
    min_ratio: f64,
    max_ratio: f64,
}

#[derive(Serialize)]
struct FiberRow {
    index: usize,
    k: usize,
    estimate: f64,
    std_error: f64,
    accepted: usize,
    estimate_half: Option<f64>,
    std_error_half: Option<f64>,
    accepted_half: usize,
    consistent: bool,
    sin_angle: Option<f64>,
    error: Option<String>,
}

#[derive(Serialize)]
struct SuiteRow<'a> {
    claim: &'a str,
    trials: usize,
    failures: usize,
    worst_error: f64,
    metric: &'a str,
    passed: bool,
}

/// CSV files to write, as `(file name, rows)`.
struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    fn new() -> Self {
        Self { files: Vec::new() }
    }

    fn add<T: Serialize>(&mut self, name: &str, rows: impl IntoIterator<Item = T>) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r).map_err(|e| CliError::Estimator(format!("{name}: {e}")))?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Estimator(format!("{name}: {e}")))?;
        self.files.push((name.to_string(), bytes));
        Ok(())
    }
}

fn run_trace(run: &McRun) -> Result<Vec<TraceRow>, CliError> {
    trace_points(run.samples.len())
        .into_iter()
        .map(|k| {
            let r = run.prefix_report(k).map_err(estimator)?;
            Ok(TraceRow { num_samples: k, estimate: r.estimate, std_error: r.std_error })
        })
        .collect()
}

/// Run a validated config and write `summary.json` (plus CSV logs when
/// enabled) into its output directory.
pub fn run_config(mut cfg: Config) -> Result<RunOutcome, CliError> {
    let start = Instant::now();
    let mut art = Artifacts::new();
    let seed = cfg.sampling.seed;
    let samples = cfg.sampling.num_samples;
    let mut failure: Option<CliError> = None;

    let result = match cfg.experiment.clone() {
        Experiment::TranslationExample { theta, len_i, len_j, start_i, start_j } => {
            let i = SubmanifoldSpec::Geodesic { start: start_i.to_vec(), direction: vec![1.0, 0.0], length: len_i };
            let j = SubmanifoldSpec::Geodesic {
                start: start_j.to_vec(),
                direction: vec![theta.cos(), theta.sin()],
                length: len_j,
            };
            let run = mc_translation_family_run(&i, &j, samples, seed).map_err(estimator)?;
            let report = run.report().map_err(estimator)?;
            let oracle = translation_family_oracle(theta, len_i, len_j);
            let tol = (0.02 * oracle).max(3.0 * report.std_error);
            art.add("samples.csv", &run.samples)?;
            art.add("convergence.csv", run_trace(&run)?)?;
            json!({
                "report": report,
                "oracle": oracle,
                "abs_error": (report.estimate - oracle).abs(),
                "tolerance": tol,
                "within_tolerance": (report.estimate - oracle).abs() <= tol,
            })
        }
        Experiment::TotalIntegral { v, w } => {
            let family = build_family(&mut cfg)?;
            let (mv, mw) = (mesh(&cfg, &v)?, mesh(&cfg, &w)?);
            let run = mc_total_intersections_run(family.as_dyn(), &mv, &mw, samples, seed, &mc_options(&cfg))
                .map_err(estimator)?;
            let report = run.report().map_err(estimator)?;
            let (vol_v, vol_w) = (mv.total_volume(), mw.total_volume());
            art.add("samples.csv", &run.samples)?;
            art.add("convergence.csv", run_trace(&run)?)?;
            json!({
                "report": report,
                "vol_v": vol_v,
                "vol_w": vol_w,
                "ratio": report.estimate / (vol_v * vol_w),
                "normalized_ratio": report.mean_count / (vol_v * vol_w),
            })
        }
        Experiment::FiberIntegral { eps, planes, random, k } => {
            let family = build_family(&mut cfg)?;
            let n = cfg.manifold.dim();
            let mut pairs = Vec::new();
            for (i, pc) in planes.iter().enumerate() {
                pairs
                    .push(plane_pair(n, pc).map_err(|e| CliError::Validation(format!("experiment.planes[{i}]: {e}")))?);
            }
            let stream = sub_seed(seed, 0xF1BE);
            for i in 0..random {
                let kk = k.unwrap_or(1 + i % (n - 1));
                let mut rng = sample_rng(stream, i as u64);
                let p = TorusPoint::new(&uniform_cube(n, &mut rng)).map_err(estimator)?;
                let q = TorusPoint::new(&uniform_cube(n, &mut rng)).map_err(estimator)?;
                let sp = GrassmannPlane::random(p, kk, &mut rng).map_err(estimator)?;
                let sq = GrassmannPlane::random(q, n - kk, &mut rng).map_err(estimator)?;
                pairs.push((sp, sq));
            }
            let translation = matches!(family, BuiltFamily::Translation(_));
            let mut rows = Vec::new();
            let mut reports: Vec<Value> = Vec::new();
            for (i, (sp, sq)) in pairs.iter().enumerate() {
                let truth = if translation { sin_angle(&sp.with_base(*sq.base()), sq).ok() } else { None };
                let res: Result<FiberReport, _> =
                    fiber_integral_with_check(family.as_dyn(), sp, sq, eps, samples, seed);
                match res {
                    Ok(r) => {
                        rows.push(FiberRow {
                            index: i,
                            k: sp.dim(),
                            estimate: r.estimate.estimate,
                            std_error: r.estimate.std_error,
                            accepted: r.accepted,
                            estimate_half: r.half.as_ref().map(|h| h.estimate),
                            std_error_half: r.half.as_ref().map(|h| h.std_error),
                            accepted_half: r.accepted_half,
                            consistent: r.consistent,
                            sin_angle: truth,
                            error: None,
                        });
                        reports.push(json!({ "index": i, "k": sp.dim(), "sin_angle": truth, "report": r }));
                    }
                    Err(e) => {
                        rows.push(FiberRow {
                            index: i,
                            k: sp.dim(),
                            estimate: 0.0,
                            std_error: 0.0,
                            accepted: 0,
                            estimate_half: None,
                            std_error_half: None,
                            accepted_half: 0,
                            consistent: false,
                            sin_angle: truth,
                            error: Some(e.to_string()),
                        });
                        reports.push(json!({ "index": i, "k": sp.dim(), "error": e.to_string() }));
                        failure.get_or_insert(CliError::Estimator(format!("fiber pair {i}: {e}")));
                    }
                }
            }
            let ok: Vec<f64> = rows.iter().filter(|r| r.error.is_none()).map(|r| r.estimate).collect();
            let min = ok.iter().copied().fold(f64::INFINITY, f64::min);
            let max = ok.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            art.add("fiber.csv", &rows)?;
            json!({
                "pairs": reports,
                "min_estimate": if ok.is_empty() { None } else { Some(min) },
                "max_estimate": if ok.is_empty() { None } else { Some(max) },
                "failed_pairs": rows.len() - ok.len(),
            })
        }
        Experiment::EmpiricalC { pairs, pool, doubling } => {
            let family = build_family(&mut cfg)?;
            let table = match &pool {
                Some(p) => p.table(seed).map_err(|e| CliError::Validation(format!("experiment.pool: {e}")))?,
                None => {
                    let mut meshes = Vec::new();
                    for [v, w] in &pairs {
                        meshes.push((mesh(&cfg, v)?, mesh(&cfg, w)?));
                    }
                    PairTable::from_pairs(meshes)
                }
            };
            if table.pairs.len() < 2 {
                return Err(CliError::Validation("experiment: empirical C needs at least two pairs".into()));
            }
            let total = if doubling { 2 * samples } else { samples };
            let runs =
                mc_run_pairs(family.as_dyn(), &table.vs, &table.ws, &table.pairs, total, seed, &mc_options(&cfg))
                    .map_err(estimator)?;
            let report_at =
                |k: usize| -> Result<RatioReport, CliError> { ratio_report(&table, &runs, k, seed).map_err(estimator) };
            let report = report_at(samples)?;
            let mut trace = Vec::new();
            for k in trace_points(total) {
                let r = report_at(k)?;
                trace.push(RatioTraceRow {
                    num_samples: k,
                    c_emp: r.c_emp,
                    c_emp_normalized: r.c_emp_normalized,
                    spread: r.spread,
                    min_ratio: r.min_ratio,
                    max_ratio: r.max_ratio,
                });
            }
            art.add("convergence.csv", trace)?;
            if report.failed_pairs > 0 {
                failure = Some(CliError::Estimator(format!("{} pairs failed", report.failed_pairs)));
            }
            let doubled = if doubling { Some(report_at(total)?) } else { None };
            art.add("ratios.csv", &doubled.as_ref().unwrap_or(&report).ratios)?;
            let change = doubled.as_ref().map(|d| (d.c_emp - report.c_emp).abs() / report.c_emp);
            let change_normalized = doubled
                .as_ref()
                .map(|d| (d.c_emp_normalized - report.c_emp_normalized).abs() / report.c_emp_normalized);
            let vols: Vec<f64> =
                table.pairs.iter().map(|&(a, b)| table.vs[a].total_volume() * table.ws[b].total_volume()).collect();
            let vmin = vols.iter().copied().fold(f64::INFINITY, f64::min);
            let vmax = vols.iter().copied().fold(0.0, f64::max);
            json!({
                "report": report,
                "doubled": doubled,
                "relative_change": change,
                "relative_change_normalized": change_normalized,
                "volume_product_range": vmax / vmin,
            })
        }
        Experiment::Verify { trials } => {
            let family = build_family(&mut cfg)?;
            let BuiltFamily::Chart(spec) = &family else {
                return Err(CliError::Validation("family.kind: verify needs the chart family".into()));
            };
            let batch = trials.unwrap_or_else(BatchConfig::default);
            let report = run_all(spec, &batch, seed).map_err(estimator)?;
            art.add(
                "suites.csv",
                report.suites.iter().map(|s| SuiteRow {
                    claim: &s.claim,
                    trials: s.trials,
                    failures: s.failures,
                    worst_error: s.worst_error,
                    metric: &s.metric,
                    passed: s.passed,
                }),
            )?;
            if !report.passed {
                let failed: Vec<&str> = report.suites.iter().filter(|s| !s.passed).map(|s| s.claim.as_str()).collect();
                failure = Some(CliError::Suite(format!("failed suites: {}", failed.join(", "))));
            }
            serde_json::to_value(&report).expect("report serializes")
        }
    };

    let hash = config_hash(&cfg);
    let summary = json!({
        "experiment": cfg.experiment.name(),
        "config": cfg,
        "config_hash": hash,
        "result": result,
        "wall_time_s": start.elapsed().as_secs_f64(),
    });
    let dir = PathBuf::from(&cfg.output.dir);
    let io = |e: std::io::Error| CliError::Estimator(format!("writing {}: {e}", dir.display()));
    fs::create_dir_all(&dir).map_err(io)?;
    let mut text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    text.push('\n');
    let summary_path = dir.join("summary.json");
    fs::write(&summary_path, text).map_err(io)?;
    if cfg.output.csv {
        for (name, bytes) in &art.files {
            fs::write(dir.join(name), bytes).map_err(io)?;
        }
    }
    match failure {
        Some(e) => Err(e),
        None => Ok(RunOutcome { summary_path, summary }),
    }
}

fn plane_pair(n: usize, pc: &PlanePairConfig) -> torkin_core::Result<(GrassmannPlane, GrassmannPlane)> {
    if pc.p.len() != n || pc.q.len() != n {
        return Err(torkin_core::Error::InvalidInput(format!("base points must have {n} coordinates")));
    }
    let sp = GrassmannPlane::from_columns(TorusPoint::new(&pc.p)?, &pc.basis_p)?;
    let sq = GrassmannPlane::from_columns(TorusPoint::new(&pc.q)?, &pc.basis_q)?;
    if sp.dim() + sq.dim() != n {
        return Err(torkin_core::Error::InvalidInput("planes are not complementary".into()));
    }
    Ok((sp, sq))
}
