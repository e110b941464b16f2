//! Acceptance run: one pass/fail line per criterion, written straight to
//! stdout so the lines survive test-output capture.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use serde_json::{json, Value};
use torkin_cli::{load_config, run_config, RunOptions};
use torkin_core::family::{calibrate_radius, ChartAtlas, FamilySpec, TranslationFamily};
use torkin_core::geom::{sin_angle, wrap_half, GrassmannPlane, TorusPoint};
use torkin_core::intersect::{count_intersections, DEFAULT_TAU_TRANS};
use torkin_core::kinematic::{fiber_integral_with_check, mc_translation_family_run, translation_family_oracle};
use torkin_core::submanifold::SubmanifoldSpec;
use torkin_core::verify::{suite_a1, suite_a2, suite_lemma_b2, suite_prop_b1, LEMMA_B2_TOL, PROP_B1_TOL};

const ANGLES: [f64; 3] = [std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_6, std::f64::consts::FRAC_PI_4];
const LENGTHS: [f64; 3] = [1.0, 0.5, 0.8];

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn emit(line: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}

fn geodesic(start: [f64; 2], theta: f64, length: f64) -> SubmanifoldSpec {
    SubmanifoldSpec::Geodesic { start: start.to_vec(), direction: vec![theta.cos(), theta.sin()], length }
}

fn chart_spec(n: usize, flow_step: f64) -> FamilySpec {
    let s = FamilySpec::new(ChartAtlas::default_for(n).unwrap(), 1.0, flow_step, 1e-6).unwrap();
    let r = calibrate_radius(&s, 200, 1).unwrap();
    s.with_radius(r).unwrap()
}

fn criterion_1() -> Outcome {
    let mut worst_slack = f64::NEG_INFINITY;
    let mut slowest: f64 = 0.0;
    let mut fails = Vec::new();
    for &theta in &ANGLES {
        for &li in &LENGTHS {
            for &lj in &LENGTHS {
                let t0 = Instant::now();
                let run = mc_translation_family_run(
                    &geodesic([0.1, 0.2], 0.0, li),
                    &geodesic([0.35, 0.05], theta, lj),
                    100_000,
                    17,
                );
                let secs = t0.elapsed().as_secs_f64();
                slowest = slowest.max(secs);
                let report = match run.and_then(|r| r.report()) {
                    Ok(r) => r,
                    Err(e) => {
                        fails.push(format!("theta {theta:.4} lens {li}/{lj}: {e}"));
                        continue;
                    }
                };
                let truth = translation_family_oracle(theta, li, lj);
                let tol = (0.02 * truth).max(3.0 * report.std_error);
                let err = (report.estimate - truth).abs();
                worst_slack = worst_slack.max(err / tol);
                if err > tol || secs > 60.0 {
                    fails.push(format!(
                        "theta {theta:.4} lens {li}/{lj}: estimate {} truth {truth} tol {tol} time {secs:.1}s",
                        report.estimate
                    ));
                }
            }
        }
    }
    let detail = format!(
        "27 configurations, worst |error|/tolerance {worst_slack:.3}, slowest {slowest:.2}s{}",
        if fails.is_empty() { String::new() } else { format!("; failures: {}", fails.join("; ")) }
    );
    outcome(fails.is_empty(), detail)
}

fn criterion_2() -> Outcome {
    let mut fails = Vec::new();
    let mut samples = 0usize;
    for &li in &LENGTHS {
        for &lj in &LENGTHS {
            match mc_translation_family_run(
                &geodesic([0.1, 0.2], 0.0, li),
                &geodesic([0.35, 0.05], 0.0, lj),
                100_000,
                19,
            ) {
                Ok(run) => {
                    samples += run.samples.len();
                    let nonzero = run.samples.iter().filter(|s| s.count != 0).count();
                    let est = run.report().map(|r| r.estimate);
                    if nonzero != 0 || est != Ok(0.0) {
                        fails.push(format!("lens {li}/{lj}: {nonzero} nonzero counts, estimate {est:?}"));
                    }
                }
                Err(e) => fails.push(format!("lens {li}/{lj}: {e}")),
            }
        }
    }
    outcome(
        fails.is_empty(),
        format!(
            "theta = 0 over 9 length pairs, {samples} samples, all counts 0 and estimates exactly 0: {}",
            fails.is_empty()
        ) + &if fails.is_empty() { String::new() } else { format!("; {}", fails.join("; ")) },
    )
}

fn criterion_3() -> Outcome {
    let t0 = Instant::now();
    let rep = suite_lemma_b2(1000, 23);
    let secs = t0.elapsed().as_secs_f64();
    let passed = rep.passed && rep.trials == 1000 && rep.worst_error <= LEMMA_B2_TOL && secs <= 5.0;
    outcome(
        passed,
        format!(
            "{} instances, {} failures, worst relative error {:.3e} (tol {LEMMA_B2_TOL:e}), {secs:.2}s (limit 5s)",
            rep.trials, rep.failures, rep.worst_error
        ),
    )
}

fn criterion_4(spec2: &FamilySpec) -> Outcome {
    let rep = suite_prop_b1(spec2, 200, 5, 29);
    let jac = rep.stats.get("worst_jacobian_fd_error").copied().unwrap_or(f64::NAN);
    let dev = rep.stats.get("worst_param_derivative_fd_error").copied().unwrap_or(f64::NAN);
    outcome(
        rep.passed && rep.trials == 200 && rep.worst_error <= PROP_B1_TOL,
        format!(
            "{} instances on T^2, {} failures, worst formula/direct relative error {:.3e} (tol {PROP_B1_TOL:e}); \
             FD checks at 1e-5: worst jacobian {jac:.3e}, worst parameter derivative {dev:.3e}",
            rep.trials, rep.failures, rep.worst_error
        ),
    )
}

fn criterion_5(spec2: &FamilySpec) -> Outcome {
    let rep = suite_a1(spec2, 1000, 31);
    let stat = |k: &str| rep.stats.get(k).copied().unwrap_or(f64::NAN);
    outcome(
        rep.passed && rep.stats.get("rank_trials") == Some(&1000.0),
        format!(
            "rank checks {} with min singular value {:.3e}; structure checks {} with worst diagonal deviation {:.3e}; {} failures",
            stat("rank_trials"),
            stat("min_singular_value_min"),
            stat("structure_points"),
            rep.worst_error,
            rep.failures
        ),
    )
}

fn criterion_6(spec2: &FamilySpec, spec3: &FamilySpec) -> Outcome {
    let r2 = suite_a2(spec2, 100, 37);
    let r3 = suite_a2(spec3, 100, 37);
    let stat = |r: &torkin_core::verify::SuiteReport, k: &str| r.stats.get(k).copied().unwrap_or(f64::NAN);
    outcome(
        r2.passed && r3.passed && r2.trials == 200 && r3.trials == 300,
        format!(
            "T^2: {}/{} verified, max witness norm {:.3} <= R {:.3}; T^3: {}/{} verified, max witness norm {:.3} <= R {:.3}",
            r2.trials - r2.failures,
            r2.trials,
            stat(&r2, "max_witness_norm"),
            stat(&r2, "radius"),
            r3.trials - r3.failures,
            r3.trials,
            stat(&r3, "max_witness_norm"),
            stat(&r3, "radius")
        ),
    )
}

fn run_json(doc: Value, out: &Path) -> Result<Value, String> {
    let opts = RunOptions { out: Some(out.to_path_buf()), ..RunOptions::default() };
    let cfg = load_config(&doc.to_string(), &opts).map_err(|e| e.to_string())?;
    run_config(cfg).map(|o| o.summary).map_err(|e| e.to_string())
}

fn criterion_7(tmp: &Path) -> Outcome {
    let doc = json!({
        "manifold": "t2",
        "family": { "kind": "chart", "flow_step": 0.05, "calibration_seed": 1 },
        "experiment": {
            "name": "empirical-C",
            "pool": { "num_v": 8, "num_w": 8, "min_length": 0.25, "max_length": 1.0, "spacing": 0.05, "max_pairs": null },
            "doubling": true
        },
        "sampling": { "num_samples": 2000, "seed": 11 }
    });
    let t0 = Instant::now();
    let summary = match run_json(doc, &tmp.join("c7")) {
        Ok(s) => s,
        Err(e) => return outcome(false, e),
    };
    let secs = t0.elapsed().as_secs_f64();
    let res = &summary["result"];
    let check = |r: &Value| -> (f64, usize, usize, bool) {
        let c = r["c_emp"].as_f64().unwrap_or(f64::INFINITY);
        let ratios = r["ratios"].as_array().cloned().unwrap_or_default();
        let inside = ratios.iter().filter(|e| e["ratio"].as_f64().is_some_and(|x| x >= 1.0 / c && x <= c)).count();
        (c, ratios.len(), inside, r["failed_pairs"] == 0)
    };
    let (c1, n1, in1, ok1) = check(&res["report"]);
    let (c2, n2, in2, ok2) = check(&res["doubled"]);
    let change = res["relative_change"].as_f64().unwrap_or(f64::INFINITY);
    let vol_range = res["volume_product_range"].as_f64().unwrap_or(0.0);
    let passed = n1 >= 50
        && vol_range >= 15.0
        && ok1
        && ok2
        && in1 == n1
        && in2 == n2
        && c1.is_finite()
        && c2.is_finite()
        && change <= 0.10
        && secs <= 1800.0;
    outcome(
        passed,
        format!(
            "{n1} pairs, volume products span {vol_range:.1}x; S=2000: c_emp {c1:.4e} ({in1}/{n1} inside), \
             S=4000: c_emp {c2:.4e} ({in2}/{n2} inside); relative change {:.2}% (limit 10%); \
             normalized c_emp {:.3} -> {:.3}, spread {:.3}; {secs:.0}s (limit 1800s)",
            100.0 * change,
            res["report"]["c_emp_normalized"].as_f64().unwrap_or(f64::NAN),
            res["doubled"]["c_emp_normalized"].as_f64().unwrap_or(f64::NAN),
            res["doubled"]["spread"].as_f64().unwrap_or(f64::NAN),
        ),
    )
}

fn criterion_8(tmp: &Path) -> Outcome {
    let fam = TranslationFamily::new(2).unwrap();
    let sp = GrassmannPlane::from_columns(TorusPoint::new(&[0.2, 0.3]).unwrap(), &[vec![1.0, 0.0]]).unwrap();
    let theta: f64 = 0.6;
    let sq =
        GrassmannPlane::from_columns(TorusPoint::new(&[0.7, 0.1]).unwrap(), &[vec![theta.cos(), theta.sin()]]).unwrap();
    let truth = sin_angle(&sp.with_base(*sq.base()), &sq).unwrap();
    let mut trace = Vec::new();
    let mut final_rel = f64::INFINITY;
    for eps in [0.04, 0.02, 0.01] {
        match fiber_integral_with_check(&fam, &sp, &sq, eps, 20_000_000, 41) {
            Ok(r) => {
                let rel = (r.estimate.estimate - truth).abs() / truth;
                trace.push(format!("eps {eps}: {:.4} (rel {:.2}%)", r.estimate.estimate, 100.0 * rel));
                final_rel = rel;
            }
            Err(e) => trace.push(format!("eps {eps}: {e}")),
        }
    }
    let translation_ok = final_rel <= 0.05;

    let doc = json!({
        "manifold": "t2",
        "family": { "kind": "chart", "flow_step": 0.05, "calibration_seed": 1 },
        "experiment": { "name": "fiber-integral", "eps": 0.02, "random": 50 },
        "sampling": { "num_samples": 10000, "seed": 43 }
    });
    let chart = run_json(doc, &tmp.join("c8"));
    let (chart_ok, chart_detail) = match chart {
        Ok(s) => {
            let ests: Vec<f64> = s["result"]["pairs"]
                .as_array()
                .map(|a| a.iter().filter_map(|p| p["report"]["estimate"]["estimate"].as_f64()).collect())
                .unwrap_or_default();
            let ok = ests.len() == 50 && ests.iter().all(|e| e.is_finite() && *e > 0.0);
            let min = ests.iter().copied().fold(f64::INFINITY, f64::min);
            let max = ests.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (
                ok,
                format!(
                    "{} chart-family estimates, all positive and finite: {ok}, range [{min:.3e}, {max:.3e}]",
                    ests.len()
                ),
            )
        }
        Err(e) => (false, format!("chart-family run failed: {e}")),
    };
    outcome(
        translation_ok && chart_ok,
        format!("translation family vs sin angle {truth:.4}: {}; {chart_detail}", trace.join(", ")),
    )
}

/// Crossings of the closed `(p, q)` geodesic from `start` with the
/// horizontal circle at height `y0`, counted as sign changes of the
/// wrapped height offset on a fine grid of the curve parameter.
fn grid_oracle(start: [f64; 2], class: [i64; 2], y0: f64) -> usize {
    let steps = 200_000;
    let offset = |t: f64| wrap_half(start[1] + class[1] as f64 * t - y0);
    let mut count = 0;
    let mut prev = offset(0.0);
    for i in 1..=steps {
        let cur = offset(i as f64 / steps as f64);
        if (prev < 0.0) != (cur < 0.0) && (cur - prev).abs() < 0.25 {
            count += 1;
        }
        prev = cur;
    }
    count
}

fn criterion_9() -> Outcome {
    let y0 = 0.5;
    let w_spec = SubmanifoldSpec::ClosedGeodesic { start: vec![0.0, y0], class: vec![1, 0] };
    let w = w_spec.discretize(w_spec.resolution_for_spacing(0.01)).unwrap();
    let start = [0.113, 0.237];
    let mut parts = Vec::new();
    let mut ok = true;
    for class in [[1i64, 1], [1, 2], [2, 3]] {
        let v_spec = SubmanifoldSpec::ClosedGeodesic { start: start.to_vec(), class: class.to_vec() };
        let counted = v_spec
            .discretize(v_spec.resolution_for_spacing(0.01))
            .and_then(|v| count_intersections(&v, &w, DEFAULT_TAU_TRANS))
            .map(|s| s.count);
        let oracle = grid_oracle(start, class, y0);
        let expected = class[1].unsigned_abs() as usize;
        let good = counted.as_ref().is_ok_and(|&c| c == expected) && oracle == expected;
        ok &= good;
        parts.push(format!("({},{}): counted {:?}, grid oracle {oracle}, |q| {expected}", class[0], class[1], counted));
    }
    outcome(ok, parts.join("; "))
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn binary_run(config: &str, sets: &[&str], threads: usize, out: &Path) -> Result<Value, String> {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_torkin"));
    cmd.arg("--config").arg(configs_dir().join(config)).arg("--out").arg(out);
    cmd.arg("--threads").arg(threads.to_string());
    for s in sets {
        cmd.arg("--set").arg(s);
    }
    let output = cmd.output().map_err(|e| e.to_string())?;
    if !output.status.success() {
        return Err(format!("{config}: exit {:?}: {}", output.status.code(), String::from_utf8_lossy(&output.stderr)));
    }
    let text = std::fs::read_to_string(out.join("summary.json")).map_err(|e| e.to_string())?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}

fn criterion_10(tmp: &Path) -> Outcome {
    let runs: [(&str, &[&str]); 5] = [
        ("translation-example.json", &["sampling.num_samples=20000", "experiment.theta=0.7"]),
        ("total-integral.json", &["sampling.num_samples=200"]),
        ("fiber-integral.json", &["sampling.num_samples=200000"]),
        ("empirical-c.json", &["sampling.num_samples=50", "experiment.pool.max_pairs=6"]),
        (
            "verify-all.json",
            &[
                r#"experiment.trials={"a1_trials":20,"a2_trials":5,"claim_2_2_trials":5,"lemma_b2_trials":50,"prop_b1_trials":5,"prop_b1_param_fd_checks":1}"#,
            ],
        ),
    ];
    let mut parts = Vec::new();
    let mut ok = true;
    for (i, (config, sets)) in runs.iter().enumerate() {
        let a = binary_run(config, sets, 1, &tmp.join(format!("c10-{i}-t1")));
        let b = binary_run(config, sets, 2, &tmp.join(format!("c10-{i}-t2")));
        match (a, b) {
            (Ok(a), Ok(b)) => {
                let same = a["result"] == b["result"] && a["config_hash"] == b["config_hash"];
                ok &= same;
                parts.push(format!(
                    "{}: {}",
                    a["experiment"].as_str().unwrap_or("?"),
                    if same { "identical" } else { "DIFFER" }
                ));
            }
            (a, b) => {
                ok = false;
                parts.push(format!("{config}: {:?} / {:?}", a.err(), b.err()));
            }
        }
    }
    outcome(ok, format!("--threads 1 vs 2: {}", parts.join(", ")))
}

#[test]
fn acceptance() {
    let tmp = tempfile::tempdir().unwrap();
    let spec2 = chart_spec(2, torkin_core::family::DEFAULT_FLOW_STEP);
    let spec3 = chart_spec(3, torkin_core::family::DEFAULT_FLOW_STEP);
    let mut failed = Vec::new();
    let mut report = |id: usize, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let t0 = Instant::now();
        let o = f();
        emit(&format!(
            "criterion {id:>2} {} {name}: {} [{:.1}s]",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail,
            t0.elapsed().as_secs_f64()
        ));
        if !o.passed {
            failed.push(id);
        }
    };
    report(1, "translation example", &mut criterion_1);
    report(2, "parallel degenerate case", &mut criterion_2);
    report(3, "graph normal-Jacobian identity", &mut criterion_3);
    report(4, "ratio formula cross-validation", &mut || criterion_4(&spec2));
    report(5, "submersion suite", &mut || criterion_5(&spec2));
    report(6, "transitivity suite", &mut || criterion_6(&spec2, &spec3));
    report(7, "kinematic inequality", &mut || criterion_7(tmp.path()));
    report(8, "fiber-integral estimator", &mut || criterion_8(tmp.path()));
    report(9, "closed geodesic intersections", &mut criterion_9);
    report(10, "thread-count determinism", &mut || criterion_10(tmp.path()));
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
