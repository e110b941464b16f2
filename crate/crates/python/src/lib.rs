//! Python module `torkin`: families, submanifolds, intersection counts,
//! the Monte Carlo estimators and the property suites.
//!
//! Matrices cross the boundary as lists of rows; plane bases as lists of
//! column vectors. Reports come back as plain dicts.

// Validity checks are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use nalgebra::DMatrix;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde_json::Value;
use torkin_core::family::{
    calibrate_radius, family_apply, family_jacobian, family_param_derivative, ChartAtlas, Family, FamilyParams,
    FamilySpec, GridAtlasConfig, TranslationFamily, DEFAULT_FD_STEP, DEFAULT_FLOW_STEP,
};
use torkin_core::geom::{normal_jacobian, sin_angle_bases, GrassmannPlane, TorusPoint};
use torkin_core::intersect::{count_intersections as count_core, DEFAULT_TAU_TRANS};
use torkin_core::kinematic as kin;
use torkin_core::sampling::sample_rng;
use torkin_core::submanifold::{DiscreteSubmanifold, SubmanifoldSpec};
use torkin_core::verify::{run_all, BatchConfig};

fn err(e: torkin_core::Error) -> PyErr {
    match e {
        torkin_core::Error::InvalidInput(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn to_py(py: Python<'_>, v: &Value) -> PyResult<Py<PyAny>> {
    Ok(match v {
        Value::Null => py.None(),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any().unbind(),
        Value::Number(n) => match (n.as_i64(), n.as_f64()) {
            (Some(i), _) => i.into_pyobject(py)?.into_any().unbind(),
            (None, Some(f)) => f.into_pyobject(py)?.into_any().unbind(),
            _ => py.None(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any().unbind(),
        Value::Array(a) => {
            let items = a.iter().map(|x| to_py(py, x)).collect::<PyResult<Vec<_>>>()?;
            PyList::new(py, items)?.into_any().unbind()
        }
        Value::Object(m) => {
            let d = PyDict::new(py);
            for (k, x) in m {
                d.set_item(k, to_py(py, x)?)?;
            }
            d.into_any().unbind()
        }
    })
}

fn report_to_py<T: serde::Serialize>(py: Python<'_>, r: &T) -> PyResult<Py<PyAny>> {
    let v = serde_json::to_value(r).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    to_py(py, &v)
}

fn rows_to_matrix(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(PyValueError::new_err("ragged matrix"));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn columns_to_matrix(n: usize, cols: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    if cols.iter().any(|c| c.len() != n) {
        return Err(PyValueError::new_err(format!("basis vectors must have length {n}")));
    }
    Ok(DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i]))
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn point(x: &[f64]) -> PyResult<TorusPoint> {
    TorusPoint::new(x).map_err(err)
}

enum Inner {
    Chart(FamilySpec),
    Translation(TranslationFamily),
}

/// A family of torus diffeomorphisms: the chart-built family or rigid translations.
#[pyclass(name = "Family", module = "torkin", frozen)]
struct PyFamily {
    inner: Inner,
}

impl PyFamily {
    fn fam(&self) -> &dyn Family {
        match &self.inner {
            Inner::Chart(s) => s,
            Inner::Translation(t) => t,
        }
    }

    fn params(&self, w: Vec<f64>) -> FamilyParams {
        FamilyParams::new(w)
    }
}

#[pymethods]
impl PyFamily {
    /// Chart-built family on `T^n`; the radius is calibrated from witnesses when omitted.
    #[staticmethod]
    #[pyo3(signature = (n, radius=None, flow_step=DEFAULT_FLOW_STEP, fd_step=DEFAULT_FD_STEP, per_axis=None, scale=None, calibration_pairs=200, calibration_seed=0))]
    #[allow(clippy::too_many_arguments)]
    fn chart(
        n: usize,
        radius: Option<f64>,
        flow_step: f64,
        fd_step: f64,
        per_axis: Option<usize>,
        scale: Option<f64>,
        calibration_pairs: usize,
        calibration_seed: u64,
    ) -> PyResult<Self> {
        let mut grid = GridAtlasConfig::default_for(n);
        if let Some(p) = per_axis {
            grid.per_axis = p;
        }
        if let Some(s) = scale {
            grid.scale = s;
        }
        let atlas = ChartAtlas::grid(n, grid).map_err(err)?;
        let spec = FamilySpec::new(atlas, radius.unwrap_or(1.0), flow_step, fd_step).map_err(err)?;
        let spec = match radius {
            Some(_) => spec,
            None => {
                let r = calibrate_radius(&spec, calibration_pairs, calibration_seed).map_err(err)?;
                spec.with_radius(r).map_err(err)?
            }
        };
        Ok(Self { inner: Inner::Chart(spec) })
    }

    /// Translations of `T^n` by the unit cube.
    #[staticmethod]
    fn translation(n: usize) -> PyResult<Self> {
        Ok(Self { inner: Inner::Translation(TranslationFamily::new(n).map_err(err)?) })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.fam().dim()
    }

    #[getter]
    fn param_dim(&self) -> usize {
        self.fam().param_dim()
    }

    #[getter]
    fn ln_param_volume(&self) -> f64 {
        self.fam().ln_param_volume()
    }

    /// Parameter-ball radius of the chart family; `None` for translations.
    #[getter]
    fn radius(&self) -> Option<f64> {
        match &self.inner {
            Inner::Chart(s) => Some(s.radius()),
            Inner::Translation(_) => None,
        }
    }

    /// Uniform parameter draw for sample `index` of the stream `seed`.
    #[pyo3(signature = (seed, index=0))]
    fn sample_params(&self, seed: u64, index: u64) -> Vec<f64> {
        self.fam().sample_params(&mut sample_rng(seed, index)).into_vec()
    }

    fn apply(&self, w: Vec<f64>, x: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(family_apply(self.fam(), &self.params(w), &point(&x)?).map_err(err)?.coords().to_vec())
    }

    fn jacobian(&self, w: Vec<f64>, x: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        Ok(matrix_rows(&family_jacobian(self.fam(), &self.params(w), &point(&x)?).map_err(err)?))
    }

    fn param_derivative(&self, w: Vec<f64>, x: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        Ok(matrix_rows(&family_param_derivative(self.fam(), &self.params(w), &point(&x)?).map_err(err)?))
    }

    /// `(formula, direct)` normal-Jacobian ratios at `(w, p)`; bases are column lists.
    fn nj_ratios(
        &self,
        w: Vec<f64>,
        p: Vec<f64>,
        basis_v: Vec<Vec<f64>>,
        basis_w: Vec<Vec<f64>>,
    ) -> PyResult<(f64, f64)> {
        let n = self.dim();
        let (bv, bw) = (columns_to_matrix(n, &basis_v)?, columns_to_matrix(n, &basis_w)?);
        let (w, p) = (self.params(w), point(&p)?);
        let f = kin::nj_ratio_formula(self.fam(), &w, &p, &bv, &bw).map_err(err)?;
        let d = kin::nj_ratio_direct(self.fam(), &w, &p, &bv, &bw).map_err(err)?;
        Ok((f, d))
    }

    /// All property suites as one batch (chart family only).
    #[pyo3(signature = (seed, a1_trials=1000, a2_trials=100, claim_2_2_trials=100, lemma_b2_trials=1000, prop_b1_trials=200, prop_b1_param_fd_checks=5))]
    #[allow(clippy::too_many_arguments)]
    fn run_suites(
        &self,
        py: Python<'_>,
        seed: u64,
        a1_trials: usize,
        a2_trials: usize,
        claim_2_2_trials: usize,
        lemma_b2_trials: usize,
        prop_b1_trials: usize,
        prop_b1_param_fd_checks: usize,
    ) -> PyResult<Py<PyAny>> {
        let Inner::Chart(spec) = &self.inner else {
            return Err(PyValueError::new_err("suites need the chart family"));
        };
        let cfg = BatchConfig {
            a1_trials,
            a2_trials,
            claim_2_2_trials,
            lemma_b2_trials,
            prop_b1_trials,
            prop_b1_param_fd_checks,
        };
        let rep = py.detach(|| run_all(spec, &cfg, seed)).map_err(err)?;
        report_to_py(py, &rep)
    }
}

/// A discretized submanifold together with its `SubmanifoldSpec`.
#[pyclass(name = "Submanifold", module = "torkin", frozen)]
struct PySubmanifold {
    spec: SubmanifoldSpec,
    mesh: DiscreteSubmanifold,
}

#[pymethods]
impl PySubmanifold {
    /// Build from a spec in the config-file format, e.g.
    /// `{"kind": "geodesic", "start": [..], "direction": [..], "length": 0.5}`.
    #[staticmethod]
    #[pyo3(signature = (spec_json, spacing=0.05))]
    fn from_json(spec_json: &str, spacing: f64) -> PyResult<Self> {
        let spec: SubmanifoldSpec =
            serde_json::from_str(spec_json).map_err(|e| PyValueError::new_err(e.to_string()))?;
        spec.validate().map_err(err)?;
        if !(spacing > 0.0) {
            return Err(PyValueError::new_err("spacing must be positive"));
        }
        let mesh = spec.discretize(spec.resolution_for_spacing(spacing)).map_err(err)?;
        Ok(Self { spec, mesh })
    }

    #[staticmethod]
    #[pyo3(signature = (start, direction, length, spacing=0.05))]
    fn geodesic(start: Vec<f64>, direction: Vec<f64>, length: f64, spacing: f64) -> PyResult<Self> {
        let spec = SubmanifoldSpec::Geodesic { start, direction, length };
        Self::build(spec, spacing)
    }

    #[staticmethod]
    #[pyo3(signature = (start, homology_class, spacing=0.05))]
    fn closed_geodesic(start: Vec<f64>, homology_class: Vec<i64>, spacing: f64) -> PyResult<Self> {
        Self::build(SubmanifoldSpec::ClosedGeodesic { start, class: homology_class }, spacing)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.mesh.dim()
    }

    #[getter]
    fn ambient_dim(&self) -> usize {
        self.mesh.ambient_dim()
    }

    /// Total volume of the discretization.
    #[getter]
    fn volume(&self) -> f64 {
        self.mesh.total_volume()
    }

    #[getter]
    fn num_elements(&self) -> usize {
        self.mesh.num_elements()
    }

    fn vertices(&self) -> Vec<Vec<f64>> {
        self.mesh.vertices().iter().map(|v| v.coords().to_vec()).collect()
    }

    fn spec_json(&self) -> String {
        serde_json::to_string(&self.spec).expect("spec serializes")
    }
}

impl PySubmanifold {
    fn build(spec: SubmanifoldSpec, spacing: f64) -> PyResult<Self> {
        spec.validate().map_err(err)?;
        if !(spacing > 0.0) {
            return Err(PyValueError::new_err("spacing must be positive"));
        }
        let mesh = spec.discretize(spec.resolution_for_spacing(spacing)).map_err(err)?;
        Ok(Self { spec, mesh })
    }
}

/// Transverse intersection count of complementary dimensional submanifolds.
#[pyfunction]
#[pyo3(signature = (a, b, tau_trans=DEFAULT_TAU_TRANS))]
fn count_intersections(a: &PySubmanifold, b: &PySubmanifold, tau_trans: f64) -> PyResult<usize> {
    Ok(count_core(&a.mesh, &b.mesh, tau_trans).map_err(err)?.count)
}

/// Monte Carlo family integral of `#(h(V) ∩ W)`.
#[pyfunction]
fn mc_total_intersections(
    py: Python<'_>,
    family: &PyFamily,
    v: &PySubmanifold,
    w: &PySubmanifold,
    num_samples: usize,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let r =
        py.detach(|| kin::mc_total_intersections(family.fam(), &v.mesh, &w.mesh, num_samples, seed)).map_err(err)?;
    report_to_py(py, &r)
}

/// `|sin theta| * len_i * len_j`.
#[pyfunction]
fn translation_family_oracle(theta: f64, len_i: f64, len_j: f64) -> f64 {
    kin::translation_family_oracle(theta, len_i, len_j)
}

/// Translation-family average of `#((I + a) ∩ J)` for two geodesic segments on `T^2`.
#[pyfunction]
fn mc_translation_family(
    py: Python<'_>,
    i: &PySubmanifold,
    j: &PySubmanifold,
    num_samples: usize,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let r = py.detach(|| kin::mc_translation_family(&i.spec, &j.spec, num_samples, seed)).map_err(err)?;
    report_to_py(py, &r)
}

/// Fiber-integral estimate for planes `P` at `p` and `Q` at `q`, with the
/// `eps / 2` consistency check.
#[pyfunction]
#[pyo3(signature = (family, p, basis_p, q, basis_q, num_samples, seed, eps=kin::DEFAULT_FIBER_EPS))]
#[allow(clippy::too_many_arguments)]
fn fiber_integral_estimate(
    py: Python<'_>,
    family: &PyFamily,
    p: Vec<f64>,
    basis_p: Vec<Vec<f64>>,
    q: Vec<f64>,
    basis_q: Vec<Vec<f64>>,
    num_samples: usize,
    seed: u64,
    eps: f64,
) -> PyResult<Py<PyAny>> {
    let sp = GrassmannPlane::from_columns(point(&p)?, &basis_p).map_err(err)?;
    let sq = GrassmannPlane::from_columns(point(&q)?, &basis_q).map_err(err)?;
    let r =
        py.detach(|| kin::fiber_integral_with_check(family.fam(), &sp, &sq, eps, num_samples, seed)).map_err(err)?;
    report_to_py(py, &r)
}

/// `sqrt(det(A A^T))` for a matrix given as rows.
#[pyfunction(name = "normal_jacobian")]
fn normal_jacobian_py(rows: Vec<Vec<f64>>) -> PyResult<f64> {
    normal_jacobian(&rows_to_matrix(&rows)?).map_err(err)
}

/// `|det [B_P | B_Q]|` for orthonormal bases given as column lists.
#[pyfunction(name = "sin_angle")]
fn sin_angle_py(basis_p: Vec<Vec<f64>>, basis_q: Vec<Vec<f64>>) -> PyResult<f64> {
    let n = basis_p.first().or(basis_q.first()).map_or(0, Vec::len);
    let (bp, bq) = (columns_to_matrix(n, &basis_p)?, columns_to_matrix(n, &basis_q)?);
    if bp.ncols() + bq.ncols() != n {
        return Err(PyValueError::new_err("planes are not complementary"));
    }
    Ok(sin_angle_bases(&bp, &bq))
}

/// Run an experiment config (JSON text) and return the summary dict.
#[pyfunction]
#[pyo3(signature = (config_json, out_dir=None))]
fn run_experiment(py: Python<'_>, config_json: &str, out_dir: Option<String>) -> PyResult<Py<PyAny>> {
    let opts = torkin_cli::RunOptions { out: out_dir.map(Into::into), ..Default::default() };
    let cfg = torkin_cli::load_config(config_json, &opts).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let outcome = py.detach(|| torkin_cli::run_config(cfg)).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    to_py(py, &outcome.summary)
}

#[pymodule]
fn torkin(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyFamily>()?;
    m.add_class::<PySubmanifold>()?;
    m.add_function(wrap_pyfunction!(count_intersections, m)?)?;
    m.add_function(wrap_pyfunction!(mc_total_intersections, m)?)?;
    m.add_function(wrap_pyfunction!(translation_family_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(mc_translation_family, m)?)?;
    m.add_function(wrap_pyfunction!(fiber_integral_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(normal_jacobian_py, m)?)?;
    m.add_function(wrap_pyfunction!(sin_angle_py, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
