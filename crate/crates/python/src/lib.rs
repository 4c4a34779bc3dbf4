//! Python module `netpred`: datasets, network fitting, predictability,
//! samplers and rendering.

use nalgebra::DMatrix;
use netpred_core::cv::{CvConfig, Penalty};
use netpred_core::data::{load_csv, load_spec, Dataset, TimeIndex, VariableKind, VariableSpec};
use netpred_core::error::Error;
use netpred_core::mgm::{self, MgmConfig, Rule};
use netpred_core::model_io::{read_model, to_json, write_json, ModelDocument, NetworkModel};
use netpred_core::mvar::{self, VarConfig};
use netpred_core::predictability::{self, PredictabilityReport, SampleKind};
use netpred_core::sampler;
use netpred_core::viz::{export_dot, render_svg, LayoutOptions, RenderedGraph, RingPalette, SvgOptions};
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(netpred, NetpredError, PyValueError);

fn err(e: Error) -> PyErr {
    NetpredError::new_err(format!("{}: {e}", e.code()))
}

fn matrix(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(PyValueError::new_err("matrix rows differ in length"));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn time_index(pairs: Option<Vec<(i64, i64)>>) -> Option<Vec<TimeIndex>> {
    pairs.map(|v| v.into_iter().map(|(day, beep)| TimeIndex { day, beep }).collect())
}

fn penalty(folds: usize, n_lambda: usize, lambda_min_ratio: f64, seed: u64, lam: Option<f64>) -> Penalty {
    match lam {
        Some(lambda) => Penalty::Fixed { lambda },
        None => Penalty::CrossValidated(CvConfig { folds, n_lambda, lambda_min_ratio, seed }),
    }
}

/// Typed data table. Categorical cells hold codes `1..=levels`.
#[pyclass(name = "Dataset", module = "netpred", frozen)]
struct PyDataset {
    inner: Dataset,
}

#[pymethods]
impl PyDataset {
    /// `kinds` entries are `"g"` (continuous) or `"c"` (categorical);
    /// `levels` gives the category count of each categorical column.
    #[new]
    #[pyo3(signature = (columns, names, kinds, levels=None))]
    fn new(
        columns: Vec<Vec<f64>>,
        names: Vec<String>,
        kinds: Vec<String>,
        levels: Option<Vec<u32>>,
    ) -> PyResult<Self> {
        if names.len() != kinds.len() {
            return Err(PyValueError::new_err("names and kinds differ in length"));
        }
        let levels = levels.unwrap_or_else(|| vec![1; names.len()]);
        if levels.len() != names.len() {
            return Err(PyValueError::new_err("names and levels differ in length"));
        }
        let spec = names
            .into_iter()
            .zip(kinds)
            .zip(levels)
            .map(|((name, kind), k)| match kind.as_str() {
                "g" => Ok(VariableSpec::continuous(name)),
                "c" => Ok(VariableSpec::categorical(name, k)),
                other => Err(PyValueError::new_err(format!("unknown kind {other:?}"))),
            })
            .collect::<PyResult<Vec<_>>>()?;
        Ok(PyDataset { inner: Dataset::from_columns(spec, &columns).map_err(err)? })
    }

    #[staticmethod]
    fn from_csv(data: &str, spec: &str) -> PyResult<Self> {
        let spec = load_spec(spec).map_err(err)?;
        Ok(PyDataset { inner: load_csv(data, &spec).map_err(err)? })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn p(&self) -> usize {
        self.inner.p()
    }

    #[getter]
    fn names(&self) -> Vec<String> {
        self.inner.spec().iter().map(|s| s.name.clone()).collect()
    }

    #[getter]
    fn is_centered(&self) -> bool {
        self.inner.centering().is_some()
    }

    fn column(&self, j: usize) -> PyResult<Vec<f64>> {
        if j >= self.inner.p() {
            return Err(PyValueError::new_err("column index out of range"));
        }
        Ok(self.inner.column(j))
    }

    /// Subtracts column means from continuous variables.
    fn center(&self) -> PyResult<Self> {
        Ok(PyDataset { inner: self.inner.center_continuous().map_err(err)? })
    }

    /// Centers, then scales continuous variables to unit variance.
    fn zscore(&self) -> PyResult<Self> {
        let c = match self.inner.centering() {
            Some(_) => self.inner.clone(),
            None => self.inner.center_continuous().map_err(err)?,
        };
        Ok(PyDataset { inner: c.zscore_continuous().map_err(err)? })
    }

    /// Applies the centering a model was trained with.
    fn center_like(&self, model: &PyModel) -> PyResult<Self> {
        let c = model
            .inner
            .centering()
            .ok_or_else(|| PyValueError::new_err("model has no centering"))?;
        Ok(PyDataset { inner: self.inner.center_with(c).map_err(err)? })
    }

    fn __repr__(&self) -> String {
        format!("Dataset(n={}, p={})", self.inner.n(), self.inner.p())
    }
}

/// A fitted mixed graphical or VAR model.
#[pyclass(name = "Model", module = "netpred", frozen)]
struct PyModel {
    inner: NetworkModel,
}

#[pymethods]
impl PyModel {
    /// `"mgm"` or `"var"`.
    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind()
    }

    #[getter]
    fn names(&self) -> Vec<String> {
        self.inner.spec().iter().map(|s| s.name.clone()).collect()
    }

    /// Weighted adjacency of an MGM, or absolute lag-1 coefficients of a VAR
    /// (row = outcome, column = predictor).
    #[getter]
    fn weights(&self) -> Vec<Vec<f64>> {
        match &self.inner {
            NetworkModel::Mgm(m) => m.wadj.clone(),
            NetworkModel::Var(m) => m.weights(0),
        }
    }

    #[getter]
    fn signs(&self) -> Vec<Vec<i8>> {
        match &self.inner {
            NetworkModel::Mgm(m) => m.signs.clone(),
            NetworkModel::Var(m) => m.signs[0].clone(),
        }
    }

    /// Signed VAR coefficients per lag; `None` for an MGM.
    #[getter]
    fn coefficients(&self) -> Option<Vec<Vec<Vec<f64>>>> {
        match &self.inner {
            NetworkModel::Mgm(_) => None,
            NetworkModel::Var(m) => Some(m.coefficients.clone()),
        }
    }

    #[getter]
    fn lambdas(&self) -> Vec<f64> {
        self.inner.node_models().iter().map(|m| m.lambda).collect()
    }

    fn to_json(&self) -> PyResult<String> {
        to_json(&ModelDocument::new(self.inner.clone(), Default::default())).map_err(err)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        write_json(path, &ModelDocument::new(self.inner.clone(), Default::default())).map_err(err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyModel { inner: read_model(path).map_err(err)?.model })
    }

    fn __repr__(&self) -> String {
        format!("Model(kind={:?}, p={})", self.inner.kind(), self.inner.spec().len())
    }
}

/// Nodewise predictability of a model on one dataset.
#[pyclass(name = "Report", module = "netpred", frozen)]
struct PyReport {
    inner: PredictabilityReport,
}

#[pymethods]
impl PyReport {
    /// One dict per node with keys name, kind, r2, cc, ncc, cc_marg.
    #[getter]
    fn nodes<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.inner
            .nodes
            .iter()
            .map(|n| {
                let d = PyDict::new(py);
                d.set_item("name", &n.name)?;
                d.set_item(
                    "kind",
                    match n.kind {
                        VariableKind::Continuous => "continuous",
                        VariableKind::Categorical => "categorical",
                    },
                )?;
                d.set_item("r2", n.r2)?;
                d.set_item("cc", n.cc)?;
                d.set_item("ncc", n.ncc)?;
                d.set_item("cc_marg", n.cc_marg)?;
                Ok(d)
            })
            .collect()
    }

    #[getter]
    fn n_rows(&self) -> usize {
        self.inner.n_rows
    }

    fn to_table(&self) -> String {
        self.inner.to_table()
    }
}

#[pyfunction]
#[pyo3(signature = (data, rule="or", folds=10, n_lambda=50, lambda_min_ratio=1e-3, seed=0, lam=None, binary_sign=false))]
#[allow(clippy::too_many_arguments)]
fn fit_mgm(
    py: Python<'_>,
    data: &PyDataset,
    rule: &str,
    folds: usize,
    n_lambda: usize,
    lambda_min_ratio: f64,
    seed: u64,
    lam: Option<f64>,
    binary_sign: bool,
) -> PyResult<PyModel> {
    let rule: Rule = rule.parse().map_err(|_| PyValueError::new_err("rule must be 'or' or 'and'"))?;
    let config = MgmConfig {
        rule,
        penalty: penalty(folds, n_lambda, lambda_min_ratio, seed, lam),
        binary_sign,
        ..MgmConfig::default()
    };
    let d = &data.inner;
    let m = py.detach(|| mgm::fit_mgm(d, &config)).map_err(err)?;
    Ok(PyModel { inner: m.into() })
}

#[pyfunction]
#[pyo3(signature = (data, lags=vec![1], time_index=None, folds=10, n_lambda=50, lambda_min_ratio=1e-3, seed=0, lam=None, binary_sign=false))]
#[allow(clippy::too_many_arguments)]
fn fit_var(
    py: Python<'_>,
    data: &PyDataset,
    lags: Vec<u32>,
    time_index: Option<Vec<(i64, i64)>>,
    folds: usize,
    n_lambda: usize,
    lambda_min_ratio: f64,
    seed: u64,
    lam: Option<f64>,
    binary_sign: bool,
) -> PyResult<PyModel> {
    let config = VarConfig {
        lags,
        penalty: penalty(folds, n_lambda, lambda_min_ratio, seed, lam),
        binary_sign,
        ..VarConfig::default()
    };
    let time = self::time_index(time_index);
    let d = &data.inner;
    let m = py.detach(|| mvar::fit_mvar(d, time.as_deref(), &config)).map_err(err)?;
    Ok(PyModel { inner: m.into() })
}

#[pyfunction]
#[pyo3(signature = (model, data, time_index=None, within_sample=true))]
fn evaluate(
    model: &PyModel,
    data: &PyDataset,
    time_index: Option<Vec<(i64, i64)>>,
    within_sample: bool,
) -> PyResult<PyReport> {
    let kind = if within_sample { SampleKind::WithinSample } else { SampleKind::OutOfSample };
    let time = self::time_index(time_index);
    let r = predictability::evaluate(&model.inner, &data.inner, time.as_deref(), kind).map_err(err)?;
    Ok(PyReport { inner: r })
}

#[pyfunction]
fn r_squared(predicted: Vec<f64>, observed: Vec<f64>) -> PyResult<f64> {
    predictability::r_squared(&predicted, &observed).map_err(err)
}

#[pyfunction]
fn accuracy(predicted: Vec<u32>, observed: Vec<u32>) -> PyResult<f64> {
    predictability::accuracy(&predicted, &observed).map_err(err)
}

#[pyfunction]
fn marginal_accuracy(marginals: Vec<f64>) -> f64 {
    predictability::marginal_accuracy(&marginals)
}

#[pyfunction]
fn normalized_accuracy(accuracy: f64, marginals: Vec<f64>) -> PyResult<f64> {
    predictability::normalized_accuracy(accuracy, &marginals).map_err(err)
}

#[pyfunction]
fn sample_ggm(precision: Vec<Vec<f64>>, n: usize, seed: u64) -> PyResult<PyDataset> {
    Ok(PyDataset { inner: sampler::sample_ggm(&matrix(&precision)?, n, seed).map_err(err)? })
}

#[pyfunction]
#[pyo3(signature = (weights, thresholds, n, seed, burn_in=sampler::DEFAULT_BURN_IN, thin=sampler::DEFAULT_THIN))]
fn sample_ising(
    weights: Vec<Vec<f64>>,
    thresholds: Vec<f64>,
    n: usize,
    seed: u64,
    burn_in: usize,
    thin: usize,
) -> PyResult<PyDataset> {
    let d = sampler::sample_ising_gibbs(&matrix(&weights)?, &thresholds, n, burn_in, thin, seed).map_err(err)?;
    Ok(PyDataset { inner: d })
}

#[pyfunction]
fn simulate_var(coefficients: Vec<Vec<f64>>, noise_sds: Vec<f64>, n: usize, seed: u64) -> PyResult<PyDataset> {
    let d = sampler::simulate_var(&matrix(&coefficients)?, &noise_sds, n, seed).map_err(err)?;
    Ok(PyDataset { inner: d })
}

#[pyfunction]
fn chain_precision(p: usize, partial: f64) -> Vec<Vec<f64>> {
    let m = sampler::chain_precision(p, partial);
    (0..p).map(|i| m.row(i).iter().copied().collect()).collect()
}

#[pyfunction]
fn population_r2(precision: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    sampler::population_r2(&matrix(&precision)?).map_err(err)
}

fn graph(model: &PyModel, report: Option<&PyReport>, seed: u64) -> PyResult<RenderedGraph> {
    let layout = LayoutOptions { seed, ..LayoutOptions::default() };
    RenderedGraph::from_model(&model.inner, report.map(|r| &r.inner), &RingPalette::default(), &layout)
        .map_err(err)
}

/// SVG drawing with predictability rings when a report is given.
#[pyfunction]
#[pyo3(signature = (model, report=None, seed=0))]
fn render(model: &PyModel, report: Option<&PyReport>, seed: u64) -> PyResult<String> {
    Ok(render_svg(&graph(model, report, seed)?, &SvgOptions::default()))
}

#[pyfunction]
#[pyo3(signature = (model, report=None, seed=0))]
fn render_dot(model: &PyModel, report: Option<&PyReport>, seed: u64) -> PyResult<String> {
    Ok(export_dot(&graph(model, report, seed)?))
}

#[pymodule]
#[pyo3(name = "netpred")]
fn netpred_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("NetpredError", m.py().get_type::<NetpredError>())?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyReport>()?;
    m.add_function(wrap_pyfunction!(fit_mgm, m)?)?;
    m.add_function(wrap_pyfunction!(fit_var, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(r_squared, m)?)?;
    m.add_function(wrap_pyfunction!(accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(marginal_accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(normalized_accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(sample_ggm, m)?)?;
    m.add_function(wrap_pyfunction!(sample_ising, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_var, m)?)?;
    m.add_function(wrap_pyfunction!(chain_precision, m)?)?;
    m.add_function(wrap_pyfunction!(population_r2, m)?)?;
    m.add_function(wrap_pyfunction!(render, m)?)?;
    m.add_function(wrap_pyfunction!(render_dot, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
