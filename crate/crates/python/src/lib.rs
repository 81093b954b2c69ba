//! Python bindings for `unfoldcp`.

use std::collections::HashMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use unfoldcp::config::{load_source, run_preset, DatasetSource, ExperimentConfig, Preset};
use unfoldcp::conformal::{self, ScoreKind, ScoreSpec};
use unfoldcp::evaluation::{self, Method, Regime, RegimeSpec};
use unfoldcp::gnn::Architecture;
use unfoldcp::{Error, NodeTimePair, RepresentationKind};

fn err(e: Error) -> PyErr {
    match e {
        Error::Config { .. } | Error::Parse { .. } | Error::NotASimplex { .. } | Error::LabelOutOfRange { .. } => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(err)
}

fn representation(s: &str) -> PyResult<RepresentationKind> {
    match s {
        "unfolded" | "unfolding" => Ok(RepresentationKind::Unfolded),
        "block_diagonal" | "block" => Ok(RepresentationKind::BlockDiagonal),
        _ => Err(PyValueError::new_err(format!("unknown representation '{s}'"))),
    }
}

fn architecture(s: &str) -> PyResult<Architecture> {
    match s {
        "gcn" => Ok(Architecture::Gcn),
        "gat" => Ok(Architecture::Gat),
        _ => Err(PyValueError::new_err(format!("unknown architecture '{s}'"))),
    }
}

fn score_spec(kind: &str, randomized: bool) -> PyResult<ScoreSpec> {
    let spec = match kind {
        "aps" => ScoreSpec::aps(),
        "raps" => ScoreSpec::raps(0.01, 1),
        "saps" => ScoreSpec::saps(0.1),
        _ => return Err(PyValueError::new_err(format!("unknown score '{kind}'"))),
    };
    Ok(if randomized { spec } else { spec.deterministic() })
}

/// A labeled dynamic graph.
#[pyclass(name = "Dataset", frozen)]
struct PyDataset {
    inner: evaluation::Dataset,
}

#[pymethods]
impl PyDataset {
    /// Samples `sbm-paper`, `sbm-iid` or `two-block`.
    #[staticmethod]
    #[pyo3(signature = (preset, seed=0, num_times=None))]
    fn generate(preset: &str, seed: u64, num_times: Option<usize>) -> PyResult<Self> {
        let mut source = DatasetSource::preset(parse::<Preset>(preset)?, seed);
        source.num_times = num_times;
        Ok(Self {
            inner: load_source(&source).map_err(err)?,
        })
    }

    /// Loads the dataset described by a manifest file.
    #[staticmethod]
    fn load(manifest: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: load_source(&DatasetSource::manifest(manifest)).map_err(err)?,
        })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.graph.n()
    }

    #[getter]
    fn num_times(&self) -> usize {
        self.inner.graph.num_times()
    }

    #[getter]
    fn num_classes(&self) -> usize {
        self.inner.labels.d()
    }

    #[getter]
    fn num_edges(&self) -> usize {
        self.inner.graph.total_nnz()
    }

    /// Number of labeled pairs eligible for experiments.
    #[getter]
    fn num_pairs(&self) -> usize {
        self.inner.eligible.len()
    }

    /// Snapshot `t` as `(row, col, weight)` triplets.
    fn snapshot(&self, t: usize) -> PyResult<Vec<(usize, usize, f64)>> {
        if t >= self.inner.graph.num_times() {
            return Err(PyValueError::new_err(format!("time {t} out of range")));
        }
        Ok(self.inner.graph.snapshot(t).triplets().collect())
    }

    fn label(&self, node: usize, time: usize) -> Option<usize> {
        self.inner.labels.get(NodeTimePair::new(node, time))
    }

    /// `(rows, nnz, symmetric)` of the unfolded or block-diagonal matrix.
    #[pyo3(signature = (kind="unfolded"))]
    fn representation(&self, kind: &str) -> PyResult<(usize, usize, bool)> {
        let rep = self.inner.representation(representation(kind)?).map_err(err)?;
        Ok((rep.len(), rep.matrix.nnz(), rep.matrix.is_symmetric()))
    }

    /// Runs one experiment and returns `{metric: (mean, sd)}` plus counts.
    #[pyo3(signature = (
        representation_kind="unfolded", arch="gcn", regime="transductive",
        n_fits=10, n_permutations=100, alpha=0.1, seed=0, score="aps", randomized=true, jobs=None,
    ))]
    #[allow(clippy::too_many_arguments)]
    fn run(
        &self,
        py: Python<'_>,
        representation_kind: &str,
        arch: &str,
        regime: &str,
        n_fits: usize,
        n_permutations: usize,
        alpha: f64,
        seed: u64,
        score: &str,
        randomized: bool,
        jobs: Option<usize>,
    ) -> PyResult<HashMap<String, (f64, f64)>> {
        let method = Method::new(representation(representation_kind)?, architecture(arch)?);
        let spec = RegimeSpec {
            n_fits,
            n_permutations,
            n_splits_semi_inductive: n_fits,
            alpha,
            seed,
            ..RegimeSpec::new(parse::<Regime>(regime)?)
        };
        let score = score_spec(score, randomized)?;
        let result = py
            .detach(|| evaluation::run_experiment(&self.inner, &method, &spec, &score, jobs))
            .map_err(err)?;
        let mut out: HashMap<String, (f64, f64)> = result
            .report
            .rows()
            .into_iter()
            .map(|(k, s)| (k.to_string(), (s.mean, s.sd)))
            .collect();
        out.insert("instances".into(), (result.report.instances as f64, 0.0));
        out.insert("skipped".into(), (result.report.skipped as f64, 0.0));
        Ok(out)
    }
}

/// Non-conformity score of every label for one probability vector.
#[pyfunction]
#[pyo3(signature = (probs, kind="aps", u=None, lam=0.01, k_reg=1))]
fn label_scores(probs: Vec<f64>, kind: &str, u: Option<Vec<f64>>, lam: f64, k_reg: usize) -> PyResult<Vec<f64>> {
    let mut spec = score_spec(kind, u.is_some())?;
    spec.raps_lambda = lam;
    spec.raps_k_reg = k_reg;
    spec.saps_lambda = lam;
    let fallback = if spec.kind == ScoreKind::Saps { 1.0 } else { 0.0 };
    if let Some(u) = &u {
        if u.len() != probs.len() {
            return Err(PyValueError::new_err("u must have one entry per label"));
        }
    }
    conformal::label_scores(&probs, &spec, |y| u.as_ref().map_or(fallback, |u| u[y])).map_err(err)
}

/// Conformal threshold `q̂` from calibration scores.
#[pyfunction]
fn calibrate(scores: Vec<f64>, alpha: f64) -> PyResult<f64> {
    let m = scores.len() + 1;
    Ok(conformal::calibrate(&scores, alpha, m).map_err(err)?.q_hat)
}

/// Labels whose score stays strictly below `q_hat`.
#[pyfunction]
fn prediction_set(scores: Vec<f64>, q_hat: f64) -> Vec<usize> {
    conformal::set_from_scores(NodeTimePair::new(0, 0), scores, q_hat).labels
}

/// Full conformal set with the split algorithm: `calibration` scores plus
/// the test point's score for each candidate label.
#[pyfunction]
fn full_conformal_split(calibration: Vec<f64>, test_scores: Vec<f64>, alpha: f64) -> PyResult<Vec<usize>> {
    let d = test_scores.len();
    let pos = calibration.len();
    let algorithm = conformal::split_algorithm(&calibration, &test_scores, pos);
    conformal::full_conformal(d, pos, alpha, algorithm).map_err(err)
}

/// Energy-distance permutation test between two row samples.
#[pyfunction]
#[pyo3(signature = (x, y, permutations=999, seed=0))]
fn energy_test(x: Vec<Vec<f64>>, y: Vec<Vec<f64>>, permutations: usize, seed: u64) -> PyResult<(f64, f64)> {
    let to_array = |rows: Vec<Vec<f64>>| -> PyResult<ndarray::Array2<f64>> {
        let c = rows.first().map_or(0, Vec::len);
        let r = rows.len();
        ndarray::Array2::from_shape_vec((r, c), rows.into_iter().flatten().collect())
            .map_err(|e| PyValueError::new_err(e.to_string()))
    };
    let (x, y) = (to_array(x)?, to_array(y)?);
    let t = unfoldcp::stats::energy_test(x.view(), y.view(), permutations, seed).map_err(err)?;
    Ok((t.statistic, t.p_value))
}

/// Canonical TOML of a config file or named preset.
#[pyfunction]
fn load_config(name: &str) -> PyResult<String> {
    let path = std::path::Path::new(name);
    let config = if path.exists() {
        ExperimentConfig::from_file(path).map_err(err)?
    } else {
        run_preset(name).ok_or_else(|| PyValueError::new_err(format!("unknown preset '{name}'")))?
    };
    Ok(config.to_toml())
}

#[pymodule]
fn pyunfoldcp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_function(wrap_pyfunction!(label_scores, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate, m)?)?;
    m.add_function(wrap_pyfunction!(prediction_set, m)?)?;
    m.add_function(wrap_pyfunction!(full_conformal_split, m)?)?;
    m.add_function(wrap_pyfunction!(energy_test, m)?)?;
    m.add_function(wrap_pyfunction!(load_config, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
