//! Python bindings: `import hinweight`.
//!
//! Matrices cross the boundary as nested lists, weight vectors as lists of
//! floats. Heavy calls release the GIL.

use ndarray::Array2;
use pyo3::exceptions::{PyArithmeticError, PyOSError, PyValueError};
use pyo3::prelude::*;

use hinweight::experiment::{self, ExperimentConfig};
use hinweight::synthetic::{planted, PlantedConfig};
use hinweight::{CsrMatrix, ErrorClass, GlobalWeights, LocalWeighting, TrainConfig};

fn to_py(e: hinweight::Error) -> PyErr {
    match (&e, e.class()) {
        (hinweight::Error::Io { .. }, _) => PyOSError::new_err(e.to_string()),
        (_, ErrorClass::Numeric) => PyArithmeticError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn weights(w: Vec<f64>) -> PyResult<GlobalWeights> {
    GlobalWeights::from_vec(w).map_err(to_py)
}

/// Items × users interaction weights.
#[pyclass(name = "BipartiteNetwork", frozen)]
struct PyNetwork(hinweight::BipartiteNetwork);

#[pymethods]
impl PyNetwork {
    /// `entries` is a list of `(item, user, weight)` with positive weights.
    #[new]
    fn new(n_items: usize, n_users: usize, entries: Vec<(usize, usize, f64)>) -> PyResult<Self> {
        let m = CsrMatrix::from_triplets(n_items, n_users, entries).map_err(to_py)?;
        Ok(PyNetwork(hinweight::BipartiteNetwork::new(m).map_err(to_py)?))
    }

    #[getter]
    fn n_items(&self) -> usize {
        self.0.n_items()
    }

    #[getter]
    fn n_users(&self) -> usize {
        self.0.n_users()
    }

    /// Items each user interacted with, in item order.
    fn user_items(&self) -> Vec<Vec<usize>> {
        let set = hinweight::InteractionSet::from_network(&self.0);
        (0..set.n_users()).map(|u| set.items(u).to_vec()).collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "BipartiteNetwork(n_items={}, n_users={})",
            self.0.n_items(),
            self.0.n_users()
        )
    }
}

/// Local term weights of the item profiles, after pruning unused terms.
#[pyclass(name = "ProfileCorpus", frozen)]
struct PyCorpus(hinweight::ProfileCorpus);

#[pymethods]
impl PyCorpus {
    /// `counts` is a list of `(item, term, count)`; `weighting` is "raw" or "log".
    #[new]
    #[pyo3(signature = (n_items, n_terms, counts, vocabulary=None, weighting="raw"))]
    fn new(
        n_items: usize,
        n_terms: usize,
        counts: Vec<(usize, usize, f64)>,
        vocabulary: Option<Vec<String>>,
        weighting: &str,
    ) -> PyResult<Self> {
        let weighting = match weighting {
            "raw" => LocalWeighting::Raw,
            "log" => LocalWeighting::Log,
            other => return Err(PyValueError::new_err(format!("unknown weighting {other:?}"))),
        };
        let m = CsrMatrix::from_triplets(n_items, n_terms, counts).map_err(to_py)?;
        let vocabulary = vocabulary.unwrap_or_else(|| (0..n_terms).map(|k| format!("t{k}")).collect());
        let (corpus, _) = hinweight::load_corpus(&m, vocabulary, weighting).map_err(to_py)?;
        Ok(PyCorpus(corpus))
    }

    #[getter]
    fn n_items(&self) -> usize {
        self.0.n_items()
    }

    /// Terms kept after pruning.
    #[getter]
    fn n_terms(&self) -> usize {
        self.0.n_terms()
    }

    #[getter]
    fn vocabulary(&self) -> Vec<String> {
        self.0.vocabulary().to_vec()
    }

    fn __repr__(&self) -> String {
        format!(
            "ProfileCorpus(n_items={}, n_terms={})",
            self.0.n_items(),
            self.0.n_terms()
        )
    }
}

/// Symmetric item similarity with entries in [0, 1].
#[pyclass(name = "SimilarityMatrix", frozen)]
struct PySimilarity(hinweight::SimilarityMatrix);

#[pymethods]
impl PySimilarity {
    #[new]
    fn new(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(PyValueError::new_err("similarity must be square"));
        }
        let values = ndarray_from_rows(rows);
        Ok(PySimilarity(hinweight::SimilarityMatrix::new(values).map_err(to_py)?))
    }

    #[getter]
    fn n_items(&self) -> usize {
        self.0.n_items()
    }

    fn get(&self, i: usize, j: usize) -> PyResult<f64> {
        let n = self.0.n_items();
        if i >= n || j >= n {
            return Err(PyValueError::new_err(format!(
                "index ({i}, {j}) out of range for {n} items"
            )));
        }
        Ok(self.0.get(i, j))
    }

    fn to_list(&self) -> Vec<Vec<f64>> {
        self.0.view().rows().into_iter().map(|r| r.to_vec()).collect()
    }

    fn __repr__(&self) -> String {
        format!("SimilarityMatrix(n_items={})", self.0.n_items())
    }
}

fn ndarray_from_rows(rows: Vec<Vec<f64>>) -> Array2<f64> {
    let n = rows.len();
    Array2::from_shape_vec((n, n), rows.into_iter().flatten().collect()).expect("rows checked square")
}

/// Outcome of a leave-one-out evaluation.
#[pyclass(name = "EvalReport", frozen)]
struct PyReport(hinweight::EvalReport);

#[pymethods]
impl PyReport {
    /// `[(N, HR, ARHR), ...]` averaged over repeats.
    #[getter]
    fn mean(&self) -> Vec<(usize, f64, f64)> {
        self.0.mean.iter().map(|m| (m.n, m.hr, m.arhr)).collect()
    }

    fn hit_rate(&self, n: usize) -> Option<f64> {
        self.0.mean_at(n).map(|m| m.hr)
    }

    fn arhr(&self, n: usize) -> Option<f64> {
        self.0.mean_at(n).map(|m| m.arhr)
    }

    fn to_json(&self) -> PyResult<String> {
        self.0.to_json().map_err(to_py)
    }

    fn to_csv(&self) -> String {
        self.0.to_csv()
    }
}

/// Aggregated meta-path similarity over paths of length 1..=depth.
#[pyfunction]
#[pyo3(signature = (network, depth=1))]
fn pathsim(py: Python<'_>, network: &PyNetwork, depth: usize) -> PyResult<PySimilarity> {
    let meta = hinweight::MetaPathConfig::new(depth).map_err(to_py)?;
    Ok(PySimilarity(
        py.detach(|| hinweight::aggregate_pathsim(&network.0, &meta)),
    ))
}

/// Weighted-cosine similarity of the item profiles.
#[pyfunction]
fn profile_similarity(py: Python<'_>, corpus: &PyCorpus, w: Vec<f64>) -> PyResult<PySimilarity> {
    let w = weights(w)?;
    py.detach(|| hinweight::profile_similarity(&corpus.0, &w))
        .map(PySimilarity)
        .map_err(to_py)
}

#[pyfunction]
fn idf_init(corpus: &PyCorpus) -> Vec<f64> {
    hinweight::idf_init(&corpus.0).into_inner().to_vec()
}

#[pyfunction]
fn random_init(n_terms: usize, seed: u64) -> Vec<f64> {
    hinweight::random_init(n_terms, seed).into_inner().to_vec()
}

#[pyfunction]
#[pyo3(signature = (corpus, w, target, lam=0.01))]
fn objective(corpus: &PyCorpus, w: Vec<f64>, target: &PySimilarity, lam: f64) -> PyResult<f64> {
    hinweight::objective(&corpus.0, &weights(w)?, &target.0, lam).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (corpus, w, target, lam=0.01))]
fn gradient(corpus: &PyCorpus, w: Vec<f64>, target: &PySimilarity, lam: f64) -> PyResult<Vec<f64>> {
    Ok(hinweight::gradient(&corpus.0, &weights(w)?, &target.0, lam)
        .map_err(to_py)?
        .to_vec())
}

/// Projected gradient descent from `w0`. Returns `(weights, trace, stop)` where
/// `trace` is a list of `(iter, J, fit, penalty, grad_inf, step)`.
#[pyfunction]
#[pyo3(signature = (corpus, target, w0, lam=0.01, step_size=0.1, max_iters=200, rel_tol=1e-6, backtracking=true))]
#[allow(clippy::too_many_arguments, clippy::type_complexity)]
fn train(
    py: Python<'_>,
    corpus: &PyCorpus,
    target: &PySimilarity,
    w0: Vec<f64>,
    lam: f64,
    step_size: f64,
    max_iters: usize,
    rel_tol: f64,
    backtracking: bool,
) -> PyResult<(Vec<f64>, Vec<(usize, f64, f64, f64, f64, f64)>, Option<String>)> {
    let cfg = TrainConfig {
        lambda: lam,
        step_size,
        max_iters,
        rel_tol,
        backtracking,
        ..TrainConfig::default()
    };
    let w0 = weights(w0)?;
    let (w, trace) = py
        .detach(|| hinweight::train(&corpus.0, &target.0, w0, &cfg))
        .map_err(to_py)?;
    let records = trace
        .records
        .iter()
        .map(|r| (r.iter, r.objective, r.fit, r.penalty, r.grad_inf, r.step))
        .collect();
    Ok((w.into_inner().to_vec(), records, trace.stop.map(|s| format!("{s:?}"))))
}

/// Top-`n` unseen items for a user with this history, as `(item, score)` pairs.
#[pyfunction]
#[pyo3(signature = (similarity, history, n=10, k=None))]
fn recommend(
    similarity: &PySimilarity,
    history: Vec<usize>,
    n: usize,
    k: Option<usize>,
) -> PyResult<Vec<(usize, f64)>> {
    let n_items = similarity.0.n_items();
    if let Some(&bad) = history.iter().find(|&&i| i >= n_items) {
        return Err(PyValueError::new_err(format!(
            "item {bad} out of range for {n_items} items"
        )));
    }
    let list = hinweight::recommend_topn(&similarity.0, &history, n, k);
    Ok(list.items.into_iter().zip(list.scores).collect())
}

/// Leave-one-out HR/ARHR of a fixed similarity on a network.
#[pyfunction]
#[pyo3(signature = (similarity, network, cutoffs=vec![5, 10, 15, 20], repeats=5, seed=0, k=None))]
fn evaluate(
    py: Python<'_>,
    similarity: &PySimilarity,
    network: &PyNetwork,
    cutoffs: Vec<usize>,
    repeats: usize,
    seed: u64,
    k: Option<usize>,
) -> PyResult<PyReport> {
    let interactions = hinweight::InteractionSet::from_network(&network.0);
    py.detach(|| hinweight::evaluate(&similarity.0, &interactions, &cutoffs, repeats, seed, k))
        .map(PyReport)
        .map_err(to_py)
}

/// Full experiment from a JSON config (same schema as the command-line tool);
/// nothing is written to disk.
#[pyfunction]
fn run_experiment(py: Python<'_>, config_json: &str) -> PyResult<PyReport> {
    let cfg: ExperimentConfig =
        serde_json::from_str(config_json).map_err(|e| PyValueError::new_err(format!("config: {e}")))?;
    cfg.validate().map_err(to_py)?;
    py.detach(|| {
        let data = experiment::ingest(&cfg)?;
        experiment::run_experiment(&data, &cfg)
    })
    .map(|o| PyReport(o.report))
    .map_err(to_py)
}

/// Planted-cluster dataset: `(network, corpus, item_cluster)`. `scale` is
/// "small" (40 items) or "large" (200 items).
#[pyfunction]
#[pyo3(signature = (seed=0, scale="small"))]
fn synthetic(seed: u64, scale: &str) -> PyResult<(PyNetwork, PyCorpus, Vec<usize>)> {
    let cfg = match scale {
        "small" => PlantedConfig {
            seed,
            ..PlantedConfig::default()
        },
        "large" => PlantedConfig::four_clusters(seed),
        other => return Err(PyValueError::new_err(format!("unknown scale {other:?}"))),
    };
    let data = planted(&cfg).map_err(to_py)?;
    let corpus = data.corpus().map_err(to_py)?;
    Ok((PyNetwork(data.network), PyCorpus(corpus), data.item_cluster))
}

#[pymodule(name = "hinweight")]
fn hinweight_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyNetwork>()?;
    m.add_class::<PyCorpus>()?;
    m.add_class::<PySimilarity>()?;
    m.add_class::<PyReport>()?;
    m.add_function(wrap_pyfunction!(pathsim, m)?)?;
    m.add_function(wrap_pyfunction!(profile_similarity, m)?)?;
    m.add_function(wrap_pyfunction!(idf_init, m)?)?;
    m.add_function(wrap_pyfunction!(random_init, m)?)?;
    m.add_function(wrap_pyfunction!(objective, m)?)?;
    m.add_function(wrap_pyfunction!(gradient, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(recommend, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(synthetic, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
