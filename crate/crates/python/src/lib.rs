//! Python bindings: `import wsi`.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use wsi_core::clustering::{
    AffinityConfig, AgglomerativeConfig, ClusteringConfig, Linkage, Metric, Preference,
};
use wsi_core::{self as core, Error};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

#[pyclass(name = "EmbeddingModel", frozen)]
struct PyEmbeddingModel(core::EmbeddingModel);

#[pymethods]
impl PyEmbeddingModel {
    /// Loads word2vec text or binary vectors; the format is guessed from the
    /// extension when not given.
    #[staticmethod]
    #[pyo3(signature = (path, format=None))]
    fn load(path: PathBuf, format: Option<&str>) -> PyResult<Self> {
        let format = match format {
            Some(f) => f.parse().map_err(to_py)?,
            None => core::EmbeddingFormat::from_extension(&path),
        };
        Ok(Self(core::load_embeddings(&path, format).map_err(to_py)?))
    }

    #[staticmethod]
    fn from_dict(dim: usize, vectors: BTreeMap<String, Vec<f32>>) -> PyResult<Self> {
        Ok(Self(
            core::EmbeddingModel::from_entries(dim, vectors).map_err(to_py)?,
        ))
    }

    #[pyo3(signature = (path, format="binary"))]
    fn save(&self, path: PathBuf, format: &str) -> PyResult<()> {
        self.0
            .save(&path, format.parse().map_err(to_py)?)
            .map_err(to_py)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn lookup(&self, word: &str) -> Option<Vec<f32>> {
        self.0.lookup(word).map(<[f32]>::to_vec)
    }

    fn words(&self) -> Vec<String> {
        self.0.words().into_iter().map(String::from).collect()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __contains__(&self, word: &str) -> bool {
        self.0.contains(word)
    }
}

#[pyclass(name = "Dataset", frozen)]
struct PyDataset(core::Dataset);

#[pymethods]
impl PyDataset {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self(core::parse_dataset(&path).map_err(to_py)?))
    }

    fn targets(&self) -> Vec<String> {
        self.0.by_target().keys().cloned().collect()
    }

    fn context_ids(&self) -> Vec<String> {
        self.0
            .instances()
            .iter()
            .map(|i| i.context_id.clone())
            .collect()
    }

    /// `{context_id: sense}` for every instance with a gold label.
    fn gold(&self) -> BTreeMap<String, String> {
        self.0.gold_labeling()
    }

    fn tokens(&self, context_id: &str) -> PyResult<Vec<String>> {
        self.0
            .instances()
            .iter()
            .find(|i| i.context_id == context_id)
            .map(|i| i.tokens.clone())
            .ok_or_else(|| PyValueError::new_err(format!("unknown context id {context_id:?}")))
    }

    fn warnings(&self) -> Vec<String> {
        self.0.warnings().to_vec()
    }

    fn write_predictions(&self, labels: BTreeMap<String, String>, path: PathBuf) -> PyResult<()> {
        core::write_predictions(&self.0, &labels, &path).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

#[pyclass(name = "IdfTable", frozen)]
struct PyIdfTable(core::IdfTable);

#[pymethods]
impl PyIdfTable {
    /// Document frequencies over already tokenized documents.
    #[staticmethod]
    fn build(docs: Vec<Vec<String>>) -> PyResult<Self> {
        Ok(Self(core::build_idf(docs).map_err(to_py)?))
    }

    #[staticmethod]
    fn from_dataset(dataset: &PyDataset) -> PyResult<Self> {
        let docs = dataset.0.instances().iter().map(|i| i.tokens.iter());
        Ok(Self(core::build_idf(docs).map_err(to_py)?))
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self(core::IdfTable::load(&path).map_err(to_py)?))
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.0.save(&path).map_err(to_py)
    }

    fn idf(&self, word: &str) -> f64 {
        self.0.idf(word)
    }

    #[getter]
    fn n_docs(&self) -> u64 {
        self.0.n_docs()
    }
}

#[pyclass(name = "Chi2Table", frozen)]
struct PyChi2Table(core::Chi2Table);

#[pymethods]
impl PyChi2Table {
    #[staticmethod]
    fn build(dataset: &PyDataset) -> Self {
        Self(core::build_chi2(&dataset.0))
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self(core::Chi2Table::load(&path).map_err(to_py)?))
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.0.save(&path).map_err(to_py)
    }

    fn get(&self, target: &str, word: &str) -> f64 {
        self.0.get(target, word)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

#[allow(clippy::too_many_arguments)]
fn clustering_config(
    algo: &str,
    k: usize,
    linkage: &str,
    metric: &str,
    damping: f64,
    preference: Option<f64>,
    max_iter: usize,
    window: usize,
) -> PyResult<ClusteringConfig> {
    let cfg = match algo {
        "agglomerative" => ClusteringConfig::Agglomerative(AgglomerativeConfig {
            n_clusters: k,
            linkage: linkage.parse::<Linkage>().map_err(to_py)?,
            metric: metric.parse::<Metric>().map_err(to_py)?,
        }),
        "affinity_propagation" | "affinity-propagation" | "ap" => {
            ClusteringConfig::AffinityPropagation(AffinityConfig {
                damping,
                preference: preference.map_or(Preference::Median, Preference::Value),
                max_iter,
                convergence_window: window,
            })
        }
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown algorithm {other:?}"
            )))
        }
    };
    cfg.validate().map_err(to_py)?;
    Ok(cfg)
}

/// Clusters a list of equal-length points. Returns a dict with `labels`,
/// `k`, `converged`, `exemplars` and `jittered`.
#[pyfunction]
#[pyo3(signature = (points, algo="agglomerative", k=2, linkage="ward", metric="euclidean",
    damping=0.5, preference=None, max_iter=200, window=15))]
#[allow(clippy::too_many_arguments)]
fn cluster<'py>(
    py: Python<'py>,
    points: Vec<Vec<f64>>,
    algo: &str,
    k: usize,
    linkage: &str,
    metric: &str,
    damping: f64,
    preference: Option<f64>,
    max_iter: usize,
    window: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = clustering_config(
        algo, k, linkage, metric, damping, preference, max_iter, window,
    )?;
    let res = py
        .detach(|| core::clustering::cluster(&points, &cfg))
        .map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("labels", res.labels)?;
    out.set_item("k", res.k)?;
    out.set_item("converged", res.converged)?;
    out.set_item("exemplars", res.exemplars)?;
    out.set_item("jittered", res.jittered)?;
    Ok(out)
}

/// Weights, vectorizes and clusters every target word of the dataset.
/// Returns `{context_id: label}`.
#[pyfunction]
#[pyo3(signature = (dataset, model, idf, chi2, p_tfidf=1.5, p_chi2=0.5, algo="agglomerative",
    k=2, linkage="ward", metric="euclidean", damping=0.5, preference=None, max_iter=200, window=15))]
#[allow(clippy::too_many_arguments)]
fn induce_senses(
    py: Python<'_>,
    dataset: &PyDataset,
    model: &PyEmbeddingModel,
    idf: &PyIdfTable,
    chi2: &PyChi2Table,
    p_tfidf: f64,
    p_chi2: f64,
    algo: &str,
    k: usize,
    linkage: &str,
    metric: &str,
    damping: f64,
    preference: Option<f64>,
    max_iter: usize,
    window: usize,
) -> PyResult<BTreeMap<String, String>> {
    let weighting = core::WeightingConfig::new(p_tfidf, p_chi2).map_err(to_py)?;
    let clustering = clustering_config(
        algo, k, linkage, metric, damping, preference, max_iter, window,
    )?;
    py.detach(|| {
        core::induce_senses(
            &dataset.0,
            &model.0,
            &idf.0,
            &chi2.0,
            &weighting,
            &clustering,
        )
    })
    .map_err(to_py)
}

#[pyfunction]
fn ari(gold: Vec<String>, pred: Vec<String>) -> PyResult<f64> {
    core::ari(&gold, &pred).map_err(to_py)
}

/// Per-word and aggregate ARI of `labels` against the dataset's gold senses.
#[pyfunction]
fn evaluate<'py>(
    py: Python<'py>,
    dataset: &PyDataset,
    labels: BTreeMap<String, String>,
) -> PyResult<Bound<'py, PyDict>> {
    let report = core::evaluate(&dataset.0, &labels).map_err(to_py)?;
    let per_word = PyDict::new(py);
    for (word, score) in &report.per_word {
        per_word.set_item(word, (score.n_contexts, score.ari))?;
    }
    let out = PyDict::new(py);
    out.set_item("per_word", per_word)?;
    out.set_item("aggregate_weighted", report.aggregate_weighted)?;
    out.set_item("aggregate_macro", report.aggregate_macro)?;
    Ok(out)
}

/// Scores every configuration of the search space (TOML text, or the
/// default space) and returns the ranking as a list of dicts, best first.
#[pyfunction]
#[pyo3(signature = (dataset, model, idf, chi2, space=None))]
fn grid_search<'py>(
    py: Python<'py>,
    dataset: &PyDataset,
    model: &PyEmbeddingModel,
    idf: &PyIdfTable,
    chi2: &PyChi2Table,
    space: Option<&str>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let space = match space {
        Some(text) => core::SearchSpace::from_toml_str(text).map_err(to_py)?,
        None => core::SearchSpace::default(),
    };
    let result = py
        .detach(|| core::grid_search(&dataset.0, &model.0, &idf.0, &chi2.0, &space))
        .map_err(to_py)?;
    result
        .ranked
        .iter()
        .map(|e| {
            let row = PyDict::new(py);
            row.set_item("ari_weighted", e.train_ari)?;
            row.set_item("ari_macro", e.train_ari_macro)?;
            row.set_item("p_tfidf", e.weighting.p_tfidf)?;
            row.set_item("p_chi2", e.weighting.p_chi2)?;
            row.set_item("clustering", e.clustering.to_string())?;
            Ok(row)
        })
        .collect()
}

#[pyfunction]
fn chi2_statistic(a: u64, b: u64, c: u64, d: u64) -> f64 {
    core::weighting::chi2_statistic(a, b, c, d)
}

#[pyfunction]
fn tokenize(text: &str) -> Vec<String> {
    core::tokenize(text)
}

#[pyfunction]
fn porter_stem(word: &str) -> String {
    core::porter_stem(word)
}

/// Labels each context by its (stemmed) majority translation.
/// `translations` maps context ids to the translations of the target.
#[pyfunction]
#[pyo3(signature = (translations, stemmer="porter"))]
fn label_by_translation(
    translations: BTreeMap<String, Vec<String>>,
    stemmer: &str,
) -> PyResult<BTreeMap<String, String>> {
    let stemmer: core::Stemmer = stemmer.parse().map_err(to_py)?;
    let records: Vec<core::TranslationRecord> = translations
        .into_iter()
        .map(|(context_id, translations)| core::TranslationRecord {
            context_id,
            translations,
        })
        .collect();
    core::label_by_translation(&records, stemmer).map_err(to_py)
}

#[pymodule]
fn wsi(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEmbeddingModel>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyIdfTable>()?;
    m.add_class::<PyChi2Table>()?;
    m.add_function(wrap_pyfunction!(cluster, m)?)?;
    m.add_function(wrap_pyfunction!(induce_senses, m)?)?;
    m.add_function(wrap_pyfunction!(ari, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(grid_search, m)?)?;
    m.add_function(wrap_pyfunction!(chi2_statistic, m)?)?;
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(porter_stem, m)?)?;
    m.add_function(wrap_pyfunction!(label_by_translation, m)?)?;
    Ok(())
}
