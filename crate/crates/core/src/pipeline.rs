//! Vectorize, then cluster every target word's contexts on their own.

use rayon::prelude::*;

use crate::clustering::{cluster, ClusteringConfig};
use crate::dataset::{Dataset, Labeling};
use crate::embeddings::EmbeddingModel;
use crate::error::Result;
use crate::vectorizer::{vectorize_all, ContextVector};
use crate::weighting::{Chi2Table, IdfTable, WeightingConfig};

/// Clusters the given context vectors word by word. `vectors` must be in
/// dataset order. Labels are the per-word cluster numbers as strings.
pub fn cluster_vectors(
    dataset: &Dataset,
    vectors: &[ContextVector],
    cfg: &ClusteringConfig,
) -> Result<Labeling> {
    cfg.validate()?;
    let per_word: Vec<Result<Vec<(String, String)>>> = dataset
        .by_target()
        .par_iter()
        .map(|(_, indices)| {
            let points: Vec<&[f64]> = indices.iter().map(|&i| vectors[i].v.as_slice()).collect();
            let result = cluster(&points, cfg)?;
            Ok(indices
                .iter()
                .zip(result.labels)
                .map(|(&i, l)| (dataset.instances()[i].context_id.clone(), l.to_string()))
                .collect())
        })
        .collect();
    let mut labels = Labeling::new();
    for word in per_word {
        labels.extend(word?);
    }
    Ok(labels)
}

/// Full induction run: weighting, vectorization and per-word clustering.
pub fn induce_senses(
    dataset: &Dataset,
    model: &EmbeddingModel,
    idf: &IdfTable,
    chi2: &Chi2Table,
    weighting: &WeightingConfig,
    clustering: &ClusteringConfig,
) -> Result<Labeling> {
    weighting.validate()?;
    clustering.validate()?;
    let vectors = vectorize_all(dataset, model, idf, chi2, weighting);
    cluster_vectors(dataset, &vectors, clustering)
}
