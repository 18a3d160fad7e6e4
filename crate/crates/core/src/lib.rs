//! Word sense induction by clustering contexts of ambiguous words.
//!
//! Each context is turned into a weighted average of (unnormalized) word
//! embeddings, where the weight of a context word is a product of its tf-idf
//! and chi-square scores raised to tunable powers. Contexts of every target
//! word are then clustered with agglomerative clustering or affinity
//! propagation and scored against gold senses with the Adjusted Rand Index.
//! A translation-based labeler is included as a baseline.

pub mod clustering;
pub mod dataset;
pub mod embeddings;
pub mod error;
pub mod evaluation;
pub mod mt;
pub mod pipeline;
pub mod search;
pub mod text;
pub mod vectorizer;
pub mod weighting;

pub use clustering::{
    affinity_propagation, agglomerative, AffinityConfig, AgglomerativeConfig, ClusterResult,
    ClusteringConfig, Linkage, Merge, Metric, Preference,
};
pub use dataset::{parse_dataset, write_predictions, ContextInstance, Dataset, Labeling};
pub use embeddings::{load_embeddings, EmbeddingFormat, EmbeddingModel, FrequencyTable};
pub use error::{Error, Result};
pub use evaluation::{ari, confusion_matrix, evaluate, ConfusionMatrix, EvalReport};
pub use mt::{label_by_translation, porter_stem, Stemmer, TranslationRecord};
pub use pipeline::{cluster_vectors, induce_senses};
pub use search::{grid_search, SearchResult, SearchSpace};
pub use text::tokenize;
pub use vectorizer::{exclude_target, vectorize, ContextVector};
pub use weighting::{
    build_chi2, build_idf, combine, tfidf_weight, Chi2Table, IdfTable, WeightingConfig,
};
