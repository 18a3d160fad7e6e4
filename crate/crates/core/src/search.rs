//! Exhaustive, deterministic search over weighting powers and clustering
//! hyperparameters, scored by context-weighted ARI on a gold-labeled set.
//!
//! Context vectors are computed once per power combination and shared by
//! every clustering configuration. For agglomerative clustering the merge
//! tree is built once per (power combination, linkage, metric) and cut at
//! every `k` of the grid.

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Deserialize;

use crate::clustering::{
    affinity_propagation, cut_tree, linkage_tree, validate_linkage, AffinityConfig,
    AgglomerativeConfig, ClusteringConfig, Linkage, Metric, Preference,
};
use crate::dataset::Dataset;
use crate::embeddings::EmbeddingModel;
use crate::error::{Error, Result};
use crate::evaluation::{aggregate, ari, WordScore};
use crate::vectorizer::vectorize_all;
use crate::weighting::{Chi2Table, IdfTable, WeightingConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Agglomerative,
    AffinityPropagation,
}

/// Grid definition. Every field has a default, so a config file only needs
/// the keys it changes:
///
/// ```toml
/// power_grid = [0.0, 0.5, 1.0, 1.5, 2.0, 2.5]
/// algorithms = ["agglomerative"]
/// k_grid = [2, 3, 10]
/// linkages = ["ward", "average"]
/// metrics = ["euclidean"]
/// damping_grid = [0.5, 0.9]
/// preference_grid = ["auto-median", -20.0, -6.8, 5.0]
/// ```
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSpace {
    /// Exponents tried for both tf-idf and chi2.
    pub power_grid: Vec<f64>,
    pub algorithms: Vec<Algorithm>,
    pub k_grid: Vec<usize>,
    pub linkages: Vec<Linkage>,
    pub metrics: Vec<Metric>,
    pub damping_grid: Vec<f64>,
    pub preference_grid: Vec<Preference>,
    pub max_iter: usize,
    pub convergence_window: usize,
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            power_grid: vec![0.0, 0.5, 1.0, 1.5, 2.0, 2.5],
            algorithms: vec![Algorithm::Agglomerative, Algorithm::AffinityPropagation],
            k_grid: (1..=14).collect(),
            linkages: Linkage::ALL.to_vec(),
            metrics: Metric::ALL.to_vec(),
            damping_grid: vec![0.5, 0.6, 0.7, 0.8, 0.9],
            preference_grid: std::iter::once(Preference::Median)
                .chain([-20.0, -10.0, -5.0, -3.0, -2.0, -1.0, 0.0, 5.0].map(Preference::Value))
                .collect(),
            max_iter: 200,
            convergence_window: 15,
        }
    }
}

impl SearchSpace {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let space: SearchSpace =
            toml::from_str(text).map_err(|e| Error::Config(format!("search space: {e}")))?;
        space.validate()?;
        Ok(space)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Agglomerative-only space over the given grids.
    pub fn agglomerative_only(
        powers: Vec<f64>,
        k_grid: Vec<usize>,
        linkages: Vec<Linkage>,
        metrics: Vec<Metric>,
    ) -> Self {
        SearchSpace {
            power_grid: powers,
            algorithms: vec![Algorithm::Agglomerative],
            k_grid,
            linkages,
            metrics,
            ..SearchSpace::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.power_grid.is_empty() {
            return bad("power_grid is empty".into());
        }
        for &p in &self.power_grid {
            WeightingConfig::new(p, p)?;
        }
        no_duplicates("power_grid", &self.power_grid)?;
        if self.algorithms.is_empty() {
            return bad("no algorithms selected".into());
        }
        if self.algorithms.contains(&Algorithm::Agglomerative) {
            if self.k_grid.is_empty() || self.linkages.is_empty() || self.metrics.is_empty() {
                return bad(
                    "k_grid, linkages and metrics must be non-empty for agglomerative".into(),
                );
            }
            if self.k_grid.contains(&0) {
                return bad("k_grid entries must be at least 1".into());
            }
            no_duplicates("k_grid", &self.k_grid)?;
            no_duplicates("linkages", &self.linkages)?;
            no_duplicates("metrics", &self.metrics)?;
            if self.linkage_metric_pairs().is_empty() {
                return bad("no valid linkage/metric pair (ward needs euclidean)".into());
            }
        }
        if self.algorithms.contains(&Algorithm::AffinityPropagation) {
            if self.damping_grid.is_empty() || self.preference_grid.is_empty() {
                return bad("damping_grid and preference_grid must be non-empty".into());
            }
            no_duplicates("damping_grid", &self.damping_grid)?;
            no_duplicates("preference_grid", &self.preference_grid)?;
            for p in &self.preference_grid {
                if let Preference::Value(v) = p {
                    if !(-20.0..=5.0).contains(v) {
                        return bad(format!("preference {v} outside [-20, 5]"));
                    }
                }
            }
            for c in self.affinity_configs() {
                c.validate()?;
            }
        }
        no_duplicates("algorithms", &self.algorithms)
    }

    /// Valid (linkage, metric) pairs; ward is only paired with euclidean.
    pub fn linkage_metric_pairs(&self) -> Vec<(Linkage, Metric)> {
        let mut pairs = Vec::new();
        for &l in &self.linkages {
            for &m in &self.metrics {
                if validate_linkage(l, m).is_ok() {
                    pairs.push((l, m));
                }
            }
        }
        pairs
    }

    /// Pairs left out of the search because the linkage forbids the metric.
    pub fn excluded_pairs(&self) -> Vec<(Linkage, Metric)> {
        let valid = self.linkage_metric_pairs();
        self.linkages
            .iter()
            .flat_map(|&l| self.metrics.iter().map(move |&m| (l, m)))
            .filter(|p| !valid.contains(p))
            .collect()
    }

    pub fn weighting_configs(&self) -> Vec<WeightingConfig> {
        self.power_grid
            .iter()
            .flat_map(|&t| {
                self.power_grid.iter().map(move |&c| WeightingConfig {
                    p_tfidf: t,
                    p_chi2: c,
                })
            })
            .collect()
    }

    fn affinity_configs(&self) -> Vec<AffinityConfig> {
        self.damping_grid
            .iter()
            .flat_map(|&damping| {
                self.preference_grid
                    .iter()
                    .map(move |&preference| AffinityConfig {
                        damping,
                        preference,
                        max_iter: self.max_iter,
                        convergence_window: self.convergence_window,
                    })
            })
            .collect()
    }

    /// Clustering configurations, in enumeration order.
    pub fn clustering_configs(&self) -> Vec<ClusteringConfig> {
        let mut out = Vec::new();
        for algorithm in &self.algorithms {
            match algorithm {
                Algorithm::Agglomerative => {
                    for (linkage, metric) in self.linkage_metric_pairs() {
                        for &k in &self.k_grid {
                            out.push(ClusteringConfig::Agglomerative(AgglomerativeConfig {
                                n_clusters: k,
                                linkage,
                                metric,
                            }));
                        }
                    }
                }
                Algorithm::AffinityPropagation => out.extend(
                    self.affinity_configs()
                        .into_iter()
                        .map(ClusteringConfig::AffinityPropagation),
                ),
            }
        }
        out
    }

    /// Number of (weighting, clustering) configurations searched.
    pub fn size(&self) -> usize {
        self.power_grid.len() * self.power_grid.len() * self.clustering_configs().len()
    }
}

fn no_duplicates<T: std::fmt::Debug + PartialEq>(name: &str, values: &[T]) -> Result<()> {
    for (i, v) in values.iter().enumerate() {
        if values[..i].contains(v) {
            return Err(Error::Config(format!("{name} lists {v:?} twice")));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchEntry {
    pub clustering: ClusteringConfig,
    pub weighting: WeightingConfig,
    /// Context-weighted mean ARI over target words.
    pub train_ari: f64,
    pub train_ari_macro: f64,
}

impl SearchEntry {
    /// Canonical configuration string; ties in ARI are broken by it.
    pub fn key(&self) -> String {
        config_key(&self.weighting, &self.clustering)
    }
}

pub fn config_key(weighting: &WeightingConfig, clustering: &ClusteringConfig) -> String {
    format!(
        "p_tfidf={:.2} p_chi2={:.2} {clustering}",
        weighting.p_tfidf, weighting.p_chi2
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    /// Sorted by descending ARI, then ascending [`SearchEntry::key`].
    pub ranked: Vec<SearchEntry>,
}

impl SearchResult {
    pub fn best(&self) -> &SearchEntry {
        &self.ranked[0]
    }

    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "rank\tari_weighted\tari_macro\tp_tfidf\tp_chi2\tclustering"
        )?;
        for (i, e) in self.ranked.iter().enumerate() {
            writeln!(
                out,
                "{}\t{:.6}\t{:.6}\t{}\t{}\t{}",
                i + 1,
                e.train_ari,
                e.train_ari_macro,
                e.weighting.p_tfidf,
                e.weighting.p_chi2,
                e.clustering
            )?;
        }
        Ok(())
    }
}

/// One target word's contexts: all of them are clustered, those with a gold
/// sense are scored.
struct WordTask {
    indices: Vec<usize>,
    scored: Vec<usize>,
    gold: Vec<String>,
}

/// Scores every configuration of `space` on `dataset`.
pub fn grid_search(
    dataset: &Dataset,
    model: &EmbeddingModel,
    idf: &IdfTable,
    chi2: &Chi2Table,
    space: &SearchSpace,
) -> Result<SearchResult> {
    space.validate()?;
    if !dataset.has_gold() {
        return Err(Error::Input("grid search needs gold sense labels".into()));
    }
    for (l, m) in space.excluded_pairs() {
        log::info!("skipping linkage {l} with metric {m}: ward requires euclidean");
    }

    let words: Vec<WordTask> = dataset
        .by_target()
        .values()
        .filter_map(|indices| {
            let mut scored = Vec::new();
            let mut gold = Vec::new();
            for (pos, &i) in indices.iter().enumerate() {
                if let Some(g) = &dataset.instances()[i].gold_sense {
                    scored.push(pos);
                    gold.push(g.clone());
                }
            }
            (!scored.is_empty()).then(|| WordTask {
                indices: indices.clone(),
                scored,
                gold,
            })
        })
        .collect();

    let clustering = space.clustering_configs();
    let per_power: Vec<Result<Vec<SearchEntry>>> = space
        .weighting_configs()
        .into_par_iter()
        .map(|weighting| {
            let vectors = vectorize_all(dataset, model, idf, chi2, &weighting);
            // scores[config][word]
            let mut scores = vec![Vec::with_capacity(words.len()); clustering.len()];
            for word in &words {
                let points: Vec<&[f64]> = word
                    .indices
                    .iter()
                    .map(|&i| vectors[i].v.as_slice())
                    .collect();
                for (slot, labels) in labels_for_word(&points, &clustering)?
                    .into_iter()
                    .enumerate()
                {
                    let pred: Vec<usize> = word.scored.iter().map(|&p| labels[p]).collect();
                    scores[slot].push(WordScore {
                        ari: ari(&word.gold, &pred)?,
                        n_contexts: pred.len(),
                    });
                }
            }
            Ok(clustering
                .iter()
                .zip(scores)
                .map(|(c, s)| {
                    let (weighted, macro_) = aggregate(s);
                    SearchEntry {
                        clustering: *c,
                        weighting,
                        train_ari: weighted,
                        train_ari_macro: macro_,
                    }
                })
                .collect())
        })
        .collect();

    let mut ranked = Vec::with_capacity(space.size());
    for entries in per_power {
        ranked.extend(entries?);
    }
    let mut keyed: Vec<(String, SearchEntry)> = ranked.into_iter().map(|e| (e.key(), e)).collect();
    keyed.sort_by(|(ka, a), (kb, b)| b.train_ari.total_cmp(&a.train_ari).then_with(|| ka.cmp(kb)));
    Ok(SearchResult {
        ranked: keyed.into_iter().map(|(_, e)| e).collect(),
    })
}

/// Labels for every clustering configuration, in `configs` order.
fn labels_for_word(points: &[&[f64]], configs: &[ClusteringConfig]) -> Result<Vec<Vec<usize>>> {
    let n = points.len();
    let mut trees: BTreeMap<(Linkage, Metric), Vec<crate::clustering::Merge>> = BTreeMap::new();
    let mut out = Vec::with_capacity(configs.len());
    for cfg in configs {
        match cfg {
            ClusteringConfig::Agglomerative(c) => {
                let key = (c.linkage, c.metric);
                if let Entry::Vacant(slot) = trees.entry(key) {
                    slot.insert(linkage_tree(points, c.linkage, c.metric)?);
                }
                out.push(cut_tree(n, &trees[&key], c.n_clusters.min(n)));
            }
            ClusteringConfig::AffinityPropagation(c) => {
                out.push(affinity_propagation(points, c)?.labels);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapRow {
    pub p_tfidf: f64,
    pub p_chi2: f64,
    pub ari: f64,
}

/// Best ARI per power combination. With `fixed`, the ARI of that single
/// clustering configuration is reported instead of the maximum.
pub fn export_power_heatmap(
    result: &SearchResult,
    fixed: Option<&ClusteringConfig>,
) -> Vec<HeatmapRow> {
    let mut cells: Vec<HeatmapRow> = Vec::new();
    for e in &result.ranked {
        if fixed.is_some_and(|f| *f != e.clustering) {
            continue;
        }
        let (t, c) = (e.weighting.p_tfidf, e.weighting.p_chi2);
        match cells.iter_mut().find(|r| r.p_tfidf == t && r.p_chi2 == c) {
            Some(row) => row.ari = row.ari.max(e.train_ari),
            None => cells.push(HeatmapRow {
                p_tfidf: t,
                p_chi2: c,
                ari: e.train_ari,
            }),
        }
    }
    cells.sort_by(|a, b| {
        a.p_tfidf
            .total_cmp(&b.p_tfidf)
            .then(a.p_chi2.total_cmp(&b.p_chi2))
    });
    cells
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub n_clusters: usize,
    pub linkage: Linkage,
    pub ari: f64,
}

/// Best agglomerative ARI per (number of clusters, linkage).
pub fn export_k_linkage_sweep(result: &SearchResult) -> Vec<SweepRow> {
    let mut best: BTreeMap<(Linkage, usize), f64> = BTreeMap::new();
    for e in &result.ranked {
        if let ClusteringConfig::Agglomerative(c) = e.clustering {
            let slot = best
                .entry((c.linkage, c.n_clusters))
                .or_insert(f64::NEG_INFINITY);
            *slot = slot.max(e.train_ari);
        }
    }
    best.into_iter()
        .map(|((linkage, n_clusters), ari)| SweepRow {
            n_clusters,
            linkage,
            ari,
        })
        .collect()
}

pub fn write_heatmap_csv<W: Write>(rows: &[HeatmapRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "p_tfidf,p_chi2,ari")?;
    for r in rows {
        writeln!(out, "{},{},{:.6}", r.p_tfidf, r.p_chi2, r.ari)?;
    }
    Ok(())
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "n_clusters,linkage,ari")?;
    for r in rows {
        writeln!(out, "{},{},{:.6}", r.n_clusters, r.linkage, r.ari)?;
    }
    Ok(())
}

/// Distinct power combinations present in a result.
pub fn power_combinations(result: &SearchResult) -> usize {
    let set: HashSet<(u64, u64)> = result
        .ranked
        .iter()
        .map(|e| (e.weighting.p_tfidf.to_bits(), e.weighting.p_chi2.to_bits()))
        .collect();
    set.len()
}
