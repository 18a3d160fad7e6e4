//! Dense context vectors: target forms removed, remaining words weighted,
//! averaged and L2-normalized.

use std::collections::HashMap;
use std::io::Write;

use rayon::prelude::*;

use crate::dataset::{ContextInstance, Dataset};
use crate::embeddings::EmbeddingModel;
use crate::text::normalize_word;
use crate::weighting::{combine, tfidf_weight, Chi2Table, IdfTable, WeightingConfig};

/// Shortest common prefix (in characters) a token must share with the
/// target to count as one of its grammatical forms.
const MIN_SHARED_PREFIX: usize = 4;

fn shared_prefix_threshold(target_len: usize) -> usize {
    MIN_SHARED_PREFIX
        .max(target_len.saturating_sub(2))
        .min(target_len)
}

/// True when `token` is treated as an inflected form of `target`: their
/// longest common prefix covers at least `max(4, len(target) - 2)`
/// characters, capped at the full target length so short targets still
/// match themselves.
pub fn is_target_form(token: &str, target: &str) -> bool {
    let target_len = target.chars().count();
    if target_len == 0 {
        return false;
    }
    let common = token
        .chars()
        .zip(target.chars())
        .take_while(|(a, b)| a == b)
        .count();
    common >= shared_prefix_threshold(target_len)
}

/// Drops every token that looks like a form of `target`, keeping the rest
/// in order.
pub fn exclude_target<S: AsRef<str>>(tokens: &[S], target: &str) -> Vec<String> {
    let target = normalize_word(target);
    tokens
        .iter()
        .map(AsRef::as_ref)
        .filter(|t| !is_target_form(&normalize_word(t), &target))
        .map(str::to_string)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContextVector {
    pub context_id: String,
    pub v: Vec<f64>,
    /// Token occurrences that had an embedding and a positive weight.
    pub n_contributing: usize,
}

impl ContextVector {
    pub fn is_zero(&self) -> bool {
        self.n_contributing == 0
    }
}

/// Weighted sum of `embeddings` after scaling `raw_weights` to unit L2
/// norm, then scaled to unit length itself. Returns the zero vector when no
/// weight is positive or the sum cancels out exactly.
pub fn weighted_average(embeddings: &[&[f32]], raw_weights: &[f64], dim: usize) -> Vec<f64> {
    debug_assert_eq!(embeddings.len(), raw_weights.len());
    let mut v = vec![0.0; dim];
    let weight_norm = l2_norm(raw_weights);
    if weight_norm == 0.0 || !weight_norm.is_finite() {
        return v;
    }
    for (e, &w) in embeddings.iter().zip(raw_weights) {
        let w = w / weight_norm;
        if w == 0.0 {
            continue;
        }
        for (acc, &x) in v.iter_mut().zip(e.iter()) {
            *acc += w * f64::from(x);
        }
    }
    let norm = l2_norm(&v);
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

fn l2_norm(xs: &[f64]) -> f64 {
    xs.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Builds the context vector of one instance.
///
/// Target forms are excluded, tokens without an embedding are skipped, and
/// each remaining occurrence is weighted by
/// `combine(tfidf(token), chi2(target, token))`. Repeated tokens contribute
/// once per occurrence with the same weight. Embeddings enter unnormalized.
pub fn vectorize(
    instance: &ContextInstance,
    model: &EmbeddingModel,
    idf: &IdfTable,
    chi2: &Chi2Table,
    cfg: &WeightingConfig,
) -> ContextVector {
    let tokens = exclude_target(&instance.tokens, &instance.target);

    let mut weights: HashMap<&str, f64> = HashMap::new();
    let mut embeddings = Vec::with_capacity(tokens.len());
    let mut raw = Vec::with_capacity(tokens.len());
    for token in &tokens {
        let Some(e) = model.lookup(token) else {
            continue;
        };
        let w = *weights.entry(token.as_str()).or_insert_with(|| {
            combine(
                tfidf_weight(token, &tokens, idf),
                chi2.get(&instance.target, token),
                cfg,
            )
        });
        if w > 0.0 {
            embeddings.push(e);
            raw.push(w);
        }
    }

    let v = weighted_average(&embeddings, &raw, model.dim());
    if raw.is_empty() {
        log::warn!(
            "context {} has no weighted in-vocabulary words, using the zero vector",
            instance.context_id
        );
    }
    ContextVector {
        context_id: instance.context_id.clone(),
        v,
        n_contributing: raw.len(),
    }
}

/// Vectorizes every instance of `dataset`, in dataset order.
pub fn vectorize_all(
    dataset: &Dataset,
    model: &EmbeddingModel,
    idf: &IdfTable,
    chi2: &Chi2Table,
    cfg: &WeightingConfig,
) -> Vec<ContextVector> {
    dataset
        .instances()
        .par_iter()
        .map(|inst| vectorize(inst, model, idf, chi2, cfg))
        .collect()
}

/// `context_id<TAB>v1 … vd` dump.
pub fn write_vectors<W: Write>(vectors: &[ContextVector], mut out: W) -> std::io::Result<()> {
    for cv in vectors {
        write!(out, "{}\t", cv.context_id)?;
        let values: Vec<String> = cv.v.iter().map(|x| x.to_string()).collect();
        writeln!(out, "{}", values.join(" "))?;
    }
    Ok(())
}
