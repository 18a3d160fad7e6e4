//! Adjusted Rand Index, per-word evaluation reports and confusion matrices.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::hash::Hash;
use std::io::Write;

use crate::dataset::{Dataset, Labeling};
use crate::error::{Error, Result};

fn pairs(n: u64) -> u128 {
    let n = n as u128;
    n * n.saturating_sub(1) / 2
}

/// Adjusted Rand Index between two labelings of the same items.
///
/// When both partitions are trivial in the sense that the maximum index
/// equals its expectation (e.g. both put everything in one cluster), the
/// score is 1.0 if the partitions coincide and 0.0 otherwise.
pub fn ari<G, P>(gold: &[G], pred: &[P]) -> Result<f64>
where
    G: Eq + Hash,
    P: Eq + Hash,
{
    if gold.len() != pred.len() {
        return Err(Error::Input(format!(
            "label lists differ in length: {} vs {}",
            gold.len(),
            pred.len()
        )));
    }
    if gold.is_empty() {
        return Err(Error::Input("cannot score an empty labeling".into()));
    }

    let gold_ids = dense_ids(gold);
    let pred_ids = dense_ids(pred);
    let mut cells: HashMap<(usize, usize), u64> = HashMap::new();
    let mut rows: HashMap<usize, u64> = HashMap::new();
    let mut cols: HashMap<usize, u64> = HashMap::new();
    for (&g, &p) in gold_ids.iter().zip(&pred_ids) {
        *cells.entry((g, p)).or_insert(0) += 1;
        *rows.entry(g).or_insert(0) += 1;
        *cols.entry(p).or_insert(0) += 1;
    }

    let index: u128 = cells.values().map(|&c| pairs(c)).sum();
    let sum_rows: u128 = rows.values().map(|&c| pairs(c)).sum();
    let sum_cols: u128 = cols.values().map(|&c| pairs(c)).sum();
    let total = pairs(gold.len() as u64);

    // max == expected  ⇔  (sum_rows + sum_cols)·total == 2·sum_rows·sum_cols
    if (sum_rows + sum_cols) * total == 2 * sum_rows * sum_cols {
        let identical = cells.len() == rows.len() && cells.len() == cols.len();
        return Ok(if identical { 1.0 } else { 0.0 });
    }

    let expected = sum_rows as f64 * sum_cols as f64 / total as f64;
    let max = (sum_rows + sum_cols) as f64 / 2.0;
    Ok((index as f64 - expected) / (max - expected))
}

fn dense_ids<T: Eq + Hash>(labels: &[T]) -> Vec<usize> {
    let mut ids = HashMap::new();
    labels
        .iter()
        .map(|l| {
            let next = ids.len();
            *ids.entry(l).or_insert(next)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WordScore {
    pub ari: f64,
    pub n_contexts: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub per_word: BTreeMap<String, WordScore>,
    /// Mean of per-word ARI weighted by each word's number of contexts.
    pub aggregate_weighted: f64,
    /// Unweighted mean of per-word ARI.
    pub aggregate_macro: f64,
    /// Instances skipped because they carry no gold sense.
    pub n_without_gold: usize,
}

impl EvalReport {
    pub fn from_scores(
        per_word: BTreeMap<String, WordScore>,
        n_without_gold: usize,
    ) -> Result<Self> {
        if per_word.is_empty() {
            return Err(Error::Input("no gold-labeled contexts to evaluate".into()));
        }
        let (aggregate_weighted, aggregate_macro) = aggregate(per_word.values().copied());
        Ok(EvalReport {
            per_word,
            aggregate_weighted,
            aggregate_macro,
            n_without_gold,
        })
    }

    /// `word<TAB>n<TAB>ari` rows followed by the two aggregates.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "word\tn\tari")?;
        for (word, score) in &self.per_word {
            writeln!(out, "{word}\t{}\t{:.6}", score.n_contexts, score.ari)?;
        }
        let total: usize = self.per_word.values().map(|s| s.n_contexts).sum();
        writeln!(
            out,
            "aggregate_weighted\t{total}\t{:.6}",
            self.aggregate_weighted
        )?;
        writeln!(
            out,
            "aggregate_macro\t{}\t{:.6}",
            self.per_word.len(),
            self.aggregate_macro
        )
    }
}

/// (weighted-by-size mean, plain mean) of per-word scores.
pub(crate) fn aggregate<I: IntoIterator<Item = WordScore>>(scores: I) -> (f64, f64) {
    let (mut weighted, mut plain, mut n, mut words) = (0.0, 0.0, 0usize, 0usize);
    for s in scores {
        weighted += s.ari * s.n_contexts as f64;
        plain += s.ari;
        n += s.n_contexts;
        words += 1;
    }
    if words == 0 {
        return (0.0, 0.0);
    }
    (weighted / n as f64, plain / words as f64)
}

/// Per-target ARI of `labels` against the gold senses of `dataset`.
pub fn evaluate(dataset: &Dataset, labels: &Labeling) -> Result<EvalReport> {
    let mut per_word = BTreeMap::new();
    let mut n_without_gold = 0;
    for (target, indices) in dataset.by_target() {
        let mut gold = Vec::new();
        let mut pred = Vec::new();
        for &i in indices {
            let inst = &dataset.instances()[i];
            let Some(sense) = &inst.gold_sense else {
                n_without_gold += 1;
                continue;
            };
            let predicted = labels.get(&inst.context_id).ok_or_else(|| {
                Error::Input(format!(
                    "no predicted label for context_id {}",
                    inst.context_id
                ))
            })?;
            gold.push(sense.as_str());
            pred.push(predicted.as_str());
        }
        if gold.is_empty() {
            continue;
        }
        per_word.insert(
            target.clone(),
            WordScore {
                ari: ari(&gold, &pred)?,
                n_contexts: gold.len(),
            },
        );
    }
    EvalReport::from_scores(per_word, n_without_gold)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub gold_labels: Vec<String>,
    pub pred_labels: Vec<String>,
    /// `counts[row][col]`: items with gold label `row` predicted as `col`.
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let header: Vec<String> = std::iter::once("gold\\pred".to_string())
            .chain(self.pred_labels.iter().map(|l| csv_field(l)))
            .collect();
        writeln!(out, "{}", header.join(","))?;
        for (label, row) in self.gold_labels.iter().zip(&self.counts) {
            let cells: Vec<String> = row.iter().map(u64::to_string).collect();
            writeln!(out, "{},{}", csv_field(label), cells.join(","))?;
        }
        Ok(())
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Integers compare numerically, everything else lexicographically;
/// integers sort before other strings.
pub(crate) fn label_order(a: &str, b: &str) -> Ordering {
    match (a.parse::<i64>(), b.parse::<i64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        _ => a.cmp(b),
    }
}

fn sorted_labels(mut v: Vec<&str>) -> Vec<&str> {
    v.sort_by(|a, b| label_order(a, b));
    v.dedup();
    v
}

/// Gold senses as rows, predicted labels as columns, both sorted.
pub fn confusion_matrix<G, P>(gold: &[G], pred: &[P]) -> Result<ConfusionMatrix>
where
    G: AsRef<str>,
    P: AsRef<str>,
{
    if gold.len() != pred.len() {
        return Err(Error::Input(format!(
            "label lists differ in length: {} vs {}",
            gold.len(),
            pred.len()
        )));
    }
    let rows = sorted_labels(gold.iter().map(AsRef::as_ref).collect());
    let cols = sorted_labels(pred.iter().map(AsRef::as_ref).collect());
    let row_of: HashMap<&str, usize> = rows.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    let col_of: HashMap<&str, usize> = cols.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    let mut counts = vec![vec![0u64; cols.len()]; rows.len()];
    for (g, p) in gold.iter().zip(pred) {
        counts[row_of[g.as_ref()]][col_of[p.as_ref()]] += 1;
    }
    Ok(ConfusionMatrix {
        gold_labels: rows.into_iter().map(str::to_string).collect(),
        pred_labels: cols.into_iter().map(str::to_string).collect(),
        counts,
    })
}

/// One confusion matrix per target word over its gold-labeled instances.
pub fn confusion_matrices(
    dataset: &Dataset,
    labels: &Labeling,
) -> Result<BTreeMap<String, ConfusionMatrix>> {
    let mut out = BTreeMap::new();
    for (target, indices) in dataset.by_target() {
        let mut gold = Vec::new();
        let mut pred = Vec::new();
        for &i in indices {
            let inst = &dataset.instances()[i];
            if let (Some(g), Some(p)) = (&inst.gold_sense, labels.get(&inst.context_id)) {
                gold.push(g.as_str());
                pred.push(p.as_str());
            }
        }
        if !gold.is_empty() {
            out.insert(target.clone(), confusion_matrix(&gold, &pred)?);
        }
    }
    Ok(out)
}
