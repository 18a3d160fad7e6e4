//! Context word weights: tf-idf from a background corpus, chi-square
//! association between context words and target words, and their
//! power-weighted product.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::vectorizer::is_target_form;

/// Document frequencies over a background collection.
#[derive(Debug, Clone, PartialEq)]
pub struct IdfTable {
    n_docs: u64,
    df: HashMap<String, u64>,
}

impl IdfTable {
    pub fn n_docs(&self) -> u64 {
        self.n_docs
    }

    pub fn df(&self, word: &str) -> u64 {
        self.df.get(word).copied().unwrap_or(0)
    }

    pub fn vocabulary_len(&self) -> usize {
        self.df.len()
    }

    /// Smoothed inverse document frequency, `ln((N + 1) / (df + 1)) + 1`.
    /// Always positive, also for words never seen in the background corpus.
    pub fn idf(&self, word: &str) -> f64 {
        ((self.n_docs as f64 + 1.0) / (self.df(word) as f64 + 1.0)).ln() + 1.0
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(out, "# n_docs={}", self.n_docs).map_err(io)?;
        let sorted: BTreeMap<_, _> = self.df.iter().collect();
        for (word, df) in sorted {
            writeln!(out, "{word}\t{df}").map_err(io)?;
        }
        out.flush().map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut n_docs = None;
        let mut df = HashMap::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let lineno = i + 1;
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(n) = comment.trim().strip_prefix("n_docs=") {
                    let n = n
                        .trim()
                        .parse()
                        .map_err(|_| Error::format(path, lineno, format!("bad n_docs {n:?}")))?;
                    n_docs = Some(n);
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let (word, count) = line
                .split_once('\t')
                .ok_or_else(|| Error::format(path, lineno, "expected word<TAB>df"))?;
            let count: u64 = count
                .trim()
                .parse()
                .map_err(|_| Error::format(path, lineno, format!("bad df {count:?}")))?;
            df.insert(word.to_string(), count);
        }
        let n_docs = match n_docs {
            Some(n) if n > 0 => n,
            _ => return Err(Error::format(path, 1, "missing \"# n_docs=N\" header")),
        };
        if let Some((word, count)) = df.iter().find(|(_, &c)| c > n_docs) {
            return Err(Error::format(
                path,
                0,
                format!("df of {word:?} is {count}, larger than n_docs {n_docs}"),
            ));
        }
        Ok(IdfTable { n_docs, df })
    }
}

/// Counts, for every word, the number of documents it occurs in.
pub fn build_idf<I, D, S>(docs: I) -> Result<IdfTable>
where
    I: IntoIterator<Item = D>,
    D: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut n_docs = 0u64;
    let mut df: HashMap<String, u64> = HashMap::new();
    let mut seen = HashSet::new();
    for doc in docs {
        n_docs += 1;
        seen.clear();
        for token in doc {
            let token = token.as_ref();
            if seen.insert(token.to_string()) {
                *df.entry(token.to_string()).or_insert(0) += 1;
            }
        }
    }
    if n_docs == 0 {
        return Err(Error::Input(
            "cannot build idf from an empty document stream".into(),
        ));
    }
    Ok(IdfTable { n_docs, df })
}

/// Raw term count of `token` in `context_tokens` times its smoothed idf.
pub fn tfidf_weight<S: AsRef<str>>(token: &str, context_tokens: &[S], idf: &IdfTable) -> f64 {
    let tf = context_tokens
        .iter()
        .filter(|t| t.as_ref() == token)
        .count();
    tf as f64 * idf.idf(token)
}

/// Chi-square scores for (target word, context word) pairs.
///
/// Only pairs where the context word occurs in at least one context of the
/// target are stored; every other pair reads as 0.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Chi2Table {
    values: HashMap<String, HashMap<String, f64>>,
    degenerate: bool,
}

impl Chi2Table {
    pub fn get(&self, target: &str, word: &str) -> f64 {
        self.values
            .get(target)
            .and_then(|m| m.get(word))
            .copied()
            .unwrap_or(0.0)
    }

    /// Set when the table was built from fewer than two target words, in
    /// which case every score is zero.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn len(&self) -> usize {
        self.values.values().map(HashMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, f64)> {
        self.values
            .iter()
            .flat_map(|(t, m)| m.iter().map(move |(w, &v)| (t.as_str(), w.as_str(), v)))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        let mut rows: Vec<_> = self.iter().collect();
        rows.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        for (target, word, value) in rows {
            writeln!(out, "{target}\t{word}\t{value}").map_err(io)?;
        }
        out.flush().map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut values: HashMap<String, HashMap<String, f64>> = HashMap::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split('\t');
            let (Some(target), Some(word), Some(value), None) =
                (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(Error::format(
                    path,
                    i + 1,
                    "expected target<TAB>word<TAB>chi2",
                ));
            };
            let value: f64 = value
                .trim()
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite() && *v >= 0.0)
                .ok_or_else(|| Error::format(path, i + 1, format!("bad chi2 value {value:?}")))?;
            values
                .entry(target.to_string())
                .or_default()
                .insert(word.to_string(), value);
        }
        let degenerate = values.len() < 2;
        Ok(Chi2Table { values, degenerate })
    }
}

/// Pearson chi-square of the 2×2 table
///
/// ```text
///              has word   lacks word
/// target          a           c
/// other targets   b           d
/// ```
///
/// Zero whenever a row or column margin is zero.
pub fn chi2_statistic(a: u64, b: u64, c: u64, d: u64) -> f64 {
    let margins = [a + b, c + d, a + c, b + d];
    if margins.contains(&0) {
        return 0.0;
    }
    let n = (a + b + c + d) as f64;
    let cross = a as f64 * d as f64 - b as f64 * c as f64;
    let denom = margins.iter().map(|&m| m as f64).product::<f64>();
    n * cross * cross / denom
}

/// Context-level chi-square between every target and the words of its
/// contexts, pooled over all contexts of the dataset. Each context's own
/// target forms are left out before counting.
pub fn build_chi2(dataset: &Dataset) -> Chi2Table {
    let targets = dataset.by_target();
    if targets.len() < 2 {
        log::warn!(
            "chi2 needs at least two target words, dataset has {}; all scores are zero",
            targets.len()
        );
        return Chi2Table {
            values: HashMap::new(),
            degenerate: true,
        };
    }

    let n_total = dataset.len() as u64;
    let mut total: HashMap<&str, u64> = HashMap::new();
    let mut per_target: Vec<(&str, u64, HashMap<&str, u64>)> = Vec::with_capacity(targets.len());
    for (target, indices) in targets {
        let mut counts: HashMap<&str, u64> = HashMap::new();
        for &i in indices {
            let inst = &dataset.instances()[i];
            let present: HashSet<&str> = inst
                .tokens
                .iter()
                .map(String::as_str)
                .filter(|t| !is_target_form(t, target))
                .collect();
            for word in present {
                *counts.entry(word).or_insert(0) += 1;
                *total.entry(word).or_insert(0) += 1;
            }
        }
        per_target.push((target, indices.len() as u64, counts));
    }

    let values = per_target
        .into_iter()
        .map(|(target, n_target, counts)| {
            let scores = counts
                .into_iter()
                .map(|(word, a)| {
                    let b = total[word] - a;
                    let c = n_target - a;
                    let d = (n_total - n_target) - b;
                    (word.to_string(), chi2_statistic(a, b, c, d))
                })
                .collect();
            (target.to_string(), scores)
        })
        .collect();
    Chi2Table {
        values,
        degenerate: false,
    }
}

/// Exponents applied to the tf-idf and chi-square weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightingConfig {
    pub p_tfidf: f64,
    pub p_chi2: f64,
}

impl WeightingConfig {
    pub const MAX_POWER: f64 = 2.5;

    pub fn new(p_tfidf: f64, p_chi2: f64) -> Result<Self> {
        let cfg = WeightingConfig { p_tfidf, p_chi2 };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Plain unweighted averaging.
    pub fn unweighted() -> Self {
        WeightingConfig {
            p_tfidf: 0.0,
            p_chi2: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p_tfidf", self.p_tfidf), ("p_chi2", self.p_chi2)] {
            if !(p.is_finite() && (0.0..=Self::MAX_POWER).contains(&p)) {
                return Err(Error::Config(format!(
                    "{name} must lie in [0, {}], got {p}",
                    Self::MAX_POWER
                )));
            }
        }
        Ok(())
    }
}

/// `tfidf^p_tfidf · chi2^p_chi2`, where a zero exponent turns its factor
/// into exactly 1.
pub fn combine(tfidf: f64, chi2: f64, cfg: &WeightingConfig) -> f64 {
    power(tfidf, cfg.p_tfidf) * power(chi2, cfg.p_chi2)
}

fn power(x: f64, p: f64) -> f64 {
    if p == 0.0 {
        1.0
    } else {
        x.powf(p)
    }
}
