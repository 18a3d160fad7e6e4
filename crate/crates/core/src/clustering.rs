//! Agglomerative clustering (Lance–Williams updates for ward, average and
//! complete linkage) and affinity propagation over context vectors.
//!
//! Both algorithms are deterministic. Cluster labels are numbered by first
//! appearance: the cluster of point 0 is label 0, the cluster of the first
//! point not in it is label 1, and so on.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Euclidean,
    Manhattan,
    Cosine,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Euclidean, Metric::Manhattan, Metric::Cosine];

    /// Distance between two points. Cosine distance is `1 - cos(x, y)`, and
    /// a zero vector sits at distance 1 from everything.
    pub fn distance(self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            Metric::Euclidean => squared_euclidean(x, y).sqrt(),
            Metric::Manhattan => x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum(),
            Metric::Cosine => {
                let (mut dot, mut nx, mut ny) = (0.0, 0.0, 0.0);
                for (a, b) in x.iter().zip(y) {
                    dot += a * b;
                    nx += a * a;
                    ny += b * b;
                }
                if nx == 0.0 || ny == 0.0 {
                    1.0
                } else {
                    1.0 - dot / (nx.sqrt() * ny.sqrt())
                }
            }
        }
    }
}

pub(crate) fn squared_euclidean(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Euclidean => "euclidean",
            Metric::Manhattan => "manhattan",
            Metric::Cosine => "cosine",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "euclidean" | "l2" => Ok(Metric::Euclidean),
            "manhattan" | "l1" | "cityblock" => Ok(Metric::Manhattan),
            "cosine" => Ok(Metric::Cosine),
            other => Err(Error::Config(format!("unknown metric {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    Ward,
    Average,
    Complete,
}

impl Linkage {
    pub const ALL: [Linkage; 3] = [Linkage::Ward, Linkage::Average, Linkage::Complete];
}

impl fmt::Display for Linkage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Linkage::Ward => "ward",
            Linkage::Average => "average",
            Linkage::Complete => "complete",
        })
    }
}

impl FromStr for Linkage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ward" => Ok(Linkage::Ward),
            "average" => Ok(Linkage::Average),
            "complete" => Ok(Linkage::Complete),
            other => Err(Error::Config(format!("unknown linkage {other:?}"))),
        }
    }
}

/// Self-similarity of every point in affinity propagation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Preference {
    Value(f64),
    /// Median of the off-diagonal similarities.
    Median,
}

impl fmt::Display for Preference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Preference::Value(v) => write!(f, "{v:.2}"),
            Preference::Median => f.write_str("auto-median"),
        }
    }
}

impl FromStr for Preference {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "auto" | "median" | "auto-median" => Ok(Preference::Median),
            v => v
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .map(Preference::Value)
                .ok_or_else(|| Error::Config(format!("bad preference {v:?}"))),
        }
    }
}

impl Serialize for Preference {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Preference::Value(v) => s.serialize_f64(*v),
            Preference::Median => s.serialize_str("auto-median"),
        }
    }
}

impl<'de> Deserialize<'de> for Preference {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Preference::Value(v)),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgglomerativeConfig {
    pub n_clusters: usize,
    pub linkage: Linkage,
    pub metric: Metric,
}

impl Default for AgglomerativeConfig {
    fn default() -> Self {
        AgglomerativeConfig {
            n_clusters: 2,
            linkage: Linkage::Ward,
            metric: Metric::Euclidean,
        }
    }
}

impl AgglomerativeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_clusters == 0 {
            return Err(Error::Config("n_clusters must be at least 1".into()));
        }
        validate_linkage(self.linkage, self.metric)
    }
}

pub fn validate_linkage(linkage: Linkage, metric: Metric) -> Result<()> {
    if linkage == Linkage::Ward && metric != Metric::Euclidean {
        return Err(Error::Config(format!(
            "ward linkage requires the euclidean metric, got {metric}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffinityConfig {
    pub damping: f64,
    pub preference: Preference,
    pub max_iter: usize,
    pub convergence_window: usize,
}

impl Default for AffinityConfig {
    fn default() -> Self {
        AffinityConfig {
            damping: 0.5,
            preference: Preference::Median,
            max_iter: 200,
            convergence_window: 15,
        }
    }
}

impl AffinityConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.5..1.0).contains(&self.damping) {
            return Err(Error::Config(format!(
                "damping must lie in [0.5, 1), got {}",
                self.damping
            )));
        }
        if let Preference::Value(p) = self.preference {
            if !p.is_finite() {
                return Err(Error::Config(format!("preference must be finite, got {p}")));
            }
        }
        if self.max_iter == 0 || self.convergence_window == 0 {
            return Err(Error::Config(
                "max_iter and convergence_window must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClusteringConfig {
    Agglomerative(AgglomerativeConfig),
    AffinityPropagation(AffinityConfig),
}

impl ClusteringConfig {
    pub fn validate(&self) -> Result<()> {
        match self {
            ClusteringConfig::Agglomerative(c) => c.validate(),
            ClusteringConfig::AffinityPropagation(c) => c.validate(),
        }
    }
}

/// Canonical one-line form, also used as the deterministic tie-break key
/// when ranking configurations.
impl fmt::Display for ClusteringConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClusteringConfig::Agglomerative(c) => write!(
                f,
                "agglomerative k={:02} linkage={} metric={}",
                c.n_clusters, c.linkage, c.metric
            ),
            ClusteringConfig::AffinityPropagation(c) => write!(
                f,
                "affinity_propagation damping={:.2} preference={} max_iter={} window={}",
                c.damping, c.preference, c.max_iter, c.convergence_window
            ),
        }
    }
}

/// One agglomeration step. Clusters are named by their lowest point index;
/// `a < b` and the merged cluster keeps the name `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    /// Linkage distance at merge time. For ward this is the Lance–Williams
    /// value on squared euclidean distances.
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterResult {
    pub labels: Vec<usize>,
    pub k: usize,
    /// Affinity propagation only: `exemplars[label]` is the point chosen to
    /// represent that cluster.
    pub exemplars: Vec<usize>,
    /// Affinity propagation only; always true for agglomerative runs.
    pub converged: bool,
    /// Affinity propagation only: message-passing iterations of the run
    /// whose exemplars were kept.
    pub n_iter: usize,
    /// Agglomerative only.
    pub merge_trace: Vec<Merge>,
    /// Affinity propagation only: set when tie-breaking jitter was added to
    /// the similarity matrix.
    pub jittered: bool,
}

pub fn cluster<P: AsRef<[f64]>>(points: &[P], cfg: &ClusteringConfig) -> Result<ClusterResult> {
    match cfg {
        ClusteringConfig::Agglomerative(c) => agglomerative(points, c),
        ClusteringConfig::AffinityPropagation(c) => affinity_propagation(points, c),
    }
}

fn check_points<P: AsRef<[f64]>>(points: &[P]) -> Result<usize> {
    let first = points
        .first()
        .ok_or_else(|| Error::Input("cannot cluster an empty point set".into()))?;
    let dim = first.as_ref().len();
    for (i, p) in points.iter().enumerate() {
        let p = p.as_ref();
        if p.len() != dim {
            return Err(Error::Input(format!(
                "point {i} has dimension {}, expected {dim}",
                p.len()
            )));
        }
        if p.iter().any(|x| !x.is_finite()) {
            return Err(Error::Input(format!(
                "point {i} has a non-finite coordinate"
            )));
        }
    }
    Ok(points.len())
}

/// Bottom-up clustering down to `cfg.n_clusters` clusters (clamped to the
/// number of points).
pub fn agglomerative<P: AsRef<[f64]>>(
    points: &[P],
    cfg: &AgglomerativeConfig,
) -> Result<ClusterResult> {
    cfg.validate()?;
    let n = check_points(points)?;
    let k = if cfg.n_clusters > n {
        log::warn!("n_clusters {} exceeds {n} points, clamped", cfg.n_clusters);
        n
    } else {
        cfg.n_clusters
    };
    let merges = merge_until(points, cfg.linkage, cfg.metric, k);
    let labels = cut_tree(n, &merges, k);
    Ok(ClusterResult {
        labels,
        k,
        exemplars: Vec::new(),
        converged: true,
        n_iter: 0,
        merge_trace: merges,
        jittered: false,
    })
}

/// Full merge sequence (n - 1 merges). Cutting it with [`cut_tree`] at any
/// `k` gives the same labels as [`agglomerative`] with `n_clusters = k`.
pub fn linkage_tree<P: AsRef<[f64]>>(
    points: &[P],
    linkage: Linkage,
    metric: Metric,
) -> Result<Vec<Merge>> {
    validate_linkage(linkage, metric)?;
    check_points(points)?;
    Ok(merge_until(points, linkage, metric, 1))
}

/// Labels after applying the first `n - k` merges of `merges`.
pub fn cut_tree(n: usize, merges: &[Merge], k: usize) -> Vec<usize> {
    let k = k.clamp(1, n.max(1));
    let mut parent: Vec<usize> = (0..n).collect();
    for m in merges.iter().take(n - k) {
        parent[m.b] = m.a;
    }
    let root = |mut i: usize| {
        while parent[i] != i {
            i = parent[i];
        }
        i
    };
    relabel((0..n).map(root))
}

/// Numbers the given cluster ids by first appearance.
fn relabel<I: IntoIterator<Item = usize>>(ids: I) -> Vec<usize> {
    let mut seen = std::collections::HashMap::new();
    ids.into_iter()
        .map(|id| {
            let next = seen.len();
            *seen.entry(id).or_insert(next)
        })
        .collect()
}

/// Row-major symmetric matrix with cached nearest neighbours.
struct Agglomerator {
    n: usize,
    dist: Vec<f64>,
    size: Vec<usize>,
    active: Vec<bool>,
    // nearest active j > i and its distance; ties go to the lowest j
    nearest: Vec<Option<(usize, f64)>>,
}

impl Agglomerator {
    fn d(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.n + j]
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        self.dist[i * self.n + j] = v;
        self.dist[j * self.n + i] = v;
    }

    fn scan_row(&self, i: usize) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for j in i + 1..self.n {
            if !self.active[j] {
                continue;
            }
            let d = self.d(i, j);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
        best
    }

    /// Lexicographically smallest (i, j) among the closest pairs.
    fn closest_pair(&self) -> Option<(usize, usize, f64)> {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..self.n {
            if !self.active[i] {
                continue;
            }
            if let Some((j, d)) = self.nearest[i] {
                if best.is_none_or(|(_, _, bd)| d < bd) {
                    best = Some((i, j, d));
                }
            }
        }
        best
    }
}

fn merge_until<P: AsRef<[f64]>>(
    points: &[P],
    linkage: Linkage,
    metric: Metric,
    k: usize,
) -> Vec<Merge> {
    let n = points.len();
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let (x, y) = (points[i].as_ref(), points[j].as_ref());
            // Ward works on squared euclidean distances: for singletons this
            // equals 2·|I||J|/(|I|+|J|)·‖c_I − c_J‖², the quantity the
            // Lance–Williams ward update preserves.
            let d = match linkage {
                Linkage::Ward => squared_euclidean(x, y),
                _ => metric.distance(x, y),
            };
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    let mut state = Agglomerator {
        n,
        dist,
        size: vec![1; n],
        active: vec![true; n],
        nearest: vec![None; n],
    };
    for i in 0..n {
        state.nearest[i] = state.scan_row(i);
    }

    let mut merges = Vec::with_capacity(n.saturating_sub(k));
    let mut clusters = n;
    while clusters > k {
        let Some((a, b, d_ab)) = state.closest_pair() else {
            break;
        };
        merges.push(Merge {
            a,
            b,
            distance: d_ab,
        });

        let (na, nb) = (state.size[a] as f64, state.size[b] as f64);
        for m in 0..n {
            if !state.active[m] || m == a || m == b {
                continue;
            }
            let (d_am, d_bm) = (state.d(a, m), state.d(b, m));
            let updated = match linkage {
                Linkage::Complete => d_am.max(d_bm),
                Linkage::Average => (na * d_am + nb * d_bm) / (na + nb),
                Linkage::Ward => {
                    let nm = state.size[m] as f64;
                    ((na + nm) * d_am + (nb + nm) * d_bm - nm * d_ab) / (na + nb + nm)
                }
            };
            state.set(a, m, updated);
        }
        state.size[a] += state.size[b];
        state.active[b] = false;
        state.nearest[b] = None;
        clusters -= 1;

        for i in 0..n {
            if !state.active[i] {
                continue;
            }
            if i == a {
                state.nearest[i] = state.scan_row(i);
                continue;
            }
            match state.nearest[i] {
                Some((j, _)) if j == a || j == b => state.nearest[i] = state.scan_row(i),
                Some((j, d)) if i < a => {
                    let d_ia = state.d(i, a);
                    if d_ia < d || (d_ia == d && a < j) {
                        state.nearest[i] = Some((a, d_ia));
                    }
                }
                None if i < a => state.nearest[i] = Some((a, state.d(i, a))),
                _ => {}
            }
        }
    }
    merges
}

/// Affinity propagation on negative squared euclidean similarities.
///
/// Messages are damped as `damping · old + (1 − damping) · new`. The run
/// stops once the exemplar set has been the same for `convergence_window`
/// consecutive iterations, or after `max_iter` iterations; in the latter
/// case the last labeling is returned with `converged = false`.
pub fn affinity_propagation<P: AsRef<[f64]>>(
    points: &[P],
    cfg: &AffinityConfig,
) -> Result<ClusterResult> {
    cfg.validate()?;
    let n = check_points(points)?;
    if n == 1 {
        return Ok(ap_result(vec![0], vec![0], true, 0, false));
    }

    let mut s = vec![0.0; n * n];
    for i in 0..n {
        for k in i + 1..n {
            let v = -squared_euclidean(points[i].as_ref(), points[k].as_ref());
            s[i * n + k] = v;
            s[k * n + i] = v;
        }
    }
    let preference = match cfg.preference {
        Preference::Value(p) => p,
        Preference::Median => median_off_diagonal(&s, n),
    };
    for i in 0..n {
        s[i * n + i] = preference;
    }
    // All points equally similar: message passing cannot break the symmetry.
    let off = s[1];
    let all_equal = (0..n).all(|i| (0..n).all(|k| i == k || s[i * n + k] == off));
    if all_equal {
        return Ok(if preference > off {
            ap_result((0..n).collect(), (0..n).collect(), true, 0, false)
        } else {
            ap_result(vec![0; n], vec![0], true, 0, false)
        });
    }

    // Exact ties in the net similarity (two points that are equally good
    // exemplars for each other) make the messages swing between the tied
    // choices. A run on slightly jittered similarities is used whenever the
    // plain run is not a clean, jitter-insensitive convergence.
    let mut jittered_s = s.clone();
    add_jitter(&mut jittered_s, n);
    let (run, jittered) = if has_row_tie(&s, n) {
        (pass_messages(&jittered_s, n, cfg), true)
    } else {
        let plain = pass_messages(&s, n, cfg);
        let jittered_run = pass_messages(&jittered_s, n, cfg);
        if plain.converged && plain.exemplars == jittered_run.exemplars {
            (plain, false)
        } else {
            (jittered_run, true)
        }
    };
    let MessageRun {
        a,
        r,
        mut exemplars,
        converged,
        n_iter,
    } = run;

    if exemplars.is_empty() {
        // No point claims itself: fall back to the strongest self-evidence.
        let best = (0..n)
            .max_by(|&x, &y| {
                let ex = a[x * n + x] + r[x * n + x];
                let ey = a[y * n + y] + r[y * n + y];
                ex.total_cmp(&ey).then(y.cmp(&x))
            })
            .unwrap_or(0);
        exemplars = vec![best];
    }

    let assignment: Vec<usize> = (0..n)
        .map(|i| {
            if exemplars.binary_search(&i).is_ok() {
                return i;
            }
            let mut best = exemplars[0];
            for &k in &exemplars[1..] {
                if s[i * n + k] > s[i * n + best] {
                    best = k;
                }
            }
            best
        })
        .collect();
    let labels = relabel(assignment.iter().copied());
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut ordered = vec![0; k];
    for (i, &l) in labels.iter().enumerate() {
        if assignment[i] == i {
            ordered[l] = i;
        }
    }
    Ok(ap_result(labels, ordered, converged, n_iter, jittered))
}

struct MessageRun {
    a: Vec<f64>,
    r: Vec<f64>,
    exemplars: Vec<usize>,
    converged: bool,
    n_iter: usize,
}

fn pass_messages(s: &[f64], n: usize, cfg: &AffinityConfig) -> MessageRun {
    let damping = cfg.damping;
    let mut r = vec![0.0; n * n];
    let mut a = vec![0.0; n * n];
    let mut exemplars: Vec<usize> = Vec::new();
    let mut stable = 0usize;
    let mut converged = false;
    let mut n_iter = 0;

    for _ in 0..cfg.max_iter {
        n_iter += 1;
        for i in 0..n {
            let row = i * n;
            let (mut first, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
            let mut first_k = 0;
            for k in 0..n {
                let v = a[row + k] + s[row + k];
                if v > first {
                    second = first;
                    first = v;
                    first_k = k;
                } else if v > second {
                    second = v;
                }
            }
            for k in 0..n {
                let competitor = if k == first_k { second } else { first };
                let fresh = s[row + k] - competitor;
                r[row + k] = damping * r[row + k] + (1.0 - damping) * fresh;
            }
        }

        for k in 0..n {
            let positive: f64 = (0..n)
                .filter(|&i| i != k)
                .map(|i| r[i * n + k].max(0.0))
                .sum();
            let self_r = r[k * n + k];
            for i in 0..n {
                let fresh = if i == k {
                    positive
                } else {
                    (self_r + positive - r[i * n + k].max(0.0)).min(0.0)
                };
                a[i * n + k] = damping * a[i * n + k] + (1.0 - damping) * fresh;
            }
        }

        let current: Vec<usize> = (0..n)
            .filter(|&k| a[k * n + k] + r[k * n + k] > 0.0)
            .collect();
        if current == exemplars {
            stable += 1;
        } else {
            stable = 1;
            exemplars = current;
        }
        if stable >= cfg.convergence_window && !exemplars.is_empty() {
            converged = true;
            break;
        }
    }

    MessageRun {
        a,
        r,
        exemplars,
        converged,
        n_iter,
    }
}

fn ap_result(
    labels: Vec<usize>,
    exemplars: Vec<usize>,
    converged: bool,
    n_iter: usize,
    jittered: bool,
) -> ClusterResult {
    ClusterResult {
        k: exemplars.len(),
        labels,
        exemplars,
        converged,
        n_iter,
        merge_trace: Vec::new(),
        jittered,
    }
}

fn median_off_diagonal(s: &[f64], n: usize) -> f64 {
    let mut values: Vec<f64> = (0..n)
        .flat_map(|i| (0..n).filter(move |&k| k != i).map(move |k| s[i * n + k]))
        .collect();
    values.sort_by(f64::total_cmp);
    let m = values.len();
    if m % 2 == 1 {
        values[m / 2]
    } else {
        (values[m / 2 - 1] + values[m / 2]) / 2.0
    }
}

/// True when some row's best similarity (preference included) is attained
/// by more than one column; such exact ties can make the messages oscillate.
fn has_row_tie(s: &[f64], n: usize) -> bool {
    (0..n).any(|i| {
        let row = &s[i * n..(i + 1) * n];
        let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.iter().filter(|&&v| v == best).count() > 1
    })
}

/// Adds index-dependent perturbations of size ≤ 1e-12 × (similarity range)
/// to the off-diagonal similarities.
fn add_jitter(s: &mut [f64], n: usize) {
    let (lo, hi) = s
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let scale = 1e-12 * (hi - lo);
    for i in 0..n {
        for k in 0..n {
            if i != k {
                s[i * n + k] += scale * unit_hash((i * n + k) as u64);
            }
        }
    }
}

/// splitmix64 mapped to [0, 1).
fn unit_hash(x: u64) -> f64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64
}
