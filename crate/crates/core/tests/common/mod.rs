//! Independent reference implementations and fixtures shared by the
//! integration tests. Everything here is deliberately naive.
#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wsi_core::clustering::{Linkage, Metric};
use wsi_core::{ContextInstance, Dataset, EmbeddingModel};

/// ARI by enumerating every pair of items.
pub fn ari_by_pairs(gold: &[usize], pred: &[usize]) -> f64 {
    let n = gold.len();
    let (mut both, mut gold_only, mut pred_only) = (0u64, 0u64, 0u64);
    for i in 0..n {
        for j in i + 1..n {
            match (gold[i] == gold[j], pred[i] == pred[j]) {
                (true, true) => both += 1,
                (true, false) => gold_only += 1,
                (false, true) => pred_only += 1,
                (false, false) => {}
            }
        }
    }
    let pairs = (n * n.saturating_sub(1) / 2) as u64;
    let sum_gold = both + gold_only;
    let sum_pred = both + pred_only;
    if (sum_gold + sum_pred) * pairs == 2 * sum_gold * sum_pred {
        return if gold_only == 0 && pred_only == 0 {
            1.0
        } else {
            0.0
        };
    }
    let expected = sum_gold as f64 * sum_pred as f64 / pairs as f64;
    let max = (sum_gold + sum_pred) as f64 / 2.0;
    (both as f64 - expected) / (max - expected)
}

fn distance(metric: Metric, x: &[f64], y: &[f64]) -> f64 {
    match metric {
        Metric::Euclidean => x
            .iter()
            .zip(y)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt(),
        Metric::Manhattan => x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum(),
        Metric::Cosine => {
            let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
            let nx = x.iter().map(|a| a * a).sum::<f64>().sqrt();
            let ny = y.iter().map(|a| a * a).sum::<f64>().sqrt();
            if nx == 0.0 || ny == 0.0 {
                1.0
            } else {
                1.0 - dot / (nx * ny)
            }
        }
    }
}

fn centroid(points: &[Vec<f64>], members: &[usize]) -> Vec<f64> {
    let mut c = vec![0.0; points[0].len()];
    for &m in members {
        for (ci, x) in c.iter_mut().zip(&points[m]) {
            *ci += x;
        }
    }
    c.iter().map(|x| x / members.len() as f64).collect()
}

fn cluster_distance(
    points: &[Vec<f64>],
    d: &[Vec<f64>],
    a: &[usize],
    b: &[usize],
    linkage: Linkage,
) -> f64 {
    match linkage {
        Linkage::Complete => a
            .iter()
            .flat_map(|&i| b.iter().map(move |&j| d[i][j]))
            .fold(f64::NEG_INFINITY, f64::max),
        Linkage::Average => {
            let total: f64 = a
                .iter()
                .flat_map(|&i| b.iter().map(move |&j| d[i][j]))
                .sum();
            total / (a.len() * b.len()) as f64
        }
        Linkage::Ward => {
            let (ca, cb) = (centroid(points, a), centroid(points, b));
            let sq: f64 = ca.iter().zip(&cb).map(|(x, y)| (x - y) * (x - y)).sum();
            let (na, nb) = (a.len() as f64, b.len() as f64);
            2.0 * na * nb / (na + nb) * sq
        }
    }
}

/// Partitions at every level, from n singletons down to one cluster,
/// recomputing every cluster distance from the points at each step.
/// Among pairs within `1e-9` (relative) of the minimum the pair whose
/// lowest members are lexicographically smallest is merged.
pub fn naive_agglomerative(
    points: &[Vec<f64>],
    linkage: Linkage,
    metric: Metric,
) -> Vec<Vec<usize>> {
    let n = points.len();
    let d: Vec<Vec<f64>> = points
        .iter()
        .map(|x| points.iter().map(|y| distance(metric, x, y)).collect())
        .collect();
    let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut levels = vec![labels_of(n, &clusters)];
    while clusters.len() > 1 {
        let mut scored = Vec::new();
        for i in 0..clusters.len() {
            for j in i + 1..clusters.len() {
                scored.push((
                    i,
                    j,
                    cluster_distance(points, &d, &clusters[i], &clusters[j], linkage),
                ));
            }
        }
        let min = scored.iter().map(|s| s.2).fold(f64::INFINITY, f64::min);
        let tol = 1e-9 * (1.0 + min.abs());
        let (i, j, _) = *scored.iter().find(|s| s.2 <= min + tol).unwrap();
        let absorbed = clusters.remove(j);
        clusters[i].extend(absorbed);
        clusters[i].sort_unstable();
        clusters.sort_by_key(|c| c[0]);
        levels.push(labels_of(n, &clusters));
    }
    levels
}

fn labels_of(n: usize, clusters: &[Vec<usize>]) -> Vec<usize> {
    let mut owner = vec![0; n];
    for (c, members) in clusters.iter().enumerate() {
        for &m in members {
            owner[m] = c;
        }
    }
    first_appearance(&owner)
}

pub fn first_appearance(ids: &[usize]) -> Vec<usize> {
    let mut seen = HashMap::new();
    ids.iter()
        .map(|&id| {
            let next = seen.len();
            *seen.entry(id).or_insert(next)
        })
        .collect()
}

pub struct ApReference {
    pub labels: Vec<usize>,
    pub exemplars: Vec<usize>,
    pub converged: bool,
}

/// Responsibility/availability message passing written term by term from
/// the textbook definitions, O(n³) per iteration.
pub fn ap_reference(
    points: &[Vec<f64>],
    damping: f64,
    preference: Option<f64>,
    max_iter: usize,
    window: usize,
) -> ApReference {
    let n = points.len();
    let mut s = vec![vec![0.0; n]; n];
    let mut off = Vec::new();
    for i in 0..n {
        for k in 0..n {
            if i != k {
                s[i][k] = -points[i]
                    .iter()
                    .zip(&points[k])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>();
                off.push(s[i][k]);
            }
        }
    }
    off.sort_by(f64::total_cmp);
    let median = if off.len() % 2 == 1 {
        off[off.len() / 2]
    } else {
        (off[off.len() / 2 - 1] + off[off.len() / 2]) / 2.0
    };
    let pref = preference.unwrap_or(median);
    for (i, row) in s.iter_mut().enumerate() {
        row[i] = pref;
    }

    let mut r = vec![vec![0.0; n]; n];
    let mut a = vec![vec![0.0; n]; n];
    let mut exemplars: Vec<usize> = Vec::new();
    let mut stable = 0;
    let mut converged = false;
    for _ in 0..max_iter {
        for i in 0..n {
            for k in 0..n {
                let mut competitor = f64::NEG_INFINITY;
                for kk in 0..n {
                    if kk != k {
                        competitor = competitor.max(a[i][kk] + s[i][kk]);
                    }
                }
                r[i][k] = damping * r[i][k] + (1.0 - damping) * (s[i][k] - competitor);
            }
        }
        let r_now = r.clone();
        for i in 0..n {
            for k in 0..n {
                let fresh = if i == k {
                    (0..n)
                        .filter(|&ii| ii != k)
                        .map(|ii| r_now[ii][k].max(0.0))
                        .sum()
                } else {
                    let support: f64 = (0..n)
                        .filter(|&ii| ii != i && ii != k)
                        .map(|ii| r_now[ii][k].max(0.0))
                        .sum();
                    (r_now[k][k] + support).min(0.0)
                };
                a[i][k] = damping * a[i][k] + (1.0 - damping) * fresh;
            }
        }
        let current: Vec<usize> = (0..n).filter(|&k| a[k][k] + r[k][k] > 0.0).collect();
        if current == exemplars {
            stable += 1;
        } else {
            stable = 1;
            exemplars = current;
        }
        if stable >= window && !exemplars.is_empty() {
            converged = true;
            break;
        }
    }
    let assignment: Vec<usize> = (0..n)
        .map(|i| {
            if exemplars.contains(&i) {
                i
            } else {
                *exemplars
                    .iter()
                    .reduce(|best, k| if s[i][*k] > s[i][*best] { k } else { best })
                    .unwrap()
            }
        })
        .collect();
    ApReference {
        labels: first_appearance(&assignment),
        exemplars,
        converged,
    }
}

/// Spearman correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my) * (b - my)).sum();
    cov / (vx * vy).sqrt()
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            out[o] = rank;
        }
        i = j + 1;
    }
    out
}

/// Three well-separated 2-D blobs of `per_blob` points with jitter ≤ 0.1.
pub fn three_blobs(per_blob: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = [(0.0, 0.0), (100.0, 0.0), (0.0, 100.0)];
    let mut points = Vec::new();
    let mut blob = Vec::new();
    for (b, (cx, cy)) in centers.iter().enumerate() {
        for _ in 0..per_blob {
            points.push(vec![
                cx + rng.gen_range(-0.1..=0.1),
                cy + rng.gen_range(-0.1..=0.1),
            ]);
            blob.push(b);
        }
    }
    (points, blob)
}

pub struct Synthetic {
    pub dataset: Dataset,
    pub model: EmbeddingModel,
}

/// Two-sense target "bank" (40 contexts per sense) whose sense vocabularies
/// sit near `u` and `-u`, plus 20 noise words near directions orthogonal to
/// `u`. A second two-sense target "key" with its own vocabularies keeps
/// chi-square informative; its contexts carry the same noise words.
pub fn two_sense_fixture(seed: u64) -> Synthetic {
    const DIM: usize = 16;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let near = |axis: usize, sign: f32, rng: &mut ChaCha8Rng| -> Vec<f32> {
        let mut v: Vec<f32> = (0..DIM).map(|_| rng.gen_range(-0.05..0.05)).collect();
        v[axis] += sign * rng.gen_range(0.8..1.6);
        v
    };
    let mut entries: Vec<(String, Vec<f32>)> = Vec::new();
    let va: Vec<String> = (0..12).map(|i| format!("river{i}")).collect();
    let vb: Vec<String> = (0..12).map(|i| format!("money{i}")).collect();
    let vk: Vec<String> = (0..12).map(|i| format!("lock{i}")).collect();
    let vm: Vec<String> = (0..12).map(|i| format!("note{i}")).collect();
    let noise: Vec<String> = (0..20).map(|i| format!("noise{i}")).collect();
    for w in &va {
        entries.push((w.clone(), near(0, 1.0, &mut rng)));
    }
    for w in &vb {
        entries.push((w.clone(), near(0, -1.0, &mut rng)));
    }
    for w in &vk {
        entries.push((w.clone(), near(1, 1.0, &mut rng)));
    }
    for w in &vm {
        entries.push((w.clone(), near(1, -1.0, &mut rng)));
    }
    for (i, w) in noise.iter().enumerate() {
        entries.push((w.clone(), near(2 + i % (DIM - 2), 1.0, &mut rng)));
    }
    entries.push(("bank".into(), near(3, 1.0, &mut rng)));
    let model = EmbeddingModel::from_entries(DIM, entries).unwrap();

    let mut instances = Vec::new();
    let context = |target: &str, vocab: &[String], rng: &mut ChaCha8Rng| {
        let mut words: Vec<&str> = (0..5)
            .map(|_| vocab[rng.gen_range(0..vocab.len())].as_str())
            .collect();
        words.extend((0..2).map(|_| noise[rng.gen_range(0..noise.len())].as_str()));
        words.insert(rng.gen_range(0..words.len()), target);
        words.join(" ")
    };
    for i in 0..80 {
        let (sense, vocab) = if i % 2 == 0 {
            ("river", &va)
        } else {
            ("money", &vb)
        };
        let text = context("bank", vocab, &mut rng);
        instances.push(ContextInstance::new(
            format!("b{i:03}"),
            "bank",
            Some(sense),
            text,
        ));
    }
    for i in 0..40 {
        let (sense, vocab) = if i % 2 == 0 {
            ("door", &vk)
        } else {
            ("music", &vm)
        };
        let text = context("key", vocab, &mut rng);
        instances.push(ContextInstance::new(
            format!("k{i:03}"),
            "key",
            Some(sense),
            text,
        ));
    }
    Synthetic {
        dataset: Dataset::from_instances(instances).unwrap(),
        model,
    }
}

/// Random points with coordinates in [-1, 1].
pub fn random_points(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect()
}
