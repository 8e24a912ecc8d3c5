//! Data curation: clustering and ratio-controlled resampling.
//!
//! Two curation stages share this module. Feature-space k-means (greedy
//! spread seeding, then alternating assignment/mean updates) groups
//! queries so a bounded number per group can be kept — deduplication by
//! diversity. Stratified resampling then draws a fixed-size subset whose
//! category mix follows a target ratio, apportioned by the largest
//! remainder rule and capped by per-category availability.
//!
//! Everything here is deterministic for a given seed.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::data::Category;

/// Default number of clusters for query deduplication.
pub const DEFAULT_K: usize = 100;

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("k must be at least 1")]
    InvalidK,
    #[error("need at least one iteration")]
    InvalidMaxIters,
    #[error("{points} points cannot fill {k} clusters")]
    TooFewPoints { points: usize, k: usize },
    #[error("point {index} has dimension {got}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("point {index} has a non-finite coordinate")]
    NonFinitePoint { index: usize },
    #[error("ratio spec entry {entry:?} is not KEY=WEIGHT")]
    RatioParse { entry: String },
    #[error("unknown category {name:?} in ratio spec")]
    RatioCategory { name: String },
    #[error("ratio weight for {category} must be positive and finite")]
    RatioWeight { category: Category },
    #[error("duplicate category {category} in ratio spec")]
    RatioDuplicate { category: Category },
    #[error("ratio spec is empty")]
    RatioEmpty,
    #[error("dataset contains category {category} but the ratio spec gives it no weight")]
    MissingWeight { category: Category },
    #[error("requested {total} items but only {available} are available")]
    TotalExceedsSupply { total: usize, available: usize },
}

/// A fitted clustering: centers, per-point assignments, the final
/// within-cluster sum of squared distances, and that quantity after every
/// assignment pass (non-increasing).
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub centers: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    pub inertia: f64,
    pub inertia_trace: Vec<f64>,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest center, lowest index on exact ties.
fn nearest(point: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = dist2(point, &centers[0]);
    for (c, center) in centers.iter().enumerate().skip(1) {
        let d = dist2(point, center);
        if d < best_d {
            best = c;
            best_d = d;
        }
    }
    (best, best_d)
}

/// Greedy spread seeding: the first center is a uniform draw, each later
/// one is drawn with probability proportional to the squared distance from
/// the centers picked so far (a uniform draw if every point already
/// coincides with a center).
fn seed_centers(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centers = Vec::with_capacity(k);
    let first = rng.random_range(0..n);
    centers.push(points[first].clone());
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let draw = rng.random::<f64>() * total;
            let mut cumulative = 0.0;
            let mut pick = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                cumulative += d;
                if draw < cumulative {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centers.push(points[pick].clone());
        for (i, p) in points.iter().enumerate() {
            let d = dist2(p, centers.last().unwrap());
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }
    centers
}

/// K-means over raw feature vectors. Runs until assignments stop changing
/// or `max_iters` assignment passes, whichever comes first. A cluster left
/// empty by an update is re-seeded to the point currently farthest from
/// its own center (each such point used at most once per pass, lowest
/// cluster index first).
pub fn kmeans(
    points: &[Vec<f64>],
    k: usize,
    max_iters: usize,
    seed: u64,
) -> Result<ClusterModel, ClusterError> {
    if k == 0 {
        return Err(ClusterError::InvalidK);
    }
    if max_iters == 0 {
        return Err(ClusterError::InvalidMaxIters);
    }
    if points.len() < k {
        return Err(ClusterError::TooFewPoints {
            points: points.len(),
            k,
        });
    }
    let dim = points[0].len();
    for (index, p) in points.iter().enumerate() {
        if p.len() != dim {
            return Err(ClusterError::DimensionMismatch {
                index,
                expected: dim,
                got: p.len(),
            });
        }
        if p.iter().any(|x| !x.is_finite()) {
            return Err(ClusterError::NonFinitePoint { index });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = seed_centers(points, k, &mut rng);
    let n = points.len();
    let mut assignments: Vec<usize> = vec![usize::MAX; n];
    let mut trace = Vec::new();

    for _ in 0..max_iters {
        let mut dists = vec![0.0; n];
        let mut new_assignments = vec![0usize; n];
        for (i, p) in points.iter().enumerate() {
            let (c, d) = nearest(p, &centers);
            new_assignments[i] = c;
            dists[i] = d;
        }
        trace.push(dists.iter().sum());
        let converged = new_assignments == assignments;
        assignments = new_assignments;
        if converged {
            break;
        }

        // Mean update.
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &c) in points.iter().zip(&assignments) {
            counts[c] += 1;
            for (s, x) in sums[c].iter_mut().zip(p) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for s in &mut sums[c] {
                    *s /= counts[c] as f64;
                }
                centers[c] = std::mem::take(&mut sums[c]);
            }
        }
        // Re-seed empty clusters from the farthest points.
        for c in 0..k {
            if counts[c] == 0 {
                let mut far = 0;
                for i in 1..n {
                    if dists[i] > dists[far] {
                        far = i;
                    }
                }
                centers[c] = points[far].clone();
                dists[far] = -1.0;
            }
        }
    }

    let inertia = *trace.last().expect("at least one assignment pass");
    Ok(ClusterModel {
        centers,
        assignments,
        inertia,
        inertia_trace: trace,
    })
}

/// Draws up to `per_cluster` member indices from every cluster (all of a
/// cluster when it is smaller), returned in ascending order. One shared
/// generator, clusters processed in index order, so the draw is a pure
/// function of `(model, per_cluster, seed)`.
pub fn cluster_sample(model: &ClusterModel, per_cluster: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = model.centers.len();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &c) in model.assignments.iter().enumerate() {
        members[c].push(i);
    }
    let mut picked = Vec::new();
    for mut cluster in members {
        cluster.shuffle(&mut rng);
        cluster.truncate(per_cluster);
        picked.extend(cluster);
    }
    picked.sort_unstable();
    picked
}

/// A target category mix, e.g. `Long=4,Short=5,MCQ=1`. Entry order is
/// preserved and meaningful: it fixes the order of deterministic draws.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioSpec {
    entries: Vec<(Category, f64)>,
}

impl RatioSpec {
    pub fn new(entries: Vec<(Category, f64)>) -> Result<Self, ClusterError> {
        if entries.is_empty() {
            return Err(ClusterError::RatioEmpty);
        }
        let mut seen = Vec::new();
        for &(category, weight) in &entries {
            if !(weight.is_finite() && weight > 0.0) {
                return Err(ClusterError::RatioWeight { category });
            }
            if seen.contains(&category) {
                return Err(ClusterError::RatioDuplicate { category });
            }
            seen.push(category);
        }
        Ok(RatioSpec { entries })
    }

    pub fn entries(&self) -> &[(Category, f64)] {
        &self.entries
    }

    pub fn weight(&self, category: Category) -> Option<f64> {
        self.entries
            .iter()
            .find(|(c, _)| *c == category)
            .map(|(_, w)| *w)
    }
}

impl std::str::FromStr for RatioSpec {
    type Err = ClusterError;

    fn from_str(s: &str) -> Result<Self, ClusterError> {
        let mut entries = Vec::new();
        for part in s.split(',') {
            let part = part.trim();
            let (name, weight) = part.split_once('=').ok_or_else(|| ClusterError::RatioParse {
                entry: part.to_string(),
            })?;
            let category: Category =
                name.trim()
                    .parse()
                    .map_err(|_| ClusterError::RatioCategory {
                        name: name.trim().to_string(),
                    })?;
            let weight: f64 = weight
                .trim()
                .parse()
                .map_err(|_| ClusterError::RatioParse {
                    entry: part.to_string(),
                })?;
            entries.push((category, weight));
        }
        RatioSpec::new(entries)
    }
}

/// Largest-remainder apportionment of `total` into integer counts
/// proportional to `weights`. Leftover units go to the largest fractional
/// remainders; exact ties prefer the larger weight, then the lower index.
pub fn largest_remainder_apportion(weights: &[f64], total: usize) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    assert!(
        !weights.is_empty() && sum > 0.0 && weights.iter().all(|w| w.is_finite() && *w >= 0.0),
        "weights must be non-negative, finite, and not all zero"
    );
    let quotas: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let frac_a = quotas[a] - quotas[a].floor();
        let frac_b = quotas[b] - quotas[b].floor();
        frac_b
            .partial_cmp(&frac_a)
            .unwrap()
            .then(weights[b].partial_cmp(&weights[a]).unwrap())
            .then(a.cmp(&b))
    });
    for &i in order.iter().take(total - assigned) {
        counts[i] += 1;
    }
    counts
}

/// Draws `total` item indices whose category mix follows `spec` as closely
/// as availability allows: apportion, cap any category at its supply, then
/// re-apportion the shortfall among uncapped categories until everything
/// is placed. Within a category the picks are a seeded shuffle; the result
/// is ascending. Every category present in `categories` must carry a
/// weight, and `total` may not exceed the number of items.
pub fn stratified_resample(
    categories: &[Category],
    spec: &RatioSpec,
    total: usize,
    seed: u64,
) -> Result<Vec<usize>, ClusterError> {
    let mut by_category: HashMap<Category, Vec<usize>> = HashMap::new();
    for (i, &c) in categories.iter().enumerate() {
        by_category.entry(c).or_default().push(i);
    }
    for &c in by_category.keys() {
        if spec.weight(c).is_none() {
            return Err(ClusterError::MissingWeight { category: c });
        }
    }
    if total > categories.len() {
        return Err(ClusterError::TotalExceedsSupply {
            total,
            available: categories.len(),
        });
    }

    // Iteratively apportion, capping categories that run out of items.
    let empty: Vec<usize> = Vec::new();
    let mut counts: HashMap<Category, usize> = HashMap::new();
    let mut active: Vec<(Category, f64, usize)> = spec
        .entries()
        .iter()
        .map(|&(c, w)| (c, w, by_category.get(&c).unwrap_or(&empty).len()))
        .collect();
    let mut remaining = total;
    while remaining > 0 {
        let weights: Vec<f64> = active.iter().map(|&(_, w, _)| w).collect();
        let quotas = largest_remainder_apportion(&weights, remaining);
        let mut capped = Vec::new();
        for (&(category, _, available), &quota) in active.iter().zip(&quotas) {
            if quota >= available {
                counts.insert(category, available);
                remaining -= available;
                capped.push(category);
            }
        }
        if capped.is_empty() {
            for (&(category, _, _), &quota) in active.iter().zip(&quotas) {
                *counts.entry(category).or_insert(0) += quota;
            }
            remaining = 0;
        } else {
            active.retain(|(c, _, _)| !capped.contains(c));
        }
    }

    // Seeded within-category draws, in spec entry order.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = Vec::with_capacity(total);
    for &(category, _) in spec.entries() {
        let want = counts.get(&category).copied().unwrap_or(0);
        let mut pool = by_category.get(&category).cloned().unwrap_or_default();
        pool.shuffle(&mut rng);
        pool.truncate(want);
        picked.extend(pool);
    }
    picked.sort_unstable();
    Ok(picked)
}
