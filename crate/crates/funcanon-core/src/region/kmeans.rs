//! Lloyd's algorithm with k-means++ seeding. Deterministic for a fixed
//! (inputs, k, seed) triple; inertia is recorded after every update step so
//! callers can check it never increases.

use super::{RegionError, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const MAX_ITERATIONS: usize = 300;

#[derive(Debug, Clone)]
pub struct KmeansOutcome {
    pub assignment: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
    /// Inertia after each centroid update, in iteration order.
    pub inertia_trace: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn means(features: &[Vec<f64>], assignment: &[usize], k: usize) -> Vec<Vec<f64>> {
    let dim = features[0].len();
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (f, &a) in features.iter().zip(assignment) {
        counts[a] += 1;
        for (s, v) in sums[a].iter_mut().zip(f) {
            *s += v;
        }
    }
    for (sum, &count) in sums.iter_mut().zip(&counts) {
        if count > 0 {
            for s in sum.iter_mut() {
                *s /= count as f64;
            }
        }
    }
    sums
}

/// Sum of squared distances from each point to the mean of its assigned
/// cluster. Shared by the solver and by brute-force enumeration in tests so
/// both sides accumulate in the same order.
pub fn partition_inertia(features: &[Vec<f64>], assignment: &[usize], k: usize) -> f64 {
    let centroids = means(features, assignment, k);
    features
        .iter()
        .zip(assignment)
        .map(|(f, &a)| sq_dist(f, &centroids[a]))
        .sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = sq_dist(point, &centroids[0]);
    for (j, c) in centroids.iter().enumerate().skip(1) {
        let d = sq_dist(point, c);
        if d < best_d {
            best = j;
            best_d = d;
        }
    }
    best
}

/// Assign each point to its nearest centroid, then repair empty clusters by
/// transferring, for each empty cluster in id order, the point farthest from
/// that cluster's centroid (drawn only from clusters that keep >= 1 point).
fn assign(features: &[Vec<f64>], centroids: &[Vec<f64>], k: usize) -> Vec<usize> {
    let mut assignment: Vec<usize> = features.iter().map(|f| nearest(f, centroids)).collect();
    loop {
        let mut counts = vec![0usize; k];
        for &a in &assignment {
            counts[a] += 1;
        }
        let Some(empty) = (0..k).find(|&j| counts[j] == 0) else {
            return assignment;
        };
        let mut donor: Option<(f64, usize)> = None;
        for (i, f) in features.iter().enumerate() {
            if counts[assignment[i]] < 2 {
                continue;
            }
            let d = sq_dist(f, &centroids[empty]);
            if donor.is_none_or(|(best, _)| d > best) {
                donor = Some((d, i));
            }
        }
        let (_, idx) = donor.expect("k <= n leaves a cluster with at least two points");
        assignment[idx] = empty;
    }
}

fn seed_centroids(features: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = features.len();
    let mut centroids = Vec::with_capacity(k);
    centroids.push(features[rng.random_range(0..n)].clone());
    let mut d2: Vec<f64> = features
        .iter()
        .map(|f| sq_dist(f, &centroids[0]))
        .collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut cum = 0.0;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                cum += w;
                if cum > target {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centroids.push(features[next].clone());
        for (i, f) in features.iter().enumerate() {
            let d = sq_dist(f, centroids.last().unwrap());
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }
    centroids
}

pub fn kmeans(features: &[Vec<f64>], k: usize, seed: u64) -> Result<KmeansOutcome> {
    let n = features.len();
    if n == 0 {
        return Err(RegionError::EmptyInput);
    }
    if k == 0 {
        return Err(RegionError::ZeroClusters);
    }
    if k > n {
        return Err(RegionError::TooManyClusters { k, n });
    }
    let dim = features[0].len();
    if features.iter().any(|f| f.len() != dim) {
        return Err(RegionError::DimMismatch);
    }
    if features.iter().flatten().any(|v| !v.is_finite()) {
        return Err(RegionError::NonFinite);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_centroids(features, k, &mut rng);
    let mut assignment = assign(features, &centroids, k);
    let mut inertia_trace = Vec::new();
    for iter in 0..MAX_ITERATIONS {
        centroids = means(features, &assignment, k);
        inertia_trace.push(partition_inertia(features, &assignment, k));
        if iter + 1 == MAX_ITERATIONS {
            break;
        }
        let next = assign(features, &centroids, k);
        if next == assignment {
            break;
        }
        assignment = next;
    }
    let inertia = *inertia_trace.last().unwrap();
    Ok(KmeansOutcome {
        assignment,
        centroids,
        inertia,
        inertia_trace,
    })
}
