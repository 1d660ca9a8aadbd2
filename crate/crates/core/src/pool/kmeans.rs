//! Spherical k-means on unit vectors with k-means++ seeding.
//!
//! Distance is the cosine distance 1 - x'c. For a fixed assignment the
//! objective-minimizing centroid is the renormalized mean of the assigned
//! points, so the objective is non-increasing across Lloyd iterations.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::linalg;

pub(crate) struct KmeansResult {
    pub centroids: Array2<f64>,
    /// Objective after each assignment phase, for monotonicity checks.
    pub objective_trace: Vec<f64>,
}

fn cosine_distance(a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>) -> f64 {
    (1.0 - linalg::dot(a, b)).max(0.0)
}

/// k-means++ seeding: the first centroid is uniform, each next one is drawn
/// with probability proportional to the squared cosine distance to the
/// nearest centroid chosen so far.
fn seed_centroids(data: &Array2<f64>, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = data.nrows();
    let mut chosen = Vec::with_capacity(k);
    chosen.push(rng.random_range(0..n));
    let mut nearest = vec![f64::INFINITY; n];
    while chosen.len() < k {
        let last = *chosen.last().unwrap();
        for i in 0..n {
            let d = cosine_distance(data.row(i), data.row(last));
            if d < nearest[i] {
                nearest[i] = d;
            }
        }
        let weights: Vec<f64> = nearest.iter().map(|d| d * d).collect();
        let total: f64 = weights.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut idx = n - 1;
            for (i, w) in weights.iter().enumerate() {
                if target < *w {
                    idx = i;
                    break;
                }
                target -= w;
            }
            idx
        } else {
            // All remaining mass is on already-chosen duplicates.
            rng.random_range(0..n)
        };
        chosen.push(pick);
    }
    chosen
}

pub(crate) fn spherical_kmeans(
    data: &Array2<f64>,
    k: usize,
    max_iters: usize,
    rng: &mut ChaCha8Rng,
) -> KmeansResult {
    let n = data.nrows();
    let d = data.ncols();
    assert!(n >= k && k >= 1, "need at least k points, got {n} for k={k}");

    let seeds = seed_centroids(data, k, rng);
    let mut centroids = Array2::zeros((k, d));
    for (c, &i) in seeds.iter().enumerate() {
        centroids.row_mut(c).assign(&data.row(i));
    }

    let mut assignment = vec![usize::MAX; n];
    let mut objective_trace = Vec::new();

    for _ in 0..max_iters {
        // Assignment phase, ties to the lowest centroid index.
        let mut changed = false;
        let mut objective = 0.0;
        for i in 0..n {
            let mut best_k = 0;
            let mut best_d = f64::INFINITY;
            for c in 0..k {
                let dist = cosine_distance(data.row(i), centroids.row(c));
                if dist < best_d {
                    best_d = dist;
                    best_k = c;
                }
            }
            objective += best_d;
            if assignment[i] != best_k {
                assignment[i] = best_k;
                changed = true;
            }
        }
        objective_trace.push(objective);
        if !changed {
            break;
        }

        // Update phase: renormalized means.
        let mut sums = Array2::<f64>::zeros((k, d));
        let mut counts = vec![0usize; k];
        for i in 0..n {
            let c = assignment[i];
            counts[c] += 1;
            let mut row = sums.row_mut(c);
            row += &data.row(i);
        }
        for c in 0..k {
            if counts[c] == 0 {
                // Re-seed an empty cluster on the point farthest from its
                // current centroid; it serves nobody, so the objective
                // cannot increase.
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = cosine_distance(data.row(a), centroids.row(assignment[a]));
                        let db = cosine_distance(data.row(b), centroids.row(assignment[b]));
                        da.partial_cmp(&db).unwrap()
                    })
                    .unwrap();
                centroids.row_mut(c).assign(&data.row(far));
                continue;
            }
            let mut mean: Array1<f64> = sums.row(c).to_owned() / counts[c] as f64;
            let norm = linalg::norm(mean.view());
            if norm > 1e-12 {
                mean.mapv_inplace(|x| x / norm);
                centroids.row_mut(c).assign(&mean);
            }
            // A zero mean (antipodal points cancelling) keeps the previous
            // centroid.
        }
    }

    KmeansResult {
        centroids,
        objective_trace,
    }
}
