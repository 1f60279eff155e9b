//! Seeded k-means with k-means++ seeding, and silhouette scores.

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_RESTARTS: usize = 20;
const MAX_ITER: usize = 300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeans {
    pub centroids: Array2<f64>,
    pub assignment: Vec<usize>,
    /// Sum of squared distances to the assigned centroid.
    pub inertia: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn rows(x: ArrayView2<f64>) -> Vec<Vec<f64>> {
    x.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    centroids
        .iter()
        .enumerate()
        .map(|(c, m)| (c, sq_dist(p, m)))
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
}

/// One Lloyd run from k-means++ seeding.
pub fn kmeans_single<R: Rng>(x: ArrayView2<f64>, k: usize, rng: &mut R) -> Result<KMeans> {
    let n = x.nrows();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("k = {k} must be in 1..={n}")));
    }
    let pts = rows(x);
    let mut centroids = vec![pts[rng.random_range(0..n)].clone()];
    let mut d2: Vec<f64> = pts.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centroids.push(pts[next].clone());
        for (d, p) in d2.iter_mut().zip(&pts) {
            *d = d.min(sq_dist(p, &centroids[centroids.len() - 1]));
        }
    }
    let mut assignment = vec![usize::MAX; n];
    for _ in 0..MAX_ITER {
        let mut changed = false;
        for (a, p) in assignment.iter_mut().zip(&pts) {
            let (c, _) = nearest(p, &centroids);
            if *a != c {
                *a = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let dim = x.ncols();
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (&a, p) in assignment.iter().zip(&pts) {
            counts[a] += 1;
            sums[a].iter_mut().zip(p).for_each(|(s, v)| *s += v);
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            } else {
                // Re-seed an empty cluster at the worst-served point.
                let far = (0..n)
                    .max_by(|&i, &j| {
                        sq_dist(&pts[i], &centroids[assignment[i]])
                            .total_cmp(&sq_dist(&pts[j], &centroids[assignment[j]]))
                            .then(j.cmp(&i))
                    })
                    .expect("non-empty");
                centroids[c] = pts[far].clone();
            }
        }
    }
    let inertia = assignment
        .iter()
        .zip(&pts)
        .map(|(&a, p)| sq_dist(p, &centroids[a]))
        .sum();
    let dim = x.ncols();
    Ok(KMeans {
        centroids: Array2::from_shape_fn((k, dim), |(c, j)| centroids[c][j]),
        assignment,
        inertia,
    })
}

/// Seed of restart `r`.
pub fn restart_rng(seed: u64, r: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(r as u64);
    rng
}

/// Best-inertia result over `restarts` seeded runs; ties keep the earliest.
pub fn kmeans(x: ArrayView2<f64>, k: usize, restarts: usize, seed: u64) -> Result<KMeans> {
    let runs: Vec<KMeans> = (0..restarts.max(1))
        .into_par_iter()
        .map(|r| kmeans_single(x, k, &mut restart_rng(seed, r)))
        .collect::<Result<_>>()?;
    Ok(runs
        .into_iter()
        .reduce(|best, run| if run.inertia < best.inertia { run } else { best })
        .expect("at least one restart"))
}

/// Mean silhouette coefficient. Points in singleton clusters score 0; fewer
/// than two clusters gives 0.
pub fn silhouette(x: ArrayView2<f64>, labels: &[usize]) -> f64 {
    let n = x.nrows();
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    labels.iter().for_each(|&l| sizes[l] += 1);
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return 0.0;
    }
    let pts = rows(x);
    // Collected before summing so the result does not depend on the thread count.
    let scores: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let own = labels[i];
            if sizes[own] <= 1 {
                return 0.0;
            }
            let mut sums = vec![0.0; k];
            for j in 0..n {
                if j != i {
                    sums[labels[j]] += sq_dist(&pts[i], &pts[j]).sqrt();
                }
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let b = (0..k)
                .filter(|&c| c != own && sizes[c] > 0)
                .map(|c| sums[c] / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            let m = a.max(b);
            if m > 0.0 {
                (b - a) / m
            } else {
                0.0
            }
        })
        .collect();
    scores.iter().sum::<f64>() / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn blobs() -> Array2<f64> {
        array![
            [0.0, 0.0],
            [0.1, 0.0],
            [0.0, 0.1],
            [10.0, 10.0],
            [10.1, 10.0],
            [10.0, 10.1],
            [-10.0, 10.0],
            [-10.1, 10.0]
        ]
    }

    #[test]
    fn separated_blobs_are_recovered() {
        let x = blobs();
        let km = kmeans(x.view(), 3, DEFAULT_RESTARTS, 1).unwrap();
        let a = &km.assignment;
        assert!(a[0] == a[1] && a[1] == a[2]);
        assert!(a[3] == a[4] && a[4] == a[5]);
        assert!(a[6] == a[7]);
        assert!(a[0] != a[3] && a[3] != a[6] && a[0] != a[6]);
        assert!(silhouette(x.view(), a) > 0.9);
    }

    #[test]
    fn best_of_restarts_is_no_worse_than_any_single() {
        let x = Array2::from_shape_fn((40, 2), |(i, j)| ((i * 7 + j * 13) % 11) as f64);
        let best = kmeans(x.view(), 4, 20, 5).unwrap();
        for r in 0..20 {
            let one = kmeans_single(x.view(), 4, &mut restart_rng(5, r)).unwrap();
            assert!(best.inertia <= one.inertia);
        }
    }

    #[test]
    fn silhouette_hand_example() {
        // points 0, 1 | 4: a(0)=1, b(0)=4 -> 0.75; a(1)=1, b(1)=3 -> 2/3; singleton -> 0
        let x = array![[0.0], [1.0], [4.0]];
        let s = silhouette(x.view(), &[0, 0, 1]);
        assert!((s - (0.75 + 2.0 / 3.0) / 3.0).abs() < 1e-12);
        assert_eq!(silhouette(x.view(), &[0, 0, 0]), 0.0);
    }

    #[test]
    fn k_out_of_range() {
        let x = blobs();
        assert!(kmeans(x.view(), 9, 2, 0).is_err());
        assert!(kmeans(x.view(), 0, 2, 0).is_err());
    }
}
