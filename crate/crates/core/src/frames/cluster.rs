//! Lloyd K-means with seeded k-means++ seeding, and elbow selection.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 100;
/// Fresh k-means++ starts tried next to the warm start for each K.
const FRESH_STARTS: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub wcss: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// k-means++ step: next center drawn with probability proportional to D^2.
fn next_center(points: &[Vec<f64>], centroids: &[Vec<f64>], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let d2: Vec<f64> = points.iter().map(|p| nearest(p, centroids).1).collect();
    let total: f64 = d2.iter().sum();
    if total <= 0.0 {
        return points[rng.gen_range(0..points.len())].clone();
    }
    let mut target = rng.gen::<f64>() * total;
    for (p, d) in points.iter().zip(&d2) {
        if *d > 0.0 && target < *d {
            return p.clone();
        }
        target -= d;
    }
    // Rounding left `target` past the end: take the last positive-weight point.
    let last = d2.iter().rposition(|d| *d > 0.0).expect("total > 0");
    points[last].clone()
}

/// Lloyd iterations from the given centers. Empty clusters keep their center.
fn lloyd(points: &[Vec<f64>], mut centroids: Vec<Vec<f64>>) -> ClusterModel {
    let dim = points[0].len();
    let mut labels: Vec<usize> = points.iter().map(|p| nearest(p, &centroids).0).collect();
    for _ in 0..MAX_ITERATIONS {
        let mut sums = vec![vec![0.0; dim]; centroids.len()];
        let mut counts = vec![0usize; centroids.len()];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, x) in sums[l].iter_mut().zip(p) {
                *s += x;
            }
        }
        for ((c, s), &n) in centroids.iter_mut().zip(sums).zip(&counts) {
            if n > 0 {
                *c = s.into_iter().map(|v| v / n as f64).collect();
            }
        }
        let next: Vec<usize> = points.iter().map(|p| nearest(p, &centroids).0).collect();
        if next == labels {
            break;
        }
        labels = next;
    }
    let wcss = points
        .iter()
        .zip(&labels)
        .map(|(p, &l)| sq_dist(p, &centroids[l]))
        .sum();
    ClusterModel {
        k: centroids.len(),
        centroids,
        labels,
        wcss,
    }
}

fn check(points: &[Vec<f64>], k: usize) -> Result<()> {
    if points.is_empty() {
        return Err(Error::invalid("cannot cluster zero points"));
    }
    if k == 0 || k > points.len() {
        return Err(Error::invalid(format!("K={k} outside [1, {}]", points.len())));
    }
    let d = points[0].len();
    if points.iter().any(|p| p.len() != d) {
        return Err(Error::invalid("points have unequal dimensions"));
    }
    Ok(())
}

/// Models for K = 1..=kmax. Each K starts from the K-1 solution plus one
/// k-means++ center and competes with fresh seedings; keeping the best makes
/// WCSS non-increasing in K.
pub fn kmeans_path(points: &[Vec<f64>], kmax: usize, seed: u64) -> Result<Vec<ClusterModel>> {
    check(points, kmax)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut path: Vec<ClusterModel> = Vec::with_capacity(kmax);
    for k in 1..=kmax {
        let mut best = match path.last() {
            Some(prev) => {
                let mut centers = prev.centroids.clone();
                centers.push(next_center(points, &centers, &mut rng));
                lloyd(points, centers)
            }
            None => lloyd(points, vec![points[rng.gen_range(0..points.len())].clone()]),
        };
        let fresh = if k == 1 { 0 } else { FRESH_STARTS };
        for _ in 0..fresh {
            let mut centers = vec![points[rng.gen_range(0..points.len())].clone()];
            while centers.len() < k {
                centers.push(next_center(points, &centers, &mut rng));
            }
            let candidate = lloyd(points, centers);
            if candidate.wcss < best.wcss {
                best = candidate;
            }
        }
        path.push(best);
    }
    Ok(path)
}

pub fn fit_kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Result<ClusterModel> {
    check(points, k)?;
    Ok(kmeans_path(points, k, seed)?.pop().expect("k >= 1"))
}

/// K maximizing the second difference `wcss[K-1] - 2 wcss[K] + wcss[K+1]`
/// over K in [2, Kmax-1], smaller K on ties; 1 when fewer than 3 values.
/// `wcss[0]` is the value for K = 1.
pub fn elbow_k(wcss: &[f64]) -> usize {
    if wcss.len() < 3 {
        return 1;
    }
    let mut best = (2, f64::NEG_INFINITY);
    for k in 2..wcss.len() {
        let i = k - 1;
        let d2 = wcss[i - 1] - 2.0 * wcss[i] + wcss[i + 1];
        if d2 > best.1 {
            best = (k, d2);
        }
    }
    best.0
}
