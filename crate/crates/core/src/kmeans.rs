//! Seeded k-means with k-means++ initialization and restarts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansConfig {
    pub k: usize,
    pub restarts: usize,
    pub max_iter: usize,
    /// Stop once the relative inertia decrease falls below this.
    pub tol: f64,
    pub seed: u64,
}

impl KMeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            restarts: 10,
            max_iter: 300,
            tol: 1e-6,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    pub centers: Vec<Vec<f64>>,
    pub inertia: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest center, lowest index on ties.
fn nearest(p: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.iter().enumerate() {
        let d = sq_dist(p, center);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus_init(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centers = vec![points[rng.random_range(0..n)].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                if d <= 0.0 {
                    continue;
                }
                acc += d;
                if acc > target {
                    pick = Some(i);
                    break;
                }
            }
            pick.unwrap_or_else(|| d2.iter().rposition(|&d| d > 0.0).unwrap())
        } else {
            rng.random_range(0..n)
        };
        centers.push(points[pick].clone());
        let last = centers.last().unwrap();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, last));
        }
    }
    centers
}

fn lloyd(points: &[Vec<f64>], mut centers: Vec<Vec<f64>>, cfg: &KMeansConfig) -> KMeansResult {
    let dim = points[0].len();
    let k = centers.len();
    let mut labels = vec![0usize; points.len()];
    let mut prev_inertia = f64::INFINITY;
    for _ in 0..cfg.max_iter {
        let mut inertia = 0.0;
        for (label, p) in labels.iter_mut().zip(points) {
            let (c, d) = nearest(p, &centers);
            *label = c;
            inertia += d;
        }
        if prev_inertia.is_finite() && prev_inertia - inertia <= cfg.tol * prev_inertia {
            break;
        }
        prev_inertia = inertia;

        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (&l, p) in labels.iter().zip(points) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            // Empty clusters keep their previous center.
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
    }
    let mut final_inertia = 0.0;
    for (label, p) in labels.iter_mut().zip(points) {
        let (c, d) = nearest(p, &centers);
        *label = c;
        final_inertia += d;
    }
    KMeansResult {
        labels,
        centers,
        inertia: final_inertia,
    }
}

/// Best-inertia clustering over `cfg.restarts` k-means++ initializations.
/// `k` is clamped to the number of points.
pub fn kmeans(points: &[Vec<f64>], cfg: &KMeansConfig) -> KMeansResult {
    assert!(!points.is_empty(), "k-means needs at least one point");
    let k = cfg.k.clamp(1, points.len());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<KMeansResult> = None;
    for _ in 0..cfg.restarts.max(1) {
        let init = plus_plus_init(points, k, &mut rng);
        let run = lloyd(points, init, cfg);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    best.unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separates_obvious_blobs() {
        let mut pts = Vec::new();
        for i in 0..30 {
            let o = (i % 3) as f64 * 10.0;
            pts.push(vec![o + (i as f64 * 0.01), o - (i as f64 * 0.02)]);
        }
        let r = kmeans(&pts, &KMeansConfig::new(3, 1));
        for i in 0..30 {
            for j in 0..30 {
                assert_eq!(r.labels[i] == r.labels[j], i % 3 == j % 3);
            }
        }
    }

    #[test]
    fn seeded_runs_are_identical() {
        let pts: Vec<Vec<f64>> = (0..50)
            .map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 1.1).cos()])
            .collect();
        let a = kmeans(&pts, &KMeansConfig::new(4, 9));
        let b = kmeans(&pts, &KMeansConfig::new(4, 9));
        assert_eq!(a, b);
    }

    #[test]
    fn duplicate_points_do_not_break_seeding() {
        let pts = vec![vec![1.0, 1.0]; 5];
        let r = kmeans(&pts, &KMeansConfig::new(3, 0));
        assert_eq!(r.inertia, 0.0);
        assert_eq!(r.labels.len(), 5);
    }
}
