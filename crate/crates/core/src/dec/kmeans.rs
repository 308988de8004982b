use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::RngStream;

pub const DEFAULT_MAX_ITER: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub centers: Array2<f64>,
    pub assignments: Vec<usize>,
    pub iterations: usize,
    /// Sum of squared distances to assigned centres.
    pub inertia: f64,
}

pub(crate) fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centre, lowest index on ties.
fn nearest(point: ArrayView1<f64>, centers: &Array2<f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centers.rows().into_iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn plus_plus_seed(data: ArrayView2<f64>, k: usize, rng: &mut RngStream) -> Array2<f64> {
    let n = data.nrows();
    let mut centers = Array2::zeros((k, data.ncols()));
    let first = rng.random_range(0..n);
    centers.row_mut(0).assign(&data.row(first));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(data.row(i), centers.row(0))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 && target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            // rounding can run past the end; fall back to the last positive weight
            if d2[chosen] == 0.0 {
                chosen = d2.iter().rposition(|&w| w > 0.0).unwrap_or(chosen);
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.row_mut(c).assign(&data.row(pick));
        for (i, slot) in d2.iter_mut().enumerate() {
            *slot = slot.min(sq_dist(data.row(i), centers.row(c)));
        }
    }
    centers
}

/// Lloyd's algorithm with k-means++ seeding.
///
/// Stops when assignments no longer change or after `max_iter` rounds. A
/// centre that loses all its points is moved onto the point lying farthest
/// from its own assigned centre.
pub fn kmeans(data: ArrayView2<f64>, k: usize, max_iter: usize, rng: &mut RngStream) -> Result<KMeansResult> {
    let (n, d) = data.dim();
    if k == 0 || k > n {
        return Err(Error::Config(format!("k-means needs 1 ≤ k ≤ n, got k = {k}, n = {n}")));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("k-means input contains non-finite values".into()));
    }
    let mut centers = plus_plus_seed(data, k, rng);
    let mut assignments = vec![usize::MAX; n];
    let mut dists = vec![0.0; n];
    let mut iterations = 0;

    for _ in 0..max_iter.max(1) {
        iterations += 1;
        let mut changed = false;
        for i in 0..n {
            let (j, dist) = nearest(data.row(i), &centers);
            if assignments[i] != j {
                assignments[i] = j;
                changed = true;
            }
            dists[i] = dist;
        }
        if !changed {
            break;
        }
        let mut sums = Array2::<f64>::zeros((k, d));
        let mut counts = vec![0usize; k];
        for (i, &j) in assignments.iter().enumerate() {
            sums.row_mut(j).scaled_add(1.0, &data.row(i));
            counts[j] += 1;
        }
        for j in 0..k {
            if counts[j] > 0 {
                centers.row_mut(j).assign(&(&sums.row(j) / counts[j] as f64));
            } else {
                let far = (0..n)
                    .max_by(|&a, &b| dists[a].partial_cmp(&dists[b]).unwrap().then(b.cmp(&a)))
                    .expect("n ≥ 1");
                centers.row_mut(j).assign(&data.row(far));
                dists[far] = 0.0;
            }
        }
    }
    let inertia = (0..n).map(|i| sq_dist(data.row(i), centers.row(assignments[i]))).sum();
    Ok(KMeansResult {
        centers,
        assignments,
        iterations,
        inertia,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::adjusted_rand_index;
    use ndarray::array;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn single_cluster_is_global_mean() {
        let data = array![[0.0, 1.0], [2.0, 3.0], [4.0, -1.0]];
        let r = kmeans(data.view(), 1, 300, &mut RngStream::new(1, "km")).unwrap();
        assert!((r.centers[[0, 0]] - 2.0).abs() < 1e-12 && (r.centers[[0, 1]] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn recovers_separated_gaussians() {
        let mut rng = RngStream::new(2, "blobs");
        let noise = Normal::new(0.0, 0.3).unwrap();
        let means = [[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]];
        let truth: Vec<usize> = (0..90).map(|i| i % 3).collect();
        let data = Array2::from_shape_fn((90, 2), |(i, j)| means[truth[i]][j] + noise.sample(&mut rng));
        let r = kmeans(data.view(), 3, 300, &mut RngStream::new(3, "km")).unwrap();
        assert_eq!(adjusted_rand_index(&r.assignments, &truth).unwrap(), 1.0);
    }

    #[test]
    fn duplicate_points_have_zero_variance() {
        let data = array![[1.0], [1.0], [5.0], [5.0], [9.0], [9.0]];
        let r = kmeans(data.view(), 3, 300, &mut RngStream::new(4, "km")).unwrap();
        assert_eq!(r.inertia, 0.0);
    }

    #[test]
    fn rejects_k_above_n() {
        let data = array![[1.0], [2.0]];
        assert!(matches!(kmeans(data.view(), 3, 300, &mut RngStream::new(1, "km")), Err(Error::Config(_))));
    }

    #[test]
    fn deterministic_per_stream() {
        let mut rng = RngStream::new(5, "data");
        let data = Array2::from_shape_fn((60, 3), |_| rng.random_range(-1.0..1.0));
        let a = kmeans(data.view(), 4, 300, &mut RngStream::new(6, "km")).unwrap();
        let b = kmeans(data.view(), 4, 300, &mut RngStream::new(6, "km")).unwrap();
        assert_eq!(a, b);
    }
}
