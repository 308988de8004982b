use std::collections::BTreeMap;

use ndarray::ArrayView2;

use crate::error::{Error, Result};

use super::kmeans::sq_dist;

/// Mean silhouette `(b − a) / max(a, b)` under Euclidean distance.
///
/// `a` is the mean distance to the rest of the point's own cluster and `b`
/// the smallest mean distance to another cluster. Points in singleton
/// clusters, and points with `a = b = 0`, contribute 0.
pub fn silhouette_score(data: ArrayView2<f64>, assignments: &[usize]) -> Result<f64> {
    let n = data.nrows();
    if assignments.len() != n {
        return Err(Error::Dimension(format!("{} assignments for {n} points", assignments.len())));
    }
    // compact labels so arbitrary ids work
    let mut ids = BTreeMap::new();
    for &a in assignments {
        let next = ids.len();
        ids.entry(a).or_insert(next);
    }
    let k = ids.len();
    if k < 2 {
        return Err(Error::Clustering("silhouette is undefined for fewer than two clusters".into()));
    }
    let labels: Vec<usize> = assignments.iter().map(|a| ids[a]).collect();
    let mut sizes = vec![0usize; k];
    for &l in &labels {
        sizes[l] += 1;
    }

    let mut total = 0.0;
    let mut sums = vec![0.0; k];
    for i in 0..n {
        sums.iter_mut().for_each(|s| *s = 0.0);
        for j in 0..n {
            if i != j {
                sums[labels[j]] += sq_dist(data.row(i), data.row(j)).sqrt();
            }
        }
        let own = labels[i];
        if sizes[own] == 1 {
            continue;
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;
    use ndarray::{array, Array2};
    use rand::Rng;

    /// Direct transcription of the definition, one point at a time.
    fn oracle(data: &Array2<f64>, labels: &[usize]) -> f64 {
        let n = data.nrows();
        let dist = |i: usize, j: usize| -> f64 {
            let mut s = 0.0;
            for c in 0..data.ncols() {
                s += (data[[i, c]] - data[[j, c]]) * (data[[i, c]] - data[[j, c]]);
            }
            s.sqrt()
        };
        let mut clusters: Vec<usize> = labels.to_vec();
        clusters.sort();
        clusters.dedup();
        let mut acc = 0.0;
        for i in 0..n {
            let mates: Vec<usize> = (0..n).filter(|&j| j != i && labels[j] == labels[i]).collect();
            if mates.is_empty() {
                continue;
            }
            let mut a = 0.0;
            for &j in &mates {
                a += dist(i, j);
            }
            a /= mates.len() as f64;
            let mut b = f64::INFINITY;
            for &c in &clusters {
                if c == labels[i] {
                    continue;
                }
                let members: Vec<usize> = (0..n).filter(|&j| labels[j] == c).collect();
                let mut m = 0.0;
                for &j in &members {
                    m += dist(i, j);
                }
                b = b.min(m / members.len() as f64);
            }
            if a.max(b) > 0.0 {
                acc += (b - a) / a.max(b);
            }
        }
        acc / n as f64
    }

    #[test]
    fn tight_far_pairs() {
        let d = array![[0.0, 0.0], [0.0, 0.01], [100.0, 0.0], [100.0, 0.01]];
        assert!(silhouette_score(d.view(), &[0, 0, 1, 1]).unwrap() > 0.99);
    }

    #[test]
    fn identical_points_score_zero() {
        let d = Array2::from_elem((4, 2), 3.0);
        assert_eq!(silhouette_score(d.view(), &[0, 0, 1, 1]).unwrap(), 0.0);
    }

    #[test]
    fn single_cluster_is_error() {
        let d = array![[0.0], [1.0]];
        assert!(silhouette_score(d.view(), &[4, 4]).is_err());
    }

    #[test]
    fn matches_definition_oracle() {
        let mut rng = RngStream::new(41, "sil");
        for _ in 0..50 {
            let n = 12;
            let d = Array2::from_shape_fn((n, 3), |_| rng.random_range(-1.0..1.0));
            let mut labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
            labels[0] = 0;
            labels[1] = 1;
            let got = silhouette_score(d.view(), &labels).unwrap();
            assert!((got - oracle(&d, &labels)).abs() <= 1e-12);
        }
    }
}
