use ndarray::ArrayView2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::RngStream;

use super::silhouette::silhouette_score;
use super::train::kmeans_restarts;

pub const DEFAULT_K_MIN_USEFUL: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub k_min: usize,
    pub k_max: usize,
    /// Smallest k the selection rule will accept as a local maximum.
    pub k_min_useful: usize,
    pub kmeans_restarts: usize,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            k_min: 2,
            k_max: 50,
            k_min_useful: DEFAULT_K_MIN_USEFUL,
            kmeans_restarts: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    /// `(k, silhouette)` in increasing k.
    pub curve: Vec<(usize, f64)>,
    pub selected: usize,
}

/// Index of the best local maximum at or above `k_min_useful`, or of the
/// global maximum when no such local maximum exists.
pub fn select_k(curve: &[(usize, f64)], k_min_useful: usize) -> Option<usize> {
    let better = |a: usize, b: usize| curve[a].1 > curve[b].1;
    let mut best: Option<usize> = None;
    for i in 0..curve.len() {
        let left = i == 0 || curve[i].1 >= curve[i - 1].1;
        let right = i + 1 == curve.len() || curve[i].1 >= curve[i + 1].1;
        if left && right && curve[i].0 >= k_min_useful && best.is_none_or(|b| better(i, b)) {
            best = Some(i);
        }
    }
    if best.is_none() {
        for i in 0..curve.len() {
            if best.is_none_or(|b| better(i, b)) {
                best = Some(i);
            }
        }
    }
    best.map(|i| curve[i].0)
}

/// Silhouette of the k-means partition for every k in `k_min..=k_max`.
///
/// Each k runs on its own stream derived from the seed and k, so the curve
/// does not depend on how the work is scheduled.
pub fn k_sweep(data: ArrayView2<f64>, config: &SweepConfig) -> Result<SweepResult> {
    let n = data.nrows();
    if config.k_min < 2 || config.k_max < config.k_min || config.k_max > n {
        return Err(Error::Config(format!(
            "k range {}..={} invalid for {n} points (need 2 ≤ k_min ≤ k_max ≤ n)",
            config.k_min, config.k_max
        )));
    }
    let root = RngStream::new(config.seed, "k_sweep");
    let curve = (config.k_min..=config.k_max)
        .into_par_iter()
        .map(|k| {
            let mut rng = root.child(&format!("k{k}"));
            let fit = kmeans_restarts(data, k, config.kmeans_restarts, &mut rng)?;
            let ss = match silhouette_score(data, &fit.assignments) {
                Ok(s) => s,
                // duplicate-heavy data can leave fewer than two non-empty clusters
                Err(Error::Clustering(_)) => 0.0,
                Err(e) => return Err(e),
            };
            Ok((k, ss))
        })
        .collect::<Result<Vec<_>>>()?;
    let selected = select_k(&curve, config.k_min_useful).expect("non-empty curve");
    Ok(SweepResult { curve, selected })
}
