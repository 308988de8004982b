//! Deep embedded clustering on top of the autoencoder's latent space.
//!
//! k-means initializes the centres, a Student-t kernel gives soft
//! assignments Q, and encoder plus centres are refined against a sharpened
//! target P. Silhouette scores drive the choice of k.

mod assign;
mod kmeans;
mod partition;
mod silhouette;
mod sweep;
mod train;

use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

pub use assign::{hard_assignments, kl_divergence, kl_loss_and_grads, soft_assign, target_distribution, KL_EPSILON};
pub use kmeans::{kmeans, KMeansResult, DEFAULT_MAX_ITER};
pub use partition::{partition_clusters, ClusterData, ClusterPartition};
pub use silhouette::silhouette_score;
pub use sweep::{k_sweep, select_k, SweepConfig, SweepResult, DEFAULT_K_MIN_USEFUL};
pub use train::{kmeans_restarts, train_dec, DecConfig, DecOutcome};

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub centers: Array2<f64>,
    pub hard_assignments: Vec<usize>,
    pub q: Array2<f64>,
    pub p: Array2<f64>,
    pub silhouette: f64,
}

/// Writes `chemical_id,cluster_id`.
pub fn save_clusters_csv(ids: &[String], assignments: &[usize], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["chemical_id", "cluster_id"])?;
    for (id, c) in ids.iter().zip(assignments) {
        w.write_record([id.as_str(), &c.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_clusters_csv(path: impl AsRef<Path>) -> Result<(Vec<String>, Vec<usize>)> {
    let path = path.as_ref();
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Ingestion {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
    let mut ids = Vec::new();
    let mut clusters = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let bad = || Error::Ingestion {
            path: path.display().to_string(),
            msg: format!("malformed row {:?}", record),
        };
        if record.len() != 2 {
            return Err(bad());
        }
        ids.push(record[0].to_string());
        clusters.push(record[1].parse().map_err(|_| bad())?);
    }
    Ok((ids, clusters))
}

/// Writes `k,silhouette`.
pub fn save_sweep_csv(curve: &[(usize, f64)], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["k", "silhouette"])?;
    for (k, s) in curve {
        w.write_record([k.to_string(), s.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
