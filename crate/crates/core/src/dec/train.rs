use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::autoencoder::{Autoencoder, LatentEmbedding};
use crate::error::{Error, Result};
use crate::numerics::{adam_step, dense::flatten_grads, AdamConfig, AdamState, RngStream};
use crate::preprocess::FeatureTable;

use super::assign::{hard_assignments, kl_loss_and_grads, soft_assign, target_distribution};
use super::kmeans::{kmeans, DEFAULT_MAX_ITER};
use super::silhouette::silhouette_score;
use super::ClusterModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecConfig {
    pub lr: f64,
    /// Epochs between recomputations of the target distribution.
    pub update_interval: usize,
    /// Stop once fewer than this fraction of hard assignments change between
    /// consecutive target updates.
    pub tol: f64,
    pub max_epochs: usize,
    /// k-means restarts used for the initial centres; the lowest inertia wins.
    pub kmeans_restarts: usize,
    pub seed: u64,
}

impl Default for DecConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            update_interval: 20,
            tol: 1e-3,
            max_epochs: 1000,
            kmeans_restarts: 10,
            seed: 0,
        }
    }
}

impl DecConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(Error::Config(format!("dec lr must be finite and non-negative, got {}", self.lr)));
        }
        if self.update_interval == 0 || self.max_epochs == 0 || self.kmeans_restarts == 0 {
            return Err(Error::Config("dec update_interval, max_epochs and kmeans_restarts must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.tol) {
            return Err(Error::Config(format!("dec tol must lie in [0, 1], got {}", self.tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct DecOutcome {
    pub encoder: Autoencoder,
    pub embedding: LatentEmbedding,
    pub model: ClusterModel,
    /// KL(P‖Q) at every epoch, measured before that epoch's update.
    pub kl_history: Vec<f64>,
    /// Fraction of changed hard assignments at each target update after the first.
    pub change_history: Vec<f64>,
    /// Silhouette of the k-means initialisation on the un-refined embedding.
    pub initial_silhouette: f64,
    pub converged: bool,
}

/// Best of `restarts` k-means runs by inertia.
pub fn kmeans_restarts(
    data: ndarray::ArrayView2<f64>,
    k: usize,
    restarts: usize,
    rng: &mut RngStream,
) -> Result<super::KMeansResult> {
    let mut best: Option<super::KMeansResult> = None;
    for r in 0..restarts.max(1) {
        let run = kmeans(data, k, DEFAULT_MAX_ITER, &mut rng.child(&format!("restart{r}")))?;
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Refines an encoder and `k` cluster centres by minimizing KL(P‖Q).
///
/// Centres start from k-means on the current encoding. Adam updates encoder
/// weights and centres jointly. P is recomputed every `update_interval`
/// epochs, and training ends once the hard assignments settle below `tol`
/// or `max_epochs` is reached.
pub fn train_dec(encoder: &Autoencoder, table: &FeatureTable, k: usize, config: &DecConfig) -> Result<DecOutcome> {
    config.validate()?;
    if k < 2 {
        return Err(Error::Clustering(format!("k = {k}: silhouette is undefined below two clusters")));
    }
    if table.n_features() != encoder.spec.input_dim {
        return Err(Error::Dimension(format!(
            "table has {} features, encoder expects {}",
            table.n_features(),
            encoder.spec.input_dim
        )));
    }
    if !table.is_fully_observed() {
        return Err(Error::Validation("clustering input must be fully observed".into()));
    }
    let x = &table.values;
    let root = RngStream::new(config.seed, "dec");
    let mut model = encoder.clone();
    let z0 = model.encode_matrix(x)?;
    let init = kmeans_restarts(z0.view(), k, config.kmeans_restarts, &mut root.child("kmeans"))?;
    let initial_silhouette = silhouette_score(z0.view(), &init.assignments)?;
    let mut centers = init.centers;

    let mut adam = AdamState::new(AdamConfig::with_lr(config.lr))?;
    let mut p = Array2::zeros((x.nrows(), k));
    let mut previous: Option<Vec<usize>> = None;
    let mut kl_history = Vec::new();
    let mut change_history = Vec::new();
    let mut converged = false;

    for epoch in 0..config.max_epochs {
        let (z, caches) = model.encoder.forward(x)?;
        if epoch % config.update_interval == 0 {
            let q = soft_assign(z.view(), centers.view())?;
            p = target_distribution(q.view());
            let hard = hard_assignments(q.view());
            if let Some(prev) = &previous {
                let changed = prev.iter().zip(&hard).filter(|(a, b)| a != b).count();
                let frac = changed as f64 / hard.len() as f64;
                change_history.push(frac);
                if frac < config.tol {
                    converged = true;
                    break;
                }
            }
            previous = Some(hard);
        }
        let (loss, grad_z, grad_mu) = kl_loss_and_grads(z.view(), centers.view(), p.view())?;
        if !loss.is_finite() {
            return Err(Error::training("dec", epoch, format!("KL loss became {loss}")));
        }
        kl_history.push(loss);
        let (_, enc_grads) = model.encoder.backward(&grad_z, &caches)?;
        let mut grads = flatten_grads(&enc_grads);
        grads.push(grad_mu.iter().copied().collect());
        let grad_refs: Vec<&[f64]> = grads.iter().map(Vec::as_slice).collect();
        let mut params = model.encoder.params_mut();
        params.push(centers.as_slice_mut().expect("standard layout"));
        adam_step(&mut params, &grad_refs, &mut adam).map_err(|e| Error::training("dec", epoch, e.to_string()))?;
    }

    let z = model.encode_matrix(x)?;
    if z.iter().chain(centers.iter()).any(|v| !v.is_finite()) {
        return Err(Error::training("dec", kl_history.len(), "non-finite embedding or centres"));
    }
    let q = soft_assign(z.view(), centers.view())?;
    let p = target_distribution(q.view());
    let hard = hard_assignments(q.view());
    let silhouette = silhouette_score(z.view(), &hard)?;
    let embedding = LatentEmbedding::new(table.chemical_ids.clone(), z)?;
    Ok(DecOutcome {
        encoder: model,
        embedding,
        model: ClusterModel {
            centers,
            hard_assignments: hard,
            q,
            p,
            silhouette,
        },
        kl_history,
        change_history,
        initial_silhouette,
        converged,
    })
}

