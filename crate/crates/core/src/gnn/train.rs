use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{sample_negatives, BipartiteGraph, Edge, EdgeSplit};
use crate::metrics::{confusion_metrics, roc_auc, EvalReport};
use crate::numerics::{adam_step, sigmoid, AdamConfig, AdamState, EarlyStopping, Goal, RngStream, Verdict, WeightDecay};

use super::conv::MessageGraph;
use super::model::{edge_logits, loss_and_grads, GnnModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GnnTrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub decay_mode: WeightDecay,
    pub hidden_dim: usize,
    pub n_layers: usize,
    pub dropout: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub min_delta: f64,
    /// Draw fresh train negatives every epoch instead of reusing `split.train_neg`.
    pub resample_negatives: bool,
    pub seed: u64,
}

impl Default for GnnTrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            weight_decay: 0.0,
            decay_mode: WeightDecay::Coupled,
            hidden_dim: 128,
            n_layers: 3,
            dropout: 0.1,
            max_epochs: 200,
            patience: 10,
            min_delta: 1e-6,
            resample_negatives: true,
            seed: 0,
        }
    }
}

impl GnnTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_dim == 0 || self.n_layers == 0 || self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::Config("gnn hidden_dim, n_layers, max_epochs and patience must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("gnn dropout {} outside [0, 1)", self.dropout)));
        }
        if self.min_delta.is_nan() || self.min_delta < 0.0 {
            return Err(Error::Config("gnn min_delta must be non-negative".into()));
        }
        self.adam().validate()
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            weight_decay: self.weight_decay,
            decay_mode: self.decay_mode,
            ..AdamConfig::with_lr(self.lr)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_f1: f64,
    pub val_roc_auc: f64,
}

#[derive(Debug, Clone)]
pub struct GnnRun {
    pub model: GnnModel,
    /// Message-passing structure built from the training positives.
    pub message_graph: MessageGraph,
    pub history: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were restored.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl GnnRun {
    pub fn best(&self) -> &EpochRecord {
        &self.history[self.best_epoch - 1]
    }
}

fn labelled(pos: &[Edge], neg: &[Edge]) -> (Vec<Edge>, Vec<bool>) {
    let pairs = pos.iter().chain(neg).copied().collect();
    let labels = std::iter::repeat_n(true, pos.len()).chain(std::iter::repeat_n(false, neg.len())).collect();
    (pairs, labels)
}

/// Largest f64 below one; keeps probabilities inside the open unit interval.
const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

fn probability(logit: f64) -> f64 {
    sigmoid(logit).clamp(f64::MIN_POSITIVE, BELOW_ONE)
}

/// Metrics at threshold 0.5 for positives against negatives. ROC-AUC is
/// ranked on logits so saturated probabilities do not create ties.
pub fn evaluate_edges(
    model: &GnnModel,
    mp: &MessageGraph,
    drug_features: &Array2<f64>,
    pos: &[Edge],
    neg: &[Edge],
) -> Result<EvalReport> {
    let (pairs, labels) = labelled(pos, neg);
    let logits = edge_logits(model, mp, drug_features, &pairs)?;
    let probs: Vec<f64> = logits.iter().map(|&l| probability(l)).collect();
    let mut report = confusion_metrics(&probs, &labels, 0.5)?;
    report.roc_auc = Some(roc_auc(&logits, &labels)?);
    Ok(report)
}

/// Link probabilities for `candidates` in inference mode.
pub fn predict_links(model: &GnnModel, mp: &MessageGraph, drug_features: &Array2<f64>, candidates: &[Edge]) -> Result<Vec<f64>> {
    Ok(edge_logits(model, mp, drug_features, candidates)?.into_iter().map(probability).collect())
}

/// Full-graph training with BCE on train positives and as many negatives.
///
/// Messages flow along training positives only. After each Adam step the
/// model is scored on the fixed validation edges; training stops once
/// validation ROC-AUC has not improved for `patience` epochs, and the
/// best-scoring parameters are restored.
pub fn train_gnn(graph: &BipartiteGraph, split: &EdgeSplit, config: &GnnTrainConfig) -> Result<GnnRun> {
    config.validate()?;
    if split.train_pos.is_empty() || split.val_pos.is_empty() || split.val_neg.is_empty() {
        return Err(Error::Split(format!(
            "need train and validation edges, got {} train / {} val positives / {} val negatives",
            split.train_pos.len(),
            split.val_pos.len(),
            split.val_neg.len()
        )));
    }
    if !config.resample_negatives && split.train_neg.is_empty() {
        return Err(Error::Split("fixed negatives requested but split has none".into()));
    }
    let mp = MessageGraph::from_edges(graph.n_drugs(), graph.n_diseases(), &split.train_pos)?;
    let feats = &graph.drug_features;
    let root = RngStream::new(config.seed, "gnn");
    let mut model = GnnModel::init(
        graph.dim(),
        config.hidden_dim,
        config.n_layers,
        config.dropout,
        graph.disease_embeddings.clone(),
        &mut root.child("init"),
    )?;
    let mut neg_rng = root.child("negatives");
    let mut drop_rng = root.child("dropout");
    let mut adam = AdamState::new(config.adam())?;
    let mut monitor = EarlyStopping::new(config.patience, config.min_delta, Goal::Maximize);

    let mut forbidden = split.all_positives();
    forbidden.extend(&split.val_neg);
    forbidden.extend(&split.test_neg);

    let mut history = Vec::new();
    let mut best = model.flatten();
    let mut stopped_early = false;
    for epoch in 1..=config.max_epochs {
        let negatives = if config.resample_negatives {
            sample_negatives(graph, split.train_pos.len(), &forbidden, &mut neg_rng)?
        } else {
            split.train_neg.clone()
        };
        let (pairs, labels) = labelled(&split.train_pos, &negatives);
        let targets: Vec<f64> = labels.iter().map(|&y| if y { 1.0 } else { 0.0 }).collect();
        let (loss, grads) = loss_and_grads(&model, &mp, feats, &pairs, &targets, Some(&mut drop_rng))?;
        if !loss.is_finite() {
            return Err(Error::training("gnn", epoch, format!("loss became {loss}")));
        }
        let grad_refs: Vec<&[f64]> = grads.iter().map(Vec::as_slice).collect();
        adam_step(&mut model.params_mut(), &grad_refs, &mut adam).map_err(|e| Error::training("gnn", epoch, e.to_string()))?;

        let val = evaluate_edges(&model, &mp, feats, &split.val_pos, &split.val_neg)?;
        let auc = val.roc_auc.expect("evaluate_edges sets roc_auc");
        history.push(EpochRecord {
            epoch,
            train_loss: loss,
            val_f1: val.f1,
            val_roc_auc: auc,
        });
        match monitor.observe(auc) {
            Verdict::Improved => best = model.flatten(),
            Verdict::Stalled => {}
            Verdict::Stop => {
                stopped_early = true;
                break;
            }
        }
    }
    model.load_flat(&best)?;
    Ok(GnnRun {
        model,
        message_graph: mp,
        best_epoch: monitor.best_index() + 1,
        history,
        stopped_early,
    })
}

/// Writes `epoch,train_loss,val_f1,val_roc_auc`.
pub fn save_history_csv(history: &[EpochRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["epoch", "train_loss", "val_f1", "val_roc_auc"])?;
    for r in history {
        w.write_record([
            r.epoch.to_string(),
            r.train_loss.to_string(),
            r.val_f1.to_string(),
            r.val_roc_auc.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
