//! Symmetric dimension-halving autoencoder.
//!
//! The encoder halves the width at every layer until the next halving would
//! reach the latent size, then maps straight to it. The decoder mirrors the
//! encoder. Every layer uses ReLU except the final reconstruction layer,
//! which is linear so z-scored (negative) targets are reachable.

use std::path::Path;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::checkpoint;
use crate::error::{Error, Result};
use crate::numerics::{
    adam_step, dense::flatten_grads, mse_loss, Activation, AdamConfig, AdamState, DenseGrads, EarlyStopping, Goal,
    LayerStack, RngStream, Verdict,
};
use crate::preprocess::FeatureTable;

const CHECKPOINT_FORMAT: &str = "repurpose-autoencoder";
const CHECKPOINT_VERSION: u32 = 1;

/// Above this many rows training switches to shuffled mini-batches.
pub const FULL_BATCH_LIMIT: usize = 4096;
pub const MINI_BATCH: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AutoencoderSpec {
    pub input_dim: usize,
    pub latent_dim: usize,
    pub encoder_dims: Vec<usize>,
    pub decoder_dims: Vec<usize>,
}

impl AutoencoderSpec {
    /// Spec from explicit encoder widths; the decoder is their mirror.
    ///
    /// Widths must strictly decrease, except that a two-entry list may map a
    /// dimension onto itself.
    pub fn from_encoder_dims(encoder_dims: Vec<usize>) -> Result<Self> {
        if encoder_dims.len() < 2 || encoder_dims.contains(&0) {
            return Err(Error::Config(format!("encoder widths {encoder_dims:?} need ≥ 2 positive entries")));
        }
        let direct = encoder_dims.len() == 2 && encoder_dims[0] == encoder_dims[1];
        if !direct && encoder_dims.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config(format!("encoder widths {encoder_dims:?} must strictly decrease")));
        }
        let mut decoder_dims = encoder_dims.clone();
        decoder_dims.reverse();
        Ok(Self {
            input_dim: encoder_dims[0],
            latent_dim: *encoder_dims.last().expect("non-empty"),
            encoder_dims,
            decoder_dims,
        })
    }

    pub fn encoder_activations(&self) -> Vec<Activation> {
        vec![Activation::Relu; self.encoder_dims.len() - 1]
    }

    pub fn decoder_activations(&self) -> Vec<Activation> {
        let mut acts = vec![Activation::Relu; self.decoder_dims.len() - 1];
        *acts.last_mut().expect("at least one layer") = Activation::Identity;
        acts
    }
}

/// Halve the width while the next half still exceeds `latent_dim`, then map
/// to `latent_dim`.
pub fn build_halving_architecture(input_dim: usize, latent_dim: usize) -> Result<AutoencoderSpec> {
    if latent_dim == 0 || latent_dim >= input_dim {
        return Err(Error::Config(format!(
            "latent dimension {latent_dim} must be positive and below the input dimension {input_dim}"
        )));
    }
    let mut dims = vec![input_dim];
    let mut width = input_dim;
    while width / 2 > latent_dim {
        width /= 2;
        dims.push(width);
    }
    dims.push(latent_dim);
    AutoencoderSpec::from_encoder_dims(dims)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub max_epochs: usize,
    pub patience: usize,
    /// Mini-batch size; `None` picks full-batch up to [`FULL_BATCH_LIMIT`] rows.
    pub batch_size: Option<usize>,
    pub min_delta: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            max_epochs: 1000,
            patience: 10,
            batch_size: None,
            min_delta: 1e-6,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::Config("max_epochs and patience must be at least 1".into()));
        }
        if self.batch_size == Some(0) {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        AdamConfig::with_lr(self.lr).validate()
    }

    fn effective_batch(&self, n: usize) -> usize {
        match self.batch_size {
            Some(b) => b.min(n).max(1),
            None if n <= FULL_BATCH_LIMIT => n.max(1),
            None => MINI_BATCH,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Autoencoder {
    pub spec: AutoencoderSpec,
    pub encoder: LayerStack,
    pub decoder: LayerStack,
}

/// Per-epoch losses and how training ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub loss_history: Vec<f64>,
    pub best_epoch: usize,
    pub best_loss: f64,
    pub stopped_early: bool,
}

/// Latent vectors keyed by drug.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentEmbedding {
    pub chemical_ids: Vec<String>,
    pub vectors: Array2<f64>,
}

impl LatentEmbedding {
    pub fn new(chemical_ids: Vec<String>, vectors: Array2<f64>) -> Result<Self> {
        if chemical_ids.len() != vectors.nrows() {
            return Err(Error::Dimension(format!(
                "{} ids for {} latent rows",
                chemical_ids.len(),
                vectors.nrows()
            )));
        }
        if vectors.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("latent embedding contains non-finite values".into()));
        }
        Ok(Self { chemical_ids, vectors })
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    /// Writes `chemical_id,z_0..z_{L−1}`.
    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["chemical_id".to_string()];
        header.extend((0..self.dim()).map(|j| format!("z_{j}")));
        w.write_record(&header)?;
        for (id, row) in self.chemical_ids.iter().zip(self.vectors.rows()) {
            let mut rec = vec![id.clone()];
            rec.extend(row.iter().map(|v| format!("{v}")));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut rdr = csv::Reader::from_path(path)?;
        let dim = rdr.headers()?.len().saturating_sub(1);
        let mut ids = Vec::new();
        let mut flat = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            ids.push(rec[0].to_string());
            for cell in rec.iter().skip(1) {
                flat.push(cell.parse::<f64>().map_err(|_| Error::Ingestion {
                    path: path.display().to_string(),
                    msg: format!("bad latent value '{cell}'"),
                })?);
            }
        }
        let vectors = Array2::from_shape_vec((ids.len(), dim), flat)
            .map_err(|e| Error::Dimension(format!("ragged embedding file: {e}")))?;
        Self::new(ids, vectors)
    }
}

impl Autoencoder {
    pub fn init(spec: AutoencoderSpec, rng: &mut RngStream) -> Self {
        let encoder = LayerStack::init(&spec.encoder_dims, &spec.encoder_activations(), rng);
        let decoder = LayerStack::init(&spec.decoder_dims, &spec.decoder_activations(), rng);
        Self { spec, encoder, decoder }
    }

    pub fn encode_matrix(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        self.encoder.infer(x)
    }

    pub fn decode_matrix(&self, z: &Array2<f64>) -> Result<Array2<f64>> {
        self.decoder.infer(z)
    }

    pub fn reconstruct(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        self.decode_matrix(&self.encode_matrix(x)?)
    }

    /// MSE reconstruction loss with encoder and decoder gradients.
    pub fn loss_and_grads(&self, x: &Array2<f64>) -> Result<(f64, Vec<DenseGrads>, Vec<DenseGrads>)> {
        let (z, enc_cache) = self.encoder.forward(x)?;
        let (recon, dec_cache) = self.decoder.forward(&z)?;
        let (loss, grad) = mse_loss(&recon, x)?;
        let (grad_z, dec_grads) = self.decoder.backward(&grad, &dec_cache)?;
        let (_, enc_grads) = self.encoder.backward(&grad_z, &enc_cache)?;
        Ok((loss, enc_grads, dec_grads))
    }

    /// Encoder buffers followed by decoder buffers.
    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut p = self.encoder.params_mut();
        p.extend(self.decoder.params_mut());
        p
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut f = self.encoder.flatten();
        f.extend(self.decoder.flatten());
        f
    }

    pub fn load_flat(&mut self, flat: &[f64]) -> Result<()> {
        let split = self.encoder.param_count();
        if flat.len() != split + self.decoder.param_count() {
            return Err(Error::Dimension("autoencoder parameter count mismatch".into()));
        }
        self.encoder.load_flat(&flat[..split])?;
        self.decoder.load_flat(&flat[split..])
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        checkpoint::save(CHECKPOINT_FORMAT, CHECKPOINT_VERSION, self, path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let model: Self = checkpoint::load(CHECKPOINT_FORMAT, CHECKPOINT_VERSION, path)?;
        if model.encoder.widths() != model.spec.encoder_dims || model.decoder.widths() != model.spec.decoder_dims {
            return Err(Error::Checkpoint("layer widths disagree with the stored spec".into()));
        }
        Ok(model)
    }
}

/// Trains on a fully observed, normalized table.
///
/// Minimizes MSE reconstruction loss with Adam. An epoch's loss is the mean
/// batch loss measured before that batch's update. Training stops after
/// `max_epochs` or once `patience` consecutive epochs fail to beat the best
/// loss by more than `min_delta`; the parameters that produced the best loss
/// are restored.
pub fn train_autoencoder(table: &FeatureTable, spec: &AutoencoderSpec, config: &TrainConfig) -> Result<(Autoencoder, TrainReport)> {
    config.validate()?;
    if !table.is_fully_observed() {
        return Err(Error::Validation("autoencoder input must be fully observed".into()));
    }
    if table.n_features() != spec.input_dim {
        return Err(Error::Dimension(format!(
            "table has {} features, spec expects {}",
            table.n_features(),
            spec.input_dim
        )));
    }
    if table.n_rows() == 0 {
        return Err(Error::Validation("autoencoder input has no rows".into()));
    }
    let root = RngStream::new(config.seed, "autoencoder");
    let mut model = Autoencoder::init(spec.clone(), &mut root.child("init"));
    let mut shuffle_rng = root.child("batches");
    let mut adam = AdamState::new(AdamConfig::with_lr(config.lr))?;
    let mut monitor = EarlyStopping::new(config.patience, config.min_delta, Goal::Minimize);

    let n = table.n_rows();
    let batch = config.effective_batch(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::new();
    let mut best = model.flatten();
    let mut stopped_early = false;

    for epoch in 0..config.max_epochs {
        let snapshot = model.flatten();
        if batch < n {
            order.shuffle(&mut shuffle_rng);
        }
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(batch) {
            let x = if batch < n {
                table.values.select(Axis(0), chunk)
            } else {
                table.values.clone()
            };
            let (loss, enc, dec) = model.loss_and_grads(&x)?;
            if !loss.is_finite() {
                return Err(Error::training("autoencoder", epoch, format!("loss became {loss}")));
            }
            let mut grads = flatten_grads(&enc);
            grads.extend(flatten_grads(&dec));
            let grad_refs: Vec<&[f64]> = grads.iter().map(Vec::as_slice).collect();
            adam_step(&mut model.params_mut(), &grad_refs, &mut adam)
                .map_err(|e| Error::training("autoencoder", epoch, e.to_string()))?;
            epoch_loss += loss;
            batches += 1;
        }
        let epoch_loss = epoch_loss / batches as f64;
        history.push(epoch_loss);
        match monitor.observe(epoch_loss) {
            Verdict::Improved => best = snapshot,
            Verdict::Stalled => {}
            Verdict::Stop => {
                stopped_early = true;
                break;
            }
        }
    }
    model.load_flat(&best)?;
    let report = TrainReport {
        best_epoch: monitor.best_index(),
        best_loss: monitor.best().unwrap_or(f64::NAN),
        loss_history: history,
        stopped_early,
    };
    Ok((model, report))
}

/// Deterministic forward pass through the encoder half.
pub fn encode(model: &Autoencoder, table: &FeatureTable) -> Result<LatentEmbedding> {
    if table.n_features() != model.spec.input_dim {
        return Err(Error::Dimension(format!(
            "table has {} features, model expects {}",
            table.n_features(),
            model.spec.input_dim
        )));
    }
    LatentEmbedding::new(table.chemical_ids.clone(), model.encode_matrix(&table.values)?)
}
