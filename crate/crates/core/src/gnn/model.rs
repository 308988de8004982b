use std::path::Path;

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use crate::checkpoint;
use crate::error::{Error, Result};
use crate::graph::Edge;
use crate::numerics::{bce_with_logits, dense_backward, dense_forward, dropout, Activation, DenseCache, DenseLayer, RngStream};

use super::conv::{sage_conv, sage_conv_backward, MessageGraph, SageConv};

const CHECKPOINT_FORMAT: &str = "repurpose-gnn";
const CHECKPOINT_VERSION: u32 = 1;

/// One heterogeneous layer: a convolution per relation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeteroLayer {
    /// Updates diseases from their drugs.
    pub treat: SageConv,
    /// Updates drugs from their diseases.
    pub reverse: SageConv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnnModel {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub dropout: f64,
    /// Trainable disease node inputs.
    pub disease_embeddings: Array2<f64>,
    pub layers: Vec<HeteroLayer>,
    /// `2·hidden → hidden`, ReLU.
    pub decoder_hidden: DenseLayer,
    /// `hidden → 1`, linear logit.
    pub decoder_out: DenseLayer,
}

struct LayerCache {
    in_d: Array2<f64>,
    in_s: Array2<f64>,
    agg_d: Array2<f64>,
    agg_s: Array2<f64>,
    pre_d: Array2<f64>,
    pre_s: Array2<f64>,
}

pub struct ForwardCache {
    layers: Vec<LayerCache>,
}

pub struct DecodeCache {
    pairs: Vec<Edge>,
    hidden: DenseCache,
    mask: Array2<f64>,
    out: DenseCache,
}

fn relu(m: &Array2<f64>) -> Array2<f64> {
    m.mapv(|v| v.max(0.0))
}

fn relu_backward(grad: &mut Array2<f64>, pre: &Array2<f64>) {
    grad.zip_mut_with(pre, |g, &p| {
        if p <= 0.0 {
            *g = 0.0
        }
    });
}

impl GnnModel {
    pub fn init(
        input_dim: usize,
        hidden_dim: usize,
        n_layers: usize,
        dropout: f64,
        disease_embeddings: Array2<f64>,
        rng: &mut RngStream,
    ) -> Result<Self> {
        if input_dim == 0 || hidden_dim == 0 || n_layers == 0 {
            return Err(Error::Config(format!(
                "gnn needs positive dims and layers, got input {input_dim}, hidden {hidden_dim}, layers {n_layers}"
            )));
        }
        if !(0.0..1.0).contains(&dropout) {
            return Err(Error::Config(format!("dropout {dropout} outside [0, 1)")));
        }
        if disease_embeddings.ncols() != input_dim {
            return Err(Error::Dimension(format!(
                "disease embeddings are {} wide, drug features {input_dim}",
                disease_embeddings.ncols()
            )));
        }
        let layers = (0..n_layers)
            .map(|l| {
                let in_dim = if l == 0 { input_dim } else { hidden_dim };
                HeteroLayer {
                    treat: SageConv::init(in_dim, hidden_dim, rng),
                    reverse: SageConv::init(in_dim, hidden_dim, rng),
                }
            })
            .collect();
        Ok(Self {
            input_dim,
            hidden_dim,
            dropout,
            disease_embeddings,
            layers,
            decoder_hidden: DenseLayer::init(2 * hidden_dim, hidden_dim, Activation::Relu, rng),
            decoder_out: DenseLayer::init(hidden_dim, 1, Activation::Identity, rng),
        })
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    /// Disease embeddings, then per layer treat and reverse `(W_self, W_neigh, b)`,
    /// then the two decoder layers.
    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![self.disease_embeddings.as_slice_mut().expect("standard layout")];
        for layer in &mut self.layers {
            out.extend(layer.treat.params_mut());
            out.extend(layer.reverse.params_mut());
        }
        out.extend(self.decoder_hidden.params_mut());
        out.extend(self.decoder_out.params_mut());
        out
    }

    pub fn params(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = vec![self.disease_embeddings.as_slice().expect("standard layout")];
        for layer in &self.layers {
            out.extend(layer.treat.params());
            out.extend(layer.reverse.params());
        }
        out.extend(self.decoder_hidden.params());
        out.extend(self.decoder_out.params());
        out
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.params().concat()
    }

    pub fn load_flat(&mut self, flat: &[f64]) -> Result<()> {
        let total: usize = self.params().iter().map(|p| p.len()).sum();
        if flat.len() != total {
            return Err(Error::Dimension(format!("{} values for {total} gnn parameters", flat.len())));
        }
        let mut offset = 0;
        for p in self.params_mut() {
            p.copy_from_slice(&flat[offset..offset + p.len()]);
            offset += p.len();
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|p| p.iter().all(|v| v.is_finite()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        checkpoint::save(CHECKPOINT_FORMAT, CHECKPOINT_VERSION, self, path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        checkpoint::load(CHECKPOINT_FORMAT, CHECKPOINT_VERSION, path)
    }
}

fn check_inputs(model: &GnnModel, mp: &MessageGraph, drug_features: &Array2<f64>) -> Result<()> {
    if drug_features.nrows() != mp.n_drugs() || model.disease_embeddings.nrows() != mp.n_diseases() {
        return Err(Error::Dimension(format!(
            "graph has {}×{} nodes, features {} drugs, model {} diseases",
            mp.n_drugs(),
            mp.n_diseases(),
            drug_features.nrows(),
            model.disease_embeddings.nrows()
        )));
    }
    if drug_features.ncols() != model.input_dim {
        return Err(Error::Dimension(format!(
            "drug features are {} wide, model expects {}",
            drug_features.ncols(),
            model.input_dim
        )));
    }
    Ok(())
}

/// Runs every heterogeneous layer synchronously on both node types.
///
/// ReLU follows every layer except the last. Returns the final drug and
/// disease embeddings.
pub fn hetero_forward(
    model: &GnnModel,
    mp: &MessageGraph,
    drug_features: &Array2<f64>,
) -> Result<(Array2<f64>, Array2<f64>, ForwardCache)> {
    check_inputs(model, mp, drug_features)?;
    let mut h_d = drug_features.clone();
    let mut h_s = model.disease_embeddings.clone();
    let mut caches = Vec::with_capacity(model.n_layers());
    for (l, layer) in model.layers.iter().enumerate() {
        let (pre_d, agg_d) = sage_conv(&h_d, &h_s, &mp.drug_in, &layer.reverse)?;
        let (pre_s, agg_s) = sage_conv(&h_s, &h_d, &mp.disease_in, &layer.treat)?;
        let last = l + 1 == model.n_layers();
        let (next_d, next_s) = if last { (pre_d.clone(), pre_s.clone()) } else { (relu(&pre_d), relu(&pre_s)) };
        caches.push(LayerCache {
            in_d: std::mem::replace(&mut h_d, next_d),
            in_s: std::mem::replace(&mut h_s, next_s),
            agg_d,
            agg_s,
            pre_d,
            pre_s,
        });
    }
    Ok((h_d, h_s, ForwardCache { layers: caches }))
}

/// Logits for `pairs` from concatenated `[drug ‖ disease]` embeddings.
///
/// Dropout after the hidden decoder layer is active only when `rng` is given.
pub fn decode_edges(
    model: &GnnModel,
    h_d: &Array2<f64>,
    h_s: &Array2<f64>,
    pairs: &[Edge],
    rng: Option<&mut RngStream>,
) -> Result<(Vec<f64>, DecodeCache)> {
    let h = model.hidden_dim;
    if let Some(&(d, s)) = pairs.iter().find(|&&(d, s)| d >= h_d.nrows() || s >= h_s.nrows()) {
        return Err(Error::Graph(format!(
            "candidate ({d}, {s}) out of range for {}×{} graph",
            h_d.nrows(),
            h_s.nrows()
        )));
    }
    let mut x = Array2::zeros((pairs.len(), 2 * h));
    for (i, &(d, s)) in pairs.iter().enumerate() {
        x.slice_mut(s![i, ..h]).assign(&h_d.row(d));
        x.slice_mut(s![i, h..]).assign(&h_s.row(s));
    }
    let (hidden, hidden_cache) = dense_forward(&x, &model.decoder_hidden)?;
    let (dropped, mask) = match rng {
        Some(rng) => dropout(&hidden, model.dropout, rng, true)?,
        None => dropout(&hidden, model.dropout, &mut RngStream::new(0, "unused"), false)?,
    };
    let (out, out_cache) = dense_forward(&dropped, &model.decoder_out)?;
    Ok((
        out.column(0).to_vec(),
        DecodeCache {
            pairs: pairs.to_vec(),
            hidden: hidden_cache,
            mask,
            out: out_cache,
        },
    ))
}

/// Inference-mode logits for `pairs`.
pub fn edge_logits(model: &GnnModel, mp: &MessageGraph, drug_features: &Array2<f64>, pairs: &[Edge]) -> Result<Vec<f64>> {
    let (h_d, h_s, _) = hetero_forward(model, mp, drug_features)?;
    Ok(decode_edges(model, &h_d, &h_s, pairs, None)?.0)
}

/// Mean BCE over `pairs` and its gradient for every buffer of
/// [`GnnModel::params_mut`], in the same order.
pub fn loss_and_grads(
    model: &GnnModel,
    mp: &MessageGraph,
    drug_features: &Array2<f64>,
    pairs: &[Edge],
    labels: &[f64],
    rng: Option<&mut RngStream>,
) -> Result<(f64, Vec<Vec<f64>>)> {
    let (h_d, h_s, fwd) = hetero_forward(model, mp, drug_features)?;
    let (logits, dec) = decode_edges(model, &h_d, &h_s, pairs, rng)?;
    let (loss, dlogits) = bce_with_logits(&logits, labels)?;

    let g_out = Array2::from_shape_vec((pairs.len(), 1), dlogits).expect("one logit per pair");
    let out_grads = dense_backward(&g_out, &dec.out, &model.decoder_out)?;
    let keep = 1.0 / (1.0 - model.dropout);
    let g_hidden = out_grads.input * &dec.mask * keep;
    let hid_grads = dense_backward(&g_hidden, &dec.hidden, &model.decoder_hidden)?;

    let h = model.hidden_dim;
    let mut g_d = Array2::zeros(h_d.dim());
    let mut g_s = Array2::zeros(h_s.dim());
    for (i, &(d, s)) in dec.pairs.iter().enumerate() {
        let row = hid_grads.input.row(i);
        let mut rd = g_d.row_mut(d);
        rd += &row.slice(s![..h]);
        let mut rs = g_s.row_mut(s);
        rs += &row.slice(s![h..]);
    }

    let mut layer_grads = Vec::with_capacity(model.n_layers());
    for (l, (layer, cache)) in model.layers.iter().zip(&fwd.layers).enumerate().rev() {
        if l + 1 != model.n_layers() {
            relu_backward(&mut g_d, &cache.pre_d);
            relu_backward(&mut g_s, &cache.pre_s);
        }
        let rev = sage_conv_backward(&g_d, &cache.in_d, &cache.agg_d, cache.in_s.nrows(), &mp.drug_in, &layer.reverse);
        let tr = sage_conv_backward(&g_s, &cache.in_s, &cache.agg_s, cache.in_d.nrows(), &mp.disease_in, &layer.treat);
        g_d = rev.target.clone() + &tr.source;
        g_s = tr.target.clone() + &rev.source;
        layer_grads.push((tr, rev));
    }
    layer_grads.reverse();

    let mut grads = vec![g_s.into_raw_vec_and_offset().0];
    for (tr, rev) in layer_grads {
        for g in [tr, rev] {
            grads.push(g.w_self.into_raw_vec_and_offset().0);
            grads.push(g.w_neigh.into_raw_vec_and_offset().0);
            grads.push(g.bias.to_vec());
        }
    }
    grads.push(hid_grads.weights.into_raw_vec_and_offset().0);
    grads.push(hid_grads.bias.to_vec());
    grads.push(out_grads.weights.into_raw_vec_and_offset().0);
    grads.push(out_grads.bias.to_vec());
    Ok((loss, grads))
}
