use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Edge;

/// In-neighbour lists for both relations, built from a set of treat edges.
///
/// `drug_in[d]` holds the diseases feeding drug `d` (reverse relation) and
/// `disease_in[s]` the drugs feeding disease `s` (treat relation).
#[derive(Debug, Clone, PartialEq)]
pub struct MessageGraph {
    pub drug_in: Vec<Vec<usize>>,
    pub disease_in: Vec<Vec<usize>>,
}

impl MessageGraph {
    pub fn from_edges(n_drugs: usize, n_diseases: usize, edges: &[Edge]) -> Result<Self> {
        let mut drug_in = vec![Vec::new(); n_drugs];
        let mut disease_in = vec![Vec::new(); n_diseases];
        for &(d, s) in edges {
            if d >= n_drugs || s >= n_diseases {
                return Err(Error::Graph(format!("edge ({d}, {s}) out of range for {n_drugs}×{n_diseases} graph")));
            }
            drug_in[d].push(s);
            disease_in[s].push(d);
        }
        Ok(Self { drug_in, disease_in })
    }

    pub fn n_drugs(&self) -> usize {
        self.drug_in.len()
    }

    pub fn n_diseases(&self) -> usize {
        self.disease_in.len()
    }
}

/// `h′_v = W_self·h_v + W_neigh·mean_{u∈N(v)} h_u + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SageConv {
    /// `[out × in]`
    pub w_self: Array2<f64>,
    /// `[out × in]`
    pub w_neigh: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SageGrads {
    pub w_self: Array2<f64>,
    pub w_neigh: Array2<f64>,
    pub bias: Array1<f64>,
    pub target: Array2<f64>,
    pub source: Array2<f64>,
}

impl SageConv {
    /// Glorot-uniform weights over the concatenated `[self ‖ neighbour]` input, zero bias.
    pub fn init<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (2 * in_dim + out_dim) as f64).sqrt();
        let mut draw = |_| rng.random_range(-limit..=limit);
        Self {
            w_self: Array2::from_shape_fn((out_dim, in_dim), &mut draw),
            w_neigh: Array2::from_shape_fn((out_dim, in_dim), &mut draw),
            bias: Array1::zeros(out_dim),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.w_self.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.w_self.nrows()
    }

    pub fn params_mut(&mut self) -> [&mut [f64]; 3] {
        [
            self.w_self.as_slice_mut().expect("standard layout"),
            self.w_neigh.as_slice_mut().expect("standard layout"),
            self.bias.as_slice_mut().expect("standard layout"),
        ]
    }

    pub fn params(&self) -> [&[f64]; 3] {
        [
            self.w_self.as_slice().expect("standard layout"),
            self.w_neigh.as_slice().expect("standard layout"),
            self.bias.as_slice().expect("standard layout"),
        ]
    }
}

/// Row `v` is the mean of `source` rows listed in `neighbours[v]`, or zero.
pub fn mean_aggregate(source: &Array2<f64>, neighbours: &[Vec<usize>]) -> Array2<f64> {
    let mut out = Array2::zeros((neighbours.len(), source.ncols()));
    for (v, nbrs) in neighbours.iter().enumerate() {
        if nbrs.is_empty() {
            continue;
        }
        let mut row = out.row_mut(v);
        for &u in nbrs {
            row += &source.row(u);
        }
        row /= nbrs.len() as f64;
    }
    out
}

fn check(target: &Array2<f64>, source: &Array2<f64>, neighbours: &[Vec<usize>], conv: &SageConv) -> Result<()> {
    if target.ncols() != conv.in_dim() || source.ncols() != conv.in_dim() || conv.w_neigh.dim() != conv.w_self.dim() {
        return Err(Error::Dimension(format!(
            "sage conv {}→{} got target width {} and source width {}",
            conv.in_dim(),
            conv.out_dim(),
            target.ncols(),
            source.ncols()
        )));
    }
    if neighbours.len() != target.nrows() {
        return Err(Error::Dimension(format!(
            "{} neighbour lists for {} targets",
            neighbours.len(),
            target.nrows()
        )));
    }
    if neighbours.iter().flatten().any(|&u| u >= source.nrows()) {
        return Err(Error::Graph(format!("neighbour index beyond {} source nodes", source.nrows())));
    }
    Ok(())
}

/// Mean-aggregating SAGE convolution. Returns the output and the aggregate.
pub fn sage_conv(
    target: &Array2<f64>,
    source: &Array2<f64>,
    neighbours: &[Vec<usize>],
    conv: &SageConv,
) -> Result<(Array2<f64>, Array2<f64>)> {
    check(target, source, neighbours, conv)?;
    let agg = mean_aggregate(source, neighbours);
    let out = target.dot(&conv.w_self.t()) + agg.dot(&conv.w_neigh.t()) + &conv.bias;
    Ok((out, agg))
}

/// Gradients of [`sage_conv`] given the gradient of its output.
pub fn sage_conv_backward(
    grad_out: &Array2<f64>,
    target: &Array2<f64>,
    agg: &Array2<f64>,
    n_source: usize,
    neighbours: &[Vec<usize>],
    conv: &SageConv,
) -> SageGrads {
    let grad_agg = grad_out.dot(&conv.w_neigh);
    let mut source = Array2::zeros((n_source, conv.in_dim()));
    for (v, nbrs) in neighbours.iter().enumerate() {
        if nbrs.is_empty() {
            continue;
        }
        let share = &grad_agg.row(v) / nbrs.len() as f64;
        for &u in nbrs {
            let mut row = source.row_mut(u);
            row += &share;
        }
    }
    SageGrads {
        w_self: grad_out.t().dot(target),
        w_neigh: grad_out.t().dot(agg),
        bias: grad_out.sum_axis(Axis(0)),
        target: grad_out.dot(&conv.w_self),
        source,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{grad_check, RngStream};
    use ndarray::array;

    fn identity_conv(d: usize) -> SageConv {
        SageConv {
            w_self: Array2::eye(d),
            w_neigh: Array2::zeros((d, d)),
            bias: Array1::zeros(d),
        }
    }

    #[test]
    fn identity_self_weights_pass_targets_through() {
        let t = array![[1.0, -2.0], [3.0, 0.5]];
        let s = array![[9.0, 9.0]];
        let (out, _) = sage_conv(&t, &s, &[vec![0], vec![]], &identity_conv(2)).unwrap();
        assert_eq!(out, t);
    }

    #[test]
    fn isolated_node_uses_zero_aggregate() {
        let conv = SageConv {
            w_self: array![[2.0, 0.0], [0.0, 3.0]],
            w_neigh: Array2::ones((2, 2)),
            bias: array![0.5, -0.5],
        };
        let (out, agg) = sage_conv(&array![[1.0, 1.0]], &array![[5.0, 5.0]], &[vec![]], &conv).unwrap();
        assert_eq!(agg, Array2::<f64>::zeros((1, 2)));
        assert_eq!(out, array![[2.5, 2.5]]);
    }

    #[test]
    fn neighbour_mean_by_hand() {
        let conv = SageConv {
            w_self: Array2::zeros((2, 2)),
            w_neigh: Array2::eye(2),
            bias: Array1::zeros(2),
        };
        let (out, _) = sage_conv(&array![[7.0, 7.0]], &array![[1.0, 0.0], [0.0, 1.0]], &[vec![0, 1]], &conv).unwrap();
        assert_eq!(out, array![[0.5, 0.5]]);
    }

    #[test]
    fn bad_index_and_width_are_rejected() {
        let conv = identity_conv(2);
        assert!(sage_conv(&array![[1.0, 1.0]], &array![[1.0, 1.0]], &[vec![3]], &conv).is_err());
        assert!(sage_conv(&array![[1.0]], &array![[1.0, 1.0]], &[vec![0]], &conv).is_err());
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = RngStream::new(8, "sage");
        let (nt, ns, din, dout) = (4, 5, 3, 2);
        let conv = SageConv::init(din, dout, &mut rng);
        let conv = SageConv {
            bias: Array1::from_shape_fn(dout, |_| rng.random_range(-1.0..1.0)),
            ..conv
        };
        let t = Array2::from_shape_fn((nt, din), |_| rng.random_range(-1.0..1.0));
        let s = Array2::from_shape_fn((ns, din), |_| rng.random_range(-1.0..1.0));
        let nbrs = vec![vec![0, 2], vec![], vec![1, 2, 4], vec![3]];
        let probe = Array2::from_shape_fn((nt, dout), |_| rng.random_range(-1.0..1.0));
        let loss = |t: &Array2<f64>, s: &Array2<f64>, c: &SageConv| (sage_conv(t, s, &nbrs, c).unwrap().0 * &probe).sum();

        let (_, agg) = sage_conv(&t, &s, &nbrs, &conv).unwrap();
        let g = sage_conv_backward(&probe, &t, &agg, ns, &nbrs, &conv);

        let f = |x: &[f64]| loss(&Array2::from_shape_vec((nt, din), x.to_vec()).unwrap(), &s, &conv);
        assert!(grad_check(f, t.as_slice().unwrap(), g.target.as_slice().unwrap(), 1e-5) <= 1e-4);
        let f = |x: &[f64]| loss(&t, &Array2::from_shape_vec((ns, din), x.to_vec()).unwrap(), &conv);
        assert!(grad_check(f, s.as_slice().unwrap(), g.source.as_slice().unwrap(), 1e-5) <= 1e-4);
        let f = |x: &[f64]| {
            let c = SageConv {
                w_neigh: Array2::from_shape_vec((dout, din), x.to_vec()).unwrap(),
                ..conv.clone()
            };
            loss(&t, &s, &c)
        };
        assert!(grad_check(f, conv.w_neigh.as_slice().unwrap(), g.w_neigh.as_slice().unwrap(), 1e-5) <= 1e-4);
        let f = |x: &[f64]| {
            let c = SageConv {
                w_self: Array2::from_shape_vec((dout, din), x.to_vec()).unwrap(),
                ..conv.clone()
            };
            loss(&t, &s, &c)
        };
        assert!(grad_check(f, conv.w_self.as_slice().unwrap(), g.w_self.as_slice().unwrap(), 1e-5) <= 1e-4);
        let f = |x: &[f64]| {
            let c = SageConv {
                bias: Array1::from_vec(x.to_vec()),
                ..conv.clone()
            };
            loss(&t, &s, &c)
        };
        assert!(grad_check(f, conv.bias.as_slice().unwrap(), g.bias.as_slice().unwrap(), 1e-5) <= 1e-4);
    }
}
