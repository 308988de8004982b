//! Per-cluster bipartite drug–disease graph, edge splits and negative sampling.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::dec::ClusterData;
use crate::error::{Error, Result};
use crate::numerics::RngStream;

pub const DISEASE_EMBEDDING_SCALE: f64 = 0.01;
pub const DEFAULT_SPLIT: (f64, f64, f64) = (0.7, 0.1, 0.2);

pub type Edge = (usize, usize);

/// Drugs and diseases of one cluster joined by `treat` edges.
///
/// `edges_reverse` is the transpose of `edges_treat`. `drug_adjacency[d]`
/// lists the diseases of drug `d` and `disease_adjacency[s]` the drugs of
/// disease `s`, both in edge order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BipartiteGraph {
    pub drug_ids: Vec<String>,
    #[serde(skip)]
    pub drug_features: Array2<f64>,
    pub disease_ids: Vec<String>,
    #[serde(skip)]
    pub disease_embeddings: Array2<f64>,
    pub edges_treat: Vec<Edge>,
    pub edges_reverse: Vec<Edge>,
    #[serde(skip)]
    pub drug_adjacency: Vec<Vec<usize>>,
    #[serde(skip)]
    pub disease_adjacency: Vec<Vec<usize>>,
    pub seed: u64,
}

impl BipartiteGraph {
    pub fn new(
        drug_ids: Vec<String>,
        drug_features: Array2<f64>,
        disease_ids: Vec<String>,
        disease_embeddings: Array2<f64>,
        edges: Vec<Edge>,
        seed: u64,
    ) -> Result<Self> {
        let (nd, ns) = (drug_ids.len(), disease_ids.len());
        if drug_features.nrows() != nd || disease_embeddings.nrows() != ns {
            return Err(Error::Dimension(format!(
                "{nd} drugs / {} feature rows, {ns} diseases / {} embedding rows",
                drug_features.nrows(),
                disease_embeddings.nrows()
            )));
        }
        if drug_features.ncols() != disease_embeddings.ncols() {
            return Err(Error::Dimension(format!(
                "drug width {} vs disease width {}",
                drug_features.ncols(),
                disease_embeddings.ncols()
            )));
        }
        if let Some(&(d, s)) = edges.iter().find(|&&(d, s)| d >= nd || s >= ns) {
            return Err(Error::Graph(format!("edge ({d}, {s}) out of range for {nd}×{ns} graph")));
        }
        let mut drug_adjacency = vec![Vec::new(); nd];
        let mut disease_adjacency = vec![Vec::new(); ns];
        for &(d, s) in &edges {
            drug_adjacency[d].push(s);
            disease_adjacency[s].push(d);
        }
        Ok(Self {
            drug_ids,
            drug_features,
            disease_ids,
            disease_embeddings,
            edges_reverse: edges.iter().map(|&(d, s)| (s, d)).collect(),
            edges_treat: edges,
            drug_adjacency,
            disease_adjacency,
            seed,
        })
    }

    pub fn n_drugs(&self) -> usize {
        self.drug_ids.len()
    }

    pub fn n_diseases(&self) -> usize {
        self.disease_ids.len()
    }

    pub fn dim(&self) -> usize {
        self.drug_features.ncols()
    }

    pub fn edge_set(&self) -> HashSet<Edge> {
        self.edges_treat.iter().copied().collect()
    }

    /// Writes node ids, both edge lists and the seed as JSON.
    pub fn dump_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let body = serde_json::to_string_pretty(self)?;
        std::fs::write(path, body).map_err(|e| Error::io(path, e))
    }
}

/// Entries i.i.d. uniform in `(−scale, scale)`.
pub fn init_disease_embeddings(n: usize, dim: usize, scale: f64, rng: &mut RngStream) -> Array2<f64> {
    Array2::from_shape_fn((n, dim), |_| loop {
        let v = rng.random_range(-scale..scale);
        if v != -scale {
            break v;
        }
    })
}

/// Graph over every drug of the cluster and every disease it links to.
///
/// Diseases are indexed in order of first appearance in the link list.
/// Drug features are the cluster's latent vectors; disease embeddings are
/// drawn with [`init_disease_embeddings`].
pub fn build_bipartite(cluster: &ClusterData, seed: u64) -> Result<BipartiteGraph> {
    if cluster.links.is_empty() {
        return Err(Error::Graph(format!("cluster {} has no links", cluster.cluster_id)));
    }
    let drug_index: HashMap<&str, usize> =
        cluster.chemical_ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let disease_ids = cluster.links.disease_ids();
    let disease_index: HashMap<&str, usize> = disease_ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let edges = cluster
        .links
        .records
        .iter()
        .map(|(c, d)| {
            let di = drug_index
                .get(c.as_str())
                .ok_or_else(|| Error::Graph(format!("link drug {c} is not in cluster {}", cluster.cluster_id)))?;
            Ok((*di, disease_index[d.as_str()]))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rng = RngStream::new(seed, "disease_embeddings");
    let emb = init_disease_embeddings(disease_ids.len(), cluster.vectors.ncols(), DISEASE_EMBEDDING_SCALE, &mut rng);
    BipartiteGraph::new(cluster.chemical_ids.clone(), cluster.vectors.clone(), disease_ids, emb, edges, seed)
}

/// Positive edges per split plus equally sized negatives.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct EdgeSplit {
    pub train_pos: Vec<Edge>,
    pub val_pos: Vec<Edge>,
    pub test_pos: Vec<Edge>,
    pub train_neg: Vec<Edge>,
    pub val_neg: Vec<Edge>,
    pub test_neg: Vec<Edge>,
}

impl EdgeSplit {
    pub fn all_positives(&self) -> HashSet<Edge> {
        self.train_pos.iter().chain(&self.val_pos).chain(&self.test_pos).copied().collect()
    }
}

/// Shuffles the positive edges and cuts them into train/val/test.
///
/// Val and test get `floor(n·r)` edges; the remainder goes to train.
pub fn split_edges(graph: &BipartiteGraph, ratios: (f64, f64, f64), seed: u64) -> Result<EdgeSplit> {
    let (tr, va, te) = ratios;
    if [tr, va, te].iter().any(|r| !(0.0..=1.0).contains(r)) || ((tr + va + te) - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("split ratios {ratios:?} must be in [0, 1] and sum to 1")));
    }
    let n = graph.edges_treat.len();
    if n < 3 {
        return Err(Error::Split(format!("{n} edges cannot be split three ways")));
    }
    let mut edges = graph.edges_treat.clone();
    edges.shuffle(&mut RngStream::new(seed, "split"));
    let n_val = (n as f64 * va).floor() as usize;
    let n_test = (n as f64 * te).floor() as usize;
    let n_train = n - n_val - n_test;
    Ok(EdgeSplit {
        train_pos: edges[..n_train].to_vec(),
        val_pos: edges[n_train..n_train + n_val].to_vec(),
        test_pos: edges[n_train + n_val..].to_vec(),
        ..EdgeSplit::default()
    })
}

/// Draws `count` distinct drug–disease pairs outside `forbidden`.
///
/// Uses rejection sampling while non-edges are plentiful and a shuffled
/// enumeration of all non-edges otherwise; both are uniform over subsets.
pub fn sample_negatives(
    graph: &BipartiteGraph,
    count: usize,
    forbidden: &HashSet<Edge>,
    rng: &mut RngStream,
) -> Result<Vec<Edge>> {
    let (nd, ns) = (graph.n_drugs(), graph.n_diseases());
    let blocked = forbidden.iter().filter(|&&(d, s)| d < nd && s < ns).count();
    let available = nd * ns - blocked;
    if count > available {
        return Err(Error::Sampling {
            requested: count,
            available,
            deficit: count - available,
        });
    }
    if count * 2 > available {
        let mut pool: Vec<Edge> = (0..nd)
            .flat_map(|d| (0..ns).map(move |s| (d, s)))
            .filter(|e| !forbidden.contains(e))
            .collect();
        let (picked, _) = pool.partial_shuffle(rng, count);
        return Ok(picked.to_vec());
    }
    let mut taken = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let e = (rng.random_range(0..nd), rng.random_range(0..ns));
        if !forbidden.contains(&e) && taken.insert(e) {
            out.push(e);
        }
    }
    Ok(out)
}

/// Fills the negative lists of `split`, one negative per positive.
///
/// Val and test negatives avoid every positive and each other. The train
/// negatives drawn here additionally avoid val and test negatives.
pub fn attach_negatives(graph: &BipartiteGraph, split: &mut EdgeSplit, seed: u64) -> Result<()> {
    let root = RngStream::new(seed, "negatives");
    let mut forbidden = split.all_positives();
    split.val_neg = sample_negatives(graph, split.val_pos.len(), &forbidden, &mut root.child("val"))?;
    forbidden.extend(&split.val_neg);
    split.test_neg = sample_negatives(graph, split.test_pos.len(), &forbidden, &mut root.child("test"))?;
    forbidden.extend(&split.test_neg);
    split.train_neg = sample_negatives(graph, split.train_pos.len(), &forbidden, &mut root.child("train"))?;
    Ok(())
}

/// Null-model split: within each of train, val and test, pools positives and
/// negatives and reassigns the labels at random, keeping the counts.
pub fn shuffle_split_labels(split: &EdgeSplit, seed: u64) -> EdgeSplit {
    let root = RngStream::new(seed, "label_shuffle");
    let shuffle = |pos: &[Edge], neg: &[Edge], label: &str| {
        let mut pool: Vec<Edge> = pos.iter().chain(neg).copied().collect();
        pool.shuffle(&mut root.child(label));
        let tail = pool.split_off(pos.len());
        (pool, tail)
    };
    let (train_pos, train_neg) = shuffle(&split.train_pos, &split.train_neg, "train");
    let (val_pos, val_neg) = shuffle(&split.val_pos, &split.val_neg, "val");
    let (test_pos, test_neg) = shuffle(&split.test_pos, &split.test_neg, "test");
    EdgeSplit {
        train_pos,
        val_pos,
        test_pos,
        train_neg,
        val_neg,
        test_neg,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::LinkTable;

    fn graph(nd: usize, ns: usize, edges: Vec<Edge>) -> BipartiteGraph {
        BipartiteGraph::new(
            (0..nd).map(|i| format!("C{i}")).collect(),
            Array2::zeros((nd, 2)),
            (0..ns).map(|i| format!("D{i}")).collect(),
            Array2::zeros((ns, 2)),
            edges,
            0,
        )
        .unwrap()
    }

    fn random_graph(nd: usize, ns: usize, density: f64, seed: u64) -> BipartiteGraph {
        let mut rng = RngStream::new(seed, "g");
        let edges = (0..nd)
            .flat_map(|d| (0..ns).map(move |s| (d, s)))
            .filter(|_| rng.random::<f64>() < density)
            .collect();
        graph(nd, ns, edges)
    }

    #[test]
    fn single_link_graph() {
        let cluster = ClusterData {
            cluster_id: 0,
            chemical_ids: vec!["C1".into()],
            vectors: Array2::ones((1, 3)),
            links: LinkTable::new(vec![("C1", "D7")]),
        };
        let g = build_bipartite(&cluster, 4).unwrap();
        assert_eq!((g.n_drugs(), g.n_diseases()), (1, 1));
        assert_eq!(g.edges_treat, vec![(0, 0)]);
        assert_eq!(g.edges_reverse, vec![(0, 0)]);
        assert_eq!(g.disease_embeddings.dim(), (1, 3));
    }

    #[test]
    fn empty_cluster_is_graph_error() {
        let cluster = ClusterData {
            cluster_id: 2,
            chemical_ids: vec!["C1".into()],
            vectors: Array2::ones((1, 3)),
            links: LinkTable::default(),
        };
        assert!(matches!(build_bipartite(&cluster, 0), Err(Error::Graph(_))));
    }

    #[test]
    fn reverse_is_transpose_and_degrees_handshake() {
        let g = random_graph(12, 9, 0.3, 1);
        let fwd: HashSet<Edge> = g.edges_treat.iter().copied().collect();
        let rev: HashSet<Edge> = g.edges_reverse.iter().map(|&(s, d)| (d, s)).collect();
        assert_eq!(fwd, rev);
        assert_eq!(g.edges_treat.len(), g.edges_reverse.len());
        let deg: usize = g.drug_adjacency.iter().chain(&g.disease_adjacency).map(Vec::len).sum();
        assert_eq!(deg, 2 * g.edges_treat.len());
    }

    #[test]
    fn disease_embeddings_are_small_and_centred() {
        let mut rng = RngStream::new(9, "emb");
        let e = init_disease_embeddings(1000, 100, 0.01, &mut rng);
        assert!(e.iter().all(|v| v.abs() < 0.01));
        assert!(e.mean().unwrap().abs() <= 0.001);
        let again = init_disease_embeddings(1000, 100, 0.01, &mut RngStream::new(9, "emb"));
        assert_eq!(e, again);
    }

    #[test]
    fn ten_edges_split_seven_one_two() {
        let g = graph(10, 1, (0..10).map(|d| (d, 0)).collect());
        let s = split_edges(&g, DEFAULT_SPLIT, 3).unwrap();
        assert_eq!((s.train_pos.len(), s.val_pos.len(), s.test_pos.len()), (7, 1, 2));
    }

    #[test]
    fn splits_partition_and_depend_on_seed() {
        let g = graph(100, 1, (0..100).map(|d| (d, 0)).collect());
        let a = split_edges(&g, DEFAULT_SPLIT, 1).unwrap();
        let b = split_edges(&g, DEFAULT_SPLIT, 2).unwrap();
        assert_ne!(a.train_pos, b.train_pos);
        assert_eq!(a.train_pos.len(), b.train_pos.len());
        let mut all: Vec<Edge> = a.train_pos.iter().chain(&a.val_pos).chain(&a.test_pos).copied().collect();
        all.sort();
        assert_eq!(all, g.edges_treat);
        assert_eq!(split_edges(&g, DEFAULT_SPLIT, 1).unwrap(), a);
    }

    #[test]
    fn too_few_edges_to_split() {
        let g = graph(2, 1, vec![(0, 0), (1, 0)]);
        assert!(matches!(split_edges(&g, DEFAULT_SPLIT, 0), Err(Error::Split(_))));
    }

    #[test]
    fn complete_graph_has_no_negatives() {
        let g = graph(3, 2, (0..3).flat_map(|d| (0..2).map(move |s| (d, s))).collect());
        let err = sample_negatives(&g, 1, &g.edge_set(), &mut RngStream::new(0, "n")).unwrap_err();
        assert!(matches!(err, Error::Sampling { deficit: 1, .. }));
    }

    #[test]
    fn negatives_avoid_positives() {
        let g = random_graph(15, 10, 0.4, 2);
        let pos = g.edge_set();
        let mut rng = RngStream::new(5, "neg");
        for _ in 0..1000 {
            let neg = sample_negatives(&g, 20, &pos, &mut rng).unwrap();
            assert_eq!(neg.len(), 20);
            assert_eq!(neg.iter().collect::<HashSet<_>>().len(), 20);
            assert!(neg.iter().all(|e| !pos.contains(e)));
        }
    }

    /// Upper 1% point of the chi-square distribution with 49 degrees of freedom.
    const CHI2_49_P01: f64 = 74.919;

    #[test]
    fn negatives_are_uniform_over_non_edges() {
        let mut rng = RngStream::new(6, "half");
        let mut all: Vec<Edge> = (0..10).flat_map(|d| (0..10).map(move |s| (d, s))).collect();
        all.shuffle(&mut rng);
        let g = graph(10, 10, all[..50].to_vec());
        let pos = g.edge_set();

        let full = sample_negatives(&g, 50, &pos, &mut rng).unwrap();
        assert_eq!(full.len(), 50);

        let mut failures = 0;
        for rep in 0..5 {
            let mut counts: HashMap<Edge, usize> = HashMap::new();
            let mut rng = RngStream::new(rep, "chi");
            let draws = 2000;
            let per = 10;
            for _ in 0..draws {
                for e in sample_negatives(&g, per, &pos, &mut rng).unwrap() {
                    *counts.entry(e).or_default() += 1;
                }
            }
            assert_eq!(counts.len(), 50);
            let expected = (draws * per) as f64 / 50.0;
            let chi2: f64 = counts.values().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
            if chi2 > CHI2_49_P01 {
                failures += 1;
            }
        }
        assert!(failures <= 1, "{failures} of 5 repeats rejected uniformity");
    }

    #[test]
    fn attached_negatives_are_disjoint_across_splits() {
        let g = random_graph(30, 20, 0.2, 3);
        let mut s = split_edges(&g, DEFAULT_SPLIT, 1).unwrap();
        attach_negatives(&g, &mut s, 1).unwrap();
        assert_eq!(s.val_neg.len(), s.val_pos.len());
        assert_eq!(s.test_neg.len(), s.test_pos.len());
        assert_eq!(s.train_neg.len(), s.train_pos.len());
        let pos = s.all_positives();
        let v: HashSet<Edge> = s.val_neg.iter().copied().collect();
        let t: HashSet<Edge> = s.test_neg.iter().copied().collect();
        let tr: HashSet<Edge> = s.train_neg.iter().copied().collect();
        assert!(v.is_disjoint(&pos) && t.is_disjoint(&pos) && tr.is_disjoint(&pos));
        assert!(v.is_disjoint(&t) && tr.is_disjoint(&v) && tr.is_disjoint(&t));
    }

    #[test]
    fn shuffled_labels_keep_pools_and_counts() {
        let g = random_graph(30, 20, 0.2, 4);
        let mut s = split_edges(&g, DEFAULT_SPLIT, 1).unwrap();
        attach_negatives(&g, &mut s, 1).unwrap();
        let n = shuffle_split_labels(&s, 7);
        assert_eq!(n.val_pos.len(), s.val_pos.len());
        let before: HashSet<Edge> = s.test_pos.iter().chain(&s.test_neg).copied().collect();
        let after: HashSet<Edge> = n.test_pos.iter().chain(&n.test_neg).copied().collect();
        assert_eq!(before, after);
        assert_ne!(n.train_pos, s.train_pos);
    }

    #[test]
    fn json_dump_names_nodes() {
        let g = random_graph(3, 2, 0.5, 5);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.json");
        g.dump_json(&p).unwrap();
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap();
        assert_eq!(v["drug_ids"].as_array().unwrap().len(), 3);
        assert_eq!(v["edges_treat"].as_array().unwrap().len(), g.edges_treat.len());
    }
}
