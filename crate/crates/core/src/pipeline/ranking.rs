use std::cmp::Ordering;
use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{BipartiteGraph, Edge};

/// Every drug×disease pair of the graph that is not a training edge, in
/// drug-major order.
pub fn enumerate_candidates(graph: &BipartiteGraph, train_edges: &[Edge]) -> Vec<Edge> {
    let train: HashSet<Edge> = train_edges.iter().copied().collect();
    let mut out = Vec::with_capacity((graph.n_drugs() * graph.n_diseases()).saturating_sub(train.len()));
    for d in 0..graph.n_drugs() {
        for s in 0..graph.n_diseases() {
            if !train.contains(&(d, s)) {
                out.push((d, s));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub cluster_id: usize,
    pub chemical_id: String,
    pub disease_id: String,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedRecord {
    pub cluster_id: usize,
    pub chemical_id: String,
    pub disease_id: String,
    pub probability: f64,
    /// 1-based position in the full ranking.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RankedPredictions {
    pub records: Vec<RankedRecord>,
    /// Records with probability at or above the threshold, ranks unchanged.
    pub confident: Vec<RankedRecord>,
    pub threshold: f64,
}

fn order(a: &Prediction, b: &Prediction) -> Ordering {
    b.probability
        .partial_cmp(&a.probability)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.chemical_id.cmp(&b.chemical_id))
        .then_with(|| a.disease_id.cmp(&b.disease_id))
        .then_with(|| a.cluster_id.cmp(&b.cluster_id))
}

/// Sorts by descending probability, ties by `(chemical_id, disease_id)`,
/// and keeps the records at or above `threshold` as a sublist.
pub fn rank_and_filter(mut predictions: Vec<Prediction>, threshold: f64) -> RankedPredictions {
    predictions.sort_by(order);
    let records: Vec<RankedRecord> = predictions
        .into_iter()
        .enumerate()
        .map(|(i, p)| RankedRecord {
            cluster_id: p.cluster_id,
            chemical_id: p.chemical_id,
            disease_id: p.disease_id,
            probability: p.probability,
            rank: i + 1,
        })
        .collect();
    let confident = records.iter().filter(|r| r.probability >= threshold).cloned().collect();
    RankedPredictions {
        records,
        confident,
        threshold,
    }
}

/// Writes `cluster_id,chemical_id,disease_id,probability,rank`.
pub fn save_predictions_csv(records: &[RankedRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["cluster_id", "chemical_id", "disease_id", "probability", "rank"])?;
    for r in records {
        w.write_record([
            r.cluster_id.to_string(),
            r.chemical_id.clone(),
            r.disease_id.clone(),
            r.probability.to_string(),
            r.rank.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_predictions_csv(path: impl AsRef<Path>) -> Result<Vec<RankedRecord>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Ingestion {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use proptest::prelude::*;

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

    fn pred(c: &str, d: &str, p: f64) -> Prediction {
        Prediction {
            cluster_id: 0,
            chemical_id: c.into(),
            disease_id: d.into(),
            probability: p,
        }
    }

    #[test]
    fn two_by_three_minus_two() {
        let g = graph(2, 3, vec![(0, 0), (1, 2)]);
        let c = enumerate_candidates(&g, &g.edges_treat);
        assert_eq!(c, vec![(0, 1), (0, 2), (1, 0), (1, 1)]);
    }

    #[test]
    fn threshold_keeps_two() {
        let r = rank_and_filter(vec![pred("A", "X", 0.995), pred("B", "X", 0.5), pred("C", "X", 0.991)], 0.99);
        assert_eq!(r.confident.len(), 2);
        assert_eq!(r.confident.iter().map(|x| x.rank).collect::<Vec<_>>(), vec![1, 2]);
        assert_eq!(r.confident[1].chemical_id, "C");
        assert_eq!(r.records.len(), 3);
    }

    #[test]
    fn empty_confident_set_keeps_full_list() {
        let r = rank_and_filter(vec![pred("A", "X", 0.7), pred("B", "Y", 0.2)], 0.99);
        assert!(r.confident.is_empty());
        assert_eq!(r.records.len(), 2);
    }

    #[test]
    fn ties_break_lexicographically() {
        let r = rank_and_filter(vec![pred("B", "X", 0.8), pred("A", "Y", 0.8), pred("A", "X", 0.8)], 0.99);
        let keys: Vec<_> = r.records.iter().map(|x| (x.chemical_id.as_str(), x.disease_id.as_str())).collect();
        assert_eq!(keys, vec![("A", "X"), ("A", "Y"), ("B", "X")]);
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("p.csv");
        let r = rank_and_filter(vec![pred("A", "X", 0.1 + 0.2), pred("B", "X", 0.9993)], 0.99);
        save_predictions_csv(&r.records, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("cluster_id,chemical_id,disease_id,probability,rank\n0,B,X,0.9993,1\n"));
        assert_eq!(load_predictions_csv(&p).unwrap(), r.records);
    }

    proptest! {
        #[test]
        fn candidate_count_identity(nd in 1usize..6, ns in 1usize..6, mask in proptest::collection::vec(any::<bool>(), 36)) {
            let edges: Vec<Edge> = (0..nd).flat_map(|d| (0..ns).map(move |s| (d, s))).filter(|&(d, s)| mask[d * 6 + s]).collect();
            let g = graph(nd, ns, edges.clone());
            let c = enumerate_candidates(&g, &edges);
            prop_assert_eq!(c.len(), nd * ns - edges.len());
            let train: HashSet<Edge> = edges.into_iter().collect();
            prop_assert!(c.iter().all(|e| !train.contains(e)));
        }

        #[test]
        fn ranks_are_dense_and_probabilities_non_increasing(ps in proptest::collection::vec(0.0f64..1.0, 0..40)) {
            let preds = ps.iter().enumerate().map(|(i, &p)| pred(&format!("C{i}"), "D", p)).collect();
            let r = rank_and_filter(preds, 0.9);
            for (i, rec) in r.records.iter().enumerate() {
                prop_assert_eq!(rec.rank, i + 1);
            }
            prop_assert!(r.records.windows(2).all(|w| w[0].probability >= w[1].probability));
            prop_assert!(r.confident.iter().all(|x| x.probability >= 0.9));
        }
    }
}
