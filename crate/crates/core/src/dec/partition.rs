use std::collections::HashMap;

use ndarray::{Array2, Axis};

use crate::error::{Error, Result};
use crate::preprocess::LinkTable;

/// Drugs, latent vectors and links belonging to one cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterData {
    pub cluster_id: usize,
    pub chemical_ids: Vec<String>,
    pub vectors: Array2<f64>,
    pub links: LinkTable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterPartition {
    /// One entry per cluster id `0..k`, including clusters left empty.
    pub clusters: Vec<ClusterData>,
}

impl ClusterPartition {
    pub fn total_links(&self) -> usize {
        self.clusters.iter().map(|c| c.links.len()).sum()
    }

    /// Cluster with the most links, lowest id on ties.
    pub fn largest_by_links(&self) -> Option<&ClusterData> {
        self.clusters
            .iter()
            .filter(|c| !c.links.is_empty())
            .max_by(|a, b| a.links.len().cmp(&b.links.len()).then(b.cluster_id.cmp(&a.cluster_id)))
    }
}

/// Splits drugs and their links by cluster.
///
/// A link goes to the cluster of its drug. Links naming a drug that has no
/// assignment are an error.
pub fn partition_clusters(
    chemical_ids: &[String],
    vectors: &Array2<f64>,
    assignments: &[usize],
    links: &LinkTable,
) -> Result<ClusterPartition> {
    if chemical_ids.len() != assignments.len() || chemical_ids.len() != vectors.nrows() {
        return Err(Error::Dimension(format!(
            "{} ids, {} vectors, {} assignments",
            chemical_ids.len(),
            vectors.nrows(),
            assignments.len()
        )));
    }
    let k = assignments.iter().max().map_or(0, |m| m + 1);
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); k];
    let mut owner = HashMap::with_capacity(chemical_ids.len());
    for (i, (id, &c)) in chemical_ids.iter().zip(assignments).enumerate() {
        rows[c].push(i);
        owner.insert(id.as_str(), c);
    }
    let mut routed: Vec<Vec<(String, String)>> = vec![Vec::new(); k];
    for (drug, disease) in &links.records {
        let c = owner
            .get(drug.as_str())
            .ok_or_else(|| Error::Partition(drug.clone()))?;
        routed[*c].push((drug.clone(), disease.clone()));
    }
    let clusters = rows
        .into_iter()
        .zip(routed)
        .enumerate()
        .map(|(cluster_id, (members, pairs))| ClusterData {
            cluster_id,
            chemical_ids: members.iter().map(|&i| chemical_ids[i].clone()).collect(),
            vectors: vectors.select(Axis(0), &members),
            links: LinkTable::new(pairs),
        })
        .collect();
    Ok(ClusterPartition { clusters })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("C{i}")).collect()
    }

    #[test]
    fn single_cluster_is_whole_dataset() {
        let v = Array2::from_shape_fn((3, 2), |(i, j)| (i * 2 + j) as f64);
        let links = LinkTable::new(vec![("C0", "D1"), ("C2", "D0")]);
        let p = partition_clusters(&ids(3), &v, &[0, 0, 0], &links).unwrap();
        assert_eq!(p.clusters.len(), 1);
        assert_eq!(p.clusters[0].chemical_ids, ids(3));
        assert_eq!(p.clusters[0].vectors, v);
        assert_eq!(p.clusters[0].links, links);
    }

    #[test]
    fn links_are_conserved_and_routed() {
        let v = Array2::zeros((4, 1));
        let links = LinkTable::new(vec![("C0", "D0"), ("C1", "D0"), ("C3", "D2"), ("C3", "D1")]);
        let p = partition_clusters(&ids(4), &v, &[1, 0, 0, 2], &links).unwrap();
        assert_eq!(p.total_links(), links.len());
        assert_eq!(p.clusters[2].links.len(), 2);
        assert_eq!(p.largest_by_links().unwrap().cluster_id, 2);
        for c in &p.clusters {
            for (d, _) in &c.links.records {
                assert!(c.chemical_ids.contains(d));
            }
        }
    }

    #[test]
    fn unknown_drug_is_named() {
        let links = LinkTable::new(vec![("C9", "D0")]);
        let err = partition_clusters(&ids(2), &Array2::zeros((2, 1)), &[0, 1], &links).unwrap_err();
        assert!(err.to_string().contains("C9"));
    }
}
