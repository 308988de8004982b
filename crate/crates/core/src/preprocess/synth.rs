use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::RngStream;

use super::table::{FeatureColumn, FeatureTable, LinkTable};

/// Shape of a synthetic drug/disease dataset with planted clusters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_clusters: usize,
    pub drugs_per_cluster: usize,
    pub diseases_per_cluster: usize,
    pub feature_dim: usize,
    pub noise_sigma: f64,
    pub link_density_within: f64,
    pub link_density_cross: f64,
    pub missing_rate: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_clusters: 5,
            drugs_per_cluster: 40,
            diseases_per_cluster: 12,
            feature_dim: 64,
            noise_sigma: 0.5,
            link_density_within: 0.6,
            link_density_cross: 0.02,
            missing_rate: 0.1,
            seed: 7,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("synthetic config: {m}")));
        if self.n_clusters == 0 || self.drugs_per_cluster == 0 || self.diseases_per_cluster == 0 || self.feature_dim == 0 {
            return bad("cluster, drug, disease and feature counts must be positive");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be finite and non-negative");
        }
        if !(self.link_density_within > 0.0 && self.link_density_within <= 1.0) {
            return bad("link_density_within must lie in (0, 1]");
        }
        if !(0.0..1.0).contains(&self.link_density_cross) {
            return bad("link_density_cross must lie in [0, 1)");
        }
        if self.link_density_within <= self.link_density_cross {
            return bad("link_density_within must exceed link_density_cross");
        }
        if !(0.0..1.0).contains(&self.missing_rate) {
            return bad("missing_rate must lie in [0, 1)");
        }
        Ok(())
    }

    /// Half-width of the hypercube cluster centres are drawn from.
    pub fn center_radius(&self) -> f64 {
        1.0 + 6.0 * self.noise_sigma
    }

    /// Minimum distance enforced between any two centres.
    pub fn min_separation(&self) -> f64 {
        6.0 * self.noise_sigma
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub features: FeatureTable,
    pub links: LinkTable,
    /// Planted cluster of each drug, aligned with `features.chemical_ids`.
    pub truth: Vec<usize>,
    pub disease_clusters: Vec<(String, usize)>,
    pub centers: Array2<f64>,
}

const CENTER_ATTEMPTS: usize = 10_000;

pub fn drug_id(i: usize) -> String {
    format!("C{i:05}")
}

pub fn disease_id(i: usize) -> String {
    format!("D{i:04}")
}

/// Draws a dataset with Gaussian drug clusters and cluster-aligned links.
///
/// Drug `i` belongs to cluster `i mod n_clusters`. Cluster `c` owns diseases
/// `c·m .. (c+1)·m`. Each drug links to each disease of its own cluster with
/// probability `link_density_within` and to every other disease with
/// probability `link_density_cross`.
pub fn generate_synthetic(config: &SynthConfig) -> Result<SyntheticData> {
    config.validate()?;
    let root = RngStream::new(config.seed, "synthetic");
    let k = config.n_clusters;
    let d = config.feature_dim;

    let mut rng = root.child("centers");
    let radius = config.center_radius();
    let sep = config.min_separation();
    let mut centers = Array2::<f64>::zeros((k, d));
    for c in 0..k {
        let mut placed = false;
        for _ in 0..CENTER_ATTEMPTS {
            let cand: Vec<f64> = (0..d).map(|_| rng.random_range(-radius..=radius)).collect();
            let clear = (0..c).all(|o| {
                let dist2: f64 = cand.iter().zip(centers.row(o)).map(|(a, b)| (a - b) * (a - b)).sum();
                dist2.sqrt() >= sep
            });
            if clear {
                centers.row_mut(c).assign(&ndarray::ArrayView1::from(&cand));
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::Generation(format!(
                "could not place {k} centres {sep:.3} apart inside [-{radius:.3}, {radius:.3}]^{d}"
            )));
        }
    }

    let n = k * config.drugs_per_cluster;
    let truth: Vec<usize> = (0..n).map(|i| i % k).collect();
    let noise = Normal::new(0.0, config.noise_sigma).map_err(|e| Error::Generation(e.to_string()))?;
    let mut rng = root.child("features");
    let values = Array2::from_shape_fn((n, d), |(i, j)| centers[[truth[i], j]] + noise.sample(&mut rng));

    let mut rng = root.child("missing");
    let mut observed = Array2::from_elem((n, d), true);
    let mut masked = values.clone();
    if config.missing_rate > 0.0 {
        for (o, v) in observed.iter_mut().zip(masked.iter_mut()) {
            if rng.random::<f64>() < config.missing_rate {
                *o = false;
                *v = f64::NAN;
            }
        }
    }

    let ids: Vec<String> = (0..n).map(drug_id).collect();
    let columns = (0..d).map(|j| FeatureColumn::numeric(format!("f{j}"))).collect();
    let features = FeatureTable::new(ids.clone(), columns, masked, observed)?;

    let m = config.diseases_per_cluster;
    let disease_clusters: Vec<(String, usize)> = (0..k * m).map(|j| (disease_id(j), j / m)).collect();
    let mut rng = root.child("links");
    let mut pairs = Vec::new();
    for (i, id) in ids.iter().enumerate() {
        for (dis, dc) in &disease_clusters {
            let p = if *dc == truth[i] {
                config.link_density_within
            } else {
                config.link_density_cross
            };
            if rng.random::<f64>() < p {
                pairs.push((id.clone(), dis.clone()));
            }
        }
    }

    Ok(SyntheticData {
        features,
        links: LinkTable::new(pairs),
        truth,
        disease_clusters,
        centers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let cfg = SynthConfig::default();
        let a = generate_synthetic(&cfg).unwrap();
        let b = generate_synthetic(&cfg).unwrap();
        assert_eq!(a.links, b.links);
        assert_eq!(a.features.observed, b.features.observed);
        assert!(a
            .features
            .values
            .iter()
            .zip(b.features.values.iter())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
        let c = generate_synthetic(&SynthConfig { seed: 8, ..cfg }).unwrap();
        assert_ne!(a.links, c.links);
    }

    #[test]
    fn zero_cross_density_keeps_links_in_cluster() {
        let cfg = SynthConfig {
            link_density_cross: 0.0,
            ..SynthConfig::default()
        };
        let data = generate_synthetic(&cfg).unwrap();
        let dc: std::collections::HashMap<_, _> = data.disease_clusters.iter().cloned().collect();
        let idx = data.features.row_index();
        for (c, d) in &data.links.records {
            assert_eq!(data.truth[idx[c.as_str()]], dc[d]);
        }
    }

    #[test]
    fn centers_respect_separation() {
        let cfg = SynthConfig::default();
        let data = generate_synthetic(&cfg).unwrap();
        for a in 0..cfg.n_clusters {
            for b in a + 1..cfg.n_clusters {
                let d: f64 = data
                    .centers
                    .row(a)
                    .iter()
                    .zip(data.centers.row(b))
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt();
                assert!(d >= cfg.min_separation());
            }
        }
    }

    #[test]
    fn infeasible_separation_fails() {
        let cfg = SynthConfig {
            n_clusters: 10,
            feature_dim: 1,
            noise_sigma: 1.0,
            ..SynthConfig::default()
        };
        assert!(matches!(generate_synthetic(&cfg), Err(Error::Generation(_))));
    }

    #[test]
    fn missing_rate_roughly_honoured() {
        let data = generate_synthetic(&SynthConfig::default()).unwrap();
        let frac = data.features.observed.iter().filter(|&&o| !o).count() as f64 / data.features.observed.len() as f64;
        assert!((frac - 0.1).abs() < 0.02, "{frac}");
    }

    #[test]
    fn invalid_densities_rejected() {
        let cfg = SynthConfig {
            link_density_within: 0.1,
            link_density_cross: 0.2,
            ..SynthConfig::default()
        };
        assert!(generate_synthetic(&cfg).is_err());
    }
}
