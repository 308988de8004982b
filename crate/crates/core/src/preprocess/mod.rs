//! Feature-table ingestion and cleaning, plus a synthetic data generator.
//!
//! Cleaning runs in a fixed order: completeness filter, categorical
//! enumeration, kNN imputation, z-score normalization.

mod impute;
pub mod io;
mod synth;
mod table;

pub use impute::{knn_impute, DEFAULT_KNN_K};
pub use io::{load_feature_table, load_links, save_feature_table, save_links, save_truth_clusters};
pub use synth::{disease_id, drug_id, generate_synthetic, SynthConfig, SyntheticData};
pub use table::{
    enumerate_categoricals, filter_completeness, unique_drug_view, zscore_normalize, FeatureColumn, FeatureKind,
    FeatureTable, FilterOutcome, LinkTable, NormStats,
};

use crate::error::Result;

pub const DEFAULT_COMPLETENESS: f64 = 0.70;

/// Output of [`clean`].
#[derive(Debug, Clone)]
pub struct Cleaned {
    pub table: FeatureTable,
    pub stats: NormStats,
    pub dropped: Vec<String>,
    pub warnings: Vec<String>,
}

/// Filter, enumerate, impute and normalize in one pass.
pub fn clean(table: &FeatureTable, threshold: f64, knn_k: usize) -> Result<Cleaned> {
    let filtered = filter_completeness(table, threshold)?;
    let mut warnings: Vec<String> = filtered.warning.into_iter().collect();
    let coded = enumerate_categoricals(&filtered.table);
    let imputed = if coded.n_rows() == 0 {
        coded
    } else {
        knn_impute(&coded, knn_k)?
    };
    let (table, stats) = zscore_normalize(&imputed);
    if !filtered.dropped.is_empty() {
        warnings.push(format!("{} rows below completeness threshold removed", filtered.dropped.len()));
    }
    Ok(Cleaned {
        table,
        stats,
        dropped: filtered.dropped,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_is_idempotent_on_its_output() {
        let data = generate_synthetic(&SynthConfig::default()).unwrap();
        let once = clean(&data.features, DEFAULT_COMPLETENESS, DEFAULT_KNN_K).unwrap();
        assert!(once.table.is_fully_observed());
        let twice = clean(&once.table, DEFAULT_COMPLETENESS, DEFAULT_KNN_K).unwrap();
        assert_eq!(once.table.chemical_ids, twice.table.chemical_ids);
        for (a, b) in once.table.values.iter().zip(twice.table.values.iter()) {
            assert!((a - b).abs() <= 1e-9);
        }
        for j in 0..once.table.n_features() {
            let col = once.table.values.column(j);
            let mean = col.mean().unwrap();
            let std = col.std(0.0);
            assert!(mean.abs() <= 1e-9 && (std - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn imputation_keeps_observed_cells() {
        let data = generate_synthetic(&SynthConfig::default()).unwrap();
        let imputed = knn_impute(&data.features, DEFAULT_KNN_K).unwrap();
        for ((a, b), o) in imputed.values.iter().zip(data.features.values.iter()).zip(data.features.observed.iter()) {
            if *o {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
