use std::cmp::Ordering;

use crate::error::{Error, Result};

use super::table::{FeatureKind, FeatureTable};

pub const DEFAULT_KNN_K: usize = 5;

/// Root-mean-square difference over numeric columns observed in both rows.
///
/// Rows sharing no observed numeric column are infinitely far apart.
fn shared_distance(table: &FeatureTable, numeric: &[usize], a: usize, b: usize) -> f64 {
    let mut sum = 0.0;
    let mut shared = 0usize;
    for &j in numeric {
        if table.observed[[a, j]] && table.observed[[b, j]] {
            let d = table.values[[a, j]] - table.values[[b, j]];
            sum += d * d;
            shared += 1;
        }
    }
    if shared == 0 {
        f64::INFINITY
    } else {
        (sum / shared as f64).sqrt()
    }
}

/// Fills every missing cell from the `k` nearest rows that observe its column.
///
/// Numeric cells take the neighbours' mean; categorical (already enumerated)
/// cells take their most frequent code, lowest code on ties. Distance ties
/// go to the lower row index. Observed cells are never modified.
pub fn knn_impute(table: &FeatureTable, k: usize) -> Result<FeatureTable> {
    if k == 0 {
        return Err(Error::Config("kNN imputation needs k ≥ 1".into()));
    }
    if let Some(col) = table.columns.iter().find(|c| c.raw.is_some()) {
        return Err(Error::Validation(format!(
            "categorical column '{}' must be enumerated before imputation",
            col.name
        )));
    }
    let (n, d) = table.values.dim();
    for (j, col) in table.columns.iter().enumerate() {
        if n > 0 && !(0..n).any(|i| table.observed[[i, j]]) {
            return Err(Error::Imputation {
                column: col.name.clone(),
            });
        }
    }
    let numeric: Vec<usize> = (0..d).filter(|&j| table.columns[j].kind == FeatureKind::Numeric).collect();

    let mut out = table.clone();
    for row in 0..n {
        let missing: Vec<usize> = (0..d).filter(|&j| !table.observed[[row, j]]).collect();
        if missing.is_empty() {
            continue;
        }
        let mut order: Vec<(f64, usize)> = (0..n)
            .filter(|&other| other != row)
            .map(|other| (shared_distance(table, &numeric, row, other), other))
            .collect();
        order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1)));

        for j in missing {
            let donors: Vec<f64> = order
                .iter()
                .filter(|&&(_, other)| table.observed[[other, j]])
                .take(k)
                .map(|&(_, other)| table.values[[other, j]])
                .collect();
            // non-empty: the column is observed somewhere and not in this row
            out.values[[row, j]] = match table.columns[j].kind {
                FeatureKind::Numeric => donors.iter().sum::<f64>() / donors.len() as f64,
                FeatureKind::Categorical => majority_code(&donors),
            };
            out.observed[[row, j]] = true;
        }
    }
    Ok(out)
}

fn majority_code(codes: &[f64]) -> f64 {
    let mut counts: Vec<(f64, usize)> = Vec::new();
    for &c in codes {
        match counts.iter_mut().find(|(v, _)| *v == c) {
            Some((_, n)) => *n += 1,
            None => counts.push((c, 1)),
        }
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal)))
        .map(|(c, _)| c)
        .unwrap_or(0.0)
}
