use std::collections::{BTreeMap, HashMap, HashSet};

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Numeric,
    Categorical,
}

impl FeatureKind {
    pub fn tag(self) -> &'static str {
        match self {
            FeatureKind::Numeric => "num",
            FeatureKind::Categorical => "cat",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureColumn {
    pub name: String,
    pub kind: FeatureKind,
    /// Category label for each code, once the column has been enumerated.
    pub levels: Option<Vec<String>>,
    /// Cell text of a categorical column that has not been enumerated yet.
    pub raw: Option<Vec<Option<String>>>,
}

impl FeatureColumn {
    pub fn numeric(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: FeatureKind::Numeric,
            levels: None,
            raw: None,
        }
    }

    pub fn categorical(name: impl Into<String>, cells: Vec<Option<String>>) -> Self {
        Self {
            name: name.into(),
            kind: FeatureKind::Categorical,
            levels: None,
            raw: Some(cells),
        }
    }
}

/// Drugs × features, with a mask of which cells were observed.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub chemical_ids: Vec<String>,
    pub columns: Vec<FeatureColumn>,
    /// `[n_drugs × n_features]`; unobserved cells hold NaN until imputed.
    pub values: Array2<f64>,
    /// `true` where the cell was observed.
    pub observed: Array2<bool>,
}

impl FeatureTable {
    pub fn new(
        chemical_ids: Vec<String>,
        columns: Vec<FeatureColumn>,
        values: Array2<f64>,
        observed: Array2<bool>,
    ) -> Result<Self> {
        let table = Self {
            chemical_ids,
            columns,
            values,
            observed,
        };
        table.validate()?;
        Ok(table)
    }

    /// Fully observed numeric table.
    pub fn from_dense(chemical_ids: Vec<String>, names: Vec<String>, values: Array2<f64>) -> Result<Self> {
        let observed = Array2::from_elem(values.dim(), true);
        let columns = names.into_iter().map(FeatureColumn::numeric).collect();
        Self::new(chemical_ids, columns, values, observed)
    }

    pub fn validate(&self) -> Result<()> {
        let (n, d) = self.values.dim();
        if self.chemical_ids.len() != n || self.columns.len() != d || self.observed.dim() != (n, d) {
            return Err(Error::Validation(format!(
                "table shape mismatch: {} ids, {} columns, values {:?}, mask {:?}",
                self.chemical_ids.len(),
                self.columns.len(),
                self.values.dim(),
                self.observed.dim()
            )));
        }
        let mut seen = HashSet::with_capacity(n);
        for id in &self.chemical_ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::Validation(format!("duplicate chemical_id '{id}'")));
            }
        }
        for (j, col) in self.columns.iter().enumerate() {
            if let Some(raw) = &col.raw {
                if raw.len() != n {
                    return Err(Error::Validation(format!("column '{}' has {} cells", col.name, raw.len())));
                }
                continue;
            }
            for i in 0..n {
                if self.observed[[i, j]] && !self.values[[i, j]].is_finite() {
                    return Err(Error::Validation(format!(
                        "non-finite observed value for '{}' in column '{}'",
                        self.chemical_ids[i], col.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_fully_observed(&self) -> bool {
        self.observed.iter().all(|&o| o)
    }

    pub fn row_completeness(&self, row: usize) -> f64 {
        let d = self.n_features();
        if d == 0 {
            return 1.0;
        }
        let seen = self.observed.row(row).iter().filter(|&&o| o).count();
        seen as f64 / d as f64
    }

    pub fn row_index(&self) -> HashMap<&str, usize> {
        self.chemical_ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect()
    }

    /// New table holding `rows` in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let columns = self
            .columns
            .iter()
            .map(|c| FeatureColumn {
                raw: c.raw.as_ref().map(|cells| rows.iter().map(|&r| cells[r].clone()).collect()),
                ..c.clone()
            })
            .collect();
        Self {
            chemical_ids: rows.iter().map(|&r| self.chemical_ids[r].clone()).collect(),
            columns,
            values: self.values.select(Axis(0), rows),
            observed: self.observed.select(Axis(0), rows),
        }
    }

    /// Category labels of an enumerated or raw categorical column, `None` for missing.
    pub fn decode_categorical(&self, column: usize) -> Option<Vec<Option<String>>> {
        let col = &self.columns[column];
        if col.kind != FeatureKind::Categorical {
            return None;
        }
        if let Some(raw) = &col.raw {
            return Some(raw.clone());
        }
        let levels = col.levels.as_ref()?;
        Some(
            (0..self.n_rows())
                .map(|i| {
                    self.observed[[i, column]]
                        .then(|| levels.get(self.values[[i, column]] as usize).cloned())
                        .flatten()
                })
                .collect(),
        )
    }
}

/// Drug–disease pairs, deduplicated in first-seen order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LinkTable {
    pub records: Vec<(String, String)>,
}

impl LinkTable {
    pub fn new<I, A, B>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (A, B)>,
        A: Into<String>,
        B: Into<String>,
    {
        let mut seen = HashSet::new();
        let mut records = Vec::new();
        for (a, b) in pairs {
            let pair = (a.into(), b.into());
            if seen.insert(pair.clone()) {
                records.push(pair);
            }
        }
        Self { records }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Links whose drug is present in `table`.
    pub fn restrict_to(&self, table: &FeatureTable) -> Self {
        let ids: HashSet<&str> = table.chemical_ids.iter().map(String::as_str).collect();
        Self {
            records: self.records.iter().filter(|(c, _)| ids.contains(c.as_str())).cloned().collect(),
        }
    }

    pub fn disease_ids(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        self.records
            .iter()
            .filter(|(_, d)| seen.insert(d.as_str()))
            .map(|(_, d)| d.clone())
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct FilterOutcome {
    pub table: FeatureTable,
    pub dropped: Vec<String>,
    /// Set when no row survived.
    pub warning: Option<String>,
}

/// Keeps rows whose observed fraction is at least `threshold`.
pub fn filter_completeness(table: &FeatureTable, threshold: f64) -> Result<FilterOutcome> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::Config(format!("completeness threshold {threshold} outside [0, 1]")));
    }
    let (keep, drop): (Vec<usize>, Vec<usize>) =
        (0..table.n_rows()).partition(|&i| table.row_completeness(i) >= threshold);
    let warning = (keep.is_empty() && table.n_rows() > 0)
        .then(|| format!("no row reached {:.0}% completeness", threshold * 100.0));
    Ok(FilterOutcome {
        table: table.select_rows(&keep),
        dropped: drop.iter().map(|&i| table.chemical_ids[i].clone()).collect(),
        warning,
    })
}

/// Per-column statistics from [`zscore_normalize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    /// Population standard deviation; 0 for constant columns.
    pub std: Vec<f64>,
    pub normalized: Vec<bool>,
}

impl NormStats {
    pub fn inverse(&self, table: &FeatureTable) -> FeatureTable {
        let mut out = table.clone();
        for (j, mut col) in out.values.axis_iter_mut(Axis(1)).enumerate() {
            if self.normalized[j] {
                col.mapv_inplace(|z| z * self.std[j] + self.mean[j]);
            }
        }
        out
    }
}

/// Z-scores numeric columns with the population standard deviation.
///
/// Constant columns become all zeros. Only observed cells enter the
/// statistics; categorical columns are left as they are.
pub fn zscore_normalize(table: &FeatureTable) -> (FeatureTable, NormStats) {
    let d = table.n_features();
    let mut out = table.clone();
    let mut stats = NormStats {
        mean: vec![0.0; d],
        std: vec![0.0; d],
        normalized: vec![false; d],
    };
    for j in 0..d {
        if table.columns[j].kind != FeatureKind::Numeric {
            continue;
        }
        let cells: Vec<f64> = (0..table.n_rows())
            .filter(|&i| table.observed[[i, j]])
            .map(|i| table.values[[i, j]])
            .collect();
        if cells.is_empty() {
            continue;
        }
        let n = cells.len() as f64;
        let mean = cells.iter().sum::<f64>() / n;
        let var = cells.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        // spread below rounding noise counts as constant
        let std = if std <= 1e-12 * mean.abs().max(1.0) { 0.0 } else { std };
        stats.mean[j] = mean;
        stats.std[j] = std;
        stats.normalized[j] = true;
        for i in 0..table.n_rows() {
            if table.observed[[i, j]] {
                out.values[[i, j]] = if std == 0.0 { 0.0 } else { (table.values[[i, j]] - mean) / std };
            }
        }
    }
    (out, stats)
}

/// Replaces categorical text with codes `0..K−1` in first-appearance order.
pub fn enumerate_categoricals(table: &FeatureTable) -> FeatureTable {
    let mut out = table.clone();
    for (j, col) in out.columns.iter_mut().enumerate() {
        let Some(raw) = col.raw.take() else { continue };
        let mut codes: BTreeMap<String, usize> = BTreeMap::new();
        let mut levels = Vec::new();
        for (i, cell) in raw.into_iter().enumerate() {
            match cell {
                Some(text) => {
                    let code = *codes.entry(text.clone()).or_insert_with(|| {
                        levels.push(text);
                        levels.len() - 1
                    });
                    out.values[[i, j]] = code as f64;
                    out.observed[[i, j]] = true;
                }
                None => {
                    out.values[[i, j]] = f64::NAN;
                    out.observed[[i, j]] = false;
                }
            }
        }
        col.levels = Some(levels);
    }
    out
}

/// One row per linked drug, in table order; disease labels are not carried.
pub fn unique_drug_view(table: &FeatureTable, links: &LinkTable) -> FeatureTable {
    let linked: HashSet<&str> = links.records.iter().map(|(c, _)| c.as_str()).collect();
    let mut seen = HashSet::new();
    let rows: Vec<usize> = (0..table.n_rows())
        .filter(|&i| {
            let id = table.chemical_ids[i].as_str();
            linked.contains(id) && seen.insert(id)
        })
        .collect();
    table.select_rows(&rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("C{i}")).collect()
    }

    fn masked(values: Array2<f64>) -> FeatureTable {
        let observed = values.mapv(|v| !v.is_nan());
        let names = (0..values.ncols()).map(|j| format!("f{j}")).collect::<Vec<_>>();
        FeatureTable::new(
            ids(values.nrows()),
            names.into_iter().map(FeatureColumn::numeric).collect(),
            values,
            observed,
        )
        .unwrap()
    }

    #[test]
    fn duplicate_ids_rejected() {
        let r = FeatureTable::from_dense(vec!["C1".into(), "C1".into()], vec!["a".into()], array![[1.0], [2.0]]);
        assert!(matches!(r, Err(Error::Validation(m)) if m.contains("C1")));
    }

    #[test]
    fn completeness_boundary() {
        let nan = f64::NAN;
        // 10 columns: row0 has 7 observed (kept), row1 has 6 (dropped)
        let mut v = Array2::from_elem((2, 10), 1.0);
        for j in 7..10 {
            v[[0, j]] = nan;
        }
        for j in 6..10 {
            v[[1, j]] = nan;
        }
        let out = filter_completeness(&masked(v), 0.70).unwrap();
        assert_eq!(out.table.chemical_ids, vec!["C0"]);
        assert_eq!(out.dropped, vec!["C1"]);

        // 100 columns with 69 observed is below threshold
        let mut v = Array2::from_elem((1, 100), 1.0);
        for j in 69..100 {
            v[[0, j]] = nan;
        }
        assert_eq!(filter_completeness(&masked(v), 0.70).unwrap().table.n_rows(), 0);
    }

    #[test]
    fn complete_table_unchanged_and_empty_warns() {
        let t = masked(array![[1.0, 2.0], [3.0, 4.0]]);
        assert_eq!(filter_completeness(&t, 0.7).unwrap().table, t);
        let t = masked(array![[f64::NAN, f64::NAN]]);
        let out = filter_completeness(&t, 0.7).unwrap();
        assert!(out.warning.is_some());
        assert!(filter_completeness(&t, 1.5).is_err());
    }

    #[test]
    fn zscore_hand_values() {
        let t = masked(array![[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]]);
        let (z, stats) = zscore_normalize(&t);
        let s = (1.5f64).sqrt(); // 1/√(2/3)
        for (got, want) in z.values.column(0).iter().zip([-s, 0.0, s]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!(z.values.column(1).iter().all(|&v| v == 0.0));
        assert_eq!(stats.std[1], 0.0);
        let back = stats.inverse(&z);
        for (a, b) in back.values.iter().zip(t.values.iter()) {
            assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn categorical_codes_first_appearance() {
        let col = FeatureColumn::categorical("c", vec![Some("b".into()), Some("a".into()), Some("b".into()), None]);
        let t = FeatureTable::new(
            ids(4),
            vec![col, FeatureColumn::numeric("x")],
            array![[f64::NAN, 1.0], [f64::NAN, 2.0], [f64::NAN, 3.0], [f64::NAN, 4.0]],
            array![[true, true], [true, true], [true, true], [false, true]],
        )
        .unwrap();
        let e = enumerate_categoricals(&t);
        assert_eq!(e.values.column(0).iter().take(3).copied().collect::<Vec<_>>(), vec![0.0, 1.0, 0.0]);
        assert!(!e.observed[[3, 0]]);
        assert_eq!(e.columns[0].levels.as_deref(), Some(&["b".to_string(), "a".to_string()][..]));
        assert_eq!(e.values.column(1), t.values.column(1));
        assert_eq!(e.decode_categorical(0), t.decode_categorical(0));
    }

    #[test]
    fn unique_view_and_rejoin() {
        let t = masked(array![[1.0], [2.0], [3.0]]);
        let links = LinkTable::new([
            ("C0", "D1"),
            ("C0", "D2"),
            ("C0", "D3"),
            ("C0", "D4"),
            ("C0", "D5"),
            ("C2", "D1"),
            ("C0", "D1"),
        ]);
        assert_eq!(links.len(), 6);
        let u = unique_drug_view(&t, &links);
        assert_eq!(u.chemical_ids, vec!["C0", "C2"]);
        let idx = u.row_index();
        let rejoined: Vec<_> = links.records.iter().filter(|(c, _)| idx.contains_key(c.as_str())).collect();
        assert_eq!(rejoined.len(), links.len());
    }
}
