use std::collections::HashSet;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

use super::table::{FeatureColumn, FeatureKind, FeatureTable, LinkTable};

fn ingestion(path: &Path, msg: impl Into<String>) -> Error {
    Error::Ingestion {
        path: path.display().to_string(),
        msg: msg.into(),
    }
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(file))
}

fn parse_column_header(path: &Path, cell: &str) -> Result<(String, FeatureKind)> {
    let (name, tag) = cell
        .rsplit_once(':')
        .ok_or_else(|| ingestion(path, format!("column '{cell}' lacks a ':num' or ':cat' annotation")))?;
    let kind = match tag {
        "num" => FeatureKind::Numeric,
        "cat" => FeatureKind::Categorical,
        other => return Err(ingestion(path, format!("unknown column kind '{other}' in '{cell}'"))),
    };
    Ok((name.to_string(), kind))
}

/// Reads `chemical_id,<name>:num|cat,...`; empty cells are missing.
pub fn load_feature_table(path: impl AsRef<Path>) -> Result<FeatureTable> {
    let path = path.as_ref();
    let mut rdr = reader(path)?;
    let mut records = rdr.records();
    let header = records.next().ok_or_else(|| ingestion(path, "missing header row"))??;
    if header.get(0).map(str::trim) != Some("chemical_id") {
        return Err(ingestion(path, "first header column must be 'chemical_id'"));
    }
    let specs: Vec<(String, FeatureKind)> =
        header.iter().skip(1).map(|c| parse_column_header(path, c.trim())).collect::<Result<_>>()?;
    let width = specs.len() + 1;

    let mut ids = Vec::new();
    let mut seen = HashSet::new();
    let mut numeric: Vec<f64> = Vec::new();
    let mut mask: Vec<bool> = Vec::new();
    let mut text: Vec<Vec<Option<String>>> = vec![Vec::new(); specs.len()];
    for record in records {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != width {
            return Err(ingestion(
                path,
                format!("line {line}: expected {width} fields, found {}", record.len()),
            ));
        }
        let id = record[0].trim().to_string();
        if id.is_empty() {
            return Err(ingestion(path, format!("line {line}: empty chemical_id")));
        }
        if !seen.insert(id.clone()) {
            return Err(ingestion(path, format!("line {line}: duplicate chemical_id '{id}'")));
        }
        ids.push(id);
        for (j, (name, kind)) in specs.iter().enumerate() {
            let cell = record[j + 1].trim();
            match kind {
                FeatureKind::Numeric if cell.is_empty() => {
                    numeric.push(f64::NAN);
                    mask.push(false);
                }
                FeatureKind::Numeric => {
                    let v: f64 = cell
                        .parse()
                        .ok()
                        .filter(|v: &f64| v.is_finite())
                        .ok_or_else(|| ingestion(path, format!("line {line}: column '{name}' has non-numeric value '{cell}'")))?;
                    numeric.push(v);
                    mask.push(true);
                }
                FeatureKind::Categorical => {
                    numeric.push(f64::NAN);
                    mask.push(!cell.is_empty());
                    text[j].push((!cell.is_empty()).then(|| cell.to_string()));
                }
            }
        }
    }
    let n = ids.len();
    let values = Array2::from_shape_vec((n, specs.len()), numeric).expect("row-major fill");
    let observed = Array2::from_shape_vec((n, specs.len()), mask).expect("row-major fill");
    let columns = specs
        .into_iter()
        .zip(text)
        .map(|((name, kind), cells)| match kind {
            FeatureKind::Numeric => FeatureColumn::numeric(name),
            FeatureKind::Categorical => FeatureColumn::categorical(name, cells),
        })
        .collect();
    FeatureTable::new(ids, columns, values, observed)
}

/// Writes a table in the format [`load_feature_table`] reads.
///
/// Numbers use the shortest representation that parses back to the same
/// bits; categorical columns are written as their labels.
pub fn save_feature_table(table: &FeatureTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["chemical_id".to_string()];
    header.extend(table.columns.iter().map(|c| format!("{}:{}", c.name, c.kind.tag())));
    w.write_record(&header)?;
    let decoded: Vec<Option<Vec<Option<String>>>> =
        (0..table.n_features()).map(|j| table.decode_categorical(j)).collect();
    for (i, id) in table.chemical_ids.iter().enumerate() {
        let mut row = vec![id.clone()];
        for j in 0..table.n_features() {
            let cell = match &decoded[j] {
                Some(labels) => labels[i].clone().unwrap_or_default(),
                None if table.observed[[i, j]] => format!("{}", table.values[[i, j]]),
                None => String::new(),
            };
            row.push(cell);
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads `chemical_id,disease_id`, dropping duplicate pairs.
pub fn load_links(path: impl AsRef<Path>) -> Result<LinkTable> {
    let path = path.as_ref();
    let mut rdr = reader(path)?;
    let mut records = rdr.records();
    let header = records.next().ok_or_else(|| ingestion(path, "missing header row"))??;
    if header.len() != 2 || &header[0] != "chemical_id" || &header[1] != "disease_id" {
        return Err(ingestion(path, "header must be 'chemical_id,disease_id'"));
    }
    let mut pairs = Vec::new();
    for record in records {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 2 {
            return Err(ingestion(path, format!("line {line}: expected 2 fields, found {}", record.len())));
        }
        let (c, d) = (record[0].trim(), record[1].trim());
        if c.is_empty() || d.is_empty() {
            return Err(ingestion(path, format!("line {line}: empty identifier")));
        }
        pairs.push((c.to_string(), d.to_string()));
    }
    Ok(LinkTable::new(pairs))
}

pub fn save_links(links: &LinkTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["chemical_id", "disease_id"])?;
    for (c, d) in &links.records {
        w.write_record([c, d])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Writes `chemical_id,cluster`.
pub fn save_truth_clusters(ids: &[String], clusters: &[usize], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["chemical_id", "cluster"])?;
    for (id, c) in ids.iter().zip(clusters) {
        w.write_record([id.as_str(), &c.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
