use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnn::{evaluate_edges, train_gnn, GnnTrainConfig};
use crate::graph::{BipartiteGraph, EdgeSplit};
use crate::metrics::EvalReport;

/// One grid row's hyperparameters; everything else comes from the base config.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub n_layers: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub dropout: f64,
    pub hidden_dim: usize,
}

impl GridPoint {
    pub fn apply(&self, base: &GnnTrainConfig) -> GnnTrainConfig {
        GnnTrainConfig {
            n_layers: self.n_layers,
            lr: self.lr,
            weight_decay: self.weight_decay,
            dropout: self.dropout,
            hidden_dim: self.hidden_dim,
            ..base.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub point: GridPoint,
    /// Test-split metrics, or the error that stopped this run.
    pub outcome: std::result::Result<EvalReport, String>,
}

/// One-at-a-time variations around 3 layers, lr 0.001, no weight decay,
/// dropout 0.1 and hidden width 32, followed by the same point at width 128.
pub fn default_grid() -> Vec<GridPoint> {
    let base = GridPoint {
        n_layers: 3,
        lr: 1e-3,
        weight_decay: 0.0,
        dropout: 0.1,
        hidden_dim: 32,
    };
    let mut grid = Vec::with_capacity(17);
    grid.extend([1, 2, 4, 5].map(|n_layers| GridPoint { n_layers, ..base }));
    grid.extend([1e-2, 5e-3].map(|lr| GridPoint { lr, ..base }));
    grid.extend([1e-3, 1e-4, 1e-5, 1e-6].map(|weight_decay| GridPoint { weight_decay, ..base }));
    grid.extend([0.2, 0.3, 0.4, 0.5].map(|dropout| GridPoint { dropout, ..base }));
    grid.extend([16, 64, 128].map(|hidden_dim| GridPoint { hidden_dim, ..base }));
    grid
}

/// Trains one model per grid point and scores it on the test split.
///
/// A failing point is recorded with its error and the remaining points
/// still run. Configuration errors in the base abort immediately.
pub fn hyperparameter_grid(
    graph: &BipartiteGraph,
    split: &EdgeSplit,
    base: &GnnTrainConfig,
    points: &[GridPoint],
) -> Result<Vec<GridRow>> {
    base.validate()?;
    if split.test_pos.is_empty() || split.test_neg.is_empty() {
        return Err(Error::Split("grid needs test positives and negatives".into()));
    }
    Ok(points
        .par_iter()
        .map(|point| {
            let outcome = train_gnn(graph, split, &point.apply(base))
                .and_then(|run| evaluate_edges(&run.model, &run.message_graph, &graph.drug_features, &split.test_pos, &split.test_neg))
                .map_err(|e| e.to_string());
            GridRow { point: *point, outcome }
        })
        .collect())
}

/// Writes `gnn_layers,lr,weight_decay,dropout,hidden_dim,accuracy,precision,recall,f1,roc_auc,status`.
pub fn save_grid_csv(rows: &[GridRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "gnn_layers", "lr", "weight_decay", "dropout", "hidden_dim", "accuracy", "precision", "recall", "f1", "roc_auc", "status",
    ])?;
    for row in rows {
        let p = &row.point;
        let mut rec = vec![
            p.n_layers.to_string(),
            p.lr.to_string(),
            p.weight_decay.to_string(),
            p.dropout.to_string(),
            p.hidden_dim.to_string(),
        ];
        match &row.outcome {
            Ok(r) => {
                rec.extend([r.accuracy, r.precision, r.recall, r.f1].map(|v| v.to_string()));
                rec.push(r.roc_auc.map(|a| a.to_string()).unwrap_or_default());
                rec.push("ok".into());
            }
            Err(msg) => {
                rec.extend(std::iter::repeat_n(String::new(), 5));
                rec.push(format!("failed: {msg}"));
            }
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{attach_negatives, split_edges, DEFAULT_SPLIT};
    use ndarray::Array2;

    fn small_graph() -> (BipartiteGraph, EdgeSplit) {
        let nd = 12;
        let ns = 6;
        let feats = Array2::from_shape_fn((nd, 4), |(i, j)| if (i < 6) == (j < 2) { 1.0 } else { 0.0 });
        let edges = (0..nd).flat_map(|d| (0..ns).filter(move |&s| (d < 6) == (s < 3)).map(move |s| (d, s))).collect();
        let g = BipartiteGraph::new(
            (0..nd).map(|i| format!("C{i}")).collect(),
            feats,
            (0..ns).map(|i| format!("D{i}")).collect(),
            Array2::from_elem((ns, 4), 0.01),
            edges,
            0,
        )
        .unwrap();
        let mut split = split_edges(&g, DEFAULT_SPLIT, 1).unwrap();
        attach_negatives(&g, &mut split, 1).unwrap();
        (g, split)
    }

    fn quick() -> GnnTrainConfig {
        GnnTrainConfig {
            max_epochs: 3,
            hidden_dim: 4,
            ..GnnTrainConfig::default()
        }
    }

    #[test]
    fn default_grid_varies_one_thing_at_a_time() {
        let grid = default_grid();
        assert_eq!(grid.len(), 17);
        let base = GridPoint { hidden_dim: 32, ..grid[16] };
        assert_eq!(grid[16].hidden_dim, 128);
        for p in &grid {
            let diffs = [
                p.n_layers != base.n_layers,
                p.lr != base.lr,
                p.weight_decay != base.weight_decay,
                p.dropout != base.dropout,
                p.hidden_dim != base.hidden_dim,
            ];
            assert_eq!(diffs.iter().filter(|&&d| d).count(), 1, "{p:?}");
        }
    }

    #[test]
    fn one_row_per_point_and_failures_are_recorded() {
        let (g, split) = small_graph();
        let grid = [GridPoint { hidden_dim: 4, ..default_grid()[0] }];
        let rows = hyperparameter_grid(&g, &split, &quick(), &grid).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].outcome.is_ok());

        let bad = GridPoint { dropout: 1.5, ..grid[0] };
        let rows = hyperparameter_grid(&g, &split, &quick(), &[bad, grid[0]]).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows[0].outcome.is_err());
        assert!(rows[1].outcome.is_ok());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("grid.csv");
        save_grid_csv(&rows, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().nth(1).unwrap().contains("failed"));
        assert!(text.lines().nth(2).unwrap().ends_with(",ok"));
    }
}
