//! End-to-end orchestration: preprocessing, autoencoder, clustering,
//! per-cluster link prediction and the ranked report.

mod config;
mod grid;
mod ranking;
mod run;

pub use config::{AutoencoderParams, DecParams, Paths, PipelineConfig, PreprocessParams, RankingParams, SplitParams, CONFIG_VERSION};
pub use grid::{default_grid, hyperparameter_grid, save_grid_csv, GridPoint, GridRow};
pub use ranking::{
    enumerate_candidates, load_predictions_csv, rank_and_filter, save_predictions_csv, Prediction, RankedPredictions,
    RankedRecord,
};
pub use run::*;
