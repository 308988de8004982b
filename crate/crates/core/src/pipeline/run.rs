use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autoencoder::{build_halving_architecture, train_autoencoder, Autoencoder, LatentEmbedding, TrainConfig};
use crate::checkpoint;
use crate::dec::{
    k_sweep, load_clusters_csv, partition_clusters, save_clusters_csv, save_sweep_csv, train_dec, ClusterData,
    ClusterPartition, DecConfig, SweepConfig,
};
use crate::error::{Error, Result};
use crate::gnn::{evaluate_edges, predict_links, save_history_csv, train_gnn, EpochRecord, GnnModel, GnnTrainConfig, MessageGraph};
use crate::graph::{attach_negatives, build_bipartite, split_edges, BipartiteGraph, Edge, EdgeSplit};
use crate::metrics::{save_metrics_csv, EvalReport};
use crate::numerics::derive_seed;
use crate::preprocess::{clean, load_feature_table, load_links, save_feature_table, save_links, unique_drug_view, FeatureTable, LinkTable};

use super::config::PipelineConfig;
use super::ranking::{enumerate_candidates, rank_and_filter, save_predictions_csv, Prediction, RankedPredictions};

pub const CLEANED_FEATURES: &str = "cleaned_features.csv";
pub const LINKS_USED: &str = "links_used.csv";
pub const AUTOENCODER: &str = "autoencoder.json";
pub const EMBEDDINGS: &str = "embeddings.csv";
pub const CLUSTERS: &str = "clusters.csv";
pub const SWEEP: &str = "sweep.csv";
pub const METRICS: &str = "metrics.csv";
pub const PREDICTIONS: &str = "predictions.csv";
pub const PREDICTIONS_CONFIDENT: &str = "predictions_confident.csv";
pub const MANIFEST: &str = "manifest.json";
pub const GNN_BUNDLE: &str = "gnn.json";

const BUNDLE_FORMAT: &str = "repurpose-gnn-bundle";
const BUNDLE_VERSION: u32 = 1;

pub fn cluster_dir(output_dir: &Path, cluster_id: usize) -> PathBuf {
    output_dir.join("clusters").join(format!("cluster_{cluster_id}"))
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Order in which clusters are handed to the worker pool. Outputs do not
    /// depend on it.
    pub cluster_order: Option<Vec<usize>>,
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub cluster_id: usize,
    pub n_drugs: usize,
    pub n_diseases: usize,
    pub n_links: usize,
    /// `trained` or `skipped: <reason>`.
    pub status: String,
    pub best_epoch: Option<usize>,
    pub epochs_run: Option<usize>,
    pub test: Option<EvalReport>,
    pub n_candidates: usize,
    pub n_confident: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub crate_version: String,
    pub status: String,
    pub error: Option<String>,
    pub config: PipelineConfig,
    pub seeds: BTreeMap<String, u64>,
    /// Seconds per stage.
    pub wall_times: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
    pub selected_k: Option<usize>,
    pub clusters: Vec<ClusterSummary>,
    pub n_predictions: usize,
    pub n_confident: usize,
}

impl Manifest {
    fn new(config: &PipelineConfig) -> Self {
        Self {
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            status: "running".into(),
            error: None,
            config: config.clone(),
            seeds: BTreeMap::from([("master".to_string(), config.master_seed)]),
            wall_times: BTreeMap::new(),
            warnings: Vec::new(),
            selected_k: None,
            clusters: Vec::new(),
            n_predictions: 0,
            n_confident: 0,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }

    fn seed(&mut self, label: &str) -> u64 {
        let s = derive_seed(self.config.master_seed, label);
        self.seeds.insert(label.to_string(), s);
        s
    }

    fn timed<T>(&mut self, stage: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f(self);
        self.wall_times.insert(stage.to_string(), start.elapsed().as_secs_f64());
        out
    }
}

/// Cleaned drug table and the links that refer to its drugs.
#[derive(Debug, Clone)]
pub struct Preprocessed {
    pub table: FeatureTable,
    pub links: LinkTable,
}

/// Loads the inputs, keeps one row per linked drug, cleans the table and
/// drops links whose drug did not survive. Writes the cleaned table and the
/// retained links.
pub fn stage_preprocess(config: &PipelineConfig, warnings: &mut Vec<String>) -> Result<Preprocessed> {
    let raw = load_feature_table(&config.paths.features)?;
    let links = load_links(&config.paths.links)?;
    let view = unique_drug_view(&raw, &links);
    if view.n_rows() < raw.n_rows() {
        warnings.push(format!("{} drugs without links or duplicated ids ignored", raw.n_rows() - view.n_rows()));
    }
    let cleaned = clean(&view, config.preprocess.completeness_threshold, config.preprocess.knn_k)?;
    warnings.extend(cleaned.warnings);
    if cleaned.table.n_rows() == 0 {
        return Err(Error::Validation("no drugs left after cleaning".into()));
    }
    let kept = links.restrict_to(&cleaned.table);
    if kept.len() < links.len() {
        warnings.push(format!("{} links to removed or unknown drugs ignored", links.len() - kept.len()));
    }
    let out = &config.paths.output_dir;
    save_feature_table(&cleaned.table, out.join(CLEANED_FEATURES))?;
    save_links(&kept, out.join(LINKS_USED))?;
    Ok(Preprocessed {
        table: cleaned.table,
        links: kept,
    })
}

pub fn load_preprocessed(output_dir: &Path) -> Result<Preprocessed> {
    Ok(Preprocessed {
        table: load_feature_table(output_dir.join(CLEANED_FEATURES))?,
        links: load_links(output_dir.join(LINKS_USED))?,
    })
}

/// One autoencoder per learning rate in the grid, all from the same seed;
/// the lowest best loss wins. Writes the winner and a grid summary.
pub fn stage_autoencoder(config: &PipelineConfig, data: &Preprocessed, seed: u64) -> Result<Autoencoder> {
    let spec = build_halving_architecture(data.table.n_features(), config.autoencoder.latent_dim)?;
    let mut best: Option<(f64, Autoencoder)> = None;
    let out = &config.paths.output_dir;
    let mut w = csv::Writer::from_path(out.join("autoencoder_grid.csv"))?;
    w.write_record(["lr", "best_loss", "best_epoch", "epochs"])?;
    for &lr in &config.autoencoder.lr_grid {
        let train = TrainConfig {
            lr,
            seed,
            ..config.autoencoder.train.clone()
        };
        let (model, report) = train_autoencoder(&data.table, &spec, &train)?;
        w.write_record([
            lr.to_string(),
            report.best_loss.to_string(),
            report.best_epoch.to_string(),
            report.loss_history.len().to_string(),
        ])?;
        if best.as_ref().is_none_or(|(l, _)| report.best_loss < *l) {
            best = Some((report.best_loss, model));
        }
    }
    w.flush().map_err(|e| Error::io(out.join("autoencoder_grid.csv"), e))?;
    let (_, model) = best.expect("lr grid is validated non-empty");
    model.save(out.join(AUTOENCODER))?;
    Ok(model)
}

#[derive(Debug, Clone)]
pub struct Clustering {
    pub embedding: LatentEmbedding,
    pub assignments: Vec<usize>,
    pub k: usize,
    pub silhouette: f64,
}

/// Chooses k (fixed or by silhouette sweep on the autoencoder embedding),
/// refines with DEC and writes the refined embedding and assignments.
pub fn stage_cluster(
    config: &PipelineConfig,
    data: &Preprocessed,
    model: &Autoencoder,
    sweep_seed: u64,
    dec_seed: u64,
    warnings: &mut Vec<String>,
) -> Result<Clustering> {
    let out = &config.paths.output_dir;
    let n = data.table.n_rows();
    let k = match config.dec.k {
        Some(k) => {
            if k > n {
                return Err(Error::Config(format!("k = {k} exceeds the {n} drugs")));
            }
            k
        }
        None => {
            let mut sweep = SweepConfig {
                seed: sweep_seed,
                ..config.dec.sweep.clone()
            };
            if sweep.k_max > n {
                warnings.push(format!("k sweep capped at {n} drugs (configured {})", sweep.k_max));
                sweep.k_max = n;
            }
            let z = model.encode_matrix(&data.table.values)?;
            let result = k_sweep(z.view(), &sweep)?;
            save_sweep_csv(&result.curve, out.join(SWEEP))?;
            result.selected
        }
    };
    let dec = DecConfig {
        seed: dec_seed,
        ..config.dec.train.clone()
    };
    let outcome = train_dec(model, &data.table, k, &dec)?;
    if !outcome.converged {
        warnings.push(format!("DEC reached {} epochs without settling", dec.max_epochs));
    }
    outcome.embedding.save_csv(out.join(EMBEDDINGS))?;
    save_clusters_csv(&outcome.embedding.chemical_ids, &outcome.model.hard_assignments, out.join(CLUSTERS))?;
    Ok(Clustering {
        embedding: outcome.embedding,
        assignments: outcome.model.hard_assignments,
        k,
        silhouette: outcome.model.silhouette,
    })
}

/// Rebuilds the partition from `embeddings.csv`, `clusters.csv` and the
/// retained links in `output_dir`.
pub fn load_partition(output_dir: &Path) -> Result<ClusterPartition> {
    let emb = LatentEmbedding::load_csv(output_dir.join(EMBEDDINGS))?;
    let (ids, assignments) = load_clusters_csv(output_dir.join(CLUSTERS))?;
    if ids != emb.chemical_ids {
        return Err(Error::Validation(format!("{CLUSTERS} and {EMBEDDINGS} list different drugs")));
    }
    let links = load_links(output_dir.join(LINKS_USED))?;
    partition_clusters(&ids, &emb.vectors, &assignments, &links)
}

/// A trained cluster model with what is needed to score new pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnnBundle {
    pub cluster_id: usize,
    pub model: GnnModel,
    pub drug_ids: Vec<String>,
    pub disease_ids: Vec<String>,
    pub drug_features: Array2<f64>,
    pub train_edges: Vec<Edge>,
}

impl GnnBundle {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        checkpoint::save(BUNDLE_FORMAT, BUNDLE_VERSION, self, path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        checkpoint::load(BUNDLE_FORMAT, BUNDLE_VERSION, path)
    }

    pub fn message_graph(&self) -> Result<MessageGraph> {
        MessageGraph::from_edges(self.drug_ids.len(), self.disease_ids.len(), &self.train_edges)
    }

    /// Probabilities for every pair that is not a training edge.
    pub fn predict_all(&self) -> Result<Vec<Prediction>> {
        let graph = BipartiteGraph::new(
            self.drug_ids.clone(),
            self.drug_features.clone(),
            self.disease_ids.clone(),
            self.model.disease_embeddings.clone(),
            self.train_edges.clone(),
            0,
        )?;
        let candidates = enumerate_candidates(&graph, &self.train_edges);
        self.predict_pairs(&candidates)
    }

    pub fn predict_pairs(&self, pairs: &[Edge]) -> Result<Vec<Prediction>> {
        let probs = predict_links(&self.model, &self.message_graph()?, &self.drug_features, pairs)?;
        Ok(pairs
            .iter()
            .zip(probs)
            .map(|(&(d, s), probability)| Prediction {
                cluster_id: self.cluster_id,
                chemical_id: self.drug_ids[d].clone(),
                disease_id: self.disease_ids[s].clone(),
                probability,
            })
            .collect())
    }
}

/// Result of training one cluster.
#[derive(Debug, Clone)]
pub struct ClusterOutcome {
    pub graph: BipartiteGraph,
    pub split: EdgeSplit,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub test: Option<EvalReport>,
    pub bundle: GnnBundle,
    pub predictions: Vec<Prediction>,
}

/// Graph, split, GNN training, test metrics and candidate scores for one
/// cluster, all driven by `seed`.
pub fn run_cluster(cluster: &ClusterData, config: &PipelineConfig, seed: u64) -> Result<ClusterOutcome> {
    let graph = build_bipartite(cluster, seed)?;
    let mut split = split_edges(&graph, config.split.ratios(), seed)?;
    attach_negatives(&graph, &mut split, seed)?;
    let gnn = GnnTrainConfig {
        seed,
        ..config.gnn.clone()
    };
    let run = train_gnn(&graph, &split, &gnn)?;
    let test = if split.test_pos.is_empty() {
        None
    } else {
        Some(evaluate_edges(&run.model, &run.message_graph, &graph.drug_features, &split.test_pos, &split.test_neg)?)
    };
    let bundle = GnnBundle {
        cluster_id: cluster.cluster_id,
        model: run.model,
        drug_ids: graph.drug_ids.clone(),
        disease_ids: graph.disease_ids.clone(),
        drug_features: graph.drug_features.clone(),
        train_edges: split.train_pos.clone(),
    };
    let candidates = enumerate_candidates(&graph, &split.train_pos);
    let predictions = bundle.predict_pairs(&candidates)?;
    Ok(ClusterOutcome {
        graph,
        split,
        best_epoch: run.best_epoch,
        history: run.history,
        test,
        bundle,
        predictions,
    })
}

fn skippable(e: &Error) -> bool {
    matches!(e, Error::Graph(_) | Error::Split(_) | Error::Sampling { .. })
}

/// Trains every cluster in parallel, then writes per-cluster artifacts,
/// `metrics.csv` and both prediction files in cluster-id order.
pub fn stage_gnn(
    config: &PipelineConfig,
    partition: &ClusterPartition,
    options: &RunOptions,
    manifest: &mut Manifest,
) -> Result<RankedPredictions> {
    let out = &config.paths.output_dir;
    let order: Vec<usize> = match &options.cluster_order {
        Some(o) => {
            let mut sorted = o.clone();
            sorted.sort_unstable();
            if sorted != (0..partition.clusters.len()).collect::<Vec<_>>() {
                return Err(Error::Config(format!(
                    "cluster order {o:?} is not a permutation of 0..{}",
                    partition.clusters.len()
                )));
            }
            o.clone()
        }
        None => (0..partition.clusters.len()).collect(),
    };
    let seeds: Vec<u64> = (0..partition.clusters.len()).map(|c| manifest.seed(&format!("cluster/{c}"))).collect();
    let mut results: Vec<(usize, Result<ClusterOutcome>)> = order
        .par_iter()
        .map(|&c| (c, run_cluster(&partition.clusters[c], config, seeds[c])))
        .collect();
    results.sort_by_key(|(c, _)| *c);

    let mut metrics_rows = Vec::new();
    let mut predictions = Vec::new();
    let mut summaries = Vec::new();
    for (c, result) in results {
        let cluster = &partition.clusters[c];
        let mut summary = ClusterSummary {
            cluster_id: c,
            n_drugs: cluster.chemical_ids.len(),
            n_diseases: cluster.links.disease_ids().len(),
            n_links: cluster.links.len(),
            status: "trained".into(),
            best_epoch: None,
            epochs_run: None,
            test: None,
            n_candidates: 0,
            n_confident: 0,
        };
        match result {
            Ok(outcome) => {
                let dir = cluster_dir(out, c);
                std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
                save_history_csv(&outcome.history, dir.join("history.csv"))?;
                let rows: Vec<(usize, EvalReport)> = outcome.test.iter().map(|r| (c, *r)).collect();
                save_metrics_csv(&rows, dir.join(METRICS))?;
                outcome.bundle.save(dir.join(GNN_BUNDLE))?;
                metrics_rows.extend(rows);
                summary.best_epoch = Some(outcome.best_epoch);
                summary.epochs_run = Some(outcome.history.len());
                summary.test = outcome.test;
                summary.n_candidates = outcome.predictions.len();
                summary.n_confident =
                    outcome.predictions.iter().filter(|p| p.probability >= config.ranking.probability_threshold).count();
                predictions.extend(outcome.predictions);
            }
            Err(e) if skippable(&e) => {
                manifest.warnings.push(format!("cluster {c} skipped: {e}"));
                summary.status = format!("skipped: {e}");
            }
            Err(e) => return Err(e.in_stage("gnn", Some(c))),
        }
        summaries.push(summary);
    }
    manifest.clusters = summaries;
    save_metrics_csv(&metrics_rows, out.join(METRICS))?;
    let ranked = rank_and_filter(predictions, config.ranking.probability_threshold);
    save_predictions_csv(&ranked.records, out.join(PREDICTIONS))?;
    save_predictions_csv(&ranked.confident, out.join(PREDICTIONS_CONFIDENT))?;
    manifest.n_predictions = ranked.records.len();
    manifest.n_confident = ranked.confident.len();
    Ok(ranked)
}

/// Runs every stage with default options.
pub fn run_pipeline(config: &PipelineConfig) -> Result<Manifest> {
    run_pipeline_with(config, &RunOptions::default())
}

/// Runs every stage and writes `manifest.json`, also when a stage fails.
pub fn run_pipeline_with(config: &PipelineConfig, options: &RunOptions) -> Result<Manifest> {
    config.validate()?;
    let mut manifest = Manifest::new(config);
    let result = with_pool(options.threads, || run_stages(config, options, &mut manifest));
    let path = config.paths.output_dir.join(MANIFEST);
    match result {
        Ok(()) => {
            manifest.status = "ok".into();
            manifest.save(&path)?;
            Ok(manifest)
        }
        Err(e) => {
            manifest.status = "failed".into();
            manifest.error = Some(e.to_string());
            // the original error matters more than a failed manifest write
            let _ = manifest.save(&path);
            Err(e)
        }
    }
}

/// Runs `f` on a dedicated pool of `threads` workers, or on the global pool.
pub fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match threads {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {n} worker threads: {e}")))?
            .install(f),
    }
}

fn run_stages(config: &PipelineConfig, options: &RunOptions, manifest: &mut Manifest) -> Result<()> {
    let data = manifest.timed("preprocess", |m| {
        stage_preprocess(config, &mut m.warnings).map_err(|e| e.in_stage("preprocess", None))
    })?;
    let ae_seed = manifest.seed("autoencoder");
    let model = manifest.timed("autoencoder", |_| {
        stage_autoencoder(config, &data, ae_seed).map_err(|e| e.in_stage("autoencoder", None))
    })?;
    let sweep_seed = manifest.seed("sweep");
    let dec_seed = manifest.seed("dec");
    let clustering = manifest.timed("cluster", |m| {
        stage_cluster(config, &data, &model, sweep_seed, dec_seed, &mut m.warnings).map_err(|e| e.in_stage("cluster", None))
    })?;
    manifest.selected_k = Some(clustering.k);
    let partition = partition_clusters(
        &clustering.embedding.chemical_ids,
        &clustering.embedding.vectors,
        &clustering.assignments,
        &data.links,
    )
    .map_err(|e| e.in_stage("partition", None))?;
    manifest.timed("gnn", |m| stage_gnn(config, &partition, options, m))?;
    Ok(())
}

/// Runs only the GNN stage from artifacts already in the output directory.
pub fn run_gnn_stage(config: &PipelineConfig, options: &RunOptions) -> Result<Manifest> {
    config.validate_values()?;
    let mut manifest = Manifest::new(config);
    let partition = load_partition(&config.paths.output_dir).map_err(|e| e.in_stage("partition", None))?;
    with_pool(options.threads, || stage_gnn(config, &partition, options, &mut manifest))?;
    manifest.status = "ok".into();
    manifest.save(config.paths.output_dir.join("manifest_gnn.json"))?;
    Ok(manifest)
}
