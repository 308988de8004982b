use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use repurpose::autoencoder::Autoencoder;
use repurpose::graph::{attach_negatives, build_bipartite, split_edges};
use repurpose::numerics::derive_seed;
use repurpose::pipeline::{
    cluster_dir, default_grid, hyperparameter_grid, load_partition, load_preprocessed, rank_and_filter, run_gnn_stage,
    run_pipeline_with, save_grid_csv, save_predictions_csv, stage_autoencoder, stage_cluster, stage_preprocess, GnnBundle,
    PipelineConfig, RunOptions, AUTOENCODER, GNN_BUNDLE,
};
use repurpose::preprocess::{generate_synthetic, save_feature_table, save_links, save_truth_clusters, SynthConfig};
use repurpose::{Error, Result};

#[derive(Parser)]
#[command(name = "repurpose", version, about = "Drug clustering and per-cluster link prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset with planted clusters and a matching config.
    Synth(SynthArgs),
    /// Filter, impute and normalize the feature table.
    Preprocess(Common),
    /// Train the autoencoder over the learning-rate grid.
    TrainAe(Common),
    /// Pick k, refine with DEC and write cluster assignments.
    Cluster(Common),
    /// Train one GNN per cluster and write ranked predictions.
    TrainGnn(Common),
    /// Hyperparameter grid on the cluster with the most links.
    Grid(GridArgs),
    /// Score every non-training pair of one cluster with its saved model.
    Predict(PredictArgs),
    /// Run every stage.
    RunAll(RunAllArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_clusters: Option<usize>,
    #[arg(long)]
    drugs_per_cluster: Option<usize>,
    #[arg(long)]
    diseases_per_cluster: Option<usize>,
    #[arg(long)]
    feature_dim: Option<usize>,
    #[arg(long)]
    noise_sigma: Option<f64>,
    #[arg(long)]
    link_density_within: Option<f64>,
    #[arg(long)]
    link_density_cross: Option<f64>,
    #[arg(long)]
    missing_rate: Option<f64>,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON config; flags below override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long)]
    links: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides master_seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    completeness_threshold: Option<f64>,
    #[arg(long)]
    knn_k: Option<usize>,
    #[arg(long)]
    latent_dim: Option<usize>,
    #[arg(long)]
    ae_epochs: Option<usize>,
    /// Fixed cluster count instead of the silhouette sweep.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long)]
    dec_epochs: Option<usize>,
    #[arg(long)]
    gnn_layers: Option<usize>,
    #[arg(long)]
    gnn_lr: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    hidden_dim: Option<usize>,
    #[arg(long)]
    gnn_epochs: Option<usize>,
    #[arg(long)]
    probability_threshold: Option<f64>,
}

#[derive(Args)]
struct GridArgs {
    #[command(flatten)]
    common: Common,
    /// Defaults to grid.csv in the output directory.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    cluster: usize,
    /// Defaults to cluster_<id>_predictions.csv in the output directory.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct RunAllArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated cluster ids in the order they are scheduled.
    #[arg(long, value_delimiter = ',')]
    cluster_order: Option<Vec<usize>>,
}

fn build_config(c: &Common) -> Result<PipelineConfig> {
    let mut cfg = match &c.config {
        Some(p) => PipelineConfig::load(p)?,
        None => {
            let (Some(f), Some(l), Some(o)) = (&c.features, &c.links, &c.out) else {
                return Err(Error::Config("give --config or all of --features, --links and --out".into()));
            };
            PipelineConfig::new(f, l, o)
        }
    };
    if let Some(v) = &c.features {
        cfg.paths.features = v.clone();
    }
    if let Some(v) = &c.links {
        cfg.paths.links = v.clone();
    }
    if let Some(v) = &c.out {
        cfg.paths.output_dir = v.clone();
    }
    macro_rules! set {
        ($flag:ident => $($field:ident).+) => {
            if let Some(v) = c.$flag {
                cfg.$($field).+ = v;
            }
        };
    }
    set!(seed => master_seed);
    set!(completeness_threshold => preprocess.completeness_threshold);
    set!(knn_k => preprocess.knn_k);
    set!(latent_dim => autoencoder.latent_dim);
    set!(ae_epochs => autoencoder.train.max_epochs);
    set!(k_max => dec.sweep.k_max);
    set!(dec_epochs => dec.train.max_epochs);
    set!(gnn_layers => gnn.n_layers);
    set!(gnn_lr => gnn.lr);
    set!(weight_decay => gnn.weight_decay);
    set!(dropout => gnn.dropout);
    set!(hidden_dim => gnn.hidden_dim);
    set!(gnn_epochs => gnn.max_epochs);
    set!(probability_threshold => ranking.probability_threshold);
    if c.k.is_some() {
        cfg.dec.k = c.k;
    }
    cfg.validate_values()?;
    std::fs::create_dir_all(&cfg.paths.output_dir).map_err(|e| Error::Config(format!("{}: {e}", cfg.paths.output_dir.display())))?;
    Ok(cfg)
}

fn synth(a: &SynthArgs) -> Result<()> {
    let mut sc = SynthConfig::default();
    macro_rules! set {
        ($($f:ident),+) => { $(if let Some(v) = a.$f { sc.$f = v; })+ };
    }
    set!(seed, n_clusters, drugs_per_cluster, diseases_per_cluster, feature_dim, noise_sigma, link_density_within, link_density_cross, missing_rate);
    let data = generate_synthetic(&sc)?;
    std::fs::create_dir_all(&a.out).map_err(|e| Error::Config(format!("{}: {e}", a.out.display())))?;
    save_feature_table(&data.features, a.out.join("features.csv"))?;
    save_links(&data.links, a.out.join("links.csv"))?;
    save_truth_clusters(&data.features.chemical_ids, &data.truth, a.out.join("truth.csv"))?;
    let cfg = PipelineConfig::new(a.out.join("features.csv"), a.out.join("links.csv"), a.out.join("run"));
    cfg.save(a.out.join("config.json"))?;
    println!(
        "{} drugs, {} links, {} features -> {}",
        data.features.n_rows(),
        data.links.len(),
        data.features.n_features(),
        a.out.display()
    );
    Ok(())
}

fn grid(a: &GridArgs) -> Result<()> {
    let cfg = build_config(&a.common)?;
    let partition = load_partition(&cfg.paths.output_dir)?;
    let cluster = partition
        .largest_by_links()
        .ok_or_else(|| Error::Graph("no cluster has links".into()))?;
    let seed = derive_seed(cfg.master_seed, &format!("cluster/{}", cluster.cluster_id));
    let graph = build_bipartite(cluster, seed)?;
    let mut split = split_edges(&graph, cfg.split.ratios(), seed)?;
    attach_negatives(&graph, &mut split, seed)?;
    let base = repurpose::gnn::GnnTrainConfig { seed, ..cfg.gnn.clone() };
    let rows = hyperparameter_grid(&graph, &split, &base, &default_grid())?;
    let path = a.output.clone().unwrap_or_else(|| cfg.paths.output_dir.join("grid.csv"));
    save_grid_csv(&rows, &path)?;
    println!("cluster {} ({} links): {} grid rows -> {}", cluster.cluster_id, cluster.links.len(), rows.len(), path.display());
    Ok(())
}

fn predict(a: &PredictArgs) -> Result<()> {
    let cfg = build_config(&a.common)?;
    let bundle = GnnBundle::load(cluster_dir(&cfg.paths.output_dir, a.cluster).join(GNN_BUNDLE))?;
    let ranked = rank_and_filter(bundle.predict_all()?, cfg.ranking.probability_threshold);
    let path = a
        .output
        .clone()
        .unwrap_or_else(|| cfg.paths.output_dir.join(format!("cluster_{}_predictions.csv", a.cluster)));
    save_predictions_csv(&ranked.records, &path)?;
    println!("{} candidates, {} at or above {} -> {}", ranked.records.len(), ranked.confident.len(), ranked.threshold, path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => synth(&a),
        Command::Preprocess(c) => {
            let cfg = build_config(&c)?;
            cfg.validate()?;
            let mut warnings = Vec::new();
            let data = stage_preprocess(&cfg, &mut warnings)?;
            warnings.iter().for_each(|w| eprintln!("warning: {w}"));
            println!("{} drugs × {} features, {} links", data.table.n_rows(), data.table.n_features(), data.links.len());
            Ok(())
        }
        Command::TrainAe(c) => {
            let cfg = build_config(&c)?;
            let data = load_preprocessed(&cfg.paths.output_dir)?;
            let model = stage_autoencoder(&cfg, &data, derive_seed(cfg.master_seed, "autoencoder"))?;
            println!("autoencoder {:?} -> {}", model.spec.encoder_dims, cfg.paths.output_dir.join(AUTOENCODER).display());
            Ok(())
        }
        Command::Cluster(c) => {
            let cfg = build_config(&c)?;
            let data = load_preprocessed(&cfg.paths.output_dir)?;
            let model = Autoencoder::load(cfg.paths.output_dir.join(AUTOENCODER))?;
            let mut warnings = Vec::new();
            let cl = repurpose::pipeline::with_pool(c.threads, || {
                stage_cluster(
                    &cfg,
                    &data,
                    &model,
                    derive_seed(cfg.master_seed, "sweep"),
                    derive_seed(cfg.master_seed, "dec"),
                    &mut warnings,
                )
            })?;
            warnings.iter().for_each(|w| eprintln!("warning: {w}"));
            println!("k = {}, silhouette {:.4}", cl.k, cl.silhouette);
            Ok(())
        }
        Command::TrainGnn(c) => {
            let cfg = build_config(&c)?;
            let m = run_gnn_stage(&cfg, &RunOptions { cluster_order: None, threads: c.threads })?;
            m.warnings.iter().for_each(|w| eprintln!("warning: {w}"));
            println!("{} predictions, {} confident", m.n_predictions, m.n_confident);
            Ok(())
        }
        Command::Grid(a) => grid(&a),
        Command::Predict(a) => predict(&a),
        Command::RunAll(a) => {
            let cfg = build_config(&a.common)?;
            let opts = RunOptions {
                cluster_order: a.cluster_order,
                threads: a.common.threads,
            };
            let m = run_pipeline_with(&cfg, &opts)?;
            m.warnings.iter().for_each(|w| eprintln!("warning: {w}"));
            println!(
                "k = {}, {} predictions, {} confident -> {}",
                m.selected_k.unwrap_or(0),
                m.n_predictions,
                m.n_confident,
                cfg.paths.output_dir.display()
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
