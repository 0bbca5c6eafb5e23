//! `hinweight` command-line front end.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 numeric failure.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hinweight::experiment::{
    self, Dataset, ExperimentConfig, InitMode, Manifest, SimilaritySource, SweepGrid, RANDOM_INIT_SEED_OFFSET,
};
use hinweight::recommend::Neighborhoods;
use hinweight::synthetic::{planted, PlantedConfig};
use hinweight::{
    aggregate_pathsim, profile_similarity, CsrMatrix, Error, ErrorClass, InteractionSet, LocalWeighting, Result,
    SimilarityMatrix,
};

#[derive(Parser)]
#[command(
    name = "hinweight",
    version,
    about = "Learn term weights for item profiles from meta-path similarity"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load and cross-check the input files, then print a summary.
    IngestCheck(ConfigArgs),
    /// Write the aggregated meta-path similarity as `pathsim.mtx`.
    Pathsim(ConfigArgs),
    /// Train global weights on the full network; writes `trace.csv` and `weights.txt`.
    Train(ConfigArgs),
    /// Top-N recommendations for every user (or one) into `recommendations.csv`.
    Recommend(RecommendArgs),
    /// Leave-one-out evaluation; writes `report.json` and `report.csv`.
    Evaluate(ConfigArgs),
    /// Evaluate a grid over lambda, meta-path depth and initialization.
    Sweep(SweepArgs),
    /// Write a synthetic dataset with planted clusters.
    Synth(SynthArgs),
}

/// Every `ExperimentConfig` field as an optional override.
#[derive(Args, Debug, Default)]
struct ConfigArgs {
    /// JSON configuration file.
    #[arg(long, conflicts_with = "manifest")]
    config: Option<PathBuf>,
    /// Take the configuration recorded in a previous run's manifest.json.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    interactions: Option<PathBuf>,
    #[arg(long)]
    terms: Option<PathBuf>,
    #[arg(long)]
    vocabulary: Option<PathBuf>,
    #[arg(long)]
    binarize: Option<bool>,
    #[arg(long, value_enum)]
    local_weighting: Option<Weighting>,
    /// Longest meta-path n_p.
    #[arg(long)]
    meta_path_depth: Option<usize>,
    #[arg(long, value_enum)]
    init: Option<Init>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    step_size: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    rel_tol: Option<f64>,
    #[arg(long)]
    backtracking: Option<bool>,
    /// Comma-separated list, e.g. 5,10,15,20.
    #[arg(long, value_delimiter = ',')]
    cutoffs: Vec<usize>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Keep only the k most similar neighbours per item.
    #[arg(long)]
    neighbors: Option<usize>,
    #[arg(long, value_enum)]
    source: Option<Source>,
    #[arg(long, short = 'o')]
    output_dir: Option<PathBuf>,
}

#[derive(Args)]
struct RecommendArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Use these weights instead of training (one per line).
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Only this user (0-based column of the interaction matrix).
    #[arg(long)]
    user: Option<usize>,
    #[arg(long, default_value_t = 10)]
    top: usize,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Default: 0, 0.005, ..., 0.05.
    #[arg(long, value_delimiter = ',')]
    lambdas: Vec<f64>,
    /// Default: 1,2,3.
    #[arg(long, value_delimiter = ',')]
    depths: Vec<usize>,
    /// Default: idf.
    #[arg(long, value_delimiter = ',', value_enum)]
    inits: Vec<Init>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, short = 'o')]
    output_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Scale::Small)]
    scale: Scale,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Weighting {
    Raw,
    Log,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Init {
    Idf,
    Random,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Source {
    Learned,
    IdfBaseline,
    Pathsim,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Scale {
    /// 40 items, 30 users, 60 terms, two clusters.
    Small,
    /// 200 items, 150 users, 300 terms, four clusters.
    Large,
}

impl From<Init> for InitMode {
    fn from(i: Init) -> Self {
        match i {
            Init::Idf => InitMode::Idf,
            Init::Random => InitMode::Random,
        }
    }
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match (&self.config, &self.manifest) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, Some(path)) => ExperimentConfig::from_manifest(path)?,
            (None, None) => ExperimentConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => { $(if let Some(v) = &self.$field { cfg.$field = v.clone(); })* };
        }
        set!(
            interactions,
            terms,
            vocabulary,
            binarize,
            meta_path_depth,
            repeats,
            seed,
            output_dir
        );
        if let Some(w) = self.local_weighting {
            cfg.local_weighting = match w {
                Weighting::Raw => LocalWeighting::Raw,
                Weighting::Log => LocalWeighting::Log,
            };
        }
        if let Some(i) = self.init {
            cfg.init = i.into();
        }
        if let Some(s) = self.source {
            cfg.source = match s {
                Source::Learned => SimilaritySource::Learned,
                Source::IdfBaseline => SimilaritySource::IdfBaseline,
                Source::Pathsim => SimilaritySource::Pathsim,
            };
        }
        if self.neighbors.is_some() {
            cfg.neighbors = self.neighbors;
        }
        if let Some(v) = self.lambda {
            cfg.train.lambda = v;
        }
        if let Some(v) = self.step_size {
            cfg.train.step_size = v;
        }
        if let Some(v) = self.max_iters {
            cfg.train.max_iters = v;
        }
        if let Some(v) = self.rel_tol {
            cfg.train.rel_tol = v;
        }
        if let Some(v) = self.backtracking {
            cfg.train.backtracking = v;
        }
        if !self.cutoffs.is_empty() {
            cfg.cutoffs = self.cutoffs.clone();
        }
        cfg.validate()?;
        // absolute input paths keep the manifest usable from any directory
        for p in [&mut cfg.interactions, &mut cfg.terms, &mut cfg.vocabulary] {
            *p = std::fs::canonicalize(&*p).map_err(|e| Error::Io {
                path: p.clone(),
                source: e,
            })?;
        }
        Ok(cfg)
    }
}

fn load(cfg: &ExperimentConfig) -> Result<Dataset> {
    let data = experiment::ingest(cfg).map_err(|e| e.in_stage("ingest"))?;
    log::info!(
        "loaded {} items, {} users, {} terms",
        data.summary.n_items,
        data.summary.n_users,
        data.summary.n_terms
    );
    Ok(data)
}

fn ingest_check(args: &ConfigArgs) -> Result<()> {
    let cfg = args.resolve()?;
    let data = load(&cfg)?;
    print!("{}", data.summary.to_text());
    Ok(())
}

fn pathsim(args: &ConfigArgs) -> Result<()> {
    let started = Instant::now();
    let cfg = args.resolve()?;
    let data = load(&cfg)?;
    let s = aggregate_pathsim(&data.network, &cfg.meta_paths()?);
    let n = s.n_items();
    let sparse = CsrMatrix::from_triplets(n, n, s.view().indexed_iter().map(|((i, j), &v)| (i, j, v)))?;
    experiment::write_file(
        &cfg.output_dir.join("pathsim.mtx"),
        &hinweight::mtx::to_matrix_market(&sparse),
    )?;
    Manifest::new("pathsim", &cfg, started).write(&cfg.output_dir)?;
    println!("wrote {}", cfg.output_dir.join("pathsim.mtx").display());
    Ok(())
}

fn train_full(data: &Dataset, cfg: &ExperimentConfig) -> Result<experiment::TrainedModel> {
    experiment::fit(
        &data.network,
        &data.corpus,
        cfg,
        cfg.seed.wrapping_add(RANDOM_INIT_SEED_OFFSET),
    )
}

fn train(args: &ConfigArgs) -> Result<()> {
    let started = Instant::now();
    let cfg = args.resolve()?;
    let data = load(&cfg)?;
    let model = train_full(&data, &cfg)?;
    experiment::write_model(&cfg.output_dir, &model)?;
    Manifest::new("train", &cfg, started).write(&cfg.output_dir)?;
    let last = model.trace.records.last().expect("trace holds the starting point");
    println!(
        "{} iterations ({}), J {:.6} -> {:.6}; wrote {}",
        model.trace.iterations(),
        model
            .trace
            .stop
            .map_or_else(|| "not stopped".to_string(), |s| format!("{s:?}")),
        model.trace.records[0].objective,
        last.objective,
        cfg.output_dir.display()
    );
    Ok(())
}

fn recommend(args: &RecommendArgs) -> Result<()> {
    let started = Instant::now();
    let cfg = args.config.resolve()?;
    if args.top == 0 {
        return Err(Error::Config("--top must be positive".into()));
    }
    let data = load(&cfg)?;
    let sim: SimilarityMatrix = match (&args.weights, cfg.source) {
        (Some(path), _) => {
            let w = experiment::read_weights(path)?;
            if w.len() != data.corpus.n_terms() {
                return Err(Error::Dimension(format!(
                    "{} holds {} weights but the corpus has {} terms",
                    path.display(),
                    w.len(),
                    data.corpus.n_terms()
                )));
            }
            profile_similarity(&data.corpus, &w)?
        }
        (None, SimilaritySource::Learned) => {
            let model = train_full(&data, &cfg)?;
            experiment::write_model(&cfg.output_dir, &model)?;
            profile_similarity(&data.corpus, &model.weights)?
        }
        (None, SimilaritySource::IdfBaseline) => profile_similarity(&data.corpus, &hinweight::idf_init(&data.corpus))?,
        (None, SimilaritySource::Pathsim) => aggregate_pathsim(&data.network, &cfg.meta_paths()?),
    };
    let interactions = InteractionSet::from_network(&data.network);
    let users: Vec<usize> = match args.user {
        Some(u) if u >= interactions.n_users() => {
            return Err(Error::Config(format!(
                "user {u} out of range ({} users)",
                interactions.n_users()
            )))
        }
        Some(u) => vec![u],
        None => (0..interactions.n_users()).collect(),
    };
    let hoods = Neighborhoods::new(&sim, cfg.neighbors);
    let mut out = String::from("user,rank,item,score\n");
    for u in users {
        let list = hoods.recommend(interactions.items(u), args.top);
        for (rank, (item, score)) in list.items.iter().zip(&list.scores).enumerate() {
            let _ = writeln!(out, "{u},{},{item},{score}", rank + 1);
        }
    }
    let path = cfg.output_dir.join("recommendations.csv");
    experiment::write_file(&path, &out)?;
    Manifest::new("recommend", &cfg, started).write(&cfg.output_dir)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn print_means(report: &hinweight::EvalReport) {
    for m in &report.mean {
        println!("N={:<3} HR={:.4} ARHR={:.4}", m.n, m.hr, m.arhr);
    }
}

fn evaluate(args: &ConfigArgs) -> Result<()> {
    let started = Instant::now();
    let cfg = args.resolve()?;
    let data = load(&cfg)?;
    let outcome = experiment::run_experiment(&data, &cfg)?;
    experiment::write_experiment(&cfg.output_dir, &outcome, &Manifest::new("evaluate", &cfg, started))?;
    print_means(&outcome.report);
    Ok(())
}

fn sweep(args: &SweepArgs) -> Result<()> {
    let started = Instant::now();
    let cfg = args.config.resolve()?;
    let data = load(&cfg)?;
    let mut grid = SweepGrid::default();
    if !args.lambdas.is_empty() {
        grid.lambdas = args.lambdas.clone();
    }
    if !args.depths.is_empty() {
        grid.depths = args.depths.clone();
    }
    if !args.inits.is_empty() {
        grid.inits = args.inits.iter().map(|&i| i.into()).collect();
    }
    let points = experiment::run_sweep(&data, &cfg, &grid)?;
    for p in &points {
        let manifest = Manifest::new("evaluate", &p.config, started);
        experiment::write_experiment(&p.config.output_dir, &p.outcome, &manifest)?;
    }
    experiment::write_file(&cfg.output_dir.join("sweep.csv"), &experiment::sweep_csv(&points))?;
    Manifest::new("sweep", &cfg, started).write(&cfg.output_dir)?;
    let best: BTreeMap<String, f64> = points
        .iter()
        .filter_map(|p| p.outcome.report.mean_at(10).map(|m| (p.dir_name(), m.hr)))
        .collect();
    for (name, hr) in best {
        println!("{name}: HR@10={hr:.4}");
    }
    Ok(())
}

fn synth(args: &SynthArgs) -> Result<()> {
    let cfg = match args.scale {
        Scale::Small => PlantedConfig {
            seed: args.seed,
            ..PlantedConfig::default()
        },
        Scale::Large => PlantedConfig::four_clusters(args.seed),
    };
    planted(&cfg)?.write_to(&args.output_dir)?;
    println!(
        "wrote interactions.mtx, terms.mtx and vocabulary.txt to {}",
        args.output_dir.display()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::IngestCheck(a) => ingest_check(a),
        Command::Pathsim(a) => pathsim(a),
        Command::Train(a) => train(a),
        Command::Recommend(a) => recommend(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Sweep(a) => sweep(a),
        Command::Synth(a) => synth(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.class() {
                ErrorClass::Usage => 1,
                ErrorClass::Data => 2,
                ErrorClass::Numeric => 3,
            })
        }
    }
}
