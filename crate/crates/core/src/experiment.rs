//! File ingestion and end-to-end experiment orchestration.
//!
//! Every stage seed derives from the single root seed in [`ExperimentConfig`]:
//! repeat `r` splits with `seed + r` and draws random initial weights with
//! `seed + RANDOM_INIT_SEED_OFFSET + r`.
//!
//! Training happens inside each leave-one-out repeat, on the meta-path
//! similarity of that repeat's training interactions, so held-out items
//! never inform the learned weights.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mtx;
use crate::network::{aggregate_pathsim, BipartiteNetwork, MetaPathConfig};
use crate::optim::{train, TrainConfig, TrainTrace};
use crate::profile::{
    idf_init, load_corpus, profile_similarity, random_init, CorpusReport, GlobalWeights, LocalWeighting, ProfileCorpus,
};
use crate::recommend::{evaluate_with, EvalReport, InteractionSet, Split};
use crate::similarity::SimilarityMatrix;
use crate::sparse::CsrMatrix;

pub const RANDOM_INIT_SEED_OFFSET: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitMode {
    #[default]
    Idf,
    Random,
}

/// Which item similarity drives recommendation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimilaritySource {
    /// Profile cosine with trained weights.
    #[default]
    Learned,
    /// Profile cosine with untrained idf weights.
    IdfBaseline,
    /// Meta-path similarity itself.
    Pathsim,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Items × users, Matrix Market coordinate.
    pub interactions: PathBuf,
    /// Items × terms counts, Matrix Market coordinate.
    pub terms: PathBuf,
    /// One term per line.
    pub vocabulary: PathBuf,
    pub binarize: bool,
    pub local_weighting: LocalWeighting,
    pub meta_path_depth: usize,
    pub init: InitMode,
    pub train: TrainConfig,
    pub cutoffs: Vec<usize>,
    pub repeats: usize,
    pub seed: u64,
    /// Neighbourhood size for item-kNN; `None` uses every item.
    pub neighbors: Option<usize>,
    pub source: SimilaritySource,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            interactions: PathBuf::new(),
            terms: PathBuf::new(),
            vocabulary: PathBuf::new(),
            binarize: true,
            local_weighting: LocalWeighting::Raw,
            meta_path_depth: 1,
            init: InitMode::Idf,
            train: TrainConfig::default(),
            cutoffs: vec![5, 10, 15, 20],
            repeats: 5,
            seed: 0,
            neighbors: None,
            source: SimilaritySource::Learned,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    /// Parses a JSON config; relative paths are taken relative to the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(base) = path.parent() {
            cfg.resolve_relative_to(base);
        }
        Ok(cfg)
    }

    /// Recovers the configuration recorded in a `manifest.json`.
    pub fn from_manifest(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let manifest: Manifest =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Ok(manifest.config)
    }

    pub fn resolve_relative_to(&mut self, base: &Path) {
        for p in [
            &mut self.interactions,
            &mut self.terms,
            &mut self.vocabulary,
            &mut self.output_dir,
        ] {
            if !p.as_os_str().is_empty() && p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        MetaPathConfig::new(self.meta_path_depth)?;
        self.train.validate()?;
        if self.cutoffs.is_empty() || self.cutoffs.contains(&0) {
            return Err(Error::Config(
                "cutoffs must be a non-empty list of positive integers".into(),
            ));
        }
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        if self.neighbors == Some(0) {
            return Err(Error::Config("neighbors must be positive when set".into()));
        }
        for (name, p) in [
            ("interactions", &self.interactions),
            ("terms", &self.terms),
            ("vocabulary", &self.vocabulary),
        ] {
            if p.as_os_str().is_empty() {
                return Err(Error::Config(format!("missing {name} path")));
            }
            if !p.is_file() {
                return Err(Error::Config(format!("{name} file {} does not exist", p.display())));
            }
        }
        Ok(())
    }

    pub fn meta_paths(&self) -> Result<MetaPathConfig> {
        MetaPathConfig::new(self.meta_path_depth)
    }
}

/// Everything loaded from disk.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub network: BipartiteNetwork,
    pub corpus: ProfileCorpus,
    pub summary: IngestSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub n_items: usize,
    pub n_users: usize,
    pub n_terms: usize,
    pub n_terms_in_file: usize,
    pub interaction_entries: usize,
    pub term_entries: usize,
    pub dropped_zero_entries: usize,
    pub pruned_terms: Vec<String>,
    pub empty_profiles: Vec<usize>,
    pub isolated_items: Vec<usize>,
    pub users_without_items: usize,
    pub single_item_users: usize,
}

impl IngestSummary {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "users: {}", self.n_users);
        let _ = writeln!(s, "items: {}", self.n_items);
        let _ = writeln!(
            s,
            "terms: {} ({} in file, {} pruned)",
            self.n_terms,
            self.n_terms_in_file,
            self.pruned_terms.len()
        );
        let _ = writeln!(s, "interaction entries: {}", self.interaction_entries);
        let _ = writeln!(s, "term entries: {}", self.term_entries);
        let _ = writeln!(s, "explicit zeros dropped: {}", self.dropped_zero_entries);
        let _ = writeln!(s, "empty profiles: {}", self.empty_profiles.len());
        let _ = writeln!(s, "items without interactions: {}", self.isolated_items.len());
        let _ = writeln!(s, "users without items: {}", self.users_without_items);
        let _ = writeln!(s, "single-item users: {}", self.single_item_users);
        s
    }
}

/// Loads and cross-checks the interaction matrix, term matrix and vocabulary.
pub fn ingest(cfg: &ExperimentConfig) -> Result<Dataset> {
    let interactions = mtx::read_matrix_market(&cfg.interactions)?;
    let terms = mtx::read_matrix_market(&cfg.terms)?;
    let vocabulary = mtx::read_vocabulary(&cfg.vocabulary)?;
    assemble(interactions, terms, vocabulary, cfg.binarize, cfg.local_weighting)
}

/// [`ingest`] on already parsed inputs.
pub fn assemble(
    interactions: mtx::MatrixFile,
    terms: mtx::MatrixFile,
    vocabulary: Vec<String>,
    binarize: bool,
    weighting: LocalWeighting,
) -> Result<Dataset> {
    let w = &interactions.matrix;
    if w.n_rows() == 0 || w.n_cols() == 0 {
        return Err(Error::Data(format!(
            "interaction matrix has an empty axis ({}x{})",
            w.n_rows(),
            w.n_cols()
        )));
    }
    if terms.matrix.n_rows() != w.n_rows() {
        return Err(Error::Dimension(format!(
            "interaction matrix has {} items but the term matrix has {}",
            w.n_rows(),
            terms.matrix.n_rows()
        )));
    }
    let mut network = BipartiteNetwork::new(w.clone())?;
    if binarize {
        network = network.binarized();
    }
    let (
        corpus,
        CorpusReport {
            pruned_terms,
            empty_items,
        },
    ) = load_corpus(&terms.matrix, vocabulary, weighting)?;
    for (k, term) in &pruned_terms {
        log::warn!("term {k} ({term:?}) occurs in no item and was dropped");
    }
    if !empty_items.is_empty() {
        log::warn!("{} items have empty profiles", empty_items.len());
    }

    let user_sizes: Vec<usize> = {
        let by_user = network.weights().transpose();
        (0..by_user.n_rows()).map(|u| by_user.row(u).0.len()).collect()
    };
    let isolated_items = (0..network.n_items())
        .filter(|&i| network.weights().row(i).0.is_empty())
        .collect();
    let summary = IngestSummary {
        n_items: network.n_items(),
        n_users: network.n_users(),
        n_terms: corpus.n_terms(),
        n_terms_in_file: terms.matrix.n_cols(),
        interaction_entries: network.weights().nnz(),
        term_entries: corpus.local_weights().nnz(),
        dropped_zero_entries: interactions.dropped_zeros + terms.dropped_zeros,
        pruned_terms: pruned_terms.into_iter().map(|(_, t)| t).collect(),
        empty_profiles: empty_items,
        isolated_items,
        users_without_items: user_sizes.iter().filter(|&&n| n == 0).count(),
        single_item_users: user_sizes.iter().filter(|&&n| n == 1).count(),
    };
    Ok(Dataset {
        network,
        corpus,
        summary,
    })
}

/// `net` without the held-out `(item, user)` pairs of `split`.
pub fn training_network(net: &BipartiteNetwork, split: &Split) -> Result<BipartiteNetwork> {
    let kept = net
        .weights()
        .triplets()
        .filter(|&(i, u, _)| split.test.get(&u) != Some(&i));
    BipartiteNetwork::new(CsrMatrix::from_triplets(net.n_items(), net.n_users(), kept)?)
}

pub fn initial_weights(corpus: &ProfileCorpus, mode: InitMode, seed: u64) -> GlobalWeights {
    match mode {
        InitMode::Idf => idf_init(corpus),
        InitMode::Random => random_init(corpus.n_terms(), seed),
    }
}

/// Weights and trace of one training run.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub weights: GlobalWeights,
    pub trace: TrainTrace,
}

/// Meta-path target for `net`, then projected gradient descent from the configured start.
pub fn fit(
    network: &BipartiteNetwork,
    corpus: &ProfileCorpus,
    cfg: &ExperimentConfig,
    init_seed: u64,
) -> Result<TrainedModel> {
    let target = aggregate_pathsim(network, &cfg.meta_paths()?);
    let w0 = initial_weights(corpus, cfg.init, init_seed);
    let (weights, trace) = train(corpus, &target, w0, &cfg.train).map_err(|e| e.in_stage("train"))?;
    Ok(TrainedModel { weights, trace })
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub report: EvalReport,
    /// One model per repeat when the source is [`SimilaritySource::Learned`].
    pub models: Vec<TrainedModel>,
}

/// Leave-one-out evaluation of the configured similarity source.
pub fn run_experiment(data: &Dataset, cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let interactions = InteractionSet::from_network(&data.network);
    let meta = cfg.meta_paths()?;
    let mut models = Vec::new();
    let mut baseline: Option<SimilarityMatrix> = None;

    let mut report = evaluate_with(
        &interactions,
        &cfg.cutoffs,
        cfg.repeats,
        cfg.seed,
        cfg.neighbors,
        |repeat, split| -> Result<SimilarityMatrix> {
            match cfg.source {
                SimilaritySource::IdfBaseline => {
                    if baseline.is_none() {
                        baseline = Some(profile_similarity(&data.corpus, &idf_init(&data.corpus))?);
                    }
                    Ok(baseline.clone().expect("just set"))
                }
                SimilaritySource::Pathsim => {
                    let net = training_network(&data.network, split)?;
                    Ok(aggregate_pathsim(&net, &meta))
                }
                SimilaritySource::Learned => {
                    let net = training_network(&data.network, split)?;
                    let seed = cfg.seed.wrapping_add(RANDOM_INIT_SEED_OFFSET + repeat as u64);
                    let model = fit(&net, &data.corpus, cfg, seed)?;
                    let s = profile_similarity(&data.corpus, &model.weights)?;
                    models.push(model);
                    Ok(s)
                }
            }
        },
    )
    .map_err(|e| e.in_stage("evaluate"))?;
    // where outputs land does not affect them; leaving it out lets a rerun
    // into another directory reproduce report.json byte for byte
    let mut provenance = serde_json::to_value(cfg)?;
    if let Some(obj) = provenance.as_object_mut() {
        obj.remove("output_dir");
    }
    report.provenance = Some(provenance);
    Ok(ExperimentOutcome { report, models })
}

/// Written next to every set of outputs; holds what is needed to rerun it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub wall_clock_secs: f64,
}

impl Manifest {
    pub fn new(command: &str, config: &ExperimentConfig, started: Instant) -> Self {
        Manifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: config.seed,
            config: config.clone(),
            wall_clock_secs: started.elapsed().as_secs_f64(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_file(
            &dir.join("manifest.json"),
            &format!("{}\n", serde_json::to_string_pretty(self)?),
        )
    }
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// One weight per line, in term order, with round-trip precision.
pub fn weights_to_text(w: &GlobalWeights) -> String {
    let mut out = String::new();
    for v in w.as_array() {
        let _ = writeln!(out, "{v}");
    }
    out
}

pub fn read_weights(path: &Path) -> Result<GlobalWeights> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut values = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let v: f64 = t.parse().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line: no + 1,
            message: format!("bad weight {t:?}"),
        })?;
        values.push(v);
    }
    GlobalWeights::from_vec(values)
}

pub fn write_model(dir: &Path, model: &TrainedModel) -> Result<()> {
    write_file(&dir.join("trace.csv"), &model.trace.to_csv())?;
    write_file(&dir.join("weights.txt"), &weights_to_text(&model.weights))
}

/// `report.json`, `report.csv`, per-repeat `repeat-<r>/{trace.csv,weights.txt}` and `manifest.json`.
pub fn write_experiment(dir: &Path, outcome: &ExperimentOutcome, manifest: &Manifest) -> Result<()> {
    write_file(&dir.join("report.json"), &outcome.report.to_json()?)?;
    write_file(&dir.join("report.csv"), &outcome.report.to_csv())?;
    for (r, model) in outcome.models.iter().enumerate() {
        write_model(&dir.join(format!("repeat-{r}")), model)?;
    }
    manifest.write(dir)
}

/// Grid over regularization, meta-path depth and initialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub lambdas: Vec<f64>,
    pub depths: Vec<usize>,
    pub inits: Vec<InitMode>,
}

impl Default for SweepGrid {
    /// λ from 0 to 0.05 in steps of 0.005, depths 1 to 3, idf start.
    fn default() -> Self {
        SweepGrid {
            lambdas: (0..=10).map(|i| i as f64 * 0.005).collect(),
            depths: vec![1, 2, 3],
            inits: vec![InitMode::Idf],
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub lambda: f64,
    pub depth: usize,
    pub init: InitMode,
    pub config: ExperimentConfig,
    pub outcome: ExperimentOutcome,
}

impl SweepPoint {
    pub fn dir_name(&self) -> String {
        let init = match self.init {
            InitMode::Idf => "idf",
            InitMode::Random => "random",
        };
        format!("np{}-lambda{}-{init}", self.depth, self.lambda)
    }
}

pub fn run_sweep(data: &Dataset, base: &ExperimentConfig, grid: &SweepGrid) -> Result<Vec<SweepPoint>> {
    if grid.lambdas.is_empty() || grid.depths.is_empty() || grid.inits.is_empty() {
        return Err(Error::Config("every sweep axis needs at least one value".into()));
    }
    let mut points = Vec::new();
    for &depth in &grid.depths {
        for &lambda in &grid.lambdas {
            for &init in &grid.inits {
                let mut config = base.clone();
                config.meta_path_depth = depth;
                config.train.lambda = lambda;
                config.init = init;
                config.validate_grid_point()?;
                let outcome = run_experiment(data, &config)?;
                let mut point = SweepPoint {
                    lambda,
                    depth,
                    init,
                    config,
                    outcome,
                };
                point.config.output_dir = base.output_dir.join(point.dir_name());
                points.push(point);
            }
        }
    }
    Ok(points)
}

impl ExperimentConfig {
    fn validate_grid_point(&self) -> Result<()> {
        MetaPathConfig::new(self.meta_path_depth)?;
        self.train.validate()
    }
}

/// Mean metrics per grid point: `n_p,lambda,init,N,HR,ARHR`.
pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from("n_p,lambda,init,N,HR,ARHR\n");
    for p in points {
        let init = serde_json::to_value(p.init)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default();
        for m in &p.outcome.report.mean {
            let _ = writeln!(out, "{},{},{},{},{},{}", p.depth, p.lambda, init, m.n, m.hr, m.arhr);
        }
    }
    out
}
