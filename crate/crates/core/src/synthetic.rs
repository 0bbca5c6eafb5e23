//! Planted datasets with known cluster structure, for tests and demos.
//!
//! Items fall into contiguous clusters and users interact only within one
//! cluster. Each item's profile is a bag of tokens drawn from three sources:
//!
//! - topical terms of its own cluster (uniform over the cluster's block),
//! - a background vocabulary shared by all clusters (Zipf-distributed),
//! - a few "distractor" terms picked per item independently of its cluster
//!   and repeated within the item.
//!
//! Background terms get low idf and distractors high idf, yet only the
//! topical terms track the interaction structure.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::network::BipartiteNetwork;
use crate::profile::{load_corpus, LocalWeighting, ProfileCorpus};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedConfig {
    pub n_items: usize,
    pub n_users: usize,
    pub n_clusters: usize,
    /// Topical terms, split evenly between clusters.
    pub n_topic_terms: usize,
    pub n_distractor_terms: usize,
    /// Total vocabulary; what is left after topical and distractor terms is background.
    pub n_terms: usize,
    /// Probability that a token is topical.
    pub topic_share: f64,
    /// Probability that a token is one of the item's distractors.
    pub distractor_share: f64,
    pub distractors_per_item: usize,
    /// Inclusive range of tokens per item.
    pub tokens_per_item: (usize, usize),
    /// Zipf exponent of the background term distribution.
    pub zipf_exponent: f64,
    /// Inclusive range of items per user.
    pub items_per_user: (usize, usize),
    pub seed: u64,
}

impl Default for PlantedConfig {
    /// 40 items, 30 users and 60 terms in two clusters.
    fn default() -> Self {
        PlantedConfig {
            n_items: 40,
            n_users: 30,
            n_clusters: 2,
            n_topic_terms: 24,
            n_distractor_terms: 18,
            n_terms: 60,
            topic_share: 0.35,
            distractor_share: 0.25,
            distractors_per_item: 2,
            tokens_per_item: (20, 40),
            zipf_exponent: 1.0,
            items_per_user: (2, 5),
            seed: 0,
        }
    }
}

impl PlantedConfig {
    /// 200 items in four clusters, 150 users and 300 terms: large enough that
    /// leave-one-out hit rates are not dominated by a handful of users.
    pub fn four_clusters(seed: u64) -> Self {
        PlantedConfig {
            n_items: 200,
            n_users: 150,
            n_clusters: 4,
            n_topic_terms: 120,
            n_distractor_terms: 90,
            n_terms: 300,
            seed,
            ..PlantedConfig::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlantedDataset {
    pub network: BipartiteNetwork,
    /// Items × terms token counts.
    pub counts: CsrMatrix,
    pub vocabulary: Vec<String>,
    pub item_cluster: Vec<usize>,
}

impl PlantedDataset {
    /// Writes `interactions.mtx` (items × users), `terms.mtx` (items × terms)
    /// and `vocabulary.txt` into `dir`.
    pub fn write_to(&self, dir: &std::path::Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
        crate::mtx::write_matrix_market(&dir.join("interactions.mtx"), self.network.weights())?;
        crate::mtx::write_matrix_market(&dir.join("terms.mtx"), &self.counts)?;
        crate::mtx::write_vocabulary(&dir.join("vocabulary.txt"), &self.vocabulary)
    }

    pub fn corpus(&self) -> Result<ProfileCorpus> {
        Ok(load_corpus(&self.counts, self.vocabulary.clone(), LocalWeighting::Raw)?.0)
    }
}

fn cluster_range(cluster: usize, n_clusters: usize, n: usize) -> std::ops::Range<usize> {
    (cluster * n / n_clusters)..((cluster + 1) * n / n_clusters)
}

pub fn planted(cfg: &PlantedConfig) -> Result<PlantedDataset> {
    let c = cfg.n_clusters;
    let n_background = cfg.n_terms.saturating_sub(cfg.n_topic_terms + cfg.n_distractor_terms);
    let shares_ok =
        cfg.topic_share >= 0.0 && cfg.distractor_share >= 0.0 && cfg.topic_share + cfg.distractor_share <= 1.0;
    if c == 0
        || cfg.n_items < c
        || cfg.n_users == 0
        || cfg.n_topic_terms < c
        || n_background == 0
        || !shares_ok
        || (cfg.distractor_share > 0.0
            && (cfg.distractors_per_item == 0 || cfg.n_distractor_terms < cfg.distractors_per_item))
    {
        return Err(Error::Config(format!("inconsistent planted dataset sizes: {cfg:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let item_cluster: Vec<usize> = (0..cfg.n_items).map(|i| i * c / cfg.n_items).collect();

    let mut pairs = Vec::new();
    for u in 0..cfg.n_users {
        let items = cluster_range(u * c / cfg.n_users, c, cfg.n_items);
        let want = rng
            .random_range(cfg.items_per_user.0..=cfg.items_per_user.1)
            .min(items.len());
        for pick in sample(&mut rng, items.len(), want) {
            pairs.push((items.start + pick, u));
        }
    }
    let network = BipartiteNetwork::from_pairs(cfg.n_items, cfg.n_users, pairs)?;

    let distractor_start = cfg.n_topic_terms;
    let background_start = distractor_start + cfg.n_distractor_terms;
    let background = WeightedIndex::new((0..n_background).map(|r| 1.0 / ((r + 1) as f64).powf(cfg.zipf_exponent)))
        .map_err(|e| Error::Config(format!("background distribution: {e}")))?;
    let mut triplets = Vec::new();
    for (i, &cluster) in item_cluster.iter().enumerate() {
        let topic = cluster_range(cluster, c, cfg.n_topic_terms);
        let own_distractors: Vec<usize> = if cfg.distractor_share > 0.0 {
            sample(&mut rng, cfg.n_distractor_terms, cfg.distractors_per_item).into_vec()
        } else {
            Vec::new()
        };
        let tokens = rng.random_range(cfg.tokens_per_item.0..=cfg.tokens_per_item.1);
        for _ in 0..tokens {
            let u: f64 = rng.random();
            let term = if u < cfg.topic_share {
                rng.random_range(topic.clone())
            } else if u < cfg.topic_share + cfg.distractor_share {
                distractor_start + own_distractors[rng.random_range(0..own_distractors.len())]
            } else {
                background_start + background.sample(&mut rng)
            };
            triplets.push((i, term, 1.0));
        }
    }
    let counts = CsrMatrix::from_triplets(cfg.n_items, cfg.n_terms, triplets)?;
    let vocabulary = (0..cfg.n_terms)
        .map(|k| {
            if k < distractor_start {
                format!("topic{k}")
            } else if k < background_start {
                format!("distractor{}", k - distractor_start)
            } else {
                format!("common{}", k - background_start)
            }
        })
        .collect();
    Ok(PlantedDataset {
        network,
        counts,
        vocabulary,
        item_cluster,
    })
}
