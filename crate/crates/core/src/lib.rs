//! Learned global term weights for item profiles.
//!
//! Item-item similarity derived from meta-paths over a user/item interaction
//! network serves as the training target for the global (idf-like) weights
//! of a weighted cosine over item profiles. The learned similarity then
//! drives item-kNN top-N recommendation, evaluated by leave-one-out hit rate
//! and average reciprocal hit rank.

pub mod error;
pub mod experiment;
pub mod linalg;
pub mod mtx;
pub mod network;
pub mod optim;
pub mod profile;
pub mod recommend;
pub mod similarity;
pub mod sparse;
pub mod synthetic;

pub use error::{Error, ErrorClass, Result};
pub use network::{aggregate_pathsim, commuting_matrix, pathsim_from_commuting, BipartiteNetwork, MetaPathConfig};
pub use optim::{gradient, objective, train, StopReason, TraceRecord, TrainConfig, TrainTrace};
pub use profile::{
    idf_init, load_corpus, normalize, profile_similarity, random_init, CorpusReport, GlobalWeights, LocalWeighting,
    NormalizedProfiles, ProfileCorpus,
};
pub use recommend::{
    arhr, evaluate, evaluate_with, hit_rate, loocv_split, recommend_topn, EvalReport, InteractionSet, RankedList, Split,
};
pub use similarity::SimilarityMatrix;
pub use sparse::CsrMatrix;
