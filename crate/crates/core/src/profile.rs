//! Item profiles as local term weights, the learnable global weights, and
//! the weighted cosine similarity between profiles.
//!
//! With local weights `l_ik` and learnable weights `w_k = (g_k)²`, the
//! weighted profile norm is `‖d_i‖² = Σ_k l_ik²·w_k` and the profile
//! similarity is `s_ij = Σ_k p_ik·p_jk·w_k` with `p_ik = l_ik / ‖d_i‖`.

use std::collections::HashSet;

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::similarity::SimilarityMatrix;
use crate::sparse::CsrMatrix;

/// How raw term counts become local weights.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LocalWeighting {
    /// The count itself.
    #[default]
    Raw,
    /// `1 + ln(count)` for positive counts.
    Log,
}

impl LocalWeighting {
    fn apply(self, count: f64) -> f64 {
        match self {
            LocalWeighting::Raw => count,
            LocalWeighting::Log => 1.0 + count.ln(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileCorpus {
    local: CsrMatrix,
    vocabulary: Vec<String>,
    doc_freq: Vec<usize>,
}

/// What [`load_corpus`] had to drop or flag.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorpusReport {
    /// Terms that occur in no item, by their original index.
    pub pruned_terms: Vec<(usize, String)>,
    /// Items whose profile has no terms.
    pub empty_items: Vec<usize>,
}

/// Builds a corpus from an item-by-term count matrix and its vocabulary.
///
/// Terms that appear in no item are removed and listed in the report.
pub fn load_corpus(
    counts: &CsrMatrix,
    vocabulary: Vec<String>,
    weighting: LocalWeighting,
) -> Result<(ProfileCorpus, CorpusReport)> {
    if counts.n_rows() == 0 || counts.n_cols() == 0 {
        return Err(Error::Data(format!(
            "term matrix needs at least one item and one term, got {}x{}",
            counts.n_rows(),
            counts.n_cols()
        )));
    }
    if vocabulary.len() != counts.n_cols() {
        return Err(Error::Dimension(format!(
            "vocabulary has {} terms but the term matrix has {} columns",
            vocabulary.len(),
            counts.n_cols()
        )));
    }
    let mut seen = HashSet::with_capacity(vocabulary.len());
    for term in &vocabulary {
        if !seen.insert(term.as_str()) {
            return Err(Error::Data(format!("duplicate vocabulary entry {term:?}")));
        }
    }
    if let Some((i, k, v)) = counts.triplets().find(|&(_, _, v)| v < 0.0) {
        return Err(Error::Data(format!("negative count {v} at item {i}, term {k}")));
    }

    let df = counts.column_counts();
    let keep: Vec<usize> = (0..df.len()).filter(|&k| df[k] > 0).collect();
    let pruned_terms = (0..df.len())
        .filter(|&k| df[k] == 0)
        .map(|k| (k, vocabulary[k].clone()))
        .collect::<Vec<_>>();
    if keep.is_empty() {
        return Err(Error::Data("no term occurs in any item".into()));
    }

    let local = counts.select_columns(&keep).map_values(|c| weighting.apply(c));
    let mut vocabulary = vocabulary;
    let vocabulary = keep.iter().map(|&k| std::mem::take(&mut vocabulary[k])).collect();
    let doc_freq = keep.iter().map(|&k| df[k]).collect();
    let empty_items = (0..local.n_rows()).filter(|&i| local.row(i).0.is_empty()).collect();

    Ok((
        ProfileCorpus {
            local,
            vocabulary,
            doc_freq,
        },
        CorpusReport {
            pruned_terms,
            empty_items,
        },
    ))
}

impl ProfileCorpus {
    pub fn n_items(&self) -> usize {
        self.local.n_rows()
    }

    pub fn n_terms(&self) -> usize {
        self.local.n_cols()
    }

    pub fn local_weights(&self) -> &CsrMatrix {
        &self.local
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    pub fn doc_freq(&self) -> &[usize] {
        &self.doc_freq
    }
}

/// Nonnegative learnable term weights, the squares of the global term weights.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalWeights(Array1<f64>);

impl GlobalWeights {
    pub fn new(w: Array1<f64>) -> Result<Self> {
        if let Some((k, v)) = w.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Data(format!(
                "global weight {k} must be finite and >= 0, got {v}"
            )));
        }
        Ok(GlobalWeights(w))
    }

    pub fn from_vec(w: Vec<f64>) -> Result<Self> {
        Self::new(Array1::from(w))
    }

    /// Entrywise `max(0, v)`, the Euclidean projection onto the feasible set.
    pub fn project(v: Array1<f64>) -> Result<Self> {
        Self::new(v.mapv(|x| x.max(0.0)))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_array(&self) -> &Array1<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Array1<f64> {
        self.0
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(&self.0 * c)
    }
}

/// `w_k = ln(N_v / df_k)²`.
pub fn idf_init(corpus: &ProfileCorpus) -> GlobalWeights {
    let n = corpus.n_items() as f64;
    let w = corpus
        .doc_freq()
        .iter()
        .map(|&df| (n / df as f64).ln().powi(2))
        .collect::<Vec<_>>();
    GlobalWeights(Array1::from(w))
}

/// Independent uniform draws in `(0, 1]`.
pub fn random_init(n_terms: usize, seed: u64) -> GlobalWeights {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    GlobalWeights(Array1::from_shape_fn(n_terms, |_| 1.0 - rng.random::<f64>()))
}

/// Dense `p_ik = l_ik / ‖d_i‖` and the norms `‖d_i‖`. This is the largest
/// object held per optimizer iteration (`N_v × N_w`).
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedProfiles {
    pub p: Array2<f64>,
    pub norms: Array1<f64>,
}

impl NormalizedProfiles {
    pub fn has_profile(&self, i: usize) -> bool {
        self.norms[i] > 0.0
    }
}

fn check_lengths(corpus: &ProfileCorpus, w: &GlobalWeights) -> Result<()> {
    if corpus.n_terms() != w.len() {
        return Err(Error::Dimension(format!(
            "corpus has {} terms but {} global weights were given",
            corpus.n_terms(),
            w.len()
        )));
    }
    Ok(())
}

pub fn normalize(corpus: &ProfileCorpus, w: &GlobalWeights) -> Result<NormalizedProfiles> {
    check_lengths(corpus, w)?;
    let w = w.as_array();
    let (n, t) = (corpus.n_items(), corpus.n_terms());
    let mut p = Array2::zeros((n, t));
    let mut norms = Array1::zeros(n);
    for i in 0..n {
        let (terms, weights) = corpus.local.row(i);
        let sq: f64 = terms.iter().zip(weights).map(|(&k, &l)| l * l * w[k]).sum();
        let norm = sq.sqrt();
        if norm > 0.0 {
            norms[i] = norm;
            for (&k, &l) in terms.iter().zip(weights) {
                p[[i, k]] = l / norm;
            }
        }
    }
    Ok(NormalizedProfiles { p, norms })
}

/// Profile similarity from already normalized profiles.
///
/// Diagonal entries are pinned to exactly 1 (items with a nonzero norm) or 0.
pub fn similarity_from_normalized(np: &NormalizedProfiles, w: &GlobalWeights) -> SimilarityMatrix {
    let mut weighted = np.p.clone();
    for mut row in weighted.axis_iter_mut(Axis(0)) {
        row *= w.as_array();
    }
    let mut s = linalg::symmetric_product(weighted.view(), np.p.view());
    s.mapv_inplace(|v| v.clamp(0.0, 1.0));
    for i in 0..s.nrows() {
        s[[i, i]] = if np.has_profile(i) { 1.0 } else { 0.0 };
    }
    SimilarityMatrix::from_trusted(s)
}

pub fn profile_similarity(corpus: &ProfileCorpus, w: &GlobalWeights) -> Result<SimilarityMatrix> {
    let np = normalize(corpus, w)?;
    Ok(similarity_from_normalized(&np, w))
}
