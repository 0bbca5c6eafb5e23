//! Item-kNN top-N recommendation and leave-one-out evaluation.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::BipartiteNetwork;
use crate::similarity::SimilarityMatrix;

/// Per-user item histories.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionSet {
    n_items: usize,
    user_items: Vec<Vec<usize>>,
}

impl InteractionSet {
    /// Item lists are sorted and deduplicated.
    pub fn new(n_items: usize, user_items: Vec<Vec<usize>>) -> Result<Self> {
        let mut user_items = user_items;
        for (u, items) in user_items.iter_mut().enumerate() {
            items.sort_unstable();
            items.dedup();
            if let Some(&bad) = items.iter().find(|&&i| i >= n_items) {
                return Err(Error::Dimension(format!(
                    "user {u} references item {bad}, but there are only {n_items} items"
                )));
            }
        }
        Ok(InteractionSet { n_items, user_items })
    }

    pub fn from_network(net: &BipartiteNetwork) -> Self {
        let by_user = net.weights().transpose();
        let user_items = (0..by_user.n_rows()).map(|u| by_user.row(u).0.to_vec()).collect();
        InteractionSet {
            n_items: net.n_items(),
            user_items,
        }
    }

    /// Unit-weight network with the same interactions.
    pub fn to_network(&self) -> Result<BipartiteNetwork> {
        let pairs = self
            .user_items
            .iter()
            .enumerate()
            .flat_map(|(u, items)| items.iter().map(move |&i| (i, u)));
        BipartiteNetwork::from_pairs(self.n_items, self.n_users(), pairs)
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn n_users(&self) -> usize {
        self.user_items.len()
    }

    pub fn items(&self, user: usize) -> &[usize] {
        &self.user_items[user]
    }

    /// Relabels items so that old item `perm[new]` becomes `new`.
    pub fn permuted_items(&self, perm: &[usize]) -> InteractionSet {
        let mut inverse = vec![0; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        let user_items = self
            .user_items
            .iter()
            .map(|items| {
                let mut v: Vec<usize> = items.iter().map(|&i| inverse[i]).collect();
                v.sort_unstable();
                v
            })
            .collect();
        InteractionSet {
            n_items: self.n_items,
            user_items,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub items: Vec<usize>,
    pub scores: Vec<f64>,
    /// Set when the user had no history to score from.
    pub cold_user: bool,
}

impl RankedList {
    /// 1-based position of `item`, if present.
    pub fn rank_of(&self, item: usize) -> Option<usize> {
        self.items.iter().position(|&i| i == item).map(|p| p + 1)
    }

    pub fn truncated(&self, n: usize) -> RankedList {
        let n = n.min(self.items.len());
        RankedList {
            items: self.items[..n].to_vec(),
            scores: self.scores[..n].to_vec(),
            cold_user: self.cold_user,
        }
    }
}

/// Similarity rows, optionally truncated to each item's `k` nearest neighbours.
#[derive(Debug, Clone)]
pub struct Neighborhoods<'a> {
    similarity: &'a SimilarityMatrix,
    /// `neighbors[j]` lists `(i, s_ij)` for the kept neighbours of `j`.
    truncated: Option<Vec<Vec<(usize, f64)>>>,
}

impl<'a> Neighborhoods<'a> {
    /// `k = None` keeps every item. Neighbours exclude the item itself and
    /// are chosen by similarity, ties by lower index.
    pub fn new(similarity: &'a SimilarityMatrix, k: Option<usize>) -> Self {
        let truncated = k.map(|k| {
            let n = similarity.n_items();
            (0..n)
                .into_par_iter()
                .map(|j| {
                    let mut row: Vec<(usize, f64)> =
                        (0..n).filter(|&i| i != j).map(|i| (i, similarity.get(i, j))).collect();
                    row.sort_by(|a, b| by_score_then_index(*a, *b));
                    row.truncate(k);
                    row
                })
                .collect()
        });
        Neighborhoods { similarity, truncated }
    }

    fn accumulate(&self, j: usize, scores: &mut [f64]) {
        match &self.truncated {
            None => {
                for (i, s) in scores.iter_mut().enumerate() {
                    *s += self.similarity.get(i, j);
                }
            }
            Some(lists) => {
                for &(i, s) in &lists[j] {
                    scores[i] += s;
                }
            }
        }
    }

    /// Scores every non-history item by `Σ_{j ∈ history} s_ij` and keeps the best `n`.
    pub fn recommend(&self, history: &[usize], n: usize) -> RankedList {
        if history.is_empty() {
            return RankedList {
                cold_user: true,
                ..RankedList::default()
            };
        }
        let n_items = self.similarity.n_items();
        let mut scores = vec![0.0; n_items];
        let mut seen = vec![false; n_items];
        for &j in history {
            if !seen[j] {
                seen[j] = true;
                self.accumulate(j, &mut scores);
            }
        }
        let mut candidates: Vec<(usize, f64)> = (0..n_items).filter(|&i| !seen[i]).map(|i| (i, scores[i])).collect();
        let keep = n.min(candidates.len());
        if keep == 0 {
            return RankedList::default();
        }
        if keep < candidates.len() {
            candidates.select_nth_unstable_by(keep - 1, |a, b| by_score_then_index(*a, *b));
            candidates.truncate(keep);
        }
        candidates.sort_by(|a, b| by_score_then_index(*a, *b));
        RankedList {
            items: candidates.iter().map(|c| c.0).collect(),
            scores: candidates.iter().map(|c| c.1).collect(),
            cold_user: false,
        }
    }
}

fn by_score_then_index(a: (usize, f64), b: (usize, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

/// Top-`n` items for a user with the given history.
///
/// With `k` set, only the `k` most similar neighbours of each history item
/// contribute to the scores.
pub fn recommend_topn(similarity: &SimilarityMatrix, history: &[usize], n: usize, k: Option<usize>) -> RankedList {
    Neighborhoods::new(similarity, k).recommend(history, n)
}

/// One leave-one-out partition.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: InteractionSet,
    /// Held-out item per evaluated user.
    pub test: BTreeMap<usize, usize>,
    /// Users with fewer than two items, kept whole in `train` and not evaluated.
    pub excluded: Vec<usize>,
}

/// Moves one uniformly chosen item of every user with at least two items
/// into the test set.
pub fn loocv_split(interactions: &InteractionSet, seed: u64) -> Split {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = interactions.clone();
    let mut test = BTreeMap::new();
    let mut excluded = Vec::new();
    for (u, items) in train.user_items.iter_mut().enumerate() {
        if items.len() < 2 {
            excluded.push(u);
            continue;
        }
        let pos = rng.random_range(0..items.len());
        test.insert(u, items.remove(pos));
    }
    Split { train, test, excluded }
}

/// Fraction of test users whose held-out item appears in their list.
pub fn hit_rate(recommendations: &BTreeMap<usize, RankedList>, test: &BTreeMap<usize, usize>) -> f64 {
    if test.is_empty() {
        return 0.0;
    }
    let hits = test
        .iter()
        .filter(|(u, item)| recommendations.get(u).and_then(|l| l.rank_of(**item)).is_some())
        .count();
    hits as f64 / test.len() as f64
}

/// Mean over test users of `1 / rank` of the held-out item (0 when absent).
pub fn arhr(recommendations: &BTreeMap<usize, RankedList>, test: &BTreeMap<usize, usize>) -> f64 {
    if test.is_empty() {
        return 0.0;
    }
    let total: f64 = test
        .iter()
        .filter_map(|(u, item)| recommendations.get(u).and_then(|l| l.rank_of(*item)))
        .map(|rank| 1.0 / rank as f64)
        .sum();
    total / test.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffMetrics {
    pub n: usize,
    pub hr: f64,
    pub arhr: f64,
    pub hits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatResult {
    pub repeat: usize,
    pub seed: u64,
    pub evaluated_users: usize,
    pub excluded_users: usize,
    pub cold_users: usize,
    pub metrics: Vec<CutoffMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanMetrics {
    pub n: usize,
    pub hr: f64,
    pub arhr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_users: usize,
    pub n_items: usize,
    pub cutoffs: Vec<usize>,
    pub repeats: Vec<RepeatResult>,
    pub mean: Vec<MeanMetrics>,
    /// Free-form description of what produced the report.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
}

impl EvalReport {
    pub fn mean_at(&self, n: usize) -> Option<&MeanMetrics> {
        self.mean.iter().find(|m| m.n == n)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Rows `repeat,N,HR,ARHR`, followed by `mean` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("repeat,N,HR,ARHR\n");
        for r in &self.repeats {
            for m in &r.metrics {
                writeln!(out, "{},{},{},{}", r.repeat, m.n, m.hr, m.arhr).expect("writing to a String");
            }
        }
        for m in &self.mean {
            writeln!(out, "mean,{},{},{}", m.n, m.hr, m.arhr).expect("writing to a String");
        }
        out
    }
}

fn validate_eval_args(cutoffs: &[usize], repeats: usize) -> Result<()> {
    if repeats == 0 {
        return Err(Error::Config("repeats must be at least 1".into()));
    }
    if cutoffs.is_empty() || cutoffs.contains(&0) {
        return Err(Error::Config(
            "cutoffs must be a non-empty list of positive integers".into(),
        ));
    }
    Ok(())
}

/// Recommends for every test user of `split` and scores each cutoff.
pub fn evaluate_split(
    similarity: &SimilarityMatrix,
    split: &Split,
    cutoffs: &[usize],
    k: Option<usize>,
) -> Result<(Vec<CutoffMetrics>, usize)> {
    if similarity.n_items() != split.train.n_items() {
        return Err(Error::Dimension(format!(
            "similarity covers {} items but interactions reference {}",
            similarity.n_items(),
            split.train.n_items()
        )));
    }
    let max_n = cutoffs.iter().copied().max().unwrap_or(0);
    let hoods = Neighborhoods::new(similarity, k);
    let lists: BTreeMap<usize, RankedList> = split
        .test
        .keys()
        .copied()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|u| (u, hoods.recommend(split.train.items(u), max_n)))
        .collect();
    let cold = lists.values().filter(|l| l.cold_user).count();
    let metrics = cutoffs
        .iter()
        .map(|&n| {
            let prefix: BTreeMap<usize, RankedList> = lists.iter().map(|(u, l)| (*u, l.truncated(n))).collect();
            let hits = split
                .test
                .iter()
                .filter(|(u, item)| prefix[u].rank_of(**item).is_some())
                .count();
            CutoffMetrics {
                n,
                hr: hit_rate(&prefix, &split.test),
                arhr: arhr(&prefix, &split.test),
                hits,
            }
        })
        .collect();
    Ok((metrics, cold))
}

/// Leave-one-out evaluation where the similarity is rebuilt from each
/// repeat's training interactions by `similarity_for`.
///
/// Repeat `r` splits with seed `seed + r`.
pub fn evaluate_with<F>(
    interactions: &InteractionSet,
    cutoffs: &[usize],
    repeats: usize,
    seed: u64,
    k: Option<usize>,
    mut similarity_for: F,
) -> Result<EvalReport>
where
    F: FnMut(usize, &Split) -> Result<SimilarityMatrix>,
{
    validate_eval_args(cutoffs, repeats)?;
    let mut results = Vec::with_capacity(repeats);
    for repeat in 0..repeats {
        let split_seed = seed.wrapping_add(repeat as u64);
        let split = loocv_split(interactions, split_seed);
        let similarity = similarity_for(repeat, &split)?;
        let (metrics, cold_users) = evaluate_split(&similarity, &split, cutoffs, k)?;
        results.push(RepeatResult {
            repeat,
            seed: split_seed,
            evaluated_users: split.test.len(),
            excluded_users: split.excluded.len(),
            cold_users,
            metrics,
        });
    }
    let mean = cutoffs
        .iter()
        .enumerate()
        .map(|(c, &n)| MeanMetrics {
            n,
            hr: results.iter().map(|r| r.metrics[c].hr).sum::<f64>() / repeats as f64,
            arhr: results.iter().map(|r| r.metrics[c].arhr).sum::<f64>() / repeats as f64,
        })
        .collect();
    Ok(EvalReport {
        n_users: interactions.n_users(),
        n_items: interactions.n_items(),
        cutoffs: cutoffs.to_vec(),
        repeats: results,
        mean,
        provenance: None,
    })
}

/// Leave-one-out evaluation of a fixed similarity matrix.
pub fn evaluate(
    similarity: &SimilarityMatrix,
    interactions: &InteractionSet,
    cutoffs: &[usize],
    repeats: usize,
    seed: u64,
    k: Option<usize>,
) -> Result<EvalReport> {
    evaluate_with(interactions, cutoffs, repeats, seed, k, |_, _| Ok(similarity.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn three_items() -> SimilarityMatrix {
        SimilarityMatrix::new(array![[1.0, 0.9, 0.1], [0.9, 1.0, 0.5], [0.1, 0.5, 1.0]]).unwrap()
    }

    #[test]
    fn hand_scored_ranking() {
        let list = recommend_topn(&three_items(), &[0], 2, None);
        assert_eq!(list.items, vec![1, 2]);
        assert_eq!(list.scores, vec![0.9, 0.1]);
    }

    #[test]
    fn identity_similarity_falls_back_to_index_order() {
        let list = recommend_topn(&SimilarityMatrix::identity(6), &[1, 4], 3, None);
        assert_eq!(list.items, vec![0, 2, 3]);
        assert!(list.scores.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn full_history_gives_empty_list() {
        let list = recommend_topn(&three_items(), &[0, 1, 2], 5, None);
        assert!(list.items.is_empty());
        assert!(!list.cold_user);
    }

    #[test]
    fn empty_history_is_cold() {
        let list = recommend_topn(&three_items(), &[], 5, None);
        assert!(list.items.is_empty());
        assert!(list.cold_user);
    }

    #[test]
    fn neighbourhood_truncation() {
        // with k = 1 item 0 only passes its score to item 1
        let list = recommend_topn(&three_items(), &[0], 2, Some(1));
        assert_eq!(list.items, vec![1, 2]);
        assert_eq!(list.scores, vec![0.9, 0.0]);
    }

    #[test]
    fn split_properties() {
        let set = InteractionSet::new(8, vec![vec![3], vec![1, 2, 5], vec![]]).unwrap();
        let split = loocv_split(&set, 11);
        assert_eq!(split.excluded, vec![0, 2]);
        assert_eq!(split.train.items(0), &[3]);
        let held = split.test[&1];
        assert_eq!(split.train.items(1).len(), 2);
        let mut union = split.train.items(1).to_vec();
        union.push(held);
        union.sort_unstable();
        assert_eq!(union, vec![1, 2, 5]);
        assert_eq!(split, loocv_split(&set, 11));
    }

    #[test]
    fn metric_hand_values() {
        let test = BTreeMap::from([(0, 7), (1, 8)]);
        let recs = BTreeMap::from([
            (
                0,
                RankedList {
                    items: vec![3, 7, 9],
                    scores: vec![3.0, 2.0, 1.0],
                    cold_user: false,
                },
            ),
            (
                1,
                RankedList {
                    items: vec![1, 2],
                    scores: vec![1.0, 0.5],
                    cold_user: false,
                },
            ),
        ]);
        assert_eq!(hit_rate(&recs, &test), 0.5);
        assert_eq!(arhr(&recs, &test), 0.25);

        let top = BTreeMap::from([
            (
                0,
                RankedList {
                    items: vec![7],
                    scores: vec![1.0],
                    cold_user: false,
                },
            ),
            (
                1,
                RankedList {
                    items: vec![8, 1],
                    scores: vec![1.0, 0.0],
                    cold_user: false,
                },
            ),
        ]);
        assert_eq!(hit_rate(&top, &test), 1.0);
        assert_eq!(arhr(&top, &test), 1.0);
        assert_eq!(hit_rate(&BTreeMap::new(), &test), 0.0);
        assert_eq!(arhr(&BTreeMap::new(), &test), 0.0);
    }

    #[test]
    fn report_shape_and_determinism() {
        let set = InteractionSet::new(6, vec![vec![0, 1, 2], vec![1, 2], vec![3, 4, 5], vec![4, 5], vec![0]]).unwrap();
        let net = set.to_network().unwrap();
        let s = crate::network::aggregate_pathsim(&net, &crate::network::MetaPathConfig::new(1).unwrap());
        let report = evaluate(&s, &set, &[5, 10, 15, 20], 5, 42, None).unwrap();
        assert_eq!(report.repeats.len(), 5);
        assert!(report.repeats.iter().all(|r| r.metrics.len() == 4));
        assert_eq!(report.mean.len(), 4);
        assert_eq!(report.repeats[0].excluded_users, 1);
        assert_eq!(report, evaluate(&s, &set, &[5, 10, 15, 20], 5, 42, None).unwrap());
        let csv = report.to_csv();
        assert_eq!(csv.lines().count(), 1 + 20 + 4);
        assert!(evaluate(&s, &set, &[], 5, 42, None).is_err());
        assert!(evaluate(&s, &set, &[5], 0, 42, None).is_err());
    }
}
