//! Reference computations written independently of the library code paths.
#![allow(clippy::needless_range_loop)]
#![allow(dead_code)]

use hinweight::{
    aggregate_pathsim, load_corpus, BipartiteNetwork, CsrMatrix, GlobalWeights, LocalWeighting, MetaPathConfig,
    ProfileCorpus, SimilarityMatrix,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Dense local weights of a corpus.
pub fn dense_local(corpus: &ProfileCorpus) -> Vec<Vec<f64>> {
    let l = corpus.local_weights();
    let mut out = vec![vec![0.0; l.n_cols()]; l.n_rows()];
    for (i, k, v) in l.triplets() {
        out[i][k] = v;
    }
    out
}

/// Random corpus whose items all have at least one term.
pub fn random_corpus(rng: &mut ChaCha8Rng, n_items: usize, n_terms: usize, density: f64) -> ProfileCorpus {
    let mut triplets = Vec::new();
    for i in 0..n_items {
        let forced = rng.random_range(0..n_terms);
        for k in 0..n_terms {
            if k == forced || rng.random_bool(density) {
                triplets.push((i, k, rng.random_range(1..=5) as f64));
            }
        }
    }
    let counts = CsrMatrix::from_triplets(n_items, n_terms, triplets).unwrap();
    let vocab = (0..n_terms).map(|k| format!("t{k}")).collect();
    load_corpus(&counts, vocab, LocalWeighting::Raw).unwrap().0
}

pub fn random_weights(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> GlobalWeights {
    GlobalWeights::from_vec((0..n).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}

pub fn random_network(rng: &mut ChaCha8Rng, n_items: usize, n_users: usize, density: f64) -> BipartiteNetwork {
    let mut pairs = Vec::new();
    for i in 0..n_items {
        for u in 0..n_users {
            if rng.random_bool(density) {
                pairs.push((i, u));
            }
        }
    }
    BipartiteNetwork::from_pairs(n_items, n_users, pairs).unwrap()
}

pub fn random_target(rng: &mut ChaCha8Rng, n_items: usize) -> SimilarityMatrix {
    let users = rng.random_range(2..=12);
    let net = random_network(rng, n_items, users, 0.3);
    let depth = rng.random_range(1..=3);
    aggregate_pathsim(&net, &MetaPathConfig::new(depth).unwrap())
}

/// `‖d_i‖ = sqrt(Σ_k l_ik²·w_k)`.
pub fn norms(local: &[Vec<f64>], w: &[f64]) -> Vec<f64> {
    local
        .iter()
        .map(|row| row.iter().zip(w).map(|(l, wk)| l * l * wk).sum::<f64>().sqrt())
        .collect()
}

/// Weighted cosine straight from its definition.
pub fn direct_cosine(local: &[Vec<f64>], w: &[f64]) -> Vec<Vec<f64>> {
    let d = norms(local, w);
    let n = local.len();
    let mut s = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if d[i] > 0.0 && d[j] > 0.0 {
                let dot: f64 = (0..w.len()).map(|k| local[i][k] * local[j][k] * w[k]).sum();
                s[i][j] = dot / (d[i] * d[j]);
            }
        }
    }
    s
}

/// `J` summed entry by entry.
pub fn direct_objective(local: &[Vec<f64>], w: &[f64], target: &SimilarityMatrix, lambda: f64) -> f64 {
    let s = direct_cosine(local, w);
    let mut fit = 0.0;
    for i in 0..s.len() {
        for j in 0..s.len() {
            fit += (s[i][j] - target.get(i, j)).powi(2);
        }
    }
    0.5 * fit + 0.5 * lambda * w.iter().map(|x| x * x).sum::<f64>()
}

/// Element-wise partial derivative: a double loop over all item pairs of
/// `(s_ij − t_ij)·[l_ik·l_jk/(d_i·d_j) − s_ij/2·(l_ik²/d_i² + l_jk²/d_j²)]`, plus `λ·w_k`.
pub fn elementwise_gradient(local: &[Vec<f64>], w: &[f64], target: &SimilarityMatrix, lambda: f64) -> Vec<f64> {
    let d = norms(local, w);
    let s = direct_cosine(local, w);
    let n = local.len();
    (0..w.len())
        .map(|k| {
            let mut total = 0.0;
            for i in 0..n {
                for j in 0..n {
                    if d[i] == 0.0 || d[j] == 0.0 {
                        continue;
                    }
                    let q = s[i][j] - target.get(i, j);
                    let cross = local[i][k] * local[j][k] / (d[i] * d[j]);
                    let own = local[i][k].powi(2) / d[i].powi(2) + local[j][k].powi(2) / d[j].powi(2);
                    total += q * (cross - 0.5 * s[i][j] * own);
                }
            }
            total + lambda * w[k]
        })
        .collect()
}

/// Central differences of `f` with step `1e-6·max(|w_k|, 1)` per coordinate.
pub fn central_differences(w: &[f64], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    (0..w.len())
        .map(|k| {
            let h = 1e-6 * w[k].abs().max(1.0);
            let mut plus = w.to_vec();
            let mut minus = w.to_vec();
            plus[k] += h;
            minus[k] -= h;
            (f(&plus) - f(&minus)) / (2.0 * h)
        })
        .collect()
}

/// Number of weighted path instances item→user→item…→item with `n` round trips,
/// counted by walking the network.
pub fn path_instances(net: &BipartiteNetwork, n: usize) -> Vec<Vec<f64>> {
    let n_items = net.n_items();
    let w = net.weights().to_dense();
    // walk[i][j] after t round trips
    let mut walk: Vec<Vec<f64>> = (0..n_items)
        .map(|i| (0..n_items).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _ in 0..n {
        let mut next = vec![vec![0.0; n_items]; n_items];
        for start in 0..n_items {
            for mid in 0..n_items {
                if walk[start][mid] == 0.0 {
                    continue;
                }
                for u in 0..net.n_users() {
                    if w[[mid, u]] == 0.0 {
                        continue;
                    }
                    for end in 0..n_items {
                        next[start][end] += walk[start][mid] * w[[mid, u]] * w[[end, u]];
                    }
                }
            }
        }
        walk = next;
    }
    walk
}

/// Item-kNN scores by exhaustive summation over candidates and history.
pub fn brute_force_scores(s: &SimilarityMatrix, history: &[usize]) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    for i in 0..s.n_items() {
        if history.contains(&i) {
            continue;
        }
        let mut score = 0.0;
        for &j in history {
            score += s.get(i, j);
        }
        out.push((i, score));
    }
    out.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    out
}

/// `|a − b| ≤ rel·max(|a|, |b|)`.
pub fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs())
}

/// Matrix-form vs element-wise gradient agreement: 1e-10 relative, or 1e-12
/// absolute for components below 1e-8 where cancellation leaves only rounding.
pub fn gradient_close(a: f64, b: f64) -> bool {
    if a.abs().max(b.abs()) > 1e-8 {
        rel_close(a, b, 1e-10)
    } else {
        (a - b).abs() <= 1e-12
    }
}
