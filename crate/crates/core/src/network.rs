//! Bi-type item/user network and meta-path (PathSim) item similarity.
//!
//! The meta-path family is item→user→item repeated `n` times, whose commuting
//! matrix is `(W·Wᵀ)^n` for the item-by-user weight matrix `W`. Similarities of
//! the first `N` paths are blended with weights that halve with each extra
//! round trip.

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg;
use crate::similarity::SimilarityMatrix;
use crate::sparse::CsrMatrix;

/// Items (rows) by users (columns) with strictly positive interaction weights.
#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteNetwork {
    item_user: CsrMatrix,
}

impl BipartiteNetwork {
    pub fn new(item_user: CsrMatrix) -> Result<Self> {
        if item_user.n_rows() == 0 || item_user.n_cols() == 0 {
            return Err(Error::Data(format!(
                "network needs at least one item and one user, got {}x{}",
                item_user.n_rows(),
                item_user.n_cols()
            )));
        }
        if let Some((i, j, v)) = item_user.triplets().find(|&(_, _, v)| v <= 0.0) {
            return Err(Error::Data(format!(
                "interaction weight at item {i}, user {j} must be positive, got {v}"
            )));
        }
        Ok(BipartiteNetwork { item_user })
    }

    /// Unit-weight network from `(item, user)` pairs. Repeated pairs collapse to one.
    pub fn from_pairs(n_items: usize, n_users: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let m = CsrMatrix::from_triplets(n_items, n_users, pairs.into_iter().map(|(i, u)| (i, u, 1.0)))?;
        Self::new(m.map_values(|_| 1.0))
    }

    pub fn n_items(&self) -> usize {
        self.item_user.n_rows()
    }

    pub fn n_users(&self) -> usize {
        self.item_user.n_cols()
    }

    pub fn weights(&self) -> &CsrMatrix {
        &self.item_user
    }

    /// Same network with every stored weight replaced by 1.
    pub fn binarized(&self) -> BipartiteNetwork {
        BipartiteNetwork {
            item_user: self.item_user.map_values(|_| 1.0),
        }
    }

    /// `W·Wᵀ`, accumulated user by user over the sparse columns of `W`.
    fn item_gram(&self) -> Array2<f64> {
        let n = self.n_items();
        let by_user = self.item_user.transpose();
        let mut gram = Array2::zeros((n, n));
        for u in 0..by_user.n_rows() {
            let (items, weights) = by_user.row(u);
            for (a, (&i, &wi)) in items.iter().zip(weights).enumerate() {
                for (&j, &wj) in items[a..].iter().zip(&weights[a..]) {
                    gram[[i, j]] += wi * wj;
                }
            }
        }
        linalg::mirror_upper(&mut gram);
        gram
    }
}

/// Number of meta-paths blended and their weights `2^(N-n) / (2^N - 1)`, `n = 1..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaPathConfig {
    alphas: Vec<f64>,
}

impl MetaPathConfig {
    /// Deepest supported blend; `2^N` must stay exact in `f64` and the
    /// commuting-matrix entries grow geometrically with depth.
    pub const MAX_DEPTH: usize = 30;

    pub fn new(max_depth: usize) -> Result<Self> {
        if max_depth == 0 || max_depth > Self::MAX_DEPTH {
            return Err(Error::Config(format!(
                "meta-path depth must be in 1..={}, got {max_depth}",
                Self::MAX_DEPTH
            )));
        }
        let denom = (1u64 << max_depth) as f64 - 1.0;
        let alphas = (1..=max_depth)
            .map(|n| (1u64 << (max_depth - n)) as f64 / denom)
            .collect();
        Ok(MetaPathConfig { alphas })
    }

    pub fn max_depth(&self) -> usize {
        self.alphas.len()
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }
}

/// Commuting matrix `(W·Wᵀ)^n` of the `n`-round-trip meta-path.
pub fn commuting_matrix(net: &BipartiteNetwork, n: usize) -> Result<Array2<f64>> {
    if n == 0 {
        return Err(Error::Config("meta-path length must be at least 1".into()));
    }
    Ok(commuting_powers(net, n).pop().expect("n >= 1"))
}

/// `[(W·Wᵀ)^1, ..., (W·Wᵀ)^depth]`.
fn commuting_powers(net: &BipartiteNetwork, depth: usize) -> Vec<Array2<f64>> {
    let gram = net.item_gram();
    let mut powers = Vec::with_capacity(depth);
    powers.push(gram);
    for _ in 1..depth {
        let last = powers.last().expect("non-empty");
        let mut next = linalg::matmul(last.view(), powers[0].view());
        linalg::mirror_upper(&mut next);
        powers.push(next);
    }
    powers
}

/// `s_ij = 2·M_ij / (M_ii + M_jj)`, zero where the denominator vanishes.
///
/// Computed on the upper triangle and mirrored, so the output is exactly
/// symmetric; items with `M_ii > 0` get a diagonal of exactly 1.
pub fn pathsim_from_commuting(m: &Array2<f64>) -> Result<SimilarityMatrix> {
    let n = m.nrows();
    if m.ncols() != n || n == 0 {
        return Err(Error::Dimension(format!(
            "commuting matrix must be square and non-empty, got {}x{}",
            n,
            m.ncols()
        )));
    }
    let diag: Vec<f64> = (0..n).map(|i| m[[i, i]]).collect();
    let mut s = Array2::zeros((n, n));
    s.outer_iter_mut().into_par_iter().enumerate().for_each(|(i, mut row)| {
        for j in i..n {
            let denom = diag[i] + diag[j];
            if denom > 0.0 {
                row[j] = (2.0 * m[[i, j]] / denom).clamp(0.0, 1.0);
            }
        }
    });
    linalg::mirror_upper(&mut s);
    Ok(SimilarityMatrix::from_trusted(s))
}

/// Weighted blend of PathSim over the meta-paths of length `1..=cfg.max_depth()`.
pub fn aggregate_pathsim(net: &BipartiteNetwork, cfg: &MetaPathConfig) -> SimilarityMatrix {
    let powers = commuting_powers(net, cfg.max_depth());
    let per_path: Vec<SimilarityMatrix> = powers
        .par_iter()
        .map(|m| pathsim_from_commuting(m).expect("commuting matrices are square"))
        .collect();
    let n = net.n_items();
    let mut total = Array2::zeros((n, n));
    for (alpha, s) in cfg.alphas().iter().zip(&per_path) {
        total.scaled_add(*alpha, &s.view());
    }
    // the blend of [0, 1] matrices may round a hair away from 0 or 1
    total.mapv_inplace(|v| v.min(1.0));
    for i in 0..n {
        if powers[0][[i, i]] > 0.0 {
            total[[i, i]] = 1.0;
        }
    }
    SimilarityMatrix::from_trusted(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn net(rows: &[Vec<f64>]) -> BipartiteNetwork {
        BipartiteNetwork::new(CsrMatrix::from_dense(rows).unwrap()).unwrap()
    }

    #[test]
    fn shared_user_commuting_matrix() {
        let m = commuting_matrix(&net(&[vec![1.0], vec![1.0]]), 1).unwrap();
        assert_eq!(m, array![[1.0, 1.0], [1.0, 1.0]]);
    }

    #[test]
    fn overlapping_users_commuting_matrix() {
        let w = net(&[vec![1.0, 0.0], vec![1.0, 1.0]]);
        let m1 = commuting_matrix(&w, 1).unwrap();
        assert_eq!(m1, array![[1.0, 1.0], [1.0, 2.0]]);
        assert_eq!(commuting_matrix(&w, 2).unwrap(), m1.dot(&m1));
    }

    #[test]
    fn zero_length_path_is_rejected() {
        assert!(commuting_matrix(&net(&[vec![1.0]]), 0).is_err());
    }

    #[test]
    fn pathsim_fixed_values() {
        let s = pathsim_from_commuting(&array![[1.0, 1.0], [1.0, 2.0]]).unwrap();
        assert!((s.get(0, 1) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.get(0, 0), 1.0);

        let s = pathsim_from_commuting(&array![[2.0, 0.0], [0.0, 3.0]]).unwrap();
        assert_eq!(s.view(), array![[1.0, 0.0], [0.0, 1.0]]);

        let s = pathsim_from_commuting(&Array2::zeros((2, 2))).unwrap();
        assert_eq!(s.view(), Array2::<f64>::zeros((2, 2)));
    }

    #[test]
    fn isolated_item_has_zero_row() {
        let mut w = net(&[vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]]);
        // rebuild with a 4th item that has no interactions
        let m = CsrMatrix::from_triplets(4, 2, w.weights().triplets()).unwrap();
        w = BipartiteNetwork::new(m).unwrap();
        let s = aggregate_pathsim(&w, &MetaPathConfig::new(2).unwrap());
        for j in 0..4 {
            assert_eq!(s.get(3, j), 0.0);
        }
        assert_eq!(s.get(0, 0), 1.0);
    }

    #[test]
    fn alpha_weights() {
        assert_eq!(MetaPathConfig::new(1).unwrap().alphas(), &[1.0]);
        let a2 = MetaPathConfig::new(2).unwrap();
        assert!((a2.alphas()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((a2.alphas()[1] - 1.0 / 3.0).abs() < 1e-15);
        let a3 = MetaPathConfig::new(3).unwrap();
        for (a, e) in a3.alphas().iter().zip([4.0 / 7.0, 2.0 / 7.0, 1.0 / 7.0]) {
            assert!((a - e).abs() < 1e-15);
        }
        for depth in 1..=12 {
            let cfg = MetaPathConfig::new(depth).unwrap();
            assert!((cfg.alphas().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for pair in cfg.alphas().windows(2) {
                assert_eq!(pair[0], 2.0 * pair[1]);
            }
        }
        assert!(MetaPathConfig::new(0).is_err());
    }

    #[test]
    fn single_path_blend_equals_plain_pathsim() {
        let w = net(&[vec![1.0, 0.0, 1.0], vec![1.0, 1.0, 0.0], vec![0.0, 1.0, 1.0]]);
        let blended = aggregate_pathsim(&w, &MetaPathConfig::new(1).unwrap());
        let plain = pathsim_from_commuting(&commuting_matrix(&w, 1).unwrap()).unwrap();
        assert_eq!(blended, plain);
    }

    #[test]
    fn nonpositive_weight_is_rejected() {
        let m = CsrMatrix::from_triplets(1, 1, [(0, 0, -1.0)]).unwrap();
        assert!(BipartiteNetwork::new(m).is_err());
    }
}
