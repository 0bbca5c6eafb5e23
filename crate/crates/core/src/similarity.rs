use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// Symmetric item-item similarity with entries in `[0, 1]`.
///
/// Used both for meta-path similarity and for profile cosine similarity.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    values: Array2<f64>,
}

/// Slack allowed above 1.0 when validating externally supplied matrices.
pub const RANGE_SLACK: f64 = 1e-12;

impl SimilarityMatrix {
    /// Wraps a matrix after checking shape, exact symmetry and range.
    pub fn new(values: Array2<f64>) -> Result<Self> {
        let n = values.nrows();
        if values.ncols() != n || n == 0 {
            return Err(Error::Dimension(format!(
                "similarity must be square and non-empty, got {}x{}",
                n,
                values.ncols()
            )));
        }
        for i in 0..n {
            for j in 0..n {
                let v = values[[i, j]];
                if !(0.0..=1.0 + RANGE_SLACK).contains(&v) {
                    return Err(Error::Data(format!("similarity ({i}, {j}) = {v} outside [0, 1]")));
                }
                if v != values[[j, i]] {
                    return Err(Error::Data(format!("similarity not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(SimilarityMatrix { values })
    }

    /// For callers that build the matrix symmetric and in range by construction.
    pub(crate) fn from_trusted(values: Array2<f64>) -> Self {
        debug_assert_eq!(values.nrows(), values.ncols());
        SimilarityMatrix { values }
    }

    pub fn identity(n: usize) -> Self {
        SimilarityMatrix::from_trusted(Array2::eye(n))
    }

    pub fn n_items(&self) -> usize {
        self.values.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[[i, j]]
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.values
    }

    /// Relabels items: entry `(i, j)` of the result is entry `(perm[i], perm[j])` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> SimilarityMatrix {
        let n = self.n_items();
        assert_eq!(perm.len(), n);
        SimilarityMatrix::from_trusted(Array2::from_shape_fn((n, n), |(i, j)| self.values[[perm[i], perm[j]]]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rejects_asymmetric_and_out_of_range() {
        assert!(SimilarityMatrix::new(array![[1.0, 0.2], [0.3, 1.0]]).is_err());
        assert!(SimilarityMatrix::new(array![[1.5, 0.0], [0.0, 1.0]]).is_err());
        assert!(SimilarityMatrix::new(array![[1.0, 0.0]]).is_err());
        assert!(SimilarityMatrix::new(array![[1.0, 0.4], [0.4, 1.0]]).is_ok());
    }
}
