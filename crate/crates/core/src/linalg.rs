//! Dense kernels shared by the similarity and gradient computations.
//!
//! Products are split over fixed-size row blocks of the left operand, so the
//! floating point result of every entry does not depend on the number of
//! worker threads.

use ndarray::parallel::prelude::*;
use ndarray::{Array2, ArrayView2, Axis};

const ROW_BLOCK: usize = 32;

/// `a · b`, row-block parallel.
pub fn matmul(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Array2<f64> {
    assert_eq!(a.ncols(), b.nrows(), "inner dimensions differ");
    let mut out = Array2::zeros((a.nrows(), b.ncols()));
    out.axis_chunks_iter_mut(Axis(0), ROW_BLOCK)
        .into_par_iter()
        .zip(a.axis_chunks_iter(Axis(0), ROW_BLOCK).into_par_iter())
        .for_each(|(mut dst, src)| dst.assign(&src.dot(&b)));
    out
}

/// `a · bᵀ` restricted to the upper triangle and mirrored, so the result is
/// exactly symmetric. Only meaningful when `a · bᵀ` is symmetric in exact
/// arithmetic (e.g. `b = a·D` for a diagonal `D`).
pub fn symmetric_product(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut out = matmul(a, b.t());
    mirror_upper(&mut out);
    out
}

/// Copies the strict upper triangle onto the lower one.
pub fn mirror_upper(m: &mut Array2<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            m[[j, i]] = m[[i, j]];
        }
    }
}
