//! Stacked per-node states.
//!
//! A network state is an n-by-p matrix whose row i is node i's iterate.
//! Consensus averaging is then a left multiplication by the mixing matrix.

use nalgebra::{DMatrix, DVector};

/// n stacked p-dimensional row states.
pub type Stack = DMatrix<f64>;

/// Row `i` as a column vector.
pub fn row(s: &Stack, i: usize) -> DVector<f64> {
    s.row(i).transpose()
}

/// Overwrite row `i` with `v`.
pub fn set_row(s: &mut Stack, i: usize, v: &DVector<f64>) {
    s.row_mut(i).copy_from(&v.transpose());
}

/// Stack of n copies of one state.
pub fn replicate(n: usize, v: &DVector<f64>) -> Stack {
    Stack::from_fn(n, v.len(), |_, j| v[j])
}

/// Build a stack from per-node states. All states must share one dimension.
pub fn from_rows(rows: &[DVector<f64>]) -> Stack {
    assert!(!rows.is_empty());
    let p = rows[0].len();
    Stack::from_fn(rows.len(), p, |i, j| {
        assert_eq!(rows[i].len(), p, "inconsistent state dimensions");
        rows[i][j]
    })
}

/// Network average state: the mean of the rows.
pub fn mean_row(s: &Stack) -> DVector<f64> {
    let n = s.nrows();
    let mut m = DVector::zeros(s.ncols());
    for i in 0..n {
        for j in 0..s.ncols() {
            m[j] += s[(i, j)];
        }
    }
    m / n as f64
}

/// Mean squared deviation of the rows from their average,
/// `(1/n) * sum_i ||row_i - mean||^2`.
pub fn mean_sq_deviation(s: &Stack) -> f64 {
    let mean = mean_row(s);
    let n = s.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        let mut d = 0.0;
        for j in 0..s.ncols() {
            let e = s[(i, j)] - mean[j];
            d += e * e;
        }
        acc += d;
    }
    acc / n as f64
}

/// Mean squared distance of the rows from a fixed point,
/// `(1/n) * sum_i ||row_i - target||^2`.
pub fn mean_sq_distance(s: &Stack, target: &DVector<f64>) -> f64 {
    assert_eq!(s.ncols(), target.len(), "target dimension mismatch");
    let n = s.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        let mut d = 0.0;
        for j in 0..s.ncols() {
            let e = s[(i, j)] - target[j];
            d += e * e;
        }
        acc += d;
    }
    acc / n as f64
}

/// Largest row norm, used by divergence guards.
pub fn max_row_norm(s: &Stack) -> f64 {
    (0..s.nrows())
        .map(|i| s.row(i).norm())
        .fold(0.0, f64::max)
}
