//! Small dense linear-algebra helpers used by the pointwise checks.

use nalgebra::{DMatrix, DVector};

/// Matrix whose columns are the given vectors.
pub fn columns(vecs: &[Vec<f64>], rows: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, vecs.len(), |i, j| vecs[j][i])
}

pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    if a.ncols() == 0 || a.nrows() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = a.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|x, y| y.partial_cmp(x).unwrap_or(std::cmp::Ordering::Equal));
    s
}

pub fn min_singular_value(a: &DMatrix<f64>) -> f64 {
    let s = singular_values(a);
    if s.len() < a.ncols().min(a.nrows()) || s.is_empty() {
        return 0.0;
    }
    *s.last().unwrap()
}

/// Numerical rank with an absolute singular-value threshold.
pub fn rank(a: &DMatrix<f64>, thresh: f64) -> usize {
    singular_values(a).iter().filter(|&&s| s > thresh).count()
}

/// Norm of the component of `v` orthogonal to the column span of `a`.
pub fn span_residual(a: &DMatrix<f64>, v: &[f64]) -> f64 {
    let b = DVector::from_column_slice(v);
    if a.ncols() == 0 {
        return b.norm();
    }
    let svd = a.clone().svd(true, true);
    match svd.solve(&b, 1e-12) {
        Ok(x) => (a * x - &b).norm(),
        Err(_) => b.norm(),
    }
}

/// Solve a square system; `None` when numerically singular.
pub fn solve(a: &DMatrix<f64>, b: &[f64]) -> Option<Vec<f64>> {
    let lu = a.clone().lu();
    lu.solve(&DVector::from_column_slice(b)).map(|x| x.iter().copied().collect())
}

pub fn det(a: &DMatrix<f64>) -> f64 {
    a.clone().determinant()
}

/// Ordinary least-squares line fit; returns (slope, intercept, r²).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    (slope, intercept, r2)
}
