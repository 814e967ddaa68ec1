//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().iter().fold(0.0f64, |a, &s| a.max(s))
}

/// Eigen-decomposition of the symmetric part of `m`.
pub fn symmetric_eigen(m: &DMatrix<f64>) -> SymmetricEigen<f64, nalgebra::Dyn> {
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym)
}

/// Applies `func` to the eigenvalues of the symmetric matrix `m`.
pub fn symmetric_function(m: &DMatrix<f64>, func: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let eig = symmetric_eigen(m);
    let vals = eig.eigenvalues.map(func);
    let v = &eig.eigenvectors;
    let out = v * DMatrix::from_diagonal(&vals) * v.transpose();
    (&out + out.transpose()) * 0.5
}

/// Square root of a positive semi-definite matrix (negative eigenvalues are clipped).
pub fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    symmetric_function(m, |l| l.max(0.0).sqrt())
}

/// Full right-singular data of `a` (`r x m`): returns `(V, sigma)` with `V`
/// an `m x m` orthogonal matrix and `sigma` of length `m`, such that
/// `|a x| = |diag(sigma) V^T x|` for every `x`. Missing singular values
/// (when `r < m`) are zero.
pub fn right_singular_system(a: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let m = a.ncols();
    let rows = a.nrows().max(m);
    let mut padded = DMatrix::zeros(rows, m);
    padded.view_mut((0, 0), (a.nrows(), m)).copy_from(a);
    let svd = SVD::new(padded, false, true);
    let v_t = svd.v_t.expect("requested V^T");
    (v_t.transpose(), svd.singular_values)
}

/// The positive semi-definite matrix `(A^T A)^{1/2}`, which has `|P x| = |A x|`.
pub fn psd_form(a: &DMatrix<f64>) -> DMatrix<f64> {
    let (v, sigma) = right_singular_system(a);
    let out = &v * DMatrix::from_diagonal(&sigma) * v.transpose();
    (&out + out.transpose()) * 0.5
}

/// Splits `R^n` into the left null space of `c` (`n x s`) and its orthogonal
/// complement. Singular values at or below `rel_tol * sigma_max` count as zero.
///
/// Returns `(kernel, range)` as lists of orthonormal column vectors, each
/// signed so that its largest entry is positive.
pub fn left_kernel_split(c: &DMatrix<f64>, rel_tol: f64) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
    let (v, sigma) = right_singular_system(&c.transpose());
    let top = sigma.iter().fold(0.0f64, |a, &s| a.max(s));
    let threshold = rel_tol * top;
    let mut kernel = Vec::new();
    let mut range = Vec::new();
    for (i, s) in sigma.iter().enumerate() {
        let mut col = v.column(i).into_owned();
        if col.iter().fold(0.0f64, |m, x| if x.abs() > m.abs() { *x } else { m }) < 0.0 {
            col.neg_mut();
        }
        if top == 0.0 || *s <= threshold {
            kernel.push(col);
        } else {
            range.push(col);
        }
    }
    (kernel, range)
}

/// Moore-Penrose pseudo-inverse of a symmetric positive semi-definite matrix
/// restricted to the span of `range`.
pub fn psd_pinv_on(m: &DMatrix<f64>, range: &[DVector<f64>]) -> DMatrix<f64> {
    let n = m.nrows();
    if range.is_empty() {
        return DMatrix::zeros(n, n);
    }
    let v = DMatrix::from_columns(range);
    let restricted = v.transpose() * m * &v;
    let inv = symmetric_function(&restricted, |l| if l > 0.0 { 1.0 / l } else { 0.0 });
    &v * inv * v.transpose()
}

/// Orthogonal projector onto the span of the given orthonormal columns.
pub fn projector(basis: &[DVector<f64>], n: usize) -> DMatrix<f64> {
    basis.iter().fold(DMatrix::zeros(n, n), |acc, b| acc + b * b.transpose())
}

/// 2-norm condition number; infinite for singular matrices.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.singular_values();
    let max = sv.iter().fold(0.0f64, |a, &s| a.max(s));
    let min = sv.iter().fold(f64::INFINITY, |a, &s| a.min(s));
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Largest absolute difference between entries.
pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}
