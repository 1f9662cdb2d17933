//! Small dense linear-algebra helpers shared by the solvers.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

/// Jitter added to a Gram matrix whose Cholesky factorization fails.
pub const CHOLESKY_JITTER: f64 = 1e-12;

/// Matrix with i.i.d. `N(0, std^2)` entries, filled column by column.
pub fn gaussian_matrix<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    std: f64,
    rng: &mut R,
) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows, cols);
    for v in m.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *v = std * z;
    }
    m
}

/// Unit vector drawn uniformly from the sphere in `R^n`.
pub fn random_unit<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let nrm = v.norm();
        if nrm > 1e-300 {
            return v / nrm;
        }
    }
}

/// Thin QR factor of `a` (rows >= cols) with the sign of each column chosen so
/// that the matching diagonal entry of R is nonnegative.
pub fn thin_q_sign_fixed(a: DMatrix<f64>) -> DMatrix<f64> {
    let qr = a.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..q.ncols() {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Haar-distributed orthogonal `n x n` matrix: QR of a standard Gaussian
/// matrix with the R diagonal made positive.
pub fn haar_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    thin_q_sign_fixed(gaussian_matrix(n, n, 1.0, rng))
}

/// Cholesky factor of a symmetric positive definite matrix, retrying once with
/// `CHOLESKY_JITTER * I` added.
pub fn cholesky_with_jitter(m: &DMatrix<f64>) -> Option<Cholesky<f64, nalgebra::Dyn>> {
    if let Some(c) = Cholesky::new(m.clone()) {
        return Some(c);
    }
    let n = m.nrows();
    Cholesky::new(m + DMatrix::identity(n, n) * CHOLESKY_JITTER)
}

/// Smallest and largest eigenvalues of a symmetric matrix.
pub fn sym_eig_range(m: &DMatrix<f64>) -> (f64, f64) {
    let e = SymmetricEigen::new(m.clone());
    let lo = e.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = e
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Smallest singular value of a tall matrix.
pub fn min_singular_value(s: &DMatrix<f64>) -> f64 {
    if s.ncols() == 0 {
        return f64::INFINITY;
    }
    // from S itself: the Gram route reports sqrt(eps) for an exact null column
    s.clone().svd(false, false).singular_values.min()
}

/// Remove unit direction `u` (which must lie in the span of the orthonormal
/// columns of `perp`) from that span. Returns an orthonormal basis of the
/// remaining complement, obtained by one Householder reflection in the
/// coordinates of `perp`.
pub fn deflate_basis(perp: &DMatrix<f64>, u: &DVector<f64>) -> DMatrix<f64> {
    let n = perp.ncols();
    if n == 0 {
        return perp.clone();
    }
    let mut w = perp.tr_mul(u);
    let wn = w.norm();
    if wn == 0.0 {
        return perp.columns(1, n - 1).into_owned();
    }
    w /= wn;
    // v = w + sign(w0) e1 maps w to -sign(w0) e1 under H = I - 2 v v^T / v^T v.
    let mut v = w.clone();
    let s = if w[0] >= 0.0 { 1.0 } else { -1.0 };
    v[0] += s;
    let vv = v.norm_squared();
    let pv = perp * &v;
    let mut out = perp.clone();
    out.ger(-2.0 / vv, &pv, &v, 1.0);
    out.columns(1, n - 1).into_owned()
}

/// Largest absolute entry of a matrix.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |a, &b| a.max(b.abs()))
}
