//! Small dense helpers on `nalgebra` matrices.

use nalgebra::DMatrix;

/// Largest absolute entry.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, &x| acc.max(x.abs()))
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .fold(0.0_f64, |acc, (x, y)| acc.max(nan_inf((x - y).abs())))
}

/// Largest `|m - m^T|` entry relative to `1 + max|m|`.
pub fn symmetry_defect(m: &DMatrix<f64>) -> f64 {
    max_abs_diff(m, &m.transpose()) / (1.0 + max_abs(m))
}

pub fn smallest_singular_value(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// `(positive, negative)` eigenvalue counts of a symmetric matrix; eigenvalues
/// within `1e-12 * max|lambda|` of zero are counted in neither.
pub fn signature(m: &DMatrix<f64>) -> (usize, usize) {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigenvalues();
    let scale = eig.iter().fold(0.0_f64, |a, &l| a.max(l.abs()));
    let cut = 1e-12 * scale;
    let pos = eig.iter().filter(|&&l| l > cut).count();
    let neg = eig.iter().filter(|&&l| l < -cut).count();
    (pos, neg)
}

/// Assembles `[[a, b], [c, d]]` from equally sized square blocks.
pub fn blocks(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>, d: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(a);
    m.view_mut((0, n), (n, n)).copy_from(b);
    m.view_mut((n, 0), (n, n)).copy_from(c);
    m.view_mut((n, n), (n, n)).copy_from(d);
    m
}

/// The standard symplectic matrix `[[0, I], [-I, 0]]` of size `2n`.
pub fn standard_symplectic(n: usize) -> DMatrix<f64> {
    let id = DMatrix::identity(n, n);
    let zero = DMatrix::zeros(n, n);
    blocks(&zero, &id, &(-&id), &zero)
}

pub(crate) fn nan_inf(x: f64) -> f64 {
    if x.is_nan() {
        f64::INFINITY
    } else {
        x
    }
}
