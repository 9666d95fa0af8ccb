use super::{check_finite_matrix, check_square, norm_fro, ComplexMatrix, ComplexVector, C64};
use crate::error::{Error, Result};
use nalgebra::linalg::LU;

/// Right eigenpairs of a general complex matrix.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<C64>,
    /// Column `k` is the unit-norm right eigenvector for `eigenvalues[k]`.
    pub right_vectors: ComplexMatrix,
}

/// Eigenvalues and right eigenvectors of a square complex matrix, ordered by
/// real part and then by imaginary part.
///
/// Pairs whose residual exceeds `1e-10 ||A||` get two steps of inverse
/// iteration; if that does not fix them the input is treated as defective.
pub fn eig_general(a: &ComplexMatrix) -> Result<EigenDecomposition> {
    check_square(a)?;
    check_finite_matrix(a, "eig_general input")?;
    let n = a.nrows();
    if n == 0 {
        return Ok(EigenDecomposition { eigenvalues: vec![], right_vectors: ComplexMatrix::zeros(0, 0) });
    }
    let anorm = norm_fro(a);
    let fa = faer::Mat::<C64>::from_fn(n, n, |i, j| a[(i, j)]);
    let evd = faer::linalg::solvers::Eigen::new(fa.as_ref()).map_err(|_| Error::Convergence("eigendecomposition"))?;
    let (u, s) = (evd.U(), evd.S().column_vector());
    let vals: Vec<C64> = (0..n).map(|k| s[k]).collect();
    let mut vecs = ComplexMatrix::from_fn(n, n, |i, j| u[(i, j)]);
    for k in 0..n {
        let nv = vecs.column(k).norm();
        if !(nv.is_finite() && nv > 0.0) {
            return Err(Error::Convergence("eigenvector (zero or non-finite column)"));
        }
        vecs.column_mut(k).unscale_mut(nv);
    }

    let tol = 1e-10 * anorm.max(f64::MIN_POSITIVE);
    let fv = faer::Mat::<C64>::from_fn(n, n, |i, j| vecs[(i, j)]);
    let av = &fa * &fv;
    for k in 0..n {
        let res = (0..n).map(|i| (av[(i, k)] - fv[(i, k)] * vals[k]).norm_sqr()).sum::<f64>().sqrt();
        if res > tol {
            let lam = vals[k];
            let v = inverse_iteration(a, lam, vecs.column(k).into_owned(), anorm);
            if residual(a, lam, &v) > tol {
                return Err(Error::Convergence("eigenvector (defective or ill-conditioned input)"));
            }
            vecs.set_column(k, &v);
        }
    }

    let order = sorted_order(&vals, anorm);
    let eigenvalues = order.iter().map(|&k| vals[k]).collect();
    let mut right_vectors = ComplexMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        right_vectors.set_column(dst, &vecs.column(src));
    }
    Ok(EigenDecomposition { eigenvalues, right_vectors })
}

fn residual(a: &ComplexMatrix, lam: C64, v: &ComplexVector) -> f64 {
    (a * v - v * lam).norm()
}

fn inverse_iteration(a: &ComplexMatrix, lam: C64, mut v: ComplexVector, anorm: f64) -> ComplexVector {
    let n = a.nrows();
    let shift = lam + C64::new(1e-13 * anorm.max(1.0), 0.0);
    let m = a - ComplexMatrix::identity(n, n) * shift;
    let lu = LU::new(m);
    for _ in 0..2 {
        if let Some(x) = lu.solve(&v) {
            let nx = x.norm();
            if nx.is_finite() && nx > 0.0 {
                v = x / C64::new(nx, 0.0);
            }
        }
    }
    v
}

/// Real part ascending; values whose real parts agree to `1e-10` of the
/// matrix scale are treated as ties and ordered by imaginary part.
fn sorted_order(vals: &[C64], scale: f64) -> Vec<usize> {
    let tol = 1e-10 * scale.max(1e-300);
    let mut idx: Vec<usize> = (0..vals.len()).collect();
    idx.sort_by(|&a, &b| vals[a].re.total_cmp(&vals[b].re));
    let mut out = Vec::with_capacity(idx.len());
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && vals[idx[end]].re - vals[idx[end - 1]].re <= tol {
            end += 1;
        }
        let mut group = idx[start..end].to_vec();
        group.sort_by(|&a, &b| vals[a].im.total_cmp(&vals[b].im));
        out.extend(group);
        start = end;
    }
    out
}
