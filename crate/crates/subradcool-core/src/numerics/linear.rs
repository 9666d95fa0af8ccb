use super::{check_finite_matrix, check_finite_vector, check_square, norm_one, ComplexMatrix, ComplexVector, C64};
use crate::error::{Error, Result};

/// Reciprocal-condition threshold below which a system counts as singular.
const RCOND_MIN: f64 = 1e-14;

/// LU factorization with partial pivoting.
#[derive(Debug)]
pub struct Lu {
    n: usize,
    lu: faer::linalg::solvers::PartialPivLu<C64>,
    anorm_one: f64,
}

impl Lu {
    /// Factorizes `a`. Fails only on an exactly zero pivot.
    pub fn new(a: &ComplexMatrix) -> Result<Self> {
        check_square(a)?;
        check_finite_matrix(a, "LU input")?;
        let n = a.nrows();
        let fa = faer::Mat::<C64>::from_fn(n, n, |i, j| a[(i, j)]);
        let lu = fa.partial_piv_lu();
        let u = lu.U();
        if (0..n).any(|k| u[(k, k)] == C64::new(0.0, 0.0)) {
            return Err(Error::Singular(f64::INFINITY));
        }
        Ok(Lu { n, lu, anorm_one: norm_one(a) })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, b: &ComplexVector, adjoint: bool) -> ComplexVector {
        use faer::linalg::solvers::SolveCore;
        let mut m = faer::Mat::<C64>::from_fn(self.n, 1, |i, _| b[i]);
        if adjoint {
            self.lu.solve_transpose_in_place_with_conj(faer::Conj::Yes, m.as_mut());
        } else {
            self.lu.solve_in_place_with_conj(faer::Conj::No, m.as_mut());
        }
        ComplexVector::from_fn(self.n, |i, _| m[(i, 0)])
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &ComplexVector) -> ComplexVector {
        self.apply(b, false)
    }

    /// Solves `A^H x = b`.
    pub fn solve_adjoint(&self, b: &ComplexVector) -> ComplexVector {
        self.apply(b, true)
    }

    /// Reciprocal 1-norm condition number estimate (Hager/Higham).
    pub fn rcond(&self) -> f64 {
        let n = self.n;
        if n == 0 {
            return 1.0;
        }
        if self.anorm_one == 0.0 {
            return 0.0;
        }
        let mut x = ComplexVector::from_element(n, C64::new(1.0 / n as f64, 0.0));
        let mut est = 0.0;
        for _ in 0..5 {
            let y = self.solve(&x);
            let ynorm: f64 = y.iter().map(|z| z.norm()).sum();
            if !ynorm.is_finite() {
                return 0.0;
            }
            if ynorm <= est {
                break;
            }
            est = ynorm;
            let xi = y.map(|z| if z.norm() > 0.0 { z / z.norm() } else { C64::new(1.0, 0.0) });
            let z = self.solve_adjoint(&xi);
            let (jmax, zmax) = z
                .iter()
                .enumerate()
                .map(|(j, v)| (j, v.norm()))
                .fold((0, -1.0), |acc, v| if v.1 > acc.1 { v } else { acc });
            let ztx: f64 = z.iter().zip(x.iter()).map(|(a, b)| (a.conj() * b).re).sum();
            if zmax <= ztx {
                break;
            }
            x = ComplexVector::zeros(n);
            x[jmax] = C64::new(1.0, 0.0);
        }
        if est == 0.0 {
            0.0
        } else {
            1.0 / (est * self.anorm_one)
        }
    }
}

/// Solves `A x = b` with one step of iterative refinement.
///
/// Rejects systems whose estimated reciprocal condition number is below
/// `1e-14`; in the physics this means a drive sitting exactly on a lossless
/// collective resonance.
pub fn solve_linear(a: &ComplexMatrix, b: &ComplexVector) -> Result<ComplexVector> {
    check_square(a)?;
    if b.len() != a.nrows() {
        return Err(Error::DimensionMismatch(format!("matrix {}x{}, rhs {}", a.nrows(), a.ncols(), b.len())));
    }
    check_finite_vector(b, "solve_linear rhs")?;
    let lu = Lu::new(a)?;
    let rc = lu.rcond();
    if rc < RCOND_MIN {
        return Err(Error::Singular(if rc > 0.0 { 1.0 / rc } else { f64::INFINITY }));
    }
    let mut x = lu.solve(b);
    let r = b - a * &x;
    x += lu.solve(&r);
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::c;

    #[test]
    fn identity_returns_rhs() {
        let b = ComplexVector::from_vec(vec![c(1.0, 2.0), c(-3.0, 0.5)]);
        let x = solve_linear(&ComplexMatrix::identity(2, 2), &b).unwrap();
        assert!((x - b).norm() < 1e-15);
    }

    #[test]
    fn zero_matrix_is_singular() {
        let b = ComplexVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]);
        assert!(matches!(solve_linear(&ComplexMatrix::zeros(2, 2), &b), Err(Error::Singular(_))));
    }

    #[test]
    fn adjoint_solve_matches_dense() {
        let a = ComplexMatrix::from_row_slice(
            3,
            3,
            &[c(2.0, 1.0), c(0.3, 0.0), c(0.0, -1.0), c(1.0, 0.0), c(0.0, 3.0), c(0.5, 0.5), c(-1.0, 0.2), c(0.1, 0.0), c(4.0, 0.0)],
        );
        let b = ComplexVector::from_vec(vec![c(1.0, 0.0), c(0.0, 1.0), c(2.0, -1.0)]);
        let lu = Lu::new(&a).unwrap();
        let x = lu.solve_adjoint(&b);
        assert!((a.adjoint() * x - &b).norm() < 1e-13);
        let y = lu.solve(&b);
        assert!((&a * y - &b).norm() < 1e-13);
    }

    #[test]
    fn rcond_of_diagonal() {
        let a = ComplexMatrix::from_diagonal(&ComplexVector::from_vec(vec![c(1.0, 0.0), c(1e-3, 0.0)]));
        let rc = Lu::new(&a).unwrap().rcond();
        assert!((rc - 1e-3).abs() < 1e-12);
    }
}
