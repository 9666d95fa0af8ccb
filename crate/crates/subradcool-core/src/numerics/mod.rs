//! Dense and sparse complex linear algebra used by the physics modules.
//!
//! Everything here is a pure function of its inputs. Matrices are nalgebra
//! `DMatrix<Complex64>`; the sparse type is a plain CSR store used for
//! Liouvillians that are too large to exponentiate densely.

mod eigen;
mod expm;
mod fit;
mod linear;
mod ode;
mod sparse;

pub use eigen::{eig_general, EigenDecomposition};
pub use expm::{expm, expm_action, ExpmOperator};
pub use fit::{fit_exponential_decay, ExpFit};
pub use linear::{solve_linear, Lu};
pub use ode::{integrate_linear_ode, OdeOptions};
pub use sparse::CsrMatrix;

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type ComplexMatrix = DMatrix<C64>;
pub type ComplexVector = DVector<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Max absolute row sum.
pub fn norm_inf(a: &ComplexMatrix) -> f64 {
    (0..a.nrows())
        .map(|i| a.row(i).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Max absolute column sum.
pub fn norm_one(a: &ComplexMatrix) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn norm_fro(a: &ComplexMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn vec_norm(v: &ComplexVector) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub(crate) fn check_finite_matrix(a: &ComplexMatrix, what: &'static str) -> Result<()> {
    if a.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

pub(crate) fn check_finite_vector(v: &ComplexVector, what: &'static str) -> Result<()> {
    if v.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

pub(crate) fn check_square(a: &ComplexMatrix) -> Result<()> {
    if a.nrows() == a.ncols() {
        Ok(())
    } else {
        Err(Error::NonSquare { rows: a.nrows(), cols: a.ncols() })
    }
}
