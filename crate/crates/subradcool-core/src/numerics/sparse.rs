use super::{ComplexMatrix, ComplexVector, C64};
use crate::error::{Error, Result};
use faer::sparse::{SparseColMat, Triplet};

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<C64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed and
    /// exact zeros dropped.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, C64)>) -> Self {
        triplets.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<C64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        let mut rows_of = Vec::with_capacity(triplets.len());
        for (r, col, v) in triplets {
            debug_assert!(r < nrows && col < ncols);
            if last == Some((r, col)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(col);
                values.push(v);
                rows_of.push(r);
                last = Some((r, col));
            }
        }
        let mut keep_idx = Vec::with_capacity(indices.len());
        let mut keep_val = Vec::with_capacity(values.len());
        for ((col, v), r) in indices.into_iter().zip(values).zip(rows_of) {
            if v.re != 0.0 || v.im != 0.0 {
                keep_idx.push(col);
                keep_val.push(v);
                indptr[r + 1] += 1;
            }
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        CsrMatrix { nrows, ncols, indptr, indices: keep_idx, values: keep_val }
    }

    pub fn from_dense(a: &ComplexMatrix) -> Self {
        let mut t = Vec::new();
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                let v = a[(i, j)];
                if v.re != 0.0 || v.im != 0.0 {
                    t.push((i, j, v));
                }
            }
        }
        Self::from_triplets(a.nrows(), a.ncols(), t)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        self.indices[a..b].iter().copied().zip(self.values[a..b].iter().copied())
    }

    pub fn mul_vec(&self, x: &ComplexVector) -> ComplexVector {
        let mut y = ComplexVector::zeros(self.nrows);
        self.mul_vec_into(x.as_slice(), y.as_mut_slice());
        y
    }

    pub fn mul_vec_into(&self, x: &[C64], y: &mut [C64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = C64::new(0.0, 0.0);
            for k in self.indptr[i]..self.indptr[i + 1] {
                s += self.values[k] * x[self.indices[k]];
            }
            *yi = s;
        }
    }

    pub fn to_dense(&self) -> ComplexMatrix {
        let mut a = ComplexMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                a[(i, j)] += v;
            }
        }
        a
    }

    /// Max absolute column sum.
    pub fn norm_one(&self) -> f64 {
        let mut cols = vec![0.0; self.ncols];
        for (j, v) in self.indices.iter().zip(&self.values) {
            cols[*j] += v.norm();
        }
        cols.into_iter().fold(0.0, f64::max)
    }

    pub fn norm_fro(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `y^T A` for a row vector `y`.
    pub fn left_mul(&self, y: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.ncols];
        for (i, yi) in y.iter().enumerate() {
            for (j, v) in self.row(i) {
                out[j] += yi * v;
            }
        }
        out
    }

    /// Solves `A x = b` by sparse LU with `refinements` steps of iterative
    /// refinement.
    pub fn solve(&self, b: &ComplexVector, refinements: usize) -> Result<ComplexVector> {
        if self.nrows != self.ncols || b.len() != self.nrows {
            return Err(Error::DimensionMismatch(format!("sparse solve {}x{} with rhs {}", self.nrows, self.ncols, b.len())));
        }
        let mut trip = Vec::with_capacity(self.values.len());
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                trip.push(Triplet::new(i, j, v));
            }
        }
        let a = SparseColMat::<usize, C64>::try_new_from_triplets(self.nrows, self.ncols, &trip)
            .map_err(|e| Error::InvalidInput(format!("sparse assembly: {e:?}")))?;
        let lu = a.sp_lu().map_err(|_| Error::Singular(f64::INFINITY))?;
        let apply = |rhs: &ComplexVector| -> ComplexVector {
            let mut m = faer::Mat::<C64>::from_fn(rhs.len(), 1, |i, _| rhs[i]);
            faer::linalg::solvers::SolveCore::solve_in_place_with_conj(&lu, faer::Conj::No, m.as_mut());
            ComplexVector::from_fn(rhs.len(), |i, _| m[(i, 0)])
        };
        let mut x = apply(b);
        for _ in 0..refinements {
            let r = b - self.mul_vec(&x);
            x += apply(&r);
        }
        if x.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite("sparse LU solution".into()));
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::c;

    #[test]
    fn triplets_sum_duplicates() {
        let m = CsrMatrix::from_triplets(2, 2, vec![(0, 1, c(1.0, 0.0)), (0, 1, c(2.0, 0.0)), (1, 0, c(0.0, 1.0))]);
        assert_eq!(m.nnz(), 2);
        let d = m.to_dense();
        assert_eq!(d[(0, 1)], c(3.0, 0.0));
        assert_eq!(d[(1, 0)], c(0.0, 1.0));
    }

    #[test]
    fn matvec_matches_dense() {
        let d = ComplexMatrix::from_row_slice(2, 3, &[c(1.0, 0.0), c(0.0, 0.0), c(2.0, 1.0), c(0.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0)]);
        let s = CsrMatrix::from_dense(&d);
        let x = ComplexVector::from_vec(vec![c(1.0, 1.0), c(2.0, 0.0), c(0.5, 0.0)]);
        assert!((s.mul_vec(&x) - &d * &x).norm() < 1e-15);
    }

    #[test]
    fn sparse_solve_matches_dense() {
        let d = ComplexMatrix::from_fn(5, 5, |i, j| if i == j { c(3.0 + i as f64, 0.5) } else if (i + 2 * j) % 3 == 0 { c(0.4, -0.2) } else { c(0.0, 0.0) });
        let b = ComplexVector::from_fn(5, |i, _| c(1.0, i as f64));
        let x = CsrMatrix::from_dense(&d).solve(&b, 1).unwrap();
        assert!((&d * &x - &b).norm() < 1e-12);
    }
}
