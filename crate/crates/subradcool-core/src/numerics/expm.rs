use super::{check_finite_matrix, check_finite_vector, check_square, ComplexMatrix, ComplexVector, CsrMatrix, C64};
use crate::error::{Error, Result};

/// Dimension up to which `expm_action` exponentiates densely.
pub const DENSE_LIMIT: usize = 256;
const KRYLOV_DIM: usize = 30;
const KRYLOV_TOL: f64 = 1e-10;
const KRYLOV_MAX_STEPS: usize = 100_000;

/// A generator in either storage format.
#[derive(Debug, Clone)]
pub enum ExpmOperator {
    Dense(ComplexMatrix),
    Sparse(CsrMatrix),
}

impl ExpmOperator {
    pub fn dim(&self) -> usize {
        match self {
            ExpmOperator::Dense(a) => a.nrows(),
            ExpmOperator::Sparse(s) => s.nrows(),
        }
    }

    fn apply(&self, x: &ComplexVector) -> ComplexVector {
        match self {
            ExpmOperator::Dense(a) => a * x,
            ExpmOperator::Sparse(s) => s.mul_vec(x),
        }
    }

    fn to_dense(&self) -> ComplexMatrix {
        match self {
            ExpmOperator::Dense(a) => a.clone(),
            ExpmOperator::Sparse(s) => s.to_dense(),
        }
    }

    fn norm_one(&self) -> f64 {
        match self {
            ExpmOperator::Dense(a) => super::norm_one(a),
            ExpmOperator::Sparse(s) => s.norm_one(),
        }
    }
}

impl From<ComplexMatrix> for ExpmOperator {
    fn from(a: ComplexMatrix) -> Self {
        ExpmOperator::Dense(a)
    }
}

impl From<CsrMatrix> for ExpmOperator {
    fn from(a: CsrMatrix) -> Self {
        ExpmOperator::Sparse(a)
    }
}

/// Dense matrix exponential (Padé scaling and squaring).
pub fn expm(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    check_square(a)?;
    check_finite_matrix(a, "expm input")?;
    if a.nrows() == 0 {
        return Ok(a.clone());
    }
    let e = a.exp();
    check_finite_matrix(&e, "expm result")?;
    Ok(e)
}

/// `exp(L t) v`.
///
/// Dense scaling and squaring up to [`DENSE_LIMIT`], restarted Krylov
/// (Arnoldi) time stepping with local error control above it.
pub fn expm_action(l: &ExpmOperator, v: &ComplexVector, t: f64) -> Result<ComplexVector> {
    let n = l.dim();
    if v.len() != n {
        return Err(Error::DimensionMismatch(format!("operator {n}, vector {}", v.len())));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidInput(format!("expm_action needs finite t >= 0, got {t}")));
    }
    check_finite_vector(v, "expm_action vector")?;
    if t == 0.0 || n == 0 {
        return Ok(v.clone());
    }
    if n <= DENSE_LIMIT {
        let a = l.to_dense();
        check_finite_matrix(&a, "expm_action operator")?;
        return Ok(expm(&(a * C64::new(t, 0.0)))? * v);
    }
    krylov(l, v, t)
}

fn krylov(l: &ExpmOperator, v: &ComplexVector, t_end: f64) -> Result<ComplexVector> {
    let n = l.dim();
    let m = KRYLOV_DIM.min(n - 1).max(1);
    let anorm = l.norm_one().max(f64::MIN_POSITIVE);
    let vnorm = v.norm();
    if vnorm == 0.0 {
        return Ok(v.clone());
    }
    let tol = KRYLOV_TOL;
    let mut w = v.clone();
    let mut t_now = 0.0;
    let mf = m as f64;
    let xm = 1.0 / mf;
    let fact = ((mf + 1.0) / std::f64::consts::E).powf(mf + 1.0) * (2.0 * std::f64::consts::PI * (mf + 1.0)).sqrt();
    let mut tau = (1.0 / anorm) * ((fact * tol) / (4.0 * vnorm * anorm)).powf(xm);
    tau = tau.min(t_end);
    let mut steps = 0;

    while t_now < t_end {
        steps += 1;
        if steps > KRYLOV_MAX_STEPS {
            return Err(Error::Convergence("Krylov expm_action"));
        }
        let beta = w.norm();
        if beta == 0.0 {
            return Ok(w);
        }
        let mut basis: Vec<ComplexVector> = Vec::with_capacity(m + 1);
        basis.push(&w / C64::new(beta, 0.0));
        let mut h = ComplexMatrix::zeros(m + 2, m + 2);
        let mut mb = m;
        let mut breakdown = false;
        let mut avnorm = 0.0;
        for j in 0..m {
            let mut p = l.apply(&basis[j]);
            for i in 0..=j {
                let hij = basis[i].dotc(&p);
                h[(i, j)] = hij;
                p -= &basis[i] * hij;
            }
            let s = p.norm();
            if s < 1e-12 * anorm {
                mb = j + 1;
                breakdown = true;
                tau = t_end - t_now;
                break;
            }
            h[(j + 1, j)] = C64::new(s, 0.0);
            basis.push(p / C64::new(s, 0.0));
        }
        if !breakdown {
            h[(m + 1, m)] = C64::new(1.0, 0.0);
            avnorm = l.apply(&basis[m]).norm();
        }
        let size = if breakdown { mb } else { m + 2 };

        let mut attempts = 0;
        loop {
            attempts += 1;
            let sub = h.view((0, 0), (size, size)).into_owned() * C64::new(tau, 0.0);
            let f = expm(&sub)?;
            let err = if breakdown {
                0.0
            } else {
                let e1 = beta * f[(m, 0)].norm();
                let e2 = beta * f[(m + 1, 0)].norm() * avnorm;
                if e1 > 10.0 * e2 {
                    e2
                } else if e1 > e2 {
                    e1 * e2 / (e1 - e2)
                } else {
                    e1
                }
            };
            let allowed = tol * vnorm.max(beta) * (tau / t_end).max(1e-3);
            if err <= allowed || attempts > 60 {
                if attempts > 60 && err > allowed {
                    return Err(Error::Convergence("Krylov local error control"));
                }
                let kept = if breakdown { mb } else { m + 1 };
                let mut next = ComplexVector::zeros(n);
                for (i, b) in basis.iter().enumerate().take(kept) {
                    next += b * (f[(i, 0)] * beta);
                }
                w = next;
                t_now += tau;
                let grow = if err > 0.0 { 0.9 * (allowed / err).powf(xm) } else { 10.0 };
                tau = (tau * grow.clamp(0.2, 10.0)).min(t_end - t_now);
                break;
            }
            tau *= (0.9 * (allowed / err).powf(xm)).clamp(0.1, 0.5);
        }
        if breakdown {
            break;
        }
    }
    check_finite_vector(&w, "expm_action result")?;
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::c;

    #[test]
    fn zero_generator_is_identity() {
        let v = ComplexVector::from_vec(vec![c(1.0, 2.0), c(0.5, 0.0)]);
        let w = expm_action(&ComplexMatrix::zeros(2, 2).into(), &v, 3.0).unwrap();
        assert!((w - v).norm() < 1e-15);
    }

    #[test]
    fn diagonal_generator() {
        let l = ComplexMatrix::from_diagonal(&ComplexVector::from_vec(vec![c(-1.0, 0.0), c(0.0, 2.0)]));
        let v = ComplexVector::from_vec(vec![c(1.0, 0.0), c(1.0, 0.0)]);
        let w = expm_action(&l.into(), &v, 0.7).unwrap();
        assert!((w[0] - c((-0.7f64).exp(), 0.0)).norm() < 1e-14);
        assert!((w[1] - c(0.0, 1.4).exp()).norm() < 1e-14);
    }

    #[test]
    fn nilpotent_closed_form() {
        let l = ComplexMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let v = ComplexVector::from_vec(vec![c(2.0, 0.0), c(3.0, -1.0)]);
        let t = 2.5;
        let w = expm_action(&l.into(), &v, t).unwrap();
        assert!((w[0] - (v[0] + v[1] * t)).norm() < 1e-13);
        assert!((w[1] - v[1]).norm() < 1e-13);
    }

    #[test]
    fn krylov_matches_diagonal_closed_form() {
        let n = 400;
        let diag: Vec<C64> = (0..n).map(|k| c(-(k as f64) / 50.0, (k as f64 * 0.37).sin())).collect();
        let mut trips = Vec::new();
        for (k, d) in diag.iter().enumerate() {
            trips.push((k, k, *d));
        }
        let l = ExpmOperator::Sparse(CsrMatrix::from_triplets(n, n, trips));
        let v = ComplexVector::from_fn(n, |k, _| c(1.0 / (1.0 + k as f64), 0.3));
        let t = 1.3;
        let w = expm_action(&l, &v, t).unwrap();
        let exact = ComplexVector::from_fn(n, |k, _| (diag[k] * t).exp() * v[k]);
        assert!((w - &exact).norm() <= 1e-9 * exact.norm());
    }

    #[test]
    fn negative_time_rejected() {
        let v = ComplexVector::from_vec(vec![c(1.0, 0.0)]);
        assert!(expm_action(&ComplexMatrix::zeros(1, 1).into(), &v, -1.0).is_err());
    }
}
