use super::{ComplexVector, C64};
use crate::error::{Error, Result};

/// Tolerances for [`integrate_linear_ode`].
#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rtol: 1e-8, atol: 1e-14, max_steps: 2_000_000 }
    }
}

// Dormand-Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrates `dy/dt = rhs(t, y)` and samples the solution on `times`.
///
/// The first sample is `y0` at `times[0]`. The right-hand side is assumed
/// linear in `y` but this is not exploited; any smooth map works.
pub fn integrate_linear_ode<F>(rhs: F, y0: &ComplexVector, times: &[f64], opts: OdeOptions) -> Result<Vec<ComplexVector>>
where
    F: Fn(f64, &ComplexVector) -> ComplexVector,
{
    if times.is_empty() {
        return Ok(vec![]);
    }
    if times.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(Error::InvalidInput("time grid must be non-decreasing".into()));
    }
    let mut out = Vec::with_capacity(times.len());
    let mut y = y0.clone();
    let mut t = times[0];
    out.push(y.clone());
    let span = times[times.len() - 1] - times[0];
    let mut h = if span > 0.0 { span * 1e-3 } else { 0.0 };
    let mut k1 = rhs(t, &y);
    let mut steps = 0usize;
    for &target in &times[1..] {
        while t < target {
            steps += 1;
            if steps > opts.max_steps {
                return Err(Error::StepUnderflow(t));
            }
            let mut last = false;
            if t + h >= target {
                h = target - t;
                last = true;
            }
            let k2 = rhs(t + h / 5.0, &combine(&y, h, &[(A21, &k1)]));
            let k3 = rhs(t + 3.0 * h / 10.0, &combine(&y, h, &[(A31, &k1), (A32, &k2)]));
            let k4 = rhs(t + 4.0 * h / 5.0, &combine(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
            let k5 = rhs(t + 8.0 * h / 9.0, &combine(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
            let k6 = rhs(t + h, &combine(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
            let y_new = combine(&y, h, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
            let k7 = rhs(t + h, &y_new);
            let zero = ComplexVector::zeros(y.len());
            let err_vec = combine(&zero, h, &[(E1, &k1), (E3, &k3), (E4, &k4), (E5, &k5), (E6, &k6), (E7, &k7)]);
            let mut err = 0.0f64;
            for i in 0..y.len() {
                let sc = opts.atol + opts.rtol * y[i].norm().max(y_new[i].norm());
                err = err.max(err_vec[i].norm() / sc);
            }
            if err <= 1.0 {
                t = if last { target } else { t + h };
                y = y_new;
                k1 = k7;
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !last {
                    h *= fac;
                } else {
                    h = (h * fac).max(h);
                }
            } else {
                h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            }
            if h.abs() < 1e-14 * t.abs().max(1.0) && t < target {
                return Err(Error::StepUnderflow(t));
            }
        }
        out.push(y.clone());
    }
    Ok(out)
}

/// `y + h * sum(c_k * k_k)`.
fn combine(y: &ComplexVector, h: f64, terms: &[(f64, &ComplexVector)]) -> ComplexVector {
    let mut out = y.clone();
    for (coef, k) in terms {
        let w = C64::new(h * coef, 0.0);
        out.zip_apply(*k, |o, ki| *o += ki * w);
    }
    out
}
