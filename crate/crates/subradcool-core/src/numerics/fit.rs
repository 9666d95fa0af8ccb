use crate::error::{Error, Result};

/// Least-squares fit of `y = A exp(-rate (t - t0)) + asymptote`, with `t0`
/// the first sample time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpFit {
    pub rate: f64,
    pub asymptote: f64,
    pub amplitude: f64,
    pub residual_norm: f64,
}

/// Relative residual above which the data is declared non-exponential.
const MAX_REL_RESIDUAL: f64 = 0.1;

/// Fits an exponential decay to real samples.
///
/// The rate is found by variable projection: for fixed rate the amplitude
/// and asymptote follow from a 2x2 linear least-squares problem, so only a
/// one-dimensional search over `ln(rate)` remains. A log-linear fit seeds
/// the search.
pub fn fit_exponential_decay(times: &[f64], values: &[f64]) -> Result<ExpFit> {
    if times.len() != values.len() {
        return Err(Error::DimensionMismatch(format!("{} times vs {} values", times.len(), values.len())));
    }
    if times.len() < 8 {
        return Err(Error::Fit(format!("need at least 8 samples, got {}", times.len())));
    }
    if times.iter().chain(values).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("fit samples"));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("fit times must be strictly increasing".into()));
    }
    let t0 = times[0];
    let ts: Vec<f64> = times.iter().map(|t| t - t0).collect();
    let span = ts[ts.len() - 1];
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let spread = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>().sqrt();
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if spread <= 1e-14 * scale.max(f64::MIN_POSITIVE) || spread == 0.0 {
        return Ok(ExpFit { rate: 0.0, asymptote: mean, amplitude: 0.0, residual_norm: spread });
    }

    let objective = |u: f64| -> (f64, f64, f64) { project(&ts, values, u.exp()) };

    let g0 = log_linear_seed(&ts, values).unwrap_or(3.0 / span);
    let lo = (1e-4 / span).min(g0 / 100.0).ln();
    let hi = (1e4 / span).max(g0 * 100.0).ln();
    let ngrid = 120;
    let mut best_u = g0.ln();
    let mut best = objective(best_u).0;
    for k in 0..=ngrid {
        let u = lo + (hi - lo) * k as f64 / ngrid as f64;
        let r = objective(u).0;
        if r < best {
            best = r;
            best_u = u;
        }
    }
    let step = (hi - lo) / ngrid as f64;
    let u = golden(|u| objective(u).0, best_u - step, best_u + step, 1e-13);
    let (res, amp, asym) = objective(u);
    let rate = u.exp();
    if u <= lo + 1e-9 {
        return Err(Error::Fit("rate at lower search bound (no resolvable decay)".into()));
    }
    if u >= hi - 1e-9 {
        return Err(Error::Fit("rate at upper search bound (decay faster than sampling)".into()));
    }
    if res > MAX_REL_RESIDUAL * spread {
        return Err(Error::Fit(format!("relative residual {:.3} above threshold", res / spread)));
    }
    Ok(ExpFit { rate, asymptote: asym, amplitude: amp, residual_norm: res })
}

/// Residual norm, amplitude and asymptote of the best fit at fixed rate.
fn project(ts: &[f64], ys: &[f64], rate: f64) -> (f64, f64, f64) {
    let (mut see, mut se, mut sey, mut sy) = (0.0, 0.0, 0.0, 0.0);
    let n = ts.len() as f64;
    for (t, y) in ts.iter().zip(ys) {
        let e = (-rate * t).exp();
        see += e * e;
        se += e;
        sey += e * y;
        sy += y;
    }
    let det = see * n - se * se;
    let (a, c) = if det.abs() > 1e-300 {
        ((n * sey - se * sy) / det, (see * sy - se * sey) / det)
    } else {
        (0.0, sy / n)
    };
    let res = ts
        .iter()
        .zip(ys)
        .map(|(t, y)| (y - a * (-rate * t).exp() - c).powi(2))
        .sum::<f64>()
        .sqrt();
    (res, a, c)
}

/// Slope of `ln|y - y_end|` over the first part of the record.
fn log_linear_seed(ts: &[f64], ys: &[f64]) -> Option<f64> {
    let c = ys[ys.len() - 1];
    let first = ys[0] - c;
    if first == 0.0 {
        return None;
    }
    let pts: Vec<(f64, f64)> = ts
        .iter()
        .zip(ys)
        .take(ys.len() - 1)
        .filter_map(|(t, y)| {
            let d = (y - c) / first;
            (d > 0.05).then(|| (*t, d.ln()))
        })
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ml = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let num: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - ml)).sum();
    let den: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let slope = num / den;
    (slope < 0.0 && slope.is_finite()).then_some(-slope)
}

fn golden<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while (b - a).abs() > tol * (1.0 + a.abs().max(b.abs())) {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2);
        }
    }
    0.5 * (a + b)
}
