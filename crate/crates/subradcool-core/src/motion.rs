//! Effective motional master equation obtained after eliminating the spins:
//! coherent couplings `V`, cooling/heating rates `R∓`, and the closed
//! second-moment dynamics `M_ij = ⟨b_i† b_j⟩`.
//!
//! Motional modes are indexed by `(atom, axis)` flattened as
//! `atom * n_axes + axis`.

use crate::error::{Error, Result};
use crate::numerics::{c, eig_general, expm, solve_linear, ComplexMatrix, ComplexVector, C64, I};
use crate::spin::{build_spin_hamiltonian, collective_modes, steady_displacements, CollectiveSpectrum, Convention, DriveField, EmitterArray, SteadySpinState};

/// Rate matrices of the effective motional master equation (γ₀ units).
#[derive(Debug, Clone)]
pub struct MotionRates {
    pub v: ComplexMatrix,
    pub r_minus: ComplexMatrix,
    pub r_plus: ComplexMatrix,
    /// Trap frequency of each motional mode.
    pub frequencies: Vec<f64>,
    pub n_axes: usize,
}

impl MotionRates {
    pub fn n_modes(&self) -> usize {
        self.frequencies.len()
    }

    pub fn mode_index(&self, atom: usize, axis: usize) -> usize {
        atom * self.n_axes + axis
    }

    /// Largest deviation from `V = V†`, `R± = R±†`.
    pub fn hermiticity_defect(&self) -> f64 {
        [&self.v, &self.r_minus, &self.r_plus]
            .iter()
            .map(|m| (*m - m.adjoint()).iter().fold(0.0f64, |a, z| a.max(z.norm())))
            .fold(0.0, f64::max)
    }

    /// Diagnostics for negative diagonal rates beyond `1e-12·max|R|`.
    pub fn validity_warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (name, r) in [("R-", &self.r_minus), ("R+", &self.r_plus)] {
            let scale = r.iter().fold(0.0f64, |a, z| a.max(z.norm()));
            for k in 0..r.nrows() {
                if r[(k, k)].re < -1e-12 * scale {
                    out.push(format!("{name}[{k},{k}] = {:.3e} is negative (perturbative breakdown)", r[(k, k)].re));
                }
            }
        }
        out
    }

    /// Single-mode rates `R∓_kk` as real numbers.
    pub fn diagonal(&self, k: usize) -> (f64, f64) {
        (self.r_minus[(k, k)].re, self.r_plus[(k, k)].re)
    }

    /// `K = iν + A` with `A_im = iV_mi - R⁻_mi/2 + R⁺_im/2`, so that
    /// `dM/dt = K M + M K† + R⁺`. A common frequency `shift` is removed.
    pub fn drift(&self, shift: f64) -> ComplexMatrix {
        let n = self.n_modes();
        ComplexMatrix::from_fn(n, n, |i, m| {
            let mut k = I * self.v[(m, i)] - self.r_minus[(m, i)] * 0.5 + self.r_plus[(i, m)] * 0.5;
            if i == m {
                k += I * (self.frequencies[i] - shift);
            }
            k
        })
    }

    fn mean_frequency(&self) -> f64 {
        self.frequencies.iter().sum::<f64>() / self.n_modes() as f64
    }
}

/// Pair couplings and their derivatives, evaluated once per array.
struct Couplings {
    /// `g1[a][(i, j)] = G^{(a)}_ij`.
    g1: Vec<ComplexMatrix>,
    /// `g2[a][b][(i, j)] = G^{(ab)}_ij`, including the self-term on the
    /// diagonal.
    g2: Vec<Vec<ComplexMatrix>>,
}

impl Couplings {
    fn new(array: &EmitterArray) -> Self {
        let n = array.len();
        let na = array.n_axes();
        let g1 = (0..na).map(|a| ComplexMatrix::from_fn(n, n, |i, j| array.g1(i, j, a))).collect();
        let g2 = (0..na)
            .map(|a| (0..na).map(|b| ComplexMatrix::from_fn(n, n, |i, j| array.g2(i, j, a, b))).collect())
            .collect();
        Couplings { g1, g2 }
    }

    fn max_first_derivative(&self) -> f64 {
        self.g1.iter().flat_map(|m| m.iter()).fold(0.0f64, |a, z| a.max(z.norm()))
    }
}

fn check_inputs(spectrum: &CollectiveSpectrum, spins: &SteadySpinState, array: &EmitterArray) -> Result<()> {
    array.validate()?;
    let n = array.len();
    if spectrum.vectors.nrows() != n || spins.s.len() != n || spins.beta.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "array {n}, spectrum {}, spins {}",
            spectrum.vectors.nrows(),
            spins.s.len()
        )));
    }
    Ok(())
}

fn mode_frequencies(array: &EmitterArray) -> Vec<f64> {
    (0..array.len()).flat_map(|j| (0..array.n_axes()).map(move |a| array.nu(j, a))).collect()
}

/// Rates for motion perpendicular to every pair separation (`G' = 0`),
/// assembled from the closed-form overlap sums.
pub fn rates_perpendicular(spectrum: &CollectiveSpectrum, spins: &SteadySpinState, array: &EmitterArray, drive: &DriveField) -> Result<MotionRates> {
    check_inputs(spectrum, spins, array)?;
    if array.n_axes() != 1 {
        return Err(Error::Precondition("perpendicular rates take a single motion axis".into()));
    }
    let cp = Couplings::new(array);
    let worst = cp.max_first_derivative();
    if worst > 1e-12 {
        return Err(Error::Precondition(format!("G' = {worst:.3e} along the motion axis; use the general rates")));
    }
    let n = array.len();
    let u = array.axes[0];
    let s = &spins.s;
    let eta: Vec<f64> = (0..n).map(|j| array.eta_of(j, 0)).collect();
    let nu: Vec<f64> = (0..n).map(|j| array.nu(j, 0)).collect();
    let d1: Vec<C64> = (0..n).map(|j| drive.rabi_d1(&array.positions[j], &u)).collect();
    let d2: Vec<C64> = (0..n).map(|j| drive.rabi_d2(&array.positions[j], &u, &u)).collect();
    let g2 = &cp.g2[0][0];
    let gamma2 = |i: usize, j: usize| -2.0 * g2[(i, j)].im;

    // sum_λ c_{λ,ij}/(ε_λ + σν_j) and its conjugate partner.
    let lorentz = |i: usize, j: usize, sign: f64| -> (C64, C64) {
        let mut a = c(0.0, 0.0);
        let mut b = c(0.0, 0.0);
        for l in 0..spectrum.len() {
            let e = spectrum.eigenvalues[l];
            let cl = spectrum.overlap(l, i, j);
            a += cl / (e + sign * nu[j]);
            b += cl.conj() / (e.conj() + sign * nu[i]);
        }
        (a, b)
    };

    let mut r_minus = ComplexMatrix::zeros(n, n);
    let mut r_plus = ComplexMatrix::zeros(n, n);
    let mut dm = ComplexMatrix::zeros(n, n);
    let mut dp = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let pref = d1[j] * d1[i].conj() * (eta[i] * eta[j]);
            let recoil = s[j] * s[i].conj() * (eta[i] * eta[j] * gamma2(i, j));
            let (am, bm) = lorentz(i, j, -1.0);
            let (ap, bp) = lorentz(i, j, 1.0);
            r_minus[(i, j)] = -I * pref * (am - bm) - recoil;
            r_plus[(i, j)] = -I * pref * (ap - bp) - recoil;
            dm[(i, j)] = -0.5 * pref * (am + bm);
            dp[(i, j)] = -0.5 * pref * (ap + bp);
        }
    }
    let v = coherent_couplings(n, &eta, s, &d2, g2, &dm, &dp);
    Ok(MotionRates { v, r_minus, r_plus, frequencies: nu, n_axes: 1 })
}

/// Single-axis rates including the dipole-force (`G'`) contributions.
pub fn rates_general(spectrum: &CollectiveSpectrum, spins: &SteadySpinState, array: &EmitterArray, drive: &DriveField) -> Result<MotionRates> {
    if array.n_axes() != 1 {
        return Err(Error::Precondition("general rates take a single motion axis; use rates_multi_axis".into()));
    }
    rates_multi_axis(spectrum, spins, array, drive)
}

/// Rates indexed by `(atom, axis)` with cross-axis couplings.
///
/// Uses the interference coefficients
/// `A_{λ,iα} = -iΩ^{(α)}_i c_{λ,i} - iΣ_{j≠i} G^{(α)}_ij (c_{λ,i}s_j + c_{λ,j}s_i)` and
/// `B_{λ,iα} = -iΩ^{(α)}_i φ*_{λ,i} - iΣ J^{(α)}_ij (φ*_i s_j + φ*_j s_i) - Σ γ^{(α)}_ij/2 (φ*_i s_j - φ*_j s_i)`.
pub fn rates_multi_axis(spectrum: &CollectiveSpectrum, spins: &SteadySpinState, array: &EmitterArray, drive: &DriveField) -> Result<MotionRates> {
    check_inputs(spectrum, spins, array)?;
    let n = array.len();
    let na = array.n_axes();
    let nm = n * na;
    let nl = spectrum.len();
    let cp = Couplings::new(array);
    let s = &spins.s;
    let idx = |i: usize, a: usize| i * na + a;
    let eta: Vec<f64> = (0..nm).map(|k| array.eta_of(k / na, k % na)).collect();
    let nu = mode_frequencies(array);
    let d1: Vec<C64> = (0..nm).map(|k| drive.rabi_d1(&array.positions[k / na], &array.axes[k % na])).collect();

    let mut a_coef = ComplexMatrix::zeros(nl, nm);
    let mut b_coef = ComplexMatrix::zeros(nl, nm);
    for l in 0..nl {
        for i in 0..n {
            let ci = spectrum.weight(l, i);
            let pi = spectrum.phi(l, i).conj();
            for ax in 0..na {
                let k = idx(i, ax);
                let mut a = -I * d1[k] * ci;
                let mut b = -I * d1[k] * pi;
                for j in 0..n {
                    if j == i {
                        continue;
                    }
                    let g1 = cp.g1[ax][(i, j)];
                    let (j1, gm1) = (g1.re, -2.0 * g1.im);
                    let cj = spectrum.weight(l, j);
                    let pj = spectrum.phi(l, j).conj();
                    a += -I * g1 * (ci * s[j] + cj * s[i]);
                    b += -I * j1 * (pi * s[j] + pj * s[i]) - 0.5 * gm1 * (pi * s[j] - pj * s[i]);
                }
                a_coef[(l, k)] = a;
                b_coef[(l, k)] = b;
            }
        }
    }
    // E_{λ,k±} = -i/(ε_λ ± ν_k).
    let e_fac = |l: usize, k: usize, sign: f64| -> C64 { -I / (spectrum.eigenvalues[l] + sign * nu[k]) };

    let mut r_minus = ComplexMatrix::zeros(nm, nm);
    let mut r_plus = ComplexMatrix::zeros(nm, nm);
    let mut dm = ComplexMatrix::zeros(nm, nm);
    let mut dp = ComplexMatrix::zeros(nm, nm);
    for p in 0..nm {
        for q in 0..nm {
            let (i, al) = (p / na, p % na);
            let (j, be) = (q / na, q % na);
            let ee = eta[p] * eta[q];
            let gamma2 = -2.0 * cp.g2[al][be][(i, j)].im;
            let recoil = s[j] * s[i].conj() * (ee * gamma2);
            for (sign, r, d) in [(-1.0, &mut r_minus, &mut dm), (1.0, &mut r_plus, &mut dp)] {
                let mut acc_r = c(0.0, 0.0);
                let mut acc_d = c(0.0, 0.0);
                for l in 0..nl {
                    let t1 = a_coef[(l, q)] * b_coef[(l, p)].conj() * e_fac(l, q, sign);
                    let t2 = a_coef[(l, p)].conj() * b_coef[(l, q)] * e_fac(l, p, sign).conj();
                    acc_r += t1 + t2;
                    acc_d += -I * t1 + I * t2;
                }
                r[(p, q)] = acc_r * ee - recoil;
                d[(p, q)] = acc_d * (0.5 * ee);
            }
        }
    }

    let mut v = ComplexMatrix::zeros(nm, nm);
    for p in 0..nm {
        for q in 0..nm {
            let (i, al) = (p / na, p % na);
            let (j, be) = (q / na, q % na);
            let ee = eta[p] * eta[q];
            let mut val = dm[(p, q)] + dp[(q, p)];
            if i == j {
                for m in 0..n {
                    if m != i {
                        let g = cp.g2[al][be][(i, m)];
                        let (j2, gm2) = (g.re, -2.0 * g.im);
                        val += (c(2.0 * j2, -gm2) * s[i].conj() * s[m]).re * ee;
                    }
                }
                let om2 = drive.rabi_d2(&array.positions[i], &array.axes[al], &array.axes[be]);
                val += 2.0 * ee * (om2 * s[i].conj()).re;
            } else {
                val += -2.0 * ee * cp.g2[al][be][(i, j)].re * (s[i].conj() * s[j]).re;
            }
            v[(p, q)] = val;
        }
    }
    Ok(MotionRates { v, r_minus, r_plus, frequencies: nu, n_axes: na })
}

fn coherent_couplings(n: usize, eta: &[f64], s: &[C64], d2: &[C64], g2: &ComplexMatrix, dm: &ComplexMatrix, dp: &ComplexMatrix) -> ComplexMatrix {
    let mut v = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut val = dm[(i, j)] + dp[(j, i)];
            if i == j {
                let e2 = eta[i] * eta[i];
                for m in 0..n {
                    if m != i {
                        let (j2, gm2) = (g2[(i, m)].re, -2.0 * g2[(i, m)].im);
                        val += e2 * (c(2.0 * j2, -gm2) * s[i].conj() * s[m]).re;
                    }
                }
                val += 2.0 * e2 * (d2[i] * s[i].conj()).re;
            } else {
                val += -2.0 * eta[i] * eta[j] * g2[(i, j)].re * (s[i] * s[j].conj()).re;
            }
            v[(i, j)] = val;
        }
    }
    v
}

/// Picks the rate construction that matches the array: multi-axis when
/// several axes are declared, perpendicular when all `G'` vanish, general
/// otherwise.
pub fn rates_auto(spectrum: &CollectiveSpectrum, spins: &SteadySpinState, array: &EmitterArray, drive: &DriveField) -> Result<MotionRates> {
    if array.n_axes() > 1 {
        return rates_multi_axis(spectrum, spins, array, drive);
    }
    match rates_perpendicular(spectrum, spins, array, drive) {
        Err(Error::Precondition(_)) => rates_general(spectrum, spins, array, drive),
        other => other,
    }
}

/// Spin spectrum, steady spins and rates for one configuration.
#[derive(Debug, Clone)]
pub struct EffectiveModel {
    pub spectrum: CollectiveSpectrum,
    pub spins: SteadySpinState,
    pub rates: MotionRates,
}

impl EffectiveModel {
    pub fn build(array: &EmitterArray, drive: &DriveField, convention: Convention) -> Result<Self> {
        let h = build_spin_hamiltonian(array, drive, convention)?;
        let spectrum = collective_modes(&h)?;
        let spins = steady_displacements(array, drive)?;
        let rates = rates_auto(&spectrum, &spins, array, drive)?;
        Ok(EffectiveModel { spectrum, spins, rates })
    }

    pub fn steady_state(&self) -> Result<SecondMoments> {
        steady_state_moments(&self.rates)
    }
}

/// Second moments `M_ij = ⟨b_i† b_j⟩` at time `time`.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondMoments {
    pub m: ComplexMatrix,
    pub time: f64,
}

impl SecondMoments {
    pub fn thermal(n: &[f64]) -> Self {
        let d = ComplexVector::from_iterator(n.len(), n.iter().map(|x| c(*x, 0.0)));
        SecondMoments { m: ComplexMatrix::from_diagonal(&d), time: 0.0 }
    }

    pub fn occupations(&self) -> Vec<f64> {
        (0..self.m.nrows()).map(|k| self.m[(k, k)].re).collect()
    }

    pub fn mean_occupation(&self) -> f64 {
        let o = self.occupations();
        o.iter().sum::<f64>() / o.len() as f64
    }

    pub fn hermiticity_defect(&self) -> f64 {
        (&self.m - self.m.adjoint()).iter().fold(0.0f64, |a, z| a.max(z.norm()))
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.m + self.m.adjoint()) * c(0.5, 0.0);
        h.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Occupation above which propagation stops with [`Error::Heating`].
pub const DIVERGENCE_BOUND: f64 = 1e6;

/// Propagates the moment equations, sampling at `times` (the first entry
/// is the initial time of `m0`).
pub fn evolve_moments(rates: &MotionRates, m0: &ComplexMatrix, times: &[f64]) -> Result<Vec<SecondMoments>> {
    evolve_moments_bounded(rates, m0, times, DIVERGENCE_BOUND)
}

pub fn evolve_moments_bounded(rates: &MotionRates, m0: &ComplexMatrix, times: &[f64], bound: f64) -> Result<Vec<SecondMoments>> {
    let n = rates.n_modes();
    if m0.nrows() != n || m0.ncols() != n {
        return Err(Error::DimensionMismatch(format!("{n} modes, initial moments {}x{}", m0.nrows(), m0.ncols())));
    }
    if times.windows(2).any(|w| !(w[1] >= w[0])) || times.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidInput("time grid must be finite and non-decreasing".into()));
    }
    if (m0 - m0.adjoint()).iter().any(|z| z.norm() > 1e-10) {
        return Err(Error::InvalidInput("initial moments must be Hermitian".into()));
    }
    if times.is_empty() {
        return Ok(vec![]);
    }
    // A common frequency drops out of b_i† b_j, so the mean is removed to
    // keep the generator well scaled.
    let shift = rates.mean_frequency();
    let gen = augmented_generator(rates, shift);
    let dim = n * n;
    let mut state = ComplexVector::zeros(dim + 1);
    for i in 0..n {
        for j in 0..n {
            state[i * n + j] = m0[(i, j)];
        }
    }
    state[dim] = c(1.0, 0.0);

    let mut out = Vec::with_capacity(times.len());
    out.push(SecondMoments { m: m0.clone(), time: times[0] });
    let mut cache: Option<(f64, ComplexMatrix)> = None;
    for w in times.windows(2) {
        let dt = w[1] - w[0];
        if dt > 0.0 {
            let reuse = matches!(&cache, Some((h, _)) if (*h - dt).abs() <= 1e-12 * dt);
            if !reuse {
                cache = Some((dt, expm(&(&gen * c(dt, 0.0)))?));
            }
            let prop = &cache.as_ref().expect("propagator cached").1;
            state = prop * &state;
        }
        let mut m = ComplexMatrix::from_fn(n, n, |i, j| state[i * n + j]);
        m = (&m + m.adjoint()) * c(0.5, 0.0);
        if (0..n).any(|k| !(m[(k, k)].re.abs() <= bound)) {
            return Err(Error::Heating);
        }
        out.push(SecondMoments { m, time: w[1] });
    }
    Ok(out)
}

/// Kronecker form of `M ↦ K M + M K†` on row-major `vec(M)`.
fn lyapunov_operator(k: &ComplexMatrix) -> ComplexMatrix {
    let n = k.nrows();
    let mut l = ComplexMatrix::zeros(n * n, n * n);
    for i in 0..n {
        for j in 0..n {
            let row = i * n + j;
            for m in 0..n {
                l[(row, m * n + j)] += k[(i, m)];
                l[(row, i * n + m)] += k[(j, m)].conj();
            }
        }
    }
    l
}

fn augmented_generator(rates: &MotionRates, shift: f64) -> ComplexMatrix {
    let n = rates.n_modes();
    let dim = n * n;
    let k = rates.drift(shift);
    let l = lyapunov_operator(&k);
    let mut g = ComplexMatrix::zeros(dim + 1, dim + 1);
    g.view_mut((0, 0), (dim, dim)).copy_from(&l);
    for i in 0..n {
        for j in 0..n {
            g[(i * n + j, dim)] = rates.r_plus[(i, j)];
        }
    }
    g
}

/// Largest real part among the eigenvalues of the drift `K`; the moment
/// dynamics has a steady state iff this is negative.
pub fn stability_margin(rates: &MotionRates) -> Result<f64> {
    let k = rates.drift(rates.mean_frequency());
    let e = eig_general(&k)?;
    Ok(e.eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
}

/// Solves `K M + M K† = -R⁺`.
pub fn steady_state_moments(rates: &MotionRates) -> Result<SecondMoments> {
    let n = rates.n_modes();
    let margin = stability_margin(rates)?;
    if !(margin < 0.0) {
        return Err(Error::Heating);
    }
    let k = rates.drift(rates.mean_frequency());
    let l = lyapunov_operator(&k);
    let rhs = ComplexVector::from_fn(n * n, |p, _| -rates.r_plus[(p / n, p % n)]);
    let x = solve_linear(&l, &rhs)?;
    let m = ComplexMatrix::from_fn(n, n, |i, j| x[i * n + j]);
    let m = (&m + m.adjoint()) * c(0.5, 0.0);
    Ok(SecondMoments { m, time: f64::INFINITY })
}
