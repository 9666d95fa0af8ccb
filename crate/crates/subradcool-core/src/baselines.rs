//! Closed-form reference results: independent-atom sideband cooling, the
//! two-atom collective predictions, regime boundaries and the delocalized
//! N-atom rate estimate.
//!
//! Nothing here calls a solver, so these functions can serve as oracles for
//! the numerical pipelines.

use crate::error::{Error, Result};
use crate::green::{self, Polarization, K0};
use crate::spin::{CollectiveSpectrum, DriveField, EmitterArray};

/// `|γ₀''|` for motion perpendicular to the dipole.
pub const SELF_DIFFUSION: f64 = 0.4;

/// Cooling and heating rates of one atom and the resulting steady state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndependentCooling {
    pub r_minus: f64,
    pub r_plus: f64,
    pub n_ss: f64,
    pub rate: f64,
}

/// Sideband rates of a single plane-wave-driven atom (`|Ω'| = |Ω|`).
pub fn independent_rates(nu: f64, detuning: f64, omega: f64, eta: f64, with_recoil: bool) -> (f64, f64) {
    let pref = eta * eta * omega * omega;
    let recoil = if with_recoil { pref * SELF_DIFFUSION / (detuning * detuning + 0.25) } else { 0.0 };
    let side = |s: f64| pref / ((-detuning + s * nu).powi(2) + 0.25);
    (side(-1.0) + recoil, side(1.0) + recoil)
}

/// Steady-state phonon number `R⁺/(R⁻ - R⁺)` of an independent atom.
pub fn n_independent(nu: f64, detuning: f64, omega: f64, eta: f64, with_recoil: bool) -> Result<IndependentCooling> {
    if !(nu > 0.0 && eta > 0.0) || !omega.is_finite() || !detuning.is_finite() {
        return Err(Error::InvalidInput("independent-atom rates need ν > 0, η > 0 and finite drive".into()));
    }
    let (r_minus, r_plus) = independent_rates(nu, detuning, omega, eta, with_recoil);
    let rate = r_minus - r_plus;
    if rate == 0.0 {
        return Err(Error::Precondition("cooling and heating rates are equal".into()));
    }
    if rate < 0.0 {
        return Err(Error::Heating);
    }
    Ok(IndependentCooling { r_minus, r_plus, n_ss: r_plus / rate, rate })
}

/// `-√(ν² + γ²/4) + J` for a transition of width `gamma` and shift `shift`.
pub fn optimal_detuning(gamma: f64, shift: f64, nu: f64) -> f64 {
    -(nu * nu + 0.25 * gamma * gamma).sqrt() + shift
}

/// Independent atom at its optimal detuning.
pub fn n_independent_optimal(nu: f64, omega: f64, eta: f64) -> Result<IndependentCooling> {
    n_independent(nu, optimal_detuning(1.0, 0.0, nu), omega, eta, true)
}

/// Resolved-sideband limit `13/(80 ν²)`.
pub fn n_independent_resolved(nu: f64) -> f64 {
    13.0 / (80.0 * nu * nu)
}

/// Unresolved-sideband limit `7/(20 ν)`.
pub fn n_independent_doppler(nu: f64) -> f64 {
    7.0 / (20.0 * nu)
}

/// Resolved-sideband cooling rate `4η²Ω²`.
pub fn rate_independent_resolved(omega: f64, eta: f64) -> f64 {
    4.0 * eta * eta * omega * omega
}

/// Unresolved-sideband cooling rate `8η²Ω²ν`.
pub fn rate_independent_doppler(nu: f64, omega: f64, eta: f64) -> f64 {
    8.0 * eta * eta * omega * omega * nu
}

/// Two atoms on the x axis, motion along z, plane-wave drive along z.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoAtomPredictions {
    pub j12: f64,
    pub gamma12: f64,
    pub j12_dd: f64,
    pub gamma12_dd: f64,
    pub gamma_s: f64,
    pub gamma_a: f64,
    /// `J_S - ω₀`, `J_A - ω₀`.
    pub j_s: f64,
    pub j_a: f64,
    pub gamma_s_dd: f64,
    pub gamma_a_dd: f64,
    /// Collective-mode occupations in the single-mode regime.
    pub n_s: f64,
    pub n_a: f64,
    /// `n̄/n̄_ind` in the array-cooling regime: resolved sidebands with
    /// `ν̄ ≫ |J₁₂|`, and with `|J₁₂| ≫ ν̄`.
    pub ratio_resolved: f64,
    pub ratio_large_shift: f64,
    /// Normalized to the unresolved independent-atom value: only the
    /// subradiant sidebands resolved, and none resolved.
    pub ratio_subradiant_resolved: f64,
    pub ratio_unresolved: f64,
    /// Cooling rate on the subradiant sideband per unit `Ω²`.
    pub rate_per_omega_sq: f64,
}

pub fn two_atom_predictions(d: f64, polarization: &Polarization, eta: f64, nu_bar: f64) -> Result<TwoAtomPredictions> {
    if !(d > 0.0 && eta >= 0.0 && nu_bar > 0.0) {
        return Err(Error::InvalidInput("two-atom predictions need d > 0, η ≥ 0, ν̄ > 0".into()));
    }
    let o = [0.0; 3];
    let r = [d, 0.0, 0.0];
    let z = [0.0, 0.0, 1.0];
    let g = green::coupling(&o, &r, polarization);
    let g2 = green::coupling_second_derivative(&o, &r, polarization, &z, &z);
    let self_dd = -2.0 * green::coupling_second_derivative(&o, &o, polarization, &z, &z).im;
    let (j12, gamma12) = (g.j, g.gamma);
    let (j12_dd, gamma12_dd) = (g2.re, -2.0 * g2.im);
    let e2 = eta * eta;
    let gamma_s = 1.0 + gamma12 + e2 * gamma12_dd;
    let gamma_a = 1.0 - gamma12 - e2 * gamma12_dd;
    let gamma_s_dd = self_dd + gamma12_dd;
    let gamma_a_dd = self_dd - gamma12_dd;
    let nb2 = 16.0 * nu_bar * nu_bar;
    Ok(TwoAtomPredictions {
        j12,
        gamma12,
        j12_dd,
        gamma12_dd,
        gamma_s,
        gamma_a,
        j_s: j12 + e2 * j12_dd,
        j_a: -j12 - e2 * j12_dd,
        gamma_s_dd,
        gamma_a_dd,
        n_s: (gamma_s * gamma_s + 16.0 * j12 * j12) / nb2 * (1.0 + 4.0 * gamma_s_dd.abs() / gamma_s),
        n_a: gamma_a * gamma_a / nb2 * (1.0 + 4.0 * gamma_a_dd.abs() / gamma_a),
        ratio_resolved: 2.0 * gamma_a,
        ratio_large_shift: 5.0 / 13.0 * gamma_a * gamma_a,
        ratio_subradiant_resolved: 5.0 / 28.0 * gamma_a * gamma_a / nu_bar,
        ratio_unresolved: 5.0 / 7.0 * gamma_a,
        rate_per_omega_sq: e2 / gamma_a,
    })
}

/// Small-separation subradiant width `(k₀²d² + 2η²)/5`.
pub fn gamma_a_small_separation(d: f64, eta: f64) -> f64 {
    ((K0 * d).powi(2) + 2.0 * eta * eta) / 5.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeLabel {
    SingleMode,
    ArrayCooling,
    SingleAtom,
}

impl std::fmt::Display for RegimeLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RegimeLabel::SingleMode => "single_mode",
            RegimeLabel::ArrayCooling => "array_cooling",
            RegimeLabel::SingleAtom => "single_atom",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeClassification {
    pub label: RegimeLabel,
    /// `2η²Ω²/γ_A`.
    pub lower: f64,
    /// `γ_A/2`.
    pub upper: f64,
}

/// Places `δν` against the boundaries `2η²Ω²/γ_A` and `γ_A/2`.
pub fn classify_regime(delta_nu: f64, omega: f64, eta: f64, gamma_a: f64) -> Result<RegimeClassification> {
    if !(delta_nu > 0.0 && omega > 0.0 && eta > 0.0 && gamma_a > 0.0) {
        return Err(Error::InvalidInput("regime classification needs positive inputs".into()));
    }
    let lower = 2.0 * eta * eta * omega * omega / gamma_a;
    let upper = gamma_a / 2.0;
    let label = if delta_nu <= lower {
        RegimeLabel::SingleMode
    } else if delta_nu >= upper {
        RegimeLabel::SingleAtom
    } else {
        RegimeLabel::ArrayCooling
    };
    Ok(RegimeClassification { label, lower, upper })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateEstimate {
    pub r_minus: f64,
    pub r_plus: f64,
    /// Per-mode `(R⁻_λj, R⁺_λj)`.
    pub per_mode: Vec<(f64, f64)>,
    pub warnings: Vec<String>,
}

/// Mode-averaged rates `(1/N) Σ_λ R±_λj` for atom `j`, motion along the
/// array's first axis.
///
/// Each mode contributes a sideband Lorentzian of its own width and shift
/// plus recoil heating `η²Ω²|γ''_λ|` centered on the mode most strongly
/// excited by the carrier.
pub fn n_atom_rate_estimate(spectrum: &CollectiveSpectrum, array: &EmitterArray, drive: &DriveField, j: usize) -> Result<RateEstimate> {
    let n = array.len();
    if j >= n || spectrum.len() != n {
        return Err(Error::DimensionMismatch(format!("atom {j} of {n}, spectrum of {}", spectrum.len())));
    }
    let nu = array.nu(j, 0);
    let eta = array.eta_of(j, 0);
    let om2 = drive.omega * drive.omega;
    let mut warnings = Vec::new();
    let probs: Vec<Vec<f64>> = (0..n)
        .map(|l| {
            let w: Vec<f64> = (0..n).map(|i| spectrum.phi(l, i).norm_sqr()).collect();
            let s: f64 = w.iter().sum();
            w.into_iter().map(|x| x / s).collect()
        })
        .collect();
    for (l, p) in probs.iter().enumerate() {
        if p.iter().any(|&x| x * n as f64 > 3.0 || x * (n as f64) < 1.0 / 3.0) {
            warnings.push(format!("mode {l} is not delocalized: amplitudes outside a factor 3 of 1/N"));
        }
    }
    // Carrier-excited mode: largest |Σ_i φ_λi Ω_i|.
    let drive_overlap = |l: usize| (0..n).map(|i| spectrum.phi(l, i) * drive.rabi(&array.positions[i])).sum::<crate::numerics::C64>().norm();
    let bright = (0..n).max_by(|a, b| drive_overlap(*a).total_cmp(&drive_overlap(*b))).unwrap_or(0);
    let (g_b, j_b) = (spectrum.linewidth(bright), spectrum.shift(bright, drive.detuning));
    let recoil_den = (-drive.detuning + j_b).powi(2) + 0.25 * g_b * g_b;
    let gdd: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|k| -2.0 * array.g2(i, k, 0, 0).im).collect()).collect();
    let mut per_mode = Vec::with_capacity(n);
    for l in 0..n {
        let g_l = spectrum.linewidth(l);
        let j_l = spectrum.shift(l, drive.detuning);
        let nrm: f64 = (0..n).map(|i| spectrum.phi(l, i).norm_sqr()).sum();
        let mut dd = 0.0;
        for i in 0..n {
            for k in 0..n {
                dd += (spectrum.phi(l, i).conj() * spectrum.phi(l, k)).re * gdd[i][k];
            }
        }
        dd /= nrm;
        let recoil = eta * eta * om2 * dd.abs() / recoil_den;
        let side = |s: f64| eta * eta * om2 * g_l / ((-drive.detuning + j_l + s * nu).powi(2) + 0.25 * g_l * g_l);
        per_mode.push((side(-1.0) + recoil, side(1.0) + recoil));
    }
    let r_minus = per_mode.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let r_plus = per_mode.iter().map(|p| p.1).sum::<f64>() / n as f64;
    Ok(RateEstimate { r_minus, r_plus, per_mode, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolved_limit() {
        let r = n_independent_optimal(20.0, 1e-3, 0.02).unwrap();
        assert!((r.n_ss / n_independent_resolved(20.0) - 1.0).abs() < 0.1);
        assert!((r.rate / rate_independent_resolved(1e-3, 0.02) - 1.0).abs() < 0.01);
    }

    #[test]
    fn zero_drive_is_degenerate() {
        assert!(matches!(n_independent(20.0, -20.0, 0.0, 0.02, true), Err(Error::Precondition(_))));
    }

    #[test]
    fn blue_detuning_heats() {
        assert_eq!(n_independent(20.0, 20.0, 1e-3, 0.02, true), Err(Error::Heating));
    }

    #[test]
    fn regime_labels() {
        let ga = 0.29;
        assert_eq!(classify_regime(1e-6, 0.1, 0.02, ga).unwrap().label, RegimeLabel::SingleMode);
        assert_eq!(classify_regime(1e-3, 1e-3, 0.02, ga).unwrap().label, RegimeLabel::ArrayCooling);
        assert_eq!(classify_regime(10.0 * ga, 1e-3, 0.02, ga).unwrap().label, RegimeLabel::SingleAtom);
    }

    #[test]
    fn far_apart_atoms_decouple() {
        let p = two_atom_predictions(200.0, &Polarization::y(), 0.02, 20.0).unwrap();
        assert!((p.gamma_a - 1.0).abs() < 1e-2 && (p.gamma_s - 1.0).abs() < 1e-2);
        assert!((p.n_a / n_independent_resolved(20.0) - 1.0).abs() < 0.05);
    }
}
