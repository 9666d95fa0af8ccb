//! Experiment layer: geometries, trap profiles, drive selection, critical
//! cooling-rate scans, the sequential protocol, disorder ensembles and the
//! ring-plus-target configuration.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::baselines::{self, classify_regime, n_independent_optimal, optimal_detuning, RegimeClassification};
use crate::error::{Error, Result};
use crate::green::{Polarization, Vec3};
use crate::lindblad::{build_liouvillian, cooling_curve, Truncation, BOUNDARY_WARN};
use crate::motion::{evolve_moments, stability_margin, EffectiveModel, SecondMoments};
use crate::numerics::{c, fit_exponential_decay, solve_linear, ComplexMatrix, ComplexVector, ExpFit};
use crate::spin::{build_spin_hamiltonian, collective_modes, dark_detuning, ring_target_parameters, Convention, DriveField, EmitterArray};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Geometry {
    /// `n` atoms on the x axis with spacing `d`.
    Chain { n: usize, d: f64 },
    /// `n` atoms on a circle of radius `radius` in the xy plane.
    Ring { n: usize, radius: f64 },
    /// Ring specified by its nearest-neighbor spacing.
    RingSpacing { n: usize, d: f64 },
    /// Row-major fill of a square lattice of side `⌈√n⌉` in the xy plane.
    Square { n: usize, d: f64 },
    /// Emitter at the origin (index 0) and a ring of `n` around it.
    RingPlusCenter { n: usize, radius: f64 },
}

impl Geometry {
    pub fn len(&self) -> usize {
        match *self {
            Geometry::RingPlusCenter { n, .. } => n + 1,
            Geometry::Chain { n, .. } | Geometry::Ring { n, .. } | Geometry::RingSpacing { n, .. } | Geometry::Square { n, .. } => n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn positions(&self) -> Result<Vec<Vec3>> {
        let ring = |n: usize, r: f64| -> Vec<Vec3> {
            (0..n)
                .map(|k| {
                    let phi = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                    [r * phi.cos(), r * phi.sin(), 0.0]
                })
                .collect()
        };
        let (n, scale) = match *self {
            Geometry::Chain { n, d } | Geometry::RingSpacing { n, d } | Geometry::Square { n, d } => (n, d),
            Geometry::Ring { n, radius } | Geometry::RingPlusCenter { n, radius } => (n, radius),
        };
        if n < 1 {
            return Err(Error::InvalidInput("geometry needs at least one emitter".into()));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidInput(format!("geometry length scale must be positive, got {scale}")));
        }
        Ok(match *self {
            Geometry::Chain { n, d } => (0..n).map(|j| [j as f64 * d, 0.0, 0.0]).collect(),
            Geometry::Ring { n, radius } => ring(n, radius),
            Geometry::RingSpacing { n, d } => {
                if n < 2 {
                    return Err(Error::InvalidInput("a ring defined by its spacing needs at least two emitters".into()));
                }
                ring(n, d / (2.0 * (std::f64::consts::PI / n as f64).sin()))
            }
            Geometry::Square { n, d } => {
                let side = (n as f64).sqrt().ceil() as usize;
                (0..n).map(|k| [(k % side) as f64 * d, (k / side) as f64 * d, 0.0]).collect()
            }
            Geometry::RingPlusCenter { n, radius } => {
                let mut p = vec![[0.0; 3]];
                p.extend(ring(n, radius));
                p
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrapProfile {
    Uniform { nu_bar: f64 },
    /// `ν_j = ν̄ + δν (j - ⌊N/2⌋ - 1)` with `j` counted from one.
    Gradient { nu_bar: f64, delta_nu: f64 },
    Normal { nu_bar: f64, sigma: f64, seed: u64 },
}

impl TrapProfile {
    pub fn nu_bar(&self) -> f64 {
        match *self {
            TrapProfile::Uniform { nu_bar } | TrapProfile::Gradient { nu_bar, .. } | TrapProfile::Normal { nu_bar, .. } => nu_bar,
        }
    }

    pub fn frequencies(&self, n: usize) -> Result<Vec<f64>> {
        let out: Vec<f64> = match *self {
            TrapProfile::Uniform { nu_bar } => vec![nu_bar; n],
            TrapProfile::Gradient { nu_bar, delta_nu } => {
                let mid = (n / 2) as f64 + 1.0;
                (1..=n).map(|j| nu_bar + delta_nu * (j as f64 - mid)).collect()
            }
            TrapProfile::Normal { nu_bar, sigma, seed } => {
                if sigma == 0.0 {
                    vec![nu_bar; n]
                } else {
                    let dist = Normal::new(nu_bar, sigma).map_err(|e| Error::InvalidInput(format!("trap distribution: {e}")))?;
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    (0..n).map(|_| dist.sample(&mut rng)).collect()
                }
            }
        };
        if out.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidInput("trap profile produced a non-positive frequency".into()));
        }
        Ok(out)
    }
}

/// Everything needed to place and trap the emitters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArraySpec {
    pub geometry: Geometry,
    pub polarization: Polarization,
    pub axis: Vec3,
    pub profile: TrapProfile,
    pub eta: f64,
}

pub fn build_geometry(spec: &ArraySpec) -> Result<EmitterArray> {
    let pos = spec.geometry.positions()?;
    let freqs = spec.profile.frequencies(pos.len())?;
    EmitterArray::new(pos, spec.polarization, spec.axis, freqs, spec.eta)
}

/// A drive tuned to the red sideband of one collective mode.
#[derive(Debug, Clone)]
pub struct DriveChoice {
    pub drive: DriveField,
    pub mode: usize,
    pub model: EffectiveModel,
    pub n_ss: Vec<f64>,
    /// Mean occupation over the atoms the choice was optimized for.
    pub objective: f64,
}

/// Tries the red sideband of every collective mode at the mean trap
/// frequency of `atoms` and keeps the one with the lowest mean steady
/// occupation on those atoms.
pub fn select_drive(array: &EmitterArray, omega: f64, direction: Vec3, convention: Convention, atoms: &[usize]) -> Result<DriveChoice> {
    if atoms.is_empty() || atoms.iter().any(|&j| j >= array.len()) {
        return Err(Error::InvalidInput("drive selection needs a non-empty set of valid atoms".into()));
    }
    let base = DriveField::new(omega, direction, 0.0)?;
    let spectrum = collective_modes(&build_spin_hamiltonian(array, &base, convention)?)?;
    let nu: f64 = atoms.iter().map(|&j| array.nu(j, 0)).sum::<f64>() / atoms.len() as f64;
    let mut best: Option<DriveChoice> = None;
    let mut last_err = None;
    for l in 0..spectrum.len() {
        let delta = optimal_detuning(spectrum.linewidth(l), spectrum.shift(l, 0.0), nu);
        let drive = base.with_detuning(delta);
        let attempt = EffectiveModel::build(array, &drive, convention).and_then(|m| m.steady_state().map(|ss| (m, ss)));
        match attempt {
            Ok((model, ss)) => {
                let n_ss = ss.occupations();
                let objective = atoms.iter().map(|&j| n_ss[j]).sum::<f64>() / atoms.len() as f64;
                if best.as_ref().is_none_or(|b| objective < b.objective) {
                    best = Some(DriveChoice { drive, mode: l, model, n_ss, objective });
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap_or(Error::Heating))
}

/// Red sideband of the narrowest collective mode.
pub fn subradiant_drive(array: &EmitterArray, omega: f64, direction: Vec3, convention: Convention) -> Result<DriveField> {
    let base = DriveField::new(omega, direction, 0.0)?;
    let spectrum = collective_modes(&build_spin_hamiltonian(array, &base, convention)?)?;
    let l = (0..spectrum.len())
        .min_by(|a, b| spectrum.linewidth(*a).total_cmp(&spectrum.linewidth(*b)))
        .ok_or_else(|| Error::InvalidInput("empty spectrum".into()))?;
    let nu = (0..array.len()).map(|j| array.nu(j, 0)).sum::<f64>() / array.len() as f64;
    Ok(base.with_detuning(optimal_detuning(spectrum.linewidth(l), spectrum.shift(l, 0.0), nu)))
}

/// Expected phonon decay rate of an effective model, `-2 × stability margin`.
fn expected_rate(model: &EffectiveModel) -> Result<f64> {
    Ok(-2.0 * stability_margin(&model.rates)?)
}

/// One full-model point of a drive-strength scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanPoint {
    pub omega: f64,
    pub n_ss: f64,
    pub rate: Option<f64>,
    pub truncation_unreliable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalRate {
    pub n_opt: f64,
    pub n_ind: f64,
    pub points: Vec<ScanPoint>,
    /// `(Γ_c, Ω*)`: rate at the strongest drive with `n̄ ≤ 1.1 n̄_opt`.
    pub gamma_c: Option<(f64, f64)>,
    /// `(Γ'_c, Ω*)`: fastest rate with `n̄ ≤ 1.1 n̄_ind`.
    pub gamma_c_prime: Option<(f64, f64)>,
}

pub const SCAN_OMEGA_MIN: f64 = 1e-4;
pub const SCAN_OMEGA_MAX: f64 = 1.0;
pub const SCAN_POINTS_PER_DECADE: usize = 12;
const SCAN_BISECTION_RATIO: f64 = 1.02;

/// Full-model steady state and fitted rate at one drive strength, laser
/// on the red sideband of the narrowest mode.
pub fn full_model_point(array: &EmitterArray, omega: f64, direction: Vec3, truncation: Truncation, convention: Convention) -> Result<ScanPoint> {
    let drive = subradiant_drive(array, omega, direction, convention)?;
    let model = build_liouvillian(array, &drive, truncation)?;
    let ss = model.steady_state()?;
    let n_ss = model.observables(&ss).mean_phonons;
    let truncation_unreliable = model.boundary_population(&ss) > BOUNDARY_WARN;
    // Horizon from the effective model when it has a steady state, from the
    // subradiant sideband estimate otherwise.
    let guess = EffectiveModel::build(array, &drive, convention).and_then(|m| expected_rate(&m)).ok().filter(|g| *g > 0.0);
    let guess = match guess {
        Some(g) => g,
        None => {
            let spec = collective_modes(&build_spin_hamiltonian(array, &drive, convention)?)?;
            let ga = spec.linewidths().into_iter().fold(f64::INFINITY, f64::min);
            (array.eta * omega).powi(2) / ga
        }
    };
    let rate = cooling_curve(&model, 5.0 / guess, 80).ok().map(|cc| cc.fit.rate);
    Ok(ScanPoint { omega, n_ss, rate, truncation_unreliable })
}

/// Optimal effective-model prediction for the geometry of `array`: the
/// weak-drive steady state with the trap frequencies replaced by a gradient
/// at the geometric center of the array-cooling band, or the array's own
/// weak-drive value when that is lower.
pub fn optimal_reference(array: &EmitterArray, direction: Vec3, convention: Convention) -> Result<f64> {
    let drive0 = subradiant_drive(array, SCAN_OMEGA_MIN, direction, convention)?;
    let own = EffectiveModel::build(array, &drive0, convention)?.steady_state()?.mean_occupation();
    let spec = collective_modes(&build_spin_hamiltonian(array, &drive0, convention)?)?;
    let ga = spec.linewidths().into_iter().fold(f64::INFINITY, f64::min);
    let band = classify_regime(1.0, SCAN_OMEGA_MIN, array.eta, ga)?;
    let step = (band.lower * band.upper).sqrt();
    let mut reference = array.clone();
    let mid = (array.len() as f64 - 1.0) / 2.0;
    for (j, row) in reference.trap_frequencies.iter_mut().enumerate() {
        for (a, nu) in row.iter_mut().enumerate() {
            let mean = array.trap_frequencies.iter().map(|r| r[a]).sum::<f64>() / array.len() as f64;
            *nu = mean + step * (j as f64 - mid);
        }
    }
    let drive_ref = subradiant_drive(&reference, SCAN_OMEGA_MIN, direction, convention)?;
    let band_value = EffectiveModel::build(&reference, &drive_ref, convention)?.steady_state()?.mean_occupation();
    Ok(own.min(band_value))
}

/// Geometric drive scan with bisection on the admissibility boundaries.
///
/// The optimal reference comes from [`optimal_reference`]; the independent
/// reference is the optimal independent-atom value at the mean trap
/// frequency.
pub fn critical_rate_scan(array: &EmitterArray, direction: Vec3, truncation: Truncation, convention: Convention) -> Result<CriticalRate> {
    let n_opt = optimal_reference(array, direction, convention)?;
    let n_ind = n_independent_optimal(array.nu_bar(), SCAN_OMEGA_MIN, array.eta)?.n_ss;
    let decades = (SCAN_OMEGA_MAX / SCAN_OMEGA_MIN).log10();
    let count = (decades * SCAN_POINTS_PER_DECADE as f64).round() as usize + 1;
    let grid: Vec<f64> = (0..count).map(|k| SCAN_OMEGA_MIN * 10f64.powf(k as f64 / SCAN_POINTS_PER_DECADE as f64)).collect();
    let eval = |om: f64| full_model_point(array, om, direction, truncation, convention);
    let mut points: Vec<ScanPoint> = grid.par_iter().map(|&om| eval(om)).collect::<Result<Vec<_>>>()?;

    let admissible = |p: &ScanPoint, bound: f64| p.n_ss <= bound && p.rate.is_some();
    let refine = |lo: ScanPoint, hi: ScanPoint, bound: f64, extra: &mut Vec<ScanPoint>| -> Result<ScanPoint> {
        let (mut a, mut b) = (lo, hi);
        while b.omega / a.omega > SCAN_BISECTION_RATIO {
            let mid = eval((a.omega * b.omega).sqrt())?;
            extra.push(mid);
            if admissible(&mid, bound) {
                a = mid;
            } else {
                b = mid;
            }
        }
        Ok(a)
    };

    let mut extra = Vec::new();
    let bound_opt = 1.1 * n_opt;
    let gamma_c = match points.iter().rposition(|p| admissible(p, bound_opt)) {
        None => None,
        Some(k) => {
            let top = if k + 1 < points.len() { refine(points[k], points[k + 1], bound_opt, &mut extra)? } else { points[k] };
            top.rate.map(|r| (r, top.omega))
        }
    };
    let bound_ind = 1.1 * n_ind;
    let mut candidates: Vec<ScanPoint> = points.iter().copied().filter(|p| admissible(p, bound_ind)).collect();
    for k in 0..points.len() {
        if admissible(&points[k], bound_ind) && k + 1 < points.len() && !admissible(&points[k + 1], bound_ind) {
            candidates.push(refine(points[k], points[k + 1], bound_ind, &mut extra)?);
        }
    }
    let gamma_c_prime = candidates
        .iter()
        .filter_map(|p| p.rate.map(|r| (r, p.omega)))
        .max_by(|a, b| a.0.total_cmp(&b.0));
    points.extend(extra);
    points.sort_by(|a, b| a.omega.total_cmp(&b.omega));
    Ok(CriticalRate { n_opt, n_ind, points, gamma_c, gamma_c_prime })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimePoint {
    pub delta_nu: f64,
    pub omega: f64,
    /// Mean steady occupation; `None` when the point failed.
    pub n_ss: Option<f64>,
    pub n_ind: f64,
    pub classification: RegimeClassification,
    pub error: Option<String>,
}

impl RegimePoint {
    pub fn ratio(&self) -> Option<f64> {
        self.n_ss.map(|n| n / self.n_ind)
    }
}

/// Two atoms a distance `d` apart on x, motion along z, drive along z on the
/// antisymmetric red sideband, trap frequencies `ν̄ - δν` and `ν̄`.
///
/// Points are ordered with `omegas` varying fastest.
pub fn regime_map(d: f64, polarization: Polarization, nu_bar: f64, eta: f64, deltas: &[f64], omegas: &[f64], pipeline: Pipeline, convention: Convention) -> Result<Vec<RegimePoint>> {
    let pred = baselines::two_atom_predictions(d, &polarization, eta, nu_bar)?;
    let z = [0.0, 0.0, 1.0];
    let grid: Vec<(f64, f64)> = deltas.iter().flat_map(|&dn| omegas.iter().map(move |&om| (dn, om))).collect();
    grid.par_iter()
        .map(|&(delta_nu, omega)| -> Result<RegimePoint> {
            let classification = classify_regime(delta_nu, omega, eta, pred.gamma_a)?;
            let n_ind = n_independent_optimal(nu_bar, omega, eta)?.n_ss;
            let spec = ArraySpec { geometry: Geometry::Chain { n: 2, d }, polarization, axis: z, profile: TrapProfile::Gradient { nu_bar, delta_nu }, eta };
            let run = || -> Result<f64> {
                let array = build_geometry(&spec)?;
                let drive = subradiant_drive(&array, omega, z, convention)?;
                match pipeline {
                    Pipeline::Effective => Ok(EffectiveModel::build(&array, &drive, convention)?.steady_state()?.mean_occupation()),
                    Pipeline::Full(t) => {
                        let m = build_liouvillian(&array, &drive, t)?;
                        Ok(m.observables(&m.steady_state()?).mean_phonons)
                    }
                }
            };
            let (n_ss, error) = match run() {
                Ok(n) => (Some(n), None),
                Err(e) => (None, Some(e.to_string())),
            };
            Ok(RegimePoint { delta_nu, omega, n_ss, n_ind, classification, error })
        })
        .collect()
}

/// Which dynamics to run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pipeline {
    Effective,
    Full(Truncation),
}

#[derive(Debug, Clone)]
pub struct SequentialResult {
    pub drive: DriveField,
    pub resonant: Vec<usize>,
    pub detuned: Vec<usize>,
    pub times: Vec<f64>,
    /// `occupations[k][j]` at `times[k]`.
    pub occupations: Vec<Vec<f64>>,
    pub resonant_fit: ExpFit,
    pub resonant_n_ss: f64,
    /// Largest `|n_j(T) - n_j(0)| / n_j(0)` over the detuned atoms.
    pub detuned_drift: f64,
    pub warnings: Vec<String>,
}

pub const SEQUENTIAL_SAMPLES: usize = 80;

/// Cools `resonant` while every other atom's transition is shifted by the
/// laser-detuning offset `block_detuning` (entering as `δ_j = -Δ̃`).
///
/// All atoms start with one phonon. The drive is chosen by a mode scan on
/// the resonant atoms.
pub fn sequential_protocol(array: &EmitterArray, resonant: &[usize], block_detuning: f64, omega: f64, direction: Vec3, pipeline: Pipeline, convention: Convention) -> Result<SequentialResult> {
    let n = array.len();
    let mut seen = vec![false; n];
    for &j in resonant {
        if j >= n || seen[j] {
            return Err(Error::InvalidInput("resonant block must list distinct valid atoms".into()));
        }
        seen[j] = true;
    }
    let detuned: Vec<usize> = (0..n).filter(|j| !seen[*j]).collect();
    let offsets: Vec<f64> = (0..n).map(|j| if seen[j] { 0.0 } else { -block_detuning }).collect();
    let shifted = array.clone().with_detuning_offsets(offsets)?;
    let choice = select_drive(&shifted, omega, direction, convention, resonant)?;
    let gamma = expected_rate(&choice.model)?;
    let resonant_rate_guess = {
        let r = &choice.model.rates;
        resonant.iter().map(|&j| r.diagonal(j).0 - r.diagonal(j).1).fold(f64::INFINITY, f64::min)
    };
    let horizon = 5.0 / resonant_rate_guess.max(gamma);
    let times: Vec<f64> = (0..SEQUENTIAL_SAMPLES).map(|k| horizon * k as f64 / (SEQUENTIAL_SAMPLES - 1) as f64).collect();
    let occupations: Vec<Vec<f64>> = match pipeline {
        Pipeline::Effective => {
            let traj = evolve_moments(&choice.model.rates, &SecondMoments::thermal(&vec![1.0; n]).m, &times)?;
            traj.iter().map(|m| m.occupations()).collect()
        }
        Pipeline::Full(trunc) => {
            let model = build_liouvillian(&shifted, &choice.drive, trunc)?;
            let traj = model.propagate(&model.one_phonon_state(), &times)?;
            traj.iter().map(|s| model.observables(s).phonons).collect()
        }
    };
    let mean_res: Vec<f64> = occupations.iter().map(|o| resonant.iter().map(|&j| o[j]).sum::<f64>() / resonant.len() as f64).collect();
    let resonant_fit = fit_exponential_decay(&times, &mean_res)?;
    let mut warnings = choice.model.rates.validity_warnings();
    let resonant_n_ss = match pipeline {
        Pipeline::Effective => resonant.iter().map(|&j| choice.n_ss[j]).sum::<f64>() / resonant.len() as f64,
        Pipeline::Full(trunc) => {
            let model = build_liouvillian(&shifted, &choice.drive, trunc)?;
            let ss = model.steady_state()?;
            let obs = model.observables(&ss);
            let edge = model.boundary_population(&ss);
            if edge > BOUNDARY_WARN {
                warnings.push(format!("steady state puts weight {edge:.3} on the truncation boundary"));
            }
            resonant.iter().map(|&j| obs.phonons[j]).sum::<f64>() / resonant.len() as f64
        }
    };
    let first = &occupations[0];
    let last = &occupations[occupations.len() - 1];
    let detuned_drift = detuned.iter().map(|&j| ((last[j] - first[j]) / first[j]).abs()).fold(0.0, f64::max);
    Ok(SequentialResult { drive: choice.drive, resonant: resonant.to_vec(), detuned, times, occupations, resonant_fit, resonant_n_ss, detuned_drift, warnings })
}

/// Median and interquartile band.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Percentiles {
    pub p25: f64,
    pub median: f64,
    pub p75: f64,
}

/// Linear-interpolation percentiles of finite samples.
pub fn percentiles(values: &[f64]) -> Option<Percentiles> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (v.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
    };
    Some(Percentiles { p25: q(0.25), median: q(0.5), p75: q(0.75) })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub seed: u64,
    pub frequencies: Vec<f64>,
    pub outcome: std::result::Result<(f64, f64), String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub realizations: Vec<Realization>,
    pub n_ss: Option<Percentiles>,
    pub rate: Option<Percentiles>,
    pub n_ind: f64,
}

/// Per-realization seed: a fixed mix of the base seed and the index.
pub fn realization_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(index as u64).rotate_left(17) ^ 0xD1B5_4A32_D192_ED03
}

/// Disorder ensemble over normally distributed trap frequencies.
///
/// Each realization scans all collective modes for the lowest mean
/// occupation and reports `(n̄_ss, Γ)`; with the full pipeline the steady
/// state and rate come from the full model at the chosen drive.
pub fn ensemble_sweep(base: &ArraySpec, sigma: f64, seed: u64, n_realizations: usize, omega: f64, direction: Vec3, pipeline: Pipeline, convention: Convention) -> Result<SweepResult> {
    let nu_bar = base.profile.nu_bar();
    let n = base.geometry.len();
    let atoms: Vec<usize> = (0..n).collect();
    let run_one = |k: usize| -> Realization {
        let s = realization_seed(seed, k);
        let spec = ArraySpec { profile: TrapProfile::Normal { nu_bar, sigma, seed: s }, ..*base };
        let frequencies = spec.profile.frequencies(n).unwrap_or_default();
        let outcome = (|| -> Result<(f64, f64)> {
            let array = build_geometry(&spec)?;
            let choice = select_drive(&array, omega, direction, convention, &atoms)?;
            match pipeline {
                Pipeline::Effective => Ok((choice.objective, expected_rate(&choice.model)?)),
                Pipeline::Full(trunc) => {
                    let model = build_liouvillian(&array, &choice.drive, trunc)?;
                    let g = expected_rate(&choice.model)?;
                    let cc = cooling_curve(&model, 5.0 / g, 80)?;
                    Ok((cc.steady_state_phonons, cc.fit.rate))
                }
            }
        })()
        .map_err(|e| e.to_string());
        Realization { seed: s, frequencies, outcome }
    };
    let realizations: Vec<Realization> = (0..n_realizations).into_par_iter().map(run_one).collect();
    let ok: Vec<(f64, f64)> = realizations.iter().filter_map(|r| r.outcome.as_ref().ok().copied()).collect();
    let n_vals: Vec<f64> = ok.iter().map(|p| p.0).collect();
    let r_vals: Vec<f64> = ok.iter().map(|p| p.1).collect();
    let n_ind = n_independent_optimal(nu_bar, omega, base.eta)?.n_ss;
    Ok(SweepResult { n_ss: percentiles(&n_vals), rate: percentiles(&r_vals), realizations, n_ind })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RingTargetResult {
    pub delta_ts: f64,
    pub detuning: f64,
    /// Narrowest linewidth of the 2×2 target/ring Hamiltonian.
    pub gamma_d: f64,
    pub r_minus: f64,
    pub r_plus: f64,
    pub n_t: f64,
    pub rate: f64,
    pub times: Vec<f64>,
    pub trajectory: Vec<f64>,
}

pub const RING_TARGET_SAMPLES: usize = 60;

/// Ring of `n` emitters of radius `radius` around a target at the origin,
/// circular in-plane polarization, target motion and drive along z.
pub fn ring_target_array(n: usize, radius: f64, nu_t: f64, eta_t: f64) -> Result<EmitterArray> {
    let spec = ArraySpec {
        geometry: Geometry::RingPlusCenter { n, radius },
        polarization: Polarization::circular_xy(),
        axis: [0.0, 0.0, 1.0],
        profile: TrapProfile::Uniform { nu_bar: nu_t },
        eta: eta_t,
    };
    build_geometry(&spec)
}

/// Target cooling with pinned ring atoms.
///
/// The target's rates follow from the resolvent of the 2×2 Hamiltonian:
/// `R∓ = 2η²|Ω|² Im[(H ∓ ν)⁻¹]_tt - η²|s_t|²γ''_tt`. The laser sits on the
/// red sideband of the narrowest eigenmode. `delta_ts = None` uses the dark
/// offset.
pub fn ring_target_cooling(n: usize, radius: f64, delta_ts: Option<f64>, nu_t: f64, eta_t: f64, omega: f64) -> Result<RingTargetResult> {
    let array = ring_target_array(n, radius, nu_t, eta_t)?;
    let p = ring_target_parameters(&array)?;
    let delta_ts = match delta_ts {
        Some(d) => d,
        None => dark_detuning(&p)?,
    };
    let h0 = p.hamiltonian(0.0, delta_ts);
    let spec = collective_modes(&h0)?;
    let d = (0..2).min_by(|a, b| spec.linewidth(*a).total_cmp(&spec.linewidth(*b))).expect("two modes");
    let gamma_d = spec.linewidth(d);
    let detuning = optimal_detuning(gamma_d, spec.shift(d, 0.0), nu_t);
    let h = p.hamiltonian(detuning, delta_ts);
    let eta = array.eta_of(0, 0);
    let z = [0.0, 0.0, 1.0];
    let drive = DriveField::new(omega, z, detuning)?;
    let om_t = drive.rabi(&array.positions[0]);
    let om_s = drive.rabi(&array.positions[1]) * (p.n_ring as f64).sqrt();
    let s = solve_linear(&h, &ComplexVector::from_vec(vec![-om_t, -om_s]))?;
    let gamma2 = -2.0 * array.g2(0, 0, 0, 0).im;
    let d1 = drive.rabi_d1(&array.positions[0], &z).norm_sqr();
    let side = |sign: f64| -> Result<f64> {
        let m = &h + ComplexMatrix::identity(2, 2) * c(sign * nu_t, 0.0);
        let col = solve_linear(&m, &ComplexVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]))?;
        Ok(2.0 * eta * eta * d1 * col[0].im)
    };
    let recoil = -eta * eta * s[0].norm_sqr() * gamma2;
    let r_minus = side(-1.0)? + recoil;
    let r_plus = side(1.0)? + recoil;
    let rate = r_minus - r_plus;
    if rate <= 0.0 {
        return Err(Error::Heating);
    }
    let n_t = r_plus / rate;
    let horizon = 5.0 / rate;
    let times: Vec<f64> = (0..RING_TARGET_SAMPLES).map(|k| horizon * k as f64 / (RING_TARGET_SAMPLES - 1) as f64).collect();
    let trajectory = times.iter().map(|t| n_t + (1.0 - n_t) * (-rate * t).exp()).collect();
    Ok(RingTargetResult { delta_ts, detuning, gamma_d, r_minus, r_plus, n_t, rate, times, trajectory })
}

/// Isolated-atom reference for the ring-target scenario.
pub fn isolated_target(nu_t: f64, eta_t: f64, omega: f64) -> Result<baselines::IndependentCooling> {
    n_independent_optimal(nu_t, omega, eta_t)
}
