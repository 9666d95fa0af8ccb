mod common;

use common::*;
use proptest::prelude::*;
use subradcool_core::baselines::n_independent_optimal;
use subradcool_core::green::Polarization;
use subradcool_core::lindblad::Truncation;
use subradcool_core::motion::{evolve_moments, SecondMoments};
use subradcool_core::numerics::fit_exponential_decay;
use subradcool_core::scenarios::*;
use subradcool_core::spin::{Convention, EmitterArray};

const MT: Convention = Convention::MainText;

fn spec(geometry: Geometry, profile: TrapProfile) -> ArraySpec {
    ArraySpec { geometry, polarization: Polarization::y(), axis: Z, profile, eta: 0.02 }
}

fn chain(n: usize, d: f64, nu_bar: f64, delta_nu: f64) -> EmitterArray {
    build_geometry(&spec(Geometry::Chain { n, d }, TrapProfile::Gradient { nu_bar, delta_nu })).unwrap()
}

#[test]
fn geometry_examples() {
    let a = build_geometry(&spec(Geometry::Chain { n: 2, d: 0.2 }, TrapProfile::Uniform { nu_bar: 20.0 })).unwrap();
    assert_eq!(a.positions, vec![[0.0; 3], [0.2, 0.0, 0.0]]);
    let r = Geometry::RingSpacing { n: 7, d: 0.2 }.positions().unwrap();
    let radius = 0.2 / (2.0 * (std::f64::consts::PI / 7.0).sin());
    for (k, p) in r.iter().enumerate() {
        let q = &r[(k + 1) % 7];
        let gap = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt();
        assert!((gap - 0.2).abs() < 1e-12);
        assert!(((p[0] * p[0] + p[1] * p[1]).sqrt() - radius).abs() < 1e-12);
    }
    let rc = Geometry::RingPlusCenter { n: 7, radius: 0.2 }.positions().unwrap();
    assert_eq!(rc.len(), 8);
    assert_eq!(rc[0], [0.0; 3]);
}

#[test]
fn normal_profile_is_reproducible() {
    let s = spec(Geometry::Square { n: 9, d: 0.2 }, TrapProfile::Normal { nu_bar: 20.0, sigma: 1e-3, seed: 42 });
    assert_eq!(build_geometry(&s).unwrap(), build_geometry(&s).unwrap());
    let other = spec(Geometry::Square { n: 9, d: 0.2 }, TrapProfile::Normal { nu_bar: 20.0, sigma: 1e-3, seed: 43 });
    assert_ne!(build_geometry(&s).unwrap().trap_frequencies, build_geometry(&other).unwrap().trap_frequencies);
}

#[test]
fn ensemble_is_deterministic_and_collapses_without_disorder() {
    let base = spec(Geometry::Chain { n: 3, d: 0.2 }, TrapProfile::Uniform { nu_bar: 20.0 });
    let a = ensemble_sweep(&base, 1e-3, 7, 6, 1e-3, Z, Pipeline::Effective, MT).unwrap();
    let b = ensemble_sweep(&base, 1e-3, 7, 6, 1e-3, Z, Pipeline::Effective, MT).unwrap();
    assert_eq!(a, b);
    let flat = ensemble_sweep(&base, 0.0, 7, 6, 1e-3, Z, Pipeline::Effective, MT).unwrap();
    let first = &flat.realizations[0];
    for r in &flat.realizations {
        assert_eq!(r.frequencies, first.frequencies);
        assert_eq!(r.outcome, first.outcome);
    }
}

#[test]
fn ensemble_medians_below_independent_atoms() {
    for n in 2..=7 {
        let base = spec(Geometry::Chain { n, d: 0.2 }, TrapProfile::Uniform { nu_bar: 20.0 });
        let s = ensemble_sweep(&base, 1e-3, 11, 30, 1e-3, Z, Pipeline::Effective, MT).unwrap();
        assert!(s.n_ss.unwrap().median < s.n_ind, "N={n}");
    }
}

#[test]
fn unresolved_ensemble_suppressed_tenfold() {
    for n in [2, 4, 7] {
        let base = ArraySpec { eta: 0.02, ..spec(Geometry::Chain { n, d: 0.1 }, TrapProfile::Uniform { nu_bar: 0.25 }) };
        let s = ensemble_sweep(&base, 1e-3, 5, 30, 1e-3, Z, Pipeline::Effective, MT).unwrap();
        let m = s.n_ss.unwrap().median;
        assert!(m * 10.0 < s.n_ind, "N={n}: {m} vs {}", s.n_ind);
    }
}

#[test]
fn critical_rates_ordered() {
    let a = chain(2, 0.2, 20.0, 1e-3);
    let cr = critical_rate_scan(&a, Z, Truncation::SharedSingleExcitation, MT).unwrap();
    let (gc, _) = cr.gamma_c.expect("Γ_c exists in the array-cooling band");
    let (gp, _) = cr.gamma_c_prime.expect("Γ'_c exists");
    assert!(gp >= gc);
}

#[test]
fn no_admissible_drive_beyond_subradiant_width() {
    let a = chain(2, 0.2, 20.0, 0.4);
    let cr = critical_rate_scan(&a, Z, Truncation::SharedSingleExcitation, MT).unwrap();
    assert!(cr.gamma_c.is_none());
}

#[test]
fn single_block_is_plain_cooling() {
    let a = chain(3, 0.2, 20.0, 1e-3);
    let all = [0, 1, 2];
    let r = sequential_protocol(&a, &all, -40.0, 1e-3, Z, Pipeline::Effective, MT).unwrap();
    assert!(r.detuned.is_empty());
    let choice = select_drive(&a, 1e-3, Z, MT, &all).unwrap();
    assert_eq!(r.drive, choice.drive);
    let traj = evolve_moments(&choice.model.rates, &SecondMoments::thermal(&[1.0; 3]).m, &r.times).unwrap();
    let mean: Vec<f64> = traj.iter().map(|m| m.mean_occupation()).collect();
    let fit = fit_exponential_decay(&r.times, &mean).unwrap();
    assert!(rel(r.resonant_fit.rate, fit.rate) < 1e-12);
    assert!(rel(r.resonant_n_ss, choice.objective) < 1e-12);
}

#[test]
fn distant_blocks_recover_the_isolated_pair() {
    let (d, l) = (0.15, 1.0);
    let pos = vec![[0.0; 3], [d, 0.0, 0.0], [l + d, 0.0, 0.0], [l + 2.0 * d, 0.0, 0.0]];
    let nus = TrapProfile::Gradient { nu_bar: 20.0, delta_nu: 1e-3 }.frequencies(4).unwrap();
    let four = EmitterArray::new(pos, Polarization::y(), Z, nus.clone(), 0.02).unwrap();
    let seq = sequential_protocol(&four, &[0, 1], -40.0, 1e-3, Z, Pipeline::Effective, MT).unwrap();
    let pair = EmitterArray::new(vec![[0.0; 3], [d, 0.0, 0.0]], Polarization::y(), Z, nus[..2].to_vec(), 0.02).unwrap();
    let iso = sequential_protocol(&pair, &[0, 1], -40.0, 1e-3, Z, Pipeline::Effective, MT).unwrap();
    assert!(rel(seq.resonant_fit.rate, iso.resonant_fit.rate) < 0.15);
}

#[test]
fn ring_target_examples() {
    let iso = isolated_target(50.0, 0.02, 1e-2).unwrap().n_ss;
    let dark = ring_target_cooling(7, 0.2, None, 50.0, 0.02, 1e-2).unwrap();
    let zero = ring_target_cooling(7, 0.2, Some(0.0), 50.0, 0.02, 1e-2).unwrap();
    assert!(dark.gamma_d < zero.gamma_d);
    assert!(dark.n_t * 10.0 <= iso);
    let ns: Vec<f64> = [5, 10, 15, 20].iter().map(|&n| ring_target_cooling(n, 0.2, None, 50.0, 0.02, 1e-2).unwrap().n_t).collect();
    let (lo, hi) = ns.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
    assert!(hi / lo < 1.3, "{ns:?}");
    assert!(n_independent_optimal(50.0, 1e-2, 0.02).unwrap().n_ss == iso);
}

proptest! {
    #[test]
    fn gradient_mean_is_nu_bar_for_odd_n(k in 0usize..10, nu in 0.1f64..50.0, dn in 1e-6f64..0.01) {
        let n = 2 * k + 1;
        let f = TrapProfile::Gradient { nu_bar: nu, delta_nu: dn }.frequencies(n).unwrap();
        let mean = f.iter().sum::<f64>() / n as f64;
        prop_assert!((mean - nu).abs() <= 1e-12 * nu);
    }

    #[test]
    fn percentiles_ignore_order(mut v in proptest::collection::vec(-1e3f64..1e3, 1..60), seed in any::<u64>()) {
        let a = percentiles(&v).unwrap();
        let len = v.len();
        let mut s = seed;
        for i in (1..len).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            v.swap(i, (s >> 33) as usize % (i + 1));
        }
        let b = percentiles(&v).unwrap();
        prop_assert_eq!(a, b);
        prop_assert!(a.p25 <= a.median && a.median <= a.p75);
    }
}
