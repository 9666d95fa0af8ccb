mod common;

use common::*;
use proptest::prelude::*;
use subradcool_core::baselines::{optimal_detuning, two_atom_predictions};
use subradcool_core::green::Polarization;
use subradcool_core::lindblad::*;
use subradcool_core::motion::EffectiveModel;
use subradcool_core::numerics::{c, ComplexMatrix, ComplexVector, C64};
use subradcool_core::spin::*;

fn single(nu: f64, omega: f64, delta: f64, trunc: Truncation) -> FullModel {
    let a = EmitterArray::new(vec![[0.0; 3]], Polarization::y(), Z, vec![nu], 0.02).unwrap();
    build_liouvillian(&a, &DriveField::new(omega, Z, delta).unwrap(), trunc).unwrap()
}

fn chain(n: usize, d: f64, nus: Vec<f64>, eta: f64) -> EmitterArray {
    let pos = (0..n).map(|j| [d * j as f64, 0.0, 0.0]).collect();
    EmitterArray::new(pos, Polarization::y(), Z, nus, eta).unwrap()
}

fn pair_drive(d: f64, nu: f64, omega: f64) -> DriveField {
    let p = two_atom_predictions(d, &Polarization::y(), 0.02, nu).unwrap();
    DriveField::new(omega, Z, optimal_detuning(p.gamma_a, p.j_a, nu)).unwrap()
}

fn steady_n(m: &FullModel) -> f64 {
    m.observables(&m.steady_state().unwrap()).mean_phonons
}

#[test]
fn single_atom_cutoffs_match_rate_equation() {
    let want = single_atom_n(20.0, -20.0, 1e-2, 0.02);
    for cut in [2, 3] {
        let n = steady_n(&single(20.0, 1e-2, -20.0, Truncation::PerAtomCutoff(cut)));
        assert!(rel(n, want) < 0.05, "cutoff {cut}: {n} vs {want}");
    }
}

#[test]
fn shared_and_cutoff_truncations_agree() {
    let a = chain(2, 0.2, vec![20.0, 20.001], 0.02);
    let dr = pair_drive(0.2, 20.0, 1e-3);
    let shared = steady_n(&build_liouvillian(&a, &dr, Truncation::SharedSingleExcitation).unwrap());
    let cut = steady_n(&build_liouvillian(&a, &dr, Truncation::PerAtomCutoff(2)).unwrap());
    assert!(rel(shared, cut) < 0.03, "{shared} vs {cut}");
}

#[test]
fn ground_state_and_one_phonon_observables() {
    let m = build_liouvillian(&chain(3, 0.2, vec![20.0; 3], 0.02), &pair_drive(0.2, 20.0, 1e-3), Truncation::SharedSingleExcitation).unwrap();
    let g = m.observables(&m.ground_state());
    assert!(g.phonons.iter().chain(&g.spin_populations).all(|&x| x == 0.0));
    let o = m.observables(&m.phonon_on(0).unwrap());
    assert_eq!(o.phonons, vec![1.0, 0.0, 0.0]);
}

#[test]
fn undriven_ground_state_is_stationary() {
    let m = build_liouvillian(&chain(2, 0.2, vec![20.0, 20.0], 0.02), &DriveField::new(0.0, Z, -20.0).unwrap(), Truncation::PerAtomCutoff(2)).unwrap();
    let g = m.ground_state();
    let traj = m.propagate(&g, &[0.0, 1.0, 1e3]).unwrap();
    for s in &traj {
        assert!((&s.rho - &g.rho).norm() < 1e-12);
    }
}

/// With η = 0 and no drive a prepared collective mode decays at its own
/// linewidth.
#[test]
fn spin_only_decay_matches_collective_linewidths() {
    let a = chain(3, 0.2, vec![20.0; 3], 0.0);
    let dr = DriveField::new(0.0, Z, 0.0).unwrap();
    let m = build_liouvillian(&a, &dr, Truncation::SharedSingleExcitation).unwrap();
    let spec = collective_modes(&build_spin_hamiltonian(&a, &dr, Convention::MainText).unwrap()).unwrap();
    let (sigma, _) = m.lowering_operators();
    for l in 0..3 {
        let mut psi = ComplexVector::zeros(m.dim);
        for (j, s) in sigma.iter().enumerate() {
            psi += s.adjoint().column(0) * spec.phi(l, j);
        }
        psi /= c(psi.norm(), 0.0);
        let start = DensityState { rho: &psi * psi.adjoint() };
        let t = 0.7 / spec.linewidth(l);
        let end = m.propagate(&start, &[0.0, t]).unwrap().pop().unwrap();
        let excited: f64 = m.observables(&end).spin_populations.iter().sum();
        let rate = -excited.ln() / t;
        assert!((rate - spec.linewidth(l)).abs() < 1e-6, "mode {l}: {rate} vs {}", spec.linewidth(l));
    }
}

#[test]
fn generator_preserves_hermiticity_and_trace() {
    let a = chain(3, 0.15, vec![0.249, 0.25, 0.251], 0.02);
    for trunc in [Truncation::SharedSingleExcitation, Truncation::PhononCap(2), Truncation::PerAtomCutoff(2)] {
        let m = build_liouvillian(&a, &DriveField::new(0.05, Z, -0.6).unwrap(), trunc).unwrap();
        let d = m.dim;
        let x = ComplexMatrix::from_fn(d, d, |i, j| c(((i * 7 + j * 3) % 11) as f64 - 5.0, ((i * 5 + j) % 7) as f64 - 3.0));
        let apply = |y: &ComplexMatrix| {
            let v = ComplexVector::from_fn(d * d, |p, _| y[(p % d, p / d)]);
            let w = m.liouvillian.mul_vec(&v);
            ComplexMatrix::from_fn(d, d, |i, j| w[i + d * j])
        };
        let lhs = apply(&x.adjoint());
        let rhs = apply(&x).adjoint();
        let scale = m.liouvillian.norm_fro() * x.norm();
        assert!((lhs - rhs).norm() <= 1e-13 * scale, "{trunc:?}");
        assert!(m.trace_defect() <= 1e-10 * m.liouvillian.norm_one());
    }
}

#[test]
fn independent_cooling_rate() {
    let m = single(20.0, 1e-2, -20.0, Truncation::PerAtomCutoff(3));
    let want = 4.0 * 0.02f64.powi(2) * 1e-4;
    let cc = cooling_curve(&m, 5.0 / want, 60).unwrap();
    assert!(rel(cc.fit.rate, want) < 0.2, "{} vs {want}", cc.fit.rate);
    assert!(!cc.truncation_unreliable);
}

#[test]
fn array_cooling_rate_on_subradiant_sideband() {
    let (d, nu, om) = (0.2, 20.0, 1e-2);
    let a = chain(2, d, vec![nu, nu + 1e-3], 0.02);
    let ga = two_atom_predictions(d, &Polarization::y(), 0.02, nu).unwrap().gamma_a;
    // Each atom sees half of the antisymmetric sideband, R⁻_jj ≈ 2(ηΩ)²/γ_A,
    // and n̄(t) relaxes at R⁻ - R⁺.
    let want = 2.0 * (0.02f64 * om).powi(2) / ga;
    let dr = pair_drive(d, nu, om);
    let m = build_liouvillian(&a, &dr, Truncation::SharedSingleExcitation).unwrap();
    let cc = cooling_curve(&m, 5.0 / want, 80).unwrap();
    assert!(rel(cc.fit.rate, want) < 0.3, "{} vs {want}", cc.fit.rate);
    let eff = EffectiveModel::build(&a, &dr, Convention::MainText).unwrap();
    let expected = -2.0 * subradcool_core::motion::stability_margin(&eff.rates).unwrap();
    assert!(rel(cc.fit.rate, expected) < 0.15, "{} vs {expected}", cc.fit.rate);
}

#[test]
fn full_two_atom_relaxes_to_effective_steady_state() {
    let (d, nu) = (0.2, 20.0);
    let a = chain(2, d, vec![nu, nu + 1e-3], 0.02);
    let dr = pair_drive(d, nu, 1e-3);
    let eff = EffectiveModel::build(&a, &dr, Convention::MainText).unwrap().steady_state().unwrap().mean_occupation();
    let m = build_liouvillian(&a, &dr, Truncation::SharedSingleExcitation).unwrap();
    let ga = two_atom_predictions(d, &Polarization::y(), 0.02, nu).unwrap().gamma_a;
    let horizon = 20.0 * ga / (0.02f64 * 1e-3).powi(2);
    let end = m.propagate(&m.one_phonon_state(), &[0.0, horizon]).unwrap().pop().unwrap();
    let n = m.observables(&end).mean_phonons;
    assert!(rel(n, eff) < 0.1, "{n} vs {eff}");
}

#[test]
fn reduced_solver_agrees_with_dense_on_capped_basis() {
    let a = chain(3, 0.2, vec![0.249, 0.25, 0.251], 0.02);
    let m = build_liouvillian(&a, &DriveField::new(1e-3, Z, -0.6).unwrap(), Truncation::PhononCap(2)).unwrap();
    let r = m.steady_state_reduced().unwrap();
    let d = m.steady_state_dense().unwrap();
    assert!((&r.rho - &d.rho).norm() < 1e-9);
    r.validate().unwrap();
}

#[test]
fn boundary_population_flags_hot_states() {
    let m = single(0.25, 0.05, -0.56, Truncation::SharedSingleExcitation);
    let ss = m.steady_state().unwrap();
    assert!(m.boundary_population(&ss) > BOUNDARY_WARN);
    let m = single(20.0, 1e-3, -20.0, Truncation::SharedSingleExcitation);
    let ss = m.steady_state().unwrap();
    assert!(m.boundary_population(&ss) < BOUNDARY_WARN);
}

#[test]
fn truncation_limits_enforced() {
    let a = chain(4, 0.2, vec![20.0; 4], 0.02);
    let dr = DriveField::new(1e-3, Z, -20.0).unwrap();
    assert!(build_liouvillian(&a, &dr, Truncation::PerAtomCutoff(2)).is_err());
    let a9 = chain(9, 0.2, vec![20.0; 9], 0.02);
    assert!(build_liouvillian(&a9, &dr, Truncation::SharedSingleExcitation).is_err());
}

fn check_trajectory(states: &[DensityState]) -> Result<(), TestCaseError> {
    for s in states {
        prop_assert!((s.trace() - C64::new(1.0, 0.0)).norm() <= 1e-8);
        prop_assert!(s.hermiticity_defect() <= 1e-10);
        prop_assert!(s.min_eigenvalue() >= -1e-8);
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn propagation_keeps_state_invariants(
        n in 1usize..=3, d in 0.1f64..0.4, nu in 0.2f64..25.0, om in 1e-3f64..0.2,
        shift in -1.5f64..0.5, kind in 0usize..3, t_scale in 0.1f64..1e4,
    ) {
        // Multi-phonon bases stop at two atoms so every case stays on the
        // dense propagator.
        let trunc = match kind { 0 => Truncation::SharedSingleExcitation, 1 => Truncation::PhononCap(2), _ => Truncation::PerAtomCutoff(2) };
        let n = if matches!(trunc, Truncation::SharedSingleExcitation) { n } else { n.min(2) };
        let nus = (0..n).map(|j| nu * (1.0 + 1e-3 * j as f64)).collect();
        let a = chain(n, d, nus, 0.02);
        let m = build_liouvillian(&a, &DriveField::new(om, Z, -nu + shift).unwrap(), trunc).unwrap();
        let times: Vec<f64> = (0..6).map(|k| t_scale * k as f64).collect();
        let traj = m.propagate(&m.one_phonon_state(), &times).unwrap();
        check_trajectory(&traj)?;
        let ss = m.steady_state().unwrap();
        check_trajectory(std::slice::from_ref(&ss))?;
    }
}
