mod common;

use common::*;
use proptest::prelude::*;
use subradcool_core::green::*;

fn unit(theta: f64, phi: f64) -> Vec3 {
    [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]
}

#[test]
fn tensor_matches_direct_dyadic() {
    for r in [[0.2, 0.0, 0.0], [0.0, 0.13, 0.11], [0.7, -0.3, 1.9]] {
        let a = green_tensor(r).unwrap();
        let b = green_direct(r);
        for p in 0..3 {
            for q in 0..3 {
                assert!((a[p][q] - b[p][q]).norm() <= 1e-12 * b[p][q].norm().max(1e-3), "{r:?} {p}{q}");
            }
        }
    }
}

#[test]
fn pair_coupling_golden_value() {
    let g = coupling(&[0.0; 3], &[0.2, 0.0, 0.0], &Polarization::y());
    let want = pair_coupling(0.2, &Polarization::y());
    assert!((g.g() - want).norm() < 1e-12);
    assert!((g.g() - num_complex::Complex64::new(g.j, -0.5 * g.gamma)).norm() == 0.0);
}

#[test]
fn derivative_along_separation_at_short_range() {
    let (o, r) = ([0.0; 3], [0.15, 0.0, 0.0]);
    let p = Polarization::y();
    let a = coupling_derivative(&r, &o, &p, &X);
    let f = fd_first(&r, &o, &p, &X, fd_step(&r, &o));
    assert!((a - f).norm() <= 1e-6 * a.norm());
}

#[test]
fn second_derivative_perpendicular_axis() {
    let (o, r) = ([0.0; 3], [0.2, 0.0, 0.0]);
    let p = Polarization::y();
    let a = coupling_second_derivative(&r, &o, &p, &Z, &Z);
    let f = fd_second(&r, &o, &p, &Z, &Z, fd_step(&r, &o));
    assert!((a - f).norm() <= 1e-6 * a.norm());
}

#[test]
fn mixed_axes_vanish_for_separation_along_x() {
    let (o, r) = ([0.0; 3], [0.23, 0.0, 0.0]);
    for (_, p) in presets().into_iter().filter(|(n, _)| *n != "circular") {
        for (u, v) in [(X, Y), (X, Z), (Y, Z)] {
            assert!(coupling_second_derivative(&r, &o, &p, &u, &v).norm() < 1e-12);
        }
    }
}

#[test]
fn far_field_decay() {
    let p = Polarization::y();
    let at = |d: f64| coupling(&[0.0; 3], &[d, 0.0, 0.0], &p).gamma.abs();
    assert!(at(50.0) < 1e-2);
    // Envelope ∝ 1/r: compare at equal phase.
    assert!(at(100.0) < at(50.0));
}

proptest! {
    #[test]
    fn coupling_symmetric_and_bounded(d in 0.01f64..10.0, th in 0.0f64..3.14, ph in 0.0f64..6.28, k in 0usize..4) {
        let (_, p) = presets().swap_remove(k);
        let u = unit(th, ph);
        let r = [d * u[0], d * u[1], d * u[2]];
        let a = coupling(&r, &[0.0; 3], &p);
        let b = coupling(&[0.0; 3], &r, &p);
        prop_assert_eq!(a, b);
        prop_assert!(a.gamma.abs() <= 1.0 + 1e-12);
        let t1 = green_tensor(r).unwrap();
        let t2 = green_tensor([-r[0], -r[1], -r[2]]).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                prop_assert!((t1[i][j] - t2[i][j]).norm() <= 1e-14 * t1[i][j].norm().max(1.0));
                prop_assert!((t1[i][j] - t1[j][i]).norm() <= 1e-14 * t1[i][j].norm().max(1.0));
            }
        }
    }

    #[test]
    fn analytic_derivatives_match_finite_differences(
        kd in 0.3f64..20.0, th in 0.0f64..3.14, ph in 0.0f64..6.28,
        k in 0usize..4, a in 0usize..3, b in 0usize..3,
    ) {
        let (_, p) = presets().swap_remove(k);
        let axes = [X, Y, Z];
        let u = unit(th, ph);
        let d = kd / K0;
        let r = [d * u[0], d * u[1], d * u[2]];
        let o = [0.0; 3];
        let h = fd_step(&r, &o);
        let scale = coupling(&r, &o, &p).g().norm();
        let g1 = coupling_derivative(&r, &o, &p, &axes[a]);
        let f1 = fd_first(&r, &o, &p, &axes[a], h);
        prop_assert!((g1 - f1).norm() <= 1e-6 * g1.norm().max(scale), "first {kd} {g1} {f1}");
        let g2 = coupling_second_derivative(&r, &o, &p, &axes[a], &axes[b]);
        let f2 = fd_second(&r, &o, &p, &axes[a], &axes[b], h);
        prop_assert!((g2 - f2).norm() <= 1e-6 * g2.norm().max(scale), "second {kd} {g2} {f2}");
    }

    #[test]
    fn self_diffusion_nonpositive(th in 0.0f64..3.14, ph in 0.0f64..6.28, k in 0usize..4) {
        let (_, p) = presets().swap_remove(k);
        let u = unit(th, ph);
        let g2 = coupling_second_derivative(&[0.0; 3], &[0.0; 3], &p, &u, &u);
        prop_assert_eq!(g2.re, 0.0);
        prop_assert!(-2.0 * g2.im <= 1e-15);
    }
}
