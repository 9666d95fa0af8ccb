//! Reference formulas written out directly, without going through the
//! library kernels they are compared against.
#![allow(dead_code)]

use num_complex::Complex64 as C64;
use std::f64::consts::PI;
use subradcool_core::green::{coupling, Polarization, Vec3};

pub const Z: Vec3 = [0.0, 0.0, 1.0];
pub const X: Vec3 = [1.0, 0.0, 0.0];
pub const Y: Vec3 = [0.0, 1.0, 0.0];

/// `k₀⁻¹ G(r)` from the textbook dyadic, `r` in units of `λ₀`.
pub fn green_direct(r: Vec3) -> [[C64; 3]; 3] {
    let k = 2.0 * PI;
    let x: Vec<f64> = r.iter().map(|v| v * k).collect();
    let kr = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
    let i = C64::new(0.0, 1.0);
    let pre = (i * kr).exp() / (4.0 * PI * kr);
    let a = 1.0 + i / kr - 1.0 / (kr * kr);
    let b = -1.0 - 3.0 * i / kr + 3.0 / (kr * kr);
    let mut g = [[C64::new(0.0, 0.0); 3]; 3];
    for p in 0..3 {
        for q in 0..3 {
            let delta = if p == q { 1.0 } else { 0.0 };
            g[p][q] = pre * (a * delta + b * x[p] * x[q] / (kr * kr));
        }
    }
    g
}

/// `-3π p̂†G p̂` with the direct tensor.
pub fn coupling_direct(ri: Vec3, rj: Vec3, p: &Polarization) -> C64 {
    let g = green_direct([ri[0] - rj[0], ri[1] - rj[1], ri[2] - rj[2]]);
    let v = p.vector();
    let mut s = C64::new(0.0, 0.0);
    for a in 0..3 {
        for b in 0..3 {
            s += v[a].conj() * g[a][b] * v[b];
        }
    }
    -3.0 * PI * s
}

fn shifted(r: &Vec3, u: &Vec3, h: f64) -> Vec3 {
    let s = h / (2.0 * PI);
    [r[0] + s * u[0], r[1] + s * u[1], r[2] + s * u[2]]
}

fn g_at(ri: &Vec3, rj: &Vec3, p: &Polarization) -> C64 {
    coupling(ri, rj, p).g()
}

/// Richardson-extrapolated central difference of the coupling along `u`,
/// step `h` in units of `1/k₀`.
pub fn fd_first(ri: &Vec3, rj: &Vec3, p: &Polarization, u: &Vec3, h: f64) -> C64 {
    let d = |h: f64| (g_at(&shifted(ri, u, h), rj, p) - g_at(&shifted(ri, u, -h), rj, p)) / (2.0 * h);
    (d(h / 2.0) * 4.0 - d(h)) / 3.0
}

/// Richardson-extrapolated four-point mixed second difference.
pub fn fd_second(ri: &Vec3, rj: &Vec3, p: &Polarization, u: &Vec3, v: &Vec3, h: f64) -> C64 {
    let d = |h: f64| {
        let at = |a: f64, b: f64| g_at(&shifted(&shifted(ri, u, a * h), v, b * h), rj, p);
        (at(1.0, 1.0) - at(1.0, -1.0) - at(-1.0, 1.0) + at(-1.0, -1.0)) / (4.0 * h * h)
    };
    (d(h / 2.0) * 4.0 - d(h)) / 3.0
}

/// Finite-difference step adapted to the separation so that the Laurent
/// terms stay well resolved at short range.
pub fn fd_step(ri: &Vec3, rj: &Vec3) -> f64 {
    let kr = 2.0 * PI * ((ri[0] - rj[0]).powi(2) + (ri[1] - rj[1]).powi(2) + (ri[2] - rj[2]).powi(2)).sqrt();
    3e-3 * kr.min(1.0)
}

/// Single plane-wave-driven atom: `(R⁻, R⁺)` including recoil with
/// `|γ₀''| = 2/5`.
pub fn single_atom_rates(nu: f64, delta: f64, omega: f64, eta: f64) -> (f64, f64) {
    let e = eta * eta * omega * omega;
    let lorentz = |x: f64| 1.0 / (x * x + 0.25);
    let recoil = e * 0.4 * lorentz(delta);
    (e * lorentz(delta + nu) + recoil, e * lorentz(delta - nu) + recoil)
}

pub fn single_atom_n(nu: f64, delta: f64, omega: f64, eta: f64) -> f64 {
    let (m, p) = single_atom_rates(nu, delta, omega, eta);
    p / (m - p)
}

/// Two-atom coupling on the x axis at separation `d`, motion along z.
pub fn pair_coupling(d: f64, p: &Polarization) -> C64 {
    coupling_direct([0.0; 3], [d, 0.0, 0.0], p)
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

pub fn presets() -> Vec<(&'static str, Polarization)> {
    vec![("x", Polarization::x()), ("y", Polarization::y()), ("z", Polarization::z()), ("circular", Polarization::circular_xy())]
}
