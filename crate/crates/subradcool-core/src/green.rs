//! Free-space dipole-dipole coupling and its spatial derivatives.
//!
//! Public functions take positions in units of the resonant wavelength
//! λ₀ and return rates in units of γ₀. Derivatives are taken with respect
//! to the dimensionless coordinate k₀r, so G' and G'' carry the same units
//! as G.

use crate::error::{Error, Result};
use crate::numerics::{c, C64, I};
use std::f64::consts::PI;

pub type Vec3 = [f64; 3];

/// Wavenumber in units of 1/λ₀.
pub const K0: f64 = 2.0 * PI;

/// Complex unit dipole orientation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Polarization {
    v: [C64; 3],
}

impl Polarization {
    /// Normalizes `v`; fails for a zero or non-finite vector.
    pub fn new(v: [C64; 3]) -> Result<Self> {
        let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !n.is_finite() || n == 0.0 {
            return Err(Error::InvalidInput("polarization must be a nonzero finite vector".into()));
        }
        Ok(Polarization { v: v.map(|z| z / n) })
    }

    pub fn x() -> Self {
        Polarization { v: [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)] }
    }

    pub fn y() -> Self {
        Polarization { v: [c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)] }
    }

    pub fn z() -> Self {
        Polarization { v: [c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)] }
    }

    /// (x̂ + iŷ)/√2.
    pub fn circular_xy() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Polarization { v: [c(s, 0.0), c(0.0, s), c(0.0, 0.0)] }
    }

    pub fn vector(&self) -> [C64; 3] {
        self.v
    }

    /// Real symmetric form `M_ab = Re(p_a* p_b)`, so that `|p·r|² = rᵀ M r`
    /// for real `r`.
    pub fn projector(&self) -> [[f64; 3]; 3] {
        let mut m = [[0.0; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                m[a][b] = (self.v[a].conj() * self.v[b]).re;
            }
        }
        m
    }
}

/// `G = J - iγ/2` in units of γ₀.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DipoleCoupling {
    pub j: f64,
    pub gamma: f64,
}

impl DipoleCoupling {
    pub fn from_complex(g: C64) -> Self {
        DipoleCoupling { j: g.re, gamma: -2.0 * g.im }
    }

    pub fn g(&self) -> C64 {
        c(self.j, -0.5 * self.gamma)
    }
}

/// `e^{ix} Σ c_k x^k`, closed under differentiation.
#[derive(Debug, Clone)]
struct ExpLaurent {
    terms: Vec<(i32, C64)>,
}

impl ExpLaurent {
    fn eval(&self, x: f64) -> C64 {
        let s: C64 = self.terms.iter().map(|(k, ck)| ck * x.powi(*k)).sum();
        (I * x).exp() * s
    }

    fn derivative(&self) -> Self {
        let mut out: Vec<(i32, C64)> = Vec::with_capacity(2 * self.terms.len());
        let mut push = |k: i32, v: C64| match out.iter_mut().find(|t| t.0 == k) {
            Some(t) => t.1 += v,
            None => out.push((k, v)),
        };
        for &(k, ck) in &self.terms {
            push(k, I * ck);
            if k != 0 {
                push(k - 1, ck * k as f64);
            }
        }
        ExpLaurent { terms: out }
    }
}

/// Radial profiles of `k⁻¹G(x) = A(x) 𝟙 + B(x) x⊗x` with `x = k r`.
struct Radial {
    a: [ExpLaurent; 3],
    b: [ExpLaurent; 3],
}

impl Radial {
    fn new() -> Self {
        let s = 1.0 / (4.0 * PI);
        let a0 = ExpLaurent { terms: vec![(-1, c(s, 0.0)), (-2, c(0.0, s)), (-3, c(-s, 0.0))] };
        let b0 = ExpLaurent { terms: vec![(-3, c(-s, 0.0)), (-4, c(0.0, -3.0 * s)), (-5, c(3.0 * s, 0.0))] };
        let a1 = a0.derivative();
        let a2 = a1.derivative();
        let b1 = b0.derivative();
        let b2 = b1.derivative();
        Radial { a: [a0, a1, a2], b: [b0, b1, b2] }
    }
}

fn radial() -> &'static Radial {
    static R: std::sync::OnceLock<Radial> = std::sync::OnceLock::new();
    R.get_or_init(Radial::new)
}

fn scaled_displacement(ri: &Vec3, rj: &Vec3) -> Vec3 {
    [K0 * (ri[0] - rj[0]), K0 * (ri[1] - rj[1]), K0 * (ri[2] - rj[2])]
}

fn norm3(x: &Vec3) -> f64 {
    (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
}

fn dot3(x: &Vec3, y: &Vec3) -> f64 {
    x[0] * y[0] + x[1] * y[1] + x[2] * y[2]
}

fn mat_vec(m: &[[f64; 3]; 3], x: &Vec3) -> Vec3 {
    [dot3(&m[0], x), dot3(&m[1], x), dot3(&m[2], x)]
}

/// Dimensionless tensor `k₀⁻¹ G(r)` for a displacement `r` in λ₀.
pub fn green_tensor(r: Vec3) -> Result<[[C64; 3]; 3]> {
    let x = [K0 * r[0], K0 * r[1], K0 * r[2]];
    let xn = norm3(&x);
    if !xn.is_finite() {
        return Err(Error::NonFinite("displacement"));
    }
    if xn == 0.0 {
        return Err(Error::InvalidInput("Green's tensor is singular at zero displacement".into()));
    }
    let rad = radial();
    let a = rad.a[0].eval(xn);
    let b = rad.b[0].eval(xn);
    let mut g = [[c(0.0, 0.0); 3]; 3];
    for p in 0..3 {
        for q in 0..3 {
            g[p][q] = b * (x[p] * x[q]);
            if p == q {
                g[p][q] += a;
            }
        }
    }
    Ok(g)
}

/// `p̂†·G·p̂` and its first and second derivatives in `x = k₀r`.
fn scalar_and_derivatives(x: &Vec3, m: &[[f64; 3]; 3]) -> (C64, [C64; 3], [[C64; 3]; 3]) {
    let rad = radial();
    let xn = norm3(x);
    let u = [x[0] / xn, x[1] / xn, x[2] / xn];
    let (a0, a1, a2) = (rad.a[0].eval(xn), rad.a[1].eval(xn), rad.a[2].eval(xn));
    let (b0, b1, b2) = (rad.b[0].eval(xn), rad.b[1].eval(xn), rad.b[2].eval(xn));
    let mx = mat_vec(m, x);
    let q = dot3(x, &mx);
    let val = a0 + b0 * q;
    let mut grad = [c(0.0, 0.0); 3];
    for k in 0..3 {
        grad[k] = (a1 + b1 * q) * u[k] + b0 * (2.0 * mx[k]);
    }
    let mut hess = [[c(0.0, 0.0); 3]; 3];
    for p in 0..3 {
        for r in 0..3 {
            let uu = u[p] * u[r];
            let proj = if p == r { 1.0 } else { 0.0 } - uu;
            hess[p][r] = (a2 + b2 * q) * uu
                + (a1 + b1 * q) * (proj / xn)
                + b1 * (2.0 * (u[p] * mx[r] + u[r] * mx[p]))
                + b0 * (2.0 * m[p][r]);
        }
    }
    (val, grad, hess)
}

const PREFACTOR: f64 = -3.0 * PI;

/// Coupling `G_ij = -(3π γ₀/k₀) p̂†G(r_i - r_j)p̂`, with `G(0) = -iγ₀/2`.
pub fn coupling(ri: &Vec3, rj: &Vec3, p: &Polarization) -> DipoleCoupling {
    let x = scaled_displacement(ri, rj);
    if norm3(&x) == 0.0 {
        return DipoleCoupling { j: 0.0, gamma: 1.0 };
    }
    let (v, _, _) = scalar_and_derivatives(&x, &p.projector());
    DipoleCoupling::from_complex(v * PREFACTOR)
}

/// `k₀⁻¹ ∂G/∂r` along the unit direction `u`, evaluated at `r_i - r_j`.
/// Vanishes for coincident positions.
pub fn coupling_derivative(ri: &Vec3, rj: &Vec3, p: &Polarization, u: &Vec3) -> C64 {
    let x = scaled_displacement(ri, rj);
    if norm3(&x) == 0.0 {
        return c(0.0, 0.0);
    }
    let (_, g, _) = scalar_and_derivatives(&x, &p.projector());
    (g[0] * u[0] + g[1] * u[1] + g[2] * u[2]) * PREFACTOR
}

/// Gradient of the coupling in all three directions.
pub fn coupling_gradient(ri: &Vec3, rj: &Vec3, p: &Polarization) -> [C64; 3] {
    let x = scaled_displacement(ri, rj);
    if norm3(&x) == 0.0 {
        return [c(0.0, 0.0); 3];
    }
    let (_, g, _) = scalar_and_derivatives(&x, &p.projector());
    g.map(|z| z * PREFACTOR)
}

/// Hessian of the coupling. For coincident positions this is the
/// regularized self-term `-iγ''/2` with
/// `γ''_ab = -(2/5)δ_ab + (1/5)Re(p_a* p_b)`, from the small-distance
/// expansion of the dissipative kernel; its real part is zero.
pub fn coupling_hessian(ri: &Vec3, rj: &Vec3, p: &Polarization) -> [[C64; 3]; 3] {
    let x = scaled_displacement(ri, rj);
    let m = p.projector();
    if norm3(&x) == 0.0 {
        let mut h = [[c(0.0, 0.0); 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                let delta = if a == b { 1.0 } else { 0.0 };
                let g2 = -0.4 * delta + 0.2 * m[a][b];
                h[a][b] = c(0.0, -0.5 * g2);
            }
        }
        return h;
    }
    let (_, _, h) = scalar_and_derivatives(&x, &m);
    h.map(|row| row.map(|z| z * PREFACTOR))
}

/// `k₀⁻² ∂²G/∂r_u ∂r_v` along unit directions `u`, `v`.
pub fn coupling_second_derivative(ri: &Vec3, rj: &Vec3, p: &Polarization, u: &Vec3, v: &Vec3) -> C64 {
    let h = coupling_hessian(ri, rj, p);
    let mut s = c(0.0, 0.0);
    for a in 0..3 {
        for b in 0..3 {
            s += h[a][b] * (u[a] * v[b]);
        }
    }
    s
}
