//! Collective spin response: the non-Hermitian single-excitation
//! Hamiltonian, its biorthogonal modes, and the driven steady state.

use crate::error::{Error, Result};
use crate::green::{self, Polarization, Vec3, K0};
use crate::numerics::{c, eig_general, solve_linear, ComplexMatrix, ComplexVector, C64, I};

/// Trapped emitters with their motional configuration.
///
/// Positions are in λ₀, frequencies in γ₀. Every atom moves along the same
/// set of unit `axes`; `trap_frequencies[j][a]` belongs to atom `j` and
/// axis `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmitterArray {
    pub positions: Vec<Vec3>,
    pub polarization: Polarization,
    pub axes: Vec<Vec3>,
    pub trap_frequencies: Vec<Vec<f64>>,
    pub detuning_offsets: Vec<f64>,
    /// Average Lamb-Dicke parameter η = √(ν_R/ν̄).
    pub eta: f64,
}

impl EmitterArray {
    /// Single motion axis shared by all atoms.
    pub fn new(positions: Vec<Vec3>, polarization: Polarization, axis: Vec3, trap_frequencies: Vec<f64>, eta: f64) -> Result<Self> {
        let n = positions.len();
        let a = EmitterArray {
            positions,
            polarization,
            axes: vec![axis],
            trap_frequencies: trap_frequencies.into_iter().map(|v| vec![v]).collect(),
            detuning_offsets: vec![0.0; n],
            eta,
        };
        a.validate()?;
        Ok(a)
    }

    pub fn with_axes(positions: Vec<Vec3>, polarization: Polarization, axes: Vec<Vec3>, trap_frequencies: Vec<Vec<f64>>, eta: f64) -> Result<Self> {
        let n = positions.len();
        let a = EmitterArray { positions, polarization, axes, trap_frequencies, detuning_offsets: vec![0.0; n], eta };
        a.validate()?;
        Ok(a)
    }

    pub fn with_detuning_offsets(mut self, offsets: Vec<f64>) -> Result<Self> {
        self.detuning_offsets = offsets;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.positions.len();
        if n == 0 {
            return Err(Error::InvalidInput("array needs at least one emitter".into()));
        }
        if self.axes.is_empty() || self.axes.len() > 3 {
            return Err(Error::InvalidInput("between one and three motion axes required".into()));
        }
        for u in &self.axes {
            let nrm = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
            if !((nrm - 1.0).abs() < 1e-12) {
                return Err(Error::InvalidInput(format!("motion axis {u:?} is not a unit vector")));
            }
        }
        if self.trap_frequencies.len() != n || self.detuning_offsets.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{n} positions, {} trap-frequency rows, {} detuning offsets",
                self.trap_frequencies.len(),
                self.detuning_offsets.len()
            )));
        }
        for row in &self.trap_frequencies {
            if row.len() != self.axes.len() {
                return Err(Error::DimensionMismatch("trap frequencies per atom must match the axis count".into()));
            }
            if row.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(Error::InvalidInput("trap frequencies must be positive and finite".into()));
            }
        }
        if !(self.eta.is_finite() && self.eta >= 0.0) {
            return Err(Error::InvalidInput("Lamb-Dicke parameter must be finite and non-negative".into()));
        }
        if self.positions.iter().flatten().chain(&self.detuning_offsets).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("array geometry"));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (&self.positions[i], &self.positions[j]);
                if a == b {
                    return Err(Error::InvalidInput(format!("emitters {i} and {j} coincide")));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn n_axes(&self) -> usize {
        self.axes.len()
    }

    /// Mean trap frequency over atoms and axes.
    pub fn nu_bar(&self) -> f64 {
        let all: Vec<f64> = self.trap_frequencies.iter().flatten().copied().collect();
        all.iter().sum::<f64>() / all.len() as f64
    }

    /// Recoil frequency ν_R = η²ν̄.
    pub fn recoil_frequency(&self) -> f64 {
        self.eta * self.eta * self.nu_bar()
    }

    /// η_{ja} = √(ν_R/ν_{ja}).
    pub fn eta_of(&self, j: usize, a: usize) -> f64 {
        (self.recoil_frequency() / self.trap_frequencies[j][a]).sqrt()
    }

    pub fn nu(&self, j: usize, a: usize) -> f64 {
        self.trap_frequencies[j][a]
    }

    /// Lamb-Dicke validity messages for atoms with η(2n̄+1) ≥ 0.3.
    pub fn lamb_dicke_warnings(&self, n_bar: &[f64]) -> Vec<String> {
        let mut out = Vec::new();
        for (j, n) in n_bar.iter().enumerate().take(self.len()) {
            for a in 0..self.n_axes() {
                let v = self.eta_of(j, a) * (2.0 * n + 1.0);
                if v >= 0.3 {
                    out.push(format!("atom {j} axis {a}: eta(2n+1) = {v:.3} outside the Lamb-Dicke regime"));
                }
            }
        }
        out
    }

    /// Pairwise coupling `G_ij`, with `G_jj = -i/2`.
    pub fn g(&self, i: usize, j: usize) -> C64 {
        green::coupling(&self.positions[i], &self.positions[j], &self.polarization).g()
    }

    /// `G'_ij` along axis `a`.
    pub fn g1(&self, i: usize, j: usize, a: usize) -> C64 {
        green::coupling_derivative(&self.positions[i], &self.positions[j], &self.polarization, &self.axes[a])
    }

    /// `G^{(ab)}_ij` along axes `a`, `b`.
    pub fn g2(&self, i: usize, j: usize, a: usize, b: usize) -> C64 {
        green::coupling_second_derivative(&self.positions[i], &self.positions[j], &self.polarization, &self.axes[a], &self.axes[b])
    }
}

/// Plane-wave drive with real amplitude `omega`, unit propagation
/// direction `direction` and laser detuning `detuning` (all in γ₀).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveField {
    pub omega: f64,
    pub direction: Vec3,
    pub detuning: f64,
}

impl DriveField {
    pub fn new(omega: f64, direction: Vec3, detuning: f64) -> Result<Self> {
        let nrm = (direction[0].powi(2) + direction[1].powi(2) + direction[2].powi(2)).sqrt();
        if !(omega.is_finite() && detuning.is_finite()) || !((nrm - 1.0).abs() < 1e-12) {
            return Err(Error::InvalidInput("drive needs finite amplitude/detuning and a unit direction".into()));
        }
        Ok(DriveField { omega, direction, detuning })
    }

    pub fn with_detuning(mut self, detuning: f64) -> Self {
        self.detuning = detuning;
        self
    }

    pub fn with_omega(mut self, omega: f64) -> Self {
        self.omega = omega;
        self
    }

    fn k_dot(&self, u: &Vec3) -> f64 {
        self.direction[0] * u[0] + self.direction[1] * u[1] + self.direction[2] * u[2]
    }

    /// `Ω_j = Ω e^{i k₀ k̂·r_j}`.
    pub fn rabi(&self, r: &Vec3) -> C64 {
        (I * (K0 * self.k_dot(r))).exp() * self.omega
    }

    /// `k₀⁻¹ ∂Ω/∂r` along `u`: `i (k̂·u) Ω_j`.
    pub fn rabi_d1(&self, r: &Vec3, u: &Vec3) -> C64 {
        I * self.k_dot(u) * self.rabi(r)
    }

    /// `k₀⁻² ∂²Ω/∂r_u∂r_v`: `-(k̂·u)(k̂·v) Ω_j`.
    pub fn rabi_d2(&self, r: &Vec3, u: &Vec3, v: &Vec3) -> C64 {
        -self.rabi(r) * (self.k_dot(u) * self.k_dot(v))
    }
}

/// Which second-order terms enter the spin Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Convention {
    /// η² corrections only between distinct atoms.
    #[default]
    MainText,
    /// Adds the diagonal η² self-term and the first-order displacement
    /// correction.
    AppendixB,
}

impl std::str::FromStr for Convention {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "main-text" | "main_text" => Ok(Convention::MainText),
            "appendix-b" | "appendix_b" => Ok(Convention::AppendixB),
            other => Err(Error::InvalidInput(format!("unknown convention '{other}'"))),
        }
    }
}

/// `H_S` with the η² zero-point corrections summed over all motion axes.
pub fn build_spin_hamiltonian(array: &EmitterArray, drive: &DriveField, convention: Convention) -> Result<ComplexMatrix> {
    array.validate()?;
    let n = array.len();
    let na = array.n_axes();
    let eta2: Vec<Vec<f64>> = (0..n).map(|j| (0..na).map(|a| array.eta_of(j, a).powi(2)).collect()).collect();
    let mut h = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut v = array.g(i, j);
            if i != j || convention == Convention::AppendixB {
                for a in 0..na {
                    v += array.g2(i, j, a, a) * (0.5 * (eta2[i][a] + eta2[j][a]));
                }
            }
            h[(i, j)] = v;
        }
        h[(i, i)] += -drive.detuning + array.detuning_offsets[i];
    }
    if convention == Convention::AppendixB {
        let st = steady_displacements(array, drive)?;
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                for a in 0..na {
                    let shift = eta2[i][a] * st.beta[i][a] - eta2[j][a] * st.beta[j][a];
                    h[(i, j)] += array.g1(i, j, a) * (2.0 * shift);
                }
            }
        }
    }
    Ok(h)
}

/// Eigenvalues and right eigenvectors of a complex-symmetric `H_S`.
#[derive(Debug, Clone)]
pub struct CollectiveSpectrum {
    /// `ε_λ = -Δ + J_λ - iγ_λ/2`.
    pub eigenvalues: Vec<C64>,
    /// Columns are unit-norm right eigenvectors `φ_λ`.
    pub vectors: ComplexMatrix,
    /// Bilinear norms `Σ_m φ_{λ,m}²`.
    pub bilinear_norms: Vec<C64>,
}

impl CollectiveSpectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn phi(&self, l: usize, i: usize) -> C64 {
        self.vectors[(i, l)]
    }

    /// `c_{λ,i} = φ_{λ,i} / Σφ²`.
    pub fn weight(&self, l: usize, i: usize) -> C64 {
        self.vectors[(i, l)] / self.bilinear_norms[l]
    }

    /// `c_{λ,ij} = φ_{λ,i}φ_{λ,j} / Σφ²`.
    pub fn overlap(&self, l: usize, i: usize, j: usize) -> C64 {
        self.vectors[(i, l)] * self.vectors[(j, l)] / self.bilinear_norms[l]
    }

    pub fn linewidth(&self, l: usize) -> f64 {
        -2.0 * self.eigenvalues[l].im
    }

    pub fn linewidths(&self) -> Vec<f64> {
        (0..self.len()).map(|l| self.linewidth(l)).collect()
    }

    /// Collective shift `J_λ = Re ε_λ + Δ` for laser detuning `detuning`.
    pub fn shift(&self, l: usize, detuning: f64) -> f64 {
        self.eigenvalues[l].re + detuning
    }

    /// Largest entry of `Σ_λ c_{λ,i} φ_{λ,j} - δ_ij`.
    pub fn completeness_residual(&self) -> f64 {
        let n = self.vectors.nrows();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let s: C64 = (0..self.len()).map(|l| self.weight(l, i) * self.phi(l, j)).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((s - target).norm());
            }
        }
        worst
    }
}

const CLUSTER_GAP: f64 = 1e-8;
const COMPLETENESS_TOL: f64 = 1e-6;

/// Diagonalizes `H_S` and fixes a bilinear-orthogonal basis inside each
/// degenerate cluster so every mode has `Σφ² ≠ 0`.
pub fn collective_modes(h: &ComplexMatrix) -> Result<CollectiveSpectrum> {
    let eig = eig_general(h)?;
    let n = h.nrows();
    let mut vectors = eig.right_vectors.clone();
    let vals = eig.eigenvalues.clone();
    let scale = vals.iter().fold(1.0f64, |m, v| m.max(v.norm()));

    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (0..end - start).any(|k| (vals[end] - vals[start + k]).norm() <= CLUSTER_GAP * scale) {
            end += 1;
        }
        if end - start > 1 {
            rebase_cluster(&mut vectors, start, end)?;
        }
        start = end;
    }

    let bilinear_norms: Vec<C64> = (0..n).map(|l| vectors.column(l).iter().map(|z| z * z).sum()).collect();
    let spec = CollectiveSpectrum { eigenvalues: vals, vectors, bilinear_norms };
    let res = spec.completeness_residual();
    if !(res <= COMPLETENESS_TOL) {
        return Err(Error::Convergence("collective-mode completeness (pathological degeneracy)"));
    }
    Ok(spec)
}

/// Bilinear Gram-Schmidt with pivoting on columns `start..end`.
fn rebase_cluster(v: &mut ComplexMatrix, start: usize, end: usize) -> Result<()> {
    let n = v.nrows();
    let mut cols: Vec<ComplexVector> = (start..end).map(|k| v.column(k).into_owned()).collect();
    let bil = |a: &ComplexVector, b: &ComplexVector| -> C64 { a.iter().zip(b.iter()).map(|(x, y)| x * y).sum() };
    let mut done: Vec<ComplexVector> = Vec::with_capacity(cols.len());
    while !cols.is_empty() {
        let (mut best, mut best_val) = (0usize, -1.0f64);
        for (k, col) in cols.iter().enumerate() {
            let val = bil(col, col).norm();
            if val > best_val {
                best = k;
                best_val = val;
            }
        }
        if best_val < 1e-6 {
            // Every remaining vector is isotropic; mix pairs.
            let mut fixed = false;
            'outer: for a in 0..cols.len() {
                for b in (a + 1)..cols.len() {
                    let ab = bil(&cols[a], &cols[b]);
                    if ab.norm() > 1e-6 {
                        let sum = &cols[a] + &cols[b];
                        let alt = &cols[a] + &cols[b] * I;
                        cols[a] = if bil(&sum, &sum).norm() >= bil(&alt, &alt).norm() { sum } else { alt };
                        best = a;
                        fixed = true;
                        break 'outer;
                    }
                }
            }
            if !fixed {
                return Err(Error::Convergence("degenerate cluster has no non-isotropic basis"));
            }
        }
        let mut w = cols.remove(best);
        let nrm = w.norm();
        w /= c(nrm, 0.0);
        let ww = bil(&w, &w);
        for col in cols.iter_mut() {
            let f = bil(&w, col) / ww;
            *col -= &w * f;
        }
        done.push(w);
    }
    for (k, w) in done.into_iter().enumerate() {
        debug_assert_eq!(w.len(), n);
        v.set_column(start + k, &w);
    }
    Ok(())
}

/// Drive-induced spin amplitudes and first-order motional displacements.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadySpinState {
    /// `s⁽⁰⁾_j`.
    pub s: Vec<C64>,
    /// `β⁽¹⁾_{ja}` for atom `j`, axis `a`.
    pub beta: Vec<Vec<f64>>,
}

impl SteadySpinState {
    pub fn max_amplitude(&self) -> f64 {
        self.s.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// Message when `|s⁽⁰⁾|` exceeds `threshold` (default use: 0.1).
    pub fn weak_excitation_warning(&self, threshold: f64) -> Option<String> {
        let m = self.max_amplitude();
        (m > threshold).then(|| format!("spin amplitude {m:.3} exceeds weak-excitation threshold {threshold}"))
    }
}

/// Matrix of the linear system for `s⁽⁰⁾` (bare couplings, detuning
/// offsets on the diagonal).
pub fn steady_state_matrix(array: &EmitterArray, drive: &DriveField) -> ComplexMatrix {
    let n = array.len();
    let mut a = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = array.g(i, j);
        }
        a[(i, i)] += -drive.detuning + array.detuning_offsets[i];
    }
    a
}

/// Solves `(-Δ + δ_i - i/2) s_i + Σ_{j≠i} G_ij s_j = -Ω_i` and evaluates
/// `β_i = -(2/ν_i) Re{Ω'_i s_i* + Σ_{j≠i} G'_ij s_i* s_j}` per axis.
pub fn steady_displacements(array: &EmitterArray, drive: &DriveField) -> Result<SteadySpinState> {
    let n = array.len();
    if drive.omega == 0.0 {
        return Ok(SteadySpinState { s: vec![c(0.0, 0.0); n], beta: vec![vec![0.0; array.n_axes()]; n] });
    }
    let a = steady_state_matrix(array, drive);
    let b = ComplexVector::from_fn(n, |i, _| -drive.rabi(&array.positions[i]));
    let s: Vec<C64> = solve_linear(&a, &b)?.iter().copied().collect();
    let mut beta = vec![vec![0.0; array.n_axes()]; n];
    for i in 0..n {
        for (ax, u) in array.axes.iter().enumerate() {
            let mut acc = drive.rabi_d1(&array.positions[i], u) * s[i].conj();
            for j in 0..n {
                if j != i {
                    acc += array.g1(i, j, ax) * s[i].conj() * s[j];
                }
            }
            beta[i][ax] = -2.0 / array.nu(i, ax) * acc.re;
        }
    }
    Ok(SteadySpinState { s, beta })
}

/// Couplings entering the target-plus-symmetric-ring Hamiltonian (γ₀ units,
/// detuning excluded).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingTargetParameters {
    pub j_s: f64,
    pub gamma_s: f64,
    pub j_ts: f64,
    pub gamma_ts: f64,
    /// Target self energy `J_t - iγ_t/2` without the offset δ_tS.
    pub j_t: f64,
    pub gamma_t: f64,
    pub n_ring: usize,
}

impl RingTargetParameters {
    /// 2×2 matrix in the {target, symmetric ring mode} basis.
    pub fn hamiltonian(&self, detuning: f64, delta_ts: f64) -> ComplexMatrix {
        let tt = c(-detuning + delta_ts + self.j_t, -0.5 * self.gamma_t);
        let ss = c(-detuning + self.j_s, -0.5 * self.gamma_s);
        let ts = c(self.j_ts, -0.5 * self.gamma_ts);
        ComplexMatrix::from_row_slice(2, 2, &[tt, ts, ts, ss])
    }
}

/// Reduces a target (index 0) surrounded by a symmetric ring (indices
/// `1..=N`) to the {target, symmetric ring mode} pair.
///
/// Ring atoms are treated as pinned (their Lamb-Dicke parameter is
/// ignored) while the target keeps `array.eta_of(0, ·)`. Fails when the
/// target or the ring couple to non-symmetric ring modes above `1e-10`.
pub fn ring_target_parameters(array: &EmitterArray) -> Result<RingTargetParameters> {
    array.validate()?;
    let n = array.len() - 1;
    if n == 0 {
        return Err(Error::InvalidInput("ring-plus-target needs at least one ring emitter".into()));
    }
    let na = array.n_axes();
    let eta_t2: Vec<f64> = (0..na).map(|a| array.eta_of(0, a).powi(2)).collect();
    let gt = |m: usize| -> C64 {
        let mut v = array.g(0, m);
        for (a, e2) in eta_t2.iter().enumerate() {
            v += array.g2(0, m, a, a) * (0.5 * e2);
        }
        v
    };
    let ring_row = |i: usize| -> C64 { (1..=n).map(|m| array.g(i, m)).sum() };
    let sym = ring_row(1);
    let tn: Vec<C64> = (1..=n).map(gt).collect();
    let scale = sym.norm().max(tn[0].norm()).max(1.0);
    for i in 1..=n {
        if (ring_row(i) - sym).norm() > 1e-10 * scale {
            return Err(Error::Precondition(format!("ring row {i} breaks the rotational symmetry")));
        }
        if (tn[i - 1] - tn[0]).norm() > 1e-10 * scale {
            return Err(Error::Precondition(format!("target coupling to ring atom {i} differs")));
        }
    }
    let root = (n as f64).sqrt();
    let ts = tn[0] * root;
    let self_t = array.g(0, 0);
    Ok(RingTargetParameters {
        j_s: sym.re,
        gamma_s: -2.0 * sym.im,
        j_ts: ts.re,
        gamma_ts: -2.0 * ts.im,
        j_t: self_t.re,
        gamma_t: -2.0 * self_t.im,
        n_ring: n,
    })
}

/// 2×2 ring-target Hamiltonian at laser detuning `detuning` and target
/// offset `delta_ts`.
pub fn ring_target_hamiltonian(array: &EmitterArray, detuning: f64, delta_ts: f64) -> Result<ComplexMatrix> {
    Ok(ring_target_parameters(array)?.hamiltonian(detuning, delta_ts))
}

/// Offset at which the coherent and dissipative parts of the 2×2
/// Hamiltonian commute: `J_S - J_tS(Γ_S - γ_t)/Γ_tS` (measured from the
/// target's own shift `J_t`).
pub fn dark_detuning(p: &RingTargetParameters) -> Result<f64> {
    if p.gamma_ts == 0.0 || !p.gamma_ts.is_finite() {
        return Err(Error::InvalidInput("dark detuning needs a nonzero dissipative target-ring coupling".into()));
    }
    Ok(p.j_s - p.j_t - p.j_ts * (p.gamma_s - p.gamma_t) / p.gamma_ts)
}
