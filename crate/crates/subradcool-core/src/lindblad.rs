//! Full spin-plus-motion master equation in the Lamb-Dicke expansion, on a
//! truncated Hilbert space.
//!
//! The generator keeps all terms through second order in the position
//! operators `η_j X_j`, `X_j = b_j + b_j†`. Its Hermitian part comes from the
//! coherent couplings; the anti-Hermitian part is fixed to `-i D†(1)/2` with
//! `D` the recycling superoperator built from the same truncated operators,
//! so the truncated generator preserves the trace exactly.

use crate::error::{Error, Result};
use crate::numerics::{c, eig_general, expm, expm_action, fit_exponential_decay, Lu, ComplexMatrix, ComplexVector, CsrMatrix, ExpFit, ExpmOperator, C64, I};
use crate::spin::{DriveField, EmitterArray};

/// How the motional and spin spaces are cut.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Truncation {
    /// Each atom keeps its two spin levels and `cutoff` Fock states.
    PerAtomCutoff(usize),
    /// At most one spin excitation and at most one phonon shared by all
    /// atoms: dimension `(N + 1)²`.
    SharedSingleExcitation,
    /// At most one spin excitation and at most `p` phonons in total. `p = 1`
    /// is the same space as [`Truncation::SharedSingleExcitation`].
    PhononCap(usize),
}

pub const MAX_SHARED_ATOMS: usize = 8;
pub const MAX_CUTOFF_ATOMS: usize = 3;
pub const MAX_CUTOFF: usize = 3;
pub const MAX_HILBERT_DIM: usize = 1728;
pub const MAX_PHONON_CAP: usize = 3;
/// Largest Hilbert dimension accepted for [`Truncation::PhononCap`].
pub const MAX_CAPPED_DIM: usize = 200;
/// Boundary weight above which a truncation is reported as unreliable.
pub const BOUNDARY_WARN: f64 = 0.01;
/// Self-consistency sweeps allowed per ground-block column.
const REDUCED_MAX_SWEEPS: usize = 200;
/// Residual accepted from the dense steady-state solve.
pub const STEADY_RESIDUAL_TOL: f64 = 1e-10;
/// Liouville dimension up to which steady states use a dense LU solve.
pub const DENSE_STEADY_LIMIT: usize = 4096;
/// Liouville dimension up to which propagation uses a cached dense
/// propagator.
pub const DENSE_PROPAGATOR_LIMIT: usize = 1296;
/// Largest Hermiticity defect of a raw propagated state before projection.
pub const RAW_HERMITICITY_GUARD: f64 = 1e-6;

/// Phonon occupation vectors with total at most `cap`, ordered by total and
/// then with earlier atoms holding more quanta: vacuum first, then the
/// single phonon on atom 0, 1, ...
fn phonon_configurations(n: usize, cap: usize) -> Vec<Vec<usize>> {
    fn fill(prefix: &mut Vec<usize>, left: usize, slots: usize, out: &mut Vec<Vec<usize>>) {
        if slots == 1 {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in (0..=left).rev() {
            prefix.push(k);
            fill(prefix, left - k, slots - 1, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    for total in 0..=cap {
        fill(&mut Vec::with_capacity(n), total, n, &mut out);
    }
    out
}

impl Truncation {
    pub fn dimension(&self, n: usize) -> Result<usize> {
        match *self {
            Truncation::SharedSingleExcitation => {
                if n == 0 || n > MAX_SHARED_ATOMS {
                    return Err(Error::InvalidInput(format!("shared single excitation supports 1..={MAX_SHARED_ATOMS} atoms, got {n}")));
                }
                Ok((n + 1) * (n + 1))
            }
            Truncation::PhononCap(p) => {
                if n == 0 || n > MAX_SHARED_ATOMS || !(1..=MAX_PHONON_CAP).contains(&p) {
                    return Err(Error::InvalidInput(format!(
                        "phonon cap needs 1..={MAX_SHARED_ATOMS} atoms and cap 1..={MAX_PHONON_CAP}, got {n} atoms, cap {p}"
                    )));
                }
                let d = (n + 1) * phonon_configurations(n, p).len();
                if d > MAX_CAPPED_DIM {
                    return Err(Error::InvalidInput(format!("Hilbert dimension {d} exceeds {MAX_CAPPED_DIM}")));
                }
                Ok(d)
            }
            Truncation::PerAtomCutoff(cut) => {
                if n == 0 || n > MAX_CUTOFF_ATOMS || !(2..=MAX_CUTOFF).contains(&cut) {
                    return Err(Error::InvalidInput(format!(
                        "per-atom cutoff needs 1..={MAX_CUTOFF_ATOMS} atoms and cutoff 2..={MAX_CUTOFF}, got {n} atoms, cutoff {cut}"
                    )));
                }
                let d = (1usize << n) * cut.pow(n as u32);
                if d > MAX_HILBERT_DIM {
                    return Err(Error::InvalidInput(format!("Hilbert dimension {d} exceeds {MAX_HILBERT_DIM}")));
                }
                Ok(d)
            }
        }
    }
}

/// Density matrix on the truncated space.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityState {
    pub rho: ComplexMatrix,
}

impl DensityState {
    pub fn trace(&self) -> C64 {
        self.rho.trace()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        (&self.rho - self.rho.adjoint()).iter().fold(0.0f64, |a, z| a.max(z.norm()))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.rho + self.rho.adjoint()) * c(0.5, 0.0);
        h.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Checks Hermiticity, unit trace and positivity.
    pub fn validate(&self) -> Result<()> {
        let h = self.hermiticity_defect();
        let t = self.trace();
        let m = self.min_eigenvalue();
        if h > 1e-10 || (t - c(1.0, 0.0)).norm() > 1e-8 || m < -1e-8 {
            return Err(Error::Validity(format!("density state: hermiticity {h:.2e}, trace {t:.10}, min eigenvalue {m:.2e}")));
        }
        Ok(())
    }

    fn to_vec(&self) -> ComplexVector {
        let d = self.rho.nrows();
        ComplexVector::from_fn(d * d, |p, _| self.rho[(p % d, p / d)])
    }

    fn from_vec(v: &ComplexVector, d: usize) -> Self {
        let rho = ComplexMatrix::from_fn(d, d, |a, b| v[a + d * b]);
        DensityState { rho }
    }
}

/// Expectation values on one state.
#[derive(Debug, Clone, PartialEq)]
pub struct Observables {
    pub phonons: Vec<f64>,
    pub mean_phonons: f64,
    pub spin_populations: Vec<f64>,
}

/// Assembled full model: operators, effective Hamiltonian and Liouvillian.
#[derive(Debug, Clone)]
pub struct FullModel {
    pub truncation: Truncation,
    pub n_atoms: usize,
    pub dim: usize,
    sigma: Vec<ComplexMatrix>,
    number: Vec<ComplexMatrix>,
    vacuum_spin_projector: ComplexMatrix,
    phonon_vacuum_ops: Vec<ComplexMatrix>,
    pub liouvillian: CsrMatrix,
    h_eff: ComplexMatrix,
    /// `(W_l, L_l)` with `D(μ) = Σ_l W_l μ L_l†`.
    jumps: Vec<(ComplexMatrix, ComplexMatrix)>,
    /// Size of the spin-ground block when the basis has at most one spin
    /// excitation, with the ground block leading.
    ground_block: Option<usize>,
}

fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

fn local_operator(factors: &[ComplexMatrix]) -> ComplexMatrix {
    let mut out = factors[0].clone();
    for f in &factors[1..] {
        out = kron(&out, f);
    }
    out
}

/// `σ_j`, `b_j` on the truncated space.
fn build_operators(n: usize, truncation: Truncation) -> Result<(usize, Vec<ComplexMatrix>, Vec<ComplexMatrix>)> {
    let dim = truncation.dimension(n)?;
    let mut sig = Vec::with_capacity(n);
    let mut bos = Vec::with_capacity(n);
    match truncation {
        Truncation::SharedSingleExcitation | Truncation::PhononCap(_) => {
            // Index s * M + q; s = 0 ground, s = j + 1 atom j excited; q
            // enumerates phonon configurations (q = j + 1 is one phonon on j).
            let cap = if let Truncation::PhononCap(p) = truncation { p } else { 1 };
            let configs = phonon_configurations(n, cap);
            let m = configs.len();
            let lookup: std::collections::HashMap<&[usize], usize> = configs.iter().enumerate().map(|(q, v)| (v.as_slice(), q)).collect();
            for j in 0..n {
                let mut s = ComplexMatrix::zeros(dim, dim);
                let mut b = ComplexMatrix::zeros(dim, dim);
                for q in 0..m {
                    s[(q, (j + 1) * m + q)] = c(1.0, 0.0);
                }
                for (q, cfg) in configs.iter().enumerate() {
                    if cfg[j] == 0 {
                        continue;
                    }
                    let mut lower = cfg.clone();
                    lower[j] -= 1;
                    let q2 = lookup[lower.as_slice()];
                    for st in 0..=n {
                        b[(st * m + q2, st * m + q)] = c((cfg[j] as f64).sqrt(), 0.0);
                    }
                }
                sig.push(s);
                bos.push(b);
            }
        }
        Truncation::PerAtomCutoff(cut) => {
            // Factor order: spin_1..spin_N, phonon_1..phonon_N.
            let lower = ComplexMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
            let ann = ComplexMatrix::from_fn(cut, cut, |r, col| if col == r + 1 { c((col as f64).sqrt(), 0.0) } else { c(0.0, 0.0) });
            for j in 0..n {
                let mut fs: Vec<ComplexMatrix> = (0..n).map(|_| ComplexMatrix::identity(2, 2)).collect();
                fs.extend((0..n).map(|_| ComplexMatrix::identity(cut, cut)));
                let mut fb = fs.clone();
                fs[j] = lower.clone();
                fb[n + j] = ann.clone();
                sig.push(local_operator(&fs));
                bos.push(local_operator(&fb));
            }
        }
    }
    Ok((dim, sig, bos))
}

fn push_sandwich(trip: &mut Vec<(usize, usize, C64)>, a: &ComplexMatrix, bt: &ComplexMatrix, coef: C64) {
    // vec(A μ B) with B = bt: entry ((x, y), (u, v)) += A_xu B_vy.
    let d = a.nrows();
    let na: Vec<(usize, usize, C64)> = nonzeros(a);
    let nb: Vec<(usize, usize, C64)> = nonzeros(bt);
    for &(x, u, av) in &na {
        for &(v, y, bv) in &nb {
            trip.push((x + d * y, u + d * v, av * bv * coef));
        }
    }
}

fn nonzeros(a: &ComplexMatrix) -> Vec<(usize, usize, C64)> {
    let mut out = Vec::new();
    for col in 0..a.ncols() {
        for row in 0..a.nrows() {
            let v = a[(row, col)];
            if v != c(0.0, 0.0) {
                out.push((row, col, v));
            }
        }
    }
    out
}

/// Builds the truncated full-model generator for a single motion axis.
pub fn build_liouvillian(array: &EmitterArray, drive: &DriveField, truncation: Truncation) -> Result<FullModel> {
    array.validate()?;
    if array.n_axes() != 1 {
        return Err(Error::InvalidInput("the full model supports one motion axis per atom".into()));
    }
    let n = array.len();
    let (dim, sig, bos) = build_operators(n, truncation)?;
    let u = array.axes[0];
    let eta: Vec<f64> = (0..n).map(|j| array.eta_of(j, 0)).collect();
    let x: Vec<ComplexMatrix> = bos.iter().zip(&eta).map(|(b, e)| (b + b.adjoint()) * c(*e, 0.0)).collect();
    let x2: Vec<ComplexMatrix> = x.iter().map(|m| m * m).collect();
    let g = ComplexMatrix::from_fn(n, n, |i, j| array.g(i, j));
    let g1 = ComplexMatrix::from_fn(n, n, |i, j| array.g1(i, j, 0));
    let g2 = ComplexMatrix::from_fn(n, n, |i, j| array.g2(i, j, 0, 0));
    let gam = |z: C64| -2.0 * z.im;

    // Coherent Hamiltonian (only its Hermitian part is kept).
    let mut h = ComplexMatrix::zeros(dim, dim);
    for j in 0..n {
        let num = bos[j].adjoint() * &bos[j];
        h += &num * c(array.nu(j, 0), 0.0);
        let r = &array.positions[j];
        let om = ComplexMatrix::identity(dim, dim) * drive.rabi(r) + &x[j] * drive.rabi_d1(r, &u) + &x2[j] * (drive.rabi_d2(r, &u, &u) * 0.5);
        let up = sig[j].adjoint() * &om;
        h += &up + up.adjoint();
        let pop = sig[j].adjoint() * &sig[j];
        h += pop * c(-drive.detuning + array.detuning_offsets[j], 0.0);
    }
    for i in 0..n {
        for j in 0..n {
            let hop = sig[i].adjoint() * &sig[j];
            let mut coef = ComplexMatrix::identity(dim, dim) * g[(i, j)];
            if i != j {
                let dx = &x[i] - &x[j];
                coef += &dx * g1[(i, j)] + (&dx * &dx) * (g2[(i, j)] * 0.5);
            }
            h += coef * hop;
        }
    }
    let h_herm = (&h + h.adjoint()) * c(0.5, 0.0);

    // Recycling D(μ) = Σ_kl Γ_kl L_k μ L_l† with L_{j,0} = σ_j,
    // L_{j,1} = σ_j η_j X_j, L_{j,2} = σ_j η_j² X_j².
    let mut ops: Vec<ComplexMatrix> = Vec::with_capacity(3 * n);
    for j in 0..n {
        ops.push(sig[j].clone());
        ops.push(&sig[j] * &x[j]);
        ops.push(&sig[j] * &x2[j]);
    }
    let k = |j: usize, a: usize| 3 * j + a;
    let mut gmat = vec![vec![0.0f64; 3 * n]; 3 * n];
    for j in 0..n {
        for i in 0..n {
            let (gg, g1v, g2v) = (gam(g[(i, j)]), gam(g1[(i, j)]), gam(g2[(i, j)]));
            gmat[k(j, 0)][k(i, 0)] += gg;
            if i != j {
                gmat[k(j, 0)][k(i, 1)] += g1v;
                gmat[k(j, 1)][k(i, 0)] -= g1v;
            }
            gmat[k(j, 0)][k(i, 2)] += 0.5 * g2v;
            gmat[k(j, 2)][k(i, 0)] += 0.5 * g2v;
            gmat[k(j, 1)][k(i, 1)] -= g2v;
        }
    }
    let mut weighted: Vec<ComplexMatrix> = Vec::with_capacity(3 * n);
    for l in 0..3 * n {
        let mut m = ComplexMatrix::zeros(dim, dim);
        for (kk, op) in ops.iter().enumerate() {
            let w = gmat[kk][l];
            if w != 0.0 {
                m += op * c(w, 0.0);
            }
        }
        weighted.push(m);
    }
    let mut dagger_one = ComplexMatrix::zeros(dim, dim);
    for (l, m) in weighted.iter().enumerate() {
        dagger_one += ops[l].adjoint() * m;
    }
    let h_eff = h_herm - dagger_one * c(0.0, 0.5);

    let mut trip = Vec::new();
    let ident = ComplexMatrix::identity(dim, dim);
    push_sandwich(&mut trip, &h_eff, &ident, -I);
    push_sandwich(&mut trip, &ident, &h_eff.adjoint(), I);
    for (l, m) in weighted.iter().enumerate() {
        push_sandwich(&mut trip, m, &ops[l].adjoint(), c(1.0, 0.0));
    }
    let liouvillian = CsrMatrix::from_triplets(dim * dim, dim * dim, trip);

    let number: Vec<ComplexMatrix> = bos.iter().map(|b| b.adjoint() * b).collect();
    let mut excited = ComplexMatrix::zeros(dim, dim);
    for s in &sig {
        excited += s.adjoint() * s;
    }
    let vacuum_spin_projector = ComplexMatrix::identity(dim, dim) - excited;
    let ground_block = match truncation {
        Truncation::SharedSingleExcitation | Truncation::PhononCap(_) => Some(dim / (n + 1)),
        Truncation::PerAtomCutoff(_) => None,
    };
    let jumps = weighted.into_iter().zip(ops).collect();
    Ok(FullModel {
        truncation,
        n_atoms: n,
        dim,
        sigma: sig,
        number,
        vacuum_spin_projector,
        phonon_vacuum_ops: bos,
        liouvillian,
        h_eff,
        jumps,
        ground_block,
    })
}

impl FullModel {
    pub fn liouville_dim(&self) -> usize {
        self.dim * self.dim
    }

    /// `max_col |Σ_a L_{(a,a),col}| / ‖L‖_F`: zero for a trace-preserving
    /// generator.
    pub fn trace_defect(&self) -> f64 {
        let d = self.dim;
        let trace_row: Vec<C64> = (0..d * d).map(|p| if p % d == p / d { c(1.0, 0.0) } else { c(0.0, 0.0) }).collect();
        let row = self.liouvillian.left_mul(&trace_row);
        let worst = row.iter().fold(0.0f64, |a, z| a.max(z.norm()));
        worst / self.liouvillian.norm_fro().max(f64::MIN_POSITIVE)
    }

    /// Spins in the ground state, phonon vacuum.
    pub fn ground_state(&self) -> DensityState {
        let mut rho = ComplexMatrix::zeros(self.dim, self.dim);
        rho[(0, 0)] = c(1.0, 0.0);
        DensityState { rho }
    }

    /// Spins in the ground state with one phonon: the uniform mixture of
    /// single-phonon states in the shared and capped schemes, `|1⟩` on every atom in the
    /// per-atom scheme.
    pub fn one_phonon_state(&self) -> DensityState {
        let n = self.n_atoms;
        let mut rho = ComplexMatrix::zeros(self.dim, self.dim);
        match self.truncation {
            Truncation::SharedSingleExcitation | Truncation::PhononCap(_) => {
                for j in 0..n {
                    rho[(j + 1, j + 1)] = c(1.0 / n as f64, 0.0);
                }
            }
            Truncation::PerAtomCutoff(cut) => {
                // Spin index 0 (all ground) sits in the leading block.
                let idx: usize = (0..n).map(|j| cut.pow((n - 1 - j) as u32)).sum();
                rho[(idx, idx)] = c(1.0, 0.0);
            }
        }
        DensityState { rho }
    }

    /// State with the spins in the ground state and a given motional part,
    /// built from single-atom phonon occupations in the shared scheme.
    pub fn phonon_on(&self, atom: usize) -> Result<DensityState> {
        if atom >= self.n_atoms {
            return Err(Error::InvalidInput(format!("atom {atom} out of range")));
        }
        let mut rho = ComplexMatrix::zeros(self.dim, self.dim);
        let idx = match self.truncation {
            Truncation::SharedSingleExcitation | Truncation::PhononCap(_) => atom + 1,
            Truncation::PerAtomCutoff(cut) => cut.pow((self.n_atoms - 1 - atom) as u32),
        };
        rho[(idx, idx)] = c(1.0, 0.0);
        Ok(DensityState { rho })
    }

    pub fn observables(&self, state: &DensityState) -> Observables {
        let ev = |op: &ComplexMatrix| (op * &state.rho).trace().re;
        let phonons: Vec<f64> = self.number.iter().map(ev).collect();
        let spin_populations = self.sigma.iter().map(|s| ev(&(s.adjoint() * s))).collect();
        let mean_phonons = phonons.iter().sum::<f64>() / phonons.len() as f64;
        Observables { phonons, mean_phonons, spin_populations }
    }

    /// Weight of basis states on the truncation boundary: total phonon
    /// number at the cap for shared bases, some atom at its top Fock level
    /// for per-atom cutoffs.
    pub fn boundary_population(&self, state: &DensityState) -> f64 {
        let top = |k: usize| -> bool {
            let occ = self.number.iter().map(|nj| nj[(k, k)].re.round() as usize);
            match self.truncation {
                Truncation::SharedSingleExcitation => occ.sum::<usize>() == 1,
                Truncation::PhononCap(p) => occ.sum::<usize>() == p,
                Truncation::PerAtomCutoff(cut) => occ.max().unwrap_or(0) == cut - 1,
            }
        };
        (0..self.dim).filter(|&k| top(k)).map(|k| state.rho[(k, k)].re).sum()
    }

    /// Probability of finding every spin in the ground state.
    pub fn spin_ground_population(&self, state: &DensityState) -> f64 {
        (&self.vacuum_spin_projector * &state.rho).trace().re
    }

    /// Stationary state from `L ρ = 0` with the trace fixed to one.
    pub fn steady_state(&self) -> Result<DensityState> {
        let d = self.dim;
        let nl = d * d;
        if self.ground_block.is_some() && nl > DENSE_PROPAGATOR_LIMIT {
            if let Ok(st) = self.steady_state_reduced() {
                return Ok(st);
            }
        }
        if nl > DENSE_STEADY_LIMIT {
            return self.steady_state_sparse().or_else(|_| self.steady_state_by_propagation());
        }
        self.steady_state_dense()
    }

    /// Dense LU of the generator with one row replaced by the trace.
    pub fn steady_state_dense(&self) -> Result<DensityState> {
        let d = self.dim;
        let nl = d * d;
        if nl > DENSE_STEADY_LIMIT {
            return Err(Error::Precondition(format!("Liouville dimension {nl} is above the dense limit {DENSE_STEADY_LIMIT}")));
        }
        let mut a = self.liouvillian.to_dense();
        // Row of the (0,0) element is replaced by the trace functional.
        for col in 0..nl {
            a[(0, col)] = c(0.0, 0.0);
        }
        for k in 0..d {
            a[(0, k + d * k)] = c(1.0, 0.0);
        }
        let mut rhs = ComplexVector::zeros(nl);
        rhs[0] = c(1.0, 0.0);
        // Slow phonon relaxation next to fast spin rates makes this system
        // badly conditioned; accept it when refinement drives the residual down.
        let lu = Lu::new(&a)?;
        let mut v = lu.solve(&rhs);
        for _ in 0..3 {
            let r = &rhs - &a * &v;
            v += lu.solve(&r);
        }
        let resid = (&rhs - &a * &v).norm();
        if !(resid <= STEADY_RESIDUAL_TOL) {
            return Err(Error::Singular(1.0 / lu.rcond().max(f64::MIN_POSITIVE)));
        }
        let mut st = DensityState::from_vec(&v, d);
        st.rho = (&st.rho + st.rho.adjoint()) * c(0.5, 0.0);
        st.validate()?;
        Ok(st)
    }

    /// Steady state through the spin-ground block.
    ///
    /// With at most one spin excitation, `ρ = [[P, Q], [Q', R]]` in
    /// (ground, excited) blocks. For fixed `P` the blocks `Q`, `Q'`, `R` obey
    /// Sylvester equations whose excited-state energies are strictly damped;
    /// they are solved in the eigenbases of the diagonal blocks and iterated
    /// to self-consistency. What remains is a dense linear system for `P`.
    pub fn steady_state_reduced(&self) -> Result<DensityState> {
        let m = self.ground_block.ok_or_else(|| Error::Precondition("reduced steady state needs a single-excitation basis".into()))?;
        let d = self.dim;
        let e = d - m;
        let h = &self.h_eff;
        let a = h.view((0, 0), (m, m)).into_owned();
        let b = h.view((0, m), (m, e)).into_owned();
        let cm = h.view((m, 0), (e, m)).into_owned();
        let f = h.view((m, m), (e, e)).into_owned();
        let ah = (&a + a.adjoint()) * c(0.5, 0.0);
        if (&a - &ah).norm() > 1e-12 * ah.norm().max(1.0) {
            return Err(Error::Precondition("ground block of the effective Hamiltonian is not Hermitian".into()));
        }
        let se = ah.symmetric_eigen();
        let u = se.eigenvectors;
        let av = se.eigenvalues;
        let fe = eig_general(&f)?;
        let lam = fe.eigenvalues;
        if lam.iter().any(|z| !(z.im < 0.0)) {
            return Err(Error::Precondition("excited block has an undamped state".into()));
        }
        let v = fe.right_vectors;
        if Lu::new(&v)?.rcond() < SPECTRAL_MIN_RCOND {
            return Err(Error::Singular(f64::INFINITY));
        }
        let vinv = v.clone().try_inverse().ok_or(Error::Singular(f64::INFINITY))?;
        let (u_h, v_h) = (u.adjoint(), v.adjoint());
        let b_h = b.adjoint();
        // Sweeps run in the eigenbases: Q = U Q̃ V†, Q' = V Q̃' U†,
        // R = V R̃ V†, with B̂ = U† B V and Ĉ = V⁻¹ C U.
        let bh = &u_h * &b * &v;
        let ch = &vinv * &cm * &u;
        let (bh_h, ch_h) = (bh.adjoint(), ch.adjoint());
        let jumps: Vec<(ComplexMatrix, ComplexMatrix)> = self
            .jumps
            .iter()
            .map(|(w, o)| (w.view((0, m), (m, e)) * &v, (o.view((0, m), (m, e)) * &v).adjoint()))
            .collect();
        let div_q = |mut t: ComplexMatrix| -> ComplexMatrix {
            for k in 0..e {
                for i in 0..m {
                    t[(i, k)] /= c(av[i], 0.0) - lam[k].conj();
                }
            }
            t
        };
        let div_qp = |mut t: ComplexMatrix| -> ComplexMatrix {
            for i in 0..m {
                for k in 0..e {
                    t[(k, i)] /= lam[k] - c(av[i], 0.0);
                }
            }
            t
        };
        let div_r = |mut t: ComplexMatrix| -> ComplexMatrix {
            for l in 0..e {
                for k in 0..e {
                    t[(k, l)] /= lam[k] - lam[l].conj();
                }
            }
            t
        };
        // (Q̃, Q̃', R̃) for a given P̂ = U† P U.
        let blocks = |p: &ComplexMatrix| -> Result<(ComplexMatrix, ComplexMatrix, ComplexMatrix)> {
            let pc = p * &ch_h;
            let cp = &ch * p;
            let mut r = ComplexMatrix::zeros(e, e);
            let mut q = div_q(pc.clone());
            let mut qp = div_qp(-&cp);
            let scale = p.norm().max(f64::MIN_POSITIVE);
            for _ in 0..REDUCED_MAX_SWEEPS {
                let next = div_r(&qp * &ch_h - &ch * &q);
                let change = (&next - &r).norm();
                r = next;
                q = div_q(&pc - &bh * &r);
                qp = div_qp(&r * &bh_h - &cp);
                if !change.is_finite() || change > 1e8 * scale {
                    return Err(Error::Convergence("reduced steady-state sweeps diverge"));
                }
                if change <= 1e-15 * scale.max(r.norm()) {
                    return Ok((q, qp, r));
                }
            }
            Err(Error::Convergence("reduced steady-state sweeps did not settle"))
        };

        let mm = m * m;
        let mut k = ComplexMatrix::zeros(mm, mm);
        let mut trace_row = vec![c(0.0, 0.0); mm];
        for col in 0..mm {
            let mut p = ComplexMatrix::zeros(m, m);
            p[(col % m, col / m)] = c(1.0, 0.0);
            let (q, qp, r) = blocks(&(&u_h * &p * &u))?;
            let q = &u * q * &v_h;
            let qp = &v * qp * &u_h;
            let mut out = (&a * &p + &b * &qp - &p * &a - &q * &b_h) * (-I);
            for (w, oh) in &jumps {
                out += w * &r * oh;
            }
            for y in 0..m {
                for x in 0..m {
                    k[(x + m * y, col)] = out[(x, y)];
                }
            }
            trace_row[col] = p.trace() + (&v * &r * &v_h).trace();
        }
        for col in 0..mm {
            k[(0, col)] = trace_row[col];
        }
        let mut rhs = ComplexVector::zeros(mm);
        rhs[0] = c(1.0, 0.0);
        let lu = Lu::new(&k)?;
        let mut x = lu.solve(&rhs);
        for _ in 0..3 {
            let res = &rhs - &k * &x;
            x += lu.solve(&res);
        }
        if !((&rhs - &k * &x).norm() <= STEADY_RESIDUAL_TOL) {
            return Err(Error::Singular(1.0 / lu.rcond().max(f64::MIN_POSITIVE)));
        }
        let p = ComplexMatrix::from_fn(m, m, |i, j| x[i + m * j]);
        let (q, qp, r) = blocks(&(&u_h * &p * &u))?;
        let mut rho = ComplexMatrix::zeros(d, d);
        rho.view_mut((0, 0), (m, m)).copy_from(&p);
        rho.view_mut((0, m), (m, e)).copy_from(&(&u * q * &v_h));
        rho.view_mut((m, 0), (e, m)).copy_from(&(&v * qp * &u_h));
        rho.view_mut((m, m), (e, e)).copy_from(&(&v * r * &v_h));
        let mut st = DensityState { rho };
        let resid = (self.liouvillian.mul_vec(&st.to_vec())).norm() / self.liouvillian.norm_fro().max(f64::MIN_POSITIVE);
        if !(resid <= STEADY_RESIDUAL_TOL) {
            return Err(Error::Convergence("reduced steady state fails the full generator check"));
        }
        st.rho = (&st.rho + st.rho.adjoint()) * c(0.5, 0.0);
        st.validate()?;
        Ok(st)
    }

    fn steady_state_sparse(&self) -> Result<DensityState> {
        let d = self.dim;
        let nl = d * d;
        let mut trip = Vec::with_capacity(self.liouvillian.nnz() + d);
        for row in 1..nl {
            trip.extend(self.liouvillian.row(row).map(|(col, v)| (row, col, v)));
        }
        trip.extend((0..d).map(|k| (0, k + d * k, c(1.0, 0.0))));
        let a = CsrMatrix::from_triplets(nl, nl, trip);
        let mut rhs = ComplexVector::zeros(nl);
        rhs[0] = c(1.0, 0.0);
        let v = a.solve(&rhs, 3)?;
        let resid = (&rhs - a.mul_vec(&v)).norm();
        if !(resid <= STEADY_RESIDUAL_TOL) {
            return Err(Error::Convergence("sparse steady-state residual above tolerance"));
        }
        let mut st = DensityState::from_vec(&v, d);
        st.rho = (&st.rho + st.rho.adjoint()) * c(0.5, 0.0);
        st.validate()?;
        Ok(st)
    }

    fn steady_state_by_propagation(&self) -> Result<DensityState> {
        let op = ExpmOperator::Sparse(self.liouvillian.clone());
        let mut v = self.ground_state().to_vec();
        let mut t = 10.0;
        for _ in 0..60 {
            let next = expm_action(&op, &v, t)?;
            let change = (&next - &v).norm();
            v = next;
            if change < 1e-12 {
                break;
            }
            t *= 2.0;
        }
        let st = DensityState::from_vec(&v, self.dim);
        st.validate()?;
        Ok(st)
    }

    /// `ρ(t)` at every sample of `times` (starting at `times[0]` with
    /// `rho0`), validated at each sample.
    pub fn propagate(&self, rho0: &DensityState, times: &[f64]) -> Result<Vec<DensityState>> {
        rho0.validate()?;
        if rho0.rho.nrows() != self.dim {
            return Err(Error::DimensionMismatch(format!("state {} vs model {}", rho0.rho.nrows(), self.dim)));
        }
        if times.windows(2).any(|w| !(w[1] >= w[0])) {
            return Err(Error::InvalidInput("time grid must be non-decreasing".into()));
        }
        let mut out = Vec::with_capacity(times.len());
        if times.is_empty() {
            return Ok(out);
        }
        let nl = self.liouville_dim();
        let v0 = rho0.to_vec();
        out.push(rho0.clone());
        let finish = |v: &ComplexVector| -> Result<DensityState> {
            let mut st = DensityState::from_vec(v, self.dim);
            // The exact map preserves Hermiticity; what is left is
            // eigenbasis round-off, removed by projecting onto Hermitian
            // matrices. A large defect still signals a broken generator.
            let raw = st.hermiticity_defect();
            if raw > RAW_HERMITICITY_GUARD {
                return Err(Error::Validity(format!("propagated state lost Hermiticity: {raw:.2e}")));
            }
            st.rho = (&st.rho + st.rho.adjoint()) * c(0.5, 0.0);
            st.validate()?;
            Ok(st)
        };
        if nl <= DENSE_PROPAGATOR_LIMIT {
            let l = self.liouvillian.to_dense();
            if let Some(sp) = SpectralPropagator::new(&l, &v0) {
                for &t in &times[1..] {
                    out.push(finish(&sp.at(t - times[0]))?);
                }
                return Ok(out);
            }
            let mut cache: Option<(f64, ComplexMatrix)> = None;
            let mut v = v0;
            for w in times.windows(2) {
                let dt = w[1] - w[0];
                if dt > 0.0 {
                    let reuse = matches!(&cache, Some((h, _)) if (*h - dt).abs() <= 1e-12 * dt);
                    if !reuse {
                        cache = Some((dt, restore_trace_row(expm(&(&l * c(dt, 0.0)))?)));
                    }
                    v = &cache.as_ref().expect("cached propagator").1 * &v;
                }
                out.push(finish(&v)?);
            }
            return Ok(out);
        }
        let sparse = ExpmOperator::Sparse(self.liouvillian.clone());
        let mut v = v0;
        for w in times.windows(2) {
            let dt = w[1] - w[0];
            if dt > 0.0 {
                v = expm_action(&sparse, &v, dt)?;
            }
            out.push(finish(&v)?);
        }
        Ok(out)
    }

    #[doc(hidden)]
    pub fn lowering_operators(&self) -> (&[ComplexMatrix], &[ComplexMatrix]) {
        (&self.sigma, &self.phonon_vacuum_ops)
    }
}

/// Eigenvector basis condition below which the spectral propagator is not
/// trusted.
const SPECTRAL_MIN_RCOND: f64 = 1e-8;

/// `e^{Lt} v0 = Σ_k c_k e^{λ_k t} v_k`. Its error does not grow with `t`
/// apart from eigenvalue round-off, which matters only for the stationary
/// mode: that eigenvalue is pinned to zero and residual trace drift is
/// absorbed into the stationary component.
struct SpectralPropagator {
    eigenvalues: Vec<C64>,
    vectors: ComplexMatrix,
    coefficients: ComplexVector,
    stationary: usize,
    trace0: C64,
}

impl SpectralPropagator {
    fn new(l: &ComplexMatrix, v0: &ComplexVector) -> Option<Self> {
        let e = eig_general(l).ok()?;
        let lu = Lu::new(&e.right_vectors).ok()?;
        if lu.rcond() < SPECTRAL_MIN_RCOND {
            return None;
        }
        let mut eigenvalues = e.eigenvalues;
        let nl = eigenvalues.len();
        let stationary = (0..nl).min_by(|a, b| eigenvalues[*a].norm().total_cmp(&eigenvalues[*b].norm()))?;
        pair_conjugates(&mut eigenvalues);
        eigenvalues[stationary] = c(0.0, 0.0);
        let sp = SpectralPropagator { eigenvalues, vectors: e.right_vectors, coefficients: lu.solve(v0), stationary, trace0: trace_of(v0) };
        if trace_of(&sp.vectors.column(stationary).into_owned()).norm() < 1e-8 {
            return None;
        }
        Some(sp)
    }

    fn at(&self, t: f64) -> ComplexVector {
        let w = ComplexVector::from_fn(self.eigenvalues.len(), |k, _| self.coefficients[k] * (self.eigenvalues[k] * t).exp());
        let mut v = &self.vectors * w;
        let vs = self.vectors.column(self.stationary).into_owned();
        let fix = (self.trace0 - trace_of(&v)) / trace_of(&vs);
        v += vs * fix;
        v
    }
}

/// A Hermiticity-preserving generator has a spectrum closed under
/// conjugation. Independent round-off in the two members of a pair makes
/// `e^{λt}` drift apart at long times, so matched pairs are made exact
/// conjugates (and lone real eigenvalues exactly real).
fn pair_conjugates(ev: &mut [C64]) {
    let n = ev.len();
    let close = |a: C64, b: C64| (a - b).norm() <= 1e-8 * (1.0 + a.norm());
    let mut done = vec![false; n];
    for k in 0..n {
        if done[k] {
            continue;
        }
        let target = ev[k].conj();
        let partner = (0..n).filter(|&p| !done[p]).min_by(|&a, &b| (ev[a] - target).norm().total_cmp(&(ev[b] - target).norm()));
        match partner {
            Some(p) if close(ev[p], target) => {
                if p == k {
                    ev[k].im = 0.0;
                } else {
                    let avg = (ev[k] + ev[p].conj()) * 0.5;
                    ev[k] = avg;
                    ev[p] = avg.conj();
                    done[p] = true;
                }
            }
            _ => {}
        }
        done[k] = true;
    }
}

fn trace_of(v: &ComplexVector) -> C64 {
    let d = (v.len() as f64).sqrt().round() as usize;
    (0..d).map(|a| v[a + d * a]).sum()
}

/// Squaring round-off over long steps leaks trace. The exact propagator
/// satisfies `ℓ P = ℓ` for the trace functional `ℓ`; this adds the rank-one
/// term `vec(1)/d (ℓ - ℓ P)` that restores it.
fn restore_trace_row(mut p: ComplexMatrix) -> ComplexMatrix {
    let nl = p.nrows();
    let d = (nl as f64).sqrt().round() as usize;
    let w = c(1.0 / d as f64, 0.0);
    for col in 0..nl {
        let mut lp = c(0.0, 0.0);
        for k in 0..d {
            lp += p[(k + d * k, col)];
        }
        let target = if col % d == col / d { c(1.0, 0.0) } else { c(0.0, 0.0) };
        let corr = (target - lp) * w;
        for k in 0..d {
            p[(k + d * k, col)] += corr;
        }
    }
    p
}

/// Phonon decay extracted from a full-model propagation.
#[derive(Debug, Clone)]
pub struct CoolingCurve {
    pub times: Vec<f64>,
    pub mean_phonons: Vec<f64>,
    pub fit: ExpFit,
    pub steady_state_phonons: f64,
    /// Steady-state weight on the truncation boundary.
    pub boundary_population: f64,
    /// Set when `boundary_population` exceeds [`BOUNDARY_WARN`].
    pub truncation_unreliable: bool,
}

/// Propagates the one-phonon state to `horizon` on `samples` uniform steps,
/// fits an exponential to `n̄(t)`, and solves for the steady state.
pub fn cooling_curve(model: &FullModel, horizon: f64, samples: usize) -> Result<CoolingCurve> {
    if !(horizon.is_finite() && horizon > 0.0) || samples < 8 {
        return Err(Error::InvalidInput("cooling curve needs a positive horizon and at least 8 samples".into()));
    }
    let times: Vec<f64> = (0..samples).map(|k| horizon * k as f64 / (samples - 1) as f64).collect();
    let traj = model.propagate(&model.one_phonon_state(), &times)?;
    let mean_phonons: Vec<f64> = traj.iter().map(|s| model.observables(s).mean_phonons).collect();
    let fit = fit_exponential_decay(&times, &mean_phonons)?;
    let ss = model.steady_state()?;
    let steady_state_phonons = model.observables(&ss).mean_phonons;
    let boundary_population = model.boundary_population(&ss);
    let truncation_unreliable = boundary_population > BOUNDARY_WARN;
    Ok(CoolingCurve { times, mean_phonons, fit, steady_state_phonons, boundary_population, truncation_unreliable })
}
