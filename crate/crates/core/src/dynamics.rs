//! State vectors, exact diagonalisation and Schrödinger-equation integration.
//!
//! Operators are compiled into groups sharing an X mask, each holding one
//! diagonal: `(H ψ)[c] = Σ_x d_x[c] ψ[c ^ x]`. A time-dependent Hamiltonian
//! is a fixed list of compiled components mixed by time-dependent weights,
//! which is how every protocol here is shaped (`H_i`, `H_f - H_i`, the control
//! operator and the gauge-potential basis).
//!
//! Time stepping uses the fourth-order commutator-free Magnus scheme with two
//! exponentials per step, each applied by a scaled Taylor series. The step
//! count starts at a fixed budget and doubles until two successive results
//! agree.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::PauliSum;

/// Largest dimension handled by dense diagonalisation.
pub const DENSE_EIGEN_MAX_DIM: usize = 1024;

/// Default degeneracy tolerance for ground-space detection.
pub const DEFAULT_TOL_DEG: f64 = 1e-10;

const HERMITIAN_TOL: f64 = 1e-12;

/// Normalised state of `n` qubits, site 0 as most significant bit.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let dim = amps.len();
        if dim == 0 || !dim.is_power_of_two() {
            return Err(Error::InvalidArgument(format!("state length {dim} is not a power of two")));
        }
        Ok(StateVector {
            n: dim.trailing_zeros() as usize,
            amps,
        })
    }

    /// Computational basis state `|k>`.
    pub fn basis(n: usize, k: usize) -> Self {
        let mut amps = vec![Complex64::default(); 1 << n];
        amps[k] = Complex64::new(1.0, 0.0);
        StateVector { n, amps }
    }

    /// `|+>^N`, the ground state of `-Σ σ^x`.
    pub fn uniform_plus(n: usize) -> Self {
        let dim = 1usize << n;
        let a = (dim as f64).sqrt().recip();
        StateVector {
            n,
            amps: vec![Complex64::new(a, 0.0); dim],
        }
    }

    pub fn n_sites(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        norm(&self.amps)
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        check_dim(self.dim(), other.dim())?;
        Ok(dot(&self.amps, &other.amps))
    }

    pub fn normalized(mut self) -> Result<Self> {
        let nrm = self.norm();
        if nrm == 0.0 || !nrm.is_finite() {
            return Err(Error::InvalidArgument("cannot normalise a zero state".into()));
        }
        for a in &mut self.amps {
            *a /= nrm;
        }
        Ok(self)
    }

    /// Rotate the global phase so the first non-negligible amplitude is real positive.
    pub fn fix_phase(&mut self) {
        if let Some(a) = self.amps.iter().find(|a| a.norm() > 1e-12) {
            let ph = a.conj() / a.norm();
            for x in &mut self.amps {
                *x *= ph;
            }
        }
    }
}

fn check_dim(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::LengthMismatch { left: a, right: b });
    }
    Ok(())
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// `|<φ|ψ>|²`.
pub fn fidelity(psi: &StateVector, phi: &StateVector) -> Result<f64> {
    Ok(phi.inner(psi)?.norm_sqr())
}

/// `Σ_i |<φ_i|ψ>|²` over an orthonormal subspace.
pub fn subspace_fidelity(psi: &StateVector, space: &[StateVector]) -> Result<f64> {
    let mut acc = 0.0;
    for phi in space {
        acc += fidelity(psi, phi)?;
    }
    Ok(acc)
}

/// One operator in X-mask grouped form.
#[derive(Debug, Clone)]
pub struct CompiledOperator {
    n: usize,
    xmasks: Vec<u64>,
    diags: Vec<Vec<Complex64>>,
    norm_bound: f64,
}

fn diagonal_of(n: usize, x: u64, terms: &[(u64, Complex64)]) -> Vec<Complex64> {
    let dim = 1usize << n;
    let mut d = vec![Complex64::default(); dim];
    for &(z, coeff) in terms {
        let base = crate::pauli::Phase::from_power((x & z).count_ones() as i64).apply(coeff);
        for (c, slot) in d.iter_mut().enumerate() {
            let b = c as u64 ^ x;
            if (z & b).count_ones() % 2 == 0 {
                *slot += base;
            } else {
                *slot -= base;
            }
        }
    }
    d
}

fn group_terms(op: &PauliSum) -> BTreeMap<u64, Vec<(u64, Complex64)>> {
    let mut groups: BTreeMap<u64, Vec<(u64, Complex64)>> = BTreeMap::new();
    for (p, c) in op.iter() {
        groups.entry(p.x_mask()).or_default().push((p.z_mask(), *c));
    }
    groups
}

fn check_size(n: usize) -> Result<()> {
    if n > crate::pauli::DEFAULT_DENSE_CAP {
        return Err(Error::DimensionCap {
            n,
            cap: crate::pauli::DEFAULT_DENSE_CAP,
        });
    }
    Ok(())
}

impl CompiledOperator {
    pub fn new(op: &PauliSum) -> Result<Self> {
        let n = op.n_sites();
        check_size(n)?;
        let mut xmasks = Vec::new();
        let mut diags = Vec::new();
        for (x, terms) in group_terms(op) {
            xmasks.push(x);
            diags.push(diagonal_of(n, x, &terms));
        }
        let mut out = CompiledOperator {
            n,
            xmasks,
            diags,
            norm_bound: 0.0,
        };
        out.refresh_bound();
        Ok(out)
    }

    fn refresh_bound(&mut self) {
        self.norm_bound = self
            .diags
            .iter()
            .map(|d| d.iter().fold(0.0f64, |m, v| m.max(v.norm())))
            .sum();
    }

    pub fn n_sites(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    /// Upper bound on the spectral norm.
    pub fn norm_bound(&self) -> f64 {
        self.norm_bound
    }

    /// `out = H psi`.
    pub fn apply_into(&self, psi: &[Complex64], out: &mut [Complex64]) {
        out.iter_mut().for_each(|o| *o = Complex64::default());
        for (x, d) in self.xmasks.iter().zip(&self.diags) {
            let x = *x as usize;
            if x == 0 {
                for ((o, dv), p) in out.iter_mut().zip(d).zip(psi) {
                    *o += dv * p;
                }
            } else {
                for (c, (o, dv)) in out.iter_mut().zip(d).enumerate() {
                    *o += dv * psi[c ^ x];
                }
            }
        }
    }

    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        check_dim(self.dim(), psi.dim())?;
        let mut out = vec![Complex64::default(); self.dim()];
        self.apply_into(&psi.amps, &mut out);
        Ok(StateVector { n: psi.n, amps: out })
    }

    /// `<ψ|H|ψ>` (real part).
    pub fn expectation(&self, psi: &StateVector) -> Result<f64> {
        Ok(psi.inner(&self.apply(psi)?)?.re)
    }
}

/// Several operators on a shared X-mask grouping, mixed by weights.
#[derive(Debug, Clone)]
pub struct OperatorFamily {
    n: usize,
    xmasks: Vec<u64>,
    /// `parts[g]`: (component index, diagonal) pairs present in group `g`.
    parts: Vec<Vec<(usize, Vec<Complex64>)>>,
    /// Largest diagonal magnitude of each part.
    part_max: Vec<Vec<f64>>,
    n_components: usize,
}

impl OperatorFamily {
    pub fn new(components: &[PauliSum]) -> Result<Self> {
        let n = components
            .first()
            .ok_or_else(|| Error::InvalidArgument("operator family is empty".into()))?
            .n_sites();
        check_size(n)?;
        let mut by_mask: BTreeMap<u64, Vec<(usize, Vec<Complex64>)>> = BTreeMap::new();
        for (k, op) in components.iter().enumerate() {
            check_dim(n, op.n_sites())?;
            for (x, terms) in group_terms(op) {
                by_mask.entry(x).or_default().push((k, diagonal_of(n, x, &terms)));
            }
        }
        let (xmasks, parts): (Vec<u64>, Vec<Vec<(usize, Vec<Complex64>)>>) = by_mask.into_iter().unzip();
        let part_max = parts
            .iter()
            .map(|g| g.iter().map(|(_, d)| d.iter().fold(0.0f64, |m, v| m.max(v.norm()))).collect())
            .collect();
        Ok(OperatorFamily {
            n,
            xmasks,
            parts,
            part_max,
            n_components: components.len(),
        })
    }

    pub fn n_components(&self) -> usize {
        self.n_components
    }

    pub fn n_sites(&self) -> usize {
        self.n
    }

    /// `Σ_k w_k H_k` as a single compiled operator.
    pub fn combine(&self, weights: &[f64]) -> Result<CompiledOperator> {
        let mut out = CompiledOperator {
            n: self.n,
            xmasks: Vec::with_capacity(self.xmasks.len()),
            diags: Vec::with_capacity(self.xmasks.len()),
            norm_bound: 0.0,
        };
        self.combine_into(weights, &mut out)?;
        Ok(out)
    }

    fn combine_into(&self, weights: &[f64], out: &mut CompiledOperator) -> Result<()> {
        check_dim(self.n_components, weights.len())?;
        let dim = 1usize << self.n;
        out.xmasks.clear();
        let mut spare = std::mem::take(&mut out.diags);
        let mut bound = 0.0;
        for ((x, parts), maxes) in self.xmasks.iter().zip(&self.parts).zip(&self.part_max) {
            let active: Vec<_> = parts.iter().filter(|(k, _)| weights[*k] != 0.0).collect();
            if active.is_empty() {
                continue;
            }
            bound += parts.iter().zip(maxes).map(|((k, _), m)| weights[*k].abs() * m).sum::<f64>();
            let mut d = spare.pop().unwrap_or_else(|| vec![Complex64::default(); dim]);
            let (k0, d0) = active[0];
            let w0 = weights[*k0];
            for (slot, v) in d.iter_mut().zip(d0) {
                *slot = v * w0;
            }
            for (k, dk) in &active[1..] {
                let w = weights[*k];
                for (slot, v) in d.iter_mut().zip(dk) {
                    *slot += v * w;
                }
            }
            out.xmasks.push(*x);
            out.diags.push(d);
        }
        out.norm_bound = bound;
        Ok(())
    }
}

/// Time-dependent weights of an [`OperatorFamily`].
pub trait Drive {
    fn n_components(&self) -> usize;
    fn weights(&self, t: f64, out: &mut [f64]) -> Result<()>;
}

/// A [`Drive`] from a closure.
pub struct FnDrive<F> {
    n: usize,
    f: F,
}

impl<F: Fn(f64, &mut [f64]) -> Result<()>> FnDrive<F> {
    pub fn new(n_components: usize, f: F) -> Self {
        FnDrive { n: n_components, f }
    }
}

impl<F: Fn(f64, &mut [f64]) -> Result<()>> Drive for FnDrive<F> {
    fn n_components(&self) -> usize {
        self.n
    }
    fn weights(&self, t: f64, out: &mut [f64]) -> Result<()> {
        (self.f)(t, out)
    }
}

/// `exp(-i dt H) ψ` in place by a substepped Taylor series.
fn expmv(op: &CompiledOperator, dt: f64, psi: &mut [Complex64], term: &mut Vec<Complex64>, next: &mut Vec<Complex64>) {
    let theta = op.norm_bound * dt.abs();
    if theta == 0.0 {
        return;
    }
    let substeps = (theta / 0.5).ceil().max(1.0) as usize;
    let h = dt / substeps as f64;
    for _ in 0..substeps {
        term.clear();
        term.extend_from_slice(psi);
        let scale = norm(psi);
        for k in 1..=60 {
            op.apply_into(term, next);
            let f = Complex64::new(0.0, -h / k as f64);
            let mut size = 0.0;
            for (t, n) in term.iter_mut().zip(next.iter()) {
                *t = n * f;
                size += t.norm_sqr();
            }
            for (p, t) in psi.iter_mut().zip(term.iter()) {
                *p += t;
            }
            if size.sqrt() <= 1e-17 * scale {
                break;
            }
        }
    }
}

const CF4_A1: f64 = (3.0 - 2.0 * 1.732_050_807_568_877_2) / 12.0;
const CF4_A2: f64 = (3.0 + 2.0 * 1.732_050_807_568_877_2) / 12.0;
const CF4_C1: f64 = 0.5 - 1.732_050_807_568_877_2 / 6.0;
const CF4_C2: f64 = 0.5 + 1.732_050_807_568_877_2 / 6.0;

/// Evolution with a fixed number of uniform steps.
///
/// `observer` sees `(t, ψ(t))` at every step boundary, including both ends.
pub fn evolve_fixed<D, O>(
    family: &OperatorFamily,
    drive: &D,
    psi0: &StateVector,
    tau: f64,
    steps: usize,
    mut observer: O,
) -> Result<StateVector>
where
    D: Drive + ?Sized,
    O: FnMut(f64, &StateVector) -> Result<()>,
{
    check_dim(family.n_components(), drive.n_components())?;
    check_dim(1 << family.n_sites(), psi0.dim())?;
    if steps == 0 || !(tau > 0.0) {
        return Err(Error::InvalidArgument("evolution needs tau > 0 and at least one step".into()));
    }
    let nc = family.n_components();
    let dt = tau / steps as f64;
    let mut state = psi0.clone();
    let (mut w1, mut w2, mut mix) = (vec![0.0; nc], vec![0.0; nc], vec![0.0; nc]);
    let mut op = family.combine(&vec![0.0; nc])?;
    let (mut term, mut next) = (Vec::new(), vec![Complex64::default(); state.dim()]);
    observer(0.0, &state)?;
    for s in 0..steps {
        let t0 = s as f64 * dt;
        drive.weights(t0 + CF4_C1 * dt, &mut w1)?;
        drive.weights((t0 + CF4_C2 * dt).min(tau), &mut w2)?;
        for k in 0..nc {
            mix[k] = CF4_A2 * w1[k] + CF4_A1 * w2[k];
        }
        family.combine_into(&mix, &mut op)?;
        expmv(&op, dt, &mut state.amps, &mut term, &mut next);
        for k in 0..nc {
            mix[k] = CF4_A1 * w1[k] + CF4_A2 * w2[k];
        }
        family.combine_into(&mix, &mut op)?;
        expmv(&op, dt, &mut state.amps, &mut term, &mut next);
        let t1 = if s + 1 == steps { tau } else { (s + 1) as f64 * dt };
        observer(t1, &state)?;
    }
    Ok(state)
}

/// Step-refinement controls for [`evolve`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveOptions {
    pub initial_steps: usize,
    /// Bound on `2 ‖ψ_n - ψ_2n‖`, which bounds the change of any fidelity.
    pub tol: f64,
    pub max_refinements: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            initial_steps: 1000,
            tol: 1e-8,
            max_refinements: 8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Evolution {
    pub state: StateVector,
    pub steps: usize,
    /// `2 ‖ψ_n - ψ_2n‖` of the final refinement.
    pub change: f64,
    pub norm_drift: f64,
}

/// Evolve over `[0, τ]`, doubling the step count until two runs agree.
pub fn evolve<D: Drive + ?Sized>(
    family: &OperatorFamily,
    drive: &D,
    psi0: &StateVector,
    tau: f64,
    opts: &EvolveOptions,
) -> Result<Evolution> {
    let mut steps = opts.initial_steps.max(1);
    let mut coarse = evolve_fixed(family, drive, psi0, tau, steps, |_, _| Ok(()))?;
    let mut change = f64::INFINITY;
    for _ in 0..opts.max_refinements {
        steps *= 2;
        let fine = evolve_fixed(family, drive, psi0, tau, steps, |_, _| Ok(()))?;
        let diff: f64 = coarse
            .amps
            .iter()
            .zip(&fine.amps)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        change = 2.0 * diff;
        if !change.is_finite() {
            break;
        }
        if change < opts.tol {
            let norm_drift = (fine.norm() - psi0.norm()).abs();
            return Ok(Evolution {
                state: fine,
                steps,
                change,
                norm_drift,
            });
        }
        coarse = fine;
    }
    Err(Error::NonConvergence {
        refinements: opts.max_refinements,
        delta: change,
        steps,
    })
}

/// Extremes and ground space of a Hermitian operator.
#[derive(Debug, Clone)]
pub struct SpectralSummary {
    pub e_min: f64,
    pub e_max: f64,
    pub ground: StateVector,
    /// `E_1 - E_0`, counting multiplicity.
    pub gap: f64,
    pub degeneracy_flag: bool,
    /// Orthonormal eigenvectors with energy within `tol_deg` of `E_0`.
    pub ground_space: Vec<StateVector>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EigenMethod {
    /// Dense up to [`DENSE_EIGEN_MAX_DIM`], Lanczos above.
    #[default]
    Auto,
    Dense,
    Lanczos,
}

pub fn diagonalize(h: &PauliSum, tol_deg: f64) -> Result<SpectralSummary> {
    diagonalize_with(h, tol_deg, EigenMethod::Auto)
}

pub fn diagonalize_with(h: &PauliSum, tol_deg: f64, method: EigenMethod) -> Result<SpectralSummary> {
    let imag = h.max_imag();
    if imag > HERMITIAN_TOL {
        return Err(Error::NotHermitian { imag });
    }
    let n = h.n_sites();
    check_size(n)?;
    let dense = match method {
        EigenMethod::Auto => (1usize << n) <= DENSE_EIGEN_MAX_DIM,
        EigenMethod::Dense => true,
        EigenMethod::Lanczos => false,
    };
    if dense {
        dense_spectrum(h, tol_deg)
    } else {
        lanczos_spectrum(&CompiledOperator::new(h)?, tol_deg)
    }
}

fn summary(n: usize, mut levels: Vec<(f64, Vec<Complex64>)>, e_max: f64, second: f64, tol_deg: f64) -> SpectralSummary {
    let e_min = levels[0].0;
    let mut space: Vec<StateVector> = levels
        .drain(..)
        .filter(|(e, _)| e - e_min <= tol_deg)
        .map(|(_, v)| StateVector { n, amps: v })
        .collect();
    for s in &mut space {
        s.fix_phase();
    }
    let gap = (second - e_min).max(0.0);
    SpectralSummary {
        e_min,
        e_max,
        ground: space[0].clone(),
        gap,
        degeneracy_flag: gap < tol_deg,
        ground_space: space,
    }
}

fn dense_spectrum(h: &PauliSum, tol_deg: f64) -> Result<SpectralSummary> {
    let n = h.n_sites();
    let m = h.to_matrix_capped(crate::pauli::DEFAULT_DENSE_CAP)?;
    let dim = m.nrows();
    let is_real = m.iter().all(|c| c.im == 0.0);
    let (values, vectors): (Vec<f64>, Vec<Vec<Complex64>>) = if is_real {
        let eig = SymmetricEigen::try_new(m.map(|c| c.re), f64::EPSILON, 0)
            .ok_or_else(|| Error::Eigen("dense eigensolver did not converge".into()))?;
        let vecs = (0..dim)
            .map(|k| eig.eigenvectors.column(k).iter().map(|&x| Complex64::new(x, 0.0)).collect())
            .collect();
        (eig.eigenvalues.iter().copied().collect(), vecs)
    } else {
        let eig = SymmetricEigen::try_new(m, f64::EPSILON, 0)
            .ok_or_else(|| Error::Eigen("dense eigensolver did not converge".into()))?;
        let vecs = (0..dim).map(|k| eig.eigenvectors.column(k).iter().copied().collect()).collect();
        (eig.eigenvalues.iter().copied().collect(), vecs)
    };
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let e_max = values[order[dim - 1]];
    let second = if dim > 1 { values[order[1]] } else { values[order[0]] };
    let levels = order.iter().map(|&k| (values[k], vectors[k].clone())).collect();
    Ok(summary(n, levels, e_max, second, tol_deg))
}

/// Lanczos with full reorthogonalisation, deflated against `locked`.
///
/// Returns the lowest and highest Ritz pairs once both residuals are below
/// `tol`, or after the Krylov space is exhausted.
fn lanczos(
    op: &CompiledOperator,
    locked: &[Vec<Complex64>],
    seed: u64,
    tol: f64,
) -> Result<((f64, Vec<Complex64>), f64)> {
    let dim = op.dim();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let project = |v: &mut Vec<Complex64>, basis: &[Vec<Complex64>]| {
        for _ in 0..2 {
            for b in basis {
                let c = dot(b, v);
                for (x, y) in v.iter_mut().zip(b) {
                    *x -= c * y;
                }
            }
        }
    };
    let mut v: Vec<Complex64> = (0..dim).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    project(&mut v, locked);
    let room = dim - locked.len();
    let nv = norm(&v);
    let inv = nv.recip();
    v.iter_mut().for_each(|x| *x *= inv);

    let mut basis: Vec<Vec<Complex64>> = vec![v];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut w = vec![Complex64::default(); dim];
    loop {
        let j = basis.len() - 1;
        op.apply_into(&basis[j], &mut w);
        let a = dot(&basis[j], &w).re;
        alphas.push(a);
        project(&mut w, locked);
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &w);
                for (x, y) in w.iter_mut().zip(b) {
                    *x -= c * y;
                }
            }
        }
        let beta = norm(&w);
        let k = alphas.len();
        let exhausted = k >= room || beta <= 1e-14 * op.norm_bound().max(1e-300);
        if exhausted || k % 10 == 0 {
            let t = DMatrix::from_fn(k, k, |r, c| {
                if r == c {
                    alphas[r]
                } else if r + 1 == c {
                    betas[r]
                } else if c + 1 == r {
                    betas[c]
                } else {
                    0.0
                }
            });
            let eig = SymmetricEigen::new(t);
            let lo = eig.eigenvalues.imin();
            let hi = eig.eigenvalues.imax();
            let res_lo = (beta * eig.eigenvectors[(k - 1, lo)]).abs();
            let res_hi = (beta * eig.eigenvectors[(k - 1, hi)]).abs();
            if exhausted || (res_lo < tol && res_hi < tol) {
                let s = eig.eigenvectors.column(lo);
                let mut x = vec![Complex64::default(); dim];
                for (coef, b) in s.iter().zip(&basis) {
                    for (xi, bi) in x.iter_mut().zip(b) {
                        *xi += bi * *coef;
                    }
                }
                project(&mut x, locked);
                let nx = norm(&x);
                x.iter_mut().for_each(|xi| *xi /= nx);
                return Ok(((eig.eigenvalues[lo], x), eig.eigenvalues[hi]));
            }
        }
        betas.push(beta);
        let inv = beta.recip();
        basis.push(w.iter().map(|x| x * inv).collect());
    }
}

fn lanczos_spectrum(op: &CompiledOperator, tol_deg: f64) -> Result<SpectralSummary> {
    let dim = op.dim();
    let tol = 1e-12 * op.norm_bound().max(1.0);
    let ((e0, v0), e_max) = lanczos(op, &[], 0x5eed, tol)?;
    let mut levels = vec![(e0, v0)];
    let mut next = e0;
    while levels.len() < dim {
        let locked: Vec<Vec<Complex64>> = levels.iter().map(|(_, v)| v.clone()).collect();
        let ((e, v), _) = lanczos(op, &locked, 0x5eed + levels.len() as u64, tol)?;
        next = e;
        if e - e0 > tol_deg {
            break;
        }
        levels.push((e, v));
    }
    let second = levels.get(1).map_or(next, |l| l.0);
    Ok(summary(op.n_sites(), levels, e_max.max(e0), second, tol_deg))
}

/// `(⟨H⟩ - E_min) / (E_max - E_min)`.
pub fn normalized_energy(psi: &StateVector, h_final: &CompiledOperator, spec: &SpectralSummary) -> Result<f64> {
    let width = spec.e_max - spec.e_min;
    if width <= 0.0 {
        return Err(Error::ZeroWidthSpectrum(spec.e_min));
    }
    let e = h_final.expectation(psi)?;
    Ok((e - spec.e_min) / width)
}

/// `<ψ|H|ψ>` for an uncompiled operator.
pub fn expectation(h: &PauliSum, psi: &StateVector) -> Result<f64> {
    CompiledOperator::new(h)?.expectation(psi)
}

/// Dense vector view, convenient for oracle tests.
pub fn to_dvector(psi: &StateVector) -> DVector<Complex64> {
    DVector::from_column_slice(&psi.amps)
}
