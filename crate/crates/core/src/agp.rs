//! Variational adiabatic gauge potential.
//!
//! With `H_β = H_i + λ D + f O` (`D = H_f - H_i`, `O` the control operator)
//! and an ansatz `A = Σ_j α_j O_j`, the action
//!
//! ```text
//! S(α) = Tr[G²],   G = ∂_t H_β + i[A, H_β]
//! ```
//!
//! is quadratic in `α`. Every commutator `C_j = i[O_j, H_β]` is affine in
//! `(λ, f)`, so the Gram matrix `M_jk = Tr[C_j C_k]` and the drive vector
//! `b_j = Tr[C_j ∂_t H_β]` are low-degree polynomials whose coefficients are
//! computed once. Each time point then costs a few scalar evaluations and an
//! `m × m` solve of `M α = -b`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::models::ScheduleContext;
use crate::pauli::{commutator, trace_pair, PauliSum};

/// Coefficients of `c0 + c1 λ + c2 f + c3 λ² + c4 λ f + c5 f²`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Poly2(pub [f64; 6]);

impl Poly2 {
    pub fn eval(&self, lambda: f64, f: f64) -> f64 {
        let c = &self.0;
        c[0] + lambda * (c[1] + c[3] * lambda + c[4] * f) + f * (c[2] + c[5] * f)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0.0)
    }
}

/// `λ̇ (p0 + p1 λ + p2 f) + ḟ (q0 + q1 λ + q2 f)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RhsPoly {
    pub lambda_dot: [f64; 3],
    pub f_dot: [f64; 3],
}

impl RhsPoly {
    pub fn eval(&self, ctx: &ScheduleContext) -> f64 {
        let aff = |c: &[f64; 3]| c[0] + c[1] * ctx.lambda + c[2] * ctx.f;
        ctx.lambda_dot * aff(&self.lambda_dot) + ctx.f_dot * aff(&self.f_dot)
    }
}

/// Commutator and trace tables for one (Hamiltonian family, ansatz) pair.
#[derive(Debug, Clone)]
pub struct AgpStructure {
    n_sites: usize,
    basis: Vec<PauliSum>,
    c_const: Vec<PauliSum>,
    c_lambda: Vec<PauliSum>,
    c_fctrl: Vec<PauliSum>,
    gram: Vec<Poly2>,
    rhs: Vec<RhsPoly>,
    /// `Tr[D²]`, `Tr[D O]`, `Tr[O²]`.
    drive_traces: [f64; 3],
    inert: Vec<bool>,
    /// Orthonormal basis of the coefficient directions that move some `C_j`;
    /// `None` when the commutators are linearly independent.
    range: Option<DMatrix<f64>>,
}

fn real_trace(a: &PauliSum, b: &PauliSum) -> Result<f64> {
    Ok(trace_pair(a, b)?.re)
}

fn i_commutator(a: &PauliSum, b: &PauliSum) -> Result<PauliSum> {
    let c = commutator(a, b)?;
    let mut out = PauliSum::new(a.n_sites());
    out.add_scaled(&c, Complex64::i())?;
    Ok(out)
}

impl AgpStructure {
    /// Decompose the action for `H_β = h_i + λ (h_f - h_i) + f o_opt`.
    pub fn build(h_i: &PauliSum, h_f: &PauliSum, o_opt: &PauliSum, basis: &[PauliSum]) -> Result<Self> {
        let n = h_i.n_sites();
        for op in [h_f, o_opt].into_iter().chain(basis.iter()) {
            if op.n_sites() != n {
                return Err(Error::LengthMismatch {
                    left: n,
                    right: op.n_sites(),
                });
            }
        }
        if basis.is_empty() {
            return Err(Error::InvalidArgument("ansatz basis is empty".into()));
        }
        let mut d = h_f.clone();
        d.add_scaled_real(h_i, -1.0)?;

        let m = basis.len();
        let mut c_const = Vec::with_capacity(m);
        let mut c_lambda = Vec::with_capacity(m);
        let mut c_fctrl = Vec::with_capacity(m);
        for op in basis {
            c_const.push(i_commutator(op, h_i)?);
            c_lambda.push(i_commutator(op, &d)?);
            c_fctrl.push(i_commutator(op, o_opt)?);
        }

        let mut gram = vec![Poly2::default(); m * m];
        for j in 0..m {
            for k in j..m {
                let t = |a: &PauliSum, b: &PauliSum| real_trace(a, b);
                let (a0, al, af) = (&c_const[j], &c_lambda[j], &c_fctrl[j]);
                let (b0, bl, bf) = (&c_const[k], &c_lambda[k], &c_fctrl[k]);
                let p = Poly2([
                    t(a0, b0)?,
                    t(a0, bl)? + t(al, b0)?,
                    t(a0, bf)? + t(af, b0)?,
                    t(al, bl)?,
                    t(al, bf)? + t(af, bl)?,
                    t(af, bf)?,
                ]);
                gram[j * m + k] = p;
                gram[k * m + j] = p;
            }
        }

        let mut rhs = Vec::with_capacity(m);
        for j in 0..m {
            rhs.push(RhsPoly {
                lambda_dot: [
                    real_trace(&d, &c_const[j])?,
                    real_trace(&d, &c_lambda[j])?,
                    real_trace(&d, &c_fctrl[j])?,
                ],
                f_dot: [
                    real_trace(o_opt, &c_const[j])?,
                    real_trace(o_opt, &c_lambda[j])?,
                    real_trace(o_opt, &c_fctrl[j])?,
                ],
            });
        }

        let drive_traces = [real_trace(&d, &d)?, real_trace(&d, o_opt)?, real_trace(o_opt, o_opt)?];
        let inert = (0..m)
            .map(|j| c_const[j].is_empty() && c_lambda[j].is_empty() && c_fctrl[j].is_empty())
            .collect::<Vec<_>>();
        for (j, flag) in inert.iter().enumerate() {
            if *flag {
                log::warn!("ansatz element {j} commutes with every H_beta; its coefficient is pinned to 0");
            }
        }

        let range = commutator_range(&gram, m);
        if let Some(q) = &range {
            log::info!("ansatz commutators span {} of {m} directions; solving in the reduced space", q.ncols());
        }

        Ok(AgpStructure {
            n_sites: n,
            basis: basis.to_vec(),
            c_const,
            c_lambda,
            c_fctrl,
            gram,
            rhs,
            drive_traces,
            inert,
            range,
        })
    }

    pub fn basis_size(&self) -> usize {
        self.basis.len()
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn basis(&self) -> &[PauliSum] {
        &self.basis
    }

    /// `(c_const_j, c_lambda_j, c_fctrl_j)` with `C_j = c_const + λ c_lambda + f c_fctrl`.
    pub fn commutator_parts(&self, j: usize) -> (&PauliSum, &PauliSum, &PauliSum) {
        (&self.c_const[j], &self.c_lambda[j], &self.c_fctrl[j])
    }

    pub fn gram_poly(&self, j: usize, k: usize) -> Poly2 {
        self.gram[j * self.basis_size() + k]
    }

    pub fn rhs_poly(&self, j: usize) -> RhsPoly {
        self.rhs[j]
    }

    pub fn drive_traces(&self) -> [f64; 3] {
        self.drive_traces
    }

    /// Basis elements that commute with the whole `H_β` family.
    pub fn inert(&self) -> &[bool] {
        &self.inert
    }

    pub fn gram(&self, lambda: f64, f: f64) -> DMatrix<f64> {
        let m = self.basis_size();
        DMatrix::from_fn(m, m, |j, k| self.gram[j * m + k].eval(lambda, f))
    }

    pub fn rhs(&self, ctx: &ScheduleContext) -> DVector<f64> {
        DVector::from_iterator(self.basis_size(), self.rhs.iter().map(|r| r.eval(ctx)))
    }

    /// `Tr[(∂_t H_β)²]`.
    pub fn drive_norm2(&self, ctx: &ScheduleContext) -> f64 {
        let [dd, dopt, oo] = self.drive_traces;
        ctx.lambda_dot * ctx.lambda_dot * dd + 2.0 * ctx.lambda_dot * ctx.f_dot * dopt + ctx.f_dot * ctx.f_dot * oo
    }

    /// Minimiser of the action; `reg = None` picks `1e-12 · tr(M) / m`.
    pub fn solve_alpha(&self, ctx: &ScheduleContext, reg: Option<f64>) -> Result<DVector<f64>> {
        let m = self.gram(ctx.lambda, ctx.f);
        let b = self.rhs(ctx);
        let dim = self.basis_size();
        let reg = match reg {
            Some(r) if r < 0.0 || !r.is_finite() => {
                return Err(Error::InvalidArgument(format!("regularisation must be >= 0, got {r}")))
            }
            Some(r) => r,
            None => default_regularization(&m),
        };
        if b.iter().all(|&x| x == 0.0) {
            return Ok(DVector::zeros(dim));
        }
        match &self.range {
            None => regularized_solve(m, &-b, reg),
            Some(q) => Ok(q * regularized_solve(q.transpose() * m * q, &-(q.transpose() * b), reg)?),
        }
    }

    /// `S(α) = Tr[(∂_t H + Σ α_j C_j)²]`.
    pub fn action_value(&self, ctx: &ScheduleContext, alpha: &DVector<f64>) -> Result<f64> {
        self.check_dim(alpha)?;
        let m = self.gram(ctx.lambda, ctx.f);
        let b = self.rhs(ctx);
        Ok(self.drive_norm2(ctx) + 2.0 * alpha.dot(&b) + (alpha.transpose() * &m * alpha)[(0, 0)])
    }

    /// `∂S/∂α = 2 (M α + b)`.
    pub fn action_gradient(&self, ctx: &ScheduleContext, alpha: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(alpha)?;
        Ok((self.gram(ctx.lambda, ctx.f) * alpha + self.rhs(ctx)) * 2.0)
    }

    /// `A = Σ_j α_j O_j`.
    pub fn cd_term(&self, alpha: &DVector<f64>) -> Result<PauliSum> {
        self.check_dim(alpha)?;
        let mut out = PauliSum::new(self.n_sites);
        for (a, op) in alpha.iter().zip(&self.basis) {
            if *a != 0.0 {
                out.add_scaled_real(op, *a)?;
            }
        }
        Ok(out)
    }

    fn check_dim(&self, alpha: &DVector<f64>) -> Result<()> {
        if alpha.len() != self.basis_size() {
            return Err(Error::LengthMismatch {
                left: self.basis_size(),
                right: alpha.len(),
            });
        }
        Ok(())
    }
}

/// Free-function form of [`AgpStructure::build`].
pub fn build_structure(h_i: &PauliSum, h_f: &PauliSum, o_opt: &PauliSum, basis: &[PauliSum]) -> Result<AgpStructure> {
    AgpStructure::build(h_i, h_f, o_opt, basis)
}

pub fn default_regularization(m: &DMatrix<f64>) -> f64 {
    1e-12 * m.trace().max(0.0) / m.nrows() as f64
}

/// Directions `v` with `Σ v_j C_j = 0` for every `(λ, f)` are the common null
/// space of the three coefficient Gram matrices. Dropping them up front keeps
/// roundoff in those directions from being amplified by `1 / reg`.
fn commutator_range(gram: &[Poly2], m: usize) -> Option<DMatrix<f64>> {
    let k = DMatrix::from_fn(m, m, |j, l| {
        let c = &gram[j * m + l].0;
        c[0] + c[3] + c[5]
    });
    let eig = k.symmetric_eigen();
    let scale = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let keep: Vec<usize> = (0..m).filter(|&i| eig.eigenvalues[i] > 1e-10 * scale).collect();
    if keep.len() == m || keep.is_empty() {
        return None;
    }
    Some(eig.eigenvectors.select_columns(&keep))
}

fn regularized_solve(mut m: DMatrix<f64>, rhs: &DVector<f64>, reg: f64) -> Result<DVector<f64>> {
    if reg > 0.0 {
        for j in 0..m.nrows() {
            m[(j, j)] += reg;
        }
        if let Some(ch) = m.clone().cholesky() {
            return Ok(ch.solve(rhs));
        }
    }
    min_norm_solve(m, rhs)
}

fn min_norm_solve(m: DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let eig = m.symmetric_eigen();
    let scale = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let cutoff = scale * 1e-12 * eig.eigenvalues.len() as f64;
    let mut out = DVector::zeros(rhs.len());
    for (k, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev.abs() > cutoff && ev.abs() > 0.0 {
            let v = eig.eigenvectors.column(k);
            out += v * (v.dot(rhs) / ev);
        }
    }
    if out.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("gauge-potential solve produced non-finite values".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{
        ansatz_basis, build_final_hamiltonian, build_initial_hamiltonian, control_operators, AnsatzKind, Boundary,
        Family, ModelSpec,
    };
    use crate::pauli::{Pauli, PauliString};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    type CMat = DMatrix<Complex64>;

    fn ctx(lambda: f64, lambda_dot: f64, f: f64, f_dot: f64) -> ScheduleContext {
        ScheduleContext {
            t: 0.0,
            lambda,
            lambda_dot,
            f,
            f_dot,
        }
    }

    fn dense(p: &PauliSum) -> CMat {
        p.to_matrix().unwrap()
    }

    fn tr(a: &CMat) -> f64 {
        a.trace().re
    }

    /// Dense `S(α)` for the operator family, independent of the tables.
    fn dense_action(
        hi: &CMat,
        hf: &CMat,
        o: &CMat,
        basis: &[CMat],
        c: &ScheduleContext,
        alpha: &[f64],
    ) -> f64 {
        let d = hf - hi;
        let h = hi + &d * Complex64::from(c.lambda) + o * Complex64::from(c.f);
        let dh = &d * Complex64::from(c.lambda_dot) + o * Complex64::from(c.f_dot);
        let mut a = CMat::zeros(hi.nrows(), hi.ncols());
        for (w, op) in alpha.iter().zip(basis) {
            a += op * Complex64::from(*w);
        }
        let g = dh + (&a * &h - &h * &a) * Complex64::i();
        tr(&(&g * &g))
    }

    /// Recover the quadratic form from dense action samples and minimise it.
    fn dense_alpha(hi: &CMat, hf: &CMat, o: &CMat, basis: &[CMat], c: &ScheduleContext) -> DVector<f64> {
        let m = basis.len();
        let s = |a: &[f64]| dense_action(hi, hf, o, basis, c, a);
        let s0 = s(&vec![0.0; m]);
        let unit = |j: usize| {
            let mut v = vec![0.0; m];
            v[j] = 1.0;
            v
        };
        let mut q = DMatrix::zeros(m, m);
        let mut lin = DVector::zeros(m);
        for j in 0..m {
            let mut minus = vec![0.0; m];
            minus[j] = -1.0;
            let (sp, sm) = (s(&unit(j)), s(&minus));
            q[(j, j)] = (sp + sm - 2.0 * s0) / 2.0;
            lin[j] = (sp - sm) / 4.0;
        }
        for j in 0..m {
            for k in j + 1..m {
                let mut v = vec![0.0; m];
                v[j] = 1.0;
                v[k] = 1.0;
                let cross = (s(&v) - s0 - 2.0 * lin[j] - 2.0 * lin[k] - q[(j, j)] - q[(k, k)]) / 2.0;
                q[(j, k)] = cross;
                q[(k, j)] = cross;
            }
        }
        let eps = 1e-12 * q.norm();
        let pinv = q.pseudo_inverse(eps).unwrap();
        -(pinv * lin)
    }

    #[test]
    fn two_level_landau_zener() {
        let (a, bz) = (0.7, 1.3);
        let hi = PauliSum::from_real_terms(1, [(a, PauliString::single(1, 0, Pauli::X))]).unwrap();
        let mut hf = hi.clone();
        hf.add_real_term(bz, PauliString::single(1, 0, Pauli::Z)).unwrap();
        let o = PauliSum::new(1);
        let basis = vec![PauliSum::from_real_terms(1, [(1.0, PauliString::single(1, 0, Pauli::Y))]).unwrap()];
        let s = AgpStructure::build(&hi, &hf, &o, &basis).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let (l, ld) = (rng.gen_range(0.0..1.0), rng.gen_range(-5.0..5.0));
            let alpha = s.solve_alpha(&ctx(l, ld, 0.0, 0.0), Some(0.0)).unwrap()[0];
            let exact = -ld * a * bz / (2.0 * (a * a + l * l * bz * bz));
            assert_abs_diff_eq!(alpha, exact, epsilon = 1e-10 * exact.abs().max(1.0));
        }
    }

    #[test]
    fn single_spin_structure_matches_dense() {
        let h = 0.4;
        let hi = build_initial_hamiltonian(1);
        let hf = PauliSum::from_real_terms(1, [(h, PauliString::single(1, 0, Pauli::Z))]).unwrap();
        let basis = vec![PauliSum::from_real_terms(1, [(1.0, PauliString::single(1, 0, Pauli::Y))]).unwrap()];
        let s = AgpStructure::build(&hi, &hf, &PauliSum::new(1), &basis).unwrap();
        let y = dense(&basis[0]);
        for l in [0.0, 0.3, 1.0] {
            let hb = dense(&hi) * Complex64::from(1.0 - l) + dense(&hf) * Complex64::from(l);
            let c = (&y * &hb - &hb * &y) * Complex64::i();
            assert_abs_diff_eq!(s.gram(l, 0.0)[(0, 0)], tr(&(&c * &c)), epsilon = 1e-12);
        }
    }

    #[test]
    fn stationary_needs_no_correction() {
        let spec = ModelSpec::new(Family::Annni, 4, 0.5, 0.5);
        let hi = build_initial_hamiltonian(4);
        let hf = build_final_hamiltonian(&spec).unwrap();
        let o = control_operators(&spec).unwrap();
        let basis = ansatz_basis(AnsatzKind::Next, 4, Boundary::Periodic).unwrap();
        let s = AgpStructure::build(&hi, &hf, &o, &basis).unwrap();
        let alpha = s.solve_alpha(&ctx(0.4, 0.0, 1.2, 0.0), None).unwrap();
        assert!(alpha.iter().all(|&a| a == 0.0));
        assert!(s.cd_term(&alpha).unwrap().is_empty());
    }

    #[test]
    fn no_pulse_leaves_lambda_only_polynomials() {
        let spec = ModelSpec::new(Family::Xxz, 4, 0.5, 0.5);
        let hi = build_initial_hamiltonian(4);
        let hf = build_final_hamiltonian(&spec).unwrap();
        let o = control_operators(&spec).unwrap();
        let basis = ansatz_basis(AnsatzKind::Near, 4, Boundary::Periodic).unwrap();
        let s = AgpStructure::build(&hi, &hf, &o, &basis).unwrap();
        let bare = AgpStructure::build(&hi, &hf, &PauliSum::new(4), &basis).unwrap();
        for l in [0.1, 0.6] {
            assert_eq!(s.gram(l, 0.0), bare.gram(l, 0.0));
            let c = ctx(l, 2.0, 0.0, 0.0);
            assert_eq!(s.rhs(&c), bare.rhs(&c));
        }
    }

    #[test]
    fn difference_basis_matches_direct_commutators() {
        let spec = ModelSpec::new(Family::Annni, 3, 0.3, 0.7);
        let hi = build_initial_hamiltonian(3);
        let hf = build_final_hamiltonian(&spec).unwrap();
        let mut d = hf.clone();
        d.add_scaled_real(&hi, -1.0).unwrap();
        let s = AgpStructure::build(&hi, &hf, &PauliSum::new(3), &[d.clone()]).unwrap();
        let (c0, cl, cf) = s.commutator_parts(0);
        assert!(cl.is_empty());
        assert!(cf.is_empty());
        let (dd, hid) = (dense(&d), dense(&hi));
        let direct = (&dd * &hid - &hid * &dd) * Complex64::i();
        assert!((dense(c0) - direct).norm() < 1e-12);
    }

    #[test]
    fn tables_and_alpha_match_dense_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for family in [Family::Annni, Family::Xxz, Family::Hs] {
            for n in 3..=4 {
                let spec = ModelSpec::new(family, n, rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                let hi = build_initial_hamiltonian(n);
                let hf = build_final_hamiltonian(&spec).unwrap();
                let o = control_operators(&spec).unwrap();
                let (dhi, dhf, dop) = (dense(&hi), dense(&hf), dense(&o));
                for kind in [AnsatzKind::Local, AnsatzKind::Near, AnsatzKind::Next] {
                    let basis = ansatz_basis(kind, n, Boundary::Periodic).unwrap();
                    let dbasis: Vec<CMat> = basis.iter().map(dense).collect();
                    let s = AgpStructure::build(&hi, &hf, &o, &basis).unwrap();
                    for _ in 0..4 {
                        let c = ctx(
                            rng.gen_range(0.0..1.0),
                            rng.gen_range(-3.0..3.0),
                            rng.gen_range(-2.0..2.0),
                            rng.gen_range(-3.0..3.0),
                        );
                        let alpha = s.solve_alpha(&c, Some(0.0)).unwrap();
                        let oracle = dense_alpha(&dhi, &dhf, &dop, &dbasis, &c);
                        let scale = oracle.norm().max(1.0);
                        assert!((&alpha - &oracle).norm() <= 1e-8 * scale, "{family} {kind}: {alpha} vs {oracle}");

                        let trial: Vec<f64> = (0..basis.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                        let sv = s.action_value(&c, &DVector::from_vec(trial.clone())).unwrap();
                        let dv = dense_action(&dhi, &dhf, &dop, &dbasis, &c, &trial);
                        assert_abs_diff_eq!(sv, dv, epsilon = 1e-10 * dv.abs().max(1.0));
                    }
                }
            }
        }
    }

    #[test]
    fn gram_is_symmetric_psd_and_solution_is_optimal() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(29);
        let spec = ModelSpec::new(Family::Hs, 5, 0.8, -0.4);
        let hi = build_initial_hamiltonian(5);
        let hf = build_final_hamiltonian(&spec).unwrap();
        let o = control_operators(&spec).unwrap();
        let basis = ansatz_basis(AnsatzKind::Next, 5, Boundary::Periodic).unwrap();
        let s = AgpStructure::build(&hi, &hf, &o, &basis).unwrap();
        for _ in 0..100 {
            let c = ctx(
                rng.gen_range(0.0..1.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-3.0..3.0),
            );
            let m = s.gram(c.lambda, c.f);
            assert_eq!(m, m.transpose());
            let ev = m.clone().symmetric_eigen().eigenvalues;
            assert!(ev.min() >= -1e-10 * m.norm());

            let alpha = s.solve_alpha(&c, None).unwrap();
            let b = s.rhs(&c);
            let reg = default_regularization(&m);
            assert!((&m * &alpha + &b).norm() <= 1e-8 * (b.norm() + reg) + reg * alpha.norm());
            let grad = s.action_gradient(&c, &alpha).unwrap();
            assert!(grad.norm() <= 1e-8 * b.norm().max(1e-300) * 2.0 + 2.0 * reg * alpha.norm());
            let s_opt = s.action_value(&c, &alpha).unwrap();
            let s_zero = s.action_value(&c, &DVector::zeros(5)).unwrap();
            assert!(s_opt <= s_zero * (1.0 + 1e-12));
            assert!(s_opt >= -1e-9 * s_zero);
            assert_abs_diff_eq!(s_zero, s.drive_norm2(&c), epsilon = 1e-12 * s_zero.max(1.0));
        }
    }

    #[test]
    fn singular_gram_gives_min_norm() {
        let hi = build_initial_hamiltonian(2);
        let hf = build_final_hamiltonian(&ModelSpec::new(Family::Xxz, 2, 1.0, 0.5).with_boundary(Boundary::Open)).unwrap();
        // duplicate element: M has rank one less than its size
        let y = ansatz_basis(AnsatzKind::Local, 2, Boundary::Open).unwrap().remove(0);
        let basis = vec![y.clone(), y];
        let s = AgpStructure::build(&hi, &hf, &PauliSum::new(2), &basis).unwrap();
        let c = ctx(0.3, 1.0, 0.0, 0.0);
        let alpha = s.solve_alpha(&c, Some(0.0)).unwrap();
        assert_abs_diff_eq!(alpha[0], alpha[1], epsilon = 1e-12);
        let single = AgpStructure::build(&hi, &hf, &PauliSum::new(2), &basis[..1]).unwrap();
        let a1 = single.solve_alpha(&c, Some(0.0)).unwrap()[0];
        assert_abs_diff_eq!(alpha[0] + alpha[1], a1, epsilon = 1e-10);
    }

    #[test]
    fn inert_elements_are_flagged() {
        let hi = build_initial_hamiltonian(2);
        let hf = PauliSum::from_real_terms(2, [(1.0, PauliString::from_letters("XX").unwrap())]).unwrap();
        let basis = vec![
            PauliSum::from_real_terms(2, [(1.0, PauliString::from_letters("XI").unwrap())]).unwrap(),
            ansatz_basis(AnsatzKind::Local, 2, Boundary::Open).unwrap().remove(0),
        ];
        let s = AgpStructure::build(&hi, &hf, &PauliSum::new(2), &basis).unwrap();
        assert_eq!(s.inert(), &[true, false]);
        let alpha = s.solve_alpha(&ctx(0.5, 1.0, 0.0, 0.0), None).unwrap();
        assert_eq!(alpha[0], 0.0);
    }

    #[test]
    fn cd_term_is_hermitian_combination() {
        let basis = ansatz_basis(AnsatzKind::Local, 3, Boundary::Open).unwrap();
        let hi = build_initial_hamiltonian(3);
        let hf = build_final_hamiltonian(&ModelSpec::new(Family::Annni, 3, 0.2, 0.2)).unwrap();
        let s = AgpStructure::build(&hi, &hf, &PauliSum::new(3), &basis).unwrap();
        let a = s.cd_term(&DVector::from_vec(vec![0.25])).unwrap();
        assert_eq!(a, basis[0].scaled(0.25));

        let basis = ansatz_basis(AnsatzKind::Next, 4, Boundary::Periodic).unwrap();
        let hi = build_initial_hamiltonian(4);
        let hf = build_final_hamiltonian(&ModelSpec::new(Family::Annni, 4, 0.2, 0.2)).unwrap();
        let s = AgpStructure::build(&hi, &hf, &PauliSum::new(4), &basis).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let alpha = DVector::from_fn(5, |_, _| rng.gen_range(-3.0..3.0));
            let m = s.cd_term(&alpha).unwrap().to_matrix().unwrap();
            assert!((&m - m.adjoint()).norm() < 1e-14);
        }
        assert!(s.cd_term(&DVector::zeros(3)).is_err());
    }
}
