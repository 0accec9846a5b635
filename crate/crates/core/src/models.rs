//! Hamiltonian builders: target models, the transverse-field start point,
//! the annealing schedule, the control pulse and the gauge-potential ansätze.
//!
//! All builders use `ħ = 1` and fix the in-plane coupling to 1. Chains are
//! periodic by default; with that convention the sudden-limit overlaps of the
//! ANNNI reference points reproduce the published annealing fidelities.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{Pauli, PauliString, PauliSum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// Axial next-nearest-neighbour Ising chain; `p1 = k`, `p2 = h`.
    Annni,
    /// XXZ chain; `p1 = Δ`, `p2 = h`.
    Xxz,
    /// Haldane–Shastry ring; `p1 = Δ`, `p2 = h`.
    Hs,
}

impl Family {
    pub fn min_sites(self) -> usize {
        match self {
            Family::Annni => 3,
            Family::Xxz | Family::Hs => 2,
        }
    }

    /// Boundary a fresh [`ModelSpec`] gets: a ring for ANNNI, an open chain otherwise.
    pub fn default_boundary(self) -> Boundary {
        match self {
            Family::Annni => Boundary::Periodic,
            Family::Xxz | Family::Hs => Boundary::Open,
        }
    }

    /// Human names of the two model parameters.
    pub fn parameter_names(self) -> (&'static str, &'static str) {
        match self {
            Family::Annni => ("k", "h"),
            Family::Xxz | Family::Hs => ("delta", "h"),
        }
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "annni" => Ok(Family::Annni),
            "xxz" => Ok(Family::Xxz),
            "hs" | "haldane-shastry" => Ok(Family::Hs),
            other => Err(Error::InvalidModel(format!("unknown family {other:?}"))),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Annni => "annni",
            Family::Xxz => "xxz",
            Family::Hs => "hs",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Open,
    Periodic,
}

impl FromStr for Boundary {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "open" => Ok(Boundary::Open),
            "periodic" => Ok(Boundary::Periodic),
            other => Err(Error::InvalidModel(format!("unknown boundary {other:?}"))),
        }
    }
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Boundary::Open => "open",
            Boundary::Periodic => "periodic",
        })
    }
}

/// Target model: family, size, the two couplings and the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    pub n_sites: usize,
    pub p1: f64,
    pub p2: f64,
    /// Bond geometry. HS couplings always span the whole ring; for HS this only
    /// shapes the control and ansatz sums.
    pub boundary: Boundary,
}

impl ModelSpec {
    pub fn new(family: Family, n_sites: usize, p1: f64, p2: f64) -> Self {
        ModelSpec {
            family,
            n_sites,
            p1,
            p2,
            boundary: family.default_boundary(),
        }
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn with_sites(mut self, n: usize) -> Self {
        self.n_sites = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let min = self.family.min_sites();
        if self.n_sites < min {
            return Err(Error::InvalidModel(format!(
                "{} needs at least {min} sites, got {}",
                self.family, self.n_sites
            )));
        }
        if self.n_sites > crate::pauli::MAX_SITES {
            return Err(Error::InvalidModel(format!("{} sites is too many", self.n_sites)));
        }
        if !self.p1.is_finite() || !self.p2.is_finite() {
            return Err(Error::InvalidModel("non-finite coupling".into()));
        }
        Ok(())
    }
}

/// Control pulse: total time and the sine-series coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveSpec {
    pub tau: f64,
    pub beta: Vec<f64>,
}

impl DriveSpec {
    pub fn new(tau: f64, beta: Vec<f64>) -> Self {
        DriveSpec { tau, beta }
    }

    /// No pulse (`β = 0`) with `n_k` frequencies.
    pub fn unpulsed(tau: f64, n_k: usize) -> Self {
        DriveSpec {
            tau,
            beta: vec![0.0; n_k],
        }
    }

    pub fn n_k(&self) -> usize {
        self.beta.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidArgument(format!("tau must be positive, got {}", self.tau)));
        }
        if self.beta.is_empty() {
            return Err(Error::InvalidArgument("drive needs at least one frequency".into()));
        }
        if self.beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidArgument("non-finite pulse coefficient".into()));
        }
        Ok(())
    }
}

/// Schedule and pulse values at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleContext {
    pub t: f64,
    pub lambda: f64,
    pub lambda_dot: f64,
    pub f: f64,
    pub f_dot: f64,
}

impl ScheduleContext {
    pub fn at(t: f64, drive: &DriveSpec) -> Result<Self> {
        let (lambda, lambda_dot) = schedule(t, drive.tau)?;
        let (f, f_dot) = pulse(t, drive)?;
        Ok(ScheduleContext {
            t,
            lambda,
            lambda_dot,
            f,
            f_dot,
        })
    }
}

fn check_time(t: f64, tau: f64) -> Result<f64> {
    let slack = 1e-12 * tau;
    if !(t >= -slack && t <= tau + slack) || !t.is_finite() {
        return Err(Error::TimeOutOfRange { t, tau });
    }
    Ok(t.clamp(0.0, tau))
}

/// Derivatives of `λ(s) = sin²((π/2) sin²(πs/2))` in the reduced time
/// `s = t/τ`: returns `(λ, dλ/ds, d²λ/ds²)`.
pub fn schedule_reduced(s: f64) -> (f64, f64, f64) {
    let w = (PI * s / 2.0).sin().powi(2);
    let w1 = PI / 2.0 * (PI * s).sin();
    let w2 = PI * PI / 2.0 * (PI * s).cos();
    let lam = (PI * w / 2.0).sin().powi(2);
    let lam1 = PI / 2.0 * (PI * w).sin() * w1;
    let lam2 = PI / 2.0 * (PI * (PI * w).cos() * w1 * w1 + (PI * w).sin() * w2);
    (lam, lam1, lam2)
}

/// Annealing schedule and its time derivative.
pub fn schedule(t: f64, tau: f64) -> Result<(f64, f64)> {
    let t = check_time(t, tau)?;
    let (lam, lam1, _) = schedule_reduced(t / tau);
    Ok((lam, lam1 / tau))
}

/// Pulse `f = Σ_k β_k sin(πkt/τ)` and its time derivative.
pub fn pulse(t: f64, drive: &DriveSpec) -> Result<(f64, f64)> {
    let t = check_time(t, drive.tau)?;
    let (f, f1, _) = pulse_reduced(t / drive.tau, &drive.beta);
    Ok((f, f1 / drive.tau))
}

/// Pulse and its first two derivatives in reduced time `s = t/τ`.
pub fn pulse_reduced(s: f64, beta: &[f64]) -> (f64, f64, f64) {
    let mut out = (0.0, 0.0, 0.0);
    for (k, b) in beta.iter().enumerate() {
        let w = PI * (k + 1) as f64;
        out.0 += b * (w * s).sin();
        out.1 += b * w * (w * s).cos();
        out.2 -= b * w * w * (w * s).sin();
    }
    out
}

/// Site pairs `(i, i + d)` along the chain.
pub fn bonds(n: usize, distance: usize, boundary: Boundary) -> Vec<(usize, usize)> {
    match boundary {
        Boundary::Open => (0..n.saturating_sub(distance)).map(|i| (i, i + distance)).collect(),
        Boundary::Periodic => (0..n).map(|i| (i, (i + distance) % n)).collect(),
    }
}

fn two_site(n: usize, i: usize, a: Pauli, j: usize, b: Pauli) -> PauliString {
    if i == j {
        // only reachable for degenerate periodic rings; fold into one site
        let (phase, s) = crate::pauli::string_product(&PauliString::single(n, i, a), &PauliString::single(n, j, b))
            .expect("same length");
        debug_assert!(phase.power() % 2 == 0);
        return s;
    }
    PauliString::from_sites(n, &[(i, a), (j, b)])
}

fn field(n: usize, p: Pauli, weight: f64) -> PauliSum {
    PauliSum::from_real_terms(n, (0..n).map(|i| (weight, PauliString::single(n, i, p)))).expect("same length")
}

fn coupling(n: usize, pairs: &[(usize, usize)], a: Pauli, b: Pauli, weight: f64) -> PauliSum {
    PauliSum::from_real_terms(n, pairs.iter().map(|&(i, j)| (weight, two_site(n, i, a, j, b)))).expect("same length")
}

/// Inverse-square chord distance between sites `i` and `j` on the unit ring.
pub fn hs_coupling(n: usize, i: usize, j: usize) -> f64 {
    let d = (i as f64 - j as f64).abs();
    let s = (PI * d / n as f64).sin();
    1.0 / (4.0 * s * s)
}

/// Target Hamiltonian `H_f` of the model.
pub fn build_final_hamiltonian(spec: &ModelSpec) -> Result<PauliSum> {
    spec.validate()?;
    let n = spec.n_sites;
    let boundary = spec.boundary;
    let mut h = PauliSum::new(n);
    match spec.family {
        Family::Annni => {
            let (k, hz) = (spec.p1, spec.p2);
            h.add_scaled_real(&coupling(n, &bonds(n, 1, boundary), Pauli::X, Pauli::X, 1.0), -1.0)?;
            h.add_scaled_real(&coupling(n, &bonds(n, 2, boundary), Pauli::X, Pauli::X, 1.0), k)?;
            h.add_scaled_real(&field(n, Pauli::Z, 1.0), hz)?;
        }
        Family::Xxz => {
            let (delta, hz) = (spec.p1, spec.p2);
            let nn = bonds(n, 1, boundary);
            h.add_scaled_real(&coupling(n, &nn, Pauli::X, Pauli::X, 1.0), 1.0)?;
            h.add_scaled_real(&coupling(n, &nn, Pauli::Y, Pauli::Y, 1.0), 1.0)?;
            h.add_scaled_real(&coupling(n, &nn, Pauli::Z, Pauli::Z, 1.0), delta)?;
            h.add_scaled_real(&field(n, Pauli::Z, 1.0), hz)?;
        }
        Family::Hs => {
            let (delta, hz) = (spec.p1, spec.p2);
            for i in 0..n {
                for j in i + 1..n {
                    let w = delta * hs_coupling(n, i, j);
                    for p in [Pauli::X, Pauli::Y, Pauli::Z] {
                        h.add_real_term(w, PauliString::from_sites(n, &[(i, p), (j, p)]))?;
                    }
                }
            }
            h.add_scaled_real(&field(n, Pauli::Z, 1.0), hz)?;
        }
    }
    Ok(h)
}

/// `H_i = -Σ σ^x`; its ground state is the uniform `|+>^N`.
pub fn build_initial_hamiltonian(n: usize) -> PauliSum {
    field(n, Pauli::X, -1.0)
}

/// Default control operator of a family.
pub fn control_operators(spec: &ModelSpec) -> Result<PauliSum> {
    spec.validate()?;
    let n = spec.n_sites;
    Ok(match spec.family {
        Family::Annni => field(n, Pauli::Z, 1.0),
        Family::Xxz | Family::Hs => coupling(n, &bonds(n, 2, spec.boundary), Pauli::Z, Pauli::Z, 1.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnsatzKind {
    /// `α₁ Σ σ^y`
    Local,
    /// local plus the two nearest-neighbour `y`-odd couplings
    Near,
    /// near plus their next-nearest-neighbour analogues
    Next,
}

impl AnsatzKind {
    pub fn size(self) -> usize {
        match self {
            AnsatzKind::Local => 1,
            AnsatzKind::Near => 3,
            AnsatzKind::Next => 5,
        }
    }

    fn range(self) -> usize {
        match self {
            AnsatzKind::Local => 0,
            AnsatzKind::Near => 1,
            AnsatzKind::Next => 2,
        }
    }
}

impl FromStr for AnsatzKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "local" => Ok(AnsatzKind::Local),
            "near" => Ok(AnsatzKind::Near),
            "next" => Ok(AnsatzKind::Next),
            other => Err(Error::InvalidArgument(format!("unknown ansatz {other:?}"))),
        }
    }
}

impl fmt::Display for AnsatzKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AnsatzKind::Local => "local",
            AnsatzKind::Near => "near",
            AnsatzKind::Next => "next",
        })
    }
}

/// Gauge-potential basis: each element multiplies one coefficient `α_j`.
pub fn ansatz_basis(kind: AnsatzKind, n: usize, boundary: Boundary) -> Result<Vec<PauliSum>> {
    if kind.range() >= n {
        return Err(Error::AnsatzRange { range: kind.range(), n });
    }
    let mut basis = vec![field(n, Pauli::Y, 1.0)];
    for d in 1..=kind.range() {
        let pairs = bonds(n, d, boundary);
        let mut xy = coupling(n, &pairs, Pauli::X, Pauli::Y, 1.0);
        xy.add_scaled_real(&coupling(n, &pairs, Pauli::Y, Pauli::X, 1.0), 1.0)?;
        let mut yz = coupling(n, &pairs, Pauli::Y, Pauli::Z, 1.0);
        yz.add_scaled_real(&coupling(n, &pairs, Pauli::Z, Pauli::Y, 1.0), 1.0)?;
        basis.push(xy);
        basis.push(yz);
    }
    Ok(basis)
}

/// `H_0 = H_i + λ (H_f - H_i)`.
pub fn bare_hamiltonian(h_i: &PauliSum, h_f: &PauliSum, ctx: &ScheduleContext) -> Result<PauliSum> {
    let mut h = h_i.scaled(1.0 - ctx.lambda);
    h.add_scaled_real(h_f, ctx.lambda)?;
    Ok(h)
}

/// `H_β = H_0 + f O_opt`.
pub fn driven_hamiltonian(h_i: &PauliSum, h_f: &PauliSum, o_opt: &PauliSum, ctx: &ScheduleContext) -> Result<PauliSum> {
    let mut h = bare_hamiltonian(h_i, h_f, ctx)?;
    h.add_scaled_real(o_opt, ctx.f)?;
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::SymmetricEigen;
    use rand::{Rng, SeedableRng};

    fn ps(s: &str) -> PauliString {
        PauliString::from_letters(s).unwrap()
    }

    #[test]
    fn hs_couplings_n4() {
        // 4 sin²(π d / 4): d = 1 -> 2, d = 2 -> 4
        assert_abs_diff_eq!(hs_coupling(4, 0, 1), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(hs_coupling(4, 0, 2), 0.25, epsilon = 1e-15);
        let h = build_final_hamiltonian(&ModelSpec::new(Family::Hs, 4, 1.0, 0.0)).unwrap();
        assert_abs_diff_eq!(h.coefficient(&ps("XXII")).re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(h.coefficient(&ps("ZIZI")).re, 0.25, epsilon = 1e-15);
    }

    #[test]
    fn hs_couplings_depend_on_ring_distance_only() {
        let n = 7;
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                assert_abs_diff_eq!(hs_coupling(n, i, j), hs_coupling(n, j, i), epsilon = 1e-14);
                let (a, b) = ((i + 3) % n, (j + 3) % n);
                assert_abs_diff_eq!(hs_coupling(n, i, j), hs_coupling(n, a, b), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn annni_reduces_to_ising() {
        let spec = ModelSpec::new(Family::Annni, 3, 0.0, 0.0).with_boundary(Boundary::Open);
        let h = build_final_hamiltonian(&spec).unwrap();
        let expected = PauliSum::from_real_terms(3, [(-1.0, ps("XXI")), (-1.0, ps("IXX"))]).unwrap();
        assert_eq!(h, expected);
    }

    #[test]
    fn heisenberg_dimer_ground_energy() {
        let spec = ModelSpec::new(Family::Xxz, 2, 1.0, 0.0).with_boundary(Boundary::Open);
        let m = build_final_hamiltonian(&spec).unwrap().to_matrix().unwrap();
        let real = m.map(|c| c.re);
        let e = SymmetricEigen::new(real).eigenvalues;
        assert_abs_diff_eq!(e.min(), -3.0, epsilon = 1e-12);
    }

    #[test]
    fn minimum_sites() {
        assert!(build_final_hamiltonian(&ModelSpec::new(Family::Annni, 2, 0.5, 0.5)).is_err());
        assert!(build_final_hamiltonian(&ModelSpec::new(Family::Xxz, 1, 0.5, 0.5)).is_err());
        assert!(build_final_hamiltonian(&ModelSpec::new(Family::Xxz, 2, 0.5, 0.5)).is_ok());
    }

    #[test]
    fn term_counts_by_boundary() {
        for n in 5..9 {
            let open = build_final_hamiltonian(&ModelSpec::new(Family::Annni, n, 0.3, 0.4).with_boundary(Boundary::Open)).unwrap();
            assert_eq!(open.len(), (n - 1) + (n - 2) + n);
            let per = build_final_hamiltonian(&ModelSpec::new(Family::Annni, n, 0.3, 0.4)).unwrap();
            assert_eq!(per.len(), 3 * n);
            let open = build_final_hamiltonian(&ModelSpec::new(Family::Xxz, n, 0.3, 0.4).with_boundary(Boundary::Open)).unwrap();
            assert_eq!(open.len(), 3 * (n - 1) + n);
            let per = build_final_hamiltonian(&ModelSpec::new(Family::Xxz, n, 0.3, 0.4).with_boundary(Boundary::Periodic)).unwrap();
            assert_eq!(per.len(), 4 * n);
            for b in [Boundary::Open, Boundary::Periodic] {
                let hs = build_final_hamiltonian(&ModelSpec::new(Family::Hs, n, 0.3, 0.4).with_boundary(b)).unwrap();
                assert_eq!(hs.len(), 3 * n * (n - 1) / 2 + n);
            }
        }
    }

    #[test]
    fn built_operators_are_hermitian() {
        for family in [Family::Annni, Family::Xxz, Family::Hs] {
            let spec = ModelSpec::new(family, 5, 0.7, 1.3);
            assert_eq!(build_final_hamiltonian(&spec).unwrap().max_imag(), 0.0);
            assert_eq!(control_operators(&spec).unwrap().max_imag(), 0.0);
            for kind in [AnsatzKind::Local, AnsatzKind::Near, AnsatzKind::Next] {
                for b in ansatz_basis(kind, 5, spec.boundary).unwrap() {
                    assert_eq!(b.max_imag(), 0.0);
                }
            }
        }
    }

    #[test]
    fn initial_hamiltonian() {
        let h = build_initial_hamiltonian(1);
        assert_eq!(h, PauliSum::from_real_terms(1, [(-1.0, ps("X"))]).unwrap());
        let m = build_initial_hamiltonian(5).to_matrix().unwrap().map(|c| c.re);
        let eig = SymmetricEigen::new(m);
        assert_abs_diff_eq!(eig.eigenvalues.min(), -5.0, epsilon = 1e-12);
        let k = eig.eigenvalues.imin();
        let v = eig.eigenvectors.column(k);
        let a = 2f64.powf(-2.5);
        for x in v.iter() {
            assert_abs_diff_eq!(x.abs(), a, epsilon = 1e-10);
        }
    }

    #[test]
    fn schedule_endpoints_and_midpoint() {
        let tau = 0.01;
        assert_eq!(schedule(0.0, tau).unwrap(), (0.0, 0.0));
        let (l, ld) = schedule(tau, tau).unwrap();
        assert_abs_diff_eq!(l, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(ld, 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(schedule(tau / 2.0, tau).unwrap().0, 0.5, epsilon = 1e-15);
        assert!(matches!(schedule(-0.1, tau), Err(Error::TimeOutOfRange { .. })));
        assert!(matches!(schedule(1.1 * tau, tau), Err(Error::TimeOutOfRange { .. })));
    }

    #[test]
    fn schedule_derivative_matches_finite_difference() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let tau = 1.0;
        let h = 1e-5;
        for _ in 0..100 {
            let t = rng.gen_range(h..tau - h);
            let fd = (schedule(t + h, tau).unwrap().0 - schedule(t - h, tau).unwrap().0) / (2.0 * h);
            assert_abs_diff_eq!(schedule(t, tau).unwrap().1, fd, epsilon = 1e-8);
        }
        // second derivative vanishes at the end points
        assert_abs_diff_eq!(schedule_reduced(0.0).2, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(schedule_reduced(1.0).2, 0.0, epsilon = 1e-12);
        for _ in 0..50 {
            let s = rng.gen_range(1e-3..1.0 - 1e-3);
            let fd = (schedule_reduced(s + h).1 - schedule_reduced(s - h).1) / (2.0 * h);
            assert_abs_diff_eq!(schedule_reduced(s).2, fd, epsilon = 1e-6);
        }
    }

    #[test]
    fn schedule_is_monotone() {
        let mut prev = -1.0;
        for k in 0..=1000 {
            let l = schedule(k as f64 / 1000.0, 1.0).unwrap().0;
            assert!(l >= prev);
            prev = l;
        }
    }

    #[test]
    fn pulse_examples() {
        let drive = DriveSpec::new(0.01, vec![2.0]);
        assert_eq!(pulse(0.0, &drive).unwrap().0, 0.0);
        assert_abs_diff_eq!(pulse(0.01, &drive).unwrap().0, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(pulse(0.005, &drive).unwrap().0, 2.0, epsilon = 1e-14);

        let drive = DriveSpec::new(0.7, vec![1.3, -0.4, 2.2]);
        let h = 1e-6;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let t = rng.gen_range(h..0.7 - h);
            let fd = (pulse(t + h, &drive).unwrap().0 - pulse(t - h, &drive).unwrap().0) / (2.0 * h);
            assert_abs_diff_eq!(pulse(t, &drive).unwrap().1, fd, epsilon = 1e-8);
        }
        assert!(pulse(0.71, &drive).is_err());
    }

    #[test]
    fn control_operator_shapes() {
        let annni = control_operators(&ModelSpec::new(Family::Annni, 3, 0.1, 0.1)).unwrap();
        let expected = PauliSum::from_real_terms(3, [(1.0, ps("ZII")), (1.0, ps("IZI")), (1.0, ps("IIZ"))]).unwrap();
        assert_eq!(annni, expected);

        let open = control_operators(&ModelSpec::new(Family::Xxz, 5, 0.1, 0.1).with_boundary(Boundary::Open)).unwrap();
        assert_eq!(open.len(), 3);
        assert!(open.iter().all(|(p, c)| p.weight() == 2 && c.re == 1.0));
        assert_eq!(open.coefficient(&ps("ZIZII")).re, 1.0);

        let hs = control_operators(&ModelSpec::new(Family::Hs, 5, 0.1, 0.1)).unwrap();
        let xxz = control_operators(&ModelSpec::new(Family::Xxz, 5, 0.1, 0.1)).unwrap();
        assert_eq!(hs, xxz);
        assert_eq!(hs, open);
        let ring = control_operators(&ModelSpec::new(Family::Hs, 5, 0.1, 0.1).with_boundary(Boundary::Periodic)).unwrap();
        assert_eq!(ring.len(), 5);
    }

    #[test]
    fn ansatz_sizes() {
        let local = ansatz_basis(AnsatzKind::Local, 4, Boundary::Open).unwrap();
        assert_eq!(local.len(), 1);
        assert_eq!(local[0].len(), 4);
        assert_eq!(ansatz_basis(AnsatzKind::Near, 4, Boundary::Open).unwrap().len(), 3);
        let next = ansatz_basis(AnsatzKind::Next, 5, Boundary::Periodic).unwrap();
        assert_eq!(next.len(), 5);
        assert_eq!(next[3].len(), 10);
        assert!(matches!(ansatz_basis(AnsatzKind::Next, 2, Boundary::Open), Err(Error::AnsatzRange { .. })));
    }

    #[test]
    fn bare_hamiltonian_interpolates() {
        let spec = ModelSpec::new(Family::Annni, 4, 0.6, 0.8);
        let hi = build_initial_hamiltonian(4);
        let hf = build_final_hamiltonian(&spec).unwrap();
        let ctx = |lambda| ScheduleContext {
            t: 0.0,
            lambda,
            lambda_dot: 0.0,
            f: 0.0,
            f_dot: 0.0,
        };
        assert_eq!(bare_hamiltonian(&hi, &hf, &ctx(0.0)).unwrap(), hi);
        assert_eq!(bare_hamiltonian(&hi, &hf, &ctx(1.0)).unwrap(), hf);
        let half = bare_hamiltonian(&hi, &hf, &ctx(0.5)).unwrap();
        for (p, c) in hf.iter() {
            assert_abs_diff_eq!(half.coefficient(p).re, 0.5 * c.re, epsilon = 1e-15);
        }
        for i in 0..4 {
            let x = PauliString::single(4, i, Pauli::X);
            assert_abs_diff_eq!(half.coefficient(&x).re, -0.5, epsilon = 1e-15);
        }
    }
}
