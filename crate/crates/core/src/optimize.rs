//! Derivative-free minimisation over pulse coefficients.
//!
//! [`bayesian_minimize`] fits a Gaussian-process surrogate (squared-exponential
//! kernel on box-normalised coordinates, standardised targets) and picks each
//! new probe by maximising expected improvement over a seeded candidate set.
//! The length scale is re-chosen by maximum marginal likelihood every round.
//! [`powell_minimize`] is the classic direction-set method with Brent line
//! searches. Both are deterministic and record every evaluation.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Axis-aligned box of admissible `β`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl SearchSpace {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let s = SearchSpace { lower, upper };
        s.validate()?;
        Ok(s)
    }

    /// `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.lower.len() != self.upper.len() {
            return Err(Error::LengthMismatch {
                left: self.lower.len(),
                right: self.upper.len(),
            });
        }
        if self.lower.is_empty() {
            return Err(Error::InvalidOptimizer("search space has no dimensions".into()));
        }
        for (l, u) in self.lower.iter().zip(&self.upper) {
            if !(l < u) || !l.is_finite() || !u.is_finite() {
                return Err(Error::InvalidOptimizer(format!("bad bounds [{l}, {u}]")));
            }
        }
        Ok(())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(self.lower.iter().zip(&self.upper)).all(|(v, (l, u))| *l <= *v && v <= u)
    }

    fn to_unit(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (l, u))| (v - l) / (u - l))
            .collect()
    }

    fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (l, h))| (l + v.clamp(0.0, 1.0) * (h - l)).clamp(*l, *h))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Acquisition {
    #[default]
    ExpectedImprovement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub seed: u64,
    pub n_init: usize,
    pub n_iter: usize,
    pub acquisition: Acquisition,
    /// Added to the kernel diagonal on top of a fixed `1e-10` jitter.
    pub noise_floor: f64,
    pub n_candidates: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            seed: 0,
            n_init: 8,
            n_iter: 42,
            acquisition: Acquisition::ExpectedImprovement,
            noise_floor: 0.0,
            n_candidates: 1024,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_init < 2 {
            return Err(Error::InvalidOptimizer(format!("n_init must be >= 2, got {}", self.n_init)));
        }
        if !(self.noise_floor >= 0.0) || !self.noise_floor.is_finite() {
            return Err(Error::InvalidOptimizer("noise_floor must be finite and >= 0".into()));
        }
        if self.n_candidates == 0 {
            return Err(Error::InvalidOptimizer("n_candidates must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub beta: Vec<f64>,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationTrace {
    pub evaluations: Vec<Evaluation>,
    pub best: Evaluation,
}

impl OptimizationTrace {
    fn from_evaluations(evaluations: Vec<Evaluation>) -> Self {
        let best = evaluations
            .iter()
            .fold(None::<&Evaluation>, |b, e| match b {
                Some(b) if b.cost <= e.cost => Some(b),
                _ => Some(e),
            })
            .cloned()
            .expect("at least one evaluation");
        OptimizationTrace { evaluations, best }
    }

    /// Running minimum of the cost.
    pub fn best_so_far(&self) -> Vec<f64> {
        self.evaluations
            .iter()
            .scan(f64::INFINITY, |m, e| {
                *m = m.min(e.cost);
                Some(*m)
            })
            .collect()
    }

    /// One JSON object per evaluation.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for e in &self.evaluations {
            serde_json::to_writer(&mut w, e)?;
            writeln!(w)?;
        }
        Ok(())
    }
}

struct Recorder<'a, F> {
    cost: &'a mut F,
    evaluations: Vec<Evaluation>,
}

impl<F: FnMut(&[f64]) -> Result<f64>> Recorder<'_, F> {
    fn eval(&mut self, beta: &[f64]) -> Result<f64> {
        let value = (self.cost)(beta)?;
        if !value.is_finite() {
            return Err(Error::NonFiniteCost {
                beta: beta.to_vec(),
                value,
            });
        }
        self.evaluations.push(Evaluation {
            beta: beta.to_vec(),
            cost: value,
        });
        Ok(value)
    }
}

/// Latin-hypercube sample of `n` points in `[0, 1]^dim`.
fn latin_hypercube(n: usize, dim: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut pts = vec![vec![0.0; dim]; n];
    for d in 0..dim {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(rng);
        for (p, s) in pts.iter_mut().zip(strata) {
            p[d] = (s as f64 + rng.gen::<f64>()) / n as f64;
        }
    }
    pts
}

const JITTER: f64 = 1e-10;

/// Squared-exponential GP on unit-box inputs with standardised targets.
struct Surrogate {
    x: Vec<Vec<f64>>,
    alpha: DVector<f64>,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    length: f64,
    amplitude: f64,
    mean: f64,
    scale: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn correlation(x: &[Vec<f64>], length: f64, nugget: f64) -> DMatrix<f64> {
    let n = x.len();
    DMatrix::from_fn(n, n, |i, j| {
        let k = (-sq_dist(&x[i], &x[j]) / (2.0 * length * length)).exp();
        if i == j {
            k + nugget
        } else {
            k
        }
    })
}

impl Surrogate {
    fn fit(x: &[Vec<f64>], y: &[f64], noise_floor: f64) -> Result<Self> {
        let n = y.len() as f64;
        let mean = y.iter().sum::<f64>() / n;
        let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
        let ys = DVector::from_iterator(y.len(), y.iter().map(|v| (v - mean) / scale));

        let mut best: Option<(f64, f64, f64, DVector<f64>, nalgebra::Cholesky<f64, nalgebra::Dyn>)> = None;
        let grid = 40;
        for g in 0..grid {
            // log-spaced from 0.01 to 3 box widths
            let length = 0.01 * (300f64).powf(g as f64 / (grid - 1) as f64);
            let mut nugget = JITTER + noise_floor;
            let chol = loop {
                if let Some(c) = correlation(x, length, nugget).cholesky() {
                    break Some(c);
                }
                nugget *= 10.0;
                if nugget > 1e-2 {
                    break None;
                }
            };
            let Some(chol) = chol else { continue };
            let alpha = chol.solve(&ys);
            let quad = ys.dot(&alpha).max(1e-300);
            let amplitude = quad / n;
            let logdet: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
            let ll = -0.5 * n * amplitude.ln() - 0.5 * logdet;
            if best.as_ref().map_or(true, |b| ll > b.0) {
                best = Some((ll, length, amplitude, alpha, chol));
            }
        }
        let (_, length, amplitude, alpha, chol) =
            best.ok_or_else(|| Error::InvalidOptimizer("surrogate kernel matrix is not positive definite".into()))?;
        Ok(Surrogate {
            x: x.to_vec(),
            alpha,
            chol,
            length,
            amplitude,
            mean,
            scale,
        })
    }

    /// Posterior mean and standard deviation in standardised units.
    fn predict(&self, u: &[f64]) -> (f64, f64) {
        let k = DVector::from_iterator(
            self.x.len(),
            self.x.iter().map(|xi| (-sq_dist(xi, u) / (2.0 * self.length * self.length)).exp()),
        );
        let mu = k.dot(&self.alpha);
        let v = self.chol.solve(&k);
        let var = (1.0 - k.dot(&v)).max(0.0) * self.amplitude;
        (mu, var.sqrt())
    }

    fn standardise(&self, y: f64) -> f64 {
        (y - self.mean) / self.scale
    }
}

fn expected_improvement(mu: f64, sd: f64, best: f64, normal: &Normal) -> f64 {
    if sd <= 1e-12 {
        return (best - mu).max(0.0);
    }
    let z = (best - mu) / sd;
    (best - mu) * normal.cdf(z) + sd * normal.pdf(z)
}

/// Next probe in unit coordinates: best EI over random candidates, then polished.
fn propose(gp: &Surrogate, best: f64, dim: usize, n_candidates: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let ei = |u: &[f64]| {
        let (mu, sd) = gp.predict(u);
        expected_improvement(mu, sd, best, &normal)
    };
    let mut scored: Vec<(f64, Vec<f64>)> = (0..n_candidates)
        .map(|_| {
            let u: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
            (ei(&u), u)
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut winner = scored[0].clone();
    for (mut score, mut u) in scored.into_iter().take(5) {
        let mut step = 0.05;
        while step > 1e-5 {
            let mut moved = false;
            for d in 0..dim {
                for sign in [-1.0, 1.0] {
                    let mut trial = u.clone();
                    trial[d] = (trial[d] + sign * step).clamp(0.0, 1.0);
                    let s = ei(&trial);
                    if s > score {
                        score = s;
                        u = trial;
                        moved = true;
                    }
                }
            }
            if !moved {
                step *= 0.5;
            }
        }
        if score > winner.0 {
            winner = (score, u);
        }
    }
    winner.1
}

/// Bayesian optimisation from a Latin-hypercube start.
pub fn bayesian_minimize<F>(cost: F, space: &SearchSpace, cfg: &OptimizerConfig) -> Result<OptimizationTrace>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    bayesian_minimize_from(cost, space, cfg, &[])
}

/// As [`bayesian_minimize`], with `initial` points taking the first slots of
/// the initial design.
pub fn bayesian_minimize_from<F>(
    mut cost: F,
    space: &SearchSpace,
    cfg: &OptimizerConfig,
    initial: &[Vec<f64>],
) -> Result<OptimizationTrace>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    space.validate()?;
    cfg.validate()?;
    for p in initial {
        if !space.contains(p) {
            return Err(Error::InvalidOptimizer(format!("initial point {p:?} lies outside the search box")));
        }
    }
    let dim = space.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rec = Recorder {
        cost: &mut cost,
        evaluations: Vec::new(),
    };

    let mut design: Vec<Vec<f64>> = initial.iter().take(cfg.n_init).map(|p| space.to_unit(p)).collect();
    let lhs = latin_hypercube(cfg.n_init, dim, &mut rng);
    design.extend(lhs.into_iter().take(cfg.n_init - design.len()));

    let mut xs: Vec<Vec<f64>> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for u in design {
        let y = rec.eval(&space.from_unit(&u))?;
        xs.push(u);
        ys.push(y);
    }

    for _ in 0..cfg.n_iter {
        let gp = Surrogate::fit(&xs, &ys, cfg.noise_floor)?;
        let best = gp.standardise(ys.iter().copied().fold(f64::INFINITY, f64::min));
        let u = match cfg.acquisition {
            Acquisition::ExpectedImprovement => propose(&gp, best, dim, cfg.n_candidates, &mut rng),
        };
        let beta = space.from_unit(&u);
        let y = rec.eval(&beta)?;
        xs.push(space.to_unit(&beta));
        ys.push(y);
    }
    Ok(OptimizationTrace::from_evaluations(rec.evaluations))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowellConfig {
    /// Stop when an iteration lowers the cost by less than this (relative).
    pub ftol: f64,
    pub max_iter: usize,
    /// Initial bracket width along each direction.
    pub step: f64,
    pub max_evaluations: usize,
}

impl Default for PowellConfig {
    fn default() -> Self {
        PowellConfig {
            ftol: 1e-10,
            max_iter: 200,
            step: 1.0,
            max_evaluations: 5000,
        }
    }
}

const GOLDEN: f64 = 1.618_033_988_749_895;
const CGOLD: f64 = 0.381_966_011_250_105;

/// Minimise `g(t)` starting from `g(0) = f0`; returns `(t, g(t))`.
fn line_minimize<G: FnMut(f64) -> Result<f64>>(mut g: G, f0: f64, step: f64, budget: &mut usize) -> Result<(f64, f64)> {
    let mut call = |t: f64, budget: &mut usize| -> Result<Option<f64>> {
        if *budget == 0 {
            return Ok(None);
        }
        *budget -= 1;
        g(t).map(Some)
    };
    // bracket
    let (mut a, mut fa) = (0.0, f0);
    let Some(mut fb) = call(step, budget)? else { return Ok((0.0, f0)) };
    let mut b = step;
    if fb > fa {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
        b = -step;
        let Some(v) = call(b, budget)? else { return Ok(best_of(0.0, f0, a, fa)) };
        fb = v;
        if fb >= f0 && fa >= f0 {
            // minimum lies between -step and step
            return brent(&mut call, -step, 0.0, step, f0, budget);
        }
        if fb > fa {
            return Ok(best_of(0.0, f0, a, fa));
        }
        a = 0.0;
        fa = f0;
    }
    if fb == fa {
        return Ok((0.0, f0));
    }
    let mut c = b + GOLDEN * (b - a);
    let Some(mut fc) = call(c, budget)? else { return Ok(best_of(0.0, f0, b, fb)) };
    let mut grow = 0;
    while fc < fb && grow < 60 {
        a = b;
        b = c;
        fb = fc;
        c = b + GOLDEN * (b - a);
        match call(c, budget)? {
            Some(v) => fc = v,
            None => return Ok(best_of(0.0, f0, b, fb)),
        }
        grow += 1;
    }
    let _ = fa;
    brent(&mut call, a, b, c, fb, budget).map(|r| best_of(0.0, f0, r.0, r.1))
}

fn best_of(t0: f64, f0: f64, t1: f64, f1: f64) -> (f64, f64) {
    if f1 < f0 {
        (t1, f1)
    } else {
        (t0, f0)
    }
}

/// Brent's method on the bracket `(a, b, c)` with `g(b) = fb`.
fn brent<C>(call: &mut C, a: f64, b: f64, c: f64, fb: f64, budget: &mut usize) -> Result<(f64, f64)>
where
    C: FnMut(f64, &mut usize) -> Result<Option<f64>>,
{
    let (mut lo, mut hi) = if a < c { (a, c) } else { (c, a) };
    let (mut x, mut w, mut v) = (b, b, b);
    let (mut fx, mut fw, mut fv) = (fb, fb, fb);
    let (mut d, mut e) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let xm = 0.5 * (lo + hi);
        let tol1 = 1e-8 * x.abs() + 1e-12;
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (hi - lo) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let etemp = e;
            e = d;
            if !(p.abs() >= (0.5 * q * etemp).abs() || p <= q * (lo - x) || p >= q * (hi - x)) {
                d = p / q;
                let u = x + d;
                if u - lo < tol2 || hi - u < tol2 {
                    d = tol1.copysign(xm - x);
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= xm { lo - x } else { hi - x };
            d = CGOLD * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let Some(fu) = call(u, budget)? else { break };
        if fu <= fx {
            if u >= x {
                lo = x;
            } else {
                hi = x;
            }
            (v, w, x) = (w, x, u);
            (fv, fw, fx) = (fw, fx, fu);
        } else {
            if u < x {
                lo = u;
            } else {
                hi = u;
            }
            if fu <= fw || w == x {
                (v, w) = (w, u);
                (fv, fw) = (fw, fu);
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    Ok((x, fx))
}

/// Powell's conjugate-direction method from `x0`.
pub fn powell_minimize<F>(mut cost: F, x0: &[f64], cfg: &PowellConfig) -> Result<OptimizationTrace>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if x0.is_empty() {
        return Err(Error::InvalidOptimizer("empty starting point".into()));
    }
    let dim = x0.len();
    let mut rec = Recorder {
        cost: &mut cost,
        evaluations: Vec::new(),
    };
    let mut budget = cfg.max_evaluations.max(1) - 1;
    let mut x = x0.to_vec();
    let mut fx = rec.eval(&x)?;
    let mut dirs: Vec<Vec<f64>> = (0..dim)
        .map(|i| {
            let mut d = vec![0.0; dim];
            d[i] = 1.0;
            d
        })
        .collect();
    let along = |x: &[f64], d: &[f64], t: f64| x.iter().zip(d).map(|(a, b)| a + t * b).collect::<Vec<_>>();

    for _ in 0..cfg.max_iter {
        let start = x.clone();
        let f_start = fx;
        let (mut biggest, mut biggest_at) = (0.0, 0);
        for (i, d) in dirs.iter().enumerate() {
            let before = fx;
            let (t, ft) = line_minimize(|t| rec.eval(&along(&x, d, t)), fx, cfg.step, &mut budget)?;
            if ft < fx {
                x = along(&x, d, t);
                fx = ft;
            }
            if before - fx > biggest {
                biggest = before - fx;
                biggest_at = i;
            }
        }
        if 2.0 * (f_start - fx) <= cfg.ftol * (f_start.abs() + fx.abs()) + 1e-300 || budget == 0 {
            break;
        }
        let new_dir: Vec<f64> = x.iter().zip(&start).map(|(a, b)| a - b).collect();
        let extrap: Vec<f64> = x.iter().zip(&start).map(|(a, b)| 2.0 * a - b).collect();
        if budget == 0 {
            break;
        }
        budget -= 1;
        let fe = rec.eval(&extrap)?;
        if fe < f_start {
            let t = 2.0 * (f_start - 2.0 * fx + fe) * (f_start - fx - biggest).powi(2)
                - biggest * (f_start - fe).powi(2);
            if t < 0.0 {
                let (s, fs) = line_minimize(|s| rec.eval(&along(&x, &new_dir, s)), fx, 1.0, &mut budget)?;
                if fs < fx {
                    x = along(&x, &new_dir, s);
                    fx = fs;
                }
                dirs.remove(biggest_at);
                dirs.push(new_dir);
            }
        }
    }
    let mut trace = OptimizationTrace::from_evaluations(rec.evaluations);
    // keep the reported optimum on the iterate path when costs tie
    if trace.best.cost == fx {
        trace.best = Evaluation { beta: x, cost: fx };
    }
    Ok(trace)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostKind {
    /// Normalised final energy; never consults the target state.
    #[default]
    Energy,
    /// `1 - F`; needs the exact target, so it is a diagnostic only.
    Infidelity,
}

/// What one protocol evaluation reports to a cost function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub normalized_energy: f64,
    pub fidelity: f64,
}

/// Wrap a protocol runner into a scalar cost of the given kind.
pub fn make_cost<R>(kind: CostKind, mut runner: R) -> impl FnMut(&[f64]) -> Result<f64>
where
    R: FnMut(&[f64]) -> Result<Measurement>,
{
    move |beta| {
        let m = runner(beta)?;
        Ok(match kind {
            CostKind::Energy => m.normalized_energy,
            CostKind::Infidelity => 1.0 - m.fidelity,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn quad(b: &[f64]) -> Result<f64> {
        Ok((b[0] - 3.0).powi(2))
    }

    #[test]
    fn bo_finds_quadratic_minimum() {
        let space = SearchSpace::cube(1, -10.0, 10.0).unwrap();
        let cfg = OptimizerConfig {
            n_init: 8,
            n_iter: 30,
            ..Default::default()
        };
        let trace = bayesian_minimize(quad, &space, &cfg).unwrap();
        assert_eq!(trace.evaluations.len(), 38);
        assert!((trace.best.beta[0] - 3.0).abs() < 0.1, "{:?}", trace.best);
    }

    #[test]
    fn bo_two_dimensional_bowl() {
        let space = SearchSpace::cube(2, -10.0, 10.0).unwrap();
        let cfg = OptimizerConfig {
            seed: 4,
            ..Default::default()
        };
        let trace = bayesian_minimize(|b| Ok((b[0] - 1.0).powi(2) + 2.0 * (b[1] + 2.0).powi(2)), &space, &cfg).unwrap();
        assert!(trace.best.cost < 0.05, "{:?}", trace.best);
    }

    #[test]
    fn bo_zero_iterations_is_initial_design() {
        let space = SearchSpace::cube(1, -10.0, 10.0).unwrap();
        let cfg = OptimizerConfig {
            n_iter: 0,
            ..Default::default()
        };
        let trace = bayesian_minimize(quad, &space, &cfg).unwrap();
        assert_eq!(trace.evaluations.len(), 8);
        let min = trace.evaluations.iter().map(|e| e.cost).fold(f64::INFINITY, f64::min);
        assert_eq!(trace.best.cost, min);
        // one sample per stratum
        let mut strata: Vec<usize> = trace.evaluations.iter().map(|e| ((e.beta[0] + 10.0) / 2.5) as usize).collect();
        strata.sort();
        assert_eq!(strata, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn bo_is_deterministic_and_in_bounds() {
        let space = SearchSpace::new(vec![-1.0, 0.0], vec![2.0, 5.0]).unwrap();
        let cfg = OptimizerConfig {
            seed: 99,
            n_init: 5,
            n_iter: 10,
            ..Default::default()
        };
        let f = |b: &[f64]| Ok((b[0] * 3.0).sin() + (b[1] - 1.0).powi(2));
        let a = bayesian_minimize(f, &space, &cfg).unwrap();
        let b = bayesian_minimize(f, &space, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.evaluations.iter().all(|e| space.contains(&e.beta)));
        let bsf = a.best_so_far();
        assert!(bsf.windows(2).all(|w| w[1] <= w[0]));
        assert!(a.evaluations.iter().all(|e| a.best.cost <= e.cost));
        let other = bayesian_minimize(f, &space, &OptimizerConfig { seed: 100, ..cfg.clone() }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn bo_initial_points_are_probed_first() {
        let space = SearchSpace::cube(1, -10.0, 10.0).unwrap();
        let trace = bayesian_minimize_from(quad, &space, &OptimizerConfig::default(), &[vec![0.0]]).unwrap();
        assert_eq!(trace.evaluations[0].beta, vec![0.0]);
        assert_eq!(trace.evaluations.len(), 50);
        let outside = bayesian_minimize_from(quad, &space, &OptimizerConfig::default(), &[vec![11.0]]);
        assert!(outside.is_err());
    }

    #[test]
    fn surrogate_interpolates_training_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let xs = latin_hypercube(10, 2, &mut rng);
        let ys: Vec<f64> = xs.iter().map(|x| (4.0 * x[0]).sin() + x[1] * x[1]).collect();
        let gp = Surrogate::fit(&xs, &ys, 0.0).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            let (mu, _) = gp.predict(x);
            let back = mu * gp.scale + gp.mean;
            assert_abs_diff_eq!(back, *y, epsilon = 1e-4 * gp.scale);
        }
    }

    #[test]
    fn non_finite_cost_aborts() {
        let space = SearchSpace::cube(1, -1.0, 1.0).unwrap();
        let err = bayesian_minimize(|_| Ok(f64::NAN), &space, &OptimizerConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NonFiniteCost { .. }));
        let err = powell_minimize(|b| Ok(if b[0] > 0.5 { f64::INFINITY } else { -b[0] }), &[0.0], &PowellConfig::default())
            .unwrap_err();
        assert!(matches!(err, Error::NonFiniteCost { .. }));
    }

    #[test]
    fn invalid_configs() {
        assert!(SearchSpace::new(vec![1.0], vec![1.0]).is_err());
        assert!(SearchSpace::new(vec![0.0], vec![1.0, 2.0]).is_err());
        let space = SearchSpace::cube(1, 0.0, 1.0).unwrap();
        let cfg = OptimizerConfig {
            n_init: 1,
            ..Default::default()
        };
        assert!(matches!(bayesian_minimize(quad, &space, &cfg), Err(Error::InvalidOptimizer(_))));
    }

    #[test]
    fn powell_quadratic_bowl() {
        let f = |b: &[f64]| Ok((b[0] - 1.5).powi(2) + 3.0 * (b[1] + 0.5).powi(2) + (b[0] - 1.5) * (b[1] + 0.5));
        let trace = powell_minimize(f, &[0.0, 0.0], &PowellConfig::default()).unwrap();
        assert_abs_diff_eq!(trace.best.beta[0], 1.5, epsilon = 1e-4);
        assert_abs_diff_eq!(trace.best.beta[1], -0.5, epsilon = 1e-4);
        let trace = powell_minimize(quad, &[-7.0], &PowellConfig::default()).unwrap();
        assert_abs_diff_eq!(trace.best.beta[0], 3.0, epsilon = 1e-4);
    }

    #[test]
    fn powell_constant_cost_returns_start() {
        let trace = powell_minimize(|_| Ok(2.0), &[0.3, -0.7], &PowellConfig::default()).unwrap();
        assert_eq!(trace.best.beta, vec![0.3, -0.7]);
        assert_eq!(trace.best.cost, 2.0);
    }

    #[test]
    fn powell_is_deterministic() {
        let f = |b: &[f64]| Ok((b[0] * 2.0).cos() + 0.1 * b[0] * b[0]);
        let a = powell_minimize(f, &[1.0], &PowellConfig::default()).unwrap();
        let b = powell_minimize(f, &[1.0], &PowellConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cost_kinds() {
        let runner = |_: &[f64]| {
            Ok(Measurement {
                normalized_energy: 0.25,
                fidelity: 0.9,
            })
        };
        assert_eq!(make_cost(CostKind::Energy, runner)(&[0.0]).unwrap(), 0.25);
        assert_abs_diff_eq!(make_cost(CostKind::Infidelity, runner)(&[0.0]).unwrap(), 0.1, epsilon = 1e-15);
        let ideal = |_: &[f64]| {
            Ok(Measurement {
                normalized_energy: 0.0,
                fidelity: 1.0,
            })
        };
        assert_eq!(make_cost(CostKind::Energy, ideal)(&[1.0]).unwrap(), 0.0);
        assert_eq!(make_cost(CostKind::Infidelity, ideal)(&[1.0]).unwrap(), 0.0);
    }

    #[test]
    fn trace_jsonl_roundtrip() {
        let space = SearchSpace::cube(1, -1.0, 1.0).unwrap();
        let cfg = OptimizerConfig {
            n_init: 3,
            n_iter: 2,
            ..Default::default()
        };
        let trace = bayesian_minimize(|b| Ok(b[0].abs()), &space, &cfg).unwrap();
        let mut buf = Vec::new();
        trace.write_jsonl(&mut buf).unwrap();
        let lines: Vec<Evaluation> = String::from_utf8(buf)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(lines, trace.evaluations);
    }
}
