use serde::Serialize;

use crate::dynamics::diagonalize;
use crate::error::{Error, Result};
use crate::models::{
    build_final_hamiltonian, build_initial_hamiltonian, control_operators, pulse_reduced, schedule_reduced, DriveSpec,
    ModelSpec,
};
use crate::pauli::PauliSum;

/// Instantaneous data at one grid node of the bound integral.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundNode {
    pub s: f64,
    pub e0: f64,
    pub e1: f64,
    pub gap: f64,
    pub norm_d1: f64,
    pub norm_d2: f64,
    pub integrand: f64,
}

/// The integral term of the adiabatic-theorem time bound.
///
/// `value` is the bound minus the unknown additive constant `B`, divided by
/// `δ`. It is `None` when the gap closes somewhere on the grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub label: &'static str,
    pub value: Option<f64>,
    pub delta: f64,
    pub min_gap: f64,
    pub min_gap_s: f64,
    pub nodes: Vec<BoundNode>,
}

impl BoundReport {
    pub fn is_divergent(&self) -> bool {
        self.value.is_none()
    }
}

const LABEL: &str = "lower bound minus B";

/// Gaps at or below this are treated as closed.
pub const GAP_CLOSED: f64 = 1e-10;

fn spectral_norm(op: &PauliSum) -> Result<f64> {
    if op.is_empty() {
        return Ok(0.0);
    }
    let spec = diagonalize(op, 0.0)?;
    Ok(spec.e_min.abs().max(spec.e_max.abs()))
}

/// Bound for a generic path; `path(s)` returns `(H, dH/ds, d²H/ds²)`.
pub fn adiabatic_bound_path<P>(mut path: P, delta: f64, grid_points: usize) -> Result<BoundReport>
where
    P: FnMut(f64) -> Result<(PauliSum, PauliSum, PauliSum)>,
{
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!("delta must be positive, got {delta}")));
    }
    if grid_points < 2 {
        return Err(Error::InvalidArgument("bound needs at least two grid points".into()));
    }
    let last = grid_points - 1;
    let mut nodes = Vec::with_capacity(grid_points);
    for i in 0..=last {
        let s = i as f64 / last as f64;
        let (h, d1, d2) = path(s)?;
        let spec = diagonalize(&h, 0.0)?;
        let norm_d1 = spectral_norm(&d1)?;
        let norm_d2 = spectral_norm(&d2)?;
        let gap = spec.gap;
        let integrand = if gap > GAP_CLOSED {
            norm_d2 / (gap * gap) + 7.0 * norm_d1 * norm_d1 / (gap * gap * gap)
        } else {
            f64::INFINITY
        };
        nodes.push(BoundNode {
            s,
            e0: spec.e_min,
            e1: spec.e_min + gap,
            gap,
            norm_d1,
            norm_d2,
            integrand,
        });
    }
    let (min_gap, min_gap_s) = nodes
        .iter()
        .map(|n| (n.gap, n.s))
        .fold((f64::INFINITY, 0.0), |acc, x| if x.0 < acc.0 { x } else { acc });
    let value = if min_gap > GAP_CLOSED {
        let h = 1.0 / last as f64;
        let integral: f64 = nodes.windows(2).map(|w| 0.5 * h * (w[0].integrand + w[1].integrand)).sum();
        Some(integral / delta)
    } else {
        None
    };
    Ok(BoundReport {
        label: LABEL,
        value,
        delta,
        min_gap,
        min_gap_s,
        nodes,
    })
}

/// Bound along `H(s) = H_i + λ(s)(H_f - H_i) + f(s) O` for a model and drive.
pub fn adiabatic_bound(model: &ModelSpec, drive: &DriveSpec, delta: f64, grid_points: usize) -> Result<BoundReport> {
    model.validate()?;
    let h_i = build_initial_hamiltonian(model.n_sites);
    let h_f = build_final_hamiltonian(model)?;
    let o = control_operators(model)?;
    adiabatic_bound_operators(&h_i, &h_f, &o, drive, delta, grid_points)
}

/// As [`adiabatic_bound`] for explicit operators.
pub fn adiabatic_bound_operators(
    h_i: &PauliSum,
    h_f: &PauliSum,
    o: &PauliSum,
    drive: &DriveSpec,
    delta: f64,
    grid_points: usize,
) -> Result<BoundReport> {
    drive.validate()?;
    let n = h_i.n_sites();
    let diff = PauliSum::linear_combination(n, &[(1.0, h_f), (-1.0, h_i)])?;
    adiabatic_bound_path(
        |s| {
            let (l0, l1, l2) = schedule_reduced(s);
            let (f0, f1, f2) = pulse_reduced(s, &drive.beta);
            let h = PauliSum::linear_combination(n, &[(1.0, h_i), (l0, &diff), (f0, o)])?;
            let d1 = PauliSum::linear_combination(n, &[(l1, &diff), (f1, o)])?;
            let d2 = PauliSum::linear_combination(n, &[(l2, &diff), (f2, o)])?;
            Ok((h, d1, d2))
        },
        delta,
        grid_points,
    )
}
