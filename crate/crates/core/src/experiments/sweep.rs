use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{run_prepared, success_ratio, Protocol, ProtocolKind, RunResult, RunSpec, SuccessRatio, Target};
use crate::error::{Error, Result};

/// Which model parameter an axis varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parameter {
    P1,
    P2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub parameter: Parameter,
    pub values: Vec<f64>,
}

impl Axis {
    /// `count` evenly spaced values from `start` to `stop` inclusive.
    pub fn linspace(parameter: Parameter, start: f64, stop: f64, count: usize) -> Self {
        let values = match count {
            0 => Vec::new(),
            1 => vec![start],
            _ => (0..count)
                .map(|i| start + (stop - start) * i as f64 / (count - 1) as f64)
                .collect(),
        };
        Axis { parameter, values }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    /// Template run; its protocol field is replaced per requested protocol.
    pub base: RunSpec,
    pub axis1: Axis,
    pub axis2: Axis,
    pub protocols: Vec<ProtocolKind>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.axis1.values.is_empty() || self.axis2.values.is_empty() {
            return Err(Error::InvalidArgument("sweep axes must be non-empty".into()));
        }
        if self.axis1.parameter == self.axis2.parameter {
            return Err(Error::InvalidArgument("sweep axes must vary different parameters".into()));
        }
        if self.protocols.is_empty() {
            return Err(Error::InvalidArgument("sweep needs at least one protocol".into()));
        }
        if self.axis1.values.iter().chain(&self.axis2.values).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite sweep axis value".into()));
        }
        self.base.validate()
    }

    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("sweep spec serialises");
        hex::encode(Sha256::digest(bytes))
    }

    pub fn n_cells(&self) -> usize {
        self.axis1.values.len() * self.axis2.values.len()
    }

    /// Run spec of cell `index` (row-major over `axis1`, `axis2`) for `protocol`.
    pub fn cell_spec(&self, index: usize, protocol: ProtocolKind) -> RunSpec {
        let n2 = self.axis2.values.len();
        let (i, j) = (index / n2, index % n2);
        let mut spec = self.base.with_protocol(protocol).with_seed(cell_seed(&self.digest(), index));
        for (axis, v) in [(&self.axis1, self.axis1.values[i]), (&self.axis2, self.axis2.values[j])] {
            match axis.parameter {
                Parameter::P1 => spec.model.p1 = v,
                Parameter::P2 => spec.model.p2 = v,
            }
        }
        spec
    }
}

/// Seed of cell `index` derived from the sweep digest.
pub fn cell_seed(digest: &str, index: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(digest.as_bytes());
    h.update((index as u64).to_le_bytes());
    let bytes = h.finalize();
    u64::from_le_bytes(bytes[..8].try_into().expect("8 bytes"))
}

/// One grid point. Failed protocols carry their error message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub index: usize,
    pub i: usize,
    pub j: usize,
    pub p1: f64,
    pub p2: f64,
    pub results: BTreeMap<ProtocolKind, std::result::Result<RunResult, String>>,
}

impl SweepCell {
    pub fn result(&self, kind: ProtocolKind) -> Option<&RunResult> {
        self.results.get(&kind).and_then(|r| r.as_ref().ok())
    }

    pub fn is_complete(&self) -> bool {
        self.results.values().all(|r| r.is_ok())
    }

    /// `F_COLD / F_UA` when both ran.
    pub fn ratio(&self) -> Option<SuccessRatio> {
        let cold = self.result(ProtocolKind::Cold)?;
        let ua = self.result(ProtocolKind::Ua)?;
        Some(success_ratio(cold.fidelity, ua.fidelity))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub axis1: Axis,
    pub axis2: Axis,
    pub digest: String,
    /// Row-major over `axis1`, `axis2`.
    pub cells: Vec<SweepCell>,
}

impl SweepGrid {
    pub fn get(&self, i: usize, j: usize) -> Option<&SweepCell> {
        self.cells.get(i * self.axis2.values.len() + j)
    }

    pub fn failures(&self) -> usize {
        self.cells
            .iter()
            .map(|c| c.results.values().filter(|r| r.is_err()).count())
            .sum()
    }
}

fn run_cell(spec: &SweepSpec, index: usize) -> SweepCell {
    let n2 = spec.axis2.values.len();
    let template = spec.cell_spec(index, spec.protocols[0]);
    let target = Target::new(&template.model, template.tol_deg).map(Arc::new);
    let results = spec
        .protocols
        .iter()
        .map(|&kind| {
            let run = target.clone().and_then(|t| {
                let p = Protocol::with_target(&spec.cell_spec(index, kind), t)?;
                run_prepared(&p)
            });
            (kind, run.map_err(|e| e.to_string()))
        })
        .collect();
    SweepCell {
        index,
        i: index / n2,
        j: index % n2,
        p1: template.model.p1,
        p2: template.model.p2,
        results,
    }
}

/// Evaluate every cell for every protocol.
///
/// `jobs` caps the worker count (`None` uses all cores). Cells in `previous`
/// that belong to the same sweep digest and completed without failures are
/// reused. `on_cell` sees each newly computed cell as soon as it finishes.
pub fn sweep<C>(spec: &SweepSpec, jobs: Option<usize>, previous: &[SweepCell], on_cell: C) -> Result<SweepGrid>
where
    C: Fn(&SweepCell) + Sync,
{
    spec.validate()?;
    let digest = spec.digest();
    let done: BTreeMap<usize, &SweepCell> = previous
        .iter()
        .filter(|c| c.is_complete() && spec.protocols.iter().all(|k| c.results.contains_key(k)))
        .filter(|c| {
            spec.protocols
                .iter()
                .all(|&k| c.result(k).map(|r| r.config_digest == spec.cell_spec(c.index, k).digest()) == Some(true))
        })
        .map(|c| (c.index, c))
        .collect();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        pool = pool.num_threads(j.max(1));
    }
    let pool = pool.build().map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let cells = pool.install(|| {
        (0..spec.n_cells())
            .into_par_iter()
            .map(|index| match done.get(&index) {
                Some(c) => (*c).clone(),
                None => {
                    let cell = run_cell(spec, index);
                    on_cell(&cell);
                    cell
                }
            })
            .collect()
    });
    Ok(SweepGrid {
        axis1: spec.axis1.clone(),
        axis2: spec.axis2.clone(),
        digest,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::{run_protocol, OptimizerChoice};
    use crate::models::{AnsatzKind, Family, ModelSpec};
    use crate::optimize::OptimizerConfig;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn spec(n1: usize, n2: usize) -> SweepSpec {
        let mut base = RunSpec::new(ModelSpec::new(Family::Annni, 4, 0.5, 0.5), ProtocolKind::Ua, AnsatzKind::Local);
        base.optimizer = OptimizerChoice::Bayesian(OptimizerConfig {
            n_init: 2,
            n_iter: 1,
            ..Default::default()
        });
        SweepSpec {
            base,
            axis1: Axis::linspace(Parameter::P1, 0.2, 0.8, n1),
            axis2: Axis::linspace(Parameter::P2, 0.2, 0.8, n2),
            protocols: vec![ProtocolKind::Ua, ProtocolKind::Cold],
        }
    }

    #[test]
    fn single_cell_equals_run_protocol() {
        let s = spec(1, 1);
        let grid = sweep(&s, Some(1), &[], |_| {}).unwrap();
        let direct = run_protocol(&s.cell_spec(0, ProtocolKind::Cold)).unwrap();
        let cell = &grid.cells[0];
        let swept = cell.result(ProtocolKind::Cold).unwrap();
        assert_eq!(swept.fidelity, direct.fidelity);
        assert_eq!(swept.beta_star, direct.beta_star);
        assert!(cell.ratio().unwrap().value > 0.0);
    }

    #[test]
    fn seeds_are_order_independent_and_resume_skips() {
        let s = spec(2, 2);
        let first = sweep(&s, Some(2), &[], |_| {}).unwrap();
        assert_eq!(first.cells.len(), 4);
        assert_eq!(first.failures(), 0);
        assert_eq!(first.get(1, 0).unwrap().p1, 0.8);
        let seeds: Vec<u64> = first.cells.iter().map(|c| c.result(ProtocolKind::Cold).unwrap().seed).collect();
        assert!(seeds.iter().enumerate().all(|(k, &sd)| sd == cell_seed(&s.digest(), k)));

        let count = AtomicUsize::new(0);
        let partial = vec![first.cells[0].clone(), first.cells[3].clone()];
        let second = sweep(&s, Some(1), &partial, |_| {
            count.fetch_add(1, Ordering::SeqCst);
        })
        .unwrap();
        assert_eq!(count.load(Ordering::SeqCst), 2);
        for (a, b) in first.cells.iter().zip(&second.cells) {
            for k in [ProtocolKind::Ua, ProtocolKind::Cold] {
                assert_eq!(a.result(k).unwrap().fidelity, b.result(k).unwrap().fidelity);
            }
        }
    }

    #[test]
    fn failures_are_recorded_per_cell() {
        let mut s = spec(1, 2);
        s.base.evolve.max_refinements = 0;
        let grid = sweep(&s, Some(1), &[], |_| {}).unwrap();
        assert_eq!(grid.failures(), 4);
        assert!(grid.cells[0].results[&ProtocolKind::Ua].as_ref().unwrap_err().contains("converge"));
    }
}
