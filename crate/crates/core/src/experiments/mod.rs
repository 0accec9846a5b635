//! Protocol orchestration and the studies built on it.
//!
//! A [`RunSpec`] fully describes one state-preparation run. [`Protocol`]
//! turns it into compiled operators once and can then be evaluated for many
//! pulse vectors, which is what the optimisers, sweeps and inheritance study
//! need. [`run_protocol`] is the one-shot entry point.

mod bound;
mod sweep;
mod tables;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agp::AgpStructure;
use crate::dynamics::{
    diagonalize, evolve, evolve_fixed, fidelity, normalized_energy, subspace_fidelity, CompiledOperator, Drive,
    EvolveOptions, OperatorFamily, SpectralSummary, StateVector, DEFAULT_TOL_DEG,
};
use crate::error::{Error, Result};
use crate::models::{
    ansatz_basis, build_final_hamiltonian, build_initial_hamiltonian, control_operators, AnsatzKind, DriveSpec,
    ModelSpec, ScheduleContext,
};
use crate::optimize::{
    bayesian_minimize_from, make_cost, powell_minimize, CostKind, Measurement, OptimizationTrace, OptimizerConfig,
    PowellConfig, SearchSpace,
};
use crate::pauli::PauliSum;

pub use bound::{adiabatic_bound, adiabatic_bound_operators, adiabatic_bound_path, BoundNode, BoundReport, GAP_CLOSED};
pub use sweep::{cell_seed, sweep, Axis, Parameter, SweepCell, SweepGrid, SweepSpec};
pub use tables::{
    reference_table, reference_tables, reproduce_table, reproduce_table_with, CellReport, Metric, ReferenceTable,
    ReproduceOptions, RunCache, TableColumn, TableId, TableReport, TableRow, ToleranceClass,
};

/// Fidelities below this are reported as numerically zero.
pub const NUMERICAL_ZERO: f64 = 1e-20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolKind {
    /// Bare annealing schedule.
    Ua,
    /// Schedule plus optimised pulse.
    Qoc,
    /// Schedule plus gauge-potential correction, no pulse.
    Lcd,
    /// Pulse and correction together.
    Cold,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 4] = [ProtocolKind::Ua, ProtocolKind::Qoc, ProtocolKind::Lcd, ProtocolKind::Cold];

    pub fn has_pulse(self) -> bool {
        matches!(self, ProtocolKind::Qoc | ProtocolKind::Cold)
    }

    pub fn has_correction(self) -> bool {
        matches!(self, ProtocolKind::Lcd | ProtocolKind::Cold)
    }
}

impl FromStr for ProtocolKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ua" => Ok(ProtocolKind::Ua),
            "qoc" => Ok(ProtocolKind::Qoc),
            "lcd" => Ok(ProtocolKind::Lcd),
            "cold" => Ok(ProtocolKind::Cold),
            other => Err(Error::InvalidArgument(format!("unknown protocol {other:?}"))),
        }
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProtocolKind::Ua => "ua",
            ProtocolKind::Qoc => "qoc",
            ProtocolKind::Lcd => "lcd",
            ProtocolKind::Cold => "cold",
        })
    }
}

/// How pulse coefficients are chosen for QOC and COLD.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum OptimizerChoice {
    Bayesian(OptimizerConfig),
    /// Starts from the drive's `beta`.
    Powell(PowellConfig),
    /// Use the drive's `beta` as given.
    Fixed,
}

impl Default for OptimizerChoice {
    fn default() -> Self {
        OptimizerChoice::Bayesian(OptimizerConfig::default())
    }
}

fn default_lower() -> f64 {
    -10.0
}

fn default_upper() -> f64 {
    10.0
}

fn default_tol_deg() -> f64 {
    DEFAULT_TOL_DEG
}

/// Complete description of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub model: ModelSpec,
    pub drive: DriveSpec,
    pub protocol: ProtocolKind,
    pub ansatz: AnsatzKind,
    #[serde(default)]
    pub cost: CostKind,
    #[serde(default)]
    pub optimizer: OptimizerChoice,
    #[serde(default = "default_lower")]
    pub beta_lower: f64,
    #[serde(default = "default_upper")]
    pub beta_upper: f64,
    #[serde(default)]
    pub evolve: EvolveOptions,
    /// Control-operator override in `coeff  letters` text form.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control: Option<String>,
    #[serde(default)]
    pub subspace_fidelity: bool,
    #[serde(default = "default_tol_deg")]
    pub tol_deg: f64,
}

impl RunSpec {
    /// Defaults: `τ = 0.01`, one pulse frequency, Bayesian optimisation of the energy.
    pub fn new(model: ModelSpec, protocol: ProtocolKind, ansatz: AnsatzKind) -> Self {
        RunSpec {
            model,
            drive: DriveSpec::unpulsed(0.01, 1),
            protocol,
            ansatz,
            cost: CostKind::Energy,
            optimizer: OptimizerChoice::default(),
            beta_lower: default_lower(),
            beta_upper: default_upper(),
            evolve: EvolveOptions::default(),
            control: None,
            subspace_fidelity: false,
            tol_deg: DEFAULT_TOL_DEG,
        }
    }

    pub fn with_protocol(&self, protocol: ProtocolKind) -> Self {
        RunSpec {
            protocol,
            ..self.clone()
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut out = self.clone();
        if let OptimizerChoice::Bayesian(cfg) = &mut out.optimizer {
            cfg.seed = seed;
        }
        out
    }

    pub fn seed(&self) -> u64 {
        match &self.optimizer {
            OptimizerChoice::Bayesian(cfg) => cfg.seed,
            _ => 0,
        }
    }

    pub fn search_space(&self) -> Result<SearchSpace> {
        SearchSpace::cube(self.drive.n_k(), self.beta_lower, self.beta_upper)
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("run spec serialises");
        hex::encode(Sha256::digest(bytes))
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.drive.validate()?;
        if self.protocol.has_pulse() {
            self.search_space()?;
        }
        if !(self.tol_deg >= 0.0) {
            return Err(Error::InvalidArgument("tol_deg must be >= 0".into()));
        }
        Ok(())
    }

    pub fn control_operator(&self) -> Result<PauliSum> {
        match &self.control {
            Some(text) => {
                let op: PauliSum = text.parse()?;
                if op.n_sites() != self.model.n_sites {
                    return Err(Error::LengthMismatch {
                        left: self.model.n_sites,
                        right: op.n_sites(),
                    });
                }
                Ok(op)
            }
            None => control_operators(&self.model),
        }
    }
}

/// Target Hamiltonian with its spectrum; shareable between protocols.
#[derive(Debug, Clone)]
pub struct Target {
    pub model: ModelSpec,
    pub h_final: PauliSum,
    pub compiled: CompiledOperator,
    pub spectrum: SpectralSummary,
}

impl Target {
    pub fn new(model: &ModelSpec, tol_deg: f64) -> Result<Self> {
        let h_final = build_final_hamiltonian(model)?;
        let compiled = CompiledOperator::new(&h_final)?;
        let spectrum = diagonalize(&h_final, tol_deg)?;
        Ok(Target {
            model: *model,
            h_final,
            compiled,
            spectrum,
        })
    }
}

/// Result of one evolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub fidelity: f64,
    pub fidelity_subspace: f64,
    pub epsilon: f64,
    pub norm_drift: f64,
    pub steps: usize,
}

/// Instantaneous quantities at one integrator node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub lambda: f64,
    pub f: f64,
    pub alpha: Vec<f64>,
    pub energy: f64,
    pub norm: f64,
}

/// Compiled operators of one run, reusable across pulse vectors.
pub struct Protocol {
    spec: RunSpec,
    target: Arc<Target>,
    family: OperatorFamily,
    agp: Option<AgpStructure>,
    psi0: StateVector,
}

struct ProtocolDrive<'a> {
    protocol: &'a Protocol,
    drive: DriveSpec,
}

impl ProtocolDrive<'_> {
    fn context(&self, t: f64) -> Result<ScheduleContext> {
        let mut ctx = ScheduleContext::at(t, &self.drive)?;
        if !self.protocol.spec.protocol.has_pulse() {
            ctx.f = 0.0;
            ctx.f_dot = 0.0;
        }
        Ok(ctx)
    }

    fn alpha(&self, ctx: &ScheduleContext) -> Result<Option<DVector<f64>>> {
        match &self.protocol.agp {
            Some(s) => s.solve_alpha(ctx, None).map(Some),
            None => Ok(None),
        }
    }
}

impl Drive for ProtocolDrive<'_> {
    fn n_components(&self) -> usize {
        self.protocol.family.n_components()
    }

    fn weights(&self, t: f64, out: &mut [f64]) -> Result<()> {
        let ctx = self.context(t)?;
        out[0] = 1.0;
        out[1] = ctx.lambda;
        let mut k = 2;
        if self.protocol.spec.protocol.has_pulse() {
            out[k] = ctx.f;
            k += 1;
        }
        if let Some(alpha) = self.alpha(&ctx)? {
            out[k..].copy_from_slice(alpha.as_slice());
        }
        Ok(())
    }
}

impl Protocol {
    pub fn prepare(spec: &RunSpec) -> Result<Self> {
        spec.validate()?;
        let target = Arc::new(Target::new(&spec.model, spec.tol_deg)?);
        Self::with_target(spec, target)
    }

    /// Reuse an already diagonalised target.
    pub fn with_target(spec: &RunSpec, target: Arc<Target>) -> Result<Self> {
        spec.validate()?;
        if target.model != spec.model {
            return Err(Error::InvalidArgument("target was built for a different model".into()));
        }
        let n = spec.model.n_sites;
        let h_i = build_initial_hamiltonian(n);
        let mut diff = target.h_final.clone();
        diff.add_scaled_real(&h_i, -1.0)?;
        let o_opt = spec.control_operator()?;

        let mut components = vec![h_i.clone(), diff];
        if spec.protocol.has_pulse() {
            components.push(o_opt.clone());
        }
        let agp = if spec.protocol.has_correction() {
            let basis = ansatz_basis(spec.ansatz, n, spec.model.boundary)?;
            let pulse_op = if spec.protocol.has_pulse() { o_opt } else { PauliSum::new(n) };
            let s = AgpStructure::build(&h_i, &target.h_final, &pulse_op, &basis)?;
            components.extend(basis);
            Some(s)
        } else {
            None
        };
        let family = OperatorFamily::new(&components)?;
        Ok(Protocol {
            spec: spec.clone(),
            target,
            family,
            agp,
            psi0: StateVector::uniform_plus(n),
        })
    }

    pub fn spec(&self) -> &RunSpec {
        &self.spec
    }

    pub fn target(&self) -> &Arc<Target> {
        &self.target
    }

    pub fn agp(&self) -> Option<&AgpStructure> {
        self.agp.as_ref()
    }

    fn drive_for(&self, beta: &[f64]) -> Result<DriveSpec> {
        if beta.len() != self.spec.drive.n_k() {
            return Err(Error::LengthMismatch {
                left: self.spec.drive.n_k(),
                right: beta.len(),
            });
        }
        Ok(DriveSpec::new(self.spec.drive.tau, beta.to_vec()))
    }

    fn measure(&self, state: &StateVector, norm_drift: f64, steps: usize) -> Result<Outcome> {
        let spectrum = &self.target.spectrum;
        let f = fidelity(state, &spectrum.ground)?;
        Ok(Outcome {
            fidelity: f.min(1.0),
            fidelity_subspace: subspace_fidelity(state, &spectrum.ground_space)?.min(1.0),
            epsilon: normalized_energy(state, &self.target.compiled, spectrum)?.clamp(0.0, 1.0),
            norm_drift,
            steps,
        })
    }

    /// Evolve with pulse coefficients `beta` and measure the final state.
    pub fn evaluate(&self, beta: &[f64]) -> Result<Outcome> {
        let drive = ProtocolDrive {
            protocol: self,
            drive: self.drive_for(beta)?,
        };
        let run = evolve(&self.family, &drive, &self.psi0, self.spec.drive.tau, &self.spec.evolve)?;
        self.measure(&run.state, run.norm_drift, run.steps)
    }

    /// Fixed-step evolution recording every node.
    pub fn trajectory(&self, beta: &[f64], steps: usize) -> Result<(Outcome, Vec<TrajectoryPoint>)> {
        let drive = ProtocolDrive {
            protocol: self,
            drive: self.drive_for(beta)?,
        };
        let mut points = Vec::with_capacity(steps + 1);
        let mut weights = vec![0.0; self.family.n_components()];
        let state = evolve_fixed(&self.family, &drive, &self.psi0, self.spec.drive.tau, steps, |t, psi| {
            let ctx = drive.context(t)?;
            let alpha = drive.alpha(&ctx)?.map(|a| a.iter().copied().collect()).unwrap_or_default();
            drive.weights(t, &mut weights)?;
            let h = self.family.combine(&weights)?;
            points.push(TrajectoryPoint {
                t,
                lambda: ctx.lambda,
                f: ctx.f,
                alpha,
                energy: h.expectation(psi)?,
                norm: psi.norm(),
            });
            Ok(())
        })?;
        let drift = (state.norm() - 1.0).abs();
        Ok((self.measure(&state, drift, steps)?, points))
    }

    /// `α(t)` on a uniform grid of `points` nodes.
    pub fn alpha_trajectory(&self, beta: &[f64], points: usize) -> Result<Vec<(f64, Vec<f64>)>> {
        let drive = ProtocolDrive {
            protocol: self,
            drive: self.drive_for(beta)?,
        };
        let tau = self.spec.drive.tau;
        let last = points.max(2) - 1;
        (0..=last)
            .map(|i| {
                let t = tau * i as f64 / last as f64;
                let ctx = drive.context(t)?;
                let alpha = drive.alpha(&ctx)?.map(|a| a.iter().copied().collect()).unwrap_or_default();
                Ok((t, alpha))
            })
            .collect()
    }
}

/// Outcome of [`run_protocol`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub model: ModelSpec,
    pub drive: DriveSpec,
    pub protocol: ProtocolKind,
    pub ansatz: AnsatzKind,
    pub cost: CostKind,
    pub fidelity: f64,
    pub fidelity_subspace: f64,
    pub epsilon: f64,
    pub beta_star: Vec<f64>,
    pub seed: u64,
    pub evaluations: usize,
    pub steps: usize,
    pub norm_drift: f64,
    pub wall_time: f64,
    pub config_digest: String,
    pub numerically_zero: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<OptimizationTrace>,
}

impl RunResult {
    /// Fidelity under the convention requested by the run spec that produced it.
    pub fn reported_fidelity(&self, subspace: bool) -> f64 {
        if subspace {
            self.fidelity_subspace
        } else {
            self.fidelity
        }
    }
}

pub fn run_protocol(spec: &RunSpec) -> Result<RunResult> {
    let protocol = Protocol::prepare(spec)?;
    run_prepared(&protocol)
}

/// Run with an already prepared [`Protocol`].
pub fn run_prepared(protocol: &Protocol) -> Result<RunResult> {
    let spec = protocol.spec();
    let start = Instant::now();
    let n_k = spec.drive.n_k();
    let (beta, outcome, trace) = if spec.protocol.has_pulse() {
        optimise(protocol)?
    } else {
        let zero = vec![0.0; n_k];
        let out = protocol.evaluate(&zero)?;
        (zero, out, None)
    };
    let fidelity = if spec.subspace_fidelity {
        outcome.fidelity_subspace
    } else {
        outcome.fidelity
    };
    Ok(RunResult {
        model: spec.model,
        drive: DriveSpec::new(spec.drive.tau, beta.clone()),
        protocol: spec.protocol,
        ansatz: spec.ansatz,
        cost: spec.cost,
        fidelity: outcome.fidelity,
        fidelity_subspace: outcome.fidelity_subspace,
        epsilon: outcome.epsilon,
        beta_star: beta,
        seed: spec.seed(),
        evaluations: trace.as_ref().map_or(1, |t| t.evaluations.len()),
        steps: outcome.steps,
        norm_drift: outcome.norm_drift,
        wall_time: start.elapsed().as_secs_f64(),
        config_digest: spec.digest(),
        numerically_zero: fidelity < NUMERICAL_ZERO,
        trace,
    })
}

fn optimise(protocol: &Protocol) -> Result<(Vec<f64>, Outcome, Option<OptimizationTrace>)> {
    let spec = protocol.spec();
    let mut outcomes: Vec<(Vec<f64>, Outcome)> = Vec::new();
    let runner = |beta: &[f64]| {
        let out = protocol.evaluate(beta)?;
        outcomes.push((beta.to_vec(), out));
        Ok(Measurement {
            normalized_energy: out.epsilon,
            fidelity: if spec.subspace_fidelity {
                out.fidelity_subspace
            } else {
                out.fidelity
            },
        })
    };
    let cost = make_cost(spec.cost, runner);
    let trace = match &spec.optimizer {
        OptimizerChoice::Bayesian(cfg) => {
            let zero = vec![0.0; spec.drive.n_k()];
            bayesian_minimize_from(cost, &spec.search_space()?, cfg, &[zero])?
        }
        OptimizerChoice::Powell(cfg) => powell_minimize(cost, &spec.drive.beta, cfg)?,
        OptimizerChoice::Fixed => {
            let out = protocol.evaluate(&spec.drive.beta)?;
            return Ok((spec.drive.beta.clone(), out, None));
        }
    };
    let best = &trace.best.beta;
    let outcome = match outcomes.iter().find(|(b, _)| b == best) {
        Some((_, o)) => *o,
        None => protocol.evaluate(best)?,
    };
    Ok((best.clone(), outcome, Some(trace)))
}

/// `F_COLD / F_UA`, infinite when the reference fidelity is exactly zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessRatio {
    pub value: f64,
    pub f_cold: f64,
    pub f_ua: f64,
}

impl SuccessRatio {
    pub fn is_infinite(&self) -> bool {
        self.value.is_infinite()
    }
}

pub fn success_ratio(f_cold: f64, f_ua: f64) -> SuccessRatio {
    let value = if f_ua == 0.0 { f64::INFINITY } else { f_cold / f_ua };
    SuccessRatio { value, f_cold, f_ua }
}

/// One row of an inheritance study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InheritanceRow {
    pub n_sites: usize,
    pub inherited_beta: Vec<f64>,
    pub inherited_fidelity: f64,
    pub fresh_beta: Vec<f64>,
    pub fresh_fidelity: f64,
}

/// Where the inherited pulse comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum InheritSource {
    /// Optimise at this size first.
    Optimize(usize),
    Given(Vec<f64>),
}

/// Compare inherited pulses against fresh optimisations at each target size.
pub fn inherit_study(base: &RunSpec, source: &InheritSource, targets: &[usize]) -> Result<Vec<InheritanceRow>> {
    if !base.protocol.has_pulse() {
        return Err(Error::InvalidArgument("inheritance needs a pulsed protocol".into()));
    }
    let beta = match source {
        InheritSource::Given(b) => b.clone(),
        InheritSource::Optimize(n) => {
            let mut spec = base.clone();
            spec.model = spec.model.with_sites(*n);
            run_protocol(&spec)?.beta_star
        }
    };
    let mut rows = Vec::with_capacity(targets.len());
    for &n in targets {
        let mut spec = base.clone();
        spec.model = spec.model.with_sites(n);
        let protocol = Protocol::prepare(&spec)?;
        let inherited = protocol.evaluate(&beta)?;
        let fresh = run_prepared(&protocol)?;
        let pick = |o: &Outcome| if spec.subspace_fidelity { o.fidelity_subspace } else { o.fidelity };
        rows.push(InheritanceRow {
            n_sites: n,
            inherited_beta: beta.clone(),
            inherited_fidelity: pick(&inherited),
            fresh_beta: fresh.beta_star.clone(),
            fresh_fidelity: fresh.reported_fidelity(spec.subspace_fidelity),
        });
    }
    Ok(rows)
}
