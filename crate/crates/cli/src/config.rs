//! TOML run configuration.
//!
//! Every table rejects unknown keys. A minimal file needs `[model]` and
//! `[protocol]`; everything else has defaults:
//!
//! ```toml
//! [model]
//! family = "annni"   # annni | xxz | hs
//! n = 5
//! p1 = 0.8           # k for ANNNI, Δ for XXZ and HS
//! p2 = 0.9           # h
//! boundary = "periodic"
//!
//! [drive]
//! tau = 0.01
//! n_k = 1
//! beta = "optimize"  # or a list of n_k coefficients
//!
//! [protocol]
//! kind = "cold"      # ua | qoc | lcd | cold
//! ansatz = "next"    # local | near | next
//! cost = "energy"    # energy | infidelity
//! optimizer = "bayesian"
//! seed = 0
//!
//! [output]
//! directory = "out"
//! trajectory = false
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use cold::dynamics::EvolveOptions;
use cold::experiments::{Axis, OptimizerChoice, Parameter, ProtocolKind, RunSpec, SweepSpec};
use cold::models::{AnsatzKind, Boundary, DriveSpec, Family, ModelSpec};
use cold::optimize::{Acquisition, CostKind, OptimizerConfig, PowellConfig};
use cold::pauli::PauliSum;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub family: Family,
    pub n: usize,
    pub p1: f64,
    pub p2: f64,
    #[serde(default)]
    pub boundary: Option<Boundary>,
}

/// A Hamiltonian path given directly as Pauli text, for `agp` and `spectrum`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomBlock {
    pub initial: String,
    #[serde(rename = "final")]
    pub final_: String,
    #[serde(default)]
    pub control: Option<String>,
    #[serde(default)]
    pub basis: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum BetaSetting {
    Mode(String),
    Values(Vec<f64>),
}

impl Default for BetaSetting {
    fn default() -> Self {
        BetaSetting::Mode("optimize".into())
    }
}

fn default_tau() -> f64 {
    0.01
}

fn default_n_k() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveBlock {
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_n_k")]
    pub n_k: usize,
    #[serde(default)]
    pub beta: BetaSetting,
}

impl Default for DriveBlock {
    fn default() -> Self {
        DriveBlock {
            tau: default_tau(),
            n_k: default_n_k(),
            beta: BetaSetting::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    #[default]
    Bayesian,
    Powell,
}

fn default_lower() -> f64 {
    -10.0
}

fn default_upper() -> f64 {
    10.0
}

fn default_n_init() -> usize {
    OptimizerConfig::default().n_init
}

fn default_n_iter() -> usize {
    OptimizerConfig::default().n_iter
}

fn default_candidates() -> usize {
    OptimizerConfig::default().n_candidates
}

fn default_max_evaluations() -> usize {
    PowellConfig::default().max_evaluations
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolBlock {
    pub kind: ProtocolKind,
    #[serde(default = "default_ansatz")]
    pub ansatz: AnsatzKind,
    #[serde(default)]
    pub cost: CostKind,
    #[serde(default)]
    pub optimizer: OptimizerKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_n_init")]
    pub n_init: usize,
    #[serde(default = "default_n_iter")]
    pub n_iter: usize,
    #[serde(default = "default_candidates")]
    pub n_candidates: usize,
    #[serde(default)]
    pub noise_floor: f64,
    #[serde(default = "default_max_evaluations")]
    pub max_evaluations: usize,
    #[serde(default = "default_lower")]
    pub lower: f64,
    #[serde(default = "default_upper")]
    pub upper: f64,
    /// Control operator override in Pauli text form.
    #[serde(default)]
    pub control: Option<String>,
    #[serde(default)]
    pub subspace_fidelity: bool,
}

fn default_ansatz() -> AnsatzKind {
    AnsatzKind::Local
}

fn default_trajectory_steps() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default)]
    pub directory: Option<PathBuf>,
    #[serde(default)]
    pub trajectory: bool,
    #[serde(default = "default_trajectory_steps")]
    pub trajectory_steps: usize,
    #[serde(default = "default_true")]
    pub trace: bool,
}

fn default_true() -> bool {
    true
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock {
            directory: None,
            trajectory: false,
            trajectory_steps: default_trajectory_steps(),
            trace: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisBlock {
    pub parameter: Parameter,
    #[serde(default)]
    pub values: Option<Vec<f64>>,
    #[serde(default)]
    pub start: Option<f64>,
    #[serde(default)]
    pub stop: Option<f64>,
    #[serde(default)]
    pub count: Option<usize>,
}

impl AxisBlock {
    fn axis(&self) -> Result<Axis, CliError> {
        match (&self.values, self.start, self.stop, self.count) {
            (Some(v), None, None, None) => Ok(Axis {
                parameter: self.parameter,
                values: v.clone(),
            }),
            (None, Some(a), Some(b), Some(n)) => Ok(Axis::linspace(self.parameter, a, b, n)),
            _ => Err(CliError::Config(
                "sweep axis needs either `values` or all of `start`, `stop`, `count`".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub axis1: AxisBlock,
    pub axis2: AxisBlock,
    #[serde(default = "default_protocols")]
    pub protocols: Vec<ProtocolKind>,
}

fn default_protocols() -> Vec<ProtocolKind> {
    vec![ProtocolKind::Ua, ProtocolKind::Cold]
}

fn default_points() -> usize {
    101
}

fn default_delta() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumBlock {
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_delta")]
    pub delta: f64,
}

impl Default for SpectrumBlock {
    fn default() -> Self {
        SpectrumBlock {
            points: default_points(),
            delta: default_delta(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgpBlock {
    #[serde(default = "default_points")]
    pub points: usize,
    /// Falls back to `protocol.ansatz`, then `local`.
    #[serde(default)]
    pub ansatz: Option<AnsatzKind>,
}

impl Default for AgpBlock {
    fn default() -> Self {
        AgpBlock {
            points: default_points(),
            ansatz: None,
        }
    }
}

/// The whole configuration file.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub model: Option<ModelBlock>,
    #[serde(default)]
    pub custom: Option<CustomBlock>,
    #[serde(default)]
    pub drive: DriveBlock,
    #[serde(default)]
    pub protocol: Option<ProtocolBlock>,
    #[serde(default)]
    pub evolve: EvolveOptions,
    #[serde(default)]
    pub output: OutputBlock,
    #[serde(default)]
    pub sweep: Option<SweepBlock>,
    #[serde(default)]
    pub spectrum: SpectrumBlock,
    #[serde(default)]
    pub agp: AgpBlock,
}

/// Command-line overrides applied on top of a file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub boundary: Option<Boundary>,
    pub subspace_fidelity: bool,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn model_spec(&self, o: &Overrides) -> Result<ModelSpec, CliError> {
        let m = self
            .model
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [model] table".into()))?;
        let boundary = o.boundary.or(m.boundary).unwrap_or(m.family.default_boundary());
        let spec = ModelSpec::new(m.family, m.n, m.p1, m.p2).with_boundary(boundary);
        spec.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(spec)
    }

    fn protocol(&self) -> Result<&ProtocolBlock, CliError> {
        self.protocol
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [protocol] table".into()))
    }

    /// The fully resolved run.
    pub fn run_spec(&self, o: &Overrides) -> Result<RunSpec, CliError> {
        let model = self.model_spec(o)?;
        let p = self.protocol()?;
        let mut spec = RunSpec::new(model, p.kind, p.ansatz);
        spec.cost = p.cost;
        spec.beta_lower = p.lower;
        spec.beta_upper = p.upper;
        spec.evolve = self.evolve;
        spec.control = p.control.clone();
        spec.subspace_fidelity = p.subspace_fidelity || o.subspace_fidelity;
        let seed = o.seed.unwrap_or(p.seed);
        let bayes = OptimizerConfig {
            seed,
            n_init: p.n_init,
            n_iter: p.n_iter,
            acquisition: Acquisition::ExpectedImprovement,
            noise_floor: p.noise_floor,
            n_candidates: p.n_candidates,
        };
        let powell = PowellConfig {
            max_evaluations: p.max_evaluations,
            ..Default::default()
        };
        let (beta, optimizer) = match &self.drive.beta {
            BetaSetting::Mode(m) if m == "optimize" => (
                vec![0.0; self.drive.n_k],
                match p.optimizer {
                    OptimizerKind::Bayesian => OptimizerChoice::Bayesian(bayes),
                    OptimizerKind::Powell => OptimizerChoice::Powell(powell),
                },
            ),
            BetaSetting::Mode(m) => {
                return Err(CliError::Config(format!("drive.beta must be \"optimize\" or a list, got {m:?}")))
            }
            BetaSetting::Values(v) => {
                if v.len() != self.drive.n_k {
                    return Err(CliError::Config(format!(
                        "drive.beta has {} entries but n_k = {}",
                        v.len(),
                        self.drive.n_k
                    )));
                }
                let choice = match p.optimizer {
                    OptimizerKind::Powell => OptimizerChoice::Powell(powell),
                    OptimizerKind::Bayesian => OptimizerChoice::Fixed,
                };
                (v.clone(), choice)
            }
        };
        spec.drive = DriveSpec::new(self.drive.tau, beta);
        spec.optimizer = optimizer;
        spec.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if let OptimizerChoice::Bayesian(cfg) = &spec.optimizer {
            cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
        }
        spec.control_operator().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(spec)
    }

    pub fn sweep_spec(&self, o: &Overrides) -> Result<SweepSpec, CliError> {
        let block = self
            .sweep
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [sweep] table".into()))?;
        let spec = SweepSpec {
            base: self.run_spec(o)?,
            axis1: block.axis1.axis()?,
            axis2: block.axis2.axis()?,
            protocols: block.protocols.clone(),
        };
        spec.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(spec)
    }

    /// The drive with any fixed β, or zero pulse when β is optimised.
    pub fn drive_spec(&self) -> Result<DriveSpec, CliError> {
        let beta = match &self.drive.beta {
            BetaSetting::Values(v) => v.clone(),
            BetaSetting::Mode(_) => vec![0.0; self.drive.n_k],
        };
        let d = DriveSpec::new(self.drive.tau, beta);
        d.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(d)
    }

    /// Parsed custom path: `(H_i, H_f, O, basis)`.
    pub fn custom_operators(&self) -> Result<Option<(PauliSum, PauliSum, PauliSum, Vec<PauliSum>)>, CliError> {
        let Some(c) = &self.custom else { return Ok(None) };
        let parse = |s: &str| s.parse::<PauliSum>().map_err(|e| CliError::Config(e.to_string()));
        let hi = parse(&c.initial)?;
        let hf = parse(&c.final_)?;
        if hi.n_sites() != hf.n_sites() {
            return Err(CliError::Config("custom initial and final act on different sizes".into()));
        }
        let o = match &c.control {
            Some(s) => parse(s)?,
            None => PauliSum::new(hi.n_sites()),
        };
        let basis = c.basis.iter().map(|s| parse(s)).collect::<Result<Vec<_>, _>>()?;
        if o.n_sites() != hi.n_sites() || basis.iter().any(|b| b.n_sites() != hi.n_sites()) {
            return Err(CliError::Config("custom operators act on different sizes".into()));
        }
        Ok(Some((hi, hf, o, basis)))
    }

    /// Output directory: flag, then file, then `COLD_OUT_DIR`, then `cold-out`.
    pub fn output_dir(&self, flag: Option<&Path>) -> PathBuf {
        if let Some(p) = flag {
            return p.to_path_buf();
        }
        if let Some(p) = &self.output.directory {
            return p.clone();
        }
        default_output_dir()
    }
}

pub fn default_output_dir() -> PathBuf {
    std::env::var_os(crate::OUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("cold-out"))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[model]
family = "annni"
n = 5
p1 = 0.8
p2 = 0.9

[protocol]
kind = "ua"
"#;

    #[test]
    fn minimal_config_resolves() {
        let c = RunConfig::from_toml(MINIMAL).unwrap();
        let s = c.run_spec(&Overrides::default()).unwrap();
        assert_eq!(s.model.boundary, Boundary::Periodic);
        assert_eq!(s.drive.tau, 0.01);
        assert_eq!(s.protocol, ProtocolKind::Ua);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace("p2 = 0.9", "p2 = 0.9\ncolour = 1");
        assert!(matches!(RunConfig::from_toml(&text), Err(CliError::Config(_))));
        let text = format!("{MINIMAL}\n[evolve]\nsteps = 3\n");
        assert!(matches!(RunConfig::from_toml(&text), Err(CliError::Config(_))));
    }

    #[test]
    fn fixed_beta_and_overrides() {
        let text = format!("{}\n[drive]\nbeta = [3.5]\n", MINIMAL.replace("\"ua\"", "\"cold\"\nseed = 4"));
        let c = RunConfig::from_toml(&text).unwrap();
        let o = Overrides {
            seed: Some(9),
            boundary: Some(Boundary::Open),
            subspace_fidelity: true,
        };
        let s = c.run_spec(&o).unwrap();
        assert_eq!(s.optimizer, OptimizerChoice::Fixed);
        assert_eq!(s.drive.beta, vec![3.5]);
        assert_eq!(s.model.boundary, Boundary::Open);
        assert!(s.subspace_fidelity);
        let bad = text.replace("[3.5]", "[3.5, 1.0]");
        assert!(RunConfig::from_toml(&bad).unwrap().run_spec(&o).is_err());
        let seeded = RunConfig::from_toml(&text.replace("beta = [3.5]", "beta = \"optimize\"")).unwrap();
        assert_eq!(seeded.run_spec(&o).unwrap().seed(), 9);
    }

    #[test]
    fn sweep_axes() {
        let text = format!(
            "{MINIMAL}\n[sweep]\naxis1 = {{ parameter = \"p1\", start = 0.0, stop = 1.0, count = 3 }}\naxis2 = {{ parameter = \"p2\", values = [0.1, 0.2] }}\n"
        );
        let s = RunConfig::from_toml(&text).unwrap().sweep_spec(&Overrides::default()).unwrap();
        assert_eq!(s.axis1.values, vec![0.0, 0.5, 1.0]);
        assert_eq!(s.n_cells(), 6);
        let broken = text.replace(", count = 3", "");
        assert!(RunConfig::from_toml(&broken).unwrap().sweep_spec(&Overrides::default()).is_err());
    }
}
