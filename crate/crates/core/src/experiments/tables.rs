use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_protocol, success_ratio, OptimizerChoice, ProtocolKind, RunResult, RunSpec};
use crate::dynamics::EvolveOptions;
use crate::error::{Error, Result};
use crate::models::{AnsatzKind, Boundary, DriveSpec, Family, ModelSpec};
use crate::optimize::OptimizerConfig;

const TABLES_JSON: &str = include_str!("../../data/tables.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TableId {
    T1,
    T2,
    T3,
    T4,
    T5,
    T6,
}

impl TableId {
    pub const ALL: [TableId; 6] = [TableId::T1, TableId::T2, TableId::T3, TableId::T4, TableId::T5, TableId::T6];
}

impl FromStr for TableId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "T1" => Ok(TableId::T1),
            "T2" => Ok(TableId::T2),
            "T3" => Ok(TableId::T3),
            "T4" => Ok(TableId::T4),
            "T5" => Ok(TableId::T5),
            "T6" => Ok(TableId::T6),
            _ => Err(Error::InvalidArgument(format!("unknown table {s:?}"))),
        }
    }
}

impl fmt::Display for TableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// How a computed cell is compared with its reference value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum ToleranceClass {
    Relative { tol: f64 },
    Absolute { tol: f64 },
    AtLeastFraction { fraction: f64 },
    AtMostFactor { factor: f64 },
    AtLeast { min: f64 },
    AtMost { max: f64 },
    Below { threshold: f64 },
    LogWithin { decades: f64 },
    Info,
}

impl ToleranceClass {
    pub fn check(&self, reference: f64, computed: f64) -> bool {
        if let ToleranceClass::Info = self {
            return true;
        }
        if computed.is_nan() {
            return false;
        }
        match *self {
            ToleranceClass::Relative { tol } => (computed - reference).abs() <= tol * reference.abs(),
            ToleranceClass::Absolute { tol } => (computed - reference).abs() <= tol,
            ToleranceClass::AtLeastFraction { fraction } => computed >= fraction * reference,
            ToleranceClass::AtMostFactor { factor } => computed <= factor * reference,
            ToleranceClass::AtLeast { min } => computed >= min,
            ToleranceClass::AtMost { max } => computed <= max,
            ToleranceClass::Below { threshold } => computed < threshold,
            ToleranceClass::LogWithin { decades } => (computed.log10() - reference.log10()).abs() <= decades,
            ToleranceClass::Info => true,
        }
    }
}

impl fmt::Display for ToleranceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ToleranceClass::Relative { tol } => write!(f, "within {}%", tol * 100.0),
            ToleranceClass::Absolute { tol } => write!(f, "within ±{tol}"),
            ToleranceClass::AtLeastFraction { fraction } => write!(f, ">= {fraction} x ref"),
            ToleranceClass::AtMostFactor { factor } => write!(f, "<= {factor} x ref"),
            ToleranceClass::AtLeast { min } => write!(f, ">= {min:e}"),
            ToleranceClass::AtMost { max } => write!(f, "<= {max:e}"),
            ToleranceClass::Below { threshold } => write!(f, "< {threshold:e}"),
            ToleranceClass::LogWithin { decades } => write!(f, "within {decades} decades"),
            ToleranceClass::Info => f.write_str("info"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Fidelity,
    Epsilon,
    /// `F_COLD / F_UA`.
    Ratio,
    InheritedFidelity,
    FreshBeta,
    FreshFidelity,
    /// Fresh minus inherited fidelity.
    Improvement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableRow {
    pub label: String,
    pub p1: f64,
    pub p2: f64,
    #[serde(default)]
    pub n_sites: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableColumn {
    pub name: String,
    pub metric: Metric,
    #[serde(default)]
    pub protocol: Option<ProtocolKind>,
    #[serde(default)]
    pub ansatz: Option<AnsatzKind>,
    #[serde(default)]
    pub n_sites: Option<usize>,
    pub tolerance: ToleranceClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Override {
    pub row: String,
    pub column: String,
    pub tolerance: ToleranceClass,
}

/// Reference values with their tolerance classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceTable {
    pub id: TableId,
    pub title: String,
    pub family: Family,
    pub n_sites: usize,
    pub tau: f64,
    #[serde(default)]
    pub inherit_beta: Option<Vec<f64>>,
    pub rows: Vec<TableRow>,
    pub columns: Vec<TableColumn>,
    pub values: Vec<Vec<f64>>,
    #[serde(default)]
    pub overrides: Vec<Override>,
}

impl ReferenceTable {
    pub fn tolerance(&self, row: usize, column: usize) -> ToleranceClass {
        let (r, c) = (&self.rows[row].label, &self.columns[column].name);
        self.overrides
            .iter()
            .find(|o| &o.row == r && &o.column == c)
            .map_or(self.columns[column].tolerance, |o| o.tolerance)
    }

    pub fn row_index(&self, label: &str) -> Option<usize> {
        self.rows.iter().position(|r| r.label == label)
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TableFile {
    #[allow(dead_code)]
    version: u32,
    tables: Vec<ReferenceTable>,
}

/// The embedded reference tables.
pub fn reference_tables() -> &'static [ReferenceTable] {
    static TABLES: OnceLock<Vec<ReferenceTable>> = OnceLock::new();
    TABLES.get_or_init(|| {
        let file: TableFile = serde_json::from_str(TABLES_JSON).expect("embedded tables are valid");
        file.tables
    })
}

pub fn reference_table(id: TableId) -> &'static ReferenceTable {
    reference_tables().iter().find(|t| t.id == id).expect("every table id is embedded")
}

/// Settings shared by every run of a reproduction.
#[derive(Debug, Clone, PartialEq)]
pub struct ReproduceOptions {
    /// Each optimised cell keeps the best of these seeds.
    pub seeds: Vec<u64>,
    pub optimizer: OptimizerConfig,
    pub evolve: EvolveOptions,
    /// `None` keeps each family's default boundary.
    pub boundary: Option<Boundary>,
    pub subspace_fidelity: bool,
    pub jobs: Option<usize>,
}

impl Default for ReproduceOptions {
    fn default() -> Self {
        ReproduceOptions {
            seeds: vec![0, 1, 2],
            optimizer: OptimizerConfig::default(),
            evolve: EvolveOptions::default(),
            boundary: None,
            subspace_fidelity: false,
            jobs: None,
        }
    }
}

/// Memoised runs keyed by run-spec digest.
#[derive(Debug, Default)]
pub struct RunCache {
    runs: Mutex<HashMap<String, Arc<std::result::Result<RunResult, String>>>>,
}

impl RunCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, spec: &RunSpec) -> Option<Arc<std::result::Result<RunResult, String>>> {
        self.runs.lock().expect("cache lock").get(&spec.digest()).cloned()
    }

    pub fn run(&self, spec: &RunSpec) -> Arc<std::result::Result<RunResult, String>> {
        if let Some(hit) = self.get(spec) {
            return hit;
        }
        let out = Arc::new(run_protocol(spec).map_err(|e| e.to_string()));
        self.runs.lock().expect("cache lock").insert(spec.digest(), out.clone());
        out
    }

    /// Every finished run, in no particular order.
    pub fn results(&self) -> Vec<Arc<std::result::Result<RunResult, String>>> {
        self.runs.lock().expect("cache lock").values().cloned().collect()
    }

    /// Run every spec not yet cached, in parallel.
    pub fn run_all(&self, specs: &[RunSpec], jobs: Option<usize>) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        let missing: Vec<&RunSpec> = specs
            .iter()
            .filter(|s| self.get(s).is_none() && seen.insert(s.digest()))
            .collect();
        let mut pool = rayon::ThreadPoolBuilder::new();
        if let Some(j) = jobs {
            pool = pool.num_threads(j.max(1));
        }
        let pool = pool.build().map_err(|e| Error::InvalidArgument(e.to_string()))?;
        pool.install(|| {
            missing.par_iter().for_each(|s| {
                self.run(s);
            })
        });
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellReport {
    pub row: String,
    pub column: String,
    pub reference: f64,
    pub computed: Option<f64>,
    pub relative_deviation: Option<f64>,
    pub tolerance: ToleranceClass,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableReport {
    pub id: TableId,
    pub title: String,
    pub cells: Vec<CellReport>,
}

impl TableReport {
    pub fn passed(&self) -> bool {
        self.cells.iter().all(|c| c.pass)
    }

    pub fn cell(&self, row: &str, column: &str) -> Option<&CellReport> {
        self.cells.iter().find(|c| c.row == row && c.column == column)
    }

    pub fn value(&self, row: &str, column: &str) -> Option<f64> {
        self.cell(row, column).and_then(|c| c.computed)
    }
}

impl fmt::Display for TableReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} {}", self.id, self.title)?;
        for c in &self.cells {
            let computed = c.computed.map_or_else(|| "error".to_string(), |v| format!("{v:.4e}"));
            writeln!(
                f,
                "{:<4} {:<15} reference {:<11.4e} computed {:<11} {:<22} {}",
                c.row,
                c.column,
                c.reference,
                computed,
                c.tolerance.to_string(),
                if c.pass { "PASS" } else { "FAIL" },
            )?;
            if let Some(e) = &c.error {
                writeln!(f, "     {e}")?;
            }
        }
        Ok(())
    }
}

fn base_spec(table: &ReferenceTable, row: &TableRow, col: &TableColumn, opts: &ReproduceOptions) -> RunSpec {
    let n = col.n_sites.or(row.n_sites).unwrap_or(table.n_sites);
    let mut model = ModelSpec::new(table.family, n, row.p1, row.p2);
    if let Some(b) = opts.boundary {
        model = model.with_boundary(b);
    }
    let mut spec = RunSpec::new(
        model,
        col.protocol.unwrap_or(ProtocolKind::Cold),
        col.ansatz.unwrap_or(AnsatzKind::Local),
    );
    spec.drive = DriveSpec::unpulsed(table.tau, 1);
    spec.evolve = opts.evolve;
    spec.subspace_fidelity = opts.subspace_fidelity;
    spec.optimizer = OptimizerChoice::Bayesian(opts.optimizer.clone());
    spec
}

fn seeded(spec: &RunSpec, opts: &ReproduceOptions) -> Vec<RunSpec> {
    if spec.protocol.has_pulse() {
        opts.seeds.iter().map(|&s| spec.with_seed(s)).collect()
    } else {
        vec![spec.clone()]
    }
}

/// Runs needed by a cell, grouped by role.
struct CellPlan {
    primary: Vec<RunSpec>,
    reference: Vec<RunSpec>,
}

fn plan(table: &ReferenceTable, row: &TableRow, col: &TableColumn, opts: &ReproduceOptions) -> CellPlan {
    let base = base_spec(table, row, col, opts);
    match col.metric {
        Metric::Fidelity | Metric::Epsilon => CellPlan {
            primary: seeded(&base, opts),
            reference: Vec::new(),
        },
        Metric::Ratio => CellPlan {
            primary: seeded(&base.with_protocol(ProtocolKind::Cold), opts),
            reference: vec![base.with_protocol(ProtocolKind::Ua)],
        },
        Metric::FreshBeta | Metric::FreshFidelity | Metric::InheritedFidelity | Metric::Improvement => {
            let mut inherited = base.with_protocol(ProtocolKind::Cold);
            inherited.optimizer = OptimizerChoice::Fixed;
            inherited.drive.beta = table.inherit_beta.clone().unwrap_or_else(|| vec![0.0]);
            CellPlan {
                primary: seeded(&base.with_protocol(ProtocolKind::Cold), opts),
                reference: vec![inherited],
            }
        }
    }
}

fn collect(cache: &RunCache, specs: &[RunSpec]) -> std::result::Result<Vec<RunResult>, String> {
    specs
        .iter()
        .map(|s| match cache.run(s).as_ref() {
            Ok(r) => Ok(r.clone()),
            Err(e) => Err(e.clone()),
        })
        .collect()
}

/// Highest-fidelity run under the reporting convention of the options.
fn best(runs: &[RunResult], subspace: bool) -> &RunResult {
    runs.iter()
        .max_by(|a, b| a.reported_fidelity(subspace).total_cmp(&b.reported_fidelity(subspace)))
        .expect("at least one run")
}

fn evaluate_cell(col: &TableColumn, plan: &CellPlan, cache: &RunCache, subspace: bool) -> std::result::Result<f64, String> {
    let primary = collect(cache, &plan.primary)?;
    let reference = collect(cache, &plan.reference)?;
    let f = |r: &RunResult| r.reported_fidelity(subspace);
    Ok(match col.metric {
        Metric::Fidelity => f(best(&primary, subspace)),
        Metric::Epsilon => primary.iter().map(|r| r.epsilon).fold(f64::INFINITY, f64::min),
        Metric::Ratio => success_ratio(f(best(&primary, subspace)), f(&reference[0])).value,
        Metric::InheritedFidelity => f(&reference[0]),
        Metric::FreshBeta => best(&primary, subspace).beta_star[0],
        Metric::FreshFidelity => f(best(&primary, subspace)),
        Metric::Improvement => f(best(&primary, subspace)) - f(&reference[0]),
    })
}

/// Reproduce one table, sharing runs through `cache`.
pub fn reproduce_table_with(id: TableId, opts: &ReproduceOptions, cache: &RunCache) -> Result<TableReport> {
    let table = reference_table(id);
    let mut plans = Vec::new();
    for row in &table.rows {
        for col in &table.columns {
            plans.push(plan(table, row, col, opts));
        }
    }
    let all: Vec<RunSpec> = plans
        .iter()
        .flat_map(|p| p.primary.iter().chain(&p.reference).cloned())
        .collect();
    cache.run_all(&all, opts.jobs)?;

    let mut cells = Vec::new();
    let mut k = 0;
    for (ri, row) in table.rows.iter().enumerate() {
        for (ci, col) in table.columns.iter().enumerate() {
            let reference = table.values[ri][ci];
            let tolerance = table.tolerance(ri, ci);
            let value = evaluate_cell(col, &plans[k], cache, opts.subspace_fidelity);
            k += 1;
            let (computed, error) = match value {
                Ok(v) => (Some(v), None),
                Err(e) => (None, Some(e)),
            };
            cells.push(CellReport {
                row: row.label.clone(),
                column: col.name.clone(),
                reference,
                computed,
                relative_deviation: computed.map(|v| (v - reference) / reference.abs()),
                tolerance,
                pass: computed.is_some_and(|v| tolerance.check(reference, v)),
                error,
            });
        }
    }
    Ok(TableReport {
        id,
        title: table.title.clone(),
        cells,
    })
}

pub fn reproduce_table(id: TableId, opts: &ReproduceOptions) -> Result<TableReport> {
    reproduce_table_with(id, opts, &RunCache::new())
}
