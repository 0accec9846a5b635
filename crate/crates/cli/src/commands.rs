//! Subcommand implementations. Each returns `Ok(())` on success and a
//! [`CliError`] whose [`exit_code`](CliError::exit_code) the binary uses.

use std::fs::{self, OpenOptions};
use std::io::{BufRead, BufReader, Write as _};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use sha2::{Digest, Sha256};

use cold::agp::{build_structure, Poly2, RhsPoly};
use cold::experiments::{
    adiabatic_bound_operators, reproduce_table, run_prepared, sweep, Parameter, Protocol, ProtocolKind,
    ReproduceOptions, RunResult, SweepCell, TableId,
};
use cold::models::{
    ansatz_basis, build_final_hamiltonian, build_initial_hamiltonian, control_operators, AnsatzKind, DriveSpec,
    ScheduleContext,
};
use cold::optimize::OptimizerConfig;
use cold::pauli::PauliSum;

use crate::config::{Overrides, RunConfig};
use crate::output::{fmt_num, heatmap_svg, io_error, CsvOut};
use crate::CliError;

/// Options shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct Global {
    pub config: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    pub overrides: Overrides,
}

impl Global {
    fn load(&self) -> Result<RunConfig, CliError> {
        let path = self
            .config
            .as_deref()
            .ok_or_else(|| CliError::Config("this command needs --config <FILE>".into()))?;
        RunConfig::load(path)
    }

    fn out_dir(&self, cfg: Option<&RunConfig>) -> PathBuf {
        match cfg {
            Some(c) => c.output_dir(self.out.as_deref()),
            None => self.out.clone().unwrap_or_else(crate::config::default_output_dir),
        }
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| io_error(path, e))
}

fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn config_err(e: cold::Error) -> CliError {
    CliError::Config(e.to_string())
}

/// `cold run`: optimise (or evaluate) one protocol.
pub fn run(g: &Global) -> Result<(), CliError> {
    let cfg = g.load()?;
    let spec = cfg.run_spec(&g.overrides)?;
    let dir = g.out_dir(Some(&cfg));
    let protocol = Protocol::prepare(&spec)?;
    create_dir(&dir)?;
    let mut result = run_prepared(&protocol)?;
    let trace = result.trace.take();
    write_json(&dir.join("result.json"), &result)?;
    if cfg.output.trace {
        if let Some(trace) = trace {
            let path = dir.join("trace.jsonl");
            let file = fs::File::create(&path).map_err(|e| io_error(&path, e))?;
            trace.write_jsonl(std::io::BufWriter::new(file)).map_err(|e| io_error(&path, e))?;
        }
    }
    if cfg.output.trajectory {
        let (_, points) = protocol.trajectory(&result.beta_star, cfg.output.trajectory_steps)?;
        let m = points.first().map_or(0, |p| p.alpha.len());
        let mut header: Vec<String> = ["t", "lambda", "f", "energy", "norm"].iter().map(|s| s.to_string()).collect();
        header.extend((1..=m).map(|j| format!("alpha_{j}")));
        let mut csv = CsvOut::new(&result.config_digest, &header)?;
        for p in &points {
            let mut row = vec![p.t, p.lambda, p.f, p.energy, p.norm];
            row.extend(&p.alpha);
            csv.numbers(&row)?;
        }
        csv.save(&dir.join("trajectory.csv"))?;
    }
    println!("{}", summary(&result, spec.subspace_fidelity));
    Ok(())
}

fn summary(r: &RunResult, subspace: bool) -> String {
    let beta: Vec<String> = r.beta_star.iter().map(|&b| fmt_num(b)).collect();
    let zero = if r.numerically_zero { " (numerically zero)" } else { "" };
    format!(
        "{} {} N={}: F = {}{zero}, eps = {}, beta* = [{}], {} evaluations",
        r.protocol,
        r.ansatz,
        r.model.n_sites,
        fmt_num(r.reported_fidelity(subspace)),
        fmt_num(r.epsilon),
        beta.join(", "),
        r.evaluations
    )
}

fn load_cells(path: &Path) -> Vec<SweepCell> {
    let Ok(file) = fs::File::open(path) else { return Vec::new() };
    BufReader::new(file)
        .lines()
        .map_while(Result::ok)
        .filter_map(|l| serde_json::from_str(&l).ok())
        .collect()
}

/// `cold sweep`: a two-parameter grid, resumable from `sweep_cells.jsonl`.
pub fn sweep_cmd(g: &Global) -> Result<(), CliError> {
    let cfg = g.load()?;
    let spec = cfg.sweep_spec(&g.overrides)?;
    let dir = g.out_dir(Some(&cfg));
    create_dir(&dir)?;
    let cells_path = dir.join("sweep_cells.jsonl");
    let previous = load_cells(&cells_path);
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&cells_path)
        .map_err(|e| io_error(&cells_path, e))?;
    let sink = Mutex::new((file, None::<String>, 0usize));
    let grid = sweep(&spec, g.jobs, &previous, |cell| {
        let mut guard = sink.lock().expect("sink lock");
        guard.2 += 1;
        let line = serde_json::to_string(cell).expect("cells serialise");
        if let Err(e) = writeln!(guard.0, "{line}") {
            guard.1.get_or_insert_with(|| e.to_string());
        }
    })?;
    let (_, write_error, computed) = sink.into_inner().expect("sink lock");
    if let Some(e) = write_error {
        return Err(io_error(&cells_path, std::io::Error::other(e)));
    }

    let (n1, n2) = spec.base.model.family.parameter_names();
    let name = |p: Parameter| match p {
        Parameter::P1 => n1,
        Parameter::P2 => n2,
    };
    let (x_name, y_name) = (name(spec.axis1.parameter), name(spec.axis2.parameter));
    let kinds = [ProtocolKind::Ua, ProtocolKind::Lcd, ProtocolKind::Qoc, ProtocolKind::Cold];
    let mut header = vec![x_name.to_string(), y_name.to_string()];
    header.extend(kinds.iter().map(|k| format!("F_{}", k.to_string().to_uppercase())));
    header.extend(kinds.iter().map(|k| format!("eps_{}", k.to_string().to_uppercase())));
    header.push("R".into());
    let mut csv = CsvOut::new(&grid.digest, &header)?;
    let subspace = spec.base.subspace_fidelity;
    let mut f_cold = vec![vec![f64::NAN; spec.axis2.values.len()]; spec.axis1.values.len()];
    let mut ratio = f_cold.clone();
    for cell in &grid.cells {
        let x = spec.axis1.values[cell.i];
        let y = spec.axis2.values[cell.j];
        let mut row = vec![fmt_num(x), fmt_num(y)];
        let lookup = |k: ProtocolKind, f: &dyn Fn(&RunResult) -> f64| match cell.results.get(&k) {
            None => String::new(),
            Some(Ok(r)) => fmt_num(f(r)),
            Some(Err(_)) => "nan".into(),
        };
        row.extend(kinds.iter().map(|&k| lookup(k, &|r| r.reported_fidelity(subspace))));
        row.extend(kinds.iter().map(|&k| lookup(k, &|r| r.epsilon)));
        let both = cell.results.contains_key(&ProtocolKind::Ua) && cell.results.contains_key(&ProtocolKind::Cold);
        row.push(match cell.ratio() {
            Some(r) => fmt_num(r.value),
            None if both => "nan".into(),
            None => String::new(),
        });
        if let Some(r) = cell.result(ProtocolKind::Cold) {
            f_cold[cell.i][cell.j] = r.reported_fidelity(subspace);
        }
        if let Some(r) = cell.ratio() {
            ratio[cell.i][cell.j] = r.value;
        }
        csv.row(&row)?;
    }
    csv.save(&dir.join("sweep.csv"))?;
    let (xs, ys) = (&spec.axis1.values, &spec.axis2.values);
    if spec.protocols.contains(&ProtocolKind::Cold) {
        let svg = heatmap_svg("F_COLD", x_name, y_name, xs, ys, &f_cold, false);
        let path = dir.join("heatmap_F_COLD.svg");
        fs::write(&path, svg).map_err(|e| io_error(&path, e))?;
    }
    if spec.protocols.contains(&ProtocolKind::Cold) && spec.protocols.contains(&ProtocolKind::Ua) {
        let svg = heatmap_svg("R = F_COLD / F_UA", x_name, y_name, xs, ys, &ratio, true);
        let path = dir.join("heatmap_R.svg");
        fs::write(&path, svg).map_err(|e| io_error(&path, e))?;
    }
    let failures = grid.failures();
    println!(
        "sweep: {} cells ({} reused), {failures} failed runs, written to {}",
        grid.cells.len(),
        grid.cells.len() - computed,
        dir.display()
    );
    if failures > 0 {
        for cell in &grid.cells {
            for (k, r) in &cell.results {
                if let Err(e) = r {
                    eprintln!("cell {} ({x_name}={}, {y_name}={}) {k}: {e}", cell.index, fmt_num(cell.p1), fmt_num(cell.p2));
                }
            }
        }
        return Err(CliError::Runtime(format!("{failures} sweep runs failed")));
    }
    Ok(())
}

/// Per-table settings for `cold reproduce`.
#[derive(Debug, Clone, Default)]
pub struct ReproduceArgs {
    pub table: String,
    /// Optimiser budget per run; the default is the full budget.
    pub evaluations: Option<usize>,
    pub seeds: Option<Vec<u64>>,
}

fn budget(evaluations: usize) -> OptimizerConfig {
    let n_init = (evaluations * 8 / 50).clamp(2, 8).min(evaluations.max(2));
    OptimizerConfig {
        n_init,
        n_iter: evaluations.saturating_sub(n_init),
        ..Default::default()
    }
}

/// `cold reproduce`: recompute one reference table and score every cell.
pub fn reproduce(g: &Global, args: &ReproduceArgs) -> Result<(), CliError> {
    let id: TableId = args.table.parse().map_err(config_err)?;
    let cfg = g.config.as_ref().map(|_| g.load()).transpose()?;
    let mut opts = ReproduceOptions {
        jobs: g.jobs,
        boundary: g.overrides.boundary,
        subspace_fidelity: g.overrides.subspace_fidelity,
        ..Default::default()
    };
    if let Some(s) = &args.seeds {
        if s.is_empty() {
            return Err(CliError::Config("--seeds needs at least one seed".into()));
        }
        opts.seeds = s.clone();
    }
    if let Some(e) = args.evaluations {
        opts.optimizer = budget(e);
        opts.optimizer.validate().map_err(config_err)?;
    }
    if let Some(c) = &cfg {
        opts.evolve = c.evolve;
    }
    let dir = g.out_dir(cfg.as_ref());
    create_dir(&dir)?;
    let report = reproduce_table(id, &opts)?;
    let digest = sha256_hex(&format!(
        "{id} {:?} {:?} {:?} {:?} {}",
        opts.seeds, opts.optimizer, opts.evolve, opts.boundary, opts.subspace_fidelity
    ));
    write_json(&dir.join(format!("reproduce_{id}.json")), &report)?;
    let header: Vec<String> = ["row", "column", "reference", "computed", "relative_deviation", "tolerance", "pass"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut csv = CsvOut::new(&digest, &header)?;
    for c in &report.cells {
        csv.row(&[
            c.row.clone(),
            c.column.clone(),
            fmt_num(c.reference),
            c.computed.map_or_else(|| "nan".into(), fmt_num),
            c.relative_deviation.map_or_else(String::new, fmt_num),
            c.tolerance.to_string(),
            c.pass.to_string(),
        ])?;
    }
    csv.save(&dir.join(format!("reproduce_{id}.csv")))?;
    print!("{report}");
    let failed = report.cells.iter().filter(|c| !c.pass).count();
    if failed > 0 {
        return Err(CliError::Failed(format!("{id}: {failed} of {} cells outside tolerance", report.cells.len())));
    }
    println!("{id}: all {} cells within tolerance", report.cells.len());
    Ok(())
}

/// Resolved Hamiltonian path for `agp` and `spectrum`.
struct Path3 {
    h_i: PauliSum,
    h_f: PauliSum,
    o: PauliSum,
    basis: Vec<PauliSum>,
    drive: DriveSpec,
}

impl Path3 {
    fn digest(&self, extra: &str) -> String {
        let mut text = format!("{}|{}|{}|", self.h_i, self.h_f, self.o);
        for b in &self.basis {
            text += &format!("{b}|");
        }
        text += &serde_json::to_string(&self.drive).unwrap_or_default();
        text += extra;
        sha256_hex(&text)
    }
}

fn resolve_path(cfg: &RunConfig, o: &Overrides, need_basis: bool) -> Result<Path3, CliError> {
    let drive = cfg.drive_spec()?;
    if let Some((h_i, h_f, o, basis)) = cfg.custom_operators()? {
        if cfg.model.is_some() {
            return Err(CliError::Config("give either [model] or [custom], not both".into()));
        }
        if need_basis && basis.is_empty() {
            return Err(CliError::Config("custom.basis must list at least one operator".into()));
        }
        return Ok(Path3 { h_i, h_f, o, basis, drive });
    }
    let model = cfg.model_spec(o)?;
    let h_i = build_initial_hamiltonian(model.n_sites);
    let h_f = build_final_hamiltonian(&model).map_err(config_err)?;
    let control = cfg.protocol.as_ref().and_then(|p| p.control.as_deref());
    let o = match control {
        Some(text) => {
            let op: PauliSum = text.parse().map_err(config_err)?;
            if op.n_sites() != model.n_sites {
                return Err(CliError::Config("control operator has the wrong size".into()));
            }
            op
        }
        None => control_operators(&model).map_err(config_err)?,
    };
    let ansatz = cfg
        .agp
        .ansatz
        .or(cfg.protocol.as_ref().map(|p| p.ansatz))
        .unwrap_or(AnsatzKind::Local);
    let basis = if need_basis {
        ansatz_basis(ansatz, model.n_sites, model.boundary).map_err(config_err)?
    } else {
        Vec::new()
    };
    Ok(Path3 { h_i, h_f, o, basis, drive })
}

const MONOMIALS: [&str; 6] = ["", "lambda", "f", "lambda^2", "lambda f", "f^2"];

fn poly_text(p: &Poly2) -> String {
    terms(&p.0, &MONOMIALS)
}

fn terms(coeffs: &[f64], names: &[&str]) -> String {
    let parts: Vec<String> = coeffs
        .iter()
        .zip(names)
        .filter(|(c, _)| **c != 0.0)
        .map(|(c, n)| if n.is_empty() { fmt_num(*c) } else { format!("{} {n}", fmt_num(*c)) })
        .collect();
    if parts.is_empty() {
        "0".into()
    } else {
        parts.join(" + ")
    }
}

fn rhs_text(r: &RhsPoly) -> String {
    let names = ["", "lambda", "f"];
    format!(
        "lambda_dot ({}) + f_dot ({})",
        terms(&r.lambda_dot, &names),
        terms(&r.f_dot, &names)
    )
}

/// `cold agp`: polynomial tables and `α(t)` on a grid.
pub fn agp(g: &Global) -> Result<(), CliError> {
    let cfg = g.load()?;
    let path = resolve_path(&cfg, &g.overrides, true)?;
    if cfg.agp.points < 2 {
        return Err(CliError::Config("agp.points must be at least 2".into()));
    }
    let structure = build_structure(&path.h_i, &path.h_f, &path.o, &path.basis).map_err(config_err)?;
    let dir = g.out_dir(Some(&cfg));
    create_dir(&dir)?;
    let digest = path.digest(&format!("agp {}", cfg.agp.points));
    let m = structure.basis_size();

    let mut text = format!("# config_digest={digest}\n");
    text += "# M alpha = -b with M_jk and b_j below\n";
    for (j, b) in structure.basis().iter().enumerate() {
        text += &format!("basis {}:\n{b}", j + 1);
    }
    for j in 0..m {
        for k in 0..m {
            text += &format!("M[{}][{}] = {}\n", j + 1, k + 1, poly_text(&structure.gram_poly(j, k)));
        }
    }
    for j in 0..m {
        text += &format!("b[{}] = {}\n", j + 1, rhs_text(&structure.rhs_poly(j)));
    }
    let tables = dir.join("agp_tables.txt");
    fs::write(&tables, text).map_err(|e| io_error(&tables, e))?;

    let mut header: Vec<String> = ["t", "lambda", "lambda_dot", "f", "f_dot"].iter().map(|s| s.to_string()).collect();
    header.extend((1..=m).map(|j| format!("alpha_{j}")));
    let mut csv = CsvOut::new(&digest, &header)?;
    let last = cfg.agp.points - 1;
    for i in 0..=last {
        let t = path.drive.tau * i as f64 / last as f64;
        let ctx = ScheduleContext::at(t, &path.drive)?;
        let alpha = structure.solve_alpha(&ctx, None)?;
        let mut row = vec![ctx.t, ctx.lambda, ctx.lambda_dot, ctx.f, ctx.f_dot];
        row.extend(alpha.iter());
        csv.numbers(&row)?;
    }
    csv.save(&dir.join("alpha.csv"))?;
    println!("agp: {m} coefficients on {} points, written to {}", last + 1, dir.display());
    Ok(())
}

/// `cold spectrum`: gap along the path and the adiabatic time bound.
pub fn spectrum(g: &Global) -> Result<(), CliError> {
    let cfg = g.load()?;
    let path = resolve_path(&cfg, &g.overrides, false)?;
    let (points, delta) = (cfg.spectrum.points, cfg.spectrum.delta);
    if points < 2 || !(delta > 0.0) {
        return Err(CliError::Config("spectrum needs points >= 2 and delta > 0".into()));
    }
    let dir = g.out_dir(Some(&cfg));
    create_dir(&dir)?;
    let report = adiabatic_bound_operators(&path.h_i, &path.h_f, &path.o, &path.drive, delta, points)?;
    let digest = path.digest(&format!("spectrum {points} {delta}"));
    let header: Vec<String> = ["s", "E0", "E1", "gap", "norm_dH", "norm_d2H"].iter().map(|s| s.to_string()).collect();
    let mut csv = CsvOut::new(&digest, &header)?;
    for n in &report.nodes {
        csv.numbers(&[n.s, n.e0, n.e1, n.gap, n.norm_d1, n.norm_d2])?;
    }
    csv.save(&dir.join("spectrum.csv"))?;
    write_json(&dir.join("bound.json"), &report)?;
    match report.value {
        Some(v) => println!(
            "{} = {} (delta = {}, minimum gap {} at s = {})",
            report.label,
            fmt_num(v),
            fmt_num(delta),
            fmt_num(report.min_gap),
            fmt_num(report.min_gap_s)
        ),
        None => println!(
            "bound diverges: gap closes (minimum {}) at s = {}",
            fmt_num(report.min_gap),
            fmt_num(report.min_gap_s)
        ),
    }
    Ok(())
}
