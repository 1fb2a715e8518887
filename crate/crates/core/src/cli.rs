//! Command-line front end.
//!
//! Exit codes: 0 success, 2 invalid input, 3 solver failure, 4 failed
//! verification.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::baselines::{baseline_load, Baseline};
use crate::bounds::{cutset_budget, cutset_fixed, cutset_k3};
use crate::closed_form::{corner_points, theorem1_load, threshold_allocation};
use crate::error::{Error, Result};
use crate::model::{InstanceFile, MemoryConstraint, ProblemInstance};
use crate::scheme::{build_for, build_o1, build_o2, Delivery, SchemeSolution, WARN_USERS};
use crate::simulator::verify;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "hetcache", version, about = "Coded caching for users with heterogeneous quality demands")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Joint,
    Intra,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the instance's design problem and print the optimal load.
    Solve {
        instance: PathBuf,
        #[arg(long, value_enum, default_value = "joint")]
        mode: Mode,
        /// Write the optimal scheme as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the assembled LP in text form.
        #[arg(long)]
        dump_lp: Option<PathBuf>,
    },
    /// Load versus budget: LP optimum, closed form, cut-set bound and the
    /// threshold allocation.
    Sweep {
        instance: PathBuf,
        #[arg(long, default_value_t = 50)]
        points: usize,
        /// Use only the uniform grid, without the corner budgets.
        #[arg(long)]
        no_corners: bool,
        /// Worker threads (0 = all cores).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Joint design against PCA and OCA splits for geometric cache sizes
    /// `m_k = g·m_{k+1}`.
    CompareBaselines {
        instance: PathBuf,
        #[arg(long, default_value_t = 0.8)]
        ratio: f64,
        #[arg(long, default_value_t = 20)]
        points: usize,
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Cut-set lower bound for the instance.
    Bounds {
        instance: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Bit-level simulation of the optimal (or a given) scheme.
    Verify {
        instance: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        file_size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Verify this scheme JSON instead of solving.
        #[arg(long)]
        scheme: Option<PathBuf>,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run_from<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    match execute(&cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Solver(_) | Error::NotOptimal(_) | Error::Extraction(_) => EXIT_SOLVER,
        Error::Simulation(_) => EXIT_VERIFY,
        _ => EXIT_INVALID,
    }
}

pub fn execute(command: &Command, out: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Solve { instance, mode, out: path, dump_lp } => {
            cmd_solve(&load_instance(instance)?, *mode, path.as_deref(), dump_lp.as_deref(), out)
        }
        Command::Sweep { instance, points, no_corners, jobs, out: path, format } => {
            let inst = load_instance(instance)?;
            let rows = pooled(*jobs, || cmd_sweep(&inst, *points, !*no_corners))?;
            emit(&sweep_table(&inst, &rows), &rows, *format, path.as_deref(), out)
        }
        Command::CompareBaselines { instance, ratio, points, jobs, out: path, format } => {
            let inst = load_instance(instance)?;
            let rows = pooled(*jobs, || cmd_compare(&inst, *ratio, *points))?;
            emit(&compare_table(&rows), &rows, *format, path.as_deref(), out)
        }
        Command::Bounds { instance, format } => cmd_bounds(&load_instance(instance)?, *format, out),
        Command::Verify { instance, file_size, seed, scheme, out: path } => {
            cmd_verify(&load_instance(instance)?, *file_size, *seed, scheme.as_deref(), path.as_deref(), out)
        }
    }
}

pub fn load_instance(path: &Path) -> Result<ProblemInstance> {
    let text = fs::read_to_string(path)?;
    InstanceFile::from_json(&text)?.into_instance()
}

fn warn_size(inst: &ProblemInstance) {
    if inst.users > WARN_USERS {
        eprintln!("warning: K = {} > {WARN_USERS}; the LP grows like 3^K and may be slow", inst.users);
    }
}

fn pooled<T: Send>(jobs: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Domain(format!("cannot start worker pool: {e}")))?;
    pool.install(f)
}

fn solve_instance(inst: &ProblemInstance, mode: Mode) -> Result<SchemeSolution> {
    let model = match mode {
        Mode::Joint => build_for(inst, Delivery::Joint)?,
        Mode::Intra => build_for(inst, Delivery::IntraLayer)?,
    };
    model.solve()
}

pub fn cmd_solve(
    inst: &ProblemInstance,
    mode: Mode,
    path: Option<&Path>,
    dump_lp: Option<&Path>,
    out: &mut dyn Write,
) -> Result<i32> {
    warn_size(inst);
    let delivery = match mode {
        Mode::Joint => Delivery::Joint,
        Mode::Intra => Delivery::IntraLayer,
    };
    let model = build_for(inst, delivery)?;
    if let Some(p) = dump_lp {
        fs::write(p, model.to_lp().dump())?;
    }
    let sol = model.solve()?;
    writeln!(out, "load = {:.6}", sol.objective)?;
    writeln!(out, "variables = {}", model.index.len())?;
    if let Some(p) = path {
        fs::write(p, serde_json::to_string_pretty(&sol.to_json())?)?;
    }
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub m_tot: f64,
    pub lp_load: f64,
    pub theorem1_load: f64,
    pub cutset: f64,
    /// Threshold allocation `m_1..m_K`.
    pub allocation: Vec<f64>,
}

/// `points` uniformly spaced budgets on `[0, total]`, merged with `extra`,
/// sorted and de-duplicated.
pub fn sweep_grid(total: f64, points: usize, extra: &[f64]) -> Vec<f64> {
    let mut grid: Vec<f64> = match points {
        0 => Vec::new(),
        1 => vec![0.0],
        p => (0..p).map(|i| total * i as f64 / (p - 1) as f64).collect(),
    };
    grid.extend_from_slice(extra);
    grid.sort_by(f64::total_cmp);
    let tol = 1e-12 * (1.0 + total);
    grid.dedup_by(|a, b| (*a - *b).abs() <= tol);
    grid
}

pub fn cmd_sweep(inst: &ProblemInstance, points: usize, corners: bool) -> Result<Vec<SweepRow>> {
    if inst.budget().is_none() {
        return Err(Error::Domain("sweep needs a budget instance".into()));
    }
    warn_size(inst);
    let rates = &inst.rates;
    let extra: Vec<f64> = if corners { corner_points(rates).iter().map(|p| p.0).collect() } else { Vec::new() };
    let grid = sweep_grid(rates.total_rate(), points, &extra);
    grid.par_iter()
        .map(|&m_tot| {
            let point = ProblemInstance { constraint: MemoryConstraint::Budget(m_tot), ..inst.clone() };
            let lp_load = build_o1(&point)?.solve()?.objective;
            Ok(SweepRow {
                m_tot,
                lp_load,
                theorem1_load: theorem1_load(m_tot, rates)?,
                cutset: cutset_budget(rates, inst.files, m_tot)?.value,
                allocation: threshold_allocation(m_tot, rates)?.per_user,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub m_tot: f64,
    pub joint_o2: f64,
    pub pca: f64,
    pub oca: f64,
    pub cutset_fixed: f64,
    pub memories: Vec<f64>,
}

/// Cache vectors `m_k = g·m_{k+1}` for `points` totals from zero up to the
/// largest total that still fits every `m_k ≤ r_k`.
pub fn geometric_memories(rates: &[f64], ratio: f64, points: usize) -> Result<Vec<Vec<f64>>> {
    if !(ratio.is_finite() && ratio > 0.0) {
        return Err(Error::Domain(format!("ratio must be positive, got {ratio}")));
    }
    let k = rates.len();
    let shape: Vec<f64> = (0..k).map(|i| ratio.powi((k - 1 - i) as i32)).collect();
    let scale_max = rates.iter().zip(&shape).map(|(r, w)| r / w).fold(f64::INFINITY, f64::min);
    let scales: Vec<f64> = match points {
        0 => Vec::new(),
        1 => vec![0.0],
        p => (0..p).map(|i| scale_max * i as f64 / (p - 1) as f64).collect(),
    };
    Ok(scales.iter().map(|&s| shape.iter().zip(rates).map(|(w, &r)| (s * w).min(r)).collect()).collect())
}

pub fn cmd_compare(inst: &ProblemInstance, ratio: f64, points: usize) -> Result<Vec<CompareRow>> {
    warn_size(inst);
    let rates = &inst.rates;
    let grid = geometric_memories(rates.rates(), ratio, points)?;
    grid.par_iter()
        .map(|m| {
            let point = ProblemInstance { constraint: MemoryConstraint::Fixed(m.clone()), ..inst.clone() };
            Ok(CompareRow {
                m_tot: m.iter().sum(),
                joint_o2: build_o2(&point)?.solve()?.objective,
                pca: baseline_load(Baseline::Pca, m, rates)?,
                oca: baseline_load(Baseline::Oca, m, rates)?,
                cutset_fixed: cutset_fixed(rates, inst.files, m)?.value,
                memories: m.clone(),
            })
        })
        .collect()
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

fn sweep_table(inst: &ProblemInstance, rows: &[SweepRow]) -> Table {
    let mut header: Vec<String> = ["m_tot", "lp_load", "theorem1_load", "cutset"].map(String::from).to_vec();
    header.extend((1..=inst.users).map(|k| format!("m_{k}")));
    Table {
        header,
        rows: rows
            .iter()
            .map(|r| {
                let mut v = vec![r.m_tot, r.lp_load, r.theorem1_load, r.cutset];
                v.extend_from_slice(&r.allocation);
                v
            })
            .collect(),
    }
}

fn compare_table(rows: &[CompareRow]) -> Table {
    Table {
        header: ["m_tot", "joint_o2", "pca", "oca", "cutset_fixed"].map(String::from).to_vec(),
        rows: rows.iter().map(|r| vec![r.m_tot, r.joint_o2, r.pca, r.oca, r.cutset_fixed]).collect(),
    }
}

fn write_csv(table: &Table, sink: &mut dyn Write) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(sink);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(&table.header).map_err(csv_err)?;
    for row in &table.rows {
        w.write_record(row.iter().map(|x| x.to_string())).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn emit<T: Serialize>(
    table: &Table,
    rows: &T,
    format: Format,
    path: Option<&Path>,
    out: &mut dyn Write,
) -> Result<i32> {
    let mut buf = Vec::new();
    match format {
        Format::Csv => write_csv(table, &mut buf)?,
        Format::Json => {
            serde_json::to_writer_pretty(&mut buf, rows)?;
            buf.push(b'\n');
        }
    }
    match path {
        Some(p) => fs::write(p, buf)?,
        None => out.write_all(&buf)?,
    }
    Ok(EXIT_OK)
}

pub fn cmd_bounds(inst: &ProblemInstance, format: Format, out: &mut dyn Write) -> Result<i32> {
    let report = match &inst.constraint {
        MemoryConstraint::Budget(b) => cutset_budget(&inst.rates, inst.files, *b)?,
        MemoryConstraint::Fixed(m) => cutset_fixed(&inst.rates, inst.files, m)?,
    };
    let closed = match inst.budget() {
        Some(b) if inst.users == 3 => Some(cutset_k3(&inst.rates, inst.files, b)?),
        _ => None,
    };
    match format {
        Format::Json => {
            let value = serde_json::json!({
                "bound": report.value,
                "raw": report.raw,
                "binding_set": report.binding_set.to_string(),
                "memories": report.memories,
                "closed_form": closed,
            });
            writeln!(out, "{}", serde_json::to_string_pretty(&value)?)?;
        }
        Format::Csv => {
            writeln!(out, "bound = {:.6}", report.value)?;
            writeln!(out, "raw = {:.6}", report.raw)?;
            writeln!(out, "binding_set = {}", report.binding_set)?;
            let m: Vec<String> = report.memories.iter().map(|x| format!("{x:.6}")).collect();
            writeln!(out, "memories = [{}]", m.join(", "))?;
            if let Some(c) = closed {
                writeln!(out, "closed_form = {c:.6}")?;
            }
        }
    }
    Ok(EXIT_OK)
}

pub fn cmd_verify(
    inst: &ProblemInstance,
    file_size: usize,
    seed: u64,
    scheme: Option<&Path>,
    path: Option<&Path>,
    out: &mut dyn Write,
) -> Result<i32> {
    if file_size == 0 {
        return Err(Error::Domain("--file-size must be at least 1".into()));
    }
    let sol = match scheme {
        Some(p) => SchemeSolution::from_json(&serde_json::from_str(&fs::read_to_string(p)?)?)?,
        None => {
            warn_size(inst);
            solve_instance(inst, Mode::Joint)?
        }
    };
    let report = verify(inst, &sol, file_size, seed)?;
    writeln!(out, "{}", if report.passed { "PASS" } else { "FAIL" })?;
    if let Some(msg) = &report.failure {
        writeln!(out, "failure: {msg}")?;
    }
    for u in &report.users {
        writeln!(
            out,
            "user {}: {} (missing {}, wrong {}, redundant {})",
            u.user,
            if u.decoded { "decoded" } else { "FAILED" },
            u.missing_bits,
            u.wrong_bits,
            u.redundant_bits
        )?;
    }
    writeln!(out, "measured load = {:.6}", report.measured_load)?;
    writeln!(out, "predicted load = {:.6}", report.predicted_load)?;
    writeln!(out, "discrepancy = {:.6} (allowed {:.6})", report.max_discrepancy, report.tolerance)?;
    let json = serde_json::to_string_pretty(&report)?;
    match path {
        Some(p) => fs::write(p, json)?,
        None => writeln!(out, "{json}")?,
    }
    Ok(if report.passed { EXIT_OK } else { EXIT_VERIFY })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_merges_and_dedups() {
        let g = sweep_grid(2.2, 2, &[0.0, 0.5, 2.2]);
        assert_eq!(g, vec![0.0, 0.5, 2.2]);
        assert_eq!(sweep_grid(1.0, 3, &[]), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn geometric_memories_fit_rates() {
        let grid = geometric_memories(&[0.5, 0.8, 1.0], 0.8, 5).unwrap();
        assert_eq!(grid.len(), 5);
        assert!(grid[0].iter().all(|&x| x == 0.0));
        for m in &grid {
            assert!((m[0] - 0.8 * m[1]).abs() < 1e-12 || m[0] == 0.5);
            assert!(m.iter().zip([0.5, 0.8, 1.0]).all(|(x, r)| *x <= r));
        }
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Invalid(vec![])), EXIT_INVALID);
        assert_eq!(exit_code(&Error::Solver("x".into())), EXIT_SOLVER);
        assert_eq!(exit_code(&Error::Simulation("x".into())), EXIT_VERIFY);
    }
}
