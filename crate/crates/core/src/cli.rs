//! Command-line front end: configuration from flags and `key = value`
//! files, experiment dispatch and deterministic CSV/JSON tables.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analysis::{compute_errors, convergence_study, check_penalty, count_costs, manufactured_case, nu_sweep, solve_case, StudyConfig};
use crate::assembly::default_lambda;
use crate::error::{HdgError, Result};
use crate::fespace::ConformityMode;
use crate::mesh::unit_square_mesh;
use crate::refbasis::{build_reference_basis, check_highest_order_volume_orthogonality, check_normal_orthogonality};
use crate::solver::Variant;

pub const THREADS_ENV: &str = "HDG_STOKES_THREADS";

/// Violations above this fail `basis-check`.
pub const BASIS_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Parser)]
#[command(name = "hdg-stokes", about = "Relaxed H(div)-conforming HDG Stokes solver")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Solve,
    Convergence,
    NuSweep,
    Counts,
    BasisCheck,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the manufactured problem on one mesh and report errors.
    Solve(Flags),
    /// Errors and rates over uniform refinements.
    Convergence(Flags),
    /// Basic and pressure-robust gradient errors over viscosities.
    NuSweep(Flags),
    /// Unknown counts and condensed nonzeros without solving.
    Counts(Flags),
    /// Normal-trace and volume orthogonality of the reference bases.
    BasisCheck(Flags),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Full,
    Relaxed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Basic,
    Pr,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// `key = value` file; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long = "mesh-n")]
    pub mesh_n: Option<usize>,
    #[arg(long)]
    pub levels: Option<usize>,
    #[arg(long)]
    pub nu: Option<f64>,
    /// Comma-separated viscosities for `nu-sweep`.
    #[arg(long, value_delimiter = ',')]
    pub nus: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long, value_enum)]
    pub variant: Option<VariantArg>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub reconstruct: Option<bool>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long = "reduced-space", num_args = 0..=1, default_missing_value = "true")]
    pub reduced_space: Option<bool>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: CommandKind,
    pub k: usize,
    pub mesh_n: usize,
    pub levels: usize,
    pub nu: f64,
    pub nus: Vec<f64>,
    pub mode: ConformityMode,
    pub variant: Variant,
    pub reconstruct: bool,
    /// `None` selects the order-dependent default.
    pub lambda: Option<f64>,
    pub reduced_space: bool,
    pub output: Option<PathBuf>,
    pub format: Format,
}

impl RunConfig {
    pub fn new(command: CommandKind) -> Self {
        Self {
            command,
            k: 2,
            mesh_n: 4,
            levels: 4,
            nu: 1.0,
            nus: (-6..=2).map(|j| 10f64.powi(j)).collect(),
            mode: ConformityMode::Relaxed,
            variant: Variant::Basic,
            reconstruct: false,
            lambda: None,
            reduced_space: false,
            output: None,
            format: Format::Csv,
        }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda.unwrap_or_else(|| default_lambda(self.k))
    }

    /// Applies one `key = value` entry.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| HdgError::InvalidConfig(format!("invalid {what}: {value:?}"));
        let num = |what: &str| value.parse::<f64>().map_err(|_| bad(what));
        let int = |what: &str| value.parse::<usize>().map_err(|_| bad(what));
        let flag = |what: &str| value.parse::<bool>().map_err(|_| bad(what));
        match key.replace('-', "_").as_str() {
            "k" => self.k = int("k")?,
            "mesh_n" => self.mesh_n = int("mesh_n")?,
            "levels" => self.levels = int("levels")?,
            "nu" => self.nu = num("nu")?,
            "nus" => self.nus = value.split(',').map(|v| v.trim().parse::<f64>().map_err(|_| bad("nus"))).collect::<Result<_>>()?,
            "mode" => {
                self.mode = match value {
                    "full" => ConformityMode::Full,
                    "relaxed" => ConformityMode::Relaxed,
                    _ => return Err(bad("mode")),
                }
            }
            "variant" => {
                self.variant = match value {
                    "basic" => Variant::Basic,
                    "pr" => Variant::PressureRobust,
                    _ => return Err(bad("variant")),
                }
            }
            "reconstruct" => self.reconstruct = flag("reconstruct")?,
            "lambda" => self.lambda = Some(num("lambda")?),
            "reduced_space" => self.reduced_space = flag("reduced_space")?,
            "output" => self.output = Some(PathBuf::from(value)),
            "format" => {
                self.format = match value {
                    "csv" => Format::Csv,
                    "json" => Format::Json,
                    _ => return Err(bad("format")),
                }
            }
            _ => return Err(HdgError::InvalidConfig(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Applies a `key = value` text; `#` starts a comment.
    pub fn apply_file_text(&mut self, text: &str) -> Result<()> {
        for (ln, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| HdgError::InvalidConfig(format!("line {}: expected key = value", ln + 1)))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn apply_flags(&mut self, f: &Flags) {
        if let Some(v) = f.k {
            self.k = v;
        }
        if let Some(v) = f.mesh_n {
            self.mesh_n = v;
        }
        if let Some(v) = f.levels {
            self.levels = v;
        }
        if let Some(v) = f.nu {
            self.nu = v;
        }
        if let Some(v) = &f.nus {
            self.nus = v.clone();
        }
        if let Some(v) = f.mode {
            self.mode = match v {
                ModeArg::Full => ConformityMode::Full,
                ModeArg::Relaxed => ConformityMode::Relaxed,
            };
        }
        if let Some(v) = f.variant {
            self.variant = match v {
                VariantArg::Basic => Variant::Basic,
                VariantArg::Pr => Variant::PressureRobust,
            };
        }
        if let Some(v) = f.reconstruct {
            self.reconstruct = v;
        }
        if let Some(v) = f.lambda {
            self.lambda = Some(v);
        }
        if let Some(v) = f.reduced_space {
            self.reduced_space = v;
        }
        if let Some(v) = &f.output {
            self.output = Some(v.clone());
        }
        if let Some(v) = f.format {
            self.format = v;
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(HdgError::InvalidOrder(self.k));
        }
        if self.levels < 1 || self.mesh_n < 1 {
            return Err(HdgError::InvalidConfig("levels and mesh_n must be at least 1".into()));
        }
        if !(self.nu > 0.0 && self.nu.is_finite()) || self.nus.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(HdgError::InvalidConfig("viscosities must be positive".into()));
        }
        if self.lambda.is_some_and(|l| !(l > 0.0 && l.is_finite())) {
            return Err(HdgError::InvalidConfig("lambda must be positive".into()));
        }
        if self.variant == Variant::PressureRobust && self.mode == ConformityMode::Full {
            return Err(HdgError::InvalidConfig("variant pr requires mode relaxed".into()));
        }
        Ok(())
    }

    fn study(&self) -> StudyConfig {
        StudyConfig {
            k: self.k,
            mode: self.mode,
            variant: self.variant,
            reconstruct: self.reconstruct,
            levels: self.levels,
            n0: self.mesh_n,
            nu: self.nu,
            lambda: self.lambda(),
            reduced: self.reduced_space,
        }
    }
}

/// Builds the run configuration of a parsed command line.
pub fn resolve(cli: &Cli) -> Result<RunConfig> {
    let (kind, flags) = match &cli.command {
        Command::Solve(f) => (CommandKind::Solve, f),
        Command::Convergence(f) => (CommandKind::Convergence, f),
        Command::NuSweep(f) => (CommandKind::NuSweep, f),
        Command::Counts(f) => (CommandKind::Counts, f),
        Command::BasisCheck(f) => (CommandKind::BasisCheck, f),
    };
    let mut cfg = RunConfig::new(kind);
    if let Some(p) = &flags.config {
        cfg.apply_file_text(&std::fs::read_to_string(p)?)?;
    }
    cfg.apply_flags(flags);
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(usize),
    Float(f64),
    Text(String),
    Missing,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format!("{v:.15e}"),
            Cell::Text(s) => s.clone(),
            Cell::Missing => String::new(),
        }
    }

    fn json(&self) -> serde_json::Value {
        match self {
            Cell::Int(v) => (*v).into(),
            Cell::Float(v) => serde_json::Number::from_f64(*v).map_or(serde_json::Value::Null, serde_json::Value::Number),
            Cell::Text(s) => s.clone().into(),
            Cell::Missing => serde_json::Value::Null,
        }
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Missing, Cell::Float)
    }
}

/// Output of one command; `passed` is false when an internal check failed.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    pub passed: bool,
}

impl Table {
    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.iter().map(Cell::csv).collect::<Vec<_>>().join(","));
            s.push('\n');
        }
        s
    }

    pub fn to_json(&self) -> String {
        let rows: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|r| serde_json::Value::Object(self.columns.iter().zip(r).map(|(c, v)| (c.to_string(), v.json())).collect()))
            .collect();
        let mut s = serde_json::to_string_pretty(&rows).expect("serializable table");
        s.push('\n');
        s
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }
}

pub fn run(cfg: &RunConfig) -> Result<Table> {
    cfg.validate()?;
    match cfg.command {
        CommandKind::Solve => run_solve(cfg),
        CommandKind::Convergence => run_convergence(cfg),
        CommandKind::NuSweep => run_nu_sweep(cfg),
        CommandKind::Counts => run_counts(cfg),
        CommandKind::BasisCheck => run_basis_check(cfg),
    }
}

fn run_solve(cfg: &RunConfig) -> Result<Table> {
    let study = cfg.study();
    check_penalty(study.k, study.mode, study.lambda, cfg.mesh_n)?;
    let mesh = unit_square_mesh(cfg.mesh_n);
    let (system, sol) = solve_case(&mesh, &study)?;
    let e = compute_errors(&system, &sol, &manufactured_case(cfg.nu))?;
    Ok(Table {
        columns: vec!["k", "elements", "dofs", "gdofs", "nze", "l2_u", "h1_u", "l2_p", "div_l2", "jump_n"],
        rows: vec![vec![
            Cell::Int(cfg.k),
            Cell::Int(mesh.n_elements()),
            Cell::Int(e.dofs),
            Cell::Int(e.gdofs),
            Cell::Int(e.nze),
            Cell::Float(e.l2_velocity),
            Cell::Float(e.h1_broken_velocity),
            Cell::Float(e.l2_pressure),
            Cell::Float(e.div_l2),
            Cell::Float(e.normal_jump_l2),
        ]],
        passed: true,
    })
}

fn run_convergence(cfg: &RunConfig) -> Result<Table> {
    let t = convergence_study(&cfg.study())?;
    Ok(Table {
        columns: vec!["level", "h", "elements", "dofs", "gdofs", "nze", "l2_u", "h1_u", "l2_p", "div_l2", "jump_n", "rate_l2_u", "rate_h1_u"],
        rows: t
            .rows
            .iter()
            .map(|r| {
                vec![
                    Cell::Int(r.level),
                    Cell::Float(r.h),
                    Cell::Int(r.elements),
                    Cell::Int(r.report.dofs),
                    Cell::Int(r.report.gdofs),
                    Cell::Int(r.report.nze),
                    Cell::Float(r.report.l2_velocity),
                    Cell::Float(r.report.h1_broken_velocity),
                    Cell::Float(r.report.l2_pressure),
                    Cell::Float(r.report.div_l2),
                    Cell::Float(r.report.normal_jump_l2),
                    r.rate_l2_u.into(),
                    r.rate_h1_u.into(),
                ]
            })
            .collect(),
        passed: true,
    })
}

fn run_nu_sweep(cfg: &RunConfig) -> Result<Table> {
    let rows = nu_sweep(cfg.k, cfg.mesh_n, &cfg.nus, cfg.lambda())?;
    Ok(Table {
        columns: vec!["nu", "basic_h1", "pr_h1", "basic_l2", "pr_l2"],
        rows: rows
            .iter()
            .map(|r| vec![Cell::Float(r.nu), Cell::Float(r.basic_h1), Cell::Float(r.pr_h1), Cell::Float(r.basic_l2), Cell::Float(r.pr_l2)])
            .collect(),
        passed: true,
    })
}

fn run_counts(cfg: &RunConfig) -> Result<Table> {
    let mesh = unit_square_mesh(cfg.mesh_n);
    let c = count_costs(&mesh, cfg.k, cfg.mode)?;
    let mode = match cfg.mode {
        ConformityMode::Full => "full",
        ConformityMode::Relaxed => "relaxed",
    };
    Ok(Table {
        columns: vec!["mode", "k", "mesh_n", "elements", "interior_facets", "dofs", "gdofs", "nze"],
        rows: vec![vec![
            Cell::Text(mode.into()),
            Cell::Int(cfg.k),
            Cell::Int(cfg.mesh_n),
            Cell::Int(mesh.n_elements()),
            Cell::Int(mesh.n_interior_facets()),
            Cell::Int(c.dofs),
            Cell::Int(c.gdofs),
            Cell::Int(c.nze),
        ]],
        passed: true,
    })
}

/// Checks 2D orders `1..=k` and 3D orders `1..=min(k, 4)`.
fn run_basis_check(cfg: &RunConfig) -> Result<Table> {
    let mut rows = Vec::new();
    let mut passed = true;
    for (dim, kmax, nfacets) in [(2, cfg.k, 3), (3, cfg.k.min(4), 4)] {
        for k in 1..=kmax {
            let b = build_reference_basis(dim, k)?;
            let normal = (0..nfacets).map(|f| check_normal_orthogonality(&b, f)).fold(0.0, f64::max);
            let volume = check_highest_order_volume_orthogonality(&b);
            passed &= normal < BASIS_TOLERANCE && volume < BASIS_TOLERANCE;
            rows.push(vec![Cell::Int(dim), Cell::Int(k), Cell::Int(b.len()), Cell::Float(normal), Cell::Float(volume)]);
        }
    }
    Ok(Table { columns: vec!["dim", "k", "functions", "normal_orthogonality", "volume_orthogonality"], rows, passed })
}

/// Sizes the global thread pool from the environment.
pub fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.trim().parse().map_err(|_| HdgError::InvalidConfig(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
        if n == 0 {
            return Err(HdgError::InvalidConfig(format!("{THREADS_ENV} must be positive")));
        }
        // a pool built earlier in the process stays in place
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Entry point of the binary; returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = configure_threads().and_then(|_| resolve(&cli)).and_then(|cfg| {
        let table = run(&cfg)?;
        let text = table.render(cfg.format);
        match &cfg.output {
            Some(p) => std::fs::write(p, text)?,
            None => print!("{text}"),
        }
        Ok(table.passed)
    });
    match result {
        Ok(true) => 0,
        Ok(false) => {
            eprintln!("error: internal check failed");
            1
        }
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, HdgError::InvalidConfig(_) | HdgError::InvalidOrder(_)) {
                2
            } else {
                1
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<RunConfig> {
        resolve(&Cli::try_parse_from(std::iter::once("hdg-stokes").chain(args.iter().copied())).unwrap())
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.cfg");
        std::fs::write(&p, "# comment\nk = 3\nnu = 1e-2\nmode = relaxed\nformat = json\n").unwrap();
        let cfg = parse(&["solve", "--config", p.to_str().unwrap(), "--k", "1"]).unwrap();
        assert_eq!(cfg.k, 1);
        assert_eq!(cfg.nu, 1e-2);
        assert_eq!(cfg.format, Format::Json);
        assert_eq!(cfg.lambda(), default_lambda(1));
    }

    #[test]
    fn pr_with_full_is_rejected() {
        let e = parse(&["solve", "--variant", "pr", "--mode", "full"]).unwrap_err();
        assert!(matches!(e, HdgError::InvalidConfig(_)));
        assert_eq!(main_with_args(["hdg-stokes", "solve", "--variant", "pr", "--mode", "full"]), 2);
    }

    #[test]
    fn bad_file_entries_are_rejected() {
        let mut c = RunConfig::new(CommandKind::Solve);
        assert!(c.apply_file_text("k = two").is_err());
        assert!(c.apply_file_text("colour = red").is_err());
        assert!(c.apply_file_text("just words").is_err());
        assert!(c.apply_file_text("nus = 1e-3, 1e-2").is_ok());
        assert_eq!(c.nus, vec![1e-3, 1e-2]);
    }

    #[test]
    fn csv_and_json_formatting() {
        let t = Table { columns: vec!["a", "b", "c"], rows: vec![vec![Cell::Int(3), Cell::Float(0.1), Cell::Missing]], passed: true };
        assert_eq!(t.to_csv(), "a,b,c\n3,1.000000000000000e-1,\n");
        let v: serde_json::Value = serde_json::from_str(&t.to_json()).unwrap();
        assert_eq!(v[0]["a"], 3);
        assert_eq!(v[0]["b"], 0.1);
        assert!(v[0]["c"].is_null());
    }

    #[test]
    fn counts_gap_between_modes() {
        let mut c = RunConfig::new(CommandKind::Counts);
        c.k = 1;
        c.mesh_n = 4;
        let relaxed = run(&c).unwrap();
        c.mode = ConformityMode::Full;
        let full = run(&c).unwrap();
        let g = |t: &Table| match t.rows[0][6] {
            Cell::Int(v) => v,
            _ => unreachable!(),
        };
        let Cell::Int(nif) = relaxed.rows[0][4] else { unreachable!() };
        assert_eq!(g(&full) - g(&relaxed), nif);
    }
}
