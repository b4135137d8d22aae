//! Command-line front end: subcommands, CSV emission and the run manifest.
//!
//! Every CSV has a header row, a fixed column order, LF line endings and
//! floats printed with 17 significant digits. Outputs are written to
//! `<prefix>_<name>.csv`; the manifest goes to `<prefix>_manifest.json`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::config::{parse_config, ConfigError, ExperimentConfig};
use crate::furstenberg::{self, Verdict};
use crate::ldt;
use crate::lyapunov;
use crate::model::{check_nontriviality, concat, SingleSiteMeasure};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_DEGENERATE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "anderson-lab",
    version,
    about = "Lyapunov exponents, type-F certificates and large deviations for 1D continuum Anderson models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Experiment configuration (TOML).
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Output path prefix.
    #[arg(long, value_name = "PREFIX", default_value = "anderson")]
    pub out: String,
    /// Master seed; overrides the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads. Never changes results.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    CheckNc,
    SweepLyapunov,
    Certify,
    FindDiscreteSet,
    Ldt,
    BorgMarchenko,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check that some pair of atoms fails to commute under concatenation.
    CheckNc(CommonArgs),
    /// Estimate L(E) on the [lyapunov] energy grid.
    SweepLyapunov(CommonArgs),
    /// Certify the type-F conditions on the [certify] energy grid.
    Certify(CommonArgs),
    /// Locate zeros of det[A,B], tr A, tr B in the [discrete_set] window.
    FindDiscreteSet(CommonArgs),
    /// Fit exponential tail decay on the [ldt] energy grid.
    Ldt(CommonArgs),
    /// Compare transfer matrices and m-functions of swapped star products.
    BorgMarchenko(CommonArgs),
}

impl Command {
    pub fn kind(&self) -> Action {
        match self {
            Command::CheckNc(_) => Action::CheckNc,
            Command::SweepLyapunov(_) => Action::SweepLyapunov,
            Command::Certify(_) => Action::Certify,
            Command::FindDiscreteSet(_) => Action::FindDiscreteSet,
            Command::Ldt(_) => Action::Ldt,
            Command::BorgMarchenko(_) => Action::BorgMarchenko,
        }
    }

    pub fn args(&self) -> &CommonArgs {
        match self {
            Command::CheckNc(a)
            | Command::SweepLyapunov(a)
            | Command::Certify(a)
            | Command::FindDiscreteSet(a)
            | Command::Ldt(a)
            | Command::BorgMarchenko(a) => a,
        }
    }
}

impl Action {
    pub fn name(self) -> &'static str {
        match self {
            Action::CheckNc => "check-nc",
            Action::SweepLyapunov => "sweep-lyapunov",
            Action::Certify => "certify",
            Action::FindDiscreteSet => "find-discrete-set",
            Action::Ldt => "ldt",
            Action::BorgMarchenko => "borg-marchenko",
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Invalid(String),
    #[error("thread pool: {0}")]
    Threads(String),
}

/// Fixed float format: 17 significant digits, scientific notation.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:.16e}")
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// In-memory CSV table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: &'static str,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &'static str, header: &[&'static str]) -> Self {
        Self {
            name,
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(|f| csv_field(f)).collect();
            let _ = writeln!(out, "{}", line.join(","));
        }
        out
    }
}

/// Everything a subcommand produced, before anything touches the disk.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub exit_code: i32,
    pub tables: Vec<Table>,
    /// Extra plain-text files: `(suffix, contents)`.
    pub text_files: Vec<(&'static str, String)>,
    pub messages: Vec<String>,
}

impl RunOutput {
    fn new() -> Self {
        Self {
            exit_code: EXIT_OK,
            tables: Vec::new(),
            text_files: Vec::new(),
            messages: Vec::new(),
        }
    }

    fn degenerate(&mut self, msg: impl Into<String>) {
        self.exit_code = EXIT_DEGENERATE;
        self.messages.push(msg.into());
    }
}

fn check_nc(config: &ExperimentConfig, mu: &SingleSiteMeasure) -> RunOutput {
    let mut out = RunOutput::new();
    let report = check_nontriviality(mu, config.value_tol);
    let mut t = Table::new("nc", &["holds", "atom_i", "atom_j", "disagreement_measure"]);
    let (i, j) = report
        .witness_pair
        .map_or((String::new(), String::new()), |(i, j)| {
            (i.to_string(), j.to_string())
        });
    t.push(vec![
        report.holds.to_string(),
        i,
        j,
        fmt_f64(report.disagreement_measure),
    ]);
    out.tables.push(t);
    if report.holds {
        out.messages.push(format!(
            "NC holds: atoms {:?} differ on a set of measure {}",
            report.witness_pair.unwrap(),
            report.disagreement_measure
        ));
    } else {
        out.degenerate("NC fails: all star products commute");
    }
    out
}

fn lyapunov_table(estimates: &[lyapunov::LyapunovEstimate]) -> Table {
    let mut t = Table::new(
        "lyapunov",
        &["energy", "n", "num_samples", "mean", "std_error", "seed"],
    );
    for e in estimates {
        t.push(vec![
            fmt_f64(e.energy),
            e.n.to_string(),
            e.num_samples.to_string(),
            fmt_f64(e.mean),
            fmt_f64(e.std_error),
            e.seed.to_string(),
        ]);
    }
    t
}

fn sweep(config: &ExperimentConfig, mu: &SingleSiteMeasure) -> Result<RunOutput, CliError> {
    let mut out = RunOutput::new();
    let b = &config.lyapunov;
    let estimates = lyapunov::sweep_lyapunov(mu, &b.grid(), b.n, b.samples, config.seed)
        .map_err(|e| CliError::Invalid(e.to_string()))?;
    out.tables.push(lyapunov_table(&estimates));
    Ok(out)
}

fn certify(config: &ExperimentConfig, mu: &SingleSiteMeasure) -> RunOutput {
    let mut out = RunOutput::new();
    let params = config.certify.params();
    let certs: Vec<_> = config
        .certify
        .e_grid
        .par_iter()
        .map(|&e| furstenberg::certify_type_f(mu, e, &params))
        .collect();
    let mut t = Table::new(
        "certify",
        &[
            "energy",
            "atom_i",
            "atom_j",
            "commutator_det",
            "commutator_threshold",
            "trace_a",
            "trace_b",
            "witness",
            "witness_trace",
            "verdict",
            "note",
        ],
    );
    for c in &certs {
        let (i, j) = c.pair.map_or((String::new(), String::new()), |(i, j)| {
            (i.to_string(), j.to_string())
        });
        t.push(vec![
            fmt_f64(c.energy),
            i,
            j,
            fmt_f64(c.commutator_det),
            fmt_f64(c.commutator_threshold),
            fmt_f64(c.trace_a),
            fmt_f64(c.trace_b),
            c.non_elliptic_witness
                .as_ref()
                .map(|w| w.to_string())
                .unwrap_or_default(),
            fmt_opt(c.witness_trace),
            c.verdict.to_string(),
            c.note.clone(),
        ]);
    }
    out.tables.push(t);
    if !certs.iter().any(|c| c.verdict == Verdict::Certified) {
        out.degenerate("NOT_CERTIFIED at every energy");
    }
    out
}

fn discrete_set(config: &ExperimentConfig, mu: &SingleSiteMeasure) -> Result<RunOutput, CliError> {
    let mut out = RunOutput::new();
    if mu.len() < 2 {
        return Err(CliError::Invalid(
            "find-discrete-set needs at least two atoms".into(),
        ));
    }
    let b = &config.discrete_set;
    let scan = furstenberg::find_discrete_set(
        mu,
        (b.pair[0], b.pair[1]),
        b.e_lo,
        b.e_hi,
        b.grid_points,
        b.tol,
    )
    .map_err(|e| CliError::Invalid(e.to_string()))?;
    let mut list = String::new();
    let mut t = Table::new("discrete_set", &["energy", "conditions", "max_residual"]);
    for r in &scan.roots {
        let _ = writeln!(list, "{}", fmt_f64(r.energy));
        let conds: Vec<&str> = r.conditions.iter().map(|c| c.name()).collect();
        let res = r.residuals.iter().copied().fold(0.0, f64::max);
        t.push(vec![fmt_f64(r.energy), conds.join("|"), fmt_f64(res)]);
    }
    out.tables.push(t);
    out.text_files.push(("discrete_set.txt", list));
    for w in &scan.warnings {
        out.messages.push(w.to_string());
    }
    if !scan.identically_zero().is_empty() {
        out.degenerate("degenerate pair: a condition vanishes identically");
    }
    Ok(out)
}

fn ldt_run(config: &ExperimentConfig, mu: &SingleSiteMeasure) -> Result<RunOutput, CliError> {
    let mut out = RunOutput::new();
    let b = &config.ldt;
    let report = ldt::uniform_ldt(
        mu,
        &b.e_grid,
        &b.params(),
        &config.certify.params(),
        config.seed,
    )
    .map_err(|e| CliError::Invalid(e.to_string()))?;
    let mut tails = Table::new("ldt", &["energy", "n", "epsilon", "tail", "tail_stderr"]);
    for (i, &e) in report.energies.iter().enumerate() {
        for (k, &n) in report.n_grid.iter().enumerate() {
            tails.push(vec![
                fmt_f64(e),
                n.to_string(),
                fmt_f64(report.epsilon),
                fmt_f64(report.tails[i][k]),
                fmt_f64(report.tail_stderr[i][k]),
            ]);
        }
    }
    let mut summary = Table::new(
        "ldt_summary",
        &["energy", "verdict", "l_ref", "eta", "c", "r2", "note"],
    );
    for (i, &e) in report.energies.iter().enumerate() {
        summary.push(vec![
            fmt_f64(e),
            report.verdicts[i].to_string(),
            fmt_f64(report.l_ref[i]),
            fmt_opt(report.eta_fit[i]),
            fmt_opt(report.c_fit[i]),
            fmt_opt(report.fit_r2[i]),
            report.fit_notes[i].clone(),
        ]);
    }
    let mut uniform = Table::new("ldt_uniform", &["epsilon", "eta_min", "unif_bd_constant"]);
    uniform.push(vec![
        fmt_f64(report.epsilon),
        fmt_opt(report.eta_min),
        fmt_f64(report.unif_bd_constant),
    ]);
    out.tables.extend([tails, summary, uniform]);
    out.messages.extend(report.warnings.iter().cloned());
    match report.eta_min {
        Some(eta) if eta > 0.0 => {}
        _ => out.degenerate("no positive uniform decay rate over certified energies"),
    }
    Ok(out)
}

fn borg_marchenko(
    config: &ExperimentConfig,
    mu: &SingleSiteMeasure,
) -> Result<RunOutput, CliError> {
    let mut out = RunOutput::new();
    let b = &config.borg_marchenko;
    let samples = furstenberg::energy_samples(b.real_points, b.complex_points);
    let atoms = mu.atoms();
    let mut t = Table::new(
        "borg_marchenko",
        &[
            "atom_i",
            "atom_j",
            "distinct",
            "max_matrix_gap",
            "max_m_gap",
        ],
    );
    let mut any = false;
    for i in 0..atoms.len() {
        for j in (i + 1)..atoms.len() {
            let fg = concat(&atoms[i].piece, &atoms[j].piece);
            let gf = concat(&atoms[j].piece, &atoms[i].piece);
            let r = furstenberg::borg_marchenko_check(&fg, &gf, &samples)
                .map_err(|e| CliError::Invalid(format!("atoms ({i}, {j}): {e}")))?;
            any |= r.distinct;
            t.push(vec![
                i.to_string(),
                j.to_string(),
                r.distinct.to_string(),
                fmt_f64(r.max_matrix_gap),
                fmt_f64(r.max_m_gap),
            ]);
        }
    }
    out.tables.push(t);
    if !any {
        out.degenerate("no pair of star products is distinguished by its transfer matrices");
    }
    Ok(out)
}

/// Runs one subcommand on a validated config. Pure apart from the thread
/// pool; writes nothing.
pub fn execute(kind: Action, config: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let mu = config.measure()?;
    match kind {
        Action::CheckNc => Ok(check_nc(config, &mu)),
        Action::SweepLyapunov => sweep(config, &mu),
        Action::Certify => Ok(certify(config, &mu)),
        Action::FindDiscreteSet => discrete_set(config, &mu),
        Action::Ldt => ldt_run(config, &mu),
        Action::BorgMarchenko => borg_marchenko(config, &mu),
    }
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    subcommand: &'static str,
    exit_code: i32,
    seed: u64,
    threads: Option<usize>,
    config: &'a ExperimentConfig,
    outputs: Vec<String>,
    messages: &'a [String],
    wall_time_seconds: f64,
}

fn output_path(prefix: &str, suffix: &str) -> PathBuf {
    PathBuf::from(format!("{prefix}_{suffix}"))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads the config, runs the subcommand, writes all outputs and the
/// manifest. Returns the process exit code.
pub fn run(command: &Command) -> Result<i32, CliError> {
    let start = Instant::now();
    let args = command.args();
    let text = std::fs::read(&args.config).map_err(|source| CliError::Read {
        path: args.config.clone(),
        source,
    })?;
    let mut config = parse_config(&text)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let kind = command.kind();
    let output = match args.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Threads(e.to_string()))?
            .install(|| execute(kind, &config))?,
        None => execute(kind, &config)?,
    };

    let mut outputs = Vec::new();
    for table in &output.tables {
        let path = output_path(&args.out, &format!("{}.csv", table.name));
        write_file(&path, &table.render())?;
        outputs.push(path.display().to_string());
    }
    for (suffix, contents) in &output.text_files {
        let path = output_path(&args.out, suffix);
        write_file(&path, contents)?;
        outputs.push(path.display().to_string());
    }
    let manifest = Manifest {
        tool: "anderson-lab",
        version: env!("CARGO_PKG_VERSION"),
        subcommand: kind.name(),
        exit_code: output.exit_code,
        seed: config.seed,
        threads: args.threads,
        config: &config,
        outputs,
        messages: &output.messages,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    };
    let path = output_path(&args.out, "manifest.json");
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_file(&path, &(json + "\n"))?;

    for msg in &output.messages {
        eprintln!("{msg}");
    }
    Ok(output.exit_code)
}

/// Entry point used by the binary.
pub fn main_with(cli: Cli) -> i32 {
    match run(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INVALID
        }
    }
}
