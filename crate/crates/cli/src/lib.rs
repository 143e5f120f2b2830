//! Command-line surface: scenario loading, presets, runs, sweeps and
//! resonance fine-tuning. Exit codes: 0 ok, 1 physics-diagnostic
//! failure, 2 input error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

pub mod presets;
pub mod runner;
pub mod scenario;
pub mod sweep;

use runner::RunArtifacts;
use scenario::Solver;

// ---------------------------------------------------------------------------
// Error type mapped onto exit codes.

#[derive(Debug)]
pub enum CliError {
    /// Bad input: unparsable file, unknown field, invalid configuration.
    Input(String),
    /// The computation itself reported a physics/diagnostic problem.
    Physics(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Physics(m) => m,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Physics(_) => 1,
        }
    }

    pub fn with_context(self, ctx: &str) -> Self {
        match self {
            CliError::Input(m) => CliError::Input(format!("{ctx}: {m}")),
            CliError::Physics(m) => CliError::Physics(format!("{ctx}: {m}")),
        }
    }
}

impl From<modqed_core::Error> for CliError {
    fn from(e: modqed_core::Error) -> Self {
        match e {
            modqed_core::Error::StepUnderflow { .. }
            | modqed_core::Error::AmbiguousResonance(..) => CliError::Physics(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.message())
    }
}

/// Write via a sibling temp file and rename, so readers never observe a
/// half-written table.
pub fn write_atomic(path: &Path, data: &str) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| {
                CliError::Input(format!("cannot create {}: {e}", parent.display()))
            })?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, data)
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", tmp.display())))?;
    fs::rename(&tmp, path)
        .map_err(|e| CliError::Input(format!("cannot move {} into place: {e}", tmp.display())))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Argument surface.

#[derive(Parser)]
#[command(
    name = "modqed",
    version,
    about = "Driven qubit-cavity simulator: full and effective master-equation runs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a scenario (file path or preset name) and write a CSV.
    Run {
        scenario: String,
        /// Override the scenario's solver; a comma list (e.g. "sme,dpme")
        /// runs each and prints a difference summary.
        #[arg(long)]
        solver: Option<String>,
        /// Output CSV path (multi-solver runs append _<solver>).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print an embedded preset scenario as TOML.
    Preset { name: String },
    /// Re-run a scenario across values of one scalar field.
    Sweep {
        scenario: String,
        /// Dotted field path, e.g. rates.kappa or tones.0.eta_g0.
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long)]
        values: String,
        /// Output directory for per-run CSVs and summary.csv.
        #[arg(long, default_value = "sweep")]
        out: PathBuf,
    },
    /// Search for the drive frequency maximizing transfer in the full
    /// model, for the tone marked fine_tune = true.
    Tune {
        scenario: String,
        /// Search window around the declared frequency, units of g0.
        #[arg(long)]
        window: f64,
    },
}

/// Entry point behind `main`; parses real process arguments.
pub fn run() -> i32 {
    main_with(std::env::args_os())
}

/// Testable entry point.
pub fn main_with<I>(args: I) -> i32
where
    I: IntoIterator<Item = OsString>,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> CliResult<i32> {
    match cli.command {
        Command::Run { scenario, solver, out } => cmd_run(&scenario, solver.as_deref(), out),
        Command::Preset { name } => {
            let text = presets::preset_toml(&name).ok_or_else(|| {
                CliError::Input(format!(
                    "unknown preset {name:?} (available: {})",
                    presets::PRESET_NAMES.join(", ")
                ))
            })?;
            print!("{text}");
            Ok(0)
        }
        Command::Sweep { scenario, axis, values, out } => {
            let scn = presets::resolve_input(&scenario)?;
            let values = parse_values(&values)?;
            let outcome = sweep::sweep(&scn, &axis, &values, &out)?;
            for row in &outcome.rows {
                match (row.peak_mean_n, row.peak_t_ns) {
                    (Some(v), Some(t)) => println!(
                        "{} = {}: peak mean_n = {v:.6} at t = {t:.3} ns [{}]",
                        axis, row.value, row.status
                    ),
                    _ => println!("{} = {}: [{}]", axis, row.value, row.status),
                }
            }
            println!("wrote {}", outcome.summary_path.display());
            Ok(0)
        }
        Command::Tune { scenario, window } => {
            let scn = presets::resolve_input(&scenario)?;
            let outcome = runner::tune_scenario(&scn, window)?;
            let p = &scn.params;
            println!(
                "tone {} tuned over a {:.4} g0 window (probe: transfer to {} over {:.1} time units)",
                outcome.tone_index, outcome.window, outcome.target, outcome.horizon
            );
            println!(
                "  formula  eta = {:.10} g0 = {:.10} GHz",
                outcome.eta_formula,
                p.freq_ghz(outcome.eta_formula)
            );
            println!(
                "  declared eta = {:.10} g0 = {:.10} GHz",
                outcome.guess,
                p.freq_ghz(outcome.guess)
            );
            println!(
                "  tuned    eta = {:.10} g0 = {:.10} GHz (shift {:+.3e} g0 from declared)",
                outcome.eta_star,
                p.freq_ghz(outcome.eta_star),
                outcome.eta_star - outcome.guess
            );
            Ok(0)
        }
    }
}

fn parse_values(list: &str) -> CliResult<Vec<f64>> {
    let trimmed = list.trim();
    if trimmed.is_empty() {
        return Ok(Vec::new());
    }
    trimmed
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Input(format!("bad value {s:?} in --values")))
        })
        .collect()
}

fn cmd_run(scenario: &str, solver: Option<&str>, out: Option<PathBuf>) -> CliResult<i32> {
    let base = presets::resolve_input(scenario)?;
    let solvers: Vec<Solver> = match solver {
        None => vec![base.solver],
        Some(list) => list
            .split(',')
            .map(Solver::parse)
            .collect::<CliResult<Vec<_>>>()?,
    };
    if solvers.is_empty() {
        return Err(CliError::Input("empty --solver list".into()));
    }
    let multi = solvers.len() > 1;

    let mut artifacts: Vec<RunArtifacts> = Vec::new();
    for s in &solvers {
        let scn = if *s == base.solver { base.clone() } else { base.with_solver(*s)? };
        let art = runner::execute(&scn)?;
        let path = out_path(out.as_deref(), &scn.name, multi.then(|| s.file_label()));
        write_atomic(&path, &art.csv)?;
        let peak = art.peak_mean_n();
        println!(
            "wrote {} ({} rows, solver {}, n_max {})",
            path.display(),
            art.traj.records.len(),
            s.label(),
            art.n_max
        );
        if let Some((v, t)) = peak {
            println!("  peak mean_n = {v:.6} at t = {t:.3} ns");
        }
        match (&art.failure, art.failed) {
            (Some(msg), _) => eprintln!("  physics failure: {msg}"),
            (None, true) => eprintln!("  physics failure"),
            _ => {}
        }
        artifacts.push(art);
    }

    if artifacts.len() == 2 {
        let (a, b) = (&artifacts[0], &artifacts[1]);
        let n = a.traj.records.len().min(b.traj.records.len());
        let mut dn: f64 = 0.0;
        let mut dpe: f64 = 0.0;
        for i in 0..n {
            dn = dn.max((a.traj.records[i].mean_n - b.traj.records[i].mean_n).abs());
            dpe = dpe.max((a.traj.records[i].p_e - b.traj.records[i].p_e).abs());
        }
        println!(
            "solver difference {} vs {}: max |d mean_n| = {dn:.3e}, max |d p_e| = {dpe:.3e}",
            solvers[0].label(),
            solvers[1].label()
        );
    }

    Ok(if artifacts.iter().any(|a| a.failed) { 1 } else { 0 })
}

fn out_path(out: Option<&Path>, name: &str, suffix: Option<&str>) -> PathBuf {
    let base = match out {
        Some(p) => p.to_path_buf(),
        None => PathBuf::from(format!("{name}.csv")),
    };
    match suffix {
        None => base,
        Some(sfx) => {
            let stem = base
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("run")
                .to_string();
            let ext = base.extension().and_then(|s| s.to_str()).unwrap_or("csv");
            base.with_file_name(format!("{stem}_{sfx}.{ext}"))
        }
    }
}
