//! Parameter sweeps: re-run a scenario across values of one scalar
//! field, in parallel, with per-run failures recorded rather than fatal.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::runner;
use crate::scenario::{Scenario, ScenarioFile};
use crate::{write_atomic, CliError, CliResult};

/// Environment variable bounding the sweep worker count.
pub const WORKERS_ENV: &str = "MODQED_WORKERS";

/// Set one scalar field addressed by a dotted path, e.g. "rates.kappa",
/// "tones.0.depth" or "run.t_max_ns". Setting a tone's frequency through
/// "tones.<i>.eta_g0" drops that tone's formula declaration: sweeping a
/// frequency is a deliberate-detuning study, so the resonance reference
/// must stay put while the drive moves.
pub fn set_axis(file: &mut ScenarioFile, axis: &str, value: f64) -> CliResult<()> {
    let parts: Vec<&str> = axis.split('.').collect();
    let bad = || CliError::Input(format!("axis {axis:?} does not address a sweepable scalar"));
    let as_usize = |v: f64| -> CliResult<usize> {
        if v < 0.0 || v.fract() != 0.0 {
            return Err(CliError::Input(format!(
                "axis {axis:?} needs a non-negative integer, got {v}"
            )));
        }
        Ok(v as usize)
    };
    match parts.as_slice() {
        ["params", field] => {
            let p = &mut file.params;
            match *field {
                "omega0_ghz" => p.omega0_ghz = value,
                "g0_over_omega0" => p.g0_over_omega0 = value,
                "omega_q_over_omega0" => p.omega_q_over_omega0 = value,
                _ => return Err(bad()),
            }
        }
        ["rates", field] => {
            let r = &mut file.rates;
            match *field {
                "kappa" => r.kappa = value,
                "gamma" => r.gamma = value,
                "gamma_phi" => r.gamma_phi = value,
                _ => return Err(bad()),
            }
        }
        ["initial", "alpha"] => file.initial.alpha = Some(value),
        ["run", field] => match *field {
            "t_max_ns" => {
                file.run.t_max_ns = Some(value);
                file.run.t_max_us = None;
            }
            "t_max_us" => {
                file.run.t_max_us = Some(value);
                file.run.t_max_ns = None;
            }
            "samples" => file.run.samples = as_usize(value)?,
            "n_max" => file.run.n_max = Some(as_usize(value)?),
            _ => return Err(bad()),
        },
        ["tones", idx, field] => {
            let i: usize = idx.parse().map_err(|_| bad())?;
            let count = file.tones.len();
            let tone = file.tones.get_mut(i).ok_or_else(|| {
                CliError::Input(format!(
                    "axis {axis:?}: tone {i} does not exist ({count} tones)"
                ))
            })?;
            match *field {
                "depth" => tone.depth = value,
                "phase" => tone.phase = value,
                "eta_g0" => {
                    tone.eta_g0 = Some(value);
                    tone.eta_rad_per_s = None;
                    tone.formula = None;
                }
                _ => return Err(bad()),
            }
        }
        _ => return Err(bad()),
    }
    Ok(())
}

pub struct SweepRow {
    pub value: f64,
    pub status: String,
    pub peak_mean_n: Option<f64>,
    pub peak_t_ns: Option<f64>,
    pub csv_file: Option<String>,
}

pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub summary_path: std::path::PathBuf,
}

/// One run per value, fanned out over a rayon pool sized by
/// `MODQED_WORKERS` when set. Each run's CSV lands in `out_dir`; the
/// summary table maps value → peak mean photon number and its time.
pub fn sweep(scn: &Scenario, axis: &str, values: &[f64], out_dir: &Path) -> CliResult<SweepOutcome> {
    // Validate the axis on a scratch copy before spending any compute.
    if let Some(&v0) = values.first() {
        let mut probe = scn.file.clone();
        set_axis(&mut probe, axis, v0)?;
    }
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Input(format!("cannot create {}: {e}", out_dir.display())))?;

    let run_one = |(idx, &value): (usize, &f64)| -> SweepRow {
        let mut file = scn.file.clone();
        if let Err(e) = set_axis(&mut file, axis, value) {
            return SweepRow {
                value,
                status: format!("error: {}", e.message()),
                peak_mean_n: None,
                peak_t_ns: None,
                csv_file: None,
            };
        }
        let built = Scenario::from_file(file).and_then(|mut s| {
            s.name = format!("{} [{axis} = {value}]", scn.name);
            runner::execute(&s)
        });
        match built {
            Ok(art) => {
                let csv_name = format!("run_{idx:03}.csv");
                let status = match write_atomic(&out_dir.join(&csv_name), &art.csv) {
                    Ok(()) if !art.failed => "ok".to_string(),
                    Ok(()) => format!(
                        "failed: {}",
                        art.failure.as_deref().unwrap_or("physics diagnostics")
                    ),
                    Err(e) => format!("error: {}", e.message()),
                };
                let (peak, t_peak) = art.peak_mean_n().map_or((None, None), |(v, t)| {
                    (Some(v), Some(t))
                });
                SweepRow {
                    value,
                    status,
                    peak_mean_n: peak,
                    peak_t_ns: t_peak,
                    csv_file: Some(csv_name),
                }
            }
            Err(e) => SweepRow {
                value,
                status: format!("error: {}", e.message()),
                peak_mean_n: None,
                peak_t_ns: None,
                csv_file: None,
            },
        }
    };

    let jobs: Vec<(usize, &f64)> = values.iter().enumerate().collect();
    let rows: Vec<SweepRow> = match worker_count()? {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Input(format!("cannot build worker pool: {e}")))?;
            pool.install(|| jobs.into_par_iter().map(run_one).collect())
        }
        None => jobs.into_par_iter().map(run_one).collect(),
    };

    let mut summary = String::from("value,status,peak_mean_n,peak_t_ns,csv\n");
    for row in &rows {
        let _ = write!(summary, "{},{}", row.value, csv_quote(&row.status));
        match (row.peak_mean_n, row.peak_t_ns) {
            (Some(v), Some(t)) => {
                let _ = write!(summary, ",{v:.10e},{t:.6}");
            }
            _ => summary.push_str(",,"),
        }
        match &row.csv_file {
            Some(f) => {
                let _ = writeln!(summary, ",{f}");
            }
            None => summary.push_str(",\n"),
        }
    }
    let summary_path = out_dir.join("summary.csv");
    write_atomic(&summary_path, &summary)?;
    Ok(SweepOutcome { rows, summary_path })
}

fn worker_count() -> CliResult<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Ok(s) => {
            let n: usize = s.trim().parse().map_err(|_| {
                CliError::Input(format!("{WORKERS_ENV} must be a positive integer, got {s:?}"))
            })?;
            if n == 0 {
                return Err(CliError::Input(format!("{WORKERS_ENV} must be at least 1")));
            }
            Ok(Some(n))
        }
        Err(_) => Ok(None),
    }
}

fn csv_quote(s: &str) -> String {
    if s.contains(',') || s.contains('"') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
