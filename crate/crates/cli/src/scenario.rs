//! Scenario files: the versioned TOML schema, unit conversion, and
//! resolution into core model objects.
//!
//! Files store lab-facing units (cavity frequency in GHz, everything else
//! as ratios of ω₀ or g₀, horizons in ns or μs); the resolved [`Scenario`]
//! is entirely in internal units (g₀ = 1).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use modqed_core::effective::FREQ_MATCH_TOL;
use modqed_core::{
    resonance_frequencies, Branch, Frame, ModulationTarget, ModulationTone, Rates, RegimeSpec,
    Schedule, SystemParams,
};

use crate::{CliError, CliResult};

/// Schema version this build reads and writes.
pub const SCHEMA_VERSION: u32 = 1;

// ---------------------------------------------------------------------------
// File layout (serde side; field names are the file format).

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub params: ParamsSection,
    pub rates: RatesSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regime: Option<RegimeSection>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tones: Vec<ToneSection>,
    pub initial: InitialSection,
    pub run: RunSection,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    /// Cavity frequency ω₀/2π in GHz.
    pub omega0_ghz: f64,
    /// Coupling g₀ as a fraction of ω₀.
    pub g0_over_omega0: f64,
    /// Qubit frequency Ω₀ as a fraction of ω₀.
    pub omega_q_over_omega0: f64,
}

/// Damping rates in units of g₀.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesSection {
    pub kappa: f64,
    pub gamma: f64,
    pub gamma_phi: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeSection {
    /// e.g. "resonant(+)", "resonant-two-tone(+,+)", "ajc(1)",
    /// "anti-dce(4)", "anti-dce-two-tone(4)", "dce".
    pub kind: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToneSection {
    /// "cavity-freq" | "qubit-freq" | "coupling" | "squeeze".
    pub target: String,
    /// Modulation depth ε in units of g₀.
    pub depth: f64,
    #[serde(default, skip_serializing_if = "f64_is_zero")]
    pub phase: f64,
    /// Resonance formula the frequency is declared through. With a
    /// formula the drive is taken as *on resonance*: `eta_g0`, when
    /// present, pins the fine-tuned lab value the formula stands for.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub formula: Option<String>,
    /// Drive frequency in units of g₀.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_g0: Option<f64>,
    /// Drive frequency as a lab angular frequency in rad/s.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_rad_per_s: Option<f64>,
    /// Mark this tone for the `tune` verb.
    #[serde(default, skip_serializing_if = "bool_is_false")]
    pub fine_tune: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    /// "zes" | "coherent" | "dressed".
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branch: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    /// "unitary" | "sme" | "dpme" | "effective+sme" | "effective+dpme".
    pub solver: String,
    /// "lab" | "dressed-interaction"; defaulted from the solver.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max_ns: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max_us: Option<f64>,
    /// Number of CSV rows (includes t = 0 and t = t_max).
    pub samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
}

fn f64_is_zero(x: &f64) -> bool {
    *x == 0.0
}

fn bool_is_false(b: &bool) -> bool {
    !*b
}

// ---------------------------------------------------------------------------
// Resolved scenario.

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitialState {
    Zes,
    Coherent { alpha: f64 },
    Dressed { n: usize, branch: Branch },
}

impl std::fmt::Display for InitialState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InitialState::Zes => write!(f, "zes"),
            InitialState::Coherent { alpha } => write!(f, "coherent(alpha = {alpha})"),
            InitialState::Dressed { n, branch } => {
                write!(f, "dressed({n}, {})", branch_str(*branch))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Solver {
    Unitary,
    Sme,
    Dpme,
    EffectiveSme,
    EffectiveDpme,
}

impl Solver {
    pub fn parse(s: &str) -> CliResult<Self> {
        match s.trim() {
            "unitary" => Ok(Solver::Unitary),
            "sme" => Ok(Solver::Sme),
            "dpme" => Ok(Solver::Dpme),
            "effective+sme" => Ok(Solver::EffectiveSme),
            "effective+dpme" => Ok(Solver::EffectiveDpme),
            other => Err(CliError::Input(format!(
                "unknown solver {other:?} (expected unitary, sme, dpme, effective+sme or effective+dpme)"
            ))),
        }
    }

    pub fn is_effective(self) -> bool {
        matches!(self, Solver::EffectiveSme | Solver::EffectiveDpme)
    }

    pub fn label(self) -> &'static str {
        match self {
            Solver::Unitary => "unitary",
            Solver::Sme => "sme",
            Solver::Dpme => "dpme",
            Solver::EffectiveSme => "effective+sme",
            Solver::EffectiveDpme => "effective+dpme",
        }
    }

    /// Label safe for file names.
    pub fn file_label(self) -> &'static str {
        match self {
            Solver::EffectiveSme => "effective_sme",
            Solver::EffectiveDpme => "effective_dpme",
            other => other.label(),
        }
    }

    fn default_frame(self) -> Frame {
        if self.is_effective() {
            Frame::DressedInteraction
        } else {
            Frame::Lab
        }
    }
}

/// A schedule tone plus how its frequency was declared.
#[derive(Clone, Debug)]
pub struct ResolvedTone {
    pub tone: ModulationTone,
    /// Formula the frequency came from, when declared by reference.
    pub formula: Option<RegimeSpec>,
    pub fine_tune: bool,
}

#[derive(Clone, Debug)]
pub struct Scenario {
    /// The file image, kept verbatim for serialization and sweeps.
    pub file: ScenarioFile,
    pub name: String,
    pub params: SystemParams,
    pub rates: Rates,
    pub regime: Option<RegimeSpec>,
    pub tones: Vec<ResolvedTone>,
    pub initial: InitialState,
    pub solver: Solver,
    pub frame: Frame,
    /// Horizon in internal units (1/g₀).
    pub t_max: f64,
    pub t_max_ns: f64,
    pub samples: usize,
    pub n_max: Option<usize>,
}

impl Scenario {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| {
            CliError::Input(format!("cannot read {}: {e}", path.display()))
        })?;
        let mut scn = Self::from_toml(&text)
            .map_err(|e| e.with_context(&format!("in {}", path.display())))?;
        if scn.file.name.is_none() {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                scn.name = stem.to_string();
            }
        }
        Ok(scn)
    }

    pub fn from_toml(text: &str) -> CliResult<Self> {
        let file: ScenarioFile = toml::from_str(text)
            .map_err(|e| CliError::Input(format!("scenario parse error: {e}")))?;
        Self::from_file(file)
    }

    /// Serialize back to TOML (round-trips to the same resolved scenario).
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(&self.file).expect("scenario serialization cannot fail")
    }

    pub fn from_file(file: ScenarioFile) -> CliResult<Self> {
        if file.schema_version != SCHEMA_VERSION {
            return Err(CliError::Input(format!(
                "unsupported schema_version {} (this build reads {SCHEMA_VERSION})",
                file.schema_version
            )));
        }

        let p = &file.params;
        for (name, v) in [
            ("params.omega0_ghz", p.omega0_ghz),
            ("params.g0_over_omega0", p.g0_over_omega0),
            ("params.omega_q_over_omega0", p.omega_q_over_omega0),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(CliError::Input(format!("{name} must be positive, got {v}")));
            }
        }
        let params = SystemParams::from_ghz(
            p.omega0_ghz,
            p.omega_q_over_omega0 * p.omega0_ghz,
            p.g0_over_omega0 * p.omega0_ghz,
        )?;

        let r = &file.rates;
        let rates = Rates::new(r.kappa, r.gamma, r.gamma_phi)?;

        let regime = match &file.regime {
            Some(sec) => {
                let spec = parse_regime(&sec.kind)?;
                spec.validate(&params)?;
                Some(spec)
            }
            None => None,
        };

        let tones: Vec<ResolvedTone> = file
            .tones
            .iter()
            .enumerate()
            .map(|(i, sec)| {
                resolve_tone(sec, &params)
                    .map_err(|e| e.with_context(&format!("tone {i}")))
            })
            .collect::<CliResult<_>>()?;

        let initial = resolve_initial(&file.initial)?;

        let solver = Solver::parse(&file.run.solver)?;
        let frame = match file.run.frame.as_deref() {
            None => solver.default_frame(),
            Some("lab") => Frame::Lab,
            Some("dressed-interaction") => Frame::DressedInteraction,
            Some(other) => {
                return Err(CliError::Input(format!(
                    "unknown frame {other:?} (expected \"lab\" or \"dressed-interaction\")"
                )))
            }
        };
        match (solver, frame) {
            (s, Frame::Lab) if s.is_effective() => {
                return Err(CliError::Input(
                    "effective solvers integrate in the dressed interaction frame".into(),
                ))
            }
            (Solver::Sme | Solver::Dpme, Frame::DressedInteraction) => {
                return Err(CliError::Input(
                    "sme/dpme integrate the full model in the lab frame".into(),
                ))
            }
            _ => {}
        }
        if solver.is_effective() && regime.is_none() {
            return Err(CliError::Input(
                "effective solvers need a [regime] section".into(),
            ));
        }

        let t_max_ns = match (file.run.t_max_ns, file.run.t_max_us) {
            (Some(ns), None) => ns,
            (None, Some(us)) => us * 1e3,
            (Some(_), Some(_)) => {
                return Err(CliError::Input(
                    "give exactly one of run.t_max_ns and run.t_max_us".into(),
                ))
            }
            (None, None) => {
                return Err(CliError::Input(
                    "missing horizon: set run.t_max_ns or run.t_max_us".into(),
                ))
            }
        };
        if !t_max_ns.is_finite() || t_max_ns <= 0.0 {
            return Err(CliError::Input(format!(
                "horizon must be positive, got {t_max_ns} ns"
            )));
        }
        if file.run.samples < 2 {
            return Err(CliError::Input(format!(
                "run.samples must be at least 2, got {}",
                file.run.samples
            )));
        }

        // Exercise the schedule validators (tone count, depth budget, η > ω₀).
        let schedule = Schedule::new(tones.iter().map(|t| t.tone).collect());
        schedule.validate(&params)?;

        let name = file.name.clone().unwrap_or_else(|| "scenario".into());
        let t_max = t_max_ns / params.time_unit_ns();
        Ok(Scenario {
            name,
            params,
            rates,
            regime,
            tones,
            initial,
            solver,
            frame,
            t_max,
            t_max_ns,
            samples: file.run.samples,
            n_max: file.run.n_max,
            file,
        })
    }

    pub fn schedule(&self) -> Schedule {
        Schedule::new(self.tones.iter().map(|t| t.tone).collect())
    }

    /// Same scenario under a different solver (frame re-defaulted).
    pub fn with_solver(&self, solver: Solver) -> CliResult<Self> {
        let mut file = self.file.clone();
        file.run.solver = solver.label().to_string();
        file.run.frame = None;
        let mut scn = Self::from_file(file)?;
        scn.name = self.name.clone();
        Ok(scn)
    }

    /// Sample times in internal units, t = 0 … t_max inclusive.
    pub fn sample_times(&self) -> Vec<f64> {
        let n = self.samples;
        (0..n)
            .map(|i| self.t_max * i as f64 / (n - 1) as f64)
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Field parsers.

pub fn parse_branch(s: &str) -> CliResult<Branch> {
    match s.trim() {
        "+" | "plus" => Ok(Branch::Plus),
        "-" | "minus" => Ok(Branch::Minus),
        other => Err(CliError::Input(format!(
            "unknown branch {other:?} (expected \"+\" or \"-\")"
        ))),
    }
}

pub fn branch_str(b: Branch) -> &'static str {
    match b {
        Branch::Plus => "+",
        Branch::Minus => "-",
    }
}

pub fn parse_target(s: &str) -> CliResult<ModulationTarget> {
    match s.trim() {
        "cavity-freq" => Ok(ModulationTarget::CavityFreq),
        "qubit-freq" => Ok(ModulationTarget::QubitFreq),
        "coupling" => Ok(ModulationTarget::Coupling),
        "squeeze" => Ok(ModulationTarget::Squeeze),
        other => Err(CliError::Input(format!(
            "unknown tone target {other:?} (expected cavity-freq, qubit-freq, coupling or squeeze)"
        ))),
    }
}

/// Parse a regime or resonance-formula name. Accepts the display form
/// ("ajc(k=1)") and the compact form ("ajc(1)").
pub fn parse_regime(s: &str) -> CliResult<RegimeSpec> {
    let msg = || {
        CliError::Input(format!(
            "unknown regime or formula {s:?} (expected resonant(±), \
             resonant-two-tone(±,±), ajc(k), anti-dce(k), anti-dce-two-tone(k) or dce)"
        ))
    };
    let compact: String = s
        .chars()
        .filter(|c| !c.is_whitespace())
        .collect::<String>()
        .to_ascii_lowercase();
    if compact == "dce" {
        return Ok(RegimeSpec::Dce);
    }
    let (head, rest) = match compact.split_once('(') {
        Some((h, r)) => (h, r.strip_suffix(')').ok_or_else(msg)?),
        None => return Err(msg()),
    };
    let args = rest.trim_start_matches("k=");
    let branch = |a: &str| parse_branch(a).map_err(|_| msg());
    let count = |a: &str| a.parse::<usize>().map_err(|_| msg());
    match head {
        "resonant" => Ok(RegimeSpec::Resonant { r: branch(args)? }),
        "resonant-two-tone" => {
            let (a, b) = args.split_once(',').ok_or_else(msg)?;
            Ok(RegimeSpec::ResonantTwoTone { r: branch(a)?, r2: branch(b)? })
        }
        "ajc" => Ok(RegimeSpec::Ajc { k: count(args)? }),
        "anti-dce" => Ok(RegimeSpec::AntiDce { k: count(args)? }),
        "anti-dce-two-tone" => Ok(RegimeSpec::AntiDceTwoTone { k: count(args)? }),
        _ => Err(msg()),
    }
}

/// Formula value of a resonance reference: the named regime's *last* tone
/// slot ("resonant-two-tone(+,+)" names the second tone of that program;
/// single-tone names their only slot).
pub fn formula_frequency(params: &SystemParams, spec: RegimeSpec) -> CliResult<f64> {
    let etas = resonance_frequencies(params, spec)?;
    Ok(etas[spec.tone_slots() - 1])
}

fn resolve_tone(sec: &ToneSection, params: &SystemParams) -> CliResult<ResolvedTone> {
    let target = parse_target(&sec.target)?;
    let formula = sec.formula.as_deref().map(parse_regime).transpose()?;
    let frequency = match (formula, sec.eta_g0, sec.eta_rad_per_s) {
        (Some(spec), pinned, None) => {
            let f = formula_frequency(params, spec)?;
            match pinned {
                Some(v) => {
                    if (v - f).abs() > FREQ_MATCH_TOL * params.g0 {
                        return Err(CliError::Input(format!(
                            "eta_g0 = {v} is {:.4} g0 away from the {spec} formula value \
                             {f:.7}; a deliberate detuning that large should drop the formula",
                            (v - f).abs()
                        )));
                    }
                    v
                }
                None => f,
            }
        }
        (None, Some(v), None) => v,
        (None, None, Some(w)) => w / params.g0_rad_per_s,
        (Some(_), _, Some(_)) => {
            return Err(CliError::Input(
                "formula and eta_rad_per_s are mutually exclusive".into(),
            ))
        }
        (None, Some(_), Some(_)) => {
            return Err(CliError::Input(
                "give the frequency once: eta_g0 or eta_rad_per_s".into(),
            ))
        }
        (None, None, None) => {
            return Err(CliError::Input(
                "tone needs a frequency: formula, eta_g0 or eta_rad_per_s".into(),
            ))
        }
    };
    let tone = ModulationTone::new(target, sec.depth, frequency, sec.phase)?;
    Ok(ResolvedTone { tone, formula, fine_tune: sec.fine_tune })
}

fn resolve_initial(sec: &InitialSection) -> CliResult<InitialState> {
    let reject_extras = |state: &str, fields: &[(&str, bool)]| -> CliResult<()> {
        for (name, present) in fields {
            if *present {
                return Err(CliError::Input(format!(
                    "initial.{name} does not apply to kind = \"{state}\""
                )));
            }
        }
        Ok(())
    };
    match sec.kind.trim() {
        "zes" => {
            reject_extras(
                "zes",
                &[
                    ("alpha", sec.alpha.is_some()),
                    ("n", sec.n.is_some()),
                    ("branch", sec.branch.is_some()),
                ],
            )?;
            Ok(InitialState::Zes)
        }
        "coherent" => {
            reject_extras(
                "coherent",
                &[("n", sec.n.is_some()), ("branch", sec.branch.is_some())],
            )?;
            let alpha = sec.alpha.ok_or_else(|| {
                CliError::Input("initial.alpha required for kind = \"coherent\"".into())
            })?;
            if !alpha.is_finite() {
                return Err(CliError::Input(format!("initial.alpha must be finite, got {alpha}")));
            }
            Ok(InitialState::Coherent { alpha })
        }
        "dressed" => {
            reject_extras("dressed", &[("alpha", sec.alpha.is_some())])?;
            let n = sec.n.ok_or_else(|| {
                CliError::Input("initial.n required for kind = \"dressed\"".into())
            })?;
            let branch = parse_branch(sec.branch.as_deref().ok_or_else(|| {
                CliError::Input("initial.branch required for kind = \"dressed\"".into())
            })?)?;
            Ok(InitialState::Dressed { n, branch })
        }
        other => Err(CliError::Input(format!(
            "unknown initial state kind {other:?} (expected zes, coherent or dressed)"
        ))),
    }
}
