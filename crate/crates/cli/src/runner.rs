//! Run orchestration: generator construction per solver, truncation
//! defaulting and growth, integration, and CSV emission.

use std::fmt::Write as _;

use ndarray as nd;

use modqed_core::{
    assign_tone_slots, integrate, regime_coupling, C64,
    dissipators::{dpme_superoperator, secular_sme_superoperator, sme_superoperator},
    evolve::DressedFullGenerator,
    effective::{self, EffectiveCoupling, EffectiveGenerator},
    DressedBasis, FlatPositive, Frame, Generator, HilbertSpace, Integrator, LabDissipator,
    LabGenerator, LevelId, Model, PureState, RegimeSpec, Tolerances, Trajectory,
    TransitionTables,
};

use crate::scenario::{branch_str, InitialState, Scenario, Solver};
use crate::{CliError, CliResult};

/// Truncation is trusted only while the edge-manifold population stays
/// below this.
pub const TOP_FOCK_CLEAN: f64 = 1e-6;
/// Hard ceiling for automatic truncation growth.
pub const N_MAX_CAP: usize = 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NmaxChoice {
    Scenario,
    Default,
    Grown { from: usize },
}

/// Everything a finished run hands back: the trajectory, labels for the
/// CSV, and the CSV text itself.
pub struct RunArtifacts {
    pub name: String,
    pub solver: Solver,
    pub n_max: usize,
    pub n_max_choice: NmaxChoice,
    pub level_ids: Vec<LevelId>,
    /// Sample times in ns (what the CSV prints).
    pub times_ns: Vec<f64>,
    pub traj: Trajectory,
    pub csv: String,
    /// Physics-diagnostic failure (integration flags or dirty truncation).
    pub failed: bool,
    pub failure: Option<String>,
}

impl RunArtifacts {
    pub fn peak_mean_n(&self) -> Option<(f64, f64)> {
        self.traj
            .records
            .iter()
            .zip(&self.times_ns)
            .map(|(r, &t)| (t, r.mean_n))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(t, v)| (v, t))
    }
}

/// Truncation default: generous for the pair regimes, k-anchored for the
/// dispersive ladders, wide for the DCE cascade; always enough to hold
/// the initial state.
fn default_n_max(scn: &Scenario) -> usize {
    let regime_floor = match scn.regime {
        Some(RegimeSpec::Resonant { .. }) | Some(RegimeSpec::ResonantTwoTone { .. }) | None => 4,
        Some(RegimeSpec::Ajc { k })
        | Some(RegimeSpec::AntiDce { k })
        | Some(RegimeSpec::AntiDceTwoTone { k }) => k + 2,
        Some(RegimeSpec::Dce) => 20,
    };
    let initial_floor = match scn.initial {
        InitialState::Zes => 0,
        // PureState::coherent requires |alpha|^2 <= n_max / 4.
        InitialState::Coherent { alpha } => (4.0 * alpha * alpha).ceil() as usize,
        InitialState::Dressed { n, .. } => n + 2,
    };
    regime_floor.max(initial_floor).max(2).min(N_MAX_CAP)
}

fn initial_density(scn: &Scenario, basis: &DressedBasis) -> CliResult<nd::Array2<C64>> {
    let space = basis.space();
    let lab = match scn.initial {
        InitialState::Zes => Some(PureState::zes(space).to_density()),
        InitialState::Coherent { alpha } => {
            Some(PureState::coherent(space, C64::new(alpha, 0.0))?.to_density())
        }
        InitialState::Dressed { .. } => None,
    };
    Ok(match (lab, scn.frame) {
        (Some(rho), Frame::Lab) => rho.matrix().clone(),
        (Some(rho), Frame::DressedInteraction) => basis.to_dressed(&rho.matrix().view()),
        (None, frame) => {
            let (n, branch) = match scn.initial {
                InitialState::Dressed { n, branch } => (n, branch),
                _ => unreachable!(),
            };
            let l = basis.manifold_level(n, branch)?;
            let mut rho = nd::Array2::zeros((basis.dim(), basis.dim()));
            rho[[l, l]] = C64::new(1.0, 0.0);
            match frame {
                Frame::DressedInteraction => rho,
                Frame::Lab => basis.to_bare(&rho.view()),
            }
        }
    })
}

/// Per-slot reference frequency for the effective links: a slot driven
/// through a formula declaration is treated as on resonance (the
/// reference follows the lab drive), a literal frequency is measured
/// against the formula (deliberate detuning).
fn eta_refs(coupling: &EffectiveCoupling, scn: &Scenario) -> Vec<f64> {
    let mut refs = coupling.eta_formula.clone();
    for s in 0..refs.len() {
        let lab = coupling.eta_lab[s];
        let declared = scn.tones.iter().any(|t| {
            t.formula.is_some() && (t.tone.frequency - lab).abs() <= 1e-9 * lab.abs().max(1.0)
        });
        if declared {
            refs[s] = lab;
        }
    }
    refs
}

/// Effective-model quantities echoed into the CSV header.
pub struct EffectiveSetup {
    pub coupling: EffectiveCoupling,
    pub eta_ref: Vec<f64>,
    pub link_count: usize,
}

fn build_generator(
    scn: &Scenario,
    model: &Model,
    basis: &DressedBasis,
) -> CliResult<(Box<dyn Generator>, Option<EffectiveSetup>)> {
    let space = basis.space();
    let ops = space.operators();
    Ok(match scn.solver {
        Solver::Unitary => match scn.frame {
            Frame::Lab => (
                Box::new(LabGenerator::unitary(model.clone(), space)?),
                None,
            ),
            Frame::DressedInteraction => {
                (Box::new(DressedFullGenerator::new(model.clone(), basis)?), None)
            }
        },
        Solver::Sme => {
            let superop = sme_superoperator(&ops, &scn.rates)?;
            (
                Box::new(LabGenerator::new(
                    model.clone(),
                    space,
                    LabDissipator::Bare(superop),
                )?),
                None,
            )
        }
        Solver::Dpme => {
            let tables = TransitionTables::build(basis, &ops);
            let superop = dpme_superoperator(basis, &tables, &FlatPositive(scn.rates));
            (
                Box::new(LabGenerator::new(
                    model.clone(),
                    space,
                    LabDissipator::Dressed { superop, basis: basis.clone() },
                )?),
                None,
            )
        }
        Solver::EffectiveSme | Solver::EffectiveDpme => {
            let regime = scn
                .regime
                .ok_or_else(|| CliError::Input("effective solvers need a [regime]".into()))?;
            let slots = assign_tone_slots(&scn.params, regime, &model.schedule)?;
            let coupling = regime_coupling(&scn.params, regime, &slots)?;
            let eta_ref = eta_refs(&coupling, scn);
            let dissipator = if scn.rates.kappa == 0.0
                && scn.rates.gamma == 0.0
                && scn.rates.gamma_phi == 0.0
            {
                None
            } else if scn.solver == Solver::EffectiveSme {
                Some(secular_sme_superoperator(basis, &ops, &scn.rates)?)
            } else {
                let tables = TransitionTables::build(basis, &ops);
                Some(dpme_superoperator(basis, &tables, &FlatPositive(scn.rates)))
            };
            let gen = EffectiveGenerator::from_regime(basis, &coupling, &eta_ref, dissipator)?;
            let link_count = gen.links().len();
            (
                Box::new(gen),
                Some(EffectiveSetup { coupling, eta_ref, link_count }),
            )
        }
    })
}

/// Step policy: unitary runs need tighter error control to keep purity
/// constant to ~1e-8 and the accumulated positivity drift below the
/// −1e-8 health flag.
fn default_integrator(scn: &Scenario) -> Integrator {
    match scn.solver {
        Solver::Unitary => Integrator::Adaptive {
            tol: Tolerances { rel: 2e-11, abs: 1e-13 },
            max_step: None,
        },
        _ => Integrator::default(),
    }
}

pub fn execute(scn: &Scenario) -> CliResult<RunArtifacts> {
    execute_with(scn, None)
}

/// Run a scenario, optionally overriding the step policy (used by the
/// validation suite for fixed-step full-model runs).
pub fn execute_with(scn: &Scenario, method: Option<Integrator>) -> CliResult<RunArtifacts> {
    let (mut n_max, explicit) = match scn.n_max {
        Some(n) => (n, true),
        None => (default_n_max(scn), false),
    };
    let mut choice = if explicit { NmaxChoice::Scenario } else { NmaxChoice::Default };
    let first = n_max;
    loop {
        let art = run_once(scn, n_max, choice, method)?;
        let top = art
            .traj
            .records
            .iter()
            .map(|r| r.diagnostics.top_fock_pop)
            .fold(0.0, f64::max);
        if explicit || top < TOP_FOCK_CLEAN || n_max >= N_MAX_CAP {
            return Ok(art);
        }
        n_max = (n_max + 2).min(N_MAX_CAP);
        choice = NmaxChoice::Grown { from: first };
    }
}

fn run_once(
    scn: &Scenario,
    n_max: usize,
    choice: NmaxChoice,
    method: Option<Integrator>,
) -> CliResult<RunArtifacts> {
    let space = HilbertSpace::new(n_max)?;
    let basis = DressedBasis::build(space, &scn.params)?;
    let model = Model::new(scn.params, scn.schedule())?;
    let rho0 = initial_density(scn, &basis)?;
    let (mut gen, setup) = build_generator(scn, &model, &basis)?;

    let times = scn.sample_times();
    let method = method.unwrap_or_else(|| default_integrator(scn));
    let mut traj = integrate(
        gen.as_mut(),
        rho0,
        0.0,
        &times,
        &method,
        &basis,
        scn.frame,
        false,
    )?;

    let top = traj
        .records
        .iter()
        .map(|r| r.diagnostics.top_fock_pop)
        .fold(0.0, f64::max);
    let mut failed = traj.failed;
    let mut failure = traj.failure.clone();
    if !failed && top >= TOP_FOCK_CLEAN && (scn.n_max.is_some() || n_max >= N_MAX_CAP) {
        failed = true;
        failure = Some(format!(
            "truncation dirty: top-Fock population reached {top:.3e} at n_max = {n_max}"
        ));
        traj.failed = true;
        traj.failure = failure.clone();
    }

    let tu = scn.params.time_unit_ns();
    let times_ns: Vec<f64> = traj.times.iter().map(|t| t * tu).collect();
    let level_ids = basis.level_ids().to_vec();
    let csv = csv_report(scn, &basis, setup.as_ref(), n_max, choice, &times_ns, &traj, &method);
    Ok(RunArtifacts {
        name: scn.name.clone(),
        solver: scn.solver,
        n_max,
        n_max_choice: choice,
        level_ids,
        times_ns,
        traj,
        csv,
        failed,
        failure,
    })
}

fn level_label(id: LevelId) -> String {
    match id {
        LevelId::Dressed { n, branch } => format!("pop_{n}{}", branch_str(branch)),
        LevelId::BareTop => "pop_top".into(),
    }
}

fn frame_label(frame: Frame) -> &'static str {
    match frame {
        Frame::Lab => "lab",
        Frame::DressedInteraction => "dressed-interaction",
    }
}

fn method_label(method: &Integrator) -> String {
    match method {
        Integrator::Adaptive { tol, .. } => {
            format!("adaptive (rel = {:.1e}, abs = {:.1e})", tol.rel, tol.abs)
        }
        Integrator::FixedRk4 { step } => format!("fixed rk4 (step = {step:.6e})"),
    }
}

#[allow(clippy::too_many_arguments)]
fn csv_report(
    scn: &Scenario,
    basis: &DressedBasis,
    setup: Option<&EffectiveSetup>,
    n_max: usize,
    choice: NmaxChoice,
    times_ns: &[f64],
    traj: &Trajectory,
    method: &Integrator,
) -> String {
    let p = &scn.params;
    let mut out = String::new();
    let w = &mut out;

    let _ = writeln!(w, "# modqed run: {}", scn.name);
    let _ = writeln!(
        w,
        "# solver = {}; frame = {}; integrator = {}",
        scn.solver.label(),
        frame_label(scn.frame),
        method_label(method)
    );
    let _ = writeln!(
        w,
        "# omega0/2pi = {:.6} GHz = {} g0; Omega0/2pi = {:.6} GHz = {} g0; g0/2pi = {:.6} GHz; 1 time unit = {:.6} ns",
        p.freq_ghz(p.omega0),
        p.omega0,
        p.freq_ghz(p.omega_q0),
        p.omega_q0,
        p.freq_ghz(p.g0),
        p.time_unit_ns()
    );
    let _ = writeln!(
        w,
        "# rates [g0]: kappa = {:e}, gamma = {:e}, gamma_phi = {:e}",
        scn.rates.kappa, scn.rates.gamma, scn.rates.gamma_phi
    );
    match scn.regime {
        Some(r) => {
            let _ = writeln!(w, "# regime = {r}");
        }
        None => {
            let _ = writeln!(w, "# regime = (none)");
        }
    }
    for (i, t) in scn.tones.iter().enumerate() {
        let _ = writeln!(
            w,
            "# tone {i}: {}, depth = {} g0, eta = {:.10} g0 = {:.10} GHz, phase = {} rad{}",
            target_label(t.tone.target),
            t.tone.depth,
            t.tone.frequency,
            p.freq_ghz(t.tone.frequency),
            t.tone.phase,
            match t.formula {
                Some(f) => format!(", formula = {f}"),
                None => String::new(),
            }
        );
    }
    if let Some(setup) = setup {
        let thetas = [Some(setup.coupling.theta), setup.coupling.theta2];
        for (s, eta_ref) in setup.eta_ref.iter().enumerate() {
            let theta = thetas.get(s).copied().flatten().unwrap_or_default();
            let _ = writeln!(
                w,
                "# effective slot {s}: |theta| = {:.6e} g0, eta_ref = {:.10} g0 = {:.10} GHz",
                theta.norm(),
                eta_ref,
                p.freq_ghz(*eta_ref)
            );
        }
        let _ = writeln!(w, "# effective links = {}", setup.link_count);
    }
    let _ = writeln!(w, "# initial = {}", scn.initial);
    let choice_note = match choice {
        NmaxChoice::Scenario => "scenario".to_string(),
        NmaxChoice::Default => "default".to_string(),
        NmaxChoice::Grown { from } => format!("grown from {from}"),
    };
    let _ = writeln!(w, "# n_max = {n_max} ({choice_note})");
    let _ = writeln!(
        w,
        "# t_max = {} ns = {:.4} time units; samples = {}",
        scn.t_max_ns, scn.t_max, scn.samples
    );
    match (&traj.failure, traj.failed) {
        (Some(msg), _) => {
            let _ = writeln!(w, "# status = FAILED: {msg}");
        }
        (None, true) => {
            let _ = writeln!(w, "# status = FAILED");
        }
        (None, false) => {
            let _ = writeln!(w, "# status = ok");
        }
    }

    let _ = write!(w, "t_ns,mean_n,mandel_q,p_e,trace_err,min_eig,purity");
    for id in basis.level_ids() {
        let _ = write!(w, ",{}", level_label(*id));
    }
    let _ = writeln!(w);

    for (i, rec) in traj.records.iter().enumerate() {
        let _ = write!(w, "{:.6},{:.10e}", times_ns[i], rec.mean_n);
        match rec.mandel_q {
            Some(q) => {
                let _ = write!(w, ",{q:.10e}");
            }
            None => {
                let _ = write!(w, ",");
            }
        }
        let d = &rec.diagnostics;
        let _ = write!(
            w,
            ",{:.10e},{:.3e},{:.3e},{:.10e}",
            rec.p_e, d.trace_err, d.min_eig, d.purity
        );
        for pop in &rec.dressed_pops {
            let _ = write!(w, ",{pop:.10e}");
        }
        let _ = writeln!(w);
    }
    out
}

fn target_label(t: modqed_core::ModulationTarget) -> &'static str {
    match t {
        modqed_core::ModulationTarget::CavityFreq => "cavity-freq",
        modqed_core::ModulationTarget::QubitFreq => "qubit-freq",
        modqed_core::ModulationTarget::Coupling => "coupling",
        modqed_core::ModulationTarget::Squeeze => "squeeze",
    }
}

// ---------------------------------------------------------------------------
// Fine-tuning.

#[derive(Debug)]
pub struct TuneOutcome {
    /// Tuned drive frequency, units of g₀.
    pub eta_star: f64,
    /// Starting guess (the tone's declared frequency).
    pub guess: f64,
    /// Formula value of the tuned slot.
    pub eta_formula: f64,
    /// Which tone was tuned.
    pub tone_index: usize,
    pub window: f64,
    /// Probe horizon in time units and the probe's target level label.
    pub horizon: f64,
    pub target: String,
}

/// Search for the drive frequency maximizing the tuned tone's transfer in
/// the *full* lab-frame model. The probe starts from the driven link's
/// lower level and measures the peak population of its upper level over
/// the first effective half-period.
pub fn tune_scenario(scn: &Scenario, window: f64) -> CliResult<TuneOutcome> {
    let regime = scn
        .regime
        .ok_or_else(|| CliError::Input("tune needs a [regime] section".into()))?;
    let tuned: Vec<usize> = scn
        .tones
        .iter()
        .enumerate()
        .filter(|(_, t)| t.fine_tune)
        .map(|(i, _)| i)
        .collect();
    let tone_index = match tuned.as_slice() {
        [i] => *i,
        [] => {
            return Err(CliError::Input(
                "no tone has fine_tune = true; mark exactly one".into(),
            ))
        }
        _ => {
            return Err(CliError::Input(format!(
                "{} tones have fine_tune = true; mark exactly one",
                tuned.len()
            )))
        }
    };

    let schedule = scn.schedule();
    let max_window = effective::max_search_window(&scn.params, &schedule);
    if !(window > 0.0) || !window.is_finite() {
        return Err(CliError::Input(format!(
            "window must be positive, got {window}"
        )));
    }
    if window > max_window {
        return Err(CliError::Input(format!(
            "window {window:.4} g0 exceeds the rotating-frame validity bound {max_window:.4} g0"
        )));
    }

    // Identify the tuned slot and its driven link from the declared drive.
    let slots = assign_tone_slots(&scn.params, regime, &schedule)?;
    let guess = scn.tones[tone_index].tone.frequency;
    let coupling = regime_coupling(&scn.params, regime, &slots)?;
    let slot = coupling
        .eta_formula
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - guess).abs().total_cmp(&(b.1 - guess).abs()))
        .map(|(s, _)| s)
        .expect("regimes have at least one slot");
    let eta_formula = coupling.eta_formula[slot];

    let n_max = scn.n_max.unwrap_or_else(|| default_n_max(scn));
    let space = HilbertSpace::new(n_max)?;
    let basis = DressedBasis::build(space, &scn.params)?;
    let links = effective::effective_links(&basis, &coupling, &coupling.eta_formula)?;
    // Slot 0 owns the first link; a second slot, when present, owns the
    // last one (the two-tone programs append their extension link).
    let link = match slot {
        0 => &links[0],
        _ => links.last().expect("two-tone regimes always produce links"),
    };
    let amp = link.amp.norm();
    if amp == 0.0 {
        return Err(CliError::Input(
            "the tuned tone drives no transition (zero effective rate)".into(),
        ));
    }
    let horizon = std::f64::consts::FRAC_PI_2 / amp;
    let target = link.upper;
    let target_label = level_label(basis.level_ids()[target]).replace("pop_", "");

    let mut rho0 = nd::Array2::zeros((basis.dim(), basis.dim()));
    rho0[[link.lower, link.lower]] = C64::new(1.0, 0.0);
    let rho0 = basis.to_bare(&rho0.view());

    let probe = |eta: f64| -> modqed_core::Result<f64> {
        let mut tones = schedule.tones().to_vec();
        tones[tone_index].frequency = eta;
        let model = Model::new(scn.params, modqed_core::Schedule::new(tones))?;
        effective::lab_transfer_probe(&model, &basis, &rho0, target, horizon, 96)
    };
    let tol = (amp / 20.0).max(1e-9);
    let eta_star = effective::fine_tune_resonance(probe, guess, window, tol)?;
    Ok(TuneOutcome {
        eta_star,
        guess,
        eta_formula,
        tone_index,
        window,
        horizon,
        target: target_label,
    })
}
