//! System parameters, multi-tone modulation schedules and the lab-frame
//! Hamiltonian
//!
//!   H(t) = ω(t) n̂ + Ω(t)|e⟩⟨e| + g(t)(a + a†)(σ₊ + σ₋) + iχ(t)(a†² − a²),
//!
//! with ℏ = 1 and every parameter X ∈ {ω, Ω, g, χ} driven as
//! X(t) = X₀ + Σ_j ε_j sin(η_j t + φ_j).
//!
//! Internally all frequencies are expressed in units of the static coupling
//! g₀ and time in units of 1/g₀; [`SystemParams::from_ghz`] converts lab
//! numbers at the boundary and keeps the scale factor for output.

use ndarray as nd;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::hilbert::HilbertSpace;

/// Which Hamiltonian coefficient a modulation tone drives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModulationTarget {
    /// Cavity frequency ω(t).
    CavityFreq,
    /// Qubit transition frequency Ω(t).
    QubitFreq,
    /// Qubit–cavity coupling g(t).
    Coupling,
    /// Degenerate parametric (squeezing) amplitude χ(t).
    Squeeze,
}

impl ModulationTarget {
    pub const ALL: [ModulationTarget; 4] = [
        ModulationTarget::CavityFreq,
        ModulationTarget::QubitFreq,
        ModulationTarget::Coupling,
        ModulationTarget::Squeeze,
    ];
}

/// One harmonic drive tone ε sin(ηt + φ) applied to a single parameter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModulationTone {
    pub target: ModulationTarget,
    /// Absolute depth ε (same units as the driven parameter).
    pub depth: f64,
    /// Angular frequency η, units of g₀.
    pub frequency: f64,
    /// Phase offset φ in radians.
    pub phase: f64,
}

impl ModulationTone {
    pub fn new(target: ModulationTarget, depth: f64, frequency: f64, phase: f64) -> Result<Self> {
        if !depth.is_finite() || !frequency.is_finite() || !phase.is_finite() {
            return Err(Error::BadSchedule("non-finite tone parameter".into()));
        }
        if frequency <= 0.0 {
            return Err(Error::BadSchedule(format!(
                "tone frequency must be positive, got {frequency}"
            )));
        }
        Ok(Self { target, depth, frequency, phase })
    }

    /// Instantaneous contribution ε sin(ηt + φ).
    pub fn signal(&self, t: f64) -> f64 {
        self.depth * (self.frequency * t + self.phase).sin()
    }

    /// Complex depth ε e^{iφ}; the drive is Im(ε e^{iφ} e^{iηt}).
    pub fn complex_depth(&self) -> C64 {
        C64::from_polar(self.depth, self.phase)
    }
}

/// Instantaneous values of the four Hamiltonian coefficients.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParamValues {
    pub omega: f64,
    pub omega_q: f64,
    pub g: f64,
    pub chi: f64,
}

/// Static (unmodulated) system parameters, in units of g₀.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SystemParams {
    /// Cavity frequency ω₀.
    pub omega0: f64,
    /// Qubit transition frequency Ω₀.
    pub omega_q0: f64,
    /// Qubit–cavity coupling g₀ (1 by construction in internal units).
    pub g0: f64,
    /// Static squeezing amplitude χ₀ (zero for every physical preset).
    pub chi0: f64,
    /// Value of g₀ in rad/s, kept only for unit conversion at the edges.
    pub g0_rad_per_s: f64,
}

impl SystemParams {
    /// Default lab scale: g₀/2π = 0.4 GHz.
    pub const DEFAULT_G0_RAD_PER_S: f64 = 2.0 * std::f64::consts::PI * 0.4e9;

    /// Parameters already in units of g₀ (so g0 = 1).
    pub fn in_units_of_g0(omega0: f64, omega_q0: f64) -> Result<Self> {
        let p = Self {
            omega0,
            omega_q0,
            g0: 1.0,
            chi0: 0.0,
            g0_rad_per_s: Self::DEFAULT_G0_RAD_PER_S,
        };
        p.validate()?;
        Ok(p)
    }

    /// Boundary constructor from ordinary-frequency lab values (GHz).
    pub fn from_ghz(omega_ghz: f64, qubit_ghz: f64, g_ghz: f64) -> Result<Self> {
        if g_ghz <= 0.0 {
            return Err(Error::BadParameter(format!(
                "coupling must be positive, got {g_ghz} GHz"
            )));
        }
        let p = Self {
            omega0: omega_ghz / g_ghz,
            omega_q0: qubit_ghz / g_ghz,
            g0: 1.0,
            chi0: 0.0,
            g0_rad_per_s: 2.0 * std::f64::consts::PI * g_ghz * 1e9,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("omega0", self.omega0),
            ("omega_q0", self.omega_q0),
            ("g0", self.g0),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::BadParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !self.chi0.is_finite() {
            return Err(Error::BadParameter("chi0 must be finite".into()));
        }
        Ok(())
    }

    /// Cavity–qubit detuning Δ₋ = ω₀ − Ω₀ (positive when the qubit sits
    /// below the cavity).
    pub fn delta_minus(&self) -> f64 {
        self.omega0 - self.omega_q0
    }

    /// Sum frequency Δ₊ = ω₀ + Ω₀.
    pub fn delta_plus(&self) -> f64 {
        self.omega0 + self.omega_q0
    }

    /// Dispersive (ac-Stark) shift δ₋ = g₀²/Δ₋; diverges at resonance,
    /// where the dispersive regimes that use it do not apply.
    pub fn shift_minus(&self) -> f64 {
        self.g0 * self.g0 / self.delta_minus()
    }

    /// Bloch–Siegert shift δ₊ = g₀²/Δ₊.
    pub fn shift_plus(&self) -> f64 {
        self.g0 * self.g0 / self.delta_plus()
    }

    /// Duration of one internal time unit in nanoseconds.
    pub fn time_unit_ns(&self) -> f64 {
        1e9 / self.g0_rad_per_s
    }

    /// Convert an internal angular frequency (units of g₀) to an ordinary
    /// lab frequency in GHz.
    pub fn freq_ghz(&self, x: f64) -> f64 {
        x * self.g0_rad_per_s / (2.0 * std::f64::consts::PI * 1e9)
    }

    /// Check that a truncation is trustworthy for dynamics reaching cavity
    /// level `n_active`: the collective coupling g₀√n must stay well inside
    /// the dispersive window, g₀√n_active ≤ 0.2 ω₀. The bound is applied to
    /// the highest level the physics actually populates, not to the storage
    /// truncation, which may carry extra guard levels.
    pub fn validate_active_levels(&self, n_active: usize) -> Result<()> {
        let reach = self.g0 * (n_active as f64).sqrt();
        if reach > 0.2 * self.omega0 {
            return Err(Error::BadParameter(format!(
                "collective coupling g0*sqrt({n_active}) = {reach:.3} exceeds 0.2*omega0 = {:.3}",
                0.2 * self.omega0
            )));
        }
        Ok(())
    }
}

/// Full multi-tone drive program.
#[derive(Clone, Debug, Default)]
pub struct Schedule {
    tones: Vec<ModulationTone>,
}

impl Schedule {
    /// No modulation at all.
    pub fn static_schedule() -> Self {
        Self { tones: Vec::new() }
    }

    pub fn new(tones: Vec<ModulationTone>) -> Self {
        Self { tones }
    }

    pub fn push(&mut self, tone: ModulationTone) {
        self.tones.push(tone);
    }

    pub fn tones(&self) -> &[ModulationTone] {
        &self.tones
    }

    pub fn tones_for(&self, target: ModulationTarget) -> impl Iterator<Item = &ModulationTone> {
        self.tones.iter().filter(move |tn| tn.target == target)
    }

    pub fn is_static(&self) -> bool {
        self.tones.is_empty()
    }

    /// Fastest tone frequency, governing integrator step limits. Zero when
    /// static.
    pub fn max_frequency(&self) -> f64 {
        self.tones.iter().map(|t| t.frequency).fold(0.0, f64::max)
    }

    /// Enforce the fast-weak-drive regime the model is derived in: every
    /// tone faster than the cavity (η > ω₀) and total depth per parameter
    /// at most 0.1 ω₀.
    pub fn validate(&self, params: &SystemParams) -> Result<()> {
        for tone in &self.tones {
            if tone.frequency <= params.omega0 {
                return Err(Error::BadSchedule(format!(
                    "tone frequency {} is not above the cavity frequency {}",
                    tone.frequency, params.omega0
                )));
            }
        }
        for target in ModulationTarget::ALL {
            let total: f64 = self.tones_for(target).map(|t| t.depth.abs()).sum();
            if total > 0.1 * params.omega0 + 1e-12 {
                return Err(Error::BadSchedule(format!(
                    "total modulation depth {total:.4} on {target:?} exceeds 0.1*omega0 = {:.4}",
                    0.1 * params.omega0
                )));
            }
        }
        Ok(())
    }

    /// Instantaneous parameter values at time t.
    pub fn values_at(&self, params: &SystemParams, t: f64) -> ParamValues {
        let mut v = ParamValues {
            omega: params.omega0,
            omega_q: params.omega_q0,
            g: params.g0,
            chi: params.chi0,
        };
        for tone in &self.tones {
            let s = tone.signal(t);
            match tone.target {
                ModulationTarget::CavityFreq => v.omega += s,
                ModulationTarget::QubitFreq => v.omega_q += s,
                ModulationTarget::Coupling => v.g += s,
                ModulationTarget::Squeeze => v.chi += s,
            }
        }
        v
    }
}

/// Precomputed operator content of the Hamiltonian, so that assembling
/// H(t) inside an integrator loop costs four scaled additions.
#[derive(Clone, Debug)]
pub struct HamiltonianParts {
    /// n̂
    pub n_op: nd::Array2<C64>,
    /// |e⟩⟨e|
    pub pe: nd::Array2<C64>,
    /// (a + a†)(σ₊ + σ₋)
    pub coupling: nd::Array2<C64>,
    /// i(a†² − a²), Hermitian.
    pub squeeze: nd::Array2<C64>,
}

impl HamiltonianParts {
    pub fn build(space: HilbertSpace) -> Self {
        let ops = space.operators();
        let x_cav = &ops.a + &ops.a_dag;
        let x_qb = &ops.sp + &ops.sm;
        let a2 = ops.a.dot(&ops.a);
        let adag2 = ops.a_dag.dot(&ops.a_dag);
        let squeeze = (&adag2 - &a2).mapv(|z| z * C64::new(0.0, 1.0));
        Self {
            n_op: ops.n_op,
            pe: ops.pe,
            coupling: x_cav.dot(&x_qb),
            squeeze,
        }
    }

    pub fn dim(&self) -> usize {
        self.n_op.nrows()
    }

    /// H(v) = ω n̂ + Ω|e⟩⟨e| + g (a+a†)(σ₊+σ₋) + χ · i(a†²−a²), written
    /// into `out`.
    pub fn assemble_into(&self, v: ParamValues, out: &mut nd::Array2<C64>) {
        out.fill(C64::new(0.0, 0.0));
        out.scaled_add(C64::new(v.omega, 0.0), &self.n_op);
        out.scaled_add(C64::new(v.omega_q, 0.0), &self.pe);
        out.scaled_add(C64::new(v.g, 0.0), &self.coupling);
        if v.chi != 0.0 {
            out.scaled_add(C64::new(v.chi, 0.0), &self.squeeze);
        }
    }

    pub fn assemble(&self, v: ParamValues) -> nd::Array2<C64> {
        let mut out = nd::Array2::zeros((self.dim(), self.dim()));
        self.assemble_into(v, &mut out);
        out
    }
}

/// Convenience bundle: parameters plus drive program.
#[derive(Clone, Debug)]
pub struct Model {
    pub params: SystemParams,
    pub schedule: Schedule,
}

impl Model {
    pub fn new(params: SystemParams, schedule: Schedule) -> Result<Self> {
        params.validate()?;
        schedule.validate(&params)?;
        Ok(Self { params, schedule })
    }

    pub fn values_at(&self, t: f64) -> ParamValues {
        self.schedule.values_at(&self.params, t)
    }

    pub fn hamiltonian_at(&self, parts: &HamiltonianParts, t: f64) -> nd::Array2<C64> {
        parts.assemble(self.values_at(t))
    }
}
