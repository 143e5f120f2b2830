//! Simulation and analysis toolkit for a single qubit coupled to a single
//! cavity mode whose parameters (cavity frequency, qubit gap, coupling,
//! squeezing drive) are modulated by fast external tones.
//!
//! The crate provides:
//! - a truncated qubit ⊗ cavity Hilbert space with the standard operator set
//!   ([`hilbert`]),
//! - the time-dependent system Hamiltonian and multi-tone modulation
//!   schedules ([`model`]),
//! - the analytic Jaynes–Cummings dressed basis and its transition tables
//!   ([`dressed`]),
//! - two zero-temperature Markovian dissipators — the standard master
//!   equation acting on bare operators and the dressed-picture master
//!   equation with spectral-density rates ([`dissipators`]),
//! - adaptive and fixed-step density-matrix/state integration with frame
//!   transforms ([`evolve`]),
//! - closed-form effective models for the modulation-induced resonances:
//!   coupling rates, pair/ladder transfer solutions, asymptotic steady
//!   states, rate equations and resonance fine-tuning ([`effective`]),
//! - observable extraction and physicality diagnostics ([`observables`]).
//!
//! Internally every frequency is expressed in units of the bare coupling g₀
//! and time in units of 1/g₀; conversions to laboratory units (GHz, ns)
//! happen only at the API boundary (see [`model::SystemParams`]).

pub mod dissipators;
pub mod dressed;
pub mod effective;
pub mod error;
pub mod evolve;
pub mod hilbert;
pub(crate) mod linalg;
pub mod model;
pub mod observables;

pub use error::{Error, Result};
pub use hilbert::{DensityMatrix, HilbertSpace, OperatorSet, PureState, Qubit};
pub use model::{
    HamiltonianParts, Model, ModulationTarget, ModulationTone, ParamValues, Schedule,
    SystemParams,
};
pub use dressed::{Branch, DressedBasis, LevelId, TransitionTables};
pub use dissipators::{
    DpmeRates, DressedJump, FlatPositive, Rates, SpectralDensity, SuperopBuilder, Superoperator,
};
pub use evolve::{
    frame_transform, integrate, Frame, FrameDirection, Generator, Integrator, LabDissipator,
    LabGenerator, SuperopGenerator, Tolerances, Trajectory,
};
pub use observables::{Diagnostics, ObservableRecord};
pub use effective::{
    assign_tone_slots, collective_depth, coupling_rate, detuning_branch, fine_tune_resonance,
    max_search_window, regime_coupling, resonance_frequencies, resonance_frequency,
    DampingChannel, EffectiveCoupling, EffectiveGenerator, EffectiveLink, RegimeSpec,
};

/// Complex scalar used throughout the crate.
pub use num_complex::Complex64 as C64;
