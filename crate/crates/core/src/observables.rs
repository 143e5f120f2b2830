//! Scalar quantities extracted from density matrices: mean photon number,
//! Mandel factor, atomic excitation probability, dressed-level populations
//! and numerical-health diagnostics.

use ndarray as nd;
use num_complex::Complex64 as C64;

use crate::dressed::DressedBasis;
use crate::hilbert::{HilbertSpace, Qubit};
use crate::linalg;

/// Below this mean photon number the Mandel factor is 0/0 and reported as
/// absent rather than zero.
pub const MANDEL_VACUUM_CUTOFF: f64 = 1e-12;

/// ⟨n̂⟩ = Σ_{n,q} n ρ[(n,q),(n,q)].
pub fn mean_photon(space: HilbertSpace, rho: &nd::ArrayView2<C64>) -> f64 {
    let mut acc = 0.0;
    for n in 0..=space.n_max() {
        for q in [Qubit::G, Qubit::E] {
            let i = space.index(n, q);
            acc += n as f64 * rho[[i, i]].re;
        }
    }
    acc
}

/// P_e = Tr(ρ |e⟩⟨e|).
pub fn excitation_probability(space: HilbertSpace, rho: &nd::ArrayView2<C64>) -> f64 {
    let mut acc = 0.0;
    for n in 0..=space.n_max() {
        let i = space.index(n, Qubit::E);
        acc += rho[[i, i]].re;
    }
    acc
}

/// Photon-number marginal p_n = Σ_q ρ[(n,q),(n,q)].
pub fn photon_marginal(space: HilbertSpace, rho: &nd::ArrayView2<C64>) -> Vec<f64> {
    let mut p = vec![0.0; space.n_max() + 1];
    for n in 0..=space.n_max() {
        for q in [Qubit::G, Qubit::E] {
            p[n] += rho[[space.index(n, q), space.index(n, q)]].re;
        }
    }
    p
}

/// Mandel factor Q = (⟨n̂²⟩ − ⟨n̂⟩² − ⟨n̂⟩)/⟨n̂⟩; None at (numerical) vacuum
/// where the expression is 0/0.
pub fn mandel_q(space: HilbertSpace, rho: &nd::ArrayView2<C64>) -> Option<f64> {
    let mut n1 = 0.0;
    let mut n2 = 0.0;
    for n in 0..=space.n_max() {
        for q in [Qubit::G, Qubit::E] {
            let p = rho[[space.index(n, q), space.index(n, q)]].re;
            n1 += n as f64 * p;
            n2 += (n * n) as f64 * p;
        }
    }
    if n1 < MANDEL_VACUUM_CUTOFF {
        None
    } else {
        Some((n2 - n1 * n1 - n1) / n1)
    }
}

/// Populations ⟨φ_l|ρ|φ_l⟩ of every dressed level (lab-basis ρ).
pub fn dressed_populations(basis: &DressedBasis, rho: &nd::ArrayView2<C64>) -> Vec<f64> {
    let d = basis.dim();
    let v = basis.transform();
    let mut pops = Vec::with_capacity(d);
    for l in 0..d {
        let col = v.column(l);
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..d {
            for j in 0..d {
                acc += col[i].conj() * rho[[i, j]] * col[j];
            }
        }
        pops.push(acc.re);
    }
    pops
}

/// Numerical-health scalars of a state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Diagnostics {
    /// |Tr ρ − 1|.
    pub trace_err: f64,
    /// Smallest eigenvalue (negative values signal positivity loss).
    pub min_eig: f64,
    /// Largest |ρ − ρ†| element.
    pub herm_err: f64,
    /// Photon marginal at the truncation edge n = n_max; must stay < 1e-6
    /// for a run to be truncation-clean.
    pub top_fock_pop: f64,
    /// Tr ρ² (1 for pure states).
    pub purity: f64,
}

pub fn diagnostics(space: HilbertSpace, rho: &nd::ArrayView2<C64>) -> Diagnostics {
    let tr = linalg::trace(rho);
    let trace_err = ((tr.re - 1.0).powi(2) + tr.im.powi(2)).sqrt();
    let herm_err = linalg::herm_deviation(rho);
    let min_eig = linalg::eigvalsh(rho)[0];
    let mut top = 0.0;
    for q in [Qubit::G, Qubit::E] {
        let i = space.index(space.n_max(), q);
        top += rho[[i, i]].re;
    }
    let purity: f64 = rho.iter().map(|z| z.norm_sqr()).sum();
    Diagnostics { trace_err, min_eig, herm_err, top_fock_pop: top, purity }
}

/// One sampled row of a trajectory: the figure quantities, dressed
/// populations (ordered as the basis levels) and health diagnostics.
#[derive(Clone, Debug)]
pub struct ObservableRecord {
    pub mean_n: f64,
    pub mandel_q: Option<f64>,
    pub p_e: f64,
    pub dressed_pops: Vec<f64>,
    pub diagnostics: Diagnostics,
}

impl ObservableRecord {
    /// Extract everything from a lab-basis density matrix.
    pub fn from_lab(basis: &DressedBasis, rho: &nd::ArrayView2<C64>) -> Self {
        let space = basis.space();
        Self {
            mean_n: mean_photon(space, rho),
            mandel_q: mandel_q(space, rho),
            p_e: excitation_probability(space, rho),
            dressed_pops: dressed_populations(basis, rho),
            diagnostics: diagnostics(space, rho),
        }
    }

    /// Extract everything from a dressed-coordinates density matrix.
    pub fn from_dressed(basis: &DressedBasis, rho_dressed: &nd::ArrayView2<C64>) -> Self {
        let rho_lab = basis.to_bare(rho_dressed);
        Self::from_lab(basis, &rho_lab.view())
    }
}
