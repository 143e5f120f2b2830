//! Jaynes–Cummings dressed basis built from closed-form mixing angles.
//!
//! Within the excitation-number-conserving part of the Hamiltonian each
//! n ≥ 1 manifold {|g,n⟩, |e,n−1⟩} hybridizes into
//!
//!   |φ_{n,+}⟩ = sin θ_n |g,n⟩ + cos θ_n |e,n−1⟩,
//!   |φ_{n,−}⟩ = cos θ_n |g,n⟩ − sin θ_n |e,n−1⟩,
//!
//! with θ_n = arctan[(Δ₋ + β_n)/(2g₀√n)], β_n = √(Δ₋² + 4g₀²n) and
//! energies λ_{n,S} = ω₀n − Δ₋/2 + Sβ_n/2 (Δ₋ = ω₀ − Ω₀). The
//! zero-excitation sector is the single state |φ_{0,−}⟩ = |g,0⟩ at λ = 0;
//! there is no (0,+) level. The basis is assembled from these formulas
//! directly — never by numerical diagonalization — because the dressed
//! master equation is defined on exactly these states.
//!
//! Truncation leaves |e, n_max⟩ without a partner (|g, n_max+1⟩ is outside
//! the space); it is kept verbatim as the top level so the basis stays
//! complete. Physical scenarios must not populate it.

use std::collections::HashMap;

use ndarray as nd;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::hilbert::{HilbertSpace, OperatorSet, PureState, Qubit};
use crate::linalg;
use crate::model::SystemParams;

/// Upper/lower member of a dressed doublet.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Branch {
    Minus,
    Plus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Minus => -1.0,
            Branch::Plus => 1.0,
        }
    }

    /// The branch whose states reduce to |g,n⟩ (cavity-like) in the
    /// dispersive limit: + for Δ₋ > 0 (qubit below the cavity), − for
    /// Δ₋ < 0. At exact resonance the label is conventional; we pick +.
    pub fn photon_like(params: &SystemParams) -> Branch {
        if params.delta_minus() >= 0.0 {
            Branch::Plus
        } else {
            Branch::Minus
        }
    }

    pub fn flipped(self) -> Branch {
        match self {
            Branch::Minus => Branch::Plus,
            Branch::Plus => Branch::Minus,
        }
    }
}

/// Identity of one level of the dressed ladder.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LevelId {
    Dressed { n: usize, branch: Branch },
    /// The unpartnered bare |e, n_max⟩ state kept to complete the basis.
    BareTop,
}

/// Mixing angle θ_n; θ₀ = 0 by definition.
pub fn mixing_angle(params: &SystemParams, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let beta = splitting(params, n);
    ((params.delta_minus() + beta) / (2.0 * params.g0 * (n as f64).sqrt())).atan()
}

/// Doublet splitting β_n = √(Δ₋² + 4g₀²n).
pub fn splitting(params: &SystemParams, n: usize) -> f64 {
    let dm = params.delta_minus();
    (dm * dm + 4.0 * params.g0 * params.g0 * n as f64).sqrt()
}

/// Energy λ_{n,S}; the zero-excitation level is pinned at λ_{0,−} = 0 and
/// (0,+) does not exist.
pub fn dressed_energy(params: &SystemParams, n: usize, branch: Branch) -> Result<f64> {
    if n == 0 {
        return match branch {
            Branch::Minus => Ok(0.0),
            Branch::Plus => Err(Error::BadParameter(
                "(0,+) is not a dressed level".into(),
            )),
        };
    }
    Ok(params.omega0 * n as f64 - params.delta_minus() / 2.0
        + branch.sign() * splitting(params, n) / 2.0)
}

/// Dressed state as a vector on the truncated space.
pub fn dressed_vector(
    space: HilbertSpace,
    params: &SystemParams,
    n: usize,
    branch: Branch,
) -> Result<PureState> {
    if n > space.n_max() {
        return Err(Error::BadParameter(format!(
            "dressed level n = {n} beyond truncation n_max = {}",
            space.n_max()
        )));
    }
    if n == 0 {
        return match branch {
            Branch::Minus => Ok(PureState::zes(space)),
            Branch::Plus => Err(Error::BadParameter(
                "(0,+) is not a dressed level".into(),
            )),
        };
    }
    let th = mixing_angle(params, n);
    let (s, c) = match branch {
        Branch::Plus => (th.sin(), th.cos()),
        Branch::Minus => (th.cos(), -th.sin()),
    };
    let mut v = nd::Array1::zeros(space.dim());
    v[space.index(n, Qubit::G)] = C64::new(s, 0.0);
    v[space.index(n - 1, Qubit::E)] = C64::new(c, 0.0);
    PureState::new(space, v)
}

/// Excitation-conserving Hamiltonian ω₀n̂ + Ω₀|e⟩⟨e| + g₀(âσ̂₊ + â†σ̂₋)
/// whose eigenvectors the dressed basis reproduces analytically.
pub fn jc_hamiltonian(space: HilbertSpace, params: &SystemParams) -> nd::Array2<C64> {
    let ops = space.operators();
    let mut h = ops.n_op.mapv(|z| z * C64::new(params.omega0, 0.0));
    h.scaled_add(C64::new(params.omega_q0, 0.0), &ops.pe);
    let jc = ops.a.dot(&ops.sp) + ops.a_dag.dot(&ops.sm);
    h.scaled_add(C64::new(params.g0, 0.0), &jc);
    h
}

/// The full dressed ladder on a truncated space: energies, level ordering
/// and the bare→dressed transform.
#[derive(Clone, Debug)]
pub struct DressedBasis {
    space: HilbertSpace,
    params: SystemParams,
    angles: Vec<f64>,
    splittings: Vec<f64>,
    levels: Vec<LevelId>,
    energies: Vec<f64>,
    index_of: HashMap<LevelId, usize>,
    /// Columns are dressed vectors in bare coordinates: V[b, l] = ⟨b|φ_l⟩.
    transform: nd::Array2<C64>,
}

impl DressedBasis {
    pub fn build(space: HilbertSpace, params: &SystemParams) -> Result<Self> {
        params.validate()?;
        let n_max = space.n_max();
        let d = space.dim();

        let angles: Vec<f64> = (0..=n_max).map(|n| mixing_angle(params, n)).collect();
        let splittings: Vec<f64> = (0..=n_max).map(|n| splitting(params, n)).collect();

        // Enumerate every level with its energy, then order by energy.
        let mut entries: Vec<(LevelId, f64)> = Vec::with_capacity(d);
        entries.push((LevelId::Dressed { n: 0, branch: Branch::Minus }, 0.0));
        for n in 1..=n_max {
            for branch in [Branch::Minus, Branch::Plus] {
                entries.push((
                    LevelId::Dressed { n, branch },
                    dressed_energy(params, n, branch)?,
                ));
            }
        }
        entries.push((
            LevelId::BareTop,
            params.omega0 * n_max as f64 + params.omega_q0,
        ));
        entries.sort_by(|x, y| x.1.total_cmp(&y.1));

        let mut transform = nd::Array2::zeros((d, d));
        let mut levels = Vec::with_capacity(d);
        let mut energies = Vec::with_capacity(d);
        let mut index_of = HashMap::with_capacity(d);
        for (l, (id, energy)) in entries.into_iter().enumerate() {
            match id {
                LevelId::Dressed { n, branch } => {
                    let psi = dressed_vector(space, params, n, branch)?;
                    transform.column_mut(l).assign(psi.amplitudes());
                }
                LevelId::BareTop => {
                    transform[[space.index(n_max, Qubit::E), l]] = C64::new(1.0, 0.0);
                }
            }
            levels.push(id);
            energies.push(energy);
            index_of.insert(id, l);
        }

        Ok(Self {
            space,
            params: *params,
            angles,
            splittings,
            levels,
            energies,
            index_of,
            transform,
        })
    }

    pub fn space(&self) -> HilbertSpace {
        self.space
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn angle(&self, n: usize) -> f64 {
        self.angles[n]
    }

    pub fn beta(&self, n: usize) -> f64 {
        self.splittings[n]
    }

    /// Level identities in order of increasing energy.
    pub fn level_ids(&self) -> &[LevelId] {
        &self.levels
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn energy(&self, l: usize) -> f64 {
        self.energies[l]
    }

    /// Position of a level in the energy ordering; None for the
    /// nonexistent (0,+).
    pub fn index_of(&self, id: LevelId) -> Option<usize> {
        self.index_of.get(&id).copied()
    }

    /// Level lookup that treats the zero-excitation state as the n = 0
    /// member of either branch (the ladder regimes address it both ways).
    pub fn manifold_level(&self, n: usize, branch: Branch) -> Result<usize> {
        let id = if n == 0 {
            LevelId::Dressed { n: 0, branch: Branch::Minus }
        } else {
            LevelId::Dressed { n, branch }
        };
        self.index_of(id).ok_or_else(|| {
            Error::BadParameter(format!(
                "dressed level (n = {n}, {branch:?}) outside the truncated ladder"
            ))
        })
    }

    /// Bare→dressed transform V with ⟨b|φ_l⟩ = V[b, l].
    pub fn transform(&self) -> &nd::Array2<C64> {
        &self.transform
    }

    /// Rotate an operator matrix from bare to dressed coordinates, V†MV.
    pub fn to_dressed(&self, m: &nd::ArrayView2<C64>) -> nd::Array2<C64> {
        let vd = linalg::dagger(&self.transform.view());
        vd.dot(m).dot(&self.transform)
    }

    /// Rotate an operator matrix from dressed to bare coordinates, VMV†.
    pub fn to_bare(&self, m: &nd::ArrayView2<C64>) -> nd::Array2<C64> {
        let vd = linalg::dagger(&self.transform.view());
        self.transform.dot(m).dot(&vd)
    }
}

/// Matrix elements of the system operators between dressed levels,
/// together with the transition frequencies: everything the dressed
/// dissipator needs.
#[derive(Clone, Debug)]
pub struct TransitionTables {
    /// gap[[l, k]] = Δ_kl = λ_k − λ_l (positive when k lies above l).
    pub gap: nd::Array2<f64>,
    /// a[[l, k]] = ⟨l|(â + â†)|k⟩.
    pub a: nd::Array2<C64>,
    /// sx[[l, k]] = ⟨l|(σ̂₊ + σ̂₋)|k⟩.
    pub sx: nd::Array2<C64>,
    /// sz[[l, k]] = ⟨l|σ̂_z|k⟩.
    pub sz: nd::Array2<C64>,
}

impl TransitionTables {
    pub fn build(basis: &DressedBasis, ops: &OperatorSet) -> Self {
        let d = basis.dim();
        let mut gap = nd::Array2::zeros((d, d));
        for l in 0..d {
            for k in 0..d {
                gap[[l, k]] = basis.energy(k) - basis.energy(l);
            }
        }
        let x_cav = &ops.a + &ops.a_dag;
        let x_qb = &ops.sp + &ops.sm;
        Self {
            gap,
            a: basis.to_dressed(&x_cav.view()),
            sx: basis.to_dressed(&x_qb.view()),
            sz: basis.to_dressed(&ops.sz.view()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_4, SQRT_2};

    fn dispersive() -> SystemParams {
        // Qubit 8g₀ below the cavity: Δ₋ = +8.
        SystemParams::in_units_of_g0(20.0, 12.0).unwrap()
    }

    fn resonant() -> SystemParams {
        SystemParams::in_units_of_g0(20.0, 20.0).unwrap()
    }

    #[test]
    fn mixing_angles() {
        assert_eq!(mixing_angle(&dispersive(), 0), 0.0);
        assert!((mixing_angle(&resonant(), 1) - FRAC_PI_4).abs() < 1e-15);
        // Δ₋ = 8: θ₁ = arctan((8 + √68)/2).
        let th = mixing_angle(&dispersive(), 1);
        assert!((th - ((8.0 + 68.0_f64.sqrt()) / 2.0).atan()).abs() < 1e-15);
        assert!((th - 1.4483065).abs() < 1e-6);
    }

    #[test]
    fn energies() {
        assert_eq!(dressed_energy(&dispersive(), 0, Branch::Minus).unwrap(), 0.0);
        assert!(dressed_energy(&dispersive(), 0, Branch::Plus).is_err());
        let e2p = dressed_energy(&resonant(), 2, Branch::Plus).unwrap();
        assert!((e2p - (40.0 + SQRT_2)).abs() < 1e-12);
        let e1m = dressed_energy(&dispersive(), 1, Branch::Minus).unwrap();
        assert!((e1m - (20.0 - 8.12311)).abs() < 1e-5);
    }

    #[test]
    fn vectors() {
        let sp = HilbertSpace::new(4).unwrap();
        let zes = dressed_vector(sp, &dispersive(), 0, Branch::Minus).unwrap();
        assert_eq!(zes.amplitudes()[0], C64::new(1.0, 0.0));

        let v = dressed_vector(sp, &resonant(), 2, Branch::Plus).unwrap();
        let amp = 1.0 / SQRT_2;
        assert!((v.amplitudes()[sp.index(2, Qubit::G)].re - amp).abs() < 1e-12);
        assert!((v.amplitudes()[sp.index(1, Qubit::E)].re - amp).abs() < 1e-12);

        // Dispersive (2,−) is qubit-like: |e,1⟩ weight sin²θ₂ from the
        // closed form, ≈ 0.9714 for Δ₋ = 8.
        let v = dressed_vector(sp, &dispersive(), 2, Branch::Minus).unwrap();
        let w = v.amplitudes()[sp.index(1, Qubit::E)].norm_sqr();
        let th2 = ((8.0 + 72.0_f64.sqrt()) / (2.0 * SQRT_2)).atan();
        assert!((w - th2.sin().powi(2)).abs() < 1e-12);
        assert!(w > 0.97, "dispersive identification weight {w}");
    }

    #[test]
    fn ladder_ordering_at_resonance() {
        let sp = HilbertSpace::new(2).unwrap();
        let basis = DressedBasis::build(sp, &resonant()).unwrap();
        let expect = [
            0.0,
            19.0,
            21.0,
            40.0 - SQRT_2,
            40.0 + SQRT_2,
            60.0,
        ];
        for (l, e) in expect.iter().enumerate() {
            assert!(
                (basis.energy(l) - e).abs() < 1e-12,
                "level {l}: {} vs {e}",
                basis.energy(l)
            );
        }
        assert_eq!(basis.level_ids()[5], LevelId::BareTop);
        assert_eq!(
            basis.index_of(LevelId::Dressed { n: 2, branch: Branch::Minus }),
            Some(3)
        );
        assert_eq!(
            basis.index_of(LevelId::Dressed { n: 0, branch: Branch::Plus }),
            None
        );
    }

    #[test]
    fn eigen_residuals_and_unitarity() {
        let sp = HilbertSpace::new(8).unwrap();
        let p = dispersive();
        let basis = DressedBasis::build(sp, &p).unwrap();
        let h = jc_hamiltonian(sp, &p);
        let d = sp.dim();

        let hv = h.dot(basis.transform());
        for l in 0..d {
            let mut res = 0.0_f64;
            for b in 0..d {
                res += (hv[[b, l]] - basis.transform()[[b, l]] * basis.energy(l)).norm_sqr();
            }
            assert!(
                res.sqrt() <= 1e-10 * p.omega0,
                "eigen residual {} at level {l}",
                res.sqrt()
            );
        }

        let vd = crate::linalg::dagger(&basis.transform().view());
        let gram = vd.dot(basis.transform());
        let complete = basis.transform().dot(&vd);
        for i in 0..d {
            for j in 0..d {
                let id = if i == j { 1.0 } else { 0.0 };
                assert!((gram[[i, j]] - C64::new(id, 0.0)).norm() < 1e-12);
                assert!((complete[[i, j]] - C64::new(id, 0.0)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn bare_limit_transform_is_identity_up_to_phases() {
        let p = SystemParams::in_units_of_g0(1e9, 0.6e9).unwrap();
        let sp = HilbertSpace::new(5).unwrap();
        let basis = DressedBasis::build(sp, &p).unwrap();
        for i in 0..sp.dim() {
            for j in 0..sp.dim() {
                let mag = basis.transform()[[i, j]].norm();
                if i == j {
                    assert!((mag - 1.0).abs() < 1e-12);
                } else {
                    assert!(mag < 1e-8);
                }
            }
        }
    }

    #[test]
    fn table_elements() {
        let sp = HilbertSpace::new(5).unwrap();
        let p = resonant();
        let basis = DressedBasis::build(sp, &p).unwrap();
        let tables = TransitionTables::build(&basis, &sp.operators());

        // ⟨φ_{0,−}|(a+a†)|φ_{1,−}⟩ = cos θ₁ = 1/√2 at resonance.
        let l0 = basis.manifold_level(0, Branch::Minus).unwrap();
        let l1m = basis.manifold_level(1, Branch::Minus).unwrap();
        assert!((tables.a[[l0, l1m]].norm() - 1.0 / SQRT_2).abs() < 1e-12);
        // σz on the pure |g,0⟩ level.
        assert!((tables.sz[[l0, l0]] - C64::new(-1.0, 0.0)).norm() < 1e-12);
        // Gap antisymmetry and Hermitian element tables.
        for l in 0..sp.dim() {
            for k in 0..sp.dim() {
                assert_eq!(tables.gap[[l, k]], -(tables.gap[[k, l]]));
                assert!((tables.a[[l, k]] - tables.a[[k, l]].conj()).norm() < 1e-12);
                assert!((tables.sx[[l, k]] - tables.sx[[k, l]].conj()).norm() < 1e-12);
                assert!((tables.sz[[l, k]] - tables.sz[[k, l]].conj()).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn bare_limit_photon_ladder_elements() {
        let p = SystemParams::in_units_of_g0(1e9, 0.6e9).unwrap();
        let sp = HilbertSpace::new(5).unwrap();
        let basis = DressedBasis::build(sp, &p).unwrap();
        let tables = TransitionTables::build(&basis, &sp.operators());
        assert_eq!(Branch::photon_like(&p), Branch::Plus);
        for n in 0..4_usize {
            let lo = basis.manifold_level(n, Branch::Plus).unwrap();
            let hi = basis.manifold_level(n + 1, Branch::Plus).unwrap();
            let el = tables.a[[lo, hi]].norm();
            assert!(
                (el - ((n + 1) as f64).sqrt()).abs() < 1e-7,
                "a element {el} at n = {n}"
            );
        }
    }

    proptest! {
        #[test]
        fn splitting_identity(dm in -10.0..10.0f64, n in 1usize..12) {
            let p = SystemParams {
                omega0: 20.0,
                omega_q0: 20.0 - dm,
                g0: 1.0,
                chi0: 0.0,
                g0_rad_per_s: SystemParams::DEFAULT_G0_RAD_PER_S,
            };
            let b = splitting(&p, n);
            let lhs = b * b - dm * dm;
            let rhs = 4.0 * n as f64;
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1.0));
        }

        #[test]
        fn angle_monotone_in_detuning(n in 1usize..10) {
            let mut prev = f64::NEG_INFINITY;
            for k in 0..40 {
                let dm = -10.0 + k as f64 * 0.5;
                let p = SystemParams {
                    omega0: 30.0,
                    omega_q0: 30.0 - dm,
                    g0: 1.0,
                    chi0: 0.0,
                    g0_rad_per_s: SystemParams::DEFAULT_G0_RAD_PER_S,
                };
                let th = mixing_angle(&p, n);
                prop_assert!(th > prev);
                prev = th;
            }
        }
    }
}
