//! Truncated qubit ⊗ cavity Hilbert space, the standard operator set and
//! physical state containers.
//!
//! Basis ordering is fixed once and for all: the bare state |q, n⟩ with
//! cavity occupation n and qubit level q ∈ {g, e} sits at index
//! `2n + q` (g = 0, e = 1). Every matrix in the crate uses this ordering.

use ndarray as nd;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg;

/// Qubit level of a bare basis state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Qubit {
    G,
    E,
}

impl Qubit {
    fn offset(self) -> usize {
        match self {
            Qubit::G => 0,
            Qubit::E => 1,
        }
    }
}

/// Truncated two-level ⊗ Fock space keeping cavity levels 0..=n_max.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HilbertSpace {
    n_max: usize,
}

impl HilbertSpace {
    pub const N_MAX_LIMIT: usize = 4096;

    pub fn new(n_max: usize) -> Result<Self> {
        if n_max < 1 || n_max > Self::N_MAX_LIMIT {
            return Err(Error::InvalidTruncation(n_max));
        }
        Ok(Self { n_max })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Total dimension 2(n_max + 1).
    pub fn dim(&self) -> usize {
        2 * (self.n_max + 1)
    }

    /// Index of |q, n⟩ in the fixed ordering.
    pub fn index(&self, n: usize, q: Qubit) -> usize {
        debug_assert!(n <= self.n_max);
        2 * n + q.offset()
    }

    /// Inverse of [`Self::index`].
    pub fn state_at(&self, idx: usize) -> (usize, Qubit) {
        debug_assert!(idx < self.dim());
        (idx / 2, if idx % 2 == 0 { Qubit::G } else { Qubit::E })
    }

    /// Cavity annihilation operator a ⊗ 1; the amplitude that would leave
    /// the truncated space (from a nonexistent n_max + 1 level) simply has
    /// no source row, so a|q, n_max⟩ → √n_max |q, n_max−1⟩ stays exact.
    pub fn annihilation(&self) -> nd::Array2<C64> {
        let mut m = nd::Array2::zeros((self.dim(), self.dim()));
        for n in 1..=self.n_max {
            for q in [Qubit::G, Qubit::E] {
                m[[self.index(n - 1, q), self.index(n, q)]] = C64::new((n as f64).sqrt(), 0.0);
            }
        }
        m
    }

    pub fn creation(&self) -> nd::Array2<C64> {
        linalg::dagger(&self.annihilation().view())
    }

    /// Photon number operator n̂ = a†a.
    pub fn number(&self) -> nd::Array2<C64> {
        let mut m = nd::Array2::zeros((self.dim(), self.dim()));
        for n in 0..=self.n_max {
            for q in [Qubit::G, Qubit::E] {
                let i = self.index(n, q);
                m[[i, i]] = C64::new(n as f64, 0.0);
            }
        }
        m
    }

    /// Qubit lowering operator σ₋ = |g⟩⟨e| ⊗ 1.
    pub fn sigma_minus(&self) -> nd::Array2<C64> {
        let mut m = nd::Array2::zeros((self.dim(), self.dim()));
        for n in 0..=self.n_max {
            m[[self.index(n, Qubit::G), self.index(n, Qubit::E)]] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn sigma_plus(&self) -> nd::Array2<C64> {
        linalg::dagger(&self.sigma_minus().view())
    }

    /// σ_z = |e⟩⟨e| − |g⟩⟨g|.
    pub fn sigma_z(&self) -> nd::Array2<C64> {
        let mut m = nd::Array2::zeros((self.dim(), self.dim()));
        for n in 0..=self.n_max {
            m[[self.index(n, Qubit::G), self.index(n, Qubit::G)]] = C64::new(-1.0, 0.0);
            m[[self.index(n, Qubit::E), self.index(n, Qubit::E)]] = C64::new(1.0, 0.0);
        }
        m
    }

    /// Projector |e⟩⟨e| ⊗ 1 onto the excited qubit level.
    pub fn excited_projector(&self) -> nd::Array2<C64> {
        let mut m = nd::Array2::zeros((self.dim(), self.dim()));
        for n in 0..=self.n_max {
            let i = self.index(n, Qubit::E);
            m[[i, i]] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn identity(&self) -> nd::Array2<C64> {
        nd::Array2::eye(self.dim())
    }

    /// All operators needed by the model and the dissipators, built once.
    pub fn operators(&self) -> OperatorSet {
        OperatorSet {
            a: self.annihilation(),
            a_dag: self.creation(),
            n_op: self.number(),
            sm: self.sigma_minus(),
            sp: self.sigma_plus(),
            sz: self.sigma_z(),
            pe: self.excited_projector(),
        }
    }
}

/// Bundle of the standard operators on one space.
#[derive(Clone, Debug)]
pub struct OperatorSet {
    pub a: nd::Array2<C64>,
    pub a_dag: nd::Array2<C64>,
    pub n_op: nd::Array2<C64>,
    pub sm: nd::Array2<C64>,
    pub sp: nd::Array2<C64>,
    pub sz: nd::Array2<C64>,
    pub pe: nd::Array2<C64>,
}

/// Normalized state vector on a [`HilbertSpace`].
#[derive(Clone, Debug)]
pub struct PureState {
    space: HilbertSpace,
    vec: nd::Array1<C64>,
}

impl PureState {
    const NORM_TOL: f64 = 1e-12;

    pub fn new(space: HilbertSpace, amplitudes: nd::Array1<C64>) -> Result<Self> {
        if amplitudes.len() != space.dim() {
            return Err(Error::DimMismatch(format!(
                "state length {} on a dim-{} space",
                amplitudes.len(),
                space.dim()
            )));
        }
        let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > Self::NORM_TOL {
            return Err(Error::NotNormalized((norm - 1.0).abs()));
        }
        Ok(Self { space, vec: amplitudes })
    }

    /// Joint ground state |g, 0⟩ (the zero-excitation state).
    pub fn zes(space: HilbertSpace) -> Self {
        Self::bare(space, 0, Qubit::G).expect("n = 0 always inside the truncation")
    }

    /// Bare basis state |q, n⟩.
    pub fn bare(space: HilbertSpace, n: usize, q: Qubit) -> Result<Self> {
        if n > space.n_max() {
            return Err(Error::BadParameter(format!(
                "bare state n = {n} beyond truncation n_max = {}",
                space.n_max()
            )));
        }
        let mut v = nd::Array1::zeros(space.dim());
        v[space.index(n, q)] = C64::new(1.0, 0.0);
        Ok(Self { space, vec: v })
    }

    /// Coherent cavity state |α⟩ ⊗ |g⟩, truncated and renormalized.
    ///
    /// Requires |α|² ≤ n_max/4 so the truncated tail carries negligible
    /// weight; the amplitudes are built by the stable ratio recursion
    /// c_n = c_{n−1}·α/√n instead of explicit factorials.
    pub fn coherent(space: HilbertSpace, alpha: C64) -> Result<Self> {
        let mean = alpha.norm_sqr();
        let quarter = space.n_max() as f64 / 4.0;
        if mean > quarter {
            return Err(Error::CoherentTooLarge(mean, quarter));
        }
        let mut v: nd::Array1<C64> = nd::Array1::zeros(space.dim());
        let mut c = C64::new((-mean / 2.0).exp(), 0.0);
        v[space.index(0, Qubit::G)] = c;
        for n in 1..=space.n_max() {
            c *= alpha / C64::new((n as f64).sqrt(), 0.0);
            v[space.index(n, Qubit::G)] = c;
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        v.mapv_inplace(|z| z / norm);
        Ok(Self { space, vec: v })
    }

    pub fn space(&self) -> HilbertSpace {
        self.space
    }

    pub fn amplitudes(&self) -> &nd::Array1<C64> {
        &self.vec
    }

    pub fn to_density(&self) -> DensityMatrix {
        let d = self.space.dim();
        let mut m = nd::Array2::zeros((d, d));
        for i in 0..d {
            for j in 0..d {
                m[[i, j]] = self.vec[i] * self.vec[j].conj();
            }
        }
        DensityMatrix {
            space: self.space,
            mat: m,
        }
    }

    pub fn expect(&self, op: &nd::ArrayView2<C64>) -> Result<C64> {
        if op.nrows() != self.space.dim() || op.ncols() != self.space.dim() {
            return Err(Error::DimMismatch(format!(
                "operator {}x{} against dim-{} state",
                op.nrows(),
                op.ncols(),
                self.space.dim()
            )));
        }
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..self.vec.len() {
            for j in 0..self.vec.len() {
                acc += self.vec[i].conj() * op[[i, j]] * self.vec[j];
            }
        }
        Ok(acc)
    }
}

/// Validated density operator: Hermitian, unit trace, positive within
/// round-off (smallest eigenvalue ≥ −1e-10).
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    space: HilbertSpace,
    mat: nd::Array2<C64>,
}

impl DensityMatrix {
    const HERM_TOL: f64 = 1e-12;
    const TRACE_TOL: f64 = 1e-10;
    const EIG_TOL: f64 = -1e-10;

    pub fn new(space: HilbertSpace, mat: nd::Array2<C64>) -> Result<Self> {
        if mat.nrows() != space.dim() || mat.ncols() != space.dim() {
            return Err(Error::DimMismatch(format!(
                "density matrix {}x{} on a dim-{} space",
                mat.nrows(),
                mat.ncols(),
                space.dim()
            )));
        }
        let herm = linalg::herm_deviation(&mat.view());
        if herm > Self::HERM_TOL {
            return Err(Error::NotDensity(format!(
                "Hermiticity violated by {herm:.3e}"
            )));
        }
        let tr = linalg::trace(&mat.view());
        if (tr.re - 1.0).abs() > Self::TRACE_TOL || tr.im.abs() > Self::TRACE_TOL {
            return Err(Error::NotDensity(format!("trace = {tr}")));
        }
        let min_eig = linalg::eigvalsh(&mat.view())[0];
        if min_eig < Self::EIG_TOL {
            return Err(Error::NotDensity(format!(
                "smallest eigenvalue {min_eig:.3e}"
            )));
        }
        Ok(Self { space, mat })
    }

    pub fn space(&self) -> HilbertSpace {
        self.space
    }

    pub fn matrix(&self) -> &nd::Array2<C64> {
        &self.mat
    }

    pub fn expect(&self, op: &nd::ArrayView2<C64>) -> Result<C64> {
        expectation(op, &self.mat.view())
    }
}

/// Tr(O ρ) for explicit matrices; errors on shape mismatch.
pub fn expectation(op: &nd::ArrayView2<C64>, rho: &nd::ArrayView2<C64>) -> Result<C64> {
    if op.nrows() != rho.nrows() || op.ncols() != rho.ncols() || op.nrows() != op.ncols() {
        return Err(Error::DimMismatch(format!(
            "expectation of {}x{} operator against {}x{} state",
            op.nrows(),
            op.ncols(),
            rho.nrows(),
            rho.ncols()
        )));
    }
    // Tr(Oρ) = Σ_ij O_ij ρ_ji
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..op.nrows() {
        for j in 0..op.ncols() {
            acc += op[[i, j]] * rho[[j, i]];
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn dimension_rule() {
        let sp = HilbertSpace::new(4).unwrap();
        assert_eq!(sp.dim(), 10);
        assert_eq!(sp.index(0, Qubit::G), 0);
        assert_eq!(sp.index(0, Qubit::E), 1);
        assert_eq!(sp.index(3, Qubit::G), 6);
        assert_eq!(sp.state_at(7), (3, Qubit::E));
    }

    #[test]
    fn truncation_bounds() {
        assert!(HilbertSpace::new(0).is_err());
        assert!(HilbertSpace::new(4097).is_err());
        assert!(HilbertSpace::new(1).is_ok());
    }

    #[test]
    fn annihilation_on_one_photon() {
        let sp = HilbertSpace::new(4).unwrap();
        let a = sp.annihilation();
        // a|g,1⟩ = |g,0⟩
        assert_eq!(a[[sp.index(0, Qubit::G), sp.index(1, Qubit::G)]], c(1.0, 0.0));
        // a|e,2⟩ = √2 |e,1⟩
        let amp = a[[sp.index(1, Qubit::E), sp.index(2, Qubit::E)]];
        assert!((amp.re - 2.0_f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn annihilation_respects_truncation() {
        // No amplitude flows from outside the space: column n_max of a† and
        // row n_max+1 of a simply do not exist, so a|g,n_max⟩ is exact while
        // a†|g,n_max⟩ vanishes.
        let sp = HilbertSpace::new(3).unwrap();
        let adag = sp.creation();
        let top = sp.index(3, Qubit::G);
        assert!(adag.column(top).iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn commutator_below_truncation() {
        let sp = HilbertSpace::new(6).unwrap();
        let a = sp.annihilation();
        let adag = sp.creation();
        let comm = a.dot(&adag) - adag.dot(&a);
        // [a, a†] = 1 on every level strictly below the truncation edge.
        for n in 0..sp.n_max() {
            for q in [Qubit::G, Qubit::E] {
                let i = sp.index(n, q);
                assert!((comm[[i, i]] - c(1.0, 0.0)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn qubit_operators() {
        let sp = HilbertSpace::new(2).unwrap();
        let sm = sp.sigma_minus();
        assert_eq!(sm[[sp.index(1, Qubit::G), sp.index(1, Qubit::E)]], c(1.0, 0.0));
        let sz = sp.sigma_z();
        assert_eq!(sz[[sp.index(0, Qubit::E), sp.index(0, Qubit::E)]], c(1.0, 0.0));
        assert_eq!(sz[[sp.index(2, Qubit::G), sp.index(2, Qubit::G)]], c(-1.0, 0.0));
        // σ_z = 2|e⟩⟨e| − 1
        let pe = sp.excited_projector();
        let recon = pe.mapv(|z| 2.0 * z) - sp.identity();
        assert!(recon.iter().zip(sz.iter()).all(|(x, y)| (x - y).norm() < 1e-15));
    }

    #[test]
    fn coherent_mean_photon_matches_poisson_sum() {
        let sp = HilbertSpace::new(16).unwrap();
        let alpha = c(2.0, 0.0);
        let psi = PureState::coherent(sp, alpha).unwrap();
        let measured = psi.expect(&sp.number().view()).unwrap().re;

        // Independent oracle: truncated Poisson weights from direct series.
        let mean = alpha.norm_sqr();
        let mut w = (-mean).exp();
        let (mut norm, mut acc) = (w, 0.0);
        for n in 1..=16_usize {
            w *= mean / n as f64;
            norm += w;
            acc += n as f64 * w;
        }
        let oracle = acc / norm;
        assert!(
            (measured - oracle).abs() < 1e-12,
            "measured {measured}, oracle {oracle}"
        );
        assert!((measured - 4.0).abs() < 1e-4, "truncated mean {measured}");
    }

    #[test]
    fn coherent_rejects_small_truncation() {
        let sp = HilbertSpace::new(16).unwrap();
        assert!(matches!(
            PureState::coherent(sp, c(3.0, 0.0)),
            Err(Error::CoherentTooLarge(_, _))
        ));
    }

    #[test]
    fn expectation_shape_mismatch() {
        let sp4 = HilbertSpace::new(4).unwrap();
        let sp2 = HilbertSpace::new(2).unwrap();
        let rho = PureState::zes(sp4).to_density();
        assert!(rho.expect(&sp2.number().view()).is_err());
    }

    #[test]
    fn density_matrix_validation() {
        let sp = HilbertSpace::new(1).unwrap();
        let d = sp.dim();
        // Non-unit trace rejected.
        let m = nd::Array2::<C64>::eye(d);
        assert!(DensityMatrix::new(sp, m).is_err());
        // Pure-state projector accepted.
        let rho = PureState::zes(sp).to_density();
        assert!(DensityMatrix::new(sp, rho.matrix().clone()).is_ok());
        // Negative-weight mixture rejected.
        let mut bad = nd::Array2::<C64>::zeros((d, d));
        bad[[0, 0]] = c(1.5, 0.0);
        bad[[1, 1]] = c(-0.5, 0.0);
        assert!(matches!(
            DensityMatrix::new(sp, bad),
            Err(Error::NotDensity(_))
        ));
    }

    proptest! {
        #[test]
        fn expectation_is_linear(x in -1.0..1.0f64, y in -1.0..1.0f64) {
            let sp = HilbertSpace::new(3).unwrap();
            let rho = PureState::coherent(sp, c(0.5, 0.2)).unwrap().to_density();
            let n_op = sp.number();
            let pe = sp.excited_projector();
            let combo = n_op.mapv(|z| z * x) + pe.mapv(|z| z * y);
            let lhs = expectation(&combo.view(), &rho.matrix().view()).unwrap();
            let rhs = rho.expect(&n_op.view()).unwrap() * x + rho.expect(&pe.view()).unwrap() * y;
            prop_assert!((lhs - rhs).norm() < 1e-12);
        }

        #[test]
        fn coherent_norm_is_one(re in -1.0..1.0f64, im in -1.0..1.0f64) {
            let sp = HilbertSpace::new(8).unwrap();
            let psi = PureState::coherent(sp, c(re, im)).unwrap();
            let norm: f64 = psi.amplitudes().iter().map(|z| z.norm_sqr()).sum();
            prop_assert!((norm - 1.0).abs() < 1e-12);
        }
    }
}
