//! Complex Hilbert-space primitives.
//!
//! A [`StateVector`] holds the amplitudes `Z^0..Z^n` of a vector in `C^{n+1}`.
//! Rays are not stored explicitly; every ray-level quantity here
//! ([`ray_distance`], [`projector`]) is invariant under `ψ → λψ`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Absolute tolerance on `|⟨ψ|ψ⟩ - 1|` for a state to count as normalized.
pub const NORM_TOL: f64 = 1e-12;

/// Relative tolerance on `|H_ab - conj(H_ba)|`.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Relative gap below which a decomposition is flagged degenerate.
pub const DEGENERACY_RTOL: f64 = 1e-8;

/// Amplitude vector `Z^α`, `α = 0..n`, in an `(n+1)`-dimensional Hilbert space.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amps: DVector<C64>,
}

impl StateVector {
    /// Wraps raw amplitudes without normalizing them.
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        if amps.len() < 2 {
            return Err(Error::DimensionTooSmall(amps.len()));
        }
        Ok(Self {
            amps: DVector::from_vec(amps),
        })
    }

    /// Wraps and normalizes; the zero vector is rejected.
    pub fn normalized(amps: Vec<C64>) -> Result<Self> {
        Self::new(amps)?.normalize()
    }

    /// Real amplitudes, normalized.
    pub fn from_real(amps: &[f64]) -> Result<Self> {
        Self::normalized(amps.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    /// Computational basis vector `e_k`.
    pub fn basis(dim: usize, k: usize) -> Result<Self> {
        if k >= dim {
            return Err(Error::InvalidParameter(format!(
                "basis index {k} out of range for dimension {dim}"
            )));
        }
        let mut amps = vec![C64::new(0.0, 0.0); dim];
        amps[k] = C64::new(1.0, 0.0);
        Self::new(amps)
    }

    pub(crate) fn from_dvector(amps: DVector<C64>) -> Self {
        debug_assert!(amps.len() >= 2);
        Self { amps }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        self.amps.as_slice()
    }

    pub fn as_dvector(&self) -> &DVector<C64> {
        &self.amps
    }

    pub fn norm_squared(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_squared() - 1.0).abs() <= NORM_TOL
    }

    /// Errors with [`Error::NotNormalized`] unless `|⟨ψ|ψ⟩ - 1| ≤ 1e-12`.
    pub fn require_normalized(&self) -> Result<()> {
        let deviation = (self.norm_squared() - 1.0).abs();
        if deviation > NORM_TOL {
            return Err(Error::NotNormalized { deviation });
        }
        Ok(())
    }

    pub fn normalize(self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::ZeroVector);
        }
        Ok(Self {
            amps: self.amps / C64::new(n, 0.0),
        })
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self {
            amps: &self.amps * factor,
        }
    }

    /// Multiplies by `e^{iφ}`.
    pub fn rephase(&self, phi: f64) -> Self {
        self.scale(C64::from_polar(1.0, phi))
    }

    /// `⟨self|other⟩`, conjugate-linear in `self`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        inner_product(self, other)
    }

    pub(crate) fn inner_unchecked(&self, other: &StateVector) -> C64 {
        self.amps.dotc(&other.amps)
    }

    pub fn add(&self, other: &StateVector) -> Result<Self> {
        check_dims(self.dim(), other.dim())?;
        Ok(Self {
            amps: &self.amps + &other.amps,
        })
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: C64, other: &StateVector, b: C64) -> Result<Self> {
        check_dims(self.dim(), other.dim())?;
        Ok(Self {
            amps: &self.amps * a + &other.amps * b,
        })
    }

    /// Euclidean distance `‖self - other‖` between representatives.
    pub fn distance(&self, other: &StateVector) -> Result<f64> {
        check_dims(self.dim(), other.dim())?;
        Ok((&self.amps - &other.amps).norm())
    }
}

fn check_dims(left: usize, right: usize) -> Result<()> {
    if left != right {
        return Err(Error::DimensionMismatch { left, right });
    }
    Ok(())
}

/// `Σ_α conj(ψ_α) φ^α`.
pub fn inner_product(psi: &StateVector, phi: &StateVector) -> Result<C64> {
    check_dims(psi.dim(), phi.dim())?;
    Ok(psi.inner_unchecked(phi))
}

/// Transition probability `|⟨ψ|φ⟩|² / (‖ψ‖²‖φ‖²)`, clamped to `[0, 1]`.
pub fn fidelity(psi: &StateVector, phi: &StateVector) -> Result<f64> {
    let overlap = inner_product(psi, phi)?;
    let (np, nf) = (psi.norm_squared(), phi.norm_squared());
    if np == 0.0 || nf == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((overlap.norm_sqr() / (np * nf)).clamp(0.0, 1.0))
}

/// Ray distance `δ = 2 arccos(|⟨ψ|φ⟩| / ‖ψ‖‖φ‖)` in `[0, π]`.
pub fn ray_distance(psi: &StateVector, phi: &StateVector) -> Result<f64> {
    let overlap = inner_product(psi, phi)?;
    let (np, nf) = (psi.norm(), phi.norm());
    if np == 0.0 || nf == 0.0 {
        return Err(Error::ZeroVector);
    }
    let c = (overlap.norm() / (np * nf)).clamp(0.0, 1.0);
    if c <= 0.5 {
        return Ok(2.0 * c.acos());
    }
    // arccos loses half its digits near 1. For unit vectors brought in phase,
    // ‖ψ̂ - φ̂‖ = 2 sin(δ/4).
    let p = psi.scale(C64::new(1.0 / np, 0.0));
    let aligned = phi.scale(overlap.conj() / (overlap.norm() * nf));
    let chord = p.distance(&aligned)?;
    Ok(4.0 * (0.5 * chord).clamp(0.0, 1.0).asin())
}

/// Rank-one projector `|ψ⟩⟨ψ|`.
pub fn projector(psi: &StateVector) -> Result<HermitianMatrix> {
    psi.require_normalized()?;
    let v = psi.as_dvector();
    Ok(HermitianMatrix {
        m: v * v.adjoint(),
    })
}

/// Dense Hermitian matrix; symmetrized exactly on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    m: DMatrix<C64>,
}

impl HermitianMatrix {
    /// Accepts `m` if `|m_ab - conj(m_ba)| ≤ 1e-12·max(1, max|m|)`, then
    /// stores `(m + m†)/2`.
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        let n = m.nrows();
        if m.ncols() != n {
            return Err(Error::DimensionMismatch {
                left: n,
                right: m.ncols(),
            });
        }
        if n < 2 {
            return Err(Error::DimensionTooSmall(n));
        }
        let scale = m.iter().map(|z| z.norm()).fold(1.0_f64, f64::max);
        let mut deviation = 0.0_f64;
        for a in 0..n {
            for b in a..n {
                deviation = deviation.max((m[(a, b)] - m[(b, a)].conj()).norm());
            }
        }
        if !deviation.is_finite() || deviation > HERMITIAN_TOL * scale {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(Self::symmetrized(m))
    }

    pub(crate) fn symmetrized(m: DMatrix<C64>) -> Self {
        let h = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        Self { m: h }
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidParameter("matrix rows must be square".into()));
        }
        Self::new(DMatrix::from_fn(n, n, |a, b| rows[a][b]))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        Self::new(DMatrix::from_fn(n, n, |a, b| {
            if a == b {
                C64::new(diag[a], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }))
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        Self::new(DMatrix::zeros(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn get(&self, a: usize, b: usize) -> C64 {
        self.m[(a, b)]
    }

    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        check_dims(self.dim(), psi.dim())?;
        Ok(StateVector::from_dvector(&self.m * psi.as_dvector()))
    }

    /// `⟨ψ|H|ψ⟩` (real part; the imaginary part vanishes for Hermitian `H`).
    pub fn expectation(&self, psi: &StateVector) -> Result<f64> {
        check_dims(self.dim(), psi.dim())?;
        Ok(psi.as_dvector().dotc(&(&self.m * psi.as_dvector())).re)
    }

    pub fn add(&self, other: &HermitianMatrix) -> Result<Self> {
        check_dims(self.dim(), other.dim())?;
        Ok(Self::symmetrized(&self.m + &other.m))
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            m: &self.m * C64::new(factor, 0.0),
        }
    }

    /// `(1-λ)·self + λ·other`.
    pub fn lerp(&self, other: &HermitianMatrix, lambda: f64) -> Result<Self> {
        check_dims(self.dim(), other.dim())?;
        Ok(Self::symmetrized(
            &self.m * C64::new(1.0 - lambda, 0.0) + &other.m * C64::new(lambda, 0.0),
        ))
    }

    /// Frobenius norm of `[self, other]`.
    pub fn commutator_norm(&self, other: &HermitianMatrix) -> Result<f64> {
        check_dims(self.dim(), other.dim())?;
        Ok((&self.m * &other.m - &other.m * &self.m).norm())
    }

    pub fn frobenius_distance(&self, other: &HermitianMatrix) -> Result<f64> {
        check_dims(self.dim(), other.dim())?;
        Ok((&self.m - &other.m).norm())
    }
}

/// Eigenvalues in ascending order with orthonormal eigenvectors.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<StateVector>,
    /// Smallest adjacent eigenvalue difference.
    pub gap: f64,
    /// `gap ≤ 1e-8 · (E_max - E_min)`.
    pub degenerate: bool,
}

impl SpectralData {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn spectral_range(&self) -> f64 {
        self.eigenvalues[self.dim() - 1] - self.eigenvalues[0]
    }

    /// Distance from `E_level` to its nearest neighbour.
    pub fn level_gap(&self, level: usize) -> f64 {
        let e = &self.eigenvalues;
        let below = if level > 0 { e[level] - e[level - 1] } else { f64::INFINITY };
        let above = if level + 1 < e.len() { e[level + 1] - e[level] } else { f64::INFINITY };
        below.min(above)
    }

    /// Whether `level` is separated from its neighbours by more than the
    /// degeneracy threshold.
    pub fn level_is_isolated(&self, level: usize) -> bool {
        self.level_gap(level) > DEGENERACY_RTOL * self.spectral_range()
    }

    pub fn projector(&self, level: usize) -> Result<HermitianMatrix> {
        projector(&self.eigenvectors[level])
    }
}

/// Hermitian eigendecomposition.
///
/// Each eigenvector's largest-magnitude component is made real positive
/// (lowest index wins ties within `1e-12`).
pub fn eigh(h: &HermitianMatrix) -> SpectralData {
    let n = h.dim();
    let decomposition = h.m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| decomposition.eigenvalues[a].total_cmp(&decomposition.eigenvalues[b]));

    let eigenvalues: Vec<f64> = order.iter().map(|&k| decomposition.eigenvalues[k]).collect();
    let eigenvectors = order
        .iter()
        .map(|&k| fix_gauge(StateVector::from_dvector(decomposition.eigenvectors.column(k).into_owned())))
        .collect();
    let gap = eigenvalues
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    let range = eigenvalues[n - 1] - eigenvalues[0];
    SpectralData {
        eigenvalues,
        eigenvectors,
        gap,
        degenerate: gap <= DEGENERACY_RTOL * range,
    }
}

/// Rephases so that the largest-magnitude component is real positive.
pub(crate) fn fix_gauge(v: StateVector) -> StateVector {
    let amps = v.amplitudes();
    let max = amps.iter().map(|z| z.norm()).fold(0.0_f64, f64::max);
    let Some(pivot) = amps.iter().position(|z| z.norm() >= max - 1e-12) else {
        return v;
    };
    let z = amps[pivot];
    if z.norm() == 0.0 {
        return v;
    }
    v.scale(z.conj() / z.norm())
}

/// Unitary matrix, typically `exp(-iHt)`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryMatrix {
    m: DMatrix<C64>,
}

impl UnitaryMatrix {
    pub fn identity(dim: usize) -> Self {
        Self {
            m: DMatrix::identity(dim, dim),
        }
    }

    /// `exp(-i H t)` through the spectral decomposition of `H`.
    pub fn evolution(h: &HermitianMatrix, t: f64) -> Self {
        let spec = eigh(h);
        let n = h.dim();
        let mut m = DMatrix::<C64>::zeros(n, n);
        for (e, v) in spec.eigenvalues.iter().zip(&spec.eigenvectors) {
            let phase = C64::from_polar(1.0, -e * t);
            m += v.as_dvector() * v.as_dvector().adjoint() * phase;
        }
        Self { m }
    }

    /// Diagonal unitary `diag(e^{iφ_k})`.
    pub fn diagonal_phases(phases: &[f64]) -> Self {
        let n = phases.len();
        Self {
            m: DMatrix::from_fn(n, n, |a, b| {
                if a == b {
                    C64::from_polar(1.0, phases[a])
                } else {
                    C64::new(0.0, 0.0)
                }
            }),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn compose(&self, other: &UnitaryMatrix) -> Self {
        Self { m: &self.m * &other.m }
    }

    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        check_dims(self.dim(), psi.dim())?;
        Ok(StateVector::from_dvector(&self.m * psi.as_dvector()))
    }

    /// `‖U†U - 1‖_F`.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.dim();
        (self.m.adjoint() * &self.m - DMatrix::<C64>::identity(n, n)).norm()
    }
}
