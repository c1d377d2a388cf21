//! Parameter-dependent Hamiltonians and their Berry phases.
//!
//! A [`HamiltonianFamily`] maps parameter points to Hermitian matrices. Along a
//! sampled [`ParameterCurve`] the level-`r` eigenvectors form an
//! [`EigenSection`]; aligning consecutive samples (Pancharatnam transport)
//! makes the section horizontal, and for closed curves the leftover mismatch
//! is the Berry phase `Φ_B = -∮𝒜`.
//!
//! The spin-J model `H(X) = -ω₀ J·X` is built in, together with its analytic
//! pole-regular section, for which `𝒜 = m(1 - cos θ) dχ` and `Φ_B = -m Ω`.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::{PI, TAU};
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::hilbert::{eigh, HermitianMatrix, StateVector, UnitaryMatrix, C64};
use crate::pancharatnam::{align_phase, gauge_loop_phase, resolve_winding, Gauge, PhaseResult};
use crate::ray_geometry::ChartPoint;

/// Coordinates `x^1..x^M` on the parameter manifold. For the spin model these
/// are the polar angles `(θ, χ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterPoint(Vec<f64>);

impl ParameterPoint {
    pub fn new(coords: Vec<f64>) -> Self {
        Self(coords)
    }

    pub fn polar(theta: f64, chi: f64) -> Self {
        Self(vec![theta, chi])
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// `(θ, χ)` for two-dimensional points.
    pub fn as_polar(&self) -> Result<(f64, f64)> {
        match self.0.as_slice() {
            &[theta, chi] => Ok((theta, chi)),
            other => Err(Error::InvalidParameter(format!(
                "expected (theta, chi), got {} coordinates",
                other.len()
            ))),
        }
    }
}

/// Unit vector with polar angles `(θ, χ)`.
pub fn unit_vector(theta: f64, chi: f64) -> [f64; 3] {
    let (st, ct) = theta.sin_cos();
    let (sc, cc) = chi.sin_cos();
    [st * cc, st * sc, ct]
}

type Sampler = Arc<dyn Fn(f64) -> ParameterPoint + Send + Sync>;

/// Curve `t ∈ [0, T] ↦ x(t)` with a discretization of `samples` intervals.
#[derive(Clone)]
pub struct ParameterCurve {
    sampler: Sampler,
    period: f64,
    samples: usize,
    closed: bool,
}

impl fmt::Debug for ParameterCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ParameterCurve")
            .field("period", &self.period)
            .field("samples", &self.samples)
            .field("closed", &self.closed)
            .finish()
    }
}

impl ParameterCurve {
    fn build(sampler: Sampler, period: f64, samples: usize, closed: bool) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::InvalidParameter(format!("curve period must be positive (got {period})")));
        }
        if samples < 1 {
            return Err(Error::InvalidParameter("curve needs at least one interval".into()));
        }
        Ok(Self {
            sampler,
            period,
            samples,
            closed,
        })
    }

    /// A closed curve. The discretization reuses the `t = 0` point at `t = T`,
    /// so `points()` closes exactly.
    pub fn closed<F>(sampler: F, period: f64, samples: usize) -> Result<Self>
    where
        F: Fn(f64) -> ParameterPoint + Send + Sync + 'static,
    {
        Self::build(Arc::new(sampler), period, samples, true)
    }

    pub fn open<F>(sampler: F, period: f64, samples: usize) -> Result<Self>
    where
        F: Fn(f64) -> ParameterPoint + Send + Sync + 'static,
    {
        Self::build(Arc::new(sampler), period, samples, false)
    }

    /// Circle of fixed polar angle `θ`, starting at azimuth `χ₀`, traversed
    /// once in the positive sense: `χ(t) = χ₀ + 2πt/T`.
    pub fn latitude(theta: f64, chi0: f64, period: f64, samples: usize) -> Result<Self> {
        Self::closed(
            move |t| ParameterPoint::polar(theta, chi0 + TAU * t / period),
            period,
            samples,
        )
    }

    /// The constant curve at `x`.
    pub fn constant(x: ParameterPoint, period: f64, samples: usize) -> Result<Self> {
        Self::closed(move |_| x.clone(), period, samples)
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn at(&self, t: f64) -> ParameterPoint {
        (self.sampler)(t)
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.samples)
            .map(|i| self.period * i as f64 / self.samples as f64)
            .collect()
    }

    /// `samples + 1` points; for closed curves the last one is the first.
    pub fn points(&self) -> Vec<ParameterPoint> {
        let mut pts: Vec<ParameterPoint> = self.times().into_iter().map(|t| self.at(t)).collect();
        if self.closed {
            pts[self.samples] = pts[0].clone();
        }
        pts
    }

    /// Same curve traversed backwards.
    pub fn reversed(&self) -> Self {
        let inner = self.sampler.clone();
        let period = self.period;
        Self {
            sampler: Arc::new(move |t| inner(period - t)),
            period,
            samples: self.samples,
            closed: self.closed,
        }
    }

    /// Same curve with a different number of intervals.
    pub fn resampled(&self, samples: usize) -> Result<Self> {
        Self::build(self.sampler.clone(), self.period, samples, self.closed)
    }
}

/// Smooth map from parameter points to Hermitian matrices.
pub trait HamiltonianFamily: Send + Sync {
    fn dim(&self) -> usize;

    fn label(&self) -> &str;

    fn evaluate(&self, x: &ParameterPoint) -> Result<HermitianMatrix>;

    /// An analytic smooth section of level `level`, if the model knows one.
    /// Used only to fix the winding of unwrapped phases.
    fn reference_section(&self, _level: usize, _x: &ParameterPoint) -> Option<Result<StateVector>> {
        None
    }
}

/// Spin quantum number `J ∈ {1/2, 1, 3/2, …}`, stored as `2J`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Spin {
    two_j: u32,
}

impl Spin {
    pub fn new(j: f64) -> Result<Self> {
        let two_j = 2.0 * j;
        if !(two_j.is_finite() && two_j >= 1.0 && (two_j - two_j.round()).abs() < 1e-12) {
            return Err(Error::InvalidParameter(format!("spin must be a positive half-integer (got {j})")));
        }
        Ok(Self {
            two_j: two_j.round() as u32,
        })
    }

    pub fn from_twice(two_j: u32) -> Result<Self> {
        if two_j == 0 {
            return Err(Error::InvalidParameter("spin 0 has a one-dimensional Hilbert space".into()));
        }
        Ok(Self { two_j })
    }

    pub fn j(&self) -> f64 {
        self.two_j as f64 / 2.0
    }

    pub fn twice(&self) -> u32 {
        self.two_j
    }

    pub fn dim(&self) -> usize {
        self.two_j as usize + 1
    }

    /// Magnetic quantum number of basis index `k` (`m = J - k`).
    pub fn m_of_index(&self, k: usize) -> f64 {
        self.j() - k as f64
    }

    pub fn levels(&self) -> std::ops::Range<usize> {
        0..self.dim()
    }

    pub fn check_level(&self, level: usize) -> Result<()> {
        if level >= self.dim() {
            return Err(Error::InvalidParameter(format!(
                "level {level} out of range for spin {} (0..={})",
                self.j(),
                self.two_j
            )));
        }
        Ok(())
    }
}

impl fmt::Display for Spin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.two_j.is_multiple_of(2) {
            write!(f, "{}", self.two_j / 2)
        } else {
            write!(f, "{}/2", self.two_j)
        }
    }
}

/// `(J_x, J_y, J_z)` in the basis `|J, m⟩`, `m = J, J-1, …, -J`; they satisfy
/// `[J_x, J_y] = i J_z` and cyclic.
#[derive(Debug, Clone)]
pub struct SpinMatrices {
    pub x: HermitianMatrix,
    pub y: HermitianMatrix,
    pub z: HermitianMatrix,
}

pub fn spin_matrices(spin: Spin) -> SpinMatrices {
    let n = spin.dim();
    let j = spin.j();
    // J+ |m⟩ = sqrt(J(J+1) - m(m+1)) |m+1⟩, and index k - 1 carries m + 1.
    let raise = DMatrix::from_fn(n, n, |a, b| {
        if b == a + 1 {
            let m = spin.m_of_index(b);
            C64::new((j * (j + 1.0) - m * (m + 1.0)).sqrt(), 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let lower = raise.adjoint();
    let x = (&raise + &lower) * C64::new(0.5, 0.0);
    let y = (&raise - &lower) * C64::new(0.0, -0.5);
    let z = DMatrix::from_fn(n, n, |a, b| {
        if a == b {
            C64::new(spin.m_of_index(a), 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    SpinMatrices {
        x: HermitianMatrix::symmetrized(x),
        y: HermitianMatrix::symmetrized(y),
        z: HermitianMatrix::symmetrized(z),
    }
}

impl SpinMatrices {
    /// `J·n` for a real 3-vector `n`.
    pub fn dot(&self, n: [f64; 3]) -> HermitianMatrix {
        let m = self.x.matrix() * C64::new(n[0], 0.0)
            + self.y.matrix() * C64::new(n[1], 0.0)
            + self.z.matrix() * C64::new(n[2], 0.0);
        HermitianMatrix::symmetrized(m)
    }
}

/// `H = -ω₀ J·X` for a unit vector `X`.
pub fn spin_hamiltonian(spin: Spin, omega0: f64, x: [f64; 3]) -> Result<HermitianMatrix> {
    SpinFamily::new(spin, omega0)?.hamiltonian(x)
}

/// The spin-J particle in a field of direction `X(θ, χ)`.
#[derive(Debug, Clone)]
pub struct SpinFamily {
    spin: Spin,
    omega0: f64,
    matrices: SpinMatrices,
    label: String,
}

impl SpinFamily {
    pub fn new(spin: Spin, omega0: f64) -> Result<Self> {
        if !omega0.is_finite() {
            return Err(Error::InvalidParameter(format!("omega0 must be finite (got {omega0})")));
        }
        Ok(Self {
            spin,
            omega0,
            matrices: spin_matrices(spin),
            label: format!("spin-{spin}"),
        })
    }

    pub fn spin(&self) -> Spin {
        self.spin
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    pub fn matrices(&self) -> &SpinMatrices {
        &self.matrices
    }

    pub fn hamiltonian(&self, x: [f64; 3]) -> Result<HermitianMatrix> {
        let norm = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("field direction must be a unit vector (|X| = {norm})")));
        }
        Ok(self.matrices.dot(x).scale(-self.omega0))
    }

    pub fn hamiltonian_polar(&self, theta: f64, chi: f64) -> Result<HermitianMatrix> {
        self.hamiltonian(unit_vector(theta, chi))
    }

    /// `E_r = -ω₀ (J - r)` for `ω₀ > 0`.
    pub fn energy(&self, level: usize) -> f64 {
        -self.omega0.abs() * (self.spin.j() - level as f64)
    }

    /// Eigenvalue of `J·X` carried by level `level` (levels ascend in energy).
    pub fn m_of_level(&self, level: usize) -> f64 {
        let j = self.spin.j();
        if self.omega0 < 0.0 {
            level as f64 - j
        } else {
            j - level as f64
        }
    }

    /// Pole-regular section `e^{imχ} e^{-iχJ_z} e^{-iθJ_y} |m⟩`, defined on
    /// `θ ∈ [0, π)`.
    pub fn section(&self, level: usize, theta: f64, chi: f64) -> Result<StateVector> {
        self.spin.check_level(level)?;
        if !(0.0..PI).contains(&theta) {
            return Err(if theta >= PI {
                Error::SouthPole
            } else {
                Error::InvalidParameter(format!("theta must lie in [0, pi) (got {theta})"))
            });
        }
        let m = self.m_of_level(level);
        let k = (self.spin.j() - m).round() as usize;
        let rot = UnitaryMatrix::evolution(&self.matrices.y, theta);
        let column = rot.matrix().column(k);
        let amps = column
            .iter()
            .enumerate()
            .map(|(idx, z)| z * C64::from_polar(1.0, (m - self.spin.m_of_index(idx)) * chi))
            .collect();
        StateVector::new(amps)
    }
}

impl HamiltonianFamily for SpinFamily {
    fn dim(&self) -> usize {
        self.spin.dim()
    }

    fn label(&self) -> &str {
        &self.label
    }

    fn evaluate(&self, x: &ParameterPoint) -> Result<HermitianMatrix> {
        let (theta, chi) = x.as_polar()?;
        self.hamiltonian_polar(theta, chi)
    }

    fn reference_section(&self, level: usize, x: &ParameterPoint) -> Option<Result<StateVector>> {
        Some(x.as_polar().and_then(|(theta, chi)| self.section(level, theta, chi)))
    }
}

/// Piecewise-linear interpolation through a list of Hermitian matrices,
/// parametrized by `t ∈ [0, N]` (closed) or `[0, N-1]` (open).
#[derive(Debug, Clone)]
pub struct MatrixListFamily {
    matrices: Vec<HermitianMatrix>,
    closed: bool,
}

impl MatrixListFamily {
    pub fn new(matrices: Vec<HermitianMatrix>, closed: bool) -> Result<Self> {
        let first = matrices.first().ok_or(Error::EmptyPath)?;
        if let Some(bad) = matrices.iter().find(|m| m.dim() != first.dim()) {
            return Err(Error::DimensionMismatch {
                left: first.dim(),
                right: bad.dim(),
            });
        }
        Ok(Self { matrices, closed })
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    /// Parameter length of the whole list.
    pub fn span(&self) -> f64 {
        if self.closed {
            self.matrices.len() as f64
        } else {
            (self.matrices.len() - 1) as f64
        }
    }

    /// The curve visiting every matrix once, `refine` samples per segment.
    pub fn curve(&self, refine: usize) -> Result<ParameterCurve> {
        let span = self.span().max(1.0);
        let samples = (span as usize).max(1) * refine.max(1);
        let sampler = move |t: f64| ParameterPoint::new(vec![t]);
        if self.closed {
            ParameterCurve::closed(sampler, span, samples)
        } else {
            ParameterCurve::open(sampler, span, samples)
        }
    }
}

impl HamiltonianFamily for MatrixListFamily {
    fn dim(&self) -> usize {
        self.matrices[0].dim()
    }

    fn label(&self) -> &str {
        "custom-matrix-list"
    }

    fn evaluate(&self, x: &ParameterPoint) -> Result<HermitianMatrix> {
        let &[t] = x.coords() else {
            return Err(Error::InvalidParameter("matrix-list families take one coordinate".into()));
        };
        let n = self.matrices.len();
        if n == 1 {
            return Ok(self.matrices[0].clone());
        }
        let t = if self.closed {
            t.rem_euclid(n as f64)
        } else {
            t.clamp(0.0, (n - 1) as f64)
        };
        let i = (t.floor() as usize).min(if self.closed { n - 1 } else { n - 2 });
        let frac = t - i as f64;
        let next = (i + 1) % n;
        self.matrices[i].lerp(&self.matrices[next], frac)
    }
}

/// Parameters handed to registered family builders.
pub type FamilyParams = BTreeMap<String, String>;

pub type FamilyBuilder = Box<dyn Fn(&FamilyParams) -> Result<Box<dyn HamiltonianFamily>> + Send + Sync>;

/// Hamiltonian families by identifier.
pub struct FamilyRegistry {
    builders: HashMap<String, FamilyBuilder>,
}

impl Default for FamilyRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

fn param_f64(params: &FamilyParams, key: &str, default: Option<f64>) -> Result<f64> {
    match params.get(key) {
        Some(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("{key} = {v:?} is not a number"))),
        None => default.ok_or_else(|| Error::InvalidParameter(format!("missing parameter {key}"))),
    }
}

/// Parses `1/2`, `3/2`, `1`, `1.5`, ….
pub fn parse_spin(text: &str) -> Result<Spin> {
    let text = text.trim();
    let value = match text.split_once('/') {
        Some((num, den)) => {
            let num: f64 = num.trim().parse().map_err(|_| Error::InvalidParameter(format!("bad spin {text:?}")))?;
            let den: f64 = den.trim().parse().map_err(|_| Error::InvalidParameter(format!("bad spin {text:?}")))?;
            num / den
        }
        None => text.parse().map_err(|_| Error::InvalidParameter(format!("bad spin {text:?}")))?,
    };
    Spin::new(value)
}

impl FamilyRegistry {
    pub fn empty() -> Self {
        Self {
            builders: HashMap::new(),
        }
    }

    /// Registry with `spin-J` (parameters `J`, `omega0`).
    pub fn with_builtins() -> Self {
        let mut registry = Self::empty();
        registry.register(
            "spin-J",
            Box::new(|params| {
                let spin = parse_spin(params.get("J").map(String::as_str).unwrap_or("1/2"))?;
                let omega0 = param_f64(params, "omega0", Some(1.0))?;
                Ok(Box::new(SpinFamily::new(spin, omega0)?) as Box<dyn HamiltonianFamily>)
            }),
        );
        registry
    }

    pub fn register(&mut self, id: &str, builder: FamilyBuilder) {
        self.builders.insert(id.to_string(), builder);
    }

    pub fn identifiers(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = self.builders.keys().map(String::as_str).collect();
        ids.sort_unstable();
        ids
    }

    pub fn build(&self, id: &str, params: &FamilyParams) -> Result<Box<dyn HamiltonianFamily>> {
        let builder = self
            .builders
            .get(id)
            .ok_or_else(|| Error::UnknownModel(id.to_string()))?;
        builder(params)
    }
}

/// Stereographic chart coordinate `w = tan(θ/2) e^{iχ}`.
pub fn stereographic(theta: f64, chi: f64) -> Result<ChartPoint> {
    if theta >= PI {
        return Err(Error::SouthPole);
    }
    if theta.is_nan() || theta < 0.0 {
        return Err(Error::InvalidParameter(format!("theta must lie in [0, pi) (got {theta})")));
    }
    Ok(ChartPoint::new(vec![C64::from_polar((0.5 * theta).tan(), chi)], 0))
}

/// Level-`r` eigenvectors along a sampled curve.
#[derive(Debug, Clone)]
pub struct EigenSection {
    pub level: usize,
    pub states: Vec<StateVector>,
    pub energies: Vec<f64>,
    pub closed: bool,
    /// Whether consecutive states have been brought in phase.
    pub smoothed: bool,
}

impl EigenSection {
    /// Smooths arbitrary-phase eigenvectors by sequential alignment.
    pub fn from_states(level: usize, states: Vec<StateVector>, energies: Vec<f64>, closed: bool) -> Result<Self> {
        let mut smoothed = Vec::with_capacity(states.len());
        for (i, s) in states.into_iter().enumerate() {
            let next = match smoothed.last() {
                None => s,
                Some(prev) => align_phase(prev, &s).map_err(|e| match e {
                    Error::NotComparable { overlap, .. } => Error::NotComparable {
                        overlap,
                        link: Some(i - 1),
                    },
                    other => other,
                })?,
            };
            smoothed.push(next);
        }
        Ok(Self {
            level,
            states: smoothed,
            energies,
            closed,
            smoothed: true,
        })
    }

    /// Phase mismatch of a smoothed closed section, in `(-π, π]`.
    pub fn end_mismatch(&self) -> f64 {
        let first = &self.states[0];
        let last = &self.states[self.states.len() - 1];
        first.inner_unchecked(last).arg()
    }
}

/// Diagonalizes along the curve and rejects level crossings.
fn raw_eigenvectors(
    fam: &dyn HamiltonianFamily,
    level: usize,
    points: &[ParameterPoint],
) -> Result<(Vec<StateVector>, Vec<f64>)> {
    if level >= fam.dim() {
        return Err(Error::InvalidParameter(format!(
            "level {level} out of range for dimension {}",
            fam.dim()
        )));
    }
    let mut states = Vec::with_capacity(points.len());
    let mut energies = Vec::with_capacity(points.len());
    for (sample, x) in points.iter().enumerate() {
        let spec = eigh(&fam.evaluate(x)?);
        if !spec.level_is_isolated(level) {
            return Err(Error::LevelCrossing {
                level,
                sample,
                gap: spec.level_gap(level),
            });
        }
        energies.push(spec.eigenvalues[level]);
        states.push(spec.eigenvectors[level].clone());
    }
    Ok((states, energies))
}

/// Per-sample `eigh` followed by gauge smoothing `v_{i+1} ← align(v_i, v_{i+1})`.
pub fn eigen_section(fam: &dyn HamiltonianFamily, level: usize, curve: &ParameterCurve) -> Result<EigenSection> {
    let points = curve.points();
    let (states, energies) = raw_eigenvectors(fam, level, &points)?;
    EigenSection::from_states(level, states, energies, curve.is_closed())
}

/// Eigenvectors rephased onto the family's analytic section (unsmoothed).
pub fn eigen_section_in_reference_gauge(
    fam: &dyn HamiltonianFamily,
    level: usize,
    curve: &ParameterCurve,
) -> Result<EigenSection> {
    let points = curve.points();
    let (states, energies) = raw_eigenvectors(fam, level, &points)?;
    let reference = reference_states(fam, level, &points)?
        .ok_or_else(|| Error::InvalidParameter(format!("family {} has no reference section", fam.label())))?;
    let states = states
        .iter()
        .zip(&reference)
        .map(|(v, r)| align_phase(r, v))
        .collect::<Result<Vec<_>>>()?;
    Ok(EigenSection {
        level,
        states,
        energies,
        closed: curve.is_closed(),
        smoothed: false,
    })
}

fn reference_states(
    fam: &dyn HamiltonianFamily,
    level: usize,
    points: &[ParameterPoint],
) -> Result<Option<Vec<StateVector>>> {
    let mut out = Vec::with_capacity(points.len());
    for x in points {
        match fam.reference_section(level, x) {
            None => return Ok(None),
            Some(s) => out.push(s?),
        }
    }
    Ok(Some(out))
}

/// Link values `Im⟨v_i|v_{i+1} - v_i⟩ ≈ 𝒜_μ dx^μ`.
pub fn berry_connection(sec: &EigenSection) -> Vec<f64> {
    sec.states
        .windows(2)
        .map(|w| w[0].inner_unchecked(&w[1]).im)
        .collect()
}

/// Berry phase of a smoothed closed section. The winding comes from `gauge`.
pub fn berry_phase_of_section(sec: &EigenSection, gauge: Gauge<'_>) -> Result<PhaseResult> {
    if !sec.closed {
        return Err(Error::NotClosed { distance: f64::NAN });
    }
    let sec = if sec.smoothed {
        sec.clone()
    } else {
        EigenSection::from_states(sec.level, sec.states.clone(), sec.energies.clone(), true)?
    };
    let principal = sec.end_mismatch();
    let reference = gauge_loop_phase(&sec.states, gauge)?;
    Ok(PhaseResult::geometric(resolve_winding(principal, reference)))
}

/// `Φ_B = arg⟨v_0|v_last⟩` of the smoothed section around a closed curve.
///
/// The unwrapped value uses the family's analytic section when it has one and
/// the [`Gauge::Auto`] chart otherwise.
pub fn berry_phase(fam: &dyn HamiltonianFamily, level: usize, curve: &ParameterCurve) -> Result<PhaseResult> {
    if !curve.is_closed() {
        return Err(Error::NotClosed { distance: f64::NAN });
    }
    let sec = eigen_section(fam, level, curve)?;
    let points = curve.points();
    match reference_states(fam, level, &points)? {
        Some(reference) => berry_phase_of_section(&sec, Gauge::Section(&reference)),
        None => berry_phase_of_section(&sec, Gauge::Auto),
    }
}

fn level_state(fam: &dyn HamiltonianFamily, level: usize, x: &ParameterPoint, corner: usize) -> Result<StateVector> {
    let spec = eigh(&fam.evaluate(x)?);
    if !spec.level_is_isolated(level) {
        return Err(Error::LevelCrossing {
            level,
            sample: corner,
            gap: spec.level_gap(level),
        });
    }
    Ok(spec.eigenvectors[level].clone())
}

/// `arg(⟨v1|v4⟩⟨v4|v3⟩⟨v3|v2⟩⟨v2|v1⟩)` for four corners in order.
fn loop_phase4(v: [&StateVector; 4]) -> f64 {
    let product = v[1].inner_unchecked(v[0])
        * v[2].inner_unchecked(v[1])
        * v[3].inner_unchecked(v[2])
        * v[0].inner_unchecked(v[3]);
    product.arg()
}

/// Berry phase around the `h_θ × h_χ` plaquette centred at `x`, traversed
/// `(+θ, +χ, -θ, -χ)`.
pub fn plaquette_phase(
    fam: &dyn HamiltonianFamily,
    level: usize,
    x: &ParameterPoint,
    h_theta: f64,
    h_chi: f64,
) -> Result<f64> {
    if x.dim() != 2 {
        return Err(Error::InvalidParameter(format!(
            "plaquettes need a 2-dimensional parameter space (got {})",
            x.dim()
        )));
    }
    let (a, b) = (x.coords()[0], x.coords()[1]);
    let (da, db) = (0.5 * h_theta, 0.5 * h_chi);
    let corners = [
        ParameterPoint::new(vec![a - da, b - db]),
        ParameterPoint::new(vec![a + da, b - db]),
        ParameterPoint::new(vec![a + da, b + db]),
        ParameterPoint::new(vec![a - da, b + db]),
    ];
    let v = corners
        .iter()
        .enumerate()
        .map(|(i, c)| level_state(fam, level, c, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(loop_phase4([&v[0], &v[1], &v[2], &v[3]]))
}

/// Curvature `ℱ_{12}(x)` from the plaquette holonomy: `-Φ_plaquette / h²`.
pub fn berry_curvature(fam: &dyn HamiltonianFamily, level: usize, x: &ParameterPoint, h: f64) -> Result<f64> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidParameter(format!("plaquette size must be positive (got {h})")));
    }
    Ok(-plaquette_phase(fam, level, x, h, h)? / (h * h))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureCell {
    pub theta: f64,
    pub chi: f64,
    /// `ℱ_{θχ}` at the cell centre.
    pub curvature: f64,
    pub area: f64,
}

/// Curvature on a `(θ, χ)` tiling of the whole sphere.
#[derive(Debug, Clone)]
pub struct CurvatureGrid {
    pub n_theta: usize,
    pub n_chi: usize,
    pub cells: Vec<CurvatureCell>,
}

impl CurvatureGrid {
    /// `Σ ℱ·area`, equal to minus the summed plaquette phases.
    pub fn total_flux(&self) -> f64 {
        self.cells.iter().map(|c| c.curvature * c.area).sum()
    }

    pub fn max_error<F: Fn(f64, f64) -> f64>(&self, exact: F) -> f64 {
        self.cells
            .iter()
            .map(|c| (c.curvature - exact(c.theta, c.chi)).abs())
            .fold(0.0, f64::max)
    }
}

/// Tiles `θ ∈ [0, π]`, `χ ∈ [0, 2π)` into `n_theta × n_chi` plaquettes,
/// diagonalizing once per grid vertex.
pub fn curvature_grid(fam: &dyn HamiltonianFamily, level: usize, n_theta: usize, n_chi: usize) -> Result<CurvatureGrid> {
    if n_theta == 0 || n_chi < 2 {
        return Err(Error::InvalidParameter("curvature grid needs n_theta >= 1 and n_chi >= 2".into()));
    }
    let (h_theta, h_chi) = (PI / n_theta as f64, TAU / n_chi as f64);
    let mut vertices = Vec::with_capacity((n_theta + 1) * n_chi);
    for i in 0..=n_theta {
        for j in 0..n_chi {
            let x = ParameterPoint::polar(i as f64 * h_theta, j as f64 * h_chi);
            vertices.push(level_state(fam, level, &x, i * n_chi + j)?);
        }
    }
    let at = |i: usize, j: usize| &vertices[i * n_chi + (j % n_chi)];
    let mut cells = Vec::with_capacity(n_theta * n_chi);
    for i in 0..n_theta {
        for j in 0..n_chi {
            let phase = loop_phase4([at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)]);
            let area = h_theta * h_chi;
            cells.push(CurvatureCell {
                theta: (i as f64 + 0.5) * h_theta,
                chi: (j as f64 + 0.5) * h_chi,
                curvature: -phase / area,
                area,
            });
        }
    }
    Ok(CurvatureGrid { n_theta, n_chi, cells })
}

/// Grid with plaquette side `h` in both directions (rounded to tile the sphere).
pub fn curvature_grid_with_step(fam: &dyn HamiltonianFamily, level: usize, h: f64) -> Result<CurvatureGrid> {
    if !(h.is_finite() && h > 0.0 && h <= PI) {
        return Err(Error::InvalidParameter(format!("plaquette size must lie in (0, pi] (got {h})")));
    }
    let n_theta = (PI / h).round().max(1.0) as usize;
    let n_chi = (TAU / h).round().max(2.0) as usize;
    curvature_grid(fam, level, n_theta, n_chi)
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Signed area of the spherical triangle `(a, b, c)` (Van Oosterom-Strackee).
fn signed_triangle_area(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    let numerator = dot(a, cross(b, c));
    let denominator = 1.0 + dot(a, b) + dot(b, c) + dot(c, a);
    2.0 * numerator.atan2(denominator)
}

/// Whether `x` lies on the short arc `(p, q)` with normal `n = p × q`,
/// endpoints included.
fn on_arc(p: [f64; 3], q: [f64; 3], n: [f64; 3], x: [f64; 3]) -> bool {
    const EPS: f64 = 1e-15;
    dot(cross(p, x), n) >= -EPS && dot(cross(x, q), n) >= -EPS
}

fn arcs_cross(p1: [f64; 3], p2: [f64; 3], q1: [f64; 3], q2: [f64; 3]) -> bool {
    let n1 = cross(p1, p2);
    let n2 = cross(q1, q2);
    let d = cross(n1, n2);
    let len = dot(d, d).sqrt();
    if len < 1e-300 {
        return false;
    }
    let d = [d[0] / len, d[1] / len, d[2] / len];
    let md = [-d[0], -d[1], -d[2]];
    (on_arc(p1, p2, n1, d) && on_arc(q1, q2, n2, d)) || (on_arc(p1, p2, n1, md) && on_arc(q1, q2, n2, md))
}

/// Finds a pair of non-adjacent crossing arcs, bucketing arcs by midpoint.
fn find_self_intersection(points: &[[f64; 3]], closed: bool) -> Option<(usize, usize)> {
    let arcs: Vec<(usize, [f64; 3], [f64; 3])> = points
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0] != w[1])
        .map(|(i, w)| (i, w[0], w[1]))
        .collect();
    let n_arcs = points.len().saturating_sub(1);
    let cell = arcs
        .iter()
        .map(|(_, a, b)| {
            let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
            dot(d, d).sqrt()
        })
        .fold(0.0_f64, f64::max);
    if cell == 0.0 {
        return None;
    }
    let key = |p: [f64; 3]| -> (i64, i64, i64) {
        (
            (p[0] / cell).floor() as i64,
            (p[1] / cell).floor() as i64,
            (p[2] / cell).floor() as i64,
        )
    };
    let mut buckets: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
    for (slot, (_, a, b)) in arcs.iter().enumerate() {
        let mid = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0, (a[2] + b[2]) / 2.0];
        buckets.entry(key(mid)).or_default().push(slot);
    }
    let adjacent = |i: usize, j: usize| {
        let (i, j) = (i.min(j), i.max(j));
        j == i + 1 || (closed && i == 0 && j + 1 == n_arcs)
    };
    for (slot, (i, a, b)) in arcs.iter().enumerate() {
        let mid = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0, (a[2] + b[2]) / 2.0];
        let (kx, ky, kz) = key(mid);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(bucket) = buckets.get(&(kx + dx, ky + dy, kz + dz)) else {
                        continue;
                    };
                    for &other in bucket {
                        if other <= slot {
                            continue;
                        }
                        let (j, c, d) = arcs[other];
                        if *i == j || adjacent(*i, j) {
                            continue;
                        }
                        if arcs_cross(*a, *b, c, d) {
                            return Some((*i, j));
                        }
                    }
                }
            }
        }
    }
    None
}

/// Signed solid angle subtended at the origin by a closed curve on `S²`:
/// the sum of signed spherical triangles `(north pole, P_i, P_{i+1})`.
pub fn solid_angle(curve: &ParameterCurve) -> Result<f64> {
    if !curve.is_closed() {
        return Err(Error::NotClosed { distance: f64::NAN });
    }
    let points = curve
        .points()
        .iter()
        .map(|p| p.as_polar().map(|(t, c)| unit_vector(t, c)))
        .collect::<Result<Vec<_>>>()?;
    if let Some((first, second)) = find_self_intersection(&points, true) {
        return Err(Error::SelfIntersecting { first, second });
    }
    let north = [0.0, 0.0, 1.0];
    Ok(points
        .windows(2)
        .map(|w| signed_triangle_area(north, w[0], w[1]))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ray_geometry::to_chart;

    fn half() -> Spin {
        Spin::new(0.5).unwrap()
    }

    #[test]
    fn spin_matrices_satisfy_commutation_relations() {
        for two_j in 1..=4 {
            let s = spin_matrices(Spin::from_twice(two_j).unwrap());
            let (x, y, z) = (s.x.matrix(), s.y.matrix(), s.z.matrix());
            let i = C64::new(0.0, 1.0);
            assert!((x * y - y * x - z * i).norm() < 1e-13);
            assert!((y * z - z * y - x * i).norm() < 1e-13);
            assert!((z * x - x * z - y * i).norm() < 1e-13);
            // J² = J(J+1)
            let j = two_j as f64 / 2.0;
            let casimir = x * x + y * y + z * z;
            let n = two_j as usize + 1;
            assert!((casimir - DMatrix::<C64>::identity(n, n) * C64::new(j * (j + 1.0), 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn spin_half_hamiltonian_along_z() {
        let h = spin_hamiltonian(half(), 1.0, [0.0, 0.0, 1.0]).unwrap();
        assert_eq!(h.get(0, 0), C64::new(-0.5, 0.0));
        assert_eq!(h.get(1, 1), C64::new(0.5, 0.0));
        let spec = eigh(&h);
        assert_eq!(spec.eigenvalues, vec![-0.5, 0.5]);
    }

    #[test]
    fn spin_hamiltonian_rejects_non_unit_direction() {
        assert!(matches!(
            spin_hamiltonian(half(), 1.0, [0.0, 0.0, 1.1]),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn spin_j_spectrum_is_direction_independent() {
        for two_j in 1..=4 {
            let spin = Spin::from_twice(two_j).unwrap();
            let fam = SpinFamily::new(spin, 1.3).unwrap();
            for (theta, chi) in [(0.0, 0.0), (0.4, 2.0), (1.9, -0.7), (3.0, 5.5)] {
                let spec = eigh(&fam.hamiltonian_polar(theta, chi).unwrap());
                for r in spin.levels() {
                    let expected = -1.3 * (spin.j() - r as f64);
                    assert!((spec.eigenvalues[r] - expected).abs() < 1e-12);
                    assert!((fam.energy(r) - expected).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn spin_parsing() {
        assert_eq!(parse_spin("3/2").unwrap().twice(), 3);
        assert_eq!(parse_spin("1").unwrap().twice(), 2);
        assert_eq!(parse_spin("0.5").unwrap().twice(), 1);
        assert!(parse_spin("0.3").is_err());
        assert!(parse_spin("0").is_err());
        assert_eq!(Spin::new(1.5).unwrap().to_string(), "3/2");
    }

    #[test]
    fn stereographic_examples() {
        assert_eq!(stereographic(0.0, 1.0).unwrap().coords()[0].norm(), 0.0);
        let w = stereographic(PI / 2.0, 0.0).unwrap().coords()[0];
        assert!((w - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert_eq!(stereographic(PI, 0.0), Err(Error::SouthPole));
    }

    #[test]
    fn spin_half_ground_state_matches_stereographic_chart() {
        let fam = SpinFamily::new(half(), 1.0).unwrap();
        for (theta, chi) in [(0.3, 0.1), (1.2, 2.5), (2.8, -1.0)] {
            let v = &eigh(&fam.hamiltonian_polar(theta, chi).unwrap()).eigenvectors[0];
            let w = to_chart(v, 0).unwrap().coords()[0];
            let expected = stereographic(theta, chi).unwrap().coords()[0];
            assert!((w - expected).norm() < 1e-10);
        }
    }

    #[test]
    fn reference_section_is_an_eigenvector() {
        for two_j in 1..=3 {
            let spin = Spin::from_twice(two_j).unwrap();
            for omega0 in [1.0, -0.7] {
                let fam = SpinFamily::new(spin, omega0).unwrap();
                let (theta, chi) = (1.1, 0.8);
                let h = fam.hamiltonian_polar(theta, chi).unwrap();
                let spec = eigh(&h);
                for r in spin.levels() {
                    let s = fam.section(r, theta, chi).unwrap();
                    let hs = h.apply(&s).unwrap();
                    let es = s.scale(C64::new(spec.eigenvalues[r], 0.0));
                    assert!(hs.distance(&es).unwrap() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn spin_half_reference_section_is_the_chart_section() {
        // (1, w)/sqrt(1 + |w|²) with w = tan(θ/2) e^{iχ}.
        let fam = SpinFamily::new(half(), 1.0).unwrap();
        let (theta, chi) = (0.9, 2.2);
        let s = fam.section(0, theta, chi).unwrap();
        let w = stereographic(theta, chi).unwrap().to_state().unwrap();
        assert!(s.distance(&w).unwrap() < 1e-14);
        assert_eq!(fam.section(0, PI, 0.0), Err(Error::SouthPole));
    }

    #[test]
    fn constant_curve_gives_constant_section() {
        let fam = SpinFamily::new(half(), 1.0).unwrap();
        let curve = ParameterCurve::constant(ParameterPoint::polar(0.7, 0.2), 1.0, 10).unwrap();
        let sec = eigen_section(&fam, 0, &curve).unwrap();
        for s in &sec.states {
            assert!(s.distance(&sec.states[0]).unwrap() < 1e-15);
        }
        assert_eq!(berry_phase(&fam, 0, &curve).unwrap().geometric, 0.0);
    }

    #[test]
    fn smoothed_links_vanish() {
        let fam = SpinFamily::new(Spin::new(1.0).unwrap(), 1.0).unwrap();
        let curve = ParameterCurve::latitude(1.0, 0.0, 1.0, 400).unwrap();
        let sec = eigen_section(&fam, 0, &curve).unwrap();
        assert!(berry_connection(&sec).iter().all(|a| a.abs() < 1e-12));
        for w in sec.states.windows(2) {
            let o = w[0].inner(&w[1]).unwrap();
            assert!(o.im.abs() < 1e-12 && o.re > 0.0);
        }
    }

    #[test]
    fn chart_gauge_links_integrate_to_monopole_potential() {
        let fam = SpinFamily::new(half(), 1.0).unwrap();
        let theta = 1.0;
        let curve = ParameterCurve::latitude(theta, 0.0, 1.0, 4000).unwrap();
        let sec = eigen_section_in_reference_gauge(&fam, 0, &curve).unwrap();
        let integral: f64 = berry_connection(&sec).iter().sum();
        let expected = 0.5 * (1.0 - theta.cos()) * TAU;
        assert!((integral - expected).abs() < 1e-5);

        let rev = eigen_section_in_reference_gauge(&fam, 0, &curve.reversed()).unwrap();
        let forward = berry_connection(&sec);
        let backward = berry_connection(&rev);
        for (a, b) in forward.iter().zip(backward.iter().rev()) {
            assert!((a + b).abs() < 1e-12);
        }
    }

    #[test]
    fn berry_phase_spin_half_latitudes() {
        let fam = SpinFamily::new(half(), 1.0).unwrap();
        for theta in [0.3, PI / 2.0, 2.5] {
            let curve = ParameterCurve::latitude(theta, 0.0, 1.0, 2000).unwrap();
            let phase = berry_phase(&fam, 0, &curve).unwrap();
            assert!((phase.geometric + PI * (1.0 - theta.cos())).abs() < 1e-5);
            let upper = berry_phase(&fam, 1, &curve).unwrap();
            assert!((upper.geometric - PI * (1.0 - theta.cos())).abs() < 1e-5);
        }
    }

    #[test]
    fn integer_spin_middle_level_has_no_phase() {
        let fam = SpinFamily::new(Spin::new(1.0).unwrap(), 1.0).unwrap();
        let curve = ParameterCurve::latitude(PI / 2.0, 0.0, 1.0, 500).unwrap();
        assert!(berry_phase(&fam, 1, &curve).unwrap().geometric.abs() < 1e-12);
    }

    #[test]
    fn level_crossing_is_reported() {
        let zero = HermitianMatrix::zeros(2).unwrap();
        let fam = MatrixListFamily::new(vec![zero.clone(), zero], true).unwrap();
        let curve = fam.curve(4).unwrap();
        assert!(matches!(
            eigen_section(&fam, 0, &curve),
            Err(Error::LevelCrossing { sample: 0, .. })
        ));
    }

    #[test]
    fn spin_half_gap_stays_open_near_the_pole() {
        let fam = SpinFamily::new(half(), 1.0).unwrap();
        let curve = ParameterCurve::latitude(1e-6, 0.0, 1.0, 100).unwrap();
        let sec = eigen_section(&fam, 0, &curve).unwrap();
        assert!(sec.energies.iter().all(|e| (e + 0.5).abs() < 1e-12));
    }

    #[test]
    fn curvature_of_spin_half_ground_level() {
        let fam = SpinFamily::new(half(), 1.0).unwrap();
        for theta in [0.4, 1.3, 2.2] {
            let f = berry_curvature(&fam, 0, &ParameterPoint::polar(theta, 0.5), 1e-3).unwrap();
            assert!((f - 0.5 * theta.sin()).abs() < 1e-6);
        }
        let degenerate = MatrixListFamily::new(vec![HermitianMatrix::zeros(2).unwrap()], true).unwrap();
        assert!(berry_curvature(&degenerate, 0, &ParameterPoint::new(vec![0.0, 0.0]), 0.1).is_err());
    }

    #[test]
    fn solid_angle_examples() {
        let equator = ParameterCurve::latitude(PI / 2.0, 0.0, 1.0, 1000).unwrap();
        assert!((solid_angle(&equator).unwrap() - TAU).abs() < 1e-12);
        // Sampled latitudes are geodesic polygons; the area error is O(1/N²).
        for theta in [0.2, 1.0, 2.0, 3.0] {
            let curve = ParameterCurve::latitude(theta, 0.3, 1.0, 1000).unwrap();
            assert!((solid_angle(&curve).unwrap() - TAU * (1.0 - theta.cos())).abs() < 1e-4);
        }
        let point = ParameterCurve::constant(ParameterPoint::polar(1.0, 1.0), 1.0, 10).unwrap();
        assert_eq!(solid_angle(&point).unwrap(), 0.0);
    }

    #[test]
    fn solid_angle_of_reversed_curve_flips_sign() {
        let curve = ParameterCurve::latitude(0.8, 0.0, 1.0, 300).unwrap();
        let forward = solid_angle(&curve).unwrap();
        let backward = solid_angle(&curve.reversed()).unwrap();
        assert!((forward + backward).abs() < 1e-12);
    }

    #[test]
    fn solid_angle_rejects_figure_eight() {
        // Lissajous figure eight around (θ, χ) = (π/2, 0).
        let curve = ParameterCurve::closed(
            |t| ParameterPoint::polar(PI / 2.0 + 0.4 * (2.0 * TAU * t).sin(), 0.6 * (TAU * t).sin()),
            1.0,
            800,
        )
        .unwrap();
        assert!(matches!(solid_angle(&curve), Err(Error::SelfIntersecting { .. })));
    }

    #[test]
    fn solid_angle_of_offset_circle() {
        // Small circle of angular radius a around the point (θ, χ) = (π/2, 0):
        // area 2π(1 - cos a), not containing the pole.
        let a: f64 = 0.3;
        let curve = ParameterCurve::closed(
            move |t| {
                let phi = TAU * t;
                // Circle around +x, traversed counterclockwise seen from outside.
                let v = [a.cos(), a.sin() * phi.cos(), a.sin() * phi.sin()];
                ParameterPoint::polar(v[2].acos(), v[1].atan2(v[0]))
            },
            1.0,
            2000,
        )
        .unwrap();
        let omega = solid_angle(&curve).unwrap();
        assert!((omega.abs() - TAU * (1.0 - a.cos())).abs() < 1e-5);
    }

    #[test]
    fn matrix_list_interpolates() {
        let a = HermitianMatrix::from_real_diagonal(&[-1.0, 1.0]).unwrap();
        let b = HermitianMatrix::from_real_diagonal(&[1.0, -1.0]).unwrap();
        let fam = MatrixListFamily::new(vec![a.clone(), b], true).unwrap();
        let mid = fam.evaluate(&ParameterPoint::new(vec![0.5])).unwrap();
        assert!(mid.frobenius_distance(&HermitianMatrix::zeros(2).unwrap()).unwrap() < 1e-15);
        let wrapped = fam.evaluate(&ParameterPoint::new(vec![2.0])).unwrap();
        assert_eq!(wrapped, a);
    }

    #[test]
    fn registry_builds_spin_family() {
        let registry = FamilyRegistry::with_builtins();
        let mut params = FamilyParams::new();
        params.insert("J".into(), "3/2".into());
        let fam = registry.build("spin-J", &params).unwrap();
        assert_eq!(fam.dim(), 4);
        assert!(matches!(registry.build("nope", &params), Err(Error::UnknownModel(_))));
    }
}
