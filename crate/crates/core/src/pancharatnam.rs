//! The Pancharatnam connection on the bundle of normalized states over rays.
//!
//! Two non-orthogonal states are "in phase" when their overlap is real
//! positive. Repeating that alignment along a path of rays is discrete
//! parallel transport; the phase mismatch after a closed loop is the holonomy
//! `e^{iΦ[C]} = e^{-i∮A}`.
//!
//! Phases modulo `2π` come from gauge-invariant overlap products. The unwrapped
//! value additionally needs a reference gauge (see [`Gauge`]); it is the
//! accumulated per-link phase of the gauge-fixed representatives, which is the
//! discrete form of `Φ̇ + A = 0` for `Z^c = |Z^c| e^{iΦ}`.

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::hilbert::{ray_distance, StateVector, C64};
use crate::ray_geometry::ChartPoint;

/// Overlaps at or below this modulus are treated as orthogonal.
pub const ORTHOGONAL_TOL: f64 = 1e-10;

/// Maximum first/last ray distance for a path to count as closed.
pub const CLOSURE_TOL: f64 = 1e-9;

/// Chart coordinates below `CHART_TOL·‖ψ‖` make a chart unavailable.
pub const CHART_TOL: f64 = 1e-10;

/// Reduces an angle into `(-π, π]`.
pub fn wrap_phase(x: f64) -> f64 {
    let y = x.rem_euclid(TAU);
    if y > PI {
        y - TAU
    } else {
        y
    }
}

/// Picks `principal + 2πk` closest to `reference`.
pub fn resolve_winding(principal: f64, reference: f64) -> f64 {
    principal + TAU * ((reference - principal) / TAU).round()
}

/// Geometric phase with optional dynamical and total parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseResult {
    /// Unwrapped value in radians.
    pub geometric: f64,
    /// `geometric` reduced into `(-π, π]`.
    pub geometric_principal: f64,
    pub dynamical: Option<f64>,
    /// `dynamical + geometric` when the dynamical part is known.
    pub total: Option<f64>,
}

impl PhaseResult {
    pub fn geometric(unwrapped: f64) -> Self {
        Self {
            geometric: unwrapped,
            geometric_principal: wrap_phase(unwrapped),
            dynamical: None,
            total: None,
        }
    }

    pub fn with_dynamical(mut self, dynamical: f64) -> Self {
        self.dynamical = Some(dynamical);
        self.total = Some(dynamical + self.geometric);
        self
    }

    /// Difference of principal values, reduced into `(-π, π]`.
    pub fn principal_difference(&self, other: f64) -> f64 {
        wrap_phase(self.geometric_principal - other)
    }
}

/// Reference phase convention for unwrapping holonomies.
#[derive(Debug, Clone, Copy)]
pub enum Gauge<'a> {
    /// Chart 0 when `|Z^0|` stays above the chart threshold along the whole
    /// path, otherwise the chart whose smallest `|Z^c|` is largest. When no
    /// chart covers the path the loop phase is taken as the principal value.
    Auto,
    /// Representatives with `Z^c` real positive.
    Chart(usize),
    /// Representatives in phase with the given section, one per state.
    Section(&'a [StateVector]),
}

/// Chart selected by [`Gauge::Auto`] for a list of states.
pub fn auto_chart(states: &[StateVector]) -> Result<usize> {
    let first = states.first().ok_or(Error::EmptyPath)?;
    let dim = first.dim();
    let min_ratio = |c: usize| {
        states
            .iter()
            .map(|s| s.amplitudes()[c].norm() / s.norm())
            .fold(f64::INFINITY, f64::min)
    };
    let ratios: Vec<f64> = (0..dim).map(min_ratio).collect();
    if ratios[0] > CHART_TOL {
        return Ok(0);
    }
    let (best, &ratio) = ratios
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("dimension is at least 2");
    if ratio <= CHART_TOL {
        return Err(Error::ChartUnavailable {
            chart: best,
            magnitude: ratio,
        });
    }
    Ok(best)
}

/// Rephases every state into the given gauge.
pub fn gauge_fix(states: &[StateVector], gauge: Gauge<'_>) -> Result<Vec<StateVector>> {
    match gauge {
        Gauge::Auto => gauge_fix(states, Gauge::Chart(auto_chart(states)?)),
        Gauge::Chart(c) => states
            .iter()
            .map(|s| {
                let z = *s.amplitudes().get(c).ok_or_else(|| {
                    Error::InvalidParameter(format!("chart {c} out of range for dimension {}", s.dim()))
                })?;
                if z.norm() <= CHART_TOL * s.norm() {
                    return Err(Error::ChartUnavailable {
                        chart: c,
                        magnitude: z.norm(),
                    });
                }
                Ok(s.scale(z.conj() / z.norm()))
            })
            .collect(),
        Gauge::Section(section) => {
            if section.len() != states.len() {
                return Err(Error::DimensionMismatch {
                    left: states.len(),
                    right: section.len(),
                });
            }
            states
                .iter()
                .zip(section)
                .enumerate()
                .map(|(i, (s, r))| {
                    let o = s.inner(r)?;
                    if o.norm() <= ORTHOGONAL_TOL * s.norm() * r.norm() {
                        return Err(Error::NotComparable {
                            overlap: o.norm(),
                            link: Some(i),
                        });
                    }
                    Ok(s.scale(o / o.norm()))
                })
                .collect()
        }
    }
}

/// `Σ_i arg⟨ψ_{i+1}|ψ_i⟩` with each term in `(-π, π]`.
fn link_phase_sum(reps: &[StateVector]) -> f64 {
    reps.windows(2)
        .map(|w| w[1].inner_unchecked(&w[0]).arg())
        .sum()
}

/// Unwrapped loop phase of a closed list of states in the given gauge.
///
/// The list must end on the ray it starts on.
pub fn gauge_loop_phase(states: &[StateVector], gauge: Gauge<'_>) -> Result<f64> {
    if let Gauge::Auto = gauge {
        if let Err(Error::ChartUnavailable { .. }) = auto_chart(states) {
            return Ok(wrap_phase(link_phase_sum(states)));
        }
    }
    let reps = gauge_fix(states, gauge)?;
    Ok(link_phase_sum(&reps))
}

/// Ordered list of normalized states tracing a path of rays.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteRayPath {
    states: Vec<StateVector>,
    closed: bool,
}

impl DiscreteRayPath {
    pub fn open(states: Vec<StateVector>) -> Result<Self> {
        Self::validate(&states)?;
        Ok(Self {
            states,
            closed: false,
        })
    }

    /// A closed path; the last state must lie on the first ray.
    pub fn closed(states: Vec<StateVector>) -> Result<Self> {
        Self::validate(&states)?;
        let distance = ray_distance(&states[0], &states[states.len() - 1])?;
        if distance > CLOSURE_TOL {
            return Err(Error::NotClosed { distance });
        }
        Ok(Self {
            states,
            closed: true,
        })
    }

    /// Closes the list by appending the first state unless the last state
    /// already lies on the first ray.
    pub fn closing(mut states: Vec<StateVector>) -> Result<Self> {
        let first = states.first().ok_or(Error::EmptyPath)?.clone();
        let last = states.last().expect("non-empty");
        if ray_distance(&first, last)? > CLOSURE_TOL {
            states.push(first);
        }
        Self::closed(states)
    }

    fn validate(states: &[StateVector]) -> Result<()> {
        let first = states.first().ok_or(Error::EmptyPath)?;
        for s in states {
            if s.dim() != first.dim() {
                return Err(Error::DimensionMismatch {
                    left: first.dim(),
                    right: s.dim(),
                });
            }
            s.require_normalized()?;
        }
        for (i, w) in states.windows(2).enumerate() {
            let o = w[0].inner_unchecked(&w[1]).norm();
            if o <= ORTHOGONAL_TOL {
                return Err(Error::NotComparable {
                    overlap: o,
                    link: Some(i),
                });
            }
        }
        Ok(())
    }

    pub fn states(&self) -> &[StateVector] {
        &self.states
    }

    pub fn into_states(self) -> Vec<StateVector> {
        self.states
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn first(&self) -> &StateVector {
        &self.states[0]
    }

    pub fn last(&self) -> &StateVector {
        &self.states[self.states.len() - 1]
    }

    pub fn reversed(&self) -> Self {
        let mut states = self.states.clone();
        states.reverse();
        Self {
            states,
            closed: self.closed,
        }
    }

    /// Sum of consecutive ray distances.
    pub fn length(&self) -> f64 {
        self.states
            .windows(2)
            .map(|w| ray_distance(&w[0], &w[1]).expect("validated path"))
            .sum()
    }

    /// Same rays, each state multiplied by its own phase.
    pub fn rephased(&self, phases: &[f64]) -> Result<Self> {
        if phases.len() != self.states.len() {
            return Err(Error::DimensionMismatch {
                left: self.states.len(),
                right: phases.len(),
            });
        }
        Ok(Self {
            states: self
                .states
                .iter()
                .zip(phases)
                .map(|(s, &p)| s.rephase(p))
                .collect(),
            closed: self.closed,
        })
    }

    fn require_closed(&self) -> Result<()> {
        if !self.closed {
            let distance = ray_distance(self.first(), self.last())?;
            return Err(Error::NotClosed { distance });
        }
        Ok(())
    }

    /// States with the final entry replaced by the first, so the loop closes
    /// on identical representatives.
    fn cycle(&self) -> Vec<StateVector> {
        let mut cycle = self.states.clone();
        if cycle.len() > 1 {
            let n = cycle.len();
            cycle[n - 1] = cycle[0].clone();
        }
        cycle
    }
}

/// Returns the representative of `ray(φ')` that is in phase with `ψ`:
/// `φ = φ' ⟨φ'|ψ⟩ / |⟨φ'|ψ⟩|`, so that `⟨ψ|φ⟩ = |⟨ψ|φ'⟩|`.
pub fn align_phase(psi: &StateVector, phi_prime: &StateVector) -> Result<StateVector> {
    psi.require_normalized()?;
    phi_prime.require_normalized()?;
    let o = phi_prime.inner(psi)?;
    if o.norm() <= ORTHOGONAL_TOL {
        return Err(Error::NotComparable {
            overlap: o.norm(),
            link: None,
        });
    }
    Ok(phi_prime.scale(o / o.norm()))
}

/// Filtering measurement of `A` by the polarizer `|B⟩⟨B|`, renormalized:
/// `A ↦ B ⟨B|A⟩ / |⟨B|A⟩|`.
pub fn quantum_jump(a: &StateVector, b: &StateVector) -> Result<StateVector> {
    align_phase(a, b)
}

/// Connection one-form `A = Im(w̄_j dw^j) / (1 + w̄_k w^k)` on a displacement.
pub fn connection_form(p: &ChartPoint, dw: &[C64]) -> Result<f64> {
    let w = p.coords();
    if w.len() != dw.len() {
        return Err(Error::DimensionMismatch {
            left: w.len(),
            right: dw.len(),
        });
    }
    let numerator: C64 = w.iter().zip(dw).map(|(w, d)| w.conj() * d).sum();
    Ok(numerator.im / (1.0 + p.norm_squared()))
}

/// Bargmann polygon phase `arg(⟨A_1|A_N⟩⟨A_N|A_{N-1}⟩⋯⟨A_2|A_1⟩)`, unwrapped in
/// the [`Gauge::Auto`] chart.
pub fn discrete_holonomy(path: &DiscreteRayPath) -> Result<PhaseResult> {
    discrete_holonomy_in(path, Gauge::Auto)
}

pub fn discrete_holonomy_in(path: &DiscreteRayPath, gauge: Gauge<'_>) -> Result<PhaseResult> {
    path.require_closed()?;
    let cycle = path.cycle();
    let mut product = C64::new(1.0, 0.0);
    for (i, w) in cycle.windows(2).enumerate() {
        let o = w[1].inner_unchecked(&w[0]);
        if o.norm() <= ORTHOGONAL_TOL {
            return Err(Error::NotComparable {
                overlap: o.norm(),
                link: Some(i),
            });
        }
        // Renormalize each factor so long products neither underflow nor drift.
        product *= o / o.norm();
    }
    let principal = product.arg();
    let reference = gauge_loop_phase(&cycle, gauge)?;
    Ok(PhaseResult::geometric(resolve_winding(principal, reference)))
}

/// Horizontal lift of a ray path and, for closed paths, its holonomy.
#[derive(Debug, Clone)]
pub struct HorizontalLift {
    pub states: Vec<StateVector>,
    pub holonomy: Option<PhaseResult>,
}

/// Discrete parallel transport: `ψ_1 = start`, `ψ_{i+1} = align_phase(ψ_i, path_{i+1})`.
///
/// For a closed path the holonomy is `arg⟨start|ψ_last⟩`, unwrapped by
/// tracking the phase of the [`Gauge::Auto`] chart coordinate along the lift.
pub fn horizontal_lift(path: &DiscreteRayPath, start: &StateVector) -> Result<HorizontalLift> {
    horizontal_lift_in(path, start, Gauge::Auto)
}

pub fn horizontal_lift_in(
    path: &DiscreteRayPath,
    start: &StateVector,
    gauge: Gauge<'_>,
) -> Result<HorizontalLift> {
    start.require_normalized()?;
    let d = ray_distance(start, path.first())?;
    if d > CLOSURE_TOL {
        return Err(Error::InvalidParameter(format!(
            "start state is not on the first ray of the path (distance {d:e})"
        )));
    }
    let mut lifted = Vec::with_capacity(path.len());
    lifted.push(start.clone());
    for (i, next) in path.states()[1..].iter().enumerate() {
        let prev = lifted.last().expect("non-empty");
        let step = align_phase(prev, next).map_err(|e| match e {
            Error::NotComparable { overlap, .. } => Error::NotComparable {
                overlap,
                link: Some(i),
            },
            other => other,
        })?;
        lifted.push(step);
    }
    let holonomy = if path.is_closed() {
        let last = lifted.last().expect("non-empty");
        let principal = start.inner_unchecked(last).arg();
        // Gauge-fixing the lifted states recovers the path representatives, so
        // the chart phase tracked along the lift is the gauge loop phase.
        let reference = gauge_loop_phase(&path.cycle(), gauge)?;
        Some(PhaseResult::geometric(resolve_winding(principal, reference)))
    } else {
        None
    };
    Ok(HorizontalLift {
        states: lifted,
        holonomy,
    })
}

/// Applies `quantum_jump` from `states[0]` through every later state and
/// reports the phase of the final state relative to `states[0]`.
pub fn jump_sequence_phase(states: &[StateVector]) -> Result<PhaseResult> {
    let first = states.first().ok_or(Error::EmptyPath)?;
    let last = states.last().expect("non-empty");
    let distance = ray_distance(first, last)?;
    if distance > CLOSURE_TOL {
        return Err(Error::NotClosed { distance });
    }
    let mut current = first.clone();
    let mut visited = Vec::with_capacity(states.len());
    visited.push(current.clone());
    for (i, target) in states[1..].iter().enumerate() {
        current = quantum_jump(&current, target).map_err(|e| match e {
            Error::NotComparable { overlap, .. } => Error::NotComparable {
                overlap,
                link: Some(i),
            },
            other => other,
        })?;
        visited.push(current.clone());
    }
    let principal = first.inner_unchecked(&current).arg();
    let reference = gauge_loop_phase(&visited, Gauge::Auto)?;
    Ok(PhaseResult::geometric(resolve_winding(principal, reference)))
}
