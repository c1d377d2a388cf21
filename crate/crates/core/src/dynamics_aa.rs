//! Time-dependent Schrödinger evolution and the Aharonov-Anandan phase.
//!
//! A cyclic evolution `|Ψ(T)⟩ = e^{iΔ}|Ψ(0)⟩` splits its total phase into a
//! dynamical part `-∫⟨H⟩dt` and the geometric remainder
//! `Φ_AA = Δ + ∫⟨Ψ|H|Ψ⟩dt`, which depends only on the closed path of rays.
//!
//! The rotating-field model `H(t) = -ω₀ J·X(t)`, with `X(t)` turning about `ẑ`
//! at rate `ω = s ω₀`, is solved exactly in the rotating frame.

use std::f64::consts::TAU;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::hilbert::{eigh, HermitianMatrix, StateVector, UnitaryMatrix, C64};
use crate::pancharatnam::{gauge_loop_phase, resolve_winding, wrap_phase, Gauge, PhaseResult};
use crate::spectral_berry::{unit_vector, HamiltonianFamily, ParameterCurve, Spin, SpinFamily};

/// Norm drift allowed in a single step before renormalization.
pub const MAX_STEP_DRIFT: f64 = 1e-6;

/// Default ray-distance threshold for accepting an evolution as cyclic.
pub const CYCLICITY_TOL: f64 = 1e-5;

/// Step count used when a caller does not choose one.
pub const DEFAULT_STEPS: usize = 10_000;

/// Sampled solution of `i dΨ/dt = H(t) Ψ`.
#[derive(Debug, Clone)]
pub struct EvolutionTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
    pub hamiltonians: Vec<HermitianMatrix>,
}

impl EvolutionTrajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0) - self.times.first().copied().unwrap_or(0.0)
    }

    pub fn first(&self) -> &StateVector {
        &self.states[0]
    }

    pub fn last(&self) -> &StateVector {
        &self.states[self.states.len() - 1]
    }

    /// `⟨Ψ(t_i)|H(t_i)|Ψ(t_i)⟩` on the time grid.
    pub fn energies(&self) -> Vec<f64> {
        self.states
            .iter()
            .zip(&self.hamiltonians)
            .map(|(s, h)| expectation_unchecked(h, s))
            .collect()
    }

    /// The same trajectory with `Ψ(t_i)` multiplied by `e^{iφ_i}`.
    pub fn rephased(&self, phases: &[f64]) -> Result<Self> {
        if phases.len() != self.states.len() {
            return Err(Error::DimensionMismatch {
                left: self.states.len(),
                right: phases.len(),
            });
        }
        Ok(Self {
            times: self.times.clone(),
            states: self.states.iter().zip(phases).map(|(s, &p)| s.rephase(p)).collect(),
            hamiltonians: self.hamiltonians.clone(),
        })
    }

    /// Ray path `Ψ(t_0), …, Ψ(t_{K-1}), Ψ(t_0)`, closed on the first ray.
    pub fn closed_ray_path(&self) -> Vec<StateVector> {
        let mut states = self.states.clone();
        let n = states.len();
        states[n - 1] = states[0].clone();
        states
    }
}

fn expectation_unchecked(h: &HermitianMatrix, psi: &StateVector) -> f64 {
    let v = psi.as_dvector();
    v.dotc(&(h.matrix() * v)).re
}

/// `-i H ψ`.
fn derivative(h: &HermitianMatrix, psi: &DVector<C64>) -> DVector<C64> {
    (h.matrix() * psi) * C64::new(0.0, -1.0)
}

/// Fixed-step RK4 for an arbitrary time-dependent Hamiltonian on `[0, t_end]`.
pub fn integrate_with<F>(hamiltonian: F, t_end: f64, psi0: &StateVector, steps: usize) -> Result<EvolutionTrajectory>
where
    F: Fn(f64) -> Result<HermitianMatrix>,
{
    psi0.require_normalized()?;
    if steps < 10 {
        return Err(Error::InvalidParameter(format!("at least 10 steps are required (got {steps})")));
    }
    if !(t_end.is_finite() && t_end > 0.0) {
        return Err(Error::InvalidParameter(format!("evolution time must be positive (got {t_end})")));
    }
    let dt = t_end / steps as f64;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut hamiltonians = Vec::with_capacity(steps + 1);

    let mut h_now = hamiltonian(0.0)?;
    if h_now.dim() != psi0.dim() {
        return Err(Error::DimensionMismatch {
            left: h_now.dim(),
            right: psi0.dim(),
        });
    }
    let mut psi = psi0.as_dvector().clone();
    times.push(0.0);
    states.push(psi0.clone());
    hamiltonians.push(h_now.clone());

    let half = C64::new(0.5 * dt, 0.0);
    let full = C64::new(dt, 0.0);
    let sixth = C64::new(dt / 6.0, 0.0);
    let two = C64::new(2.0, 0.0);
    for step in 0..steps {
        let t = step as f64 * dt;
        let t_next = (step + 1) as f64 * dt;
        let h_mid = hamiltonian(t + 0.5 * dt)?;
        let h_next = hamiltonian(t_next)?;

        let k1 = derivative(&h_now, &psi);
        let k2 = derivative(&h_mid, &(&psi + &k1 * half));
        let k3 = derivative(&h_mid, &(&psi + &k2 * half));
        let k4 = derivative(&h_next, &(&psi + &k3 * full));
        let next = &psi + (k1 + &k2 * two + &k3 * two + k4) * sixth;

        let norm = next.norm();
        let drift = (norm - 1.0).abs();
        if drift > MAX_STEP_DRIFT {
            return Err(Error::StepTooLarge { step, drift });
        }
        psi = next / C64::new(norm, 0.0);

        times.push(t_next);
        states.push(StateVector::from_dvector(psi.clone()));
        hamiltonians.push(h_next.clone());
        h_now = h_next;
    }
    Ok(EvolutionTrajectory {
        times,
        states,
        hamiltonians,
    })
}

/// Integrates `i dΨ/dt = H(x(t)) Ψ` over one period of `curve`.
pub fn schrodinger_integrate(
    fam: &dyn HamiltonianFamily,
    curve: &ParameterCurve,
    psi0: &StateVector,
    steps: usize,
) -> Result<EvolutionTrajectory> {
    integrate_with(|t| fam.evaluate(&curve.at(t)), curve.period(), psi0, steps)
}

/// `Λ_dyn = -∫₀ᵀ ⟨Ψ|H|Ψ⟩ dt` (trapezoidal rule on the time grid).
pub fn dynamical_phase(traj: &EvolutionTrajectory) -> f64 {
    let e = traj.energies();
    let integral: f64 = traj
        .times
        .windows(2)
        .zip(e.windows(2))
        .map(|(t, e)| 0.5 * (t[1] - t[0]) * (e[0] + e[1]))
        .sum();
    -integral
}

/// `(Δ, residual)` with `Δ = arg⟨Ψ(0)|Ψ(T)⟩` and `residual` the ray distance
/// between the endpoints.
pub fn cyclicity_residual(traj: &EvolutionTrajectory) -> (f64, f64) {
    let overlap = traj.first().inner_unchecked(traj.last());
    let c = overlap.norm().min(1.0);
    let residual = if c > 0.5 {
        2.0 * (1.0 - c * c).max(0.0).sqrt().asin()
    } else {
        2.0 * c.acos()
    };
    (overlap.arg(), residual)
}

/// Options for [`aa_phase_with`].
#[derive(Debug, Clone, Copy)]
pub struct AaOptions<'a> {
    pub cyclicity_tol: f64,
    /// Reference gauge that fixes the winding of the unwrapped value.
    pub gauge: Gauge<'a>,
}

impl Default for AaOptions<'_> {
    fn default() -> Self {
        Self {
            cyclicity_tol: CYCLICITY_TOL,
            gauge: Gauge::Auto,
        }
    }
}

/// `Φ_AA = Δ + ∫⟨H⟩dt` for a cyclic trajectory.
pub fn aa_phase(traj: &EvolutionTrajectory) -> Result<PhaseResult> {
    aa_phase_with(traj, AaOptions::default())
}

/// [`aa_phase`] with an explicit cyclicity tolerance and reference gauge.
///
/// The principal value is `Δ + ∫⟨H⟩dt` reduced mod 2π. The winding comes from
/// the accumulated link phases of the closed ray path in `opts.gauge`.
pub fn aa_phase_with(traj: &EvolutionTrajectory, opts: AaOptions<'_>) -> Result<PhaseResult> {
    let (delta, residual) = cyclicity_residual(traj);
    if residual.is_nan() || residual > opts.cyclicity_tol {
        return Err(Error::NotCyclic {
            residual,
            tolerance: opts.cyclicity_tol,
        });
    }
    let dynamical = dynamical_phase(traj);
    let principal = wrap_phase(delta - dynamical);
    let reference = gauge_loop_phase(&traj.closed_ray_path(), opts.gauge)?;
    Ok(PhaseResult::geometric(resolve_winding(principal, reference)).with_dynamical(dynamical))
}

/// `arg⟨Ψ(0)|Ψ(T)⟩ + ∫⟨H⟩dt` in `(-π, π]` without a cyclicity check.
///
/// For nearly cyclic (adiabatic) runs this approximates the geometric phase.
pub fn open_path_phase(traj: &EvolutionTrajectory) -> f64 {
    let (delta, _) = cyclicity_residual(traj);
    wrap_phase(delta - dynamical_phase(traj))
}

/// Arguments of the latitude-shifting map `σ_s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaParams {
    /// `ω/ω₀`.
    pub s: f64,
    /// `cos θ`.
    pub u: f64,
    pub chi: f64,
}

impl SigmaParams {
    pub fn new(s: f64, u: f64, chi: f64) -> Result<Self> {
        let p = Self { s, u, chi };
        p.validate()?;
        Ok(p)
    }

    pub fn from_polar(s: f64, theta: f64, chi: f64) -> Result<Self> {
        Self::new(s, theta.cos(), chi)
    }

    fn validate(&self) -> Result<()> {
        let Self { s, u, .. } = *self;
        let radicand = s * s - 2.0 * u * s + 1.0;
        let ok = s.is_finite() && u.is_finite() && (0.0..1.0).contains(&s) && u > -1.0 && u <= 1.0 && radicand > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::SigmaDomain { s, u })
        }
    }
}

/// `σ: (u, χ) ↦ ((u - s)/√(s² - 2us + 1), χ)`.
pub fn sigma_map(p: &SigmaParams) -> Result<(f64, f64)> {
    p.validate()?;
    let u_mapped = (p.u - p.s) / (p.s * p.s - 2.0 * p.u * p.s + 1.0).sqrt();
    Ok((u_mapped.clamp(-1.0, 1.0), p.chi))
}

/// `h(x) = H(σ(x))` for the spin family.
pub fn partner_hamiltonian(fam: &SpinFamily, s: f64, theta: f64, chi: f64) -> Result<HermitianMatrix> {
    let (u_mapped, chi) = sigma_map(&SigmaParams::from_polar(s, theta, chi)?)?;
    fam.hamiltonian_polar(u_mapped.acos(), chi)
}

/// `-2π(J - r)(1 - (u - s)/√(s² - 2us + 1))`.
pub fn aa_phase_analytic(spin: Spin, level: usize, s: f64, u: f64) -> Result<f64> {
    spin.check_level(level)?;
    let (u_mapped, _) = sigma_map(&SigmaParams::new(s, u, 0.0)?)?;
    Ok(-TAU * (spin.j() - level as f64) * (1.0 - u_mapped))
}

/// Exact propagator of the rotating-field drive,
/// `U(t) = e^{-iωJ_z t} e^{-i(H(X(0)) - ωJ_z) t}` with `ω = s ω₀`.
pub fn rotating_frame_propagator(spin: Spin, omega0: f64, s: f64, theta: f64, chi: f64, t: f64) -> Result<UnitaryMatrix> {
    let fam = SpinFamily::new(spin, omega0)?;
    let omega = s * omega0;
    let jz = &fam.matrices().z;
    let generator = fam.hamiltonian_polar(theta, chi)?.add(&jz.scale(-omega))?;
    Ok(UnitaryMatrix::evolution(jz, omega * t).compose(&UnitaryMatrix::evolution(&generator, t)))
}

/// Spin-J particle in a field of fixed polar angle `θ` rotating as
/// `χ(t) = χ₀ + ωt`.
#[derive(Debug, Clone)]
pub struct RotatingField {
    family: SpinFamily,
    s: f64,
    theta: f64,
    chi0: f64,
}

impl RotatingField {
    pub fn new(family: SpinFamily, s: f64, theta: f64, chi0: f64) -> Result<Self> {
        if family.omega0().is_nan() || family.omega0() <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "rotating field needs omega0 > 0 (got {})",
                family.omega0()
            )));
        }
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::SigmaDomain { s, u: theta.cos() });
        }
        if !(theta.is_finite() && chi0.is_finite()) {
            return Err(Error::InvalidParameter("field angles must be finite".into()));
        }
        Ok(Self {
            family,
            s,
            theta,
            chi0,
        })
    }

    pub fn family(&self) -> &SpinFamily {
        &self.family
    }

    pub fn spin(&self) -> Spin {
        self.family.spin()
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn omega(&self) -> f64 {
        self.s * self.family.omega0()
    }

    /// One drive period `T = 2π/ω`.
    pub fn period(&self) -> f64 {
        TAU / self.omega()
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn u(&self) -> f64 {
        self.theta.cos()
    }

    pub fn chi0(&self) -> f64 {
        self.chi0
    }

    pub fn direction(&self, t: f64) -> [f64; 3] {
        unit_vector(self.theta, self.chi0 + self.omega() * t)
    }

    pub fn hamiltonian(&self, t: f64) -> Result<HermitianMatrix> {
        self.family.hamiltonian(self.direction(t))
    }

    /// The parameter loop traced in one period.
    pub fn curve(&self, samples: usize) -> Result<ParameterCurve> {
        ParameterCurve::latitude(self.theta, self.chi0, self.period(), samples)
    }

    /// Rotating-frame generator `H(X(0)) - ωJ_z = -ω₀ J·(X(0) + s ẑ)`.
    pub fn generator(&self) -> Result<HermitianMatrix> {
        self.hamiltonian(0.0)?.add(&self.family.matrices().z.scale(-self.omega()))
    }

    /// Polar angles `(θ', χ₀)` of `X(0) + s ẑ`.
    pub fn cyclic_axis(&self) -> (f64, f64) {
        let u = self.u();
        let len = (1.0 + 2.0 * u * self.s + self.s * self.s).sqrt();
        (((u + self.s) / len).clamp(-1.0, 1.0).acos(), self.chi0)
    }

    /// Level-`r` eigenvector of the rotating-frame generator; these return to
    /// their ray after one period.
    pub fn cyclic_state(&self, level: usize) -> Result<StateVector> {
        self.spin().check_level(level)?;
        let spec = eigh(&self.generator()?);
        if !spec.level_is_isolated(level) {
            return Err(Error::LevelCrossing {
                level,
                sample: 0,
                gap: spec.level_gap(level),
            });
        }
        Ok(spec.eigenvectors[level].clone())
    }

    /// Level-`r` eigenvector of the partner Hamiltonian `h(x(0))`.
    pub fn partner_state(&self, level: usize) -> Result<StateVector> {
        self.spin().check_level(level)?;
        let h = partner_hamiltonian(&self.family, self.s, self.theta, self.chi0)?;
        Ok(eigh(&h).eigenvectors[level].clone())
    }

    /// Pole-regular section along the cyclic orbit `(θ', χ₀ + ωt)` at the
    /// given times.
    pub fn cyclic_sections(&self, level: usize, times: &[f64]) -> Result<Vec<StateVector>> {
        let (theta_c, _) = self.cyclic_axis();
        times
            .iter()
            .map(|&t| self.family.section(level, theta_c, self.chi0 + self.omega() * t))
            .collect()
    }

    /// Closed form `-2π m (1 - cos θ')` for the cyclic state of level `r`.
    pub fn cyclic_aa_phase(&self, level: usize) -> Result<f64> {
        self.spin().check_level(level)?;
        let (theta_c, _) = self.cyclic_axis();
        Ok(-TAU * self.family.m_of_level(level) * (1.0 - theta_c.cos()))
    }

    /// Integrates one period from `psi0`.
    pub fn integrate(&self, psi0: &StateVector, steps: usize) -> Result<EvolutionTrajectory> {
        integrate_with(|t| self.hamiltonian(t), self.period(), psi0, steps)
    }

    pub fn propagator(&self, t: f64) -> Result<UnitaryMatrix> {
        rotating_frame_propagator(self.spin(), self.family.omega0(), self.s, self.theta, self.chi0, t)
    }

    /// AA phase of a trajectory of this drive started in (or near) a level-`r`
    /// cyclic state, unwrapped against the pole-regular section.
    pub fn aa_phase(&self, traj: &EvolutionTrajectory, level: usize, cyclicity_tol: f64) -> Result<PhaseResult> {
        let (theta_c, _) = self.cyclic_axis();
        if theta_c >= std::f64::consts::PI {
            return aa_phase_with(
                traj,
                AaOptions {
                    cyclicity_tol,
                    gauge: Gauge::Auto,
                },
            );
        }
        let mut sections = self.cyclic_sections(level, &traj.times)?;
        let n = sections.len();
        sections[n - 1] = sections[0].clone();
        aa_phase_with(
            traj,
            AaOptions {
                cyclicity_tol,
                gauge: Gauge::Section(&sections),
            },
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral_berry::ParameterPoint;
    use std::f64::consts::PI;

    fn spin(j: f64) -> Spin {
        Spin::new(j).unwrap()
    }

    struct Constant(HermitianMatrix);

    impl HamiltonianFamily for Constant {
        fn dim(&self) -> usize {
            self.0.dim()
        }
        fn label(&self) -> &str {
            "constant"
        }
        fn evaluate(&self, _: &ParameterPoint) -> Result<HermitianMatrix> {
            Ok(self.0.clone())
        }
    }

    fn constant_run(h: HermitianMatrix, psi0: &StateVector, t: f64, steps: usize) -> EvolutionTrajectory {
        let fam = Constant(h);
        let curve = ParameterCurve::constant(ParameterPoint::new(vec![0.0]), t, steps).unwrap();
        schrodinger_integrate(&fam, &curve, psi0, steps).unwrap()
    }

    #[test]
    fn stationary_state_picks_up_energy_phase() {
        let h = HermitianMatrix::from_real_diagonal(&[0.7, -1.2, 0.1]).unwrap();
        let psi0 = StateVector::basis(3, 1).unwrap();
        let traj = constant_run(h, &psi0, 10.0, 10_000);
        for (t, s) in traj.times.iter().zip(&traj.states) {
            assert!(s.distance(&psi0.rephase(1.2 * t)).unwrap() < 1e-8);
        }
        assert!((dynamical_phase(&traj) - 12.0).abs() < 1e-10);
        let phase = aa_phase(&traj).unwrap();
        assert!(phase.geometric.abs() < 1e-8);
        assert!((phase.dynamical.unwrap() - 12.0).abs() < 1e-10);
    }

    #[test]
    fn energy_is_conserved_for_constant_hamiltonian() {
        let fam = SpinFamily::new(spin(1.0), 1.0).unwrap();
        let h = fam.hamiltonian_polar(0.8, 0.3).unwrap();
        let psi0 = StateVector::normalized(vec![C64::new(1.0, 0.0), C64::new(0.3, -0.2), C64::new(-0.5, 0.4)]).unwrap();
        let traj = constant_run(h, &psi0, 10.0, 10_000);
        let e = traj.energies();
        assert!(e.iter().all(|x| (x - e[0]).abs() < 1e-10));
        assert!(traj.states.iter().all(|s| (s.norm() - 1.0).abs() < 1e-8));
    }

    #[test]
    fn zero_hamiltonian_has_no_dynamical_phase() {
        let psi0 = StateVector::from_real(&[0.6, 0.8]).unwrap();
        let traj = constant_run(HermitianMatrix::zeros(2).unwrap(), &psi0, 3.0, 100);
        assert_eq!(dynamical_phase(&traj), 0.0);
        assert_eq!(cyclicity_residual(&traj), (0.0, 0.0));
    }

    #[test]
    fn integrator_rejects_bad_input() {
        let psi0 = StateVector::basis(2, 0).unwrap();
        let h = HermitianMatrix::from_real_diagonal(&[1.0, -1.0]).unwrap();
        let fam = Constant(h);
        let curve = ParameterCurve::constant(ParameterPoint::new(vec![0.0]), 1.0, 5).unwrap();
        assert!(matches!(
            schrodinger_integrate(&fam, &curve, &psi0, 5),
            Err(Error::InvalidParameter(_))
        ));
        let big = Constant(HermitianMatrix::from_real_diagonal(&[100.0, -100.0]).unwrap());
        let mixed = StateVector::from_real(&[1.0, 1.0]).unwrap().normalize().unwrap();
        let curve = ParameterCurve::constant(ParameterPoint::new(vec![0.0]), 10.0, 10).unwrap();
        assert!(matches!(
            schrodinger_integrate(&big, &curve, &mixed, 10),
            Err(Error::StepTooLarge { step: 0, .. })
        ));
    }

    #[test]
    fn propagator_examples() {
        let j = spin(0.5);
        let u0 = rotating_frame_propagator(j, 1.0, 0.5, 1.0, 0.2, 0.0).unwrap();
        assert!((u0.matrix() - UnitaryMatrix::identity(2).matrix()).norm() < 1e-15);
        let fam = SpinFamily::new(j, 1.0).unwrap();
        let h = fam.hamiltonian_polar(1.0, 0.2).unwrap();
        let still = rotating_frame_propagator(j, 1.0, 0.0, 1.0, 0.2, 2.5).unwrap();
        assert!((still.matrix() - UnitaryMatrix::evolution(&h, 2.5).matrix()).norm() < 1e-14);
        for two_j in 1..=3 {
            let u = rotating_frame_propagator(Spin::from_twice(two_j).unwrap(), 1.3, 0.4, 0.9, 0.0, 7.0).unwrap();
            assert!(u.unitarity_defect() <= 1e-12);
        }
    }

    #[test]
    fn integration_matches_exact_propagator() {
        let field = RotatingField::new(SpinFamily::new(spin(0.5), 1.0).unwrap(), 0.5, 1.0, 0.0).unwrap();
        let psi0 = StateVector::normalized(vec![C64::new(0.8, 0.1), C64::new(0.3, -0.5)]).unwrap();
        let exact = field.propagator(field.period()).unwrap().apply(&psi0).unwrap();
        let traj = field.integrate(&psi0, 10_000).unwrap();
        assert!(traj.last().inner(&exact).unwrap().norm() >= 1.0 - 1e-8);
    }

    #[test]
    fn halving_the_step_divides_the_error_by_sixteen() {
        let field = RotatingField::new(SpinFamily::new(spin(1.0), 1.0).unwrap(), 0.5, 1.0, 0.0).unwrap();
        let psi0 = StateVector::normalized(vec![C64::new(0.8, 0.1), C64::new(0.3, -0.5), C64::new(0.1, 0.2)]).unwrap();
        let exact = field.propagator(field.period()).unwrap().apply(&psi0).unwrap();
        let err = |steps| field.integrate(&psi0, steps).unwrap().last().distance(&exact).unwrap();
        let ratio = err(200) / err(400);
        assert!((12.0..20.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn sigma_map_examples() {
        assert_eq!(sigma_map(&SigmaParams::new(0.0, 0.3, 1.0).unwrap()).unwrap(), (0.3, 1.0));
        for s in [0.0, 0.2, 0.9] {
            assert!((sigma_map(&SigmaParams::new(s, 1.0, 0.0).unwrap()).unwrap().0 - 1.0).abs() < 1e-15);
        }
        let (u, _) = sigma_map(&SigmaParams::new(0.5, 0.0, 0.0).unwrap()).unwrap();
        assert!((u + 1.0 / 5f64.sqrt()).abs() < 1e-15);
        assert!(matches!(SigmaParams::new(1.0, 0.0, 0.0), Err(Error::SigmaDomain { .. })));
        assert!(matches!(SigmaParams::new(-0.1, 0.0, 0.0), Err(Error::SigmaDomain { .. })));
    }

    #[test]
    fn sigma_map_is_monotone_in_u() {
        for s in [0.1, 0.5, 0.9] {
            let mut prev = -1.0;
            for i in 1..=200 {
                let u = -1.0 + 2.0 * i as f64 / 200.0;
                let (m, _) = sigma_map(&SigmaParams::new(s, u, 0.0).unwrap()).unwrap();
                assert!((-1.0..=1.0).contains(&m) && m > prev);
                prev = m;
            }
        }
    }

    #[test]
    fn aa_phase_analytic_examples() {
        let half = spin(0.5);
        let v = aa_phase_analytic(half, 0, 0.5, 0.0).unwrap();
        assert!((v + PI * (1.0 + 1.0 / 5f64.sqrt())).abs() < 1e-14);
        assert!((v + 4.5465556).abs() < 1e-7);
        assert_eq!(aa_phase_analytic(spin(1.0), 1, 0.5, 0.2).unwrap(), 0.0);
        let u: f64 = 0.3;
        let limit = aa_phase_analytic(spin(1.5), 0, 1e-9, u).unwrap();
        assert!((limit + TAU * 1.5 * (1.0 - u)).abs() < 1e-8);
    }

    #[test]
    fn partner_hamiltonian_examples() {
        let fam = SpinFamily::new(spin(1.0), 1.0).unwrap();
        let h = fam.hamiltonian_polar(1.1, 0.4).unwrap();
        let p = partner_hamiltonian(&fam, 0.0, 1.1, 0.4).unwrap();
        assert!(p.frobenius_distance(&h).unwrap() < 1e-14);
        let q = partner_hamiltonian(&fam, 0.5, 1.1, 0.4).unwrap();
        assert!(q.commutator_norm(&h).unwrap() > 1e-3);
    }

    #[test]
    fn rotating_frame_eigenstates_are_cyclic() {
        for two_j in 1..=2 {
            let fam = SpinFamily::new(Spin::from_twice(two_j).unwrap(), 1.0).unwrap();
            let field = RotatingField::new(fam, 0.5, PI / 2.0, 0.0).unwrap();
            for r in 0..=two_j as usize {
                let traj = field.integrate(&field.cyclic_state(r).unwrap(), 10_000).unwrap();
                assert!(cyclicity_residual(&traj).1 <= 1e-6);
            }
        }
    }

    #[test]
    fn generic_state_is_not_cyclic() {
        let field = RotatingField::new(SpinFamily::new(spin(0.5), 1.0).unwrap(), 0.5, PI / 2.0, 0.0).unwrap();
        let psi0 = StateVector::basis(2, 0).unwrap();
        let traj = field.integrate(&psi0, 2_000).unwrap();
        let (_, residual) = cyclicity_residual(&traj);
        assert!(residual > 0.1);
        assert!(matches!(aa_phase(&traj), Err(Error::NotCyclic { .. })));
    }

    #[test]
    fn dynamical_phase_of_cyclic_state_matches_rotating_frame() {
        // ⟨H(t)⟩ stays at ⟨ψ₀|H(0)|ψ₀⟩ along a generator eigenstate.
        let field = RotatingField::new(SpinFamily::new(spin(0.5), 1.0).unwrap(), 0.5, 1.2, 0.3).unwrap();
        let psi0 = field.cyclic_state(0).unwrap();
        let traj = field.integrate(&psi0, 10_000).unwrap();
        let e0 = field.hamiltonian(0.0).unwrap().expectation(&psi0).unwrap();
        assert!((dynamical_phase(&traj) + e0 * field.period()).abs() < 1e-6);
    }

    #[test]
    fn cyclic_aa_phase_matches_closed_form() {
        let field = RotatingField::new(SpinFamily::new(spin(0.5), 1.0).unwrap(), 0.5, PI / 2.0, 0.0).unwrap();
        let traj = field.integrate(&field.cyclic_state(0).unwrap(), 10_000).unwrap();
        let phase = field.aa_phase(&traj, 0, CYCLICITY_TOL).unwrap();
        let expected = -PI * (1.0 - 0.5 / 1.25f64.sqrt());
        assert!((phase.geometric - expected).abs() < 1e-6);
        assert!((field.cyclic_aa_phase(0).unwrap() - expected).abs() < 1e-14);
    }
}
