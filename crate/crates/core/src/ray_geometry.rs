//! Geometry of the space of rays `CP^n`.
//!
//! Points are described by inhomogeneous coordinates `w^j = Z^j / Z^c` on the
//! chart `U_c = {Z^c ≠ 0}`. The metric is Fubini-Study,
//! `ds² = 4 g_{jk̄} dw^j dw̄^k` with
//! `g_{jk̄} = ((1 + |w|²) δ_jk - w̄_j w_k) / (1 + |w|²)²`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::hilbert::{inner_product, StateVector, C64};
use crate::pancharatnam::{align_phase, DiscreteRayPath, CHART_TOL, ORTHOGONAL_TOL};

/// Largest coordinate modulus accepted by the metric.
pub const MAX_COORDINATE: f64 = 1e8;

/// Inhomogeneous coordinates of a ray on chart `chart`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartPoint {
    w: Vec<C64>,
    chart: usize,
}

impl ChartPoint {
    pub fn new(w: Vec<C64>, chart: usize) -> Self {
        Self { w, chart }
    }

    pub fn coords(&self) -> &[C64] {
        &self.w
    }

    pub fn chart(&self) -> usize {
        self.chart
    }

    /// `n`, the complex dimension of the ray space.
    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn norm_squared(&self) -> f64 {
        self.w.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Normalized representative with `Z^chart` real positive.
    pub fn to_state(&self) -> Result<StateVector> {
        let mut amps = Vec::with_capacity(self.w.len() + 1);
        amps.extend_from_slice(&self.w[..self.chart.min(self.w.len())]);
        amps.push(C64::new(1.0, 0.0));
        if self.chart < self.w.len() {
            amps.extend_from_slice(&self.w[self.chart..]);
        }
        StateVector::normalized(amps)
    }
}

/// `w^j = Z^j / Z^chart` for `j ≠ chart`, in index order.
pub fn to_chart(psi: &StateVector, chart: usize) -> Result<ChartPoint> {
    let amps = psi.amplitudes();
    let pivot = *amps.get(chart).ok_or_else(|| {
        Error::InvalidParameter(format!("chart {chart} out of range for dimension {}", psi.dim()))
    })?;
    if pivot.norm() <= CHART_TOL * psi.norm() {
        return Err(Error::ChartUnavailable {
            chart,
            magnitude: pivot.norm(),
        });
    }
    let w = amps
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != chart)
        .map(|(_, z)| z / pivot)
        .collect();
    Ok(ChartPoint { w, chart })
}

/// Chart `argmax_α |Z^α|`, always available for a nonzero state.
pub fn best_chart(psi: &StateVector) -> usize {
    psi.amplitudes()
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
        .map(|(k, _)| k)
        .unwrap_or(0)
}

/// Tries `chart` first and falls back to [`best_chart`].
pub fn to_chart_or_best(psi: &StateVector, chart: usize) -> Result<ChartPoint> {
    match to_chart(psi, chart) {
        Err(Error::ChartUnavailable { .. }) => to_chart(psi, best_chart(psi)),
        other => other,
    }
}

/// Components `g_{jk̄}` of the Fubini-Study metric at a chart point.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSample {
    pub g: DMatrix<C64>,
}

impl MetricSample {
    /// `4 Σ g_{jk̄} dw^j conj(dw^k)`.
    pub fn line_element(&self, dw: &[C64]) -> Result<f64> {
        let n = self.g.nrows();
        if dw.len() != n {
            return Err(Error::DimensionMismatch {
                left: n,
                right: dw.len(),
            });
        }
        let mut sum = C64::new(0.0, 0.0);
        for j in 0..n {
            for k in 0..n {
                sum += self.g[(j, k)] * dw[j] * dw[k].conj();
            }
        }
        Ok(4.0 * sum.re)
    }
}

pub fn fubini_study_metric(p: &ChartPoint) -> Result<MetricSample> {
    let r2 = p.norm_squared();
    if !r2.is_finite() || r2.sqrt() > MAX_COORDINATE {
        return Err(Error::CoordinateOverflow { modulus: r2.sqrt() });
    }
    let n = p.dim();
    let s = 1.0 + r2;
    let w = p.coords();
    let g = DMatrix::from_fn(n, n, |j, k| {
        let delta = if j == k { C64::new(s, 0.0) } else { C64::new(0.0, 0.0) };
        (delta - w[j].conj() * w[k]) / (s * s)
    });
    Ok(MetricSample { g })
}

/// `ds² = 4 g_{jk̄}(p) dw^j dw̄^k`.
pub fn line_element(p: &ChartPoint, dw: &[C64]) -> Result<f64> {
    fubini_study_metric(p)?.line_element(dw)
}

/// Arc `γ(t) = cos(t/2)·start + sin(t/2)·tangent`, `t ∈ [0, length]`, whose
/// projection is the shortest Fubini-Study geodesic between two rays.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicSegment {
    pub start: StateVector,
    pub tangent: StateVector,
    pub length: f64,
}

impl GeodesicSegment {
    pub fn point_at(&self, t: f64) -> StateVector {
        let (s, c) = (0.5 * t).sin_cos();
        self.start
            .combine(C64::new(c, 0.0), &self.tangent, C64::new(s, 0.0))
            .expect("segment vectors share a dimension")
    }

    pub fn end(&self) -> StateVector {
        self.point_at(self.length)
    }
}

/// Great-circle construction in the plane of `A` and the Pancharatnam-aligned
/// `B' = B ⟨B|A⟩/|⟨B|A⟩|`.
pub fn geodesic_between(a: &StateVector, b: &StateVector) -> Result<GeodesicSegment> {
    a.require_normalized()?;
    b.require_normalized()?;
    let overlap = inner_product(a, b)?.norm();
    if overlap <= ORTHOGONAL_TOL {
        return Err(Error::NotUnique);
    }
    let aligned = align_phase(a, b)?;
    let cos_half = a.inner(&aligned)?.re;
    let residual = aligned.combine(C64::new(1.0, 0.0), a, C64::new(-cos_half, 0.0))?;
    let sin_half = residual.norm();
    if sin_half <= 1e-15 {
        return Ok(GeodesicSegment {
            start: a.clone(),
            tangent: orthogonal_unit(a),
            length: 0.0,
        });
    }
    let tangent = residual.scale(C64::new(1.0 / sin_half, 0.0));
    Ok(GeodesicSegment {
        start: a.clone(),
        tangent,
        length: 2.0 * sin_half.atan2(cos_half),
    })
}

/// Some unit vector orthogonal to `a`, by Gram-Schmidt on the basis vector
/// least aligned with it.
fn orthogonal_unit(a: &StateVector) -> StateVector {
    let k = a
        .amplitudes()
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.norm().total_cmp(&y.1.norm()))
        .map(|(k, _)| k)
        .unwrap_or(0);
    let e = StateVector::basis(a.dim(), k).expect("index within dimension");
    let proj = a.inner_unchecked(&e);
    e.combine(C64::new(1.0, 0.0), a, -proj)
        .and_then(StateVector::normalize)
        .expect("basis vector with smallest overlap is independent of a")
}

/// `k` equally spaced samples `γ(t_i)`, `t_i ∈ [0, length]`.
pub fn sample_geodesic(seg: &GeodesicSegment, k: usize) -> Result<DiscreteRayPath> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!(
            "geodesic sampling needs at least 2 points (got {k})"
        )));
    }
    let states = (0..k)
        .map(|i| {
            let t = seg.length * i as f64 / (k - 1) as f64;
            seg.point_at(t).normalize()
        })
        .collect::<Result<Vec<_>>>()?;
    DiscreteRayPath::open(states)
}

/// Geodesic polygon through the vertices of a closed path, `k` samples per
/// edge (shared vertices appear once).
pub fn geodesic_polygon(vertices: &DiscreteRayPath, k: usize) -> Result<DiscreteRayPath> {
    let vs = vertices.states();
    let mut states = vec![vs[0].clone()];
    for w in vs.windows(2) {
        let seg = geodesic_between(&w[0], &w[1])?;
        if seg.length == 0.0 {
            continue;
        }
        let edge = sample_geodesic(&seg, k)?;
        states.extend(edge.into_states().into_iter().skip(1));
    }
    if vertices.is_closed() {
        DiscreteRayPath::closed(states)
    } else {
        DiscreteRayPath::open(states)
    }
}
