use std::f64::consts::{PI, TAU};

use holonomy::spectral_berry::{
    berry_phase, curvature_grid, solid_angle, spin_hamiltonian, unit_vector, FamilyRegistry, MatrixListFamily,
    ParameterCurve, ParameterPoint, Spin, SpinFamily,
};

fn half() -> Spin {
    Spin::new(0.5).unwrap()
}

#[test]
fn curvature_flux_through_cap_matches_boundary_phase() {
    let h = PI / 200.0;
    let fam = SpinFamily::new(half(), 1.0).unwrap();
    let grid = curvature_grid(&fam, 0, 200, 400).unwrap();
    for rows in [50usize, 100, 150] {
        let theta0 = rows as f64 * h;
        let flux: f64 = grid
            .cells
            .iter()
            .filter(|c| c.theta < theta0)
            .map(|c| c.curvature * c.area)
            .sum();
        let curve = ParameterCurve::latitude(theta0, 0.0, 1.0, 10_000).unwrap();
        let phase = berry_phase(&fam, 0, &curve).unwrap().geometric;
        assert!((-flux - phase).abs() < 1e-4, "theta0 {theta0}: {} vs {phase}", -flux);
    }
}

#[test]
fn curvature_of_every_spin_level_is_a_monopole() {
    for two_j in 1..=3 {
        let spin = Spin::from_twice(two_j).unwrap();
        let fam = SpinFamily::new(spin, 1.0).unwrap();
        for r in spin.levels() {
            let m = spin.j() - r as f64;
            let grid = curvature_grid(&fam, r, 60, 120).unwrap();
            assert!((grid.total_flux() - 2.0 * TAU * m).abs() < 1e-8);
            assert!(grid.max_error(|t, _| m * t.sin()) < 1e-3);
        }
    }
}

#[test]
fn pole_rows_have_small_curvature() {
    let fam = SpinFamily::new(half(), 1.0).unwrap();
    let grid = curvature_grid(&fam, 0, 100, 200).unwrap();
    let h = PI / 100.0;
    for c in grid.cells.iter().filter(|c| c.theta < h || c.theta > PI - h) {
        assert!(c.curvature.abs() < 0.5 * h * 1.01);
    }
}

#[test]
fn berry_phase_converges_quadratically_in_samples() {
    let fam = SpinFamily::new(Spin::new(1.0).unwrap(), 1.0).unwrap();
    let phase = |k| {
        let curve = ParameterCurve::latitude(1.0, 0.0, 1.0, k).unwrap();
        berry_phase(&fam, 0, &curve).unwrap().geometric
    };
    let d1 = (phase(100) - phase(200)).abs();
    let d2 = (phase(200) - phase(400)).abs();
    assert!((3.5..4.5).contains(&(d1 / d2)), "ratio {}", d1 / d2);
}

#[test]
fn berry_phase_follows_minus_m_solid_angle_on_a_tilted_loop() {
    // Circle of angular radius a around an axis at polar angle 1.0.
    let a: f64 = 0.4;
    let axis_theta: f64 = 1.0;
    let curve = ParameterCurve::closed(
        move |t| {
            let phi = TAU * t;
            let (st, ct) = axis_theta.sin_cos();
            let local = [a.sin() * phi.cos(), a.sin() * phi.sin(), a.cos()];
            let v = [ct * local[0] + st * local[2], local[1], -st * local[0] + ct * local[2]];
            ParameterPoint::polar(v[2].acos(), v[1].atan2(v[0]))
        },
        1.0,
        4000,
    )
    .unwrap();
    let omega = solid_angle(&curve).unwrap();
    assert!((omega - TAU * (1.0 - a.cos())).abs() < 1e-5);
    let spin = Spin::new(1.5).unwrap();
    let fam = SpinFamily::new(spin, 2.0).unwrap();
    for r in spin.levels() {
        let phase = berry_phase(&fam, r, &curve).unwrap().geometric;
        assert!((phase + (spin.j() - r as f64) * omega).abs() < 1e-6);
    }
}

#[test]
fn matrix_list_around_the_equator() {
    let spin = half();
    let matrices = (0..4)
        .map(|k| spin_hamiltonian(spin, 1.0, unit_vector(PI / 2.0, k as f64 * PI / 2.0)).unwrap())
        .collect();
    let fam = MatrixListFamily::new(matrices, true).unwrap();
    let curve = fam.curve(2000).unwrap();
    let phase = berry_phase(&fam, 0, &curve).unwrap();
    assert!((phase.geometric_principal.abs() - PI).abs() < 1e-6);
}

#[test]
fn registry_spin_family_reproduces_closed_form() {
    let registry = FamilyRegistry::with_builtins();
    let params = [("J".to_string(), "1".to_string()), ("omega0".to_string(), "0.5".to_string())]
        .into_iter()
        .collect();
    let fam = registry.build("spin-J", &params).unwrap();
    let theta = PI / 3.0;
    let curve = ParameterCurve::latitude(theta, 0.0, 1.0, 10_000).unwrap();
    let phase = berry_phase(fam.as_ref(), 2, &curve).unwrap();
    assert!((phase.geometric - PI).abs() < 1e-6);
}
