//! Experiment runners. Each returns a [`Table`]; sweeps run in parallel and
//! keep input order.

use std::f64::consts::{PI, TAU};
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use holonomy::dynamics_aa::{aa_phase_analytic, cyclicity_residual, RotatingField, SigmaParams, CYCLICITY_TOL};
use holonomy::hilbert::{fidelity, ray_distance};
use holonomy::pancharatnam::{wrap_phase, discrete_holonomy, horizontal_lift, jump_sequence_phase, quantum_jump, CLOSURE_TOL};
use holonomy::ray_geometry::geodesic_polygon;
use holonomy::spectral_berry::{
    berry_phase, curvature_grid_with_step, parse_spin, solid_angle, HamiltonianFamily, MatrixListFamily,
    ParameterCurve, Spin, SpinFamily,
};
use holonomy::{DiscreteRayPath, StateVector};
use rayon::prelude::*;

use crate::config::{pick, Config};
use crate::error::{CliError, CliResult};
use crate::input::{parse_inline_state, read_file, read_states};
use crate::output::{format_real, Cell, Format, Table};

/// Options shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Experiment file with `key = value` lines; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output format.
    #[arg(long, value_enum, global = true)]
    pub format: Option<Format>,

    /// Write to a file instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
}

/// Parses `3.5`, `pi`, `-pi/3`, `2pi/3`, `2*pi`.
pub fn parse_number(text: &str) -> Option<f64> {
    let t = text.trim().to_ascii_lowercase();
    let (num, den) = match t.split_once('/') {
        Some((n, d)) => (n.trim().to_string(), Some(d.trim().parse::<f64>().ok()?)),
        None => (t.clone(), None),
    };
    let value = match num.strip_suffix("pi") {
        Some(coef) => {
            let coef = coef.trim().trim_end_matches('*').trim();
            let c = match coef {
                "" | "+" => 1.0,
                "-" => -1.0,
                c => c.parse::<f64>().ok()?,
            };
            c * PI
        }
        None => num.parse::<f64>().ok()?,
    };
    let value = match den {
        Some(d) if d != 0.0 => value / d,
        Some(_) => return None,
        None => value,
    };
    value.is_finite().then_some(value)
}

/// `a,b,c` or the inclusive grid `start:stop:count`.
pub fn parse_list(key: &str, text: &str) -> CliResult<Vec<f64>> {
    let bad = |what: &str| CliError::usage(format!("--{key}: {what} in {text:?}"));
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() == 3 {
        let start = parse_number(parts[0]).ok_or_else(|| bad("bad start"))?;
        let stop = parse_number(parts[1]).ok_or_else(|| bad("bad stop"))?;
        let count: usize = parts[2].trim().parse().map_err(|_| bad("bad count"))?;
        return match count {
            0 => Err(bad("count must be positive")),
            1 => Ok(vec![start]),
            n => Ok((0..n)
                .map(|i| start + (stop - start) * i as f64 / (n - 1) as f64)
                .collect()),
        };
    }
    if parts.len() != 1 {
        return Err(bad("expected a list or start:stop:count"));
    }
    text.split(',')
        .map(|item| parse_number(item).ok_or_else(|| bad(&format!("cannot parse {:?}", item.trim()))))
        .collect()
}

fn parse_levels(text: &str) -> CliResult<Vec<usize>> {
    text.split(',')
        .map(|item| {
            item.trim()
                .parse()
                .map_err(|_| CliError::usage(format!("--level: cannot parse {:?}", item.trim())))
        })
        .collect()
}

struct Settings<'a> {
    cfg: &'a Config,
}

impl<'a> Settings<'a> {
    fn text(&self, flag: &Option<String>, key: &str) -> Option<String> {
        flag.clone().or_else(|| self.cfg.raw(key).map(str::to_string))
    }

    fn number(&self, flag: &Option<String>, key: &str, default: f64) -> CliResult<f64> {
        match self.text(flag, key) {
            None => Ok(default),
            Some(t) => parse_number(&t).ok_or_else(|| CliError::usage(format!("--{key}: cannot parse {t:?}"))),
        }
    }

    fn list(&self, flag: &Option<String>, key: &str) -> CliResult<Option<Vec<f64>>> {
        self.text(flag, key).map(|t| parse_list(key, &t)).transpose()
    }

    fn spin(&self, flag: &Option<String>) -> CliResult<Spin> {
        let text = self.text(flag, "J").unwrap_or_else(|| "1/2".into());
        parse_spin(&text).map_err(|e| CliError::usage(format!("--J: {e}")))
    }

    fn levels(&self, flag: &Option<String>, spin: Spin) -> CliResult<Vec<usize>> {
        let levels = match self.text(flag, "level") {
            Some(t) => parse_levels(&t)?,
            None => spin.levels().collect(),
        };
        for &r in &levels {
            spin.check_level(r).map_err(|e| CliError::usage(format!("--level: {e}")))?;
        }
        Ok(levels)
    }

    fn path(&self, flag: &Option<PathBuf>, key: &str) -> Option<PathBuf> {
        flag.clone().or_else(|| self.cfg.raw(key).map(PathBuf::from))
    }

    fn count(&self, flag: Option<usize>, key: &str, default: usize) -> CliResult<usize> {
        Ok(pick(flag, self.cfg, key)?.unwrap_or(default))
    }
}

fn require_positive(key: &str, v: f64) -> CliResult<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::usage(format!("--{key} must be positive (got {v})")))
    }
}

#[derive(Debug, Clone, Args)]
pub struct DistanceArgs {
    /// First state, e.g. `1,0`.
    #[arg(long, allow_hyphen_values = true)]
    pub psi: Option<String>,
    /// Second state, e.g. `1,1` (normalized on input).
    #[arg(long, allow_hyphen_values = true)]
    pub phi: Option<String>,
    /// State-list file; its first two states are compared.
    #[arg(long)]
    pub states: Option<PathBuf>,
}

pub fn distance(args: &DistanceArgs, cfg: &Config) -> CliResult<Table> {
    let s = Settings { cfg };
    let (psi, phi) = match (s.text(&args.psi, "psi"), s.text(&args.phi, "phi"), s.path(&args.states, "states")) {
        (Some(a), Some(b), None) => (parse_inline_state("--psi", &a)?, parse_inline_state("--phi", &b)?),
        (None, None, Some(path)) => {
            let states = read_states(&path)?;
            if states.len() < 2 {
                return Err(CliError::syntax(&path.display().to_string(), 1, 1, "need two states"));
            }
            (states[0].clone(), states[1].clone())
        }
        _ => return Err(CliError::usage("give either --psi and --phi, or --states")),
    };
    let delta = ray_distance(&psi, &phi)?;
    let f = fidelity(&psi, &phi)?;
    let c = (0.5 * delta).cos();
    let mut table = Table::new(vec!["delta", "fidelity", "cos2_residual"]);
    table.push(vec![delta.into(), f.into(), (c * c - f).abs().into()]);
    Ok(table)
}

#[derive(Debug, Clone, Args)]
pub struct PolygonArgs {
    /// State-list file with the polygon vertices (closed on the first state).
    #[arg(long)]
    pub states: Option<PathBuf>,
    /// Geodesic samples per edge for the refined polygon.
    #[arg(long)]
    pub refine: Option<usize>,
}

pub fn polygon(args: &PolygonArgs, cfg: &Config) -> CliResult<Table> {
    let s = Settings { cfg };
    let path = s
        .path(&args.states, "states")
        .ok_or_else(|| CliError::usage("--states is required"))?;
    let k = s.count(args.refine, "refine", 1000)?;
    if k < 2 {
        return Err(CliError::usage("--refine must be at least 2"));
    }
    let loop_path = DiscreteRayPath::closing(read_states(&path)?)?;
    let holonomy = discrete_holonomy(&loop_path)?.geometric;
    let jumps = jump_sequence_phase(loop_path.states())?.geometric;
    let geodesic = if loop_path.len() < 2 {
        0.0
    } else {
        let refined = geodesic_polygon(&loop_path, k)?;
        horizontal_lift(&refined, loop_path.first())?
            .holonomy
            .map(|p| p.geometric)
            .unwrap_or(0.0)
    };
    let mut table = Table::new(vec![
        "discrete_holonomy",
        "jump_sequence_phase",
        "geodesic_polygon_holonomy",
        "holonomy_minus_jump",
        "holonomy_minus_geodesic",
        "jump_minus_geodesic",
    ]);
    table.push(vec![
        holonomy.into(),
        jumps.into(),
        geodesic.into(),
        wrap_phase(holonomy - jumps).into(),
        wrap_phase(holonomy - geodesic).into(),
        wrap_phase(jumps - geodesic).into(),
    ]);
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Model {
    #[value(name = "spin-J")]
    SpinJ,
    #[value(name = "custom-matrix-list")]
    CustomMatrixList,
}

impl std::str::FromStr for Model {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        <Self as ValueEnum>::from_str(s, false)
    }
}

#[derive(Debug, Clone, Args)]
pub struct BerryArgs {
    /// Hamiltonian family.
    #[arg(long, value_enum)]
    pub model: Option<Model>,
    /// Spin quantum number, e.g. `1/2`, `1`, `3/2`.
    #[arg(long = "J")]
    pub j: Option<String>,
    /// Level frequency scale.
    #[arg(long, allow_hyphen_values = true)]
    pub omega0: Option<String>,
    /// Latitudes: `a,b,c` or `start:stop:count` (accepts `pi/3` etc.).
    #[arg(long)]
    pub theta: Option<String>,
    /// Starting azimuth of each latitude loop.
    #[arg(long, allow_hyphen_values = true)]
    pub chi0: Option<String>,
    /// Levels (default: all).
    #[arg(long)]
    pub level: Option<String>,
    /// Curve samples (per matrix segment for custom-matrix-list).
    #[arg(long)]
    pub samples: Option<usize>,
    /// Matrix-list file for custom-matrix-list.
    #[arg(long)]
    pub matrices: Option<PathBuf>,
}

pub fn berry(args: &BerryArgs, cfg: &Config) -> CliResult<Table> {
    let s = Settings { cfg };
    let model = pick(args.model, cfg, "model")?.unwrap_or(Model::SpinJ);
    if model == Model::CustomMatrixList {
        return berry_custom(args, &s);
    }
    let spin = s.spin(&args.j)?;
    let omega0 = s.number(&args.omega0, "omega0", 1.0)?;
    let chi0 = s.number(&args.chi0, "chi0", 0.0)?;
    let thetas = s.list(&args.theta, "theta")?.unwrap_or_else(|| vec![PI / 2.0]);
    let levels = s.levels(&args.level, spin)?;
    let samples = s.count(args.samples, "samples", 10_000)?;
    if samples < 3 {
        return Err(CliError::usage("--samples must be at least 3"));
    }
    let fam = SpinFamily::new(spin, omega0)?;
    let cells: Vec<(f64, usize)> = thetas
        .iter()
        .flat_map(|&t| levels.iter().map(move |&r| (t, r)))
        .collect();
    let rows = cells
        .par_iter()
        .map(|&(theta, r)| -> CliResult<Vec<Cell>> {
            let curve = ParameterCurve::latitude(theta, chi0, 1.0, samples)?;
            let numeric = berry_phase(&fam, r, &curve)?.geometric;
            let analytic = -fam.m_of_level(r) * TAU * (1.0 - theta.cos());
            let omega = solid_angle(&curve)?;
            Ok(vec![
                theta.into(),
                spin.to_string().into(),
                r.into(),
                numeric.into(),
                analytic.into(),
                omega.into(),
                (numeric - analytic).abs().into(),
            ])
        })
        .collect::<CliResult<Vec<_>>>()?;
    let mut table = Table::new(vec![
        "theta",
        "J",
        "r",
        "phase_numeric",
        "phase_analytic",
        "solid_angle",
        "abs_error",
    ]);
    rows.into_iter().for_each(|r| table.push(r));
    Ok(table)
}

fn berry_custom(args: &BerryArgs, s: &Settings<'_>) -> CliResult<Table> {
    let path = s
        .path(&args.matrices, "matrices")
        .ok_or_else(|| CliError::usage("--matrices is required for custom-matrix-list"))?;
    let matrices = crate::input::parse_matrices(&path.display().to_string(), &read_file(&path)?)?;
    let fam = MatrixListFamily::new(matrices, true)?;
    let refine = s.count(args.samples, "samples", 1000)?;
    let curve = fam.curve(refine.max(1))?;
    let levels: Vec<usize> = match s.text(&args.level, "level") {
        Some(t) => parse_levels(&t)?,
        None => (0..fam.dim()).collect(),
    };
    if let Some(&bad) = levels.iter().find(|&&r| r >= fam.dim()) {
        return Err(CliError::usage(format!("--level {bad} out of range for dimension {}", fam.dim())));
    }
    let rows = levels
        .par_iter()
        .map(|&r| -> CliResult<Vec<Cell>> {
            let phase = berry_phase(&fam, r, &curve)?;
            Ok(vec![r.into(), phase.geometric.into(), phase.geometric_principal.into()])
        })
        .collect::<CliResult<Vec<_>>>()?;
    let mut table = Table::new(vec!["r", "phase_numeric", "phase_principal"]);
    rows.into_iter().for_each(|r| table.push(r));
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Initial {
    /// Eigenvectors of the rotating-frame generator (the cyclic states).
    Cyclic,
    /// Eigenvectors of the partner Hamiltonian built from the stated map.
    Partner,
}

impl std::str::FromStr for Initial {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        <Self as ValueEnum>::from_str(s, true)
    }
}

#[derive(Debug, Clone, Args)]
pub struct AaArgs {
    /// Spin quantum number.
    #[arg(long = "J")]
    pub j: Option<String>,
    /// Levels (default: all).
    #[arg(long)]
    pub level: Option<String>,
    /// Drive ratios `ω/ω₀` in (0, 1): list or `start:stop:count`.
    #[arg(long)]
    pub s: Option<String>,
    /// Values of `cos θ` (default 0).
    #[arg(long, allow_hyphen_values = true)]
    pub u: Option<String>,
    /// Polar angles instead of `--u`.
    #[arg(long)]
    pub theta: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub chi0: Option<String>,
    #[arg(long)]
    pub omega0: Option<String>,
    /// RK4 steps per period.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Initial state construction.
    #[arg(long, value_enum)]
    pub initial: Option<Initial>,
    /// Ray-distance threshold for accepting the run as cyclic.
    #[arg(long = "cyclicity-tol")]
    pub cyclicity_tol: Option<String>,
}

pub fn aa(args: &AaArgs, cfg: &Config) -> CliResult<Table> {
    let st = Settings { cfg };
    let spin = st.spin(&args.j)?;
    let levels = st.levels(&args.level, spin)?;
    let s_values = st.list(&args.s, "s")?.unwrap_or_else(|| vec![0.5]);
    let u_values = match (st.list(&args.u, "u")?, st.list(&args.theta, "theta")?) {
        (Some(_), Some(_)) => return Err(CliError::usage("give --u or --theta, not both")),
        (Some(u), None) => u,
        (None, Some(t)) => t.iter().map(|t| t.cos()).collect(),
        (None, None) => vec![0.0],
    };
    let chi0 = st.number(&args.chi0, "chi0", 0.0)?;
    let omega0 = require_positive("omega0", st.number(&args.omega0, "omega0", 1.0)?)?;
    let steps = st.count(args.steps, "steps", 10_000)?;
    let initial = pick(args.initial, cfg, "initial")?.unwrap_or(Initial::Cyclic);
    let tol = st.number(&args.cyclicity_tol, "cyclicity-tol", CYCLICITY_TOL)?;
    for &s in &s_values {
        for &u in &u_values {
            SigmaParams::new(s, u, chi0)?;
            if s == 0.0 {
                return Err(CliError::usage("--s must be positive: the drive period is 2 pi / (s omega0)"));
            }
        }
    }
    let mut cells = Vec::new();
    for &s in &s_values {
        for &u in &u_values {
            for &r in &levels {
                cells.push((s, u, r));
            }
        }
    }
    let rows = cells
        .par_iter()
        .map(|&(s, u, r)| -> CliResult<Vec<Cell>> {
            let field = RotatingField::new(SpinFamily::new(spin, omega0)?, s, u.clamp(-1.0, 1.0).acos(), chi0)?;
            let psi0 = match initial {
                Initial::Cyclic => field.cyclic_state(r)?,
                Initial::Partner => field.partner_state(r)?,
            };
            let traj = field.integrate(&psi0, steps)?;
            let (_, residual) = cyclicity_residual(&traj);
            let phase = field.aa_phase(&traj, r, tol)?.geometric;
            let analytic = aa_phase_analytic(spin, r, s, u)?;
            Ok(vec![
                s.into(),
                u.into(),
                spin.to_string().into(),
                r.into(),
                phase.into(),
                analytic.into(),
                residual.into(),
                (phase - analytic).abs().into(),
                field.cyclic_aa_phase(r)?.into(),
            ])
        })
        .collect::<CliResult<Vec<_>>>()?;
    let mut table = Table::new(vec![
        "s",
        "u",
        "J",
        "r",
        "phi_integrated",
        "phi_analytic",
        "residual_cyclicity",
        "abs_error",
        "phi_rotating_frame",
    ]);
    rows.into_iter().for_each(|r| table.push(r));
    Ok(table)
}

#[derive(Debug, Clone, Args)]
pub struct CurvatureArgs {
    #[arg(long = "J")]
    pub j: Option<String>,
    /// Single level (default 0).
    #[arg(long)]
    pub level: Option<usize>,
    /// Plaquette side (default pi/100).
    #[arg(long)]
    pub h: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub omega0: Option<String>,
}

pub fn curvature(args: &CurvatureArgs, cfg: &Config) -> CliResult<Table> {
    let s = Settings { cfg };
    let spin = s.spin(&args.j)?;
    let level = pick(args.level, cfg, "level")?.unwrap_or(0);
    spin.check_level(level).map_err(|e| CliError::usage(format!("--level: {e}")))?;
    let h = require_positive("h", s.number(&args.h, "h", PI / 100.0)?)?;
    let omega0 = s.number(&args.omega0, "omega0", 1.0)?;
    let fam = SpinFamily::new(spin, omega0)?;
    let grid = curvature_grid_with_step(&fam, level, h)?;
    let m = fam.m_of_level(level);
    let mut table = Table::new(vec!["theta", "chi", "F_numeric", "F_analytic"]);
    for c in &grid.cells {
        table.push(vec![
            c.theta.into(),
            c.chi.into(),
            c.curvature.into(),
            (m * c.theta.sin()).into(),
        ]);
    }
    let flux = grid.total_flux();
    let expected = 2.0 * TAU * m;
    table.summary = vec![
        ("total_flux", flux.into()),
        ("expected_flux", expected.into()),
        ("deviation", (flux - expected).into()),
    ];
    Ok(table)
}

#[derive(Debug, Clone, Args)]
pub struct JumpArgs {
    /// State-list file; the first state is projected through every later one.
    #[arg(long)]
    pub states: Option<PathBuf>,
}

fn format_state(s: &StateVector) -> String {
    s.amplitudes()
        .iter()
        .map(|z| {
            let im = format_real(z.im);
            let sign = if im.starts_with('-') { "" } else { "+" };
            format!("{}{sign}{im}i", format_real(z.re))
        })
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn jump(args: &JumpArgs, cfg: &Config) -> CliResult<Table> {
    let s = Settings { cfg };
    let path = s
        .path(&args.states, "states")
        .ok_or_else(|| CliError::usage("--states is required"))?;
    let states = read_states(&path)?;
    let first = states[0].clone();
    let mut table = Table::new(vec!["step", "probability", "cumulative_probability", "phase_vs_start", "state"]);
    let mut current = first.clone();
    let mut cumulative = 1.0;
    table.push(vec![0usize.into(), 1.0.into(), 1.0.into(), 0.0.into(), format_state(&current).into()]);
    for (i, target) in states.iter().enumerate().skip(1) {
        let p = fidelity(&current, target)?;
        current = quantum_jump(&current, target).map_err(|e| match e {
            holonomy::Error::NotComparable { overlap, .. } => holonomy::Error::NotComparable {
                overlap,
                link: Some(i - 1),
            },
            other => other,
        })?;
        cumulative *= p;
        let phase = first.inner(&current)?.arg();
        table.push(vec![i.into(), p.into(), cumulative.into(), phase.into(), format_state(&current).into()]);
    }
    if states.len() > 1 && ray_distance(&first, states.last().expect("non-empty"))? <= CLOSURE_TOL {
        table.summary = vec![("loop_phase", jump_sequence_phase(&states)?.geometric.into())];
    }
    Ok(table)
}
