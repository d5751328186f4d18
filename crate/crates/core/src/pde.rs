//! Finite-volume solver for `∂t v = Δ(v^m) + div(x v)` on a line segment
//! (`d = 1`, any shift) or a ball with radial symmetry (`d ≥ 2`, no shift).
//!
//! The equation is written as `∂t v = div(v ∇μ)` with the chemical potential
//! `μ = m/(m−1) v^{m−1} + |x|²/2` (`ln v + |x|²/2` when `m = 1`). Each face
//! carries the velocity `u = −Δμ/Δx` and the explicit first-order flux
//! `u · v_upwind`; fluxes vanish at the outer wall and, through the zero face
//! measure, at the radial origin. Any grid state with constant `μ` is then
//! an exact discrete equilibrium, and it is used as the reference `v∞`.
//!
//! For `m ≥ 1` the update is explicit. For `m < 1` the diffusivity
//! `m v^{m−1}` grows without bound in the tails, so the same flux is solved
//! implicitly with `μ` linearised about the current state.

use serde::Serialize;

use crate::barenblatt::{ModelParams, ProfileShape, Regime};
use crate::dynamics::{flow_state, solution_density, FlowState};
use crate::error::{domain, Error, Result};
use crate::format::ser_num;
use crate::oracles::quadrature::kronrod15;
use crate::special::ln_sphere_surface;

/// Cumulative mass removed by clipping before a step is rejected.
pub const MAX_CLIPPED_MASS: f64 = 1e-6;

/// Minimum number of cells across the core of the initial profile.
pub const MIN_CORE_CELLS: f64 = 16.0;

/// Courant number of [`cfl_dt`].
pub const COURANT: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Geometry {
    /// `[−L, L]`, `d = 1`.
    Line { half_width: f64 },
    /// `[0, R]` in the radius, `d ≥ 2`.
    Radial { radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub geometry: Geometry,
    pub cells: usize,
}

/// Cell averages of a density on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    params: ModelParams,
    spec: GridSpec,
    x0_norm: f64,
    dx: f64,
    /// Cell centres.
    pub centers: Vec<f64>,
    /// Interface positions, `cells + 1` of them.
    faces: Vec<f64>,
    /// Cell measures (`dx`, or `(r_{i+1}^d − r_i^d)/d`).
    volumes: Vec<f64>,
    /// Interface measures (`1`, or `r^{d−1}`).
    areas: Vec<f64>,
    /// `|S^{d−1}|` in the radial case, `1` on the line.
    surface: f64,
    pub values: Vec<f64>,
    /// Discrete equilibrium: the `v∞` profile with its constant `c` refitted
    /// so that the grid mass is one.
    reference: Vec<f64>,
    /// `v∞^m` per cell (`v∞ ln v∞` when Gaussian).
    reference_energy: Vec<f64>,
    pub time: f64,
    /// Mass added back by clipping negative values, accumulated.
    pub clipped_mass: f64,
}

impl GridDensity {
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn x0_norm(&self) -> f64 {
        self.x0_norm
    }

    pub fn mass(&self) -> f64 {
        self.surface * dot(&self.values, &self.volumes)
    }

    fn energy_of(&self, v: f64) -> f64 {
        if self.params.regime() == Regime::Gaussian {
            if v > 0.0 {
                v * v.ln()
            } else {
                0.0
            }
        } else {
            v.powf(self.params.m())
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Mesh {
    dx: f64,
    centers: Vec<f64>,
    faces: Vec<f64>,
    volumes: Vec<f64>,
    areas: Vec<f64>,
    surface: f64,
}

fn mesh(d: usize, spec: GridSpec) -> Result<Mesh> {
    let n = spec.cells;
    if n < 4 {
        return Err(domain(format!("need at least 4 cells, got {n}")));
    }
    match spec.geometry {
        Geometry::Line { half_width } => {
            if d != 1 {
                return Err(domain("line geometry requires d = 1"));
            }
            if !(half_width > 0.0 && half_width.is_finite()) {
                return Err(domain("half width must be positive"));
            }
            let dx = 2.0 * half_width / n as f64;
            let faces: Vec<f64> = (0..=n).map(|i| -half_width + i as f64 * dx).collect();
            Ok(Mesh {
                dx,
                centers: (0..n).map(|i| -half_width + (i as f64 + 0.5) * dx).collect(),
                faces,
                volumes: vec![dx; n],
                areas: vec![1.0; n + 1],
                surface: 1.0,
            })
        }
        Geometry::Radial { radius } => {
            if d < 2 {
                return Err(domain("radial geometry requires d ≥ 2"));
            }
            if !(radius > 0.0 && radius.is_finite()) {
                return Err(domain("radius must be positive"));
            }
            let dx = radius / n as f64;
            let dd = d as f64;
            let faces: Vec<f64> = (0..=n).map(|i| i as f64 * dx).collect();
            let volumes = faces
                .windows(2)
                .map(|w| (w[1].powi(d as i32) - w[0].powi(d as i32)) / dd)
                .collect();
            let areas = faces.iter().map(|r| r.powi(d as i32 - 1)).collect();
            Ok(Mesh {
                dx,
                centers: (0..n).map(|i| (i as f64 + 0.5) * dx).collect(),
                faces,
                volumes,
                areas,
                surface: ln_sphere_surface(d).exp(),
            })
        }
    }
}

/// Cell averages of a radial density `f(distance)`, with distance measured
/// from `shift` on the line or from the origin in the radial case. Cells are
/// split at the support edge `edge` when given.
fn cell_averages(mesh: &Mesh, d: usize, radial: bool, shift: f64, edge: Option<f64>, f: impl Fn(f64) -> f64) -> Vec<f64> {
    let weight = |x: f64| if radial { x.powi(d as i32 - 1) } else { 1.0 };
    let g = |x: f64| {
        let dist = if radial { x } else { (x - shift).abs() };
        f(dist) * weight(x)
    };
    let mut cuts = Vec::new();
    if let Some(e) = edge {
        if radial {
            cuts.push(e);
        } else {
            cuts.push(shift - e);
            cuts.push(shift + e);
        }
    }
    mesh.faces
        .windows(2)
        .zip(&mesh.volumes)
        .map(|(w, vol)| {
            let (a, b) = (w[0], w[1]);
            let mut pts = vec![a];
            pts.extend(cuts.iter().copied().filter(|&c| c > a && c < b));
            pts.push(b);
            let total: f64 = pts.windows(2).map(|p| kronrod15(g, p[0], p[1])).sum();
            total / vol
        })
        .collect()
}

fn renormalize(values: &mut [f64], volumes: &[f64], surface: f64) -> Result<()> {
    let mass = surface * dot(values, volumes);
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(Error::Resolution(format!("grid captures no mass (mass = {mass})")));
    }
    values.iter_mut().for_each(|v| *v /= mass);
    Ok(())
}

/// Closed-form cell averages of `v(t, ·)` on the grid, unnormalised.
fn exact_averages(mesh: &Mesh, state: &FlowState, geometry: Geometry) -> Vec<f64> {
    let d = state.params().d();
    let radial = matches!(geometry, Geometry::Radial { .. });
    cell_averages(mesh, d, radial, state.h_norm, state.support_radius(), |r| {
        solution_density(state, r)
    })
}

/// `(c̃ ± b x_i²)^{∓p}` (Gaussian: `K e^{−x_i²/2}`) with `c̃` or `K` fixed by
/// unit grid mass; `μ` is constant on it.
fn discrete_equilibrium(params: &ModelParams, mesh: &Mesh) -> Result<Vec<f64>> {
    let stat = params.stationary_profile();
    let b = stat.scale();
    let profile = |ln_c: f64| -> Vec<f64> {
        let c = ln_c.exp();
        mesh.centers
            .iter()
            .map(|&x| match stat.shape() {
                ProfileShape::FullSpace { p } => (-p * (c + b * x * x).ln()).exp(),
                ProfileShape::Compact { p } => {
                    let inner = c - b * x * x;
                    if inner > 0.0 {
                        (p * inner.ln()).exp()
                    } else {
                        0.0
                    }
                }
                ProfileShape::Gaussian { .. } => (-0.5 * x * x).exp(),
            })
            .collect()
    };
    let mass = |v: &[f64]| mesh.surface * dot(v, &mesh.volumes);
    let mut values = match stat.shape() {
        ProfileShape::Gaussian { .. } => profile(0.0),
        shape => {
            // grid mass is monotone in ln c̃: decreasing for full space,
            // increasing for compact
            let increasing = matches!(shape, ProfileShape::Compact { .. });
            let excess = |ln_c: f64| {
                let e = mass(&profile(ln_c)) - 1.0;
                if increasing {
                    e
                } else {
                    -e
                }
            };
            let c0 = stat.ln_norm();
            let (mut lo, mut hi) = (c0 - 1.0, c0 + 1.0);
            let mut guard = 0;
            while excess(lo) > 0.0 && guard < 200 {
                lo -= 2.0 * (hi - lo);
                guard += 1;
            }
            while excess(hi) < 0.0 && guard < 400 {
                hi += 2.0 * (hi - lo);
                guard += 1;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if excess(mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            profile(0.5 * (lo + hi))
        }
    };
    renormalize(&mut values, &mesh.volumes, mesh.surface)?;
    Ok(values)
}

/// The grid density whose cells hold the averages of the closed-form
/// solution at time `t0`, renormalised to unit mass.
pub fn init_from_closed_form(params: &ModelParams, t0: f64, x0_norm: f64, spec: GridSpec) -> Result<GridDensity> {
    if !(t0 > 0.0 && t0.is_finite()) {
        return Err(domain(format!("initial time must be positive, got {t0}")));
    }
    let d = params.d();
    if matches!(spec.geometry, Geometry::Radial { .. }) && x0_norm != 0.0 {
        return Err(Error::Precondition(
            "radial geometry needs a centred initial datum (x0 = 0)".into(),
        ));
    }
    let mesh = mesh(d, spec)?;
    let state = flow_state(params, t0, x0_norm)?;
    let stat = params.stationary_profile();
    let core = match params.regime() {
        Regime::Gaussian => state.a,
        _ => state.a * (stat.norm() / stat.scale()).sqrt(),
    };
    if core / mesh.dx < MIN_CORE_CELLS {
        return Err(Error::Resolution(format!(
            "core width {core} spans {} cells, need at least {MIN_CORE_CELLS}",
            core / mesh.dx
        )));
    }
    let mut values = exact_averages(&mesh, &state, spec.geometry);
    renormalize(&mut values, &mesh.volumes, mesh.surface)?;
    let reference = discrete_equilibrium(params, &mesh)?;
    let mut grid = GridDensity {
        params: *params,
        spec,
        x0_norm,
        dx: mesh.dx,
        centers: mesh.centers,
        faces: mesh.faces,
        volumes: mesh.volumes,
        areas: mesh.areas,
        surface: mesh.surface,
        values,
        reference,
        reference_energy: Vec::new(),
        time: t0,
        clipped_mass: 0.0,
    };
    grid.reference_energy = grid.reference.iter().map(|&u| grid.energy_of(u)).collect();
    Ok(grid)
}

/// `v∞` on the grid, at time `t0` (only used for bookkeeping).
pub fn init_stationary(params: &ModelParams, t0: f64, spec: GridSpec) -> Result<GridDensity> {
    let mut grid = init_from_closed_form(params, t0, 0.0, spec)?;
    grid.values = grid.reference.clone();
    Ok(grid)
}

fn diffusion_factor(grid: &GridDensity) -> f64 {
    match grid.spec.geometry {
        Geometry::Line { .. } => 2.0,
        Geometry::Radial { .. } => (grid.params.d() as f64).max(2.0),
    }
}

/// Face velocities `u = −Δμ/Δx` with `μ = m/(m−1) v^{m−1} + |x|²/2`
/// (`ln v + |x|²/2` when Gaussian), and the cell energies `v^m`
/// (`v ln v`). Faces `0` and `n` are walls.
fn velocities(grid: &GridDensity) -> (Vec<f64>, Vec<f64>) {
    let n = grid.values.len();
    let gaussian = grid.params.regime() == Regime::Gaussian;
    let m = grid.params.m();
    let k = if gaussian { 1.0 } else { m / grid.params.m_minus_one() };
    let mut mu = vec![0.0; n];
    let mut energies = vec![0.0; n];
    for i in 0..n {
        let v = grid.values[i];
        let x = grid.centers[i];
        let chem = if gaussian {
            energies[i] = grid.energy_of(v);
            v.max(f64::MIN_POSITIVE).ln()
        } else if v > 0.0 {
            let w = v.powf(m);
            energies[i] = w;
            k * w / v
        } else if m > 1.0 {
            0.0
        } else {
            k * f64::MIN_POSITIVE.powf(m - 1.0)
        };
        mu[i] = chem + 0.5 * x * x;
    }
    let mut u = vec![0.0; n + 1];
    for f in 1..n {
        u[f] = -(mu[f] - mu[f - 1]) / grid.dx;
    }
    (u, energies)
}

fn explicit_update(grid: &GridDensity, dt: f64, u: &[f64]) -> Vec<f64> {
    let n = grid.values.len();
    let v = &grid.values;
    // area-weighted upwind flux through each face
    let mut flux = vec![0.0; n + 1];
    for f in 1..n {
        let up = if u[f] > 0.0 { v[f - 1] } else { v[f] };
        flux[f] = grid.areas[f] * u[f] * up;
    }
    (0..n)
        .map(|i| v[i] - dt / grid.volumes[i] * (flux[i + 1] - flux[i]))
        .collect()
}

/// Backward Euler with `μ` linearised about the current state,
/// `μ_new = μ + μ'(v)(v_new − v)`, and upwind densities frozen. The matrix
/// has column sums `V_i/dt`, so mass is conserved and a constant-`μ` state
/// is reproduced exactly.
fn implicit_update(grid: &GridDensity, dt: f64, u: &[f64], energies: &[f64]) -> Vec<f64> {
    let n = grid.values.len();
    let v = &grid.values;
    let m = grid.params.m();
    let k = m / grid.params.m_minus_one();
    // μ' = m v^{m−2} and ν = μ − μ' v
    let mut slope = vec![0.0; n];
    let mut nu = vec![0.0; n];
    for i in 0..n {
        // v^{m−1} from the energy v^m already computed
        let (vi, p) = if v[i] > 0.0 {
            (v[i], energies[i] / v[i])
        } else {
            (f64::MIN_POSITIVE, f64::MIN_POSITIVE.powf(m - 1.0))
        };
        slope[i] = m * p / vi;
        let x = grid.centers[i];
        nu[i] = k * p + 0.5 * x * x - slope[i] * vi;
    }
    let mut t = vec![0.0; n + 1];
    for f in 1..n {
        let up = if u[f] > 0.0 { v[f - 1] } else { v[f] };
        t[f] = grid.areas[f] * up / grid.dx;
    }
    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    for i in 0..n {
        let vol = grid.volumes[i] / dt;
        diag[i] = vol + (t[i] + t[i + 1]) * slope[i];
        let mut r = vol * v[i];
        if i > 0 {
            lower[i] = -t[i] * slope[i - 1];
            r -= t[i] * (nu[i] - nu[i - 1]);
        }
        if i + 1 < n {
            upper[i] = -t[i + 1] * slope[i + 1];
            r += t[i + 1] * (nu[i + 1] - nu[i]);
        }
        rhs[i] = r;
    }
    thomas(&lower, &diag, &upper, &rhs)
}

/// Tridiagonal solve without pivoting; the matrices built here are
/// column diagonally dominant.
fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let denom = diag[i] - lower[i] * c[i - 1];
        c[i] = upper[i] / denom;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / denom;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// Largest step that keeps every cell non-negative, halved.
fn positivity_dt(grid: &GridDensity, u: &[f64]) -> f64 {
    let n = grid.values.len();
    let mut rate = 0.0f64;
    for i in 0..n {
        let out = grid.areas[i + 1] * u[i + 1].max(0.0) + grid.areas[i] * (-u[i]).max(0.0);
        rate = rate.max(out / grid.volumes[i]);
    }
    if rate > 0.0 {
        0.5 / rate
    } else {
        f64::INFINITY
    }
}

fn parabolic_dt(grid: &GridDensity) -> f64 {
    let vmax = grid.values.iter().copied().fold(0.0, f64::max);
    let m = grid.params.m();
    let diff = if grid.params.regime() == Regime::Gaussian {
        1.0
    } else {
        m * vmax.powf(m - 1.0)
    };
    let xmax = grid.faces.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    let dx = grid.dx;
    COURANT * dx * dx / (diffusion_factor(grid) * diff).max(dx * xmax)
}

/// The smaller of `0.4 Δx² / max(κ m v_max^{m−1}, Δx |x|_max)` (with `κ = 2`
/// on the line and `max(2, d)` in the radial case) and half the step at
/// which an upwind update could first produce a negative value.
pub fn cfl_dt(grid: &GridDensity) -> f64 {
    let (u, _) = velocities(grid);
    parabolic_dt(grid).min(positivity_dt(grid, &u))
}

/// Discrete `H_m(v | v∞)` against the grid equilibrium.
pub fn discrete_entropy(grid: &GridDensity) -> f64 {
    let energies: Vec<f64> = grid.values.iter().map(|&v| grid.energy_of(v)).collect();
    entropy_from_energies(grid, &energies)
}

fn entropy_from_energies(grid: &GridDensity, energies: &[f64]) -> f64 {
    let scale = if grid.params.regime() == Regime::Gaussian {
        1.0
    } else {
        1.0 / grid.params.m_minus_one()
    };
    let mut sum = 0.0;
    for i in 0..grid.values.len() {
        let x = grid.centers[i];
        let term = scale * (energies[i] - grid.reference_energy[i])
            + 0.5 * x * x * (grid.values[i] - grid.reference[i]);
        sum += term * grid.volumes[i];
    }
    grid.surface * sum
}

/// Advances by `dt`; errors above the [`cfl_dt`] bound or when clipping has
/// removed more than [`MAX_CLIPPED_MASS`].
pub fn step(grid: &GridDensity, dt: f64) -> Result<GridDensity> {
    let (u, energies) = velocities(grid);
    Ok(advance(grid, dt, &u, &energies)?.0)
}

fn advance(grid: &GridDensity, dt: f64, u: &[f64], energies: &[f64]) -> Result<(GridDensity, f64)> {
    let bound = parabolic_dt(grid).min(positivity_dt(grid, u));
    if !(dt > 0.0) || dt > bound * (1.0 + 1e-12) {
        return Err(Error::Stability(format!("time step {dt} exceeds the bound {bound}")));
    }
    let entropy = entropy_from_energies(grid, energies);
    let mut values = if grid.params.regime() == Regime::FastDiffusion {
        implicit_update(grid, dt, u, energies)
    } else {
        explicit_update(grid, dt, u)
    };
    let mut clipped = 0.0;
    for (val, vol) in values.iter_mut().zip(&grid.volumes) {
        if *val < 0.0 {
            clipped -= *val * vol;
            *val = 0.0;
        }
    }
    let clipped_mass = grid.clipped_mass + grid.surface * clipped;
    if clipped_mass > MAX_CLIPPED_MASS {
        return Err(Error::Stability(format!(
            "clipping removed mass {clipped_mass}, above {MAX_CLIPPED_MASS}"
        )));
    }
    let mut next = grid.clone();
    next.values = values;
    next.time = grid.time + dt;
    next.clipped_mass = clipped_mass;
    Ok((next, entropy))
}

/// `∫ |v_grid − v(t)|` against the closed-form cell averages at the grid time.
pub fn l1_error(grid: &GridDensity) -> Result<f64> {
    let state = flow_state(&grid.params, grid.time, grid.x0_norm)?;
    let mesh = Mesh {
        dx: grid.dx,
        centers: grid.centers.clone(),
        faces: grid.faces.clone(),
        volumes: grid.volumes.clone(),
        areas: grid.areas.clone(),
        surface: grid.surface,
    };
    let exact = exact_averages(&mesh, &state, grid.spec.geometry);
    Ok(grid.surface
        * grid
            .values
            .iter()
            .zip(&exact)
            .zip(&grid.volumes)
            .map(|((a, b), vol)| (a - b).abs() * vol)
            .sum::<f64>())
}

/// `∫ |v_grid − v∞_grid|`.
pub fn l1_to_reference(grid: &GridDensity) -> f64 {
    grid.surface
        * grid
            .values
            .iter()
            .zip(&grid.reference)
            .zip(&grid.volumes)
            .map(|((a, b), vol)| (a - b).abs() * vol)
            .sum::<f64>()
}

/// Centre of the outermost cell whose value exceeds `threshold`.
pub fn front_position(grid: &GridDensity, threshold: f64) -> Option<f64> {
    grid.values
        .iter()
        .rposition(|&v| v > threshold)
        .map(|i| grid.centers[i])
}

/// One stored state of a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    #[serde(serialize_with = "ser_num")]
    pub time: f64,
    pub values: Vec<f64>,
    #[serde(serialize_with = "ser_num")]
    pub mass: f64,
    #[serde(serialize_with = "ser_num")]
    pub entropy: f64,
}

/// Diagnostics collected while stepping.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    pub steps: usize,
    /// Largest single-step increase of the discrete entropy (≤ 0 when
    /// monotone).
    #[serde(serialize_with = "ser_num")]
    pub max_entropy_increase: f64,
    /// Largest `|mass − 1|` over all steps.
    #[serde(serialize_with = "ser_num")]
    pub max_mass_drift: f64,
    /// Largest single-step `|Δ mass|`.
    #[serde(serialize_with = "ser_num")]
    pub max_step_mass_change: f64,
    #[serde(serialize_with = "ser_num")]
    pub clipped_mass: f64,
}

fn snapshot(grid: &GridDensity) -> Snapshot {
    Snapshot {
        time: grid.time,
        values: grid.values.clone(),
        mass: grid.mass(),
        entropy: discrete_entropy(grid),
    }
}

/// Steps from the grid time through each of `times` (ascending), recording
/// a snapshot at the start and at every requested time.
pub fn evolve(grid: GridDensity, times: &[f64]) -> Result<(GridDensity, Trajectory)> {
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < grid.time) {
        return Err(domain("output times must be ascending and not before the start"));
    }
    let mut grid = grid;
    let mut traj = Trajectory {
        snapshots: vec![snapshot(&grid)],
        steps: 0,
        max_entropy_increase: f64::NEG_INFINITY,
        max_mass_drift: (grid.mass() - 1.0).abs(),
        max_step_mass_change: 0.0,
        clipped_mass: 0.0,
    };
    let mut prev_entropy: Option<f64> = None;
    let mut prev_mass = grid.mass();
    for &target in times {
        while grid.time < target {
            let remaining = target - grid.time;
            let (u, energies) = velocities(&grid);
            let bound = parabolic_dt(&grid).min(positivity_dt(&grid, &u));
            let dt = if remaining <= bound * (1.0 + 1e-9) { remaining.min(bound) } else { bound };
            let (next, h) = advance(&grid, dt, &u, &energies)?;
            if let Some(p) = prev_entropy {
                traj.max_entropy_increase = traj.max_entropy_increase.max(h - p);
            }
            prev_entropy = Some(h);
            grid = next;
            if remaining <= bound * (1.0 + 1e-9) {
                grid.time = target;
            }
            traj.steps += 1;
            let mass = grid.mass();
            traj.max_mass_drift = traj.max_mass_drift.max((mass - 1.0).abs());
            traj.max_step_mass_change = traj.max_step_mass_change.max((mass - prev_mass).abs());
            prev_mass = mass;
        }
        traj.snapshots.push(snapshot(&grid));
    }
    if let Some(p) = prev_entropy {
        let h = discrete_entropy(&grid);
        traj.max_entropy_increase = traj.max_entropy_increase.max(h - p);
    }
    traj.clipped_mass = grid.clipped_mass;
    Ok((grid, traj))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(cells: usize, half_width: f64) -> GridSpec {
        GridSpec {
            geometry: Geometry::Line { half_width },
            cells,
        }
    }

    #[test]
    fn initial_mass_and_support() {
        let params = ModelParams::from_m(1, 1.5).unwrap();
        let g = init_from_closed_form(&params, 0.5, 1.0, line(800, 6.0)).unwrap();
        assert!((g.mass() - 1.0).abs() < 1e-10);
        let state = flow_state(&params, 0.5, 1.0).unwrap();
        let edge = state.support_radius().unwrap();
        for (x, v) in g.centers.iter().zip(&g.values) {
            if (x - state.h_norm).abs() > edge + g.dx() {
                assert_eq!(*v, 0.0);
            }
        }
        let r = GridSpec {
            geometry: Geometry::Radial { radius: 5.0 },
            cells: 400,
        };
        let params3 = ModelParams::from_m(3, 2.0).unwrap();
        let g = init_from_closed_form(&params3, 0.3, 0.0, r).unwrap();
        assert!((g.mass() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn coarse_grid_rejected() {
        let params = ModelParams::from_m(1, 0.7).unwrap();
        let e = init_from_closed_form(&params, 0.01, 0.0, line(64, 12.0));
        assert!(matches!(e, Err(Error::Resolution(_))));
    }

    #[test]
    fn stationary_state_is_kept() {
        for m in [0.7, 1.0, 1.5] {
            let params = ModelParams::from_m(1, m).unwrap();
            let g = init_stationary(&params, 10.0, line(400, 8.0)).unwrap();
            assert!(discrete_entropy(&g).abs() <= 1e-6);
            let mut cur = g;
            for _ in 0..1000 {
                let dt = cfl_dt(&cur);
                let before = cur.mass();
                cur = step(&cur, dt).unwrap();
                assert!((cur.mass() - before).abs() < 1e-10);
            }
            assert!(l1_to_reference(&cur) <= 1e-6, "m={m}: {}", l1_to_reference(&cur));
        }
    }

    #[test]
    fn step_above_bound_rejected() {
        let params = ModelParams::from_m(1, 1.5).unwrap();
        let g = init_from_closed_form(&params, 0.5, 0.0, line(200, 5.0)).unwrap();
        let dt = cfl_dt(&g);
        assert!(matches!(step(&g, 2.0 * dt), Err(Error::Stability(_))));
    }

    #[test]
    fn cfl_scaling() {
        let params = ModelParams::from_m(1, 1.5).unwrap();
        let a = init_from_closed_form(&params, 0.5, 0.0, line(200, 5.0)).unwrap();
        let b = init_from_closed_form(&params, 0.5, 0.0, line(400, 5.0)).unwrap();
        let ratio = cfl_dt(&a) / cfl_dt(&b);
        assert!((ratio - 4.0).abs() < 0.1, "{ratio}");
    }

    #[test]
    fn short_run_tracks_closed_form() {
        let params = ModelParams::from_m(1, 0.7).unwrap();
        let g = init_from_closed_form(&params, 0.05, 2.0, line(1024, 12.0)).unwrap();
        let (end, traj) = evolve(g, &[0.3]).unwrap();
        assert!(traj.max_entropy_increase <= 1e-8, "{}", traj.max_entropy_increase);
        assert!(traj.max_mass_drift < 1e-8);
        assert!(l1_error(&end).unwrap() < 2e-2);
    }
}
