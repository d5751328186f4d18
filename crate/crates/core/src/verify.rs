//! Named verification suites comparing the closed forms with the oracles.
//!
//! Every suite is deterministic for a given seed: random draws come from
//! seeded ChaCha20 streams and parallel work is collected in a fixed order.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::barenblatt::{ModelParams, Profile};
use crate::divergences::{
    entropy_flow, fisher_flow, w2_sq_flow, w2_sq_position_scale, EllipticMoments,
};
use crate::dynamics::flow_state;
use crate::error::{domain, Result};
use crate::format::ser_num;
use crate::linalg::Matrix;
use crate::oracles::checks::{
    entropy_production_check, entropy_quadrature, fisher_quadrature, lm_norm_quadrature,
    moment_quadrature,
};
use crate::oracles::sampling::{axis_point, mean_and_se, sample_barenblatt, SampleCloud};
use crate::oracles::transport::{ot_1d_quantile, ot_assignment, ProfileLaw};
use crate::pde::{
    cfl_dt, evolve, front_position, init_from_closed_form, init_stationary, l1_error,
    l1_to_reference, step, Geometry, GridSpec,
};

/// One pass/fail entry.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub id: String,
    /// What is being compared, in words.
    pub identity: String,
    #[serde(serialize_with = "ser_num")]
    pub measured: f64,
    #[serde(serialize_with = "ser_num")]
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckResult {
    /// Passes when `measured ≤ tolerance` (NaN fails).
    pub fn at_most(id: impl Into<String>, identity: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self {
            id: id.into(),
            identity: identity.into(),
            measured,
            tolerance,
            passed: measured <= tolerance,
        }
    }

    /// Passes when `measured ≥ tolerance`.
    pub fn at_least(id: impl Into<String>, identity: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self {
            id: id.into(),
            identity: identity.into(),
            measured,
            tolerance,
            passed: measured >= tolerance,
        }
    }

    /// Relative difference `|value/reference − 1|` against `tolerance`.
    pub fn relative(id: impl Into<String>, identity: impl Into<String>, value: f64, reference: f64, tolerance: f64) -> Self {
        Self::at_most(id, identity, (value / reference - 1.0).abs(), tolerance)
    }

    /// A check that could not be evaluated.
    pub fn failed(id: impl Into<String>, identity: impl Into<String>, tolerance: f64) -> Self {
        Self {
            id: id.into(),
            identity: identity.into(),
            measured: f64::NAN,
            tolerance,
            passed: false,
        }
    }
}

fn or_failed(
    id: String,
    identity: &str,
    tolerance: f64,
    r: Result<CheckResult>,
) -> CheckResult {
    r.unwrap_or_else(|_| CheckResult::failed(id, identity, tolerance))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub passed: bool,
    pub suites: Vec<SuiteReport>,
}

pub trait VerifySuite: Send + Sync {
    fn name(&self) -> &'static str;
    fn run(&self, seed: u64) -> Vec<CheckResult>;
}

/// Suites by name, in run order.
pub struct SuiteRegistry {
    suites: Vec<Box<dyn VerifySuite>>,
}

impl Default for SuiteRegistry {
    fn default() -> Self {
        Self {
            suites: vec![
                Box::new(Moments),
                Box::new(Transport),
                Box::new(EntropyProductionSuite),
                Box::new(Pde),
            ],
        }
    }
}

impl SuiteRegistry {
    pub fn empty() -> Self {
        Self { suites: Vec::new() }
    }

    pub fn register(&mut self, suite: Box<dyn VerifySuite>) {
        self.suites.retain(|s| s.name() != suite.name());
        self.suites.push(suite);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.suites.iter().map(|s| s.name()).collect()
    }

    /// Runs one suite, or every suite for `"all"`.
    pub fn run(&self, name: &str, seed: u64) -> Result<VerifyReport> {
        let chosen: Vec<&dyn VerifySuite> = if name == "all" {
            self.suites.iter().map(|s| s.as_ref()).collect()
        } else {
            let s = self
                .suites
                .iter()
                .find(|s| s.name() == name)
                .ok_or_else(|| domain(format!("unknown suite '{name}' (known: {:?}, all)", self.names())))?;
            vec![s.as_ref()]
        };
        let suites: Vec<SuiteReport> = chosen
            .par_iter()
            .map(|s| {
                let checks = s.run(seed);
                SuiteReport {
                    suite: s.name().to_string(),
                    passed: checks.iter().all(|c| c.passed),
                    checks,
                }
            })
            .collect();
        Ok(VerifyReport {
            seed,
            passed: suites.iter().all(|s| s.passed),
            suites,
        })
    }
}

/// An independent seed for replicate `k` of a suite.
fn derived_seed(seed: u64, k: u64) -> u64 {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(1 << 32 | k);
    rng.gen()
}

fn regime_grid() -> Vec<(&'static str, ModelParams)> {
    let mut out = Vec::new();
    for d in [3usize, 6, 12] {
        for m in [0.9, 0.95] {
            out.push(("fast", ModelParams::from_m(d, m).expect("valid grid point")));
        }
        out.push(("gaussian_from_m", ModelParams::from_m(d, 1.0).expect("valid grid point")));
        out.push(("gaussian_from_alpha", ModelParams::from_alpha(d, 0.5).expect("valid grid point")));
        for m in [1.5, 2.0] {
            out.push(("porous", ModelParams::from_m(d, m).expect("valid grid point")));
        }
    }
    out
}

/// Closed-form moments against quadrature and sampling.
pub struct Moments;

impl VerifySuite for Moments {
    fn name(&self) -> &'static str {
        "moments"
    }

    fn run(&self, seed: u64) -> Vec<CheckResult> {
        let mut jobs: Vec<(String, ModelParams, Profile)> = Vec::new();
        for (label, params) in regime_grid() {
            for which in [Profile::Unit, Profile::Stationary] {
                let name = match which {
                    Profile::Unit => "unit",
                    Profile::Stationary => "stationary",
                };
                jobs.push((
                    format!("quadrature/{label}/d={}/m={}/{name}", params.d(), params.m()),
                    params,
                    which,
                ));
            }
        }
        let identity = "max relative gap of M0, M2, M4, N_m against radial quadrature";
        let mut checks: Vec<CheckResult> = jobs
            .par_iter()
            .map(|(id, params, which)| {
                let r = (|| {
                    let prof = params.profile(*which);
                    let mut worst = 0.0f64;
                    for a in [0.0, 2.0, 4.0] {
                        let q = moment_quadrature(prof, a)?.value;
                        worst = worst.max((prof.moment(a)? / q - 1.0).abs());
                    }
                    let q = lm_norm_quadrature(prof, params.m())?.value;
                    worst = worst.max((prof.lm_norm(params.m())? / q - 1.0).abs());
                    Ok(CheckResult::at_most(id.clone(), identity, worst, 1e-8))
                })();
                or_failed(id.clone(), identity, 1e-8, r)
            })
            .collect();

        for d in [3usize, 10, 100] {
            for alpha in [0.25, 1.0] {
                let id = format!("virial/alpha={alpha}/d={d}");
                let identity = "M2 = d N_m for the stationary profile (relative)";
                let r = (|| {
                    let p = ModelParams::from_alpha(d, alpha)?;
                    let (m2, nm) = (p.m2()?, p.nm()?);
                    Ok(CheckResult::relative(id.clone(), identity, d as f64 * nm, m2, 1e-10))
                })();
                checks.push(or_failed(id, identity, 1e-10, r));
            }
        }

        for (k, m) in [0.85, 1.0, 1.5].into_iter().enumerate() {
            let id = format!("sampling/d=5/m={m}");
            let identity = "empirical M2 of 1e5 draws vs closed form, in standard errors";
            let r = (|| {
                let params = ModelParams::from_m(5, m)?;
                let cloud = sample_barenblatt(&params, 100_000, &[0.0; 5], derived_seed(seed, k as u64), Profile::Stationary)?;
                let (mean, se) = mean_and_se(&cloud.radial_powers(2.0));
                let gap = (mean - params.m2()?).abs();
                Ok(CheckResult::at_most(id.clone(), identity, gap / se, 3.0))
            })();
            checks.push(or_failed(id, identity, 3.0, r));
        }
        checks
    }
}

/// Transport distances against one-dimensional and assignment OT.
pub struct Transport;

/// Replicates and cloud size of the assignment check.
pub const ASSIGNMENT_REPLICATES: usize = 20;
pub const ASSIGNMENT_POINTS: usize = 512;

/// Mean and bootstrap standard error of the mean.
pub fn bootstrap_se(values: &[f64], resamples: usize, seed: u64) -> (f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| values[rng.gen_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    let mb = means.iter().sum::<f64>() / resamples as f64;
    let var = means.iter().map(|x| (x - mb) * (x - mb)).sum::<f64>() / (resamples as f64 - 1.0);
    (mean, var.sqrt())
}

/// `{T(X_σ(i))}` for a random permutation `σ`; the optimal matching
/// between a cloud and its image under a gradient-of-convex map is the
/// map itself, so the assignment must undo the shuffle.
pub fn shuffled_image(cloud: &SampleCloud, map: impl Fn(&[f64]) -> Vec<f64>, seed: u64) -> SampleCloud {
    let mut idx: Vec<usize> = (0..cloud.len()).collect();
    idx.shuffle(&mut ChaCha20Rng::seed_from_u64(seed));
    SampleCloud {
        points: idx.iter().map(|&i| map(&cloud.points[i])).collect(),
        seed,
        d: cloud.d,
        center: map(&cloud.center),
        label: "image".into(),
    }
}

/// Assignment OT between `n` draws of `v∞` and their image under the flow
/// map `x ↦ a x + h`, for each replicate seed.
pub fn flow_assignment_replicates(params: &ModelParams, t: f64, x0_norm: f64, n: usize, seeds: &[u64]) -> Result<Vec<f64>> {
    let state = flow_state(params, t, x0_norm)?;
    let d = params.d();
    let h = axis_point(d, state.h_norm);
    seeds
        .par_iter()
        .map(|&s| {
            let base = sample_barenblatt(params, n, &vec![0.0; d], s, Profile::Stationary)?;
            let image = shuffled_image(&base, |x| x.iter().zip(&h).map(|(xi, hi)| state.a * xi + hi).collect(), s ^ 0x5151);
            ot_assignment(&base, &image)
        })
        .collect()
}

impl VerifySuite for Transport {
    fn name(&self) -> &'static str {
        "transport"
    }

    fn run(&self, seed: u64) -> Vec<CheckResult> {
        let mut checks = Vec::new();
        let identity = "1-d quantile transport vs closed-form W2^2 (relative)";
        let cases: Vec<(f64, f64)> = vec![(0.7, 0.5), (0.7, 1.5), (1.5, 0.5), (1.5, 1.5)];
        checks.extend(cases.par_iter().map(|&(m, t)| {
            let id = format!("quantile/d=1/m={m}/t={t}/x0=2");
            let r = (|| {
                let params = ModelParams::from_m(1, m)?;
                let state = flow_state(&params, t, 2.0)?;
                let w = ot_1d_quantile(&ProfileLaw::flow(&state)?, &ProfileLaw::stationary(&params)?, 20_000)?;
                let exact = w2_sq_flow(&params, t, 2.0)?.as_f64();
                Ok(CheckResult::relative(id.clone(), identity, w, exact, 1e-6))
            })();
            or_failed(id, identity, 1e-6, r)
        }).collect::<Vec<_>>());

        let id = "assignment/gaussian/d=3/t=1/x0=2".to_string();
        let identity = "assignment OT vs closed-form W2^2, in bootstrap standard errors";
        let r = (|| {
            let params = ModelParams::from_m(3, 1.0)?;
            let seeds: Vec<u64> = (0..ASSIGNMENT_REPLICATES as u64).map(|k| derived_seed(seed, 100 + k)).collect();
            let vals = flow_assignment_replicates(&params, 1.0, 2.0, ASSIGNMENT_POINTS, &seeds)?;
            let (mean, se) = bootstrap_se(&vals, 2000, derived_seed(seed, 99));
            let exact = w2_sq_flow(&params, 1.0, 2.0)?.as_f64();
            Ok(CheckResult::at_most(id.clone(), identity, (mean - exact).abs() / se, 3.0))
        })();
        checks.push(or_failed(id, identity, 3.0, r));

        let id = "assignment/position_scale/d=3".to_string();
        let identity = "assignment OT vs W2^2(mu, T#mu) for a random PSD affine map, in standard errors";
        let r = (|| {
            let mut rng = ChaCha20Rng::seed_from_u64(derived_seed(seed, 200));
            let b: Vec<Vec<f64>> = (0..3).map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
            let bm = Matrix::from_rows(&b)?;
            let a = bm.transpose().matmul(&bm).add(&Matrix::scalar(3, 0.2)).symmetrized();
            let h: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let params = ModelParams::from_m(3, 0.8)?;
            let mu = EllipticMoments::isotropic(3, 0.0, params.m2()? / 3.0)?;
            let exact = w2_sq_position_scale(&mu, &a, &h)?;
            let map = |x: &[f64]| -> Vec<f64> {
                let ax = a.matvec(x);
                ax.iter().zip(&h).map(|(u, v)| u + v).collect()
            };
            let base = sample_barenblatt(&params, 1024, &[0.0; 3], derived_seed(seed, 201), Profile::Stationary)?;
            let image = shuffled_image(&base, map, derived_seed(seed, 202));
            let w = ot_assignment(&base, &image)?;
            let per_point: Vec<f64> = base
                .points
                .iter()
                .map(|x| {
                    let y = map(x);
                    x.iter().zip(&y).map(|(p, q)| (p - q) * (p - q)).sum()
                })
                .collect();
            let (_, se) = mean_and_se(&per_point);
            Ok(CheckResult::at_most(id.clone(), identity, (w - exact).abs() / se, 3.0))
        })();
        checks.push(or_failed(id, identity, 3.0, r));
        checks
    }
}

/// The 36-point grid: `α ∈ {1, 1/4}`, `d ∈ {3, 10, 50}`, `t ∈ {1/2, 1, 2}`,
/// `|x0| ∈ {0, √d}`.
pub fn entropy_production_grid() -> Vec<(f64, usize, f64, f64)> {
    let mut out = Vec::new();
    for alpha in [1.0, 0.25] {
        for d in [3usize, 10, 50] {
            for t in [0.5, 1.0, 2.0] {
                for x0 in [0.0, (d as f64).sqrt()] {
                    out.push((alpha, d, t, x0));
                }
            }
        }
    }
    out
}

/// Twelve off-centre `(d, m, t, |x0|)` points for the quadrature checks;
/// the porous ones have the support of `v(t)` sticking out of that of `v∞`.
pub fn off_center_grid() -> Vec<(usize, f64, f64, f64)> {
    vec![
        (3, 0.8, 0.5, 1.0),
        (3, 0.8, 1.0, 2.0),
        (6, 0.9, 0.7, 1.5),
        (12, 0.95, 1.0, 2.0),
        (3, 1.0, 1.0, 1.0),
        (5, 1.0, 0.5, 2.0),
        (1, 2.0, 0.5, 2.0),
        (2, 2.0, 0.6, 1.0),
        (3, 1.5, 1.0, 1.5),
        (4, 1.5, 1.0, 2.0),
        (3, 3.0, 0.8, 1.5),
        (6, 1.2, 1.0, 2.0),
    ]
}

pub struct EntropyProductionSuite;

impl VerifySuite for EntropyProductionSuite {
    fn name(&self) -> &'static str {
        "entropy_production"
    }

    fn run(&self, _seed: u64) -> Vec<CheckResult> {
        let identity = "central difference of H vs -I (relative)";
        let mut checks: Vec<CheckResult> = entropy_production_grid()
            .par_iter()
            .map(|&(alpha, d, t, x0)| {
                let id = format!("dhdt/alpha={alpha}/d={d}/t={t}/x0={x0:.6}");
                let r = (|| {
                    let params = ModelParams::from_alpha(d, alpha)?;
                    let e = entropy_production_check(&params, t, x0, 1e-5)?;
                    Ok(CheckResult::at_most(id.clone(), identity, e.rel_gap, 1e-6))
                })();
                or_failed(id, identity, 1e-6, r)
            })
            .collect();
        let quad: Vec<CheckResult> = off_center_grid()
            .par_iter()
            .flat_map(|&(d, m, t, x0)| {
                let base = format!("d={d}/m={m}/t={t}/x0={x0}");
                let h_id = format!("entropy_quadrature/{base}");
                let h_identity = "H_m by 2-d quadrature vs closed form (relative)";
                let h = (|| {
                    let params = ModelParams::from_m(d, m)?;
                    let q = entropy_quadrature(&params, t, x0)?.value;
                    let c = entropy_flow(&params, t, x0)?.as_f64();
                    Ok(CheckResult::relative(h_id.clone(), h_identity, q, c, 1e-6))
                })();
                let i_id = format!("fisher_quadrature/{base}");
                let i_identity = "I_m by 2-d quadrature vs closed form (relative)";
                let i = (|| {
                    let params = ModelParams::from_m(d, m)?;
                    let q = fisher_quadrature(&params, t, x0)?.value;
                    let c = fisher_flow(&params, t, x0)?.as_f64();
                    Ok(CheckResult::relative(i_id.clone(), i_identity, q, c, 1e-6))
                })();
                vec![
                    or_failed(h_id, h_identity, 1e-6, h),
                    or_failed(i_id, i_identity, 1e-6, i),
                ]
            })
            .collect();
        checks.extend(quad);
        checks
    }
}

/// Finite-volume solver against the closed-form solution.
pub struct Pde;

/// The one-dimensional fixture: `m = 0.7`, `|x0| = 2`, `[−12, 12]`,
/// from `t = 0.05` to `t = 2`.
pub fn line_fixture(cells: usize) -> Result<crate::pde::GridDensity> {
    let params = ModelParams::from_m(1, 0.7)?;
    init_from_closed_form(
        &params,
        0.05,
        2.0,
        GridSpec {
            geometry: Geometry::Line { half_width: 12.0 },
            cells,
        },
    )
}

/// The radial fixture: `d = 3`, `m = 2`, centred, ball of 1.5 support radii.
pub fn radial_fixture(cells: usize) -> Result<crate::pde::GridDensity> {
    let params = ModelParams::from_m(3, 2.0)?;
    let r_inf = params.stationary_profile().support_radius().expect("compact profile");
    init_from_closed_form(
        &params,
        0.05,
        0.0,
        GridSpec {
            geometry: Geometry::Radial { radius: 1.5 * r_inf },
            cells,
        },
    )
}

/// Largest `|front − a(t) R∞| / Δx` over the snapshots of a radial run.
pub fn front_error_in_cells(cells: usize, times: &[f64]) -> Result<f64> {
    let grid = radial_fixture(cells)?;
    let params = *grid.params();
    let r_inf = params.stationary_profile().support_radius().expect("compact profile");
    let (_, traj) = evolve(grid.clone(), times)?;
    let mut worst = 0.0f64;
    for s in &traj.snapshots {
        let mut g = grid.clone();
        g.values = s.values.clone();
        let front = front_position(&g, 0.0).ok_or_else(|| domain("empty grid"))?;
        let a = flow_state(&params, s.time, 0.0)?.a;
        worst = worst.max((front - a * r_inf).abs() / grid.dx());
    }
    Ok(worst)
}

impl VerifySuite for Pde {
    fn name(&self) -> &'static str {
        "pde"
    }

    fn run(&self, _seed: u64) -> Vec<CheckResult> {
        let mut checks = Vec::new();
        for m in [0.7, 1.0, 1.5] {
            let id = format!("stationary/d=1/m={m}");
            let identity = "L1 drift of the grid equilibrium after 1000 steps";
            let r = (|| {
                let params = ModelParams::from_m(1, m)?;
                let mut g = init_stationary(&params, 10.0, GridSpec { geometry: Geometry::Line { half_width: 8.0 }, cells: 400 })?;
                for _ in 0..1000 {
                    let dt = cfl_dt(&g);
                    g = step(&g, dt)?;
                }
                Ok(CheckResult::at_most(id.clone(), identity, l1_to_reference(&g), 1e-6))
            })();
            checks.push(or_failed(id, identity, 1e-6, r));
        }

        let runs: Vec<Result<(f64, crate::pde::Trajectory)>> = [1024usize, 2048]
            .par_iter()
            .map(|&cells| {
                let (end, traj) = evolve(line_fixture(cells)?, &[0.5, 1.0, 2.0])?;
                Ok((l1_error(&end)?, traj))
            })
            .collect();
        match (&runs[0], &runs[1]) {
            (Ok((e0, t0)), Ok((e1, t1))) => {
                checks.push(CheckResult::at_most("line/l1/cells=2048", "L1 error vs closed form at t=2", *e1, 2e-3));
                checks.push(CheckResult::at_least("line/refinement", "L1 error ratio 1024 -> 2048 cells", e0 / e1, 1.7));
                let inc = t0.max_entropy_increase.max(t1.max_entropy_increase);
                checks.push(CheckResult::at_most("line/entropy_monotone", "largest one-step increase of the discrete entropy", inc, 1e-8));
                let drift = t0.max_mass_drift.max(t1.max_mass_drift);
                checks.push(CheckResult::at_most("line/mass", "largest |mass - 1| along the runs", drift, 1e-8));
            }
            _ => {
                checks.push(CheckResult::failed("line/l1/cells=2048", "L1 error vs closed form at t=2", 2e-3));
            }
        }

        let id = "radial/front/d=3/m=2".to_string();
        let identity = "porous front vs a(t) R_inf, in cells";
        let r = front_error_in_cells(256, &[0.1, 0.25, 0.5, 1.0, 2.0])
            .map(|w| CheckResult::at_most(id.clone(), identity, w, 3.0));
        checks.push(or_failed(id, identity, 3.0, r));
        checks
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_lookup() {
        let reg = SuiteRegistry::default();
        assert_eq!(reg.names(), vec!["moments", "transport", "entropy_production", "pde"]);
        assert!(reg.run("nope", 1).is_err());
    }

    #[test]
    fn bootstrap_of_constant_is_exact() {
        let (m, se) = bootstrap_se(&[2.0; 10], 100, 3);
        assert_eq!(m, 2.0);
        assert_eq!(se, 0.0);
    }

    #[test]
    fn grids_have_expected_sizes() {
        assert_eq!(entropy_production_grid().len(), 36);
        assert_eq!(off_center_grid().len(), 12);
        assert_eq!(regime_grid().len() * 2, 36);
    }
}
