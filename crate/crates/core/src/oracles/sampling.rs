//! Seeded Monte Carlo draws from Barenblatt laws and two classical fixtures.
//!
//! Generator: ChaCha20 seeded with `seed_from_u64(seed)`. Points are produced
//! in blocks of [`BLOCK`]; block `k` uses stream `k` of that generator, so the
//! output is bit-identical whatever the number of worker threads.
//!
//! Radial laws, with `s = b r²/c`:
//!
//! * full space: `s ~ BetaPrime(d/2, p − d/2)`, drawn as a ratio of Gammas,
//! * compact: `s ~ Beta(d/2, p + 1)`, drawn as `G1/(G1 + G2)`,
//! * Gaussian: isotropic normal with the profile variance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::barenblatt::{ModelParams, Profile, ProfileShape, RadialProfile};
use crate::error::{domain, Error, Result};

/// Points per independent generator stream.
pub const BLOCK: usize = 4096;

/// Draws and the inputs that produced them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleCloud {
    pub points: Vec<Vec<f64>>,
    pub seed: u64,
    pub d: usize,
    pub center: Vec<f64>,
    pub label: String,
}

impl SampleCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Empirical mean.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.d];
        for p in &self.points {
            for (mi, pi) in m.iter_mut().zip(p) {
                *mi += pi;
            }
        }
        let n = self.points.len() as f64;
        m.iter_mut().for_each(|v| *v /= n);
        m
    }

    /// Sample values of `|x − center|^k`.
    pub fn radial_powers(&self, k: f64) -> Vec<f64> {
        self.points
            .iter()
            .map(|p| {
                let r2: f64 = p.iter().zip(&self.center).map(|(a, b)| (a - b) * (a - b)).sum();
                r2.powf(0.5 * k)
            })
            .collect()
    }
}

/// Mean and standard error of a sample.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

fn block_rng(seed: u64, block: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(block as u64);
    rng
}

/// Runs `draw` for `n` points in per-block streams, in parallel.
fn blocked<F>(n: usize, seed: u64, draw: F) -> Vec<Vec<f64>>
where
    F: Fn(&mut ChaCha20Rng) -> Vec<f64> + Sync,
{
    let blocks = n.div_ceil(BLOCK);
    (0..blocks)
        .into_par_iter()
        .map(|k| {
            let mut rng = block_rng(seed, k);
            let count = BLOCK.min(n - k * BLOCK);
            (0..count).map(|_| draw(&mut rng)).collect::<Vec<_>>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

fn unit_direction<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn gamma(shape: f64) -> Result<Gamma<f64>> {
    Gamma::new(shape, 1.0).map_err(|e| domain(format!("gamma shape {shape}: {e}")))
}

/// I.i.d. draws from a radial profile translated to `center`.
pub fn sample_profile(profile: &RadialProfile, n: usize, center: &[f64], seed: u64) -> Result<SampleCloud> {
    let d = profile.dim();
    if n == 0 {
        return Err(domain("sample size must be at least 1"));
    }
    if center.len() != d {
        return Err(domain(format!("center has length {}, expected {d}", center.len())));
    }
    let half = 0.5 * d as f64;
    let shift = |dir: Vec<f64>, r: f64| -> Vec<f64> {
        dir.iter().zip(center).map(|(u, c)| c + r * u).collect()
    };
    let points = match profile.shape() {
        ProfileShape::FullSpace { p } => {
            if !(p > half) {
                return Err(domain(format!("full-space sampling needs p > d/2 (p = {p}, d = {d})")));
            }
            let g1 = gamma(half)?;
            let g2 = gamma(p - half)?;
            let radius = (profile.norm() / profile.scale()).sqrt();
            blocked(n, seed, |rng| {
                let s = g1.sample(rng) / g2.sample(rng);
                let dir = unit_direction(rng, d);
                shift(dir, radius * s.sqrt())
            })
        }
        ProfileShape::Compact { p } => {
            let g1 = gamma(half)?;
            let g2 = gamma(p + 1.0)?;
            let radius = profile.support_radius().expect("compact profile");
            blocked(n, seed, |rng| {
                let x = g1.sample(rng);
                let y = g2.sample(rng);
                let s = x / (x + y);
                let dir = unit_direction(rng, d);
                // √s ≤ 1, so the point never leaves the support
                shift(dir, radius * s.sqrt())
            })
        }
        ProfileShape::Gaussian { variance } => {
            let sd = variance.sqrt();
            blocked(n, seed, |rng| {
                (0..d)
                    .map(|i| center[i] + sd * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            })
        }
    };
    Ok(SampleCloud {
        points,
        seed,
        d,
        center: center.to_vec(),
        label: "barenblatt".into(),
    })
}

/// Draws from the unit or stationary profile of `params`, centred at `x0`.
pub fn sample_barenblatt(
    params: &ModelParams,
    n: usize,
    x0: &[f64],
    seed: u64,
    which: Profile,
) -> Result<SampleCloud> {
    sample_profile(params.profile(which), n, x0, seed)
}

/// `x0 = (|x0|, 0, …, 0)`.
pub fn axis_point(d: usize, norm: f64) -> Vec<f64> {
    let mut v = vec![0.0; d];
    if d > 0 {
        v[0] = norm;
    }
    v
}

/// Multivariate Student-t with `nu` degrees of freedom and identity scale:
/// `Z / √(W/ν)` with `Z ~ N(0, I)` and `W ~ χ²_ν`.
///
/// Its density is `∝ (1 + |x|²/ν)^{−(ν+d)/2}`, a full-space profile with
/// `p = (ν + d)/2` and `c/b = ν`.
pub fn sample_student_t(d: usize, nu: f64, n: usize, seed: u64) -> Result<SampleCloud> {
    if d == 0 || n == 0 || !(nu > 0.0) {
        return Err(domain("student-t needs d ≥ 1, n ≥ 1, nu > 0"));
    }
    let chi = gamma(0.5 * nu)?;
    let points = blocked(n, seed, |rng| {
        let w = 2.0 * chi.sample(rng);
        let k = (nu / w).sqrt();
        (0..d).map(|_| k * rng.sample::<f64, _>(StandardNormal)).collect()
    });
    Ok(SampleCloud {
        points,
        seed,
        d,
        center: vec![0.0; d],
        label: "student_t".into(),
    })
}

/// First `n` coordinates of a uniform point on the sphere of radius `radius`
/// in `R^D`.
///
/// The projection has density `∝ (R² − |y|²)_+^{(D−n−2)/2}`, a compact
/// profile with `p = (D − n − 2)/2` and `c/b = R²`.
pub fn sample_projected_sphere(
    ambient: usize,
    n_dims: usize,
    radius: f64,
    n: usize,
    seed: u64,
) -> Result<SampleCloud> {
    if n_dims == 0 || ambient < n_dims + 3 || n == 0 || !(radius > 0.0) {
        return Err(Error::Precondition(format!(
            "projected sphere needs D ≥ n + 3 (D = {ambient}, n = {n_dims}) and R > 0"
        )));
    }
    let points = blocked(n, seed, |rng| {
        let u = unit_direction(rng, ambient);
        u[..n_dims].iter().map(|x| radius * x).collect()
    });
    Ok(SampleCloud {
        points,
        seed,
        d: n_dims,
        center: vec![0.0; n_dims],
        label: "projected_sphere".into(),
    })
}
