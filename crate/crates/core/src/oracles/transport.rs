//! Discrete and one-dimensional optimal transport.
//!
//! [`ot_1d_quantile`] couples two laws on the line through their quantile
//! functions. [`ot_assignment`] solves the exact assignment problem between
//! two equal-size point clouds (shortest augmenting paths with potentials).

use rayon::prelude::*;
use statrs::function::beta::beta_reg;
use statrs::function::erf::erfc;

use crate::barenblatt::{ModelParams, ProfileShape, RadialProfile};
use crate::dynamics::FlowState;
use crate::error::{domain, Error, Result};
use crate::oracles::sampling::SampleCloud;

/// Largest cloud accepted by [`ot_assignment`].
pub const MAX_ASSIGNMENT: usize = 2048;

/// A law on the real line, described by its distribution function.
pub trait Law1d: Sync {
    /// `P(X ≤ x)`.
    fn cdf(&self, x: f64) -> f64;

    /// `P(X > x)`, accurate in the upper tail.
    fn sf(&self, x: f64) -> f64 {
        1.0 - self.cdf(x)
    }

    /// Some point with `cdf < 1/2 < sf`-ish balance, used to seed brackets.
    fn center(&self) -> f64;

    /// Length scale used to grow brackets.
    fn spread(&self) -> f64;

    /// Quantile at level `q`, with `upper = 1 − q` passed separately so that
    /// both tails are resolved. Found by bisection.
    fn quantile(&self, q: f64, upper: f64) -> f64 {
        let c = self.center();
        let s = self.spread();
        let use_upper = upper < q;
        let below = |x: f64| {
            if use_upper {
                self.sf(x) > upper
            } else {
                self.cdf(x) < q
            }
        };
        let (mut lo, mut hi) = (c - s, c + s);
        while below(lo) == false && lo > -f64::MAX / 4.0 {
            lo = c - 2.0 * (c - lo);
        }
        while below(hi) && hi < f64::MAX / 4.0 {
            hi = c + 2.0 * (hi - c);
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if below(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// A one-dimensional Barenblatt or Gaussian law `center + scale · Y`, where
/// `Y` has the given radial profile on the line.
#[derive(Debug, Clone, Copy)]
pub struct ProfileLaw {
    profile: RadialProfile,
    pub location: f64,
    pub dilation: f64,
}

impl ProfileLaw {
    pub fn new(profile: RadialProfile, location: f64, dilation: f64) -> Result<Self> {
        if profile.dim() != 1 {
            return Err(domain("quantile transport needs a one-dimensional profile"));
        }
        if !(dilation > 0.0) {
            return Err(domain("dilation must be positive"));
        }
        Ok(Self {
            profile,
            location,
            dilation,
        })
    }

    /// The stationary law `v∞` of a `d = 1` model.
    pub fn stationary(params: &ModelParams) -> Result<Self> {
        Self::new(*params.stationary_profile(), 0.0, 1.0)
    }

    /// The law `v(t, ·) = a^{−1} v∞((· − h)/a)` of a `d = 1` flow.
    pub fn flow(state: &FlowState) -> Result<Self> {
        Self::new(*state.params().stationary_profile(), state.h_norm, state.a)
    }

    /// `P(Y > y)` for `y ≥ 0` of the standardised law.
    fn tail(&self, y: f64) -> f64 {
        let y = y.abs();
        let prof = &self.profile;
        match prof.shape() {
            ProfileShape::FullSpace { p } => {
                let c = prof.norm();
                let by2 = prof.scale() * y * y;
                // b Y²/c ~ BetaPrime(1/2, p − 1/2)
                0.5 * beta_reg(p - 0.5, 0.5, c / (c + by2))
            }
            ProfileShape::Compact { p } => {
                let c = prof.norm();
                let z = (prof.scale() * y * y / c).min(1.0);
                // b Y²/c ~ Beta(1/2, p + 1)
                0.5 * beta_reg(p + 1.0, 0.5, 1.0 - z)
            }
            ProfileShape::Gaussian { variance } => 0.5 * erfc(y / (2.0 * variance).sqrt()),
        }
    }
}

impl Law1d for ProfileLaw {
    fn cdf(&self, x: f64) -> f64 {
        let y = (x - self.location) / self.dilation;
        if y <= 0.0 {
            self.tail(y)
        } else {
            1.0 - self.tail(y)
        }
    }

    fn sf(&self, x: f64) -> f64 {
        let y = (x - self.location) / self.dilation;
        if y >= 0.0 {
            self.tail(y)
        } else {
            1.0 - self.tail(y)
        }
    }

    fn center(&self) -> f64 {
        self.location
    }

    fn spread(&self) -> f64 {
        let prof = &self.profile;
        let s = match prof.shape() {
            ProfileShape::Gaussian { variance } => variance.sqrt(),
            _ => (prof.norm() / prof.scale()).sqrt(),
        };
        s * self.dilation
    }
}

/// A point mass, handy for exact checks.
#[derive(Debug, Clone, Copy)]
pub struct Dirac(pub f64);

impl Law1d for Dirac {
    fn cdf(&self, x: f64) -> f64 {
        if x >= self.0 {
            1.0
        } else {
            0.0
        }
    }
    fn center(&self) -> f64 {
        self.0
    }
    fn spread(&self) -> f64 {
        1.0
    }
}

/// Smootherstep `6s⁵ − 15s⁴ + 10s³`, the grading map of the quantile grid.
/// It satisfies `φ(1 − s) = 1 − φ(s)`.
fn smootherstep(s: f64) -> f64 {
    s * s * s * (10.0 + s * (-15.0 + 6.0 * s))
}

const CHUNK: usize = 1024;

/// `W2²(μ, ν) = ∫_0^1 (F⁻¹(q) − G⁻¹(q))² dq` by a midpoint rule on a grid
/// graded towards both ends, so heavy-tailed quantile functions are
/// integrated without loss of order.
///
/// Errors if the computed quantile functions are not non-decreasing.
pub fn ot_1d_quantile(mu: &dyn Law1d, nu: &dyn Law1d, n_quantiles: usize) -> Result<f64> {
    if n_quantiles < 1000 {
        return Err(domain(format!("need at least 1000 quantiles, got {n_quantiles}")));
    }
    let n = n_quantiles;
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<Result<(f64, [f64; 2], [f64; 2])>> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let start = k * CHUNK;
            let end = (start + CHUNK).min(n);
            let mut sum = 0.0;
            let mut first = [0.0; 2];
            let mut prev = [f64::NEG_INFINITY; 2];
            for i in start..end {
                let s = (i as f64 + 0.5) / n as f64;
                let q = smootherstep(s);
                let up = smootherstep(1.0 - s);
                let w = smootherstep((i + 1) as f64 / n as f64) - smootherstep(i as f64 / n as f64);
                let x = mu.quantile(q, up);
                let y = nu.quantile(q, up);
                if x < prev[0] || y < prev[1] || !x.is_finite() || !y.is_finite() {
                    return Err(domain("quantile function is not monotone; CDF is not increasing"));
                }
                if i == start {
                    first = [x, y];
                }
                prev = [x, y];
                sum += w * (x - y) * (x - y);
            }
            Ok((sum, first, prev))
        })
        .collect();
    let mut total = 0.0;
    let mut last = [f64::NEG_INFINITY; 2];
    for part in parts {
        let (s, first, end) = part?;
        if first[0] < last[0] || first[1] < last[1] {
            return Err(domain("quantile function is not monotone; CDF is not increasing"));
        }
        total += s;
        last = end;
    }
    Ok(total)
}

fn check_clouds(a: &SampleCloud, b: &SampleCloud) -> Result<usize> {
    let n = a.len();
    if n != b.len() {
        return Err(domain(format!("cloud sizes differ: {} vs {}", n, b.len())));
    }
    if a.d != b.d {
        return Err(domain(format!("cloud dimensions differ: {} vs {}", a.d, b.d)));
    }
    if n == 0 {
        return Err(domain("clouds are empty"));
    }
    if n > MAX_ASSIGNMENT {
        return Err(Error::Unsupported(format!(
            "assignment is limited to {MAX_ASSIGNMENT} points, got {n}"
        )));
    }
    Ok(n)
}

/// Minimum over permutations `σ` of `(1/n) Σ |a_i − b_σ(i)|²`.
pub fn ot_assignment(a: &SampleCloud, b: &SampleCloud) -> Result<f64> {
    let n = check_clouds(a, b)?;
    let cost = |i: usize, j: usize| -> f64 {
        a.points[i]
            .iter()
            .zip(&b.points[j])
            .map(|(x, y)| (x - y) * (x - y))
            .sum()
    };
    let assignment = hungarian(n, cost);
    let total: f64 = assignment.iter().enumerate().map(|(i, &j)| cost(i, j)).sum();
    Ok(total / n as f64)
}

/// Optimal assignment for an `n × n` cost, returned as row → column.
///
/// Shortest augmenting paths with dual potentials, `O(n³)`.
pub fn hungarian(n: usize, cost: impl Fn(usize, usize) -> f64) -> Vec<usize> {
    // 1-based arrays; column 0 is the virtual source
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0f64; n + 1];
    let mut used = vec![false; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|x| *x = f64::INFINITY);
        used.iter_mut().for_each(|x| *x = false);
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0usize; n];
    for j in 1..=n {
        out[p[j] - 1] = j - 1;
    }
    out
}
