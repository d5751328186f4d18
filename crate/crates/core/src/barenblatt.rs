//! Barenblatt profiles: parameterisation, normalisation, moments and `L^m`
//! norms, plus their large-dimension limits.
//!
//! Two radial families are covered, both written with a shape `p`, a scale
//! `b` and a normalisation `c` fixed by unit mass:
//!
//! * full space (fast diffusion, `m < 1`): `(c + b|x|²)^{-p}`,
//! * compact (porous medium, `m > 1`): `(c − b|x|²)_+^{p}`,
//!
//! and the Gaussian case `m = 1`, handled with exact normal-law formulas.
//!
//! Every Gamma ratio goes through [`crate::special::log_gamma_ratio`], so the
//! constants are finite and accurate up to `d = 10^8`.

use std::f64::consts::{E, PI};

use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::special::log_gamma_ratio;

/// `|m − 1|` below which the model is treated as exactly Gaussian.
pub const GAUSSIAN_TOL: f64 = 1e-12;

/// Which of the three regimes a `(d, m)` pair falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    FastDiffusion,
    Gaussian,
    PorousMedium,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::FastDiffusion => "fast_diffusion",
            Regime::Gaussian => "gaussian",
            Regime::PorousMedium => "porous_medium",
        }
    }
}

/// Shape of a radial profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProfileShape {
    /// `(c + b r²)^{-p}`, requires `p > d/2`.
    FullSpace { p: f64 },
    /// `(c − b r²)_+^{p}`, requires `p > 0`.
    Compact { p: f64 },
    /// Centred normal law with isotropic variance.
    Gaussian { variance: f64 },
}

/// Profile kind used when only `(d, p, b)` are known.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    FullSpace,
    Compact,
}

/// Unit-mass value of `c` for the given family.
///
/// Full space: `c = (π^{d/2} Γ(p − d/2) / (b^{d/2} Γ(p)))^{2/(2p−d)}`.
/// Compact: `c = (b^{d/2} Γ(p + 1 + d/2) / (π^{d/2} Γ(p + 1)))^{2/(2p+d)}`.
pub fn normalization_constant(d: usize, p: f64, b: f64, kind: ProfileKind) -> Result<f64> {
    Ok(ln_normalization_constant(d, p, b, kind)?.exp())
}

fn ln_normalization_constant(d: usize, p: f64, b: f64, kind: ProfileKind) -> Result<f64> {
    if d == 0 {
        return Err(domain("dimension must be at least 1"));
    }
    if !(b > 0.0 && b.is_finite()) {
        return Err(domain(format!("scale b must be positive, got {b}")));
    }
    let dd = d as f64;
    let half = 0.5 * dd;
    match kind {
        ProfileKind::FullSpace => {
            if !(p > half) {
                return Err(Error::Constraint(format!(
                    "full-space profile needs p > d/2 (p = {p}, d = {d})"
                )));
            }
            let k = 2.0 * p - dd;
            Ok((dd * (PI.ln() - b.ln()) + 2.0 * log_gamma_ratio(p - half, p)?) / k)
        }
        ProfileKind::Compact => {
            if !(p > 0.0) {
                return Err(Error::Constraint(format!(
                    "compact profile needs p > 0 (p = {p})"
                )));
            }
            let k = 2.0 * p + dd;
            Ok((dd * (b.ln() - PI.ln()) + 2.0 * log_gamma_ratio(p + 1.0 + half, p + 1.0)?) / k)
        }
    }
}

/// A unit-mass radially symmetric profile on `R^d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialProfile {
    d: usize,
    shape: ProfileShape,
    scale: f64,
    ln_norm: f64,
}

impl RadialProfile {
    pub fn full_space(d: usize, p: f64, b: f64) -> Result<Self> {
        let ln_norm = ln_normalization_constant(d, p, b, ProfileKind::FullSpace)?;
        Ok(Self {
            d,
            shape: ProfileShape::FullSpace { p },
            scale: b,
            ln_norm,
        })
    }

    pub fn compact(d: usize, p: f64, b: f64) -> Result<Self> {
        let ln_norm = ln_normalization_constant(d, p, b, ProfileKind::Compact)?;
        Ok(Self {
            d,
            shape: ProfileShape::Compact { p },
            scale: b,
            ln_norm,
        })
    }

    pub fn gaussian(d: usize, variance: f64) -> Result<Self> {
        if d == 0 {
            return Err(domain("dimension must be at least 1"));
        }
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(domain(format!("variance must be positive, got {variance}")));
        }
        // stored "norm" is the density at the origin
        let ln_norm = -0.5 * d as f64 * (2.0 * PI * variance).ln();
        Ok(Self {
            d,
            shape: ProfileShape::Gaussian { variance },
            scale: 0.0,
            ln_norm,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn shape(&self) -> ProfileShape {
        self.shape
    }

    /// The scale `b` (zero for the Gaussian).
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// The normalisation `c`; for the Gaussian, the density at the origin.
    pub fn norm(&self) -> f64 {
        self.ln_norm.exp()
    }

    pub fn ln_norm(&self) -> f64 {
        self.ln_norm
    }

    /// Radius of the support, `√(c/b)`, for compact profiles.
    pub fn support_radius(&self) -> Option<f64> {
        match self.shape {
            ProfileShape::Compact { .. } => Some((0.5 * (self.ln_norm - self.scale.ln())).exp()),
            _ => None,
        }
    }

    /// `ln` of the density at radius `r`; `-∞` outside a compact support.
    pub fn ln_density(&self, r: f64) -> f64 {
        let r2 = r * r;
        match self.shape {
            ProfileShape::FullSpace { p } => {
                let c = self.norm();
                -p * (c + self.scale * r2).ln()
            }
            ProfileShape::Compact { p } => {
                let c = self.norm();
                let inner = c - self.scale * r2;
                if inner > 0.0 && r < self.support_radius().unwrap_or(f64::INFINITY) {
                    p * inner.ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            ProfileShape::Gaussian { variance } => self.ln_norm - r2 / (2.0 * variance),
        }
    }

    pub fn density(&self, r: f64) -> f64 {
        self.ln_density(r).exp()
    }

    /// The profile raised to `m − 1`, i.e. the affine quadratic `c ± b r²`
    /// for Barenblatt profiles (positive part in the compact case).
    pub fn pressure(&self, r: f64) -> f64 {
        let c = self.norm();
        match self.shape {
            ProfileShape::FullSpace { .. } => c + self.scale * r * r,
            ProfileShape::Compact { .. } => (c - self.scale * r * r).max(0.0),
            ProfileShape::Gaussian { variance } => -r * r / (2.0 * variance),
        }
    }

    /// Radial derivative of [`Self::pressure`]; zero outside a compact support.
    pub fn pressure_slope(&self, r: f64) -> f64 {
        match self.shape {
            ProfileShape::FullSpace { .. } => 2.0 * self.scale * r,
            ProfileShape::Compact { .. } => {
                if self.norm() - self.scale * r * r > 0.0 {
                    -2.0 * self.scale * r
                } else {
                    0.0
                }
            }
            ProfileShape::Gaussian { variance } => -r / variance,
        }
    }

    /// `ln ∫|x|^a B(x) dx`.
    pub fn ln_moment(&self, a: f64) -> Result<f64> {
        if !(a >= 0.0 && a.is_finite()) {
            return Err(domain(format!("moment order must be a finite a ≥ 0, got {a}")));
        }
        let dd = self.d as f64;
        let half = 0.5 * dd;
        let radial = log_gamma_ratio(half + 0.5 * a, half)?;
        match self.shape {
            ProfileShape::FullSpace { p } => {
                if !(p > half + 0.5 * a) {
                    return Err(Error::InfiniteMoment {
                        order: a,
                        reason: format!("needs p > (d + a)/2, p = {p}, d = {}", self.d),
                    });
                }
                if a == 0.0 {
                    return Ok(0.0);
                }
                let k = 2.0 * p - dd;
                let base = half * PI.ln() - p * self.scale.ln() + log_gamma_ratio(p - half, p)?;
                Ok(a / k * base + radial + log_gamma_ratio(p - half - 0.5 * a, p - half)?)
            }
            ProfileShape::Compact { p } => {
                if a == 0.0 {
                    return Ok(0.0);
                }
                let k = 2.0 * p + dd;
                let top = p + 1.0 + half;
                let base = log_gamma_ratio(top, p + 1.0)? - half * PI.ln() - p * self.scale.ln();
                Ok(a / k * base + radial + log_gamma_ratio(top, top + 0.5 * a)?)
            }
            ProfileShape::Gaussian { variance } => {
                Ok(0.5 * a * (2.0 * variance).ln() + radial)
            }
        }
    }

    /// `∫|x|^a B(x) dx`.
    pub fn moment(&self, a: f64) -> Result<f64> {
        Ok(self.ln_moment(a)?.exp())
    }

    /// `ln ∫ B(x)^m dx`.
    pub fn ln_lm_norm(&self, m: f64) -> Result<f64> {
        if !(m > 0.0 && m.is_finite()) {
            return Err(domain(format!("exponent m must be positive, got {m}")));
        }
        let dd = self.d as f64;
        let half = 0.5 * dd;
        match self.shape {
            ProfileShape::FullSpace { p } => {
                let pm = p * m;
                if !(pm > half) {
                    return Err(Error::Constraint(format!(
                        "L^m norm of a full-space profile needs p > d/(2m) (p = {p}, m = {m}, d = {})",
                        self.d
                    )));
                }
                let k = 2.0 * p - dd;
                Ok(dd * p * (1.0 - m) / k * (PI.ln() - self.scale.ln())
                    + (2.0 * pm - dd) / k * log_gamma_ratio(p, p - half)?
                    + log_gamma_ratio(pm - half, pm)?)
            }
            ProfileShape::Compact { p } => {
                let pm = p * m;
                let k = 2.0 * p + dd;
                let top = p + 1.0 + half;
                let base = half * (self.scale.ln() - PI.ln()) + log_gamma_ratio(top, p + 1.0)?;
                Ok(log_gamma_ratio(top, pm + 1.0 + half)?
                    + log_gamma_ratio(pm + 1.0, p + 1.0)?
                    + 2.0 * p * (m - 1.0) / k * base)
            }
            ProfileShape::Gaussian { variance } => {
                Ok(half * (1.0 - m) * (2.0 * PI * variance).ln() - half * m.ln())
            }
        }
    }

    /// `∫ B(x)^m dx`.
    pub fn lm_norm(&self, m: f64) -> Result<f64> {
        Ok(self.ln_lm_norm(m)?.exp())
    }
}

/// Which of the two profiles of a model to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// The unit-time self-similar profile `B`.
    Unit,
    /// The stationary state `v∞(x) = α^{-αd} B(x / α^α)`.
    Stationary,
}

/// One `(d, m)` pair with every derived constant.
///
/// `b` and `p` are the stationary-profile shape and scale: `p = 1/|1 − m|`,
/// `b = |1 − m|/(2m)`. The unit profile `B` shares `p` and has scale `α b`.
/// In the Gaussian regime `p = ∞` and `b = 0`, and `c`, `c_stat` hold the
/// densities at the origin of `B` and `v∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    d: usize,
    m: f64,
    delta: f64,
    alpha: f64,
    regime: Regime,
    unit: RadialProfile,
    stationary: RadialProfile,
}

impl ModelParams {
    fn build(d: usize, m: f64, delta: f64, alpha: f64) -> Result<Self> {
        if d == 0 {
            return Err(domain("dimension must be at least 1"));
        }
        if !(m > 0.0) {
            return Err(Error::Constraint(format!("m > 0 violated (m = {m})")));
        }
        let dd = d as f64;
        if !(m > (dd - 2.0) / dd) {
            return Err(Error::Constraint(format!(
                "m > (d-2)/d violated (m = {m}, (d-2)/d = {})",
                (dd - 2.0) / dd
            )));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Constraint(format!("alpha > 0 violated (alpha = {alpha})")));
        }
        let (regime, unit, stationary) = if delta.abs() <= GAUSSIAN_TOL {
            (
                Regime::Gaussian,
                RadialProfile::gaussian(d, 2.0)?,
                RadialProfile::gaussian(d, 1.0)?,
            )
        } else if delta < 0.0 {
            let p = -1.0 / delta;
            let b = -delta / (2.0 * m);
            (
                Regime::FastDiffusion,
                RadialProfile::full_space(d, p, alpha * b)?,
                RadialProfile::full_space(d, p, b)?,
            )
        } else {
            let p = 1.0 / delta;
            let b = delta / (2.0 * m);
            (
                Regime::PorousMedium,
                RadialProfile::compact(d, p, alpha * b)?,
                RadialProfile::compact(d, p, b)?,
            )
        };
        let (alpha, m, delta) = if regime == Regime::Gaussian {
            (0.5, 1.0, 0.0)
        } else {
            (alpha, m, delta)
        };
        Ok(Self {
            d,
            m,
            delta,
            alpha,
            regime,
            unit,
            stationary,
        })
    }

    /// Parameters along a fixed-`α` curve: `m = ((d − 2)α + 1)/(dα)`.
    pub fn from_alpha(d: usize, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(domain(format!("alpha must be positive and finite, got {alpha}")));
        }
        if d == 0 {
            return Err(domain("dimension must be at least 1"));
        }
        let dd = d as f64;
        // m − 1 = (1 − 2α)/(dα), exact for m close to 1
        let delta = (1.0 - 2.0 * alpha) / (dd * alpha);
        let m = ((dd - 2.0) * alpha + 1.0) / (dd * alpha);
        Self::build(d, m, delta, alpha)
    }

    /// Parameters at a fixed exponent: `α = 1/(2 − d(1 − m))`.
    pub fn from_m(d: usize, m: f64) -> Result<Self> {
        if !m.is_finite() {
            return Err(domain(format!("m must be finite, got {m}")));
        }
        if d == 0 {
            return Err(domain("dimension must be at least 1"));
        }
        let dd = d as f64;
        if !(m > 0.0) {
            return Err(Error::Constraint(format!("m > 0 violated (m = {m})")));
        }
        if !(m > (dd - 2.0) / dd) {
            return Err(Error::Constraint(format!(
                "m > (d-2)/d violated (m = {m}, (d-2)/d = {})",
                (dd - 2.0) / dd
            )));
        }
        let delta = m - 1.0;
        let alpha = 1.0 / (2.0 + dd * delta);
        Self::build(d, m, delta, alpha)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    /// `m − 1`, carried separately for accuracy when `m` is close to 1.
    pub fn m_minus_one(&self) -> f64 {
        self.delta
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `|2α − 1|`.
    pub fn beta(&self) -> f64 {
        (2.0 * self.alpha - 1.0).abs()
    }

    /// `2α − 1` with sign, computed as `−d(m − 1)α`.
    pub fn two_alpha_minus_one(&self) -> f64 {
        -(self.d as f64) * self.delta * self.alpha
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    /// Stationary shape `p = 1/|1 − m|` (`∞` for the Gaussian).
    pub fn p(&self) -> f64 {
        match self.stationary.shape {
            ProfileShape::FullSpace { p } | ProfileShape::Compact { p } => p,
            ProfileShape::Gaussian { .. } => f64::INFINITY,
        }
    }

    /// Stationary scale `b = |1 − m|/(2m)` (zero for the Gaussian).
    pub fn b(&self) -> f64 {
        self.stationary.scale
    }

    /// Normalisation of the unit-time profile `B`.
    pub fn c(&self) -> f64 {
        self.unit.norm()
    }

    /// Normalisation of the stationary profile `v∞`.
    pub fn c_stat(&self) -> f64 {
        self.stationary.norm()
    }

    pub fn unit_profile(&self) -> &RadialProfile {
        &self.unit
    }

    pub fn stationary_profile(&self) -> &RadialProfile {
        &self.stationary
    }

    pub fn profile(&self, which: Profile) -> &RadialProfile {
        match which {
            Profile::Unit => &self.unit,
            Profile::Stationary => &self.stationary,
        }
    }

    /// Whether `v∞` has a finite second moment (`m > d/(d+2)`).
    pub fn has_second_moment(&self) -> bool {
        match self.stationary.shape {
            ProfileShape::FullSpace { p } => p > 0.5 * self.d as f64 + 1.0,
            _ => true,
        }
    }

    /// Second moment `M₂` of the stationary profile.
    pub fn m2(&self) -> Result<f64> {
        moment(self, 2.0)
    }

    /// `N_m = ∫ v∞^m`.
    pub fn nm(&self) -> Result<f64> {
        lm_norm(self)
    }
}

/// `M_a = ∫|x|^a v∞(x) dx` for the stationary profile.
pub fn moment(params: &ModelParams, a: f64) -> Result<f64> {
    params.stationary.moment(a)
}

/// `N_m = ∫ v∞(x)^m dx` for the stationary profile.
pub fn lm_norm(params: &ModelParams) -> Result<f64> {
    params.stationary.lm_norm(params.m)
}

/// Density of either profile at `radius`.
pub fn density_at(params: &ModelParams, radius: f64, which: Profile) -> f64 {
    params.profile(which).density(radius)
}

/// `M₂ − d N_m` for the stationary profile.
pub fn m2_minus_d_nm(params: &ModelParams) -> Result<f64> {
    Ok(params.m2()? - params.d as f64 * params.nm()?)
}

/// Which large-dimension limit to report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AsymptoticMode {
    FixedAlpha(f64),
    FixedM(f64),
}

/// Limits of `M₂/d`, `N_m` and (fixed `m` only) `c/(bd)` as `d → ∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticTargets {
    pub m2_over_d: f64,
    pub nm: f64,
    pub c_over_bd: Option<f64>,
}

pub fn asymptotic_targets(mode: AsymptoticMode) -> Result<AsymptoticTargets> {
    let two_pi_e = 2.0 * PI * E;
    match mode {
        AsymptoticMode::FixedAlpha(alpha) => {
            if !(alpha > 0.0) {
                return Err(domain(format!("alpha must be positive, got {alpha}")));
            }
            let t = two_pi_e.powf(2.0 * alpha - 1.0);
            Ok(AsymptoticTargets {
                m2_over_d: t,
                nm: t,
                c_over_bd: None,
            })
        }
        AsymptoticMode::FixedM(m) => {
            if !(m > 1.0) {
                return Err(domain(format!("fixed-m limit needs m > 1, got {m}")));
            }
            Ok(AsymptoticTargets {
                m2_over_d: 1.0 / two_pi_e,
                nm: 1.0 / two_pi_e,
                c_over_bd: Some(1.0 / two_pi_e),
            })
        }
    }
}
