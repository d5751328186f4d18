//! Wasserstein distance, relative entropy and Fisher information to
//! equilibrium along the flow, and the affine-transport formulas behind them.
//!
//! Along the flow `v(t)` is the image of `v∞` under `x ↦ a x + h`, so all
//! three quantities reduce to `M₂`, `N_m`, `a` and `|h|`:
//!
//! ```text
//! W₂² = (1 − a)² M₂ + |h|²
//! H   = αd/(2α − 1) (1 − a^{(2α−1)/α}) N_m + (a² − 1)/2 M₂ + |h|²/2
//! I   = |h|² + a² (1 − a^{−1/α})² M₂
//! ```
//!
//! Each is exposed as a [`Metric`] in a [`MetricRegistry`] keyed by name.

use serde::{Serialize, Serializer};

use crate::barenblatt::{ModelParams, Regime};
use crate::dynamics::{flow_state, FlowState};
use crate::error::{domain, Error, Result};
use crate::format::{ser_num, Num};
use crate::linalg::{check_psd, inv_sqrt_pd, sqrt_psd, Matrix, MAX_JACOBI_DIM};
use crate::oracles::quadrature::{radial_quadrature, RadialDomain, Tolerance};
use crate::special::expm1_over;

/// A distance that may be infinite or unavailable in closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Distance {
    Finite(f64),
    /// The law has no finite second moment.
    Infinite,
    /// No closed form applies to these parameters.
    NotComputed,
}

impl Distance {
    pub fn value(&self) -> Option<f64> {
        match self {
            Distance::Finite(v) => Some(*v),
            _ => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Distance::Finite(_))
    }

    /// Finite values as numbers, `Infinite` as `+∞`, `NotComputed` as NaN.
    pub fn as_f64(&self) -> f64 {
        match self {
            Distance::Finite(v) => *v,
            Distance::Infinite => f64::INFINITY,
            Distance::NotComputed => f64::NAN,
        }
    }
}

impl Serialize for Distance {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Distance::Finite(v) => Num(*v).serialize(s),
            Distance::Infinite => s.serialize_str("inf"),
            Distance::NotComputed => s.serialize_str("not_computed"),
        }
    }
}

/// How a report's numbers were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    ClosedForm,
    QuadratureOracle,
    DiscreteOt,
}

/// The three distances to equilibrium at one point of the flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DivergenceReport {
    pub d: usize,
    #[serde(serialize_with = "ser_num")]
    pub m: f64,
    #[serde(serialize_with = "ser_num")]
    pub alpha: f64,
    #[serde(serialize_with = "ser_num")]
    pub t: f64,
    #[serde(serialize_with = "ser_num")]
    pub x0_norm: f64,
    pub w2_sq: Distance,
    pub entropy: Distance,
    pub fisher: Distance,
    pub source: Source,
}

// ---------------------------------------------------------------------------
// Affine transport between location-scale laws

/// Mean and covariance of a law on `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipticMoments {
    pub mean: Vec<f64>,
    pub covariance: Matrix,
}

impl EllipticMoments {
    /// Validates symmetry and positive semidefiniteness of the covariance.
    pub fn new(mean: Vec<f64>, covariance: Matrix) -> Result<Self> {
        if mean.len() != covariance.dim() {
            return Err(domain(format!(
                "mean has length {} but covariance is {}×{}",
                mean.len(),
                covariance.dim(),
                covariance.dim()
            )));
        }
        if covariance.dim() <= MAX_JACOBI_DIM {
            check_psd(&covariance)?;
        } else if !covariance.is_symmetric() {
            return Err(domain("covariance is not symmetric"));
        }
        Ok(Self { mean, covariance })
    }

    /// Mean `(|m|, 0, …, 0)` and covariance `σ² I`.
    pub fn isotropic(d: usize, mean_norm: f64, variance: f64) -> Result<Self> {
        if d == 0 {
            return Err(domain("dimension must be at least 1"));
        }
        if !(variance >= 0.0) {
            return Err(domain(format!("variance must be non-negative, got {variance}")));
        }
        let mut mean = vec![0.0; d];
        mean[0] = mean_norm;
        Ok(Self {
            mean,
            covariance: Matrix::scalar(d, variance),
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `M = Σ + m mᵀ`.
    pub fn second_moment_matrix(&self) -> Matrix {
        let mut out = self.covariance.clone();
        let d = self.dim();
        for i in 0..d {
            for j in 0..d {
                out[(i, j)] += self.mean[i] * self.mean[j];
            }
        }
        out
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_map(mu: &EllipticMoments, a: &Matrix, h: &[f64]) -> Result<()> {
    if a.dim() != mu.dim() || h.len() != mu.dim() {
        return Err(domain("dimensions of A, h and μ must agree"));
    }
    // a Brenier map needs a symmetric positive semidefinite linear part
    check_psd(a)
}

/// `W₂²(μ, T#μ)` for `T(x) = A x + h`, from the moments of `μ`:
/// `Tr((A − I)² M_μ) + 2⟨(A − I) m_μ, h⟩ + |h|²`.
pub fn w2_sq_position_scale(mu: &EllipticMoments, a: &Matrix, h: &[f64]) -> Result<f64> {
    check_map(mu, a, h)?;
    let d = mu.dim();
    let a_minus_i = a.sub(&Matrix::identity(d));
    let sq = a_minus_i.matmul(&a_minus_i);
    let tr = sq.matmul(&mu.second_moment_matrix()).trace();
    let shift = a_minus_i.matvec(&mu.mean);
    Ok((tr + 2.0 * dot(&shift, h) + dot(h, h)).max(0.0))
}

/// The same distance in covariance form:
/// `Tr(Σ_μ + Σ_ν − 2 A Σ_μ) + |m_μ − m_ν|²` with `Σ_ν = A Σ_μ A`, `m_ν = A m_μ + h`.
pub fn w2_sq_position_scale_cov(mu: &EllipticMoments, a: &Matrix, h: &[f64]) -> Result<f64> {
    check_map(mu, a, h)?;
    let sigma_nu = a.matmul(&mu.covariance).matmul(a);
    let tr = mu.covariance.trace() + sigma_nu.trace() - 2.0 * a.matmul(&mu.covariance).trace();
    let m_nu: Vec<f64> = a.matvec(&mu.mean).iter().zip(h).map(|(x, y)| x + y).collect();
    let diff: Vec<f64> = mu.mean.iter().zip(&m_nu).map(|(x, y)| x - y).collect();
    Ok((tr + dot(&diff, &diff)).max(0.0))
}

/// The optimal linear map `A = Σ_μ^{−1/2} (Σ_μ^{1/2} Σ_ν Σ_μ^{1/2})^{1/2} Σ_μ^{−1/2}`.
pub fn transport_matrix(sigma_mu: &Matrix, sigma_nu: &Matrix) -> Result<Matrix> {
    let root = sqrt_psd(sigma_mu)?;
    let inv_root = inv_sqrt_pd(sigma_mu)?;
    let middle = root.matmul(sigma_nu).matmul(&root).symmetrized();
    let mid_root = sqrt_psd(&middle)?;
    Ok(inv_root.matmul(&mid_root).matmul(&inv_root).symmetrized())
}

/// `W₂²` between two members of one elliptic family:
/// `Tr(Σ_μ + Σ_ν − 2 (Σ_μ^{1/2} Σ_ν Σ_μ^{1/2})^{1/2}) + |m_μ − m_ν|²`.
pub fn w2_sq_elliptic(mu: &EllipticMoments, nu: &EllipticMoments) -> Result<f64> {
    let d = mu.dim();
    if nu.dim() != d {
        return Err(domain("both laws must live in the same dimension"));
    }
    let diff: Vec<f64> = mu.mean.iter().zip(&nu.mean).map(|(x, y)| x - y).collect();
    let mean_term = dot(&diff, &diff);
    let (sm, sn) = (&mu.covariance, &nu.covariance);
    if sm.is_diagonal() && sn.is_diagonal() {
        let mut tr = 0.0;
        for i in 0..d {
            let (x, y) = (sm[(i, i)], sn[(i, i)]);
            if x < 0.0 || y < 0.0 {
                return Err(domain("covariance has a negative variance"));
            }
            let g = x.sqrt() - y.sqrt();
            tr += g * g;
        }
        return Ok(tr + mean_term);
    }
    if d > MAX_JACOBI_DIM {
        return Err(Error::Unsupported(format!(
            "general covariance path limited to d ≤ {MAX_JACOBI_DIM}, got {d}"
        )));
    }
    if sm.commutes_with(sn, 1e-12) {
        let g = sqrt_psd(sm)?.sub(&sqrt_psd(sn)?);
        return Ok(g.frobenius_sq().max(0.0) + mean_term);
    }
    let root = sqrt_psd(sm)?;
    let middle = root.matmul(sn).matmul(&root).symmetrized();
    let cross = sqrt_psd(&middle)?.trace();
    Ok((sm.trace() + sn.trace() - 2.0 * cross).max(0.0) + mean_term)
}

// ---------------------------------------------------------------------------
// Closed forms along the flow

fn moments(params: &ModelParams) -> Option<(f64, f64)> {
    if !params.has_second_moment() {
        return None;
    }
    Some((params.m2().ok()?, params.nm().ok()?))
}

/// `W₂²(v(t), v∞)`, or `Infinite` when `m ≤ d/(d + 2)`.
pub fn w2_sq_flow(params: &ModelParams, t: f64, x0_norm: f64) -> Result<Distance> {
    W2Sq.evaluate(&flow_state(params, t, x0_norm)?)
}

/// `H_m(v(t) | v∞)`; `NotComputed` when `v∞` has no second moment.
pub fn entropy_flow(params: &ModelParams, t: f64, x0_norm: f64) -> Result<Distance> {
    Entropy.evaluate(&flow_state(params, t, x0_norm)?)
}

/// `I_m(v(t) | v∞)`, or `Infinite` when `m ≤ d/(d + 2)`.
pub fn fisher_flow(params: &ModelParams, t: f64, x0_norm: f64) -> Result<Distance> {
    Fisher.evaluate(&flow_state(params, t, x0_norm)?)
}

/// All three distances at one point.
pub fn divergence_report(params: &ModelParams, t: f64, x0_norm: f64) -> Result<DivergenceReport> {
    let state = flow_state(params, t, x0_norm)?;
    Ok(DivergenceReport {
        d: params.d(),
        m: params.m(),
        alpha: params.alpha(),
        t,
        x0_norm,
        w2_sq: W2Sq.evaluate(&state)?,
        entropy: Entropy.evaluate(&state)?,
        fisher: Fisher.evaluate(&state)?,
        source: Source::ClosedForm,
    })
}

/// A metric split into its profile part (depending on `M₂`, `N_m`, `a`) and
/// its shift part (proportional to `|h|²`). The profile part is also given
/// as a logarithm, which stays finite when the value underflows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TermSplit {
    pub profile: f64,
    pub ln_profile: f64,
    pub shift: f64,
}

impl TermSplit {
    pub fn total(&self) -> f64 {
        self.profile + self.shift
    }

    /// `ln(shift / profile)`.
    pub fn ln_shift_over_profile(&self) -> f64 {
        self.shift.ln() - self.ln_profile
    }
}

/// A distance to equilibrium evaluated in closed form along the flow.
pub trait Metric: Send + Sync {
    fn name(&self) -> &'static str;

    /// Profile/shift decomposition, or `None` when not finite.
    fn split(&self, state: &FlowState) -> Result<Option<TermSplit>>;

    /// What to report when the decomposition is unavailable.
    fn missing(&self) -> Distance {
        Distance::Infinite
    }

    fn evaluate(&self, state: &FlowState) -> Result<Distance> {
        Ok(match self.split(state)? {
            Some(s) => Distance::Finite(s.total()),
            None => self.missing(),
        })
    }
}

/// `W₂²`.
#[derive(Debug, Clone, Copy, Default)]
pub struct W2Sq;

impl Metric for W2Sq {
    fn name(&self) -> &'static str {
        "w2_sq"
    }

    fn split(&self, s: &FlowState) -> Result<Option<TermSplit>> {
        let Some((m2, _)) = moments(&s.params) else {
            return Ok(None);
        };
        let ln_profile = 2.0 * s.ln_one_minus_a + m2.ln();
        Ok(Some(TermSplit {
            profile: ln_profile.exp(),
            ln_profile,
            shift: s.h_sq(),
        }))
    }
}

/// `H_m`, the free energy relative to `v∞`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Entropy;

/// `f(λ) = α Σ_{k≥2} λ^k/k! ((2α)^{k−1} − (2α − 1)^{k−1})`, the combination
/// `α/(2α−1)(1 − a^{(2α−1)/α}) − (1 − a²)/2` written in `λ = ln a / α`.
fn entropy_profile_factor(alpha: f64, lambda: f64) -> f64 {
    let g = 2.0 * alpha - 1.0;
    let kappa = (2.0 * alpha).max(g.abs()).max(1.0);
    if kappa * lambda.abs() <= 0.5 {
        let mut sum = 0.0;
        let mut lam_pow = lambda; // λ^{k}/k!
        let mut p2 = 1.0; // (2α)^{k−1}
        let mut pg = 1.0; // (2α − 1)^{k−1}
        for k in 2..80 {
            lam_pow *= lambda / k as f64;
            p2 *= 2.0 * alpha;
            pg *= g;
            sum += lam_pow * (p2 - pg);
            if (lam_pow * (p2.abs() + pg.abs())).abs() <= 1e-18 * sum.abs() {
                break;
            }
        }
        alpha * sum
    } else {
        let t1 = -alpha * lambda * expm1_over(g * lambda);
        let t2 = -(2.0 * alpha * lambda).exp_m1() / 2.0;
        t1 - t2
    }
}

/// `−Q − ln(1 − Q) = Σ_{k≥2} Q^k/k`.
fn neg_log1m_minus(q: f64) -> f64 {
    if q < 0.1 {
        let mut sum = 0.0;
        let mut p = q;
        for k in 2..200 {
            p *= q;
            let term = p / k as f64;
            sum += term;
            if term <= 1e-18 * sum {
                break;
            }
        }
        sum
    } else {
        -q - (-q).ln_1p()
    }
}

impl Metric for Entropy {
    fn name(&self) -> &'static str {
        "entropy"
    }

    fn missing(&self) -> Distance {
        Distance::NotComputed
    }

    fn split(&self, s: &FlowState) -> Result<Option<TermSplit>> {
        let p = &s.params;
        let d = p.d() as f64;
        let shift = 0.5 * s.h_sq();
        if p.regime() == Regime::Gaussian {
            // ½(d s² + |h|² − d − d ln s²) with s² = 1 − e^{−2t}
            let q = (-2.0 * s.t).exp();
            let profile = 0.5 * d * neg_log1m_minus(q);
            let ln_profile = if q > 0.0 {
                profile.ln()
            } else {
                (0.25 * d).ln() - 4.0 * s.t
            };
            return Ok(Some(TermSplit { profile, ln_profile, shift }));
        }
        let Some((m2, nm)) = moments(p) else {
            return Ok(None);
        };
        let alpha = p.alpha();
        let lambda = s.lambda;
        let g = 2.0 * alpha - 1.0;
        let t1 = -alpha * lambda * expm1_over(g * lambda);
        let f = entropy_profile_factor(alpha, lambda);
        // d N_m T1 − M₂ T2 = M₂ (T1 − T2) + (d N_m − M₂) T1
        let profile = m2 * f + (d * nm - m2) * t1;
        let ln_profile = if lambda.abs() > 1e-150 {
            profile.ln()
        } else {
            // f ≈ α λ²/2 with λ ≈ −e^{−t/α}
            (0.5 * alpha * m2).ln() + 2.0 * s.ln_q()
        };
        Ok(Some(TermSplit { profile, ln_profile, shift }))
    }
}

/// `I_m`, the entropy production.
#[derive(Debug, Clone, Copy, Default)]
pub struct Fisher;

impl Metric for Fisher {
    fn name(&self) -> &'static str {
        "fisher"
    }

    fn split(&self, s: &FlowState) -> Result<Option<TermSplit>> {
        let Some((m2, _)) = moments(&s.params) else {
            return Ok(None);
        };
        // 1 − a^{−1/α} = −q/(1 − q) with q = e^{−t/α}
        let q = s.q();
        let ln_profile = 2.0 * s.ln_a + 2.0 * (s.ln_q() - (-q).ln_1p()) + m2.ln();
        Ok(Some(TermSplit {
            profile: ln_profile.exp(),
            ln_profile,
            shift: s.h_sq(),
        }))
    }
}

/// Metrics registered by name.
pub struct MetricRegistry {
    metrics: Vec<Box<dyn Metric>>,
}

impl Default for MetricRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(W2Sq));
        r.register(Box::new(Entropy));
        r.register(Box::new(Fisher));
        r
    }
}

impl MetricRegistry {
    pub fn empty() -> Self {
        Self { metrics: Vec::new() }
    }

    /// Adds a metric, replacing any previous one with the same name.
    pub fn register(&mut self, metric: Box<dyn Metric>) {
        self.metrics.retain(|m| m.name() != metric.name());
        self.metrics.push(metric);
    }

    pub fn get(&self, name: &str) -> Result<&dyn Metric> {
        self.metrics
            .iter()
            .find(|m| m.name() == name)
            .map(|m| m.as_ref())
            .ok_or_else(|| {
                domain(format!(
                    "unknown metric '{name}' (known: {})",
                    self.names().join(", ")
                ))
            })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.metrics.iter().map(|m| m.name()).collect()
    }
}

// ---------------------------------------------------------------------------
// Bregman form of the entropy

/// `H_m(f | v∞)` from the Bregman form
/// `1/(m−1) ∫ f^m − v∞^m − m v∞^{m−1}(f − v∞)`, by radial quadrature.
///
/// `f` is a radial density about the origin; `support` is its support radius
/// when compact. In the porous regime the support must lie inside that of `v∞`.
pub fn entropy_bregman_form(
    params: &ModelParams,
    f: impl Fn(f64) -> f64,
    support: Option<f64>,
    tol: f64,
) -> Result<f64> {
    let stat = *params.stationary_profile();
    let d = params.d();
    let m = params.m();
    let tol = Tolerance::new(0.0, tol);
    match params.regime() {
        Regime::PorousMedium => {
            let r_inf = stat.support_radius().expect("compact profile");
            match support {
                Some(r) if r <= r_inf => {}
                _ => {
                    return Err(Error::Precondition(format!(
                        "density support {support:?} is not inside the equilibrium support {r_inf}"
                    )))
                }
            }
            let dm = params.m_minus_one();
            let g = |r: f64| {
                let v = stat.density(r);
                let fr = f(r);
                if v == 0.0 {
                    return 0.0;
                }
                let vm1 = stat.pressure(r);
                (fr.powf(m) - v.powf(m) - m * vm1 * (fr - v)) / dm
            };
            Ok(radial_quadrature(g, d, RadialDomain::Ball { radius: r_inf }, tol)?.value)
        }
        Regime::FastDiffusion => {
            let dm = params.m_minus_one();
            let length = (stat.norm() / stat.scale()).sqrt();
            let g = |r: f64| {
                let v = stat.density(r);
                let fr = f(r);
                let vm1 = stat.pressure(r);
                (fr.powf(m) - v.powf(m) - m * vm1 * (fr - v)) / dm
            };
            Ok(radial_quadrature(g, d, RadialDomain::Unbounded { length }, tol)?.value)
        }
        Regime::Gaussian => {
            let g = |r: f64| {
                let lv = stat.ln_density(r);
                let fr = f(r);
                let v = lv.exp();
                if fr > 0.0 {
                    fr * (fr.ln() - lv) - fr + v
                } else {
                    v
                }
            };
            Ok(radial_quadrature(g, d, RadialDomain::Unbounded { length: 1.0 }, tol)?.value)
        }
    }
}
