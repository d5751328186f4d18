//! Closed-form solutions of the flow started from a Dirac mass.
//!
//! The Fokker–Planck solution from `δ_{x0}` is the image of the stationary
//! profile `v∞` under `x ↦ a(t) x + h(t)` with
//!
//! ```text
//! a(t) = (1 − e^{−t/α})^α,    h(t) = e^{−t} x0.
//! ```
//!
//! Densities are radial about the moving centre, so the API takes radii.
//! The self-similar solution `u(t, x) = t^{−αd} B((x − x0)/t^α)` of the
//! plain diffusion equation is linked to `v` by `R(t) = (1 + t/α)^α` and
//! `τ(t) = α ln(1 + t/α)`.

use serde::Serialize;

use crate::barenblatt::ModelParams;
use crate::error::{domain, Result};

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("time must be finite and positive, got {t}")))
    }
}

/// `ln a(t)` with `a(t) = (1 − e^{−t/α})^α`.
pub fn ln_scale_factor(t: f64, alpha: f64) -> Result<f64> {
    check_time(t)?;
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(domain(format!("alpha must be positive, got {alpha}")));
    }
    let s = t / alpha;
    // ln(1 − e^{−s}): expm1 for small s, ln_1p once e^{−s} is small
    let l = if s < std::f64::consts::LN_2 {
        (-(-s).exp_m1()).ln()
    } else {
        (-(-s).exp()).ln_1p()
    };
    Ok(alpha * l)
}

/// The scale `a(t) ∈ (0, 1)`.
pub fn scale_factor(t: f64, alpha: f64) -> Result<f64> {
    Ok(ln_scale_factor(t, alpha)?.exp())
}

/// `R(t) = (1 + t/α)^α`.
pub fn big_r(t: f64, alpha: f64) -> f64 {
    (alpha * (t / alpha).ln_1p()).exp()
}

/// `τ(t) = α ln(1 + t/α)`.
pub fn tau(t: f64, alpha: f64) -> f64 {
    alpha * (t / alpha).ln_1p()
}

/// `τ^{−1}(s) = α(e^{s/α} − 1)`.
pub fn tau_inverse(s: f64, alpha: f64) -> f64 {
    alpha * (s / alpha).exp_m1()
}

/// The solution at time `t`, reduced to the scale `a` and shift `|h|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowState {
    #[serde(skip)]
    pub params: ModelParams,
    pub t: f64,
    pub x0_norm: f64,
    pub a: f64,
    pub h_norm: f64,
    /// `ln a`.
    pub ln_a: f64,
    /// `ln(1 − a)`, finite even when `e^{−t/α}` underflows.
    pub ln_one_minus_a: f64,
    /// `ln(1 − e^{−t/α})`, i.e. `ln a / α`.
    pub lambda: f64,
}

impl FlowState {
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// `1 − a`.
    pub fn one_minus_a(&self) -> f64 {
        self.ln_one_minus_a.exp()
    }

    /// `e^{−t/α}`.
    pub fn q(&self) -> f64 {
        (-self.t / self.params.alpha()).exp()
    }

    /// `ln e^{−t/α}`.
    pub fn ln_q(&self) -> f64 {
        -self.t / self.params.alpha()
    }

    /// `|h|² = e^{−2t}|x0|²`.
    pub fn h_sq(&self) -> f64 {
        self.h_norm * self.h_norm
    }

    /// Support radius of `v(t, ·)` about `h` in the compact regime.
    pub fn support_radius(&self) -> Option<f64> {
        self.params
            .stationary_profile()
            .support_radius()
            .map(|r| self.a * r)
    }
}

pub fn flow_state(params: &ModelParams, t: f64, x0_norm: f64) -> Result<FlowState> {
    if !(x0_norm >= 0.0 && x0_norm.is_finite()) {
        return Err(domain(format!("|x0| must be finite and non-negative, got {x0_norm}")));
    }
    let alpha = params.alpha();
    let ln_a = ln_scale_factor(t, alpha)?;
    let s = t / alpha;
    let q = (-s).exp();
    // 1 − a = q · r(q) with r(q) → α as q → 0
    let ratio = if q > 1e-8 {
        -ln_a.exp_m1() / q
    } else {
        alpha * (1.0 + 0.5 * (1.0 - alpha) * q)
    };
    let ln_one_minus_a = -s + ratio.ln();
    Ok(FlowState {
        params: *params,
        t,
        x0_norm,
        a: ln_a.exp(),
        h_norm: (-t).exp() * x0_norm,
        ln_a,
        ln_one_minus_a,
        lambda: ln_a / alpha,
    })
}

/// `ln v(t, x)` at distance `r` from the centre `h(t)`.
pub fn ln_solution_density(state: &FlowState, radius_from_center: f64) -> f64 {
    let d = state.params.d() as f64;
    -d * state.ln_a
        + state
            .params
            .stationary_profile()
            .ln_density(radius_from_center / state.a)
}

/// `v(t, x) = a^{−d} v∞((x − h)/a)` at distance `r` from `h(t)`.
pub fn solution_density(state: &FlowState, radius_from_center: f64) -> f64 {
    ln_solution_density(state, radius_from_center).exp()
}

/// `u(t, x) = t^{−αd} B((x − x0)/t^α)`, with `radius` measured from `x0`.
pub fn self_similar_density(params: &ModelParams, t: f64, radius: f64) -> Result<f64> {
    check_time(t)?;
    let ad = params.alpha() * params.d() as f64;
    let ln_scale = params.alpha() * t.ln();
    let ln_b = params.unit_profile().ln_density(radius / ln_scale.exp());
    Ok((ln_b - ad * t.ln()).exp())
}

/// `|u(t, x) − R^{−d} v(τ, x/R)|` at the point `x = radius · x0/|x0|`.
///
/// Both sides are assembled independently: `u` from the unit profile `B`,
/// the right-hand side from `v∞`, `a(τ)` and `h(τ)`.
pub fn change_of_variables_residual(
    params: &ModelParams,
    t: f64,
    radius: f64,
    x0_norm: f64,
) -> Result<f64> {
    check_time(t)?;
    let u = self_similar_density(params, t, (radius - x0_norm).abs())?;
    let alpha = params.alpha();
    let r = big_r(t, alpha);
    let s = tau(t, alpha);
    let state = flow_state(params, s, x0_norm)?;
    let y = radius / r;
    let v = solution_density(&state, (y - state.h_norm).abs());
    let d = params.d() as i32;
    Ok((u - v / r.powi(d)).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn scale_factor_examples() {
        assert!(rel(scale_factor(2f64.ln(), 1.0).unwrap(), 0.5) < 1e-15);
        for alpha in [0.3, 1.0, 2.5] {
            let t = 100.0 * alpha;
            let a = scale_factor(t, alpha).unwrap();
            let q = (-t / alpha).exp();
            assert!((a - (1.0 - alpha * q)).abs() <= 2.0 * alpha * alpha * q * q);
        }
        for t in [0.01, 0.5, 3.0] {
            let a = scale_factor(t, 0.5).unwrap();
            assert!(rel(a, (1.0 - (-2.0 * t).exp()).sqrt()) < 1e-14);
        }
        assert!(scale_factor(0.0, 1.0).is_err());
        assert!(scale_factor(-1.0, 1.0).is_err());
    }

    #[test]
    fn scale_factor_tiny_time() {
        // a ≈ (t/α)^α for small t; naive 1 − e^{−t/α} would lose digits
        let a = scale_factor(1e-12, 1.0).unwrap();
        assert!(rel(a, 1e-12) < 1e-9);
    }

    #[test]
    fn flow_state_examples() {
        let p = ModelParams::from_alpha(10, 2.0).unwrap();
        let s = flow_state(&p, 100.0, 0.0).unwrap();
        assert!((1.0 - s.a).abs() <= 1e-20 || s.a == 1.0);
        assert_eq!(s.h_norm, 0.0);
        for t in [0.1, 1.0, 7.0] {
            let s = flow_state(&p, t, 5.0).unwrap();
            assert!(rel(s.h_norm, 5.0 * (-t).exp()) < 1e-14);
        }
        let g = ModelParams::from_m(4, 1.0).unwrap();
        let s = flow_state(&g, 0.7, 2.0).unwrap();
        assert!(rel(s.a * s.a, 1.0 - (-1.4f64).exp()) < 1e-14);
        assert!(rel(s.h_norm, 2.0 * (-0.7f64).exp()) < 1e-15);
    }

    #[test]
    fn one_minus_a_survives_underflow() {
        let p = ModelParams::from_m(100_000, 2.0).unwrap();
        let t = 4.6;
        let s = flow_state(&p, t, 1.0).unwrap();
        let alpha = p.alpha();
        assert_eq!(s.q(), 0.0);
        assert!(rel(s.ln_one_minus_a, alpha.ln() - t / alpha) < 1e-12);
        // and agrees with the direct formula where both are representable
        for t in [1e-4, 2e-4] {
            let s = flow_state(&p, t, 1.0).unwrap();
            assert!(rel(s.one_minus_a(), -s.ln_a.exp_m1()) < 1e-12);
        }
    }

    #[test]
    fn solution_density_limits() {
        let p = ModelParams::from_m(3, 0.8).unwrap();
        let s = flow_state(&p, 60.0, 0.0).unwrap();
        for r in [0.0, 0.5, 2.0] {
            assert!(rel(solution_density(&s, r), p.stationary_profile().density(r)) < 1e-12);
        }
        let q = ModelParams::from_m(3, 1.5).unwrap();
        let s = flow_state(&q, 0.3, 1.0).unwrap();
        let edge = s.support_radius().unwrap();
        assert_eq!(solution_density(&s, edge * 1.000001), 0.0);
        assert!(solution_density(&s, edge * 0.99) > 0.0);
    }

    #[test]
    fn heat_kernel_at_m_one() {
        let p = ModelParams::from_m(3, 1.0).unwrap();
        for (t, r) in [(0.5, 0.3), (2.0, 1.7)] {
            let want = (4.0 * PI * t).powf(-1.5) * (-r * r / (4.0 * t)).exp();
            assert!(rel(self_similar_density(&p, t, r).unwrap(), want) < 1e-13);
        }
        let q = ModelParams::from_m(5, 0.9).unwrap();
        assert!(rel(
            self_similar_density(&q, 1.0, 0.8).unwrap(),
            q.unit_profile().density(0.8)
        ) < 1e-14);
    }

    #[test]
    fn change_of_variables_examples() {
        for (d, m) in [(3, 0.8), (5, 1.4), (2, 1.0), (1, 0.7), (6, 2.0)] {
            let p = ModelParams::from_m(d, m).unwrap();
            for &t in &[0.05, 0.7, 3.0] {
                for &r in &[0.0, 0.4, 1.3, 2.5] {
                    let u = self_similar_density(&p, t, (r - 1.2f64).abs()).unwrap();
                    let res = change_of_variables_residual(&p, t, r, 1.2).unwrap();
                    assert!(res <= 1e-10 * u.max(1e-300), "d={d} m={m} t={t} r={r}: {res} vs {u}");
                }
            }
        }
        for alpha in [0.2, 1.0, 3.0] {
            assert!(rel(tau_inverse(1.0, alpha), alpha * ((1.0 / alpha).exp() - 1.0)) < 1e-14);
            let t = 2.3;
            assert!(rel(tau_inverse(tau(t, alpha), alpha), t) < 1e-14);
        }
    }

    proptest! {
        #[test]
        fn scale_factor_is_increasing(t1 in 1e-3f64..50.0, dt in 1e-3f64..5.0, alpha in 0.05f64..5.0) {
            let a1 = scale_factor(t1, alpha).unwrap();
            let a2 = scale_factor(t1 + dt, alpha).unwrap();
            prop_assert!(a1 <= a2);
            prop_assert!(a1 > 0.0 && a2 <= 1.0);
        }
    }
}
