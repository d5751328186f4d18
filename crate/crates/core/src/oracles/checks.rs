//! Quadrature values of profile moments, of `H_m` and `I_m` along the flow,
//! and the entropy-production identity `dH/dt = −I`.
//!
//! The `H_m` and `I_m` integrals are taken over `R^d` in the coordinates `ρ = |x − h|`
//! (distance to the centre of `v(t)`) and the angle to `h`, so the `|x|²`
//! terms and the equilibrium density are evaluated at the true `|x|`.

use serde::Serialize;

use crate::barenblatt::{ModelParams, ProfileShape, RadialProfile, Regime};
use crate::divergences::{entropy_flow, fisher_flow};
use crate::dynamics::{flow_state, FlowState};
use crate::error::{domain, Result};
use crate::format::ser_num;
use crate::oracles::quadrature::{
    off_center_quadrature, radial_quadrature, OffCenterDomain, QuadratureResult, RadialDomain, Tolerance,
};

/// Tolerance used by the quadrature checks.
pub const CHECK_TOL: Tolerance = Tolerance { abs: 1e-13, rel: 1e-9 };

/// Tolerance used for moments and `L^m` norms.
pub const MOMENT_TOL: Tolerance = Tolerance { abs: 0.0, rel: 1e-11 };

fn profile_domain(profile: &RadialProfile) -> RadialDomain {
    match profile.shape() {
        ProfileShape::Compact { .. } => RadialDomain::Ball {
            radius: profile.support_radius().expect("compact profile"),
        },
        ProfileShape::FullSpace { .. } => RadialDomain::Unbounded {
            length: (profile.norm() / profile.scale()).sqrt(),
        },
        ProfileShape::Gaussian { variance } => RadialDomain::Unbounded { length: variance.sqrt() },
    }
}

/// `∫ |x|^a B(x) dx` by radial quadrature.
pub fn moment_quadrature(profile: &RadialProfile, a: f64) -> Result<QuadratureResult> {
    let f = |r: f64| {
        let v = profile.ln_density(r);
        if v == f64::NEG_INFINITY {
            0.0
        } else if a == 0.0 {
            v.exp()
        } else {
            (v + a * r.ln()).exp()
        }
    };
    radial_quadrature(f, profile.dim(), profile_domain(profile), MOMENT_TOL)
}

/// `∫ B(x)^m dx` by radial quadrature.
pub fn lm_norm_quadrature(profile: &RadialProfile, m: f64) -> Result<QuadratureResult> {
    let f = |r: f64| (m * profile.ln_density(r)).exp();
    radial_quadrature(f, profile.dim(), profile_domain(profile), MOMENT_TOL)
}

fn domain_for(state: &FlowState, with_equilibrium: bool) -> OffCenterDomain {
    let params = state.params();
    let stat = params.stationary_profile();
    let h = state.h_norm;
    match params.regime() {
        Regime::PorousMedium => {
            let r_inf = stat.support_radius().expect("compact profile");
            let a_r = state.a * r_inf;
            if with_equilibrium {
                OffCenterDomain {
                    rho_max: Some(a_r.max(r_inf + h)),
                    length: a_r,
                    r_kinks: vec![r_inf],
                    rho_kinks: vec![a_r],
                }
            } else {
                OffCenterDomain {
                    rho_max: Some(a_r),
                    length: a_r,
                    r_kinks: vec![],
                    rho_kinks: vec![],
                }
            }
        }
        Regime::FastDiffusion => OffCenterDomain {
            rho_max: None,
            length: state.a * (stat.norm() / stat.scale()).sqrt() + h,
            r_kinks: vec![],
            rho_kinks: vec![],
        },
        Regime::Gaussian => OffCenterDomain {
            rho_max: None,
            length: state.a + h,
            r_kinks: vec![],
            rho_kinks: vec![],
        },
    }
}

/// `H_m(v(t) | v∞)` by two-dimensional quadrature.
pub fn entropy_quadrature(params: &ModelParams, t: f64, x0_norm: f64) -> Result<QuadratureResult> {
    let state = flow_state(params, t, x0_norm)?;
    let stat = *params.stationary_profile();
    let d = params.d();
    let ad = -(d as f64) * state.ln_a;
    let a = state.a;
    let dom = domain_for(&state, true);
    if params.regime() == Regime::Gaussian {
        let g = |rho: f64, r: f64| {
            let lf = ad + stat.ln_density(rho / a);
            let lv = stat.ln_density(r);
            let (f, v) = (lf.exp(), lv.exp());
            f * lf - v * lv + 0.5 * r * r * (f - v)
        };
        return off_center_quadrature(g, d, state.h_norm, &dom, CHECK_TOL);
    }
    let m = params.m();
    let dm = params.m_minus_one();
    let g = |rho: f64, r: f64| {
        let lf = ad + stat.ln_density(rho / a);
        let lv = stat.ln_density(r);
        let (f, v) = (lf.exp(), lv.exp());
        if f == 0.0 && v == 0.0 {
            return 0.0;
        }
        ((m * lf).exp() - (m * lv).exp()) / dm + 0.5 * r * r * (f - v)
    };
    off_center_quadrature(g, d, state.h_norm, &dom, CHECK_TOL)
}

/// `I_m(v(t) | v∞) = ∫ v |x + (m/(m−1)) ∇v^{m−1}|²` over `{v > 0}`, by
/// two-dimensional quadrature with the gradient in closed form.
pub fn fisher_quadrature(params: &ModelParams, t: f64, x0_norm: f64) -> Result<QuadratureResult> {
    let state = flow_state(params, t, x0_norm)?;
    let stat = *params.stationary_profile();
    let d = params.d();
    let ad = -(d as f64) * state.ln_a;
    let a = state.a;
    let h = state.h_norm;
    let dom = domain_for(&state, false);
    // radial component k(ρ) of (m/(m−1)) ∇v^{m−1}
    let coeff = match params.regime() {
        Regime::Gaussian => 1.0 / a,
        _ => {
            let m = params.m();
            m / params.m_minus_one() * (-(d as f64) * params.m_minus_one() * state.ln_a).exp() / a
        }
    };
    let g = |rho: f64, r: f64| {
        let f = (ad + stat.ln_density(rho / a)).exp();
        if f == 0.0 {
            return 0.0;
        }
        let k = coeff * stat.pressure_slope(rho / a);
        // x · e_ρ from |x|² = |h|² + ρ² + 2 h ρ cos φ
        let x_dot = if rho > 0.0 {
            (r * r - h * h + rho * rho) / (2.0 * rho)
        } else {
            0.0
        };
        f * (r * r + k * k + 2.0 * k * x_dot).max(0.0)
    };
    off_center_quadrature(g, d, h, &dom, CHECK_TOL)
}

/// Central difference of `H` against `−I`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntropyProduction {
    #[serde(serialize_with = "ser_num")]
    pub dh_dt: f64,
    #[serde(serialize_with = "ser_num")]
    pub minus_i: f64,
    #[serde(serialize_with = "ser_num")]
    pub abs_gap: f64,
    #[serde(serialize_with = "ser_num")]
    pub rel_gap: f64,
}

pub fn entropy_production_check(
    params: &ModelParams,
    t: f64,
    x0_norm: f64,
    step: f64,
) -> Result<EntropyProduction> {
    if !(step > 0.0 && t > step) {
        return Err(domain(format!("need 0 < step < t (t = {t}, step = {step})")));
    }
    let finite = |x: crate::divergences::Distance| {
        x.value()
            .ok_or_else(|| domain("entropy production needs a finite second moment"))
    };
    let hp = finite(entropy_flow(params, t + step, x0_norm)?)?;
    let hm = finite(entropy_flow(params, t - step, x0_norm)?)?;
    let i = finite(fisher_flow(params, t, x0_norm)?)?;
    let dh_dt = (hp - hm) / (2.0 * step);
    let abs_gap = (dh_dt + i).abs();
    Ok(EntropyProduction {
        dh_dt,
        minus_i: -i,
        abs_gap,
        rel_gap: if i > 0.0 { abs_gap / i } else { abs_gap },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a / b - 1.0).abs()
    }

    #[test]
    fn entropy_quadrature_matches_closed_form() {
        for (d, m, t, x0) in [(4, 1.5, 1.0, 2.0), (3, 0.8, 0.7, 1.5), (5, 1.0, 0.5, 2.0), (3, 0.9, 1.0, 0.0)] {
            let params = ModelParams::from_m(d, m).unwrap();
            let q = entropy_quadrature(&params, t, x0).unwrap().value;
            let c = entropy_flow(&params, t, x0).unwrap().as_f64();
            assert!(rel(q, c) < 1e-6, "d={d} m={m}: {q} vs {c}");
        }
    }

    #[test]
    fn fisher_quadrature_matches_closed_form() {
        for (d, m, t, x0) in [(4, 1.5, 1.0, 2.0), (3, 0.8, 0.7, 0.0), (2, 2.0, 0.6, 1.0), (6, 1.0, 1.0, 1.0)] {
            let params = ModelParams::from_m(d, m).unwrap();
            let q = fisher_quadrature(&params, t, x0).unwrap().value;
            let c = fisher_flow(&params, t, x0).unwrap().as_f64();
            assert!(rel(q, c) < 1e-6, "d={d} m={m}: {q} vs {c}");
        }
    }

    #[test]
    fn moments_match_quadrature() {
        for (d, m) in [(3, 0.9), (6, 1.5), (12, 1.0)] {
            let params = ModelParams::from_m(d, m).unwrap();
            let prof = params.stationary_profile();
            for a in [0.0, 2.0, 4.0] {
                let q = moment_quadrature(prof, a).unwrap().value;
                assert!(rel(q, prof.moment(a).unwrap()) < 1e-8);
            }
            let q = lm_norm_quadrature(prof, params.m()).unwrap().value;
            assert!(rel(q, prof.lm_norm(params.m()).unwrap()) < 1e-8);
        }
    }

    #[test]
    fn equilibrium_limit() {
        let params = ModelParams::from_m(3, 1.5).unwrap();
        assert!(entropy_quadrature(&params, 40.0, 1.0).unwrap().value.abs() < 1e-8);
        assert!(fisher_quadrature(&params, 40.0, 1.0).unwrap().value.abs() < 1e-8);
    }

    #[test]
    fn entropy_production_identity() {
        for (d, m) in [(3, 0.8), (10, 1.2), (5, 1.0)] {
            let params = ModelParams::from_m(d, m).unwrap();
            let e = entropy_production_check(&params, 1.0, 2.0, 1e-5).unwrap();
            assert!(e.rel_gap < 1e-6, "{e:?}");
        }
        let gauss = ModelParams::from_m(4, 1.0).unwrap();
        assert!(entropy_production_check(&gauss, 0.7, 1.0, 1e-5).unwrap().rel_gap < 1e-8);
        let flat = ModelParams::from_alpha(6, 1.0).unwrap();
        assert!(entropy_production_check(&flat, 3.0, 0.0, 1e-5).unwrap().abs_gap < 1e-10);
    }
}
