//! Adaptive Gauss–Kronrod quadrature and its radial reductions.
//!
//! The base rule is the 7/15-point Gauss–Kronrod pair with the QUADPACK error
//! heuristic, refined by global bisection of the worst interval. On top of it:
//!
//! * [`radial_quadrature`] integrates radial functions over `R^d`, mapping
//!   `(0, ∞)` to `(0, 1)` with `r = L s/(1 − s)` for heavy tails and using
//!   `w = √(R² − r²)` near the edge of a compact support;
//! * [`off_center_quadrature`] integrates functions of the two radii
//!   `ρ = |x − h|` and `r = |x|` using polar coordinates about `h`.

use std::collections::BinaryHeap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::special::ln_sphere_surface;

/// Subdivision budget for one adaptive integral.
pub const MAX_SUBDIVISIONS: usize = 10_000;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureResult {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub subdivisions: usize,
}

/// Absolute and relative tolerance; an integral is accepted once the error
/// estimate drops below `max(abs, rel·|value|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerance {
    pub fn rel(rel: f64) -> Self {
        Self { abs: 0.0, rel }
    }

    pub fn new(abs: f64, rel: f64) -> Self {
        Self { abs, rel }
    }

    fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }
}

/// Value, error estimate and `∫|f|` from the 15-point Kronrod rule.
fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut abs_k = kronrod.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        kronrod += WGK[j] * (f1 + f2);
        abs_k += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let result = kronrod * half;
    let resasc = asc * half.abs();
    let resabs = abs_k * half.abs();
    let mut err = ((kronrod - gauss) * half).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    (result, err, resabs)
}

/// The fixed 15-point Kronrod rule on `[a, b]`, exact for polynomials of
/// degree 22.
pub fn kronrod15(mut f: impl FnMut(f64) -> f64, a: f64, b: f64) -> f64 {
    gk15(&mut f, a, b).0
}

/// Error level, relative to `∫|f|`, accepted as converged whatever the
/// requested tolerance.
pub const ROUNDOFF_FLOOR: f64 = 100.0 * f64::EPSILON;

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
    abs: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Adaptive integral of `f` over `[a, b]`, first split at `breaks`.
pub fn integrate_with_breaks(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: Tolerance,
) -> Result<QuadratureResult> {
    if a == b {
        return Ok(QuadratureResult {
            value: 0.0,
            abs_error_estimate: 0.0,
            subdivisions: 0,
        });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut points = vec![lo];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|&x| x > lo && x < hi).collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    points.extend(inner);
    points.push(hi);

    let mut heap = BinaryHeap::new();
    let mut frozen_value = 0.0;
    let mut frozen_err = 0.0;
    let mut frozen_abs = 0.0;
    let (mut value, mut err, mut abs) = (0.0, 0.0, 0.0);
    for w in points.windows(2) {
        let (v, e, r) = gk15(&mut f, w[0], w[1]);
        value += v;
        err += e;
        abs += r;
        heap.push(Piece { a: w[0], b: w[1], value: v, err: e, abs: r });
    }
    // below this the estimate is dominated by rounding in the rule itself
    let floor = |abs: f64| ROUNDOFF_FLOOR * abs;
    let mut subdivisions = heap.len();
    loop {
        if !value.is_finite() || !err.is_finite() {
            return Err(Error::Convergence {
                best: value,
                abs_error: err,
                subdivisions,
            });
        }
        if err <= tol.target(value).max(floor(abs)) {
            return Ok(QuadratureResult {
                value: sign * value,
                abs_error_estimate: err,
                subdivisions,
            });
        }
        let Some(worst) = heap.pop() else {
            break;
        };
        let mid = 0.5 * (worst.a + worst.b);
        if subdivisions >= MAX_SUBDIVISIONS {
            heap.push(worst);
            break;
        }
        if !(mid > worst.a && mid < worst.b) {
            // cannot split further; keep its contribution and give up on it
            frozen_value += worst.value;
            frozen_err += worst.err;
            frozen_abs += worst.abs;
            continue;
        }
        let (v1, e1, r1) = gk15(&mut f, worst.a, mid);
        let (v2, e2, r2) = gk15(&mut f, mid, worst.b);
        value += v1 + v2 - worst.value;
        err += e1 + e2 - worst.err;
        abs += r1 + r2 - worst.abs;
        subdivisions += 1;
        heap.push(Piece { a: worst.a, b: mid, value: v1, err: e1, abs: r1 });
        heap.push(Piece { a: mid, b: worst.b, value: v2, err: e2, abs: r2 });
        // re-sum occasionally to stop drift in the running totals
        if subdivisions % 256 == 0 {
            value = frozen_value + heap.iter().map(|p| p.value).sum::<f64>();
            err = frozen_err + heap.iter().map(|p| p.err).sum::<f64>();
            abs = frozen_abs + heap.iter().map(|p| p.abs).sum::<f64>();
        }
    }
    let value = frozen_value + heap.iter().map(|p| p.value).sum::<f64>();
    let err = frozen_err + heap.iter().map(|p| p.err).sum::<f64>();
    let abs = frozen_abs + heap.iter().map(|p| p.abs).sum::<f64>();
    if err <= tol.target(value).max(floor(abs)) {
        return Ok(QuadratureResult {
            value: sign * value,
            abs_error_estimate: err,
            subdivisions,
        });
    }
    Err(Error::Convergence {
        best: sign * value,
        abs_error: err,
        subdivisions,
    })
}

/// Adaptive integral of `f` over `[a, b]`.
pub fn integrate(f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: Tolerance) -> Result<QuadratureResult> {
    integrate_with_breaks(f, a, b, &[], tol)
}

/// Adaptive integral of `f` over `[a, ∞)` through `x = a + L s/(1 − s)`.
pub fn integrate_to_infinity(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    length: f64,
    breaks: &[f64],
    tol: Tolerance,
) -> Result<QuadratureResult> {
    let to_s = |x: f64| {
        let u = (x - a) / length;
        u / (1.0 + u)
    };
    let s_breaks: Vec<f64> = breaks.iter().filter(|&&x| x > a).map(|&x| to_s(x)).collect();
    integrate_with_breaks(
        |s| {
            if s >= 1.0 {
                return 0.0;
            }
            let om = 1.0 - s;
            let x = a + length * s / om;
            let v = f(x);
            if v == 0.0 {
                0.0
            } else {
                v * length / (om * om)
            }
        },
        0.0,
        1.0,
        &s_breaks,
        tol,
    )
}

/// `∫_a^R f(r) dr` where `f` may have an unbounded derivative at `R`; the
/// upper part of the range is integrated in `w = √(R² − r²)`.
pub fn integrate_to_edge(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    edge: f64,
    tol: Tolerance,
) -> Result<QuadratureResult> {
    if !(edge > a) {
        return Ok(QuadratureResult {
            value: 0.0,
            abs_error_estimate: 0.0,
            subdivisions: 0,
        });
    }
    let split = a + 0.5 * (edge - a);
    let first = integrate(&mut f, a, split, tol)?;
    let w_max = ((edge - split) * (edge + split)).sqrt();
    let second = integrate(
        |w| {
            let r = ((edge - w) * (edge + w)).sqrt();
            if r <= 0.0 {
                return 0.0;
            }
            f(r) * w / r
        },
        0.0,
        w_max,
        tol,
    )?;
    Ok(QuadratureResult {
        value: first.value + second.value,
        abs_error_estimate: first.abs_error_estimate + second.abs_error_estimate,
        subdivisions: first.subdivisions + second.subdivisions,
    })
}

/// Domain of a radial integrand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadialDomain {
    /// `(0, ∞)`; `length` sets the scale of the map `r = L s/(1 − s)`.
    Unbounded { length: f64 },
    /// `(0, R]` with a possibly singular derivative at `R`.
    Ball { radius: f64 },
}

/// `∫_{R^d} f(|x|) dx = |S^{d−1}| ∫ f(r) r^{d−1} dr`.
pub fn radial_quadrature(
    f: impl Fn(f64) -> f64,
    d: usize,
    domain: RadialDomain,
    tol: Tolerance,
) -> Result<QuadratureResult> {
    let surface = ln_sphere_surface(d).exp();
    let pow = (d - 1) as i32;
    let g = |r: f64| {
        let v = f(r);
        if v == 0.0 {
            0.0
        } else {
            v * r.powi(pow)
        }
    };
    let scaled = Tolerance::new(tol.abs / surface, tol.rel);
    let res = match domain {
        RadialDomain::Unbounded { length } => integrate_to_infinity(g, 0.0, length, &[], scaled)?,
        RadialDomain::Ball { radius } => integrate_to_edge(g, 0.0, radius, scaled)?,
    };
    Ok(QuadratureResult {
        value: res.value * surface,
        abs_error_estimate: res.abs_error_estimate * surface,
        subdivisions: res.subdivisions,
    })
}

/// Where the off-centre integrand lives.
#[derive(Debug, Clone, PartialEq)]
pub struct OffCenterDomain {
    /// Upper limit for `ρ`, or `None` for the whole space.
    pub rho_max: Option<f64>,
    /// Length scale of the map to `(0, 1)` when `rho_max` is `None`.
    pub length: f64,
    /// Radii `|x|` at which the integrand has a kink, e.g. a support edge.
    pub r_kinks: Vec<f64>,
    /// Distances `ρ` at which the integrand has a kink.
    pub rho_kinks: Vec<f64>,
}

/// `∫_{R^d} F(ρ, r) dx` with `ρ = |x − h|`, `r = |x|` and `|h| = h`.
///
/// For `d ≥ 2` the angle `φ` between `x − h` and `h` is integrated with the
/// weight `sin^{d−2} φ · |S^{d−2}|`; for `d = 1` the two points at distance
/// `ρ` from `h` are summed.
pub fn off_center_quadrature(
    f: impl Fn(f64, f64) -> f64,
    d: usize,
    h: f64,
    domain: &OffCenterDomain,
    tol: Tolerance,
) -> Result<QuadratureResult> {
    let mut rho_breaks = domain.rho_kinks.clone();
    for &k in &domain.r_kinks {
        rho_breaks.push((k - h).abs());
        rho_breaks.push(k + h);
    }
    let inner_tol = Tolerance::new(tol.abs * 1e-3, tol.rel * 1e-2);
    let mut failure: Option<Error> = None;
    let mut inner_subdivisions = 0usize;
    let mut radial = |rho: f64| -> f64 {
        if failure.is_some() {
            return 0.0;
        }
        let val = if d == 1 {
            f(rho, (h + rho).abs()) + f(rho, (h - rho).abs())
        } else if h == 0.0 || rho == 0.0 {
            f(rho, rho.hypot(h)) * sphere_angle_mass(d)
        } else {
            let mut phi_breaks = Vec::new();
            for &k in &domain.r_kinks {
                let c = (k * k - h * h - rho * rho) / (2.0 * h * rho);
                if c > -1.0 && c < 1.0 {
                    phi_breaks.push(c.acos());
                }
            }
            let pow = (d - 2) as i32;
            let ang = integrate_with_breaks(
                |phi| {
                    let (s, c) = phi.sin_cos();
                    let r2 = h * h + rho * rho + 2.0 * h * rho * c;
                    let w = if pow == 0 { 1.0 } else { s.powi(pow) };
                    if w == 0.0 {
                        return 0.0;
                    }
                    f(rho, r2.max(0.0).sqrt()) * w
                },
                0.0,
                std::f64::consts::PI,
                &phi_breaks,
                inner_tol,
            );
            match ang {
                Ok(r) => {
                    inner_subdivisions += r.subdivisions;
                    r.value
                }
                Err(e) => {
                    failure = Some(e);
                    0.0
                }
            }
        };
        if val == 0.0 {
            0.0
        } else if d == 1 {
            val
        } else {
            val * rho.powi((d - 1) as i32)
        }
    };
    let res = match domain.rho_max {
        Some(rmax) => integrate_with_breaks(&mut radial, 0.0, rmax, &rho_breaks, tol),
        None => integrate_to_infinity(&mut radial, 0.0, domain.length, &rho_breaks, tol),
    };
    if let Some(e) = failure {
        return Err(e);
    }
    let res = res?;
    let scale = if d == 1 { 1.0 } else { ln_sphere_surface_minus_one(d).exp() };
    Ok(QuadratureResult {
        value: res.value * scale,
        abs_error_estimate: res.abs_error_estimate * scale,
        subdivisions: res.subdivisions + inner_subdivisions,
    })
}

/// `ln |S^{d−2}|`, the measure of the sphere of directions orthogonal to `h`.
fn ln_sphere_surface_minus_one(d: usize) -> f64 {
    debug_assert!(d >= 2);
    if d == 2 {
        2f64.ln()
    } else {
        ln_sphere_surface(d - 1)
    }
}

/// `∫_0^π sin^{d−2} φ dφ`, so that `|S^{d−2}| · this = |S^{d−1}|`.
fn sphere_angle_mass(d: usize) -> f64 {
    (ln_sphere_surface(d) - ln_sphere_surface_minus_one(d)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_exact() {
        let r = integrate(|x| x * x * x - 2.0 * x, 0.0, 3.0, Tolerance::rel(1e-12)).unwrap();
        assert!((r.value - (81.0 / 4.0 - 9.0)).abs() < 1e-13);
    }

    #[test]
    fn endpoint_singularity() {
        let r = integrate(|x| 1.0 / x.sqrt(), 0.0, 1.0, Tolerance::rel(1e-10)).unwrap();
        assert!((r.value - 2.0).abs() < 1e-9);
    }

    #[test]
    fn infinite_range() {
        let r = integrate_to_infinity(|x| 1.0 / (1.0 + x * x), 0.0, 1.0, &[], Tolerance::rel(1e-12)).unwrap();
        assert!((r.value - 0.5 * PI).abs() < 1e-11);
    }

    #[test]
    fn edge_substitution() {
        // ∫_0^1 √(1 − r²) dr = π/4
        let r = integrate_to_edge(|x| (1.0 - x * x).max(0.0).sqrt(), 0.0, 1.0, Tolerance::rel(1e-12)).unwrap();
        assert!((r.value - 0.25 * PI).abs() < 1e-11);
    }

    #[test]
    fn gaussian_normalizes() {
        for d in 1..=12 {
            let f = |r: f64| (2.0 * PI).powf(-0.5 * d as f64) * (-0.5 * r * r).exp();
            let r = radial_quadrature(f, d, RadialDomain::Unbounded { length: 1.0 }, Tolerance::rel(1e-12)).unwrap();
            assert!((r.value - 1.0).abs() < 1e-10, "d={d}: {}", r.value);
        }
    }

    #[test]
    fn off_center_matches_radial() {
        // a Gaussian centred at h integrates to 1 whatever the split
        for d in [1usize, 2, 3, 7] {
            for h in [0.0, 0.8, 2.5] {
                let f = |rho: f64, _r: f64| (2.0 * PI).powf(-0.5 * d as f64) * (-0.5 * rho * rho).exp();
                let dom = OffCenterDomain { rho_max: None, length: 1.0, r_kinks: vec![1.5], rho_kinks: vec![] };
                let r = off_center_quadrature(f, d, h, &dom, Tolerance::rel(1e-11)).unwrap();
                assert!((r.value - 1.0).abs() < 1e-9, "d={d} h={h}: {}", r.value);
                // E|X|² = d + h² exercises the r dependence
                let g = |rho: f64, r: f64| r * r * (2.0 * PI).powf(-0.5 * d as f64) * (-0.5 * rho * rho).exp();
                let r = off_center_quadrature(g, d, h, &dom, Tolerance::rel(1e-11)).unwrap();
                let want = d as f64 + h * h;
                assert!((r.value - want).abs() < 1e-9 * want, "d={d} h={h}: {}", r.value);
            }
        }
    }

    #[test]
    fn reports_non_convergence() {
        let r = integrate(|x| (1.0 / x).sin() / x, 1e-9, 1.0, Tolerance::rel(1e-15));
        assert!(matches!(r, Err(Error::Convergence { .. })));
    }
}
