//! Cutoff schedules and dimension sweeps.
//!
//! For a schedule `t_d = (1 ± ε) c ln d` the worst distance over initial
//! points in the ball `|x0| ≤ r d^θ` either blows up or collapses as `d`
//! grows. The metrics are non-decreasing in `|x0|`, so the supremum is the
//! value at `|x0| = r d^θ`.
//!
//! Finite-`d` behaviour is classified by the log-log slope of the sup
//! distance against `d`.

use rayon::prelude::*;
use serde::Serialize;

use crate::barenblatt::ModelParams;
use crate::divergences::{Distance, Metric, MetricRegistry};
use crate::dynamics::flow_state;
use crate::error::{domain, Error, Result};
use crate::format::ser_num;

/// Slope above which a sweep is said to diverge (below minus this: vanish).
pub const SLOPE_THRESHOLD: f64 = 0.05;
/// Minimum coefficient of determination for a verdict.
pub const R_SQUARED_THRESHOLD: f64 = 0.9;

/// How `(m, α)` move with `d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum Mode {
    FixedAlpha(f64),
    FixedM(f64),
}

impl Mode {
    pub fn params(&self, d: usize) -> Result<ModelParams> {
        match *self {
            Mode::FixedAlpha(alpha) => ModelParams::from_alpha(d, alpha),
            Mode::FixedM(m) => ModelParams::from_m(d, m),
        }
    }
}

/// Which side of the critical time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// `(1 − ε) t_d`.
    Below,
    /// `(1 + ε) t_d`.
    Above,
}

impl Side {
    pub fn name(self) -> &'static str {
        match self {
            Side::Below => "below",
            Side::Above => "above",
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Side::Below => -1.0,
            Side::Above => 1.0,
        }
    }

    pub fn parse(s: &str) -> Result<Side> {
        match s {
            "below" => Ok(Side::Below),
            "above" => Ok(Side::Above),
            _ => Err(domain(format!("side must be 'below' or 'above', got '{s}'"))),
        }
    }
}

/// A cutoff schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScheduleSpec {
    pub mode: Mode,
    #[serde(serialize_with = "ser_num")]
    pub eps: f64,
    #[serde(serialize_with = "ser_num")]
    pub r: f64,
    #[serde(serialize_with = "ser_num")]
    pub theta: f64,
    pub side: Side,
}

impl ScheduleSpec {
    pub fn new(mode: Mode, eps: f64, r: f64, theta: f64, side: Side) -> Result<Self> {
        let spec = Self { mode, eps, r, theta, side };
        spec.validate()?;
        Ok(spec)
    }

    /// `θ = 1/2` and `r = 1`.
    pub fn standard(mode: Mode, eps: f64, side: Side) -> Result<Self> {
        Self::new(mode, eps, 1.0, 0.5, side)
    }

    pub fn validate(&self) -> Result<()> {
        // ε = 0 is allowed so that the critical time itself can be queried
        if !(self.eps >= 0.0 && self.eps < 1.0) {
            return Err(domain(format!("eps must lie in [0, 1), got {}", self.eps)));
        }
        if !(self.theta >= 0.0 && self.theta.is_finite()) {
            return Err(domain(format!("theta must be non-negative, got {}", self.theta)));
        }
        if !(self.r >= 0.0 && self.r.is_finite()) {
            return Err(domain(format!("r must be non-negative, got {}", self.r)));
        }
        match self.mode {
            Mode::FixedAlpha(a) if !(a > 0.0 && a.is_finite()) => {
                Err(domain(format!("alpha must be positive, got {a}")))
            }
            Mode::FixedM(m) if !(m > 0.0 && m.is_finite()) => {
                Err(domain(format!("m must be positive, got {m}")))
            }
            _ => Ok(()),
        }
    }

    pub fn with_side(&self, side: Side) -> Self {
        Self { side, ..*self }
    }

    /// The coefficient `c` of `t_d = (1 ± ε) c ln d`.
    pub fn rate(&self) -> f64 {
        match self.mode {
            Mode::FixedAlpha(alpha) => (0.5 * alpha).max(self.theta),
            Mode::FixedM(_) => self.theta,
        }
    }

    /// `|x0| = r d^θ` at the edge of the initial ball.
    pub fn x0_norm(&self, d: usize) -> f64 {
        self.r * (d as f64).powf(self.theta)
    }

    /// Leading log-log slope of the sup distance, from the two competing
    /// terms `d^{2θ} e^{−2t}` and `d e^{−2t/α}`.
    pub fn predicted_slope(&self) -> f64 {
        let k = 1.0 + self.side.sign() * self.eps;
        let c = self.rate();
        let shift = 2.0 * self.theta - 2.0 * c * k;
        match self.mode {
            Mode::FixedAlpha(alpha) => shift.max(1.0 - 2.0 * c * k / alpha),
            // α → 0 with d, so the profile term decays faster than any power
            Mode::FixedM(_) => shift,
        }
    }
}

/// `t_d = (1 ± ε) c ln d`.
pub fn critical_time(d: usize, spec: &ScheduleSpec) -> Result<f64> {
    if d < 2 {
        return Err(domain(format!("critical time needs d ≥ 2, got {d}")));
    }
    spec.validate()?;
    let k = 1.0 + spec.side.sign() * spec.eps;
    Ok(k * spec.rate() * (d as f64).ln())
}

/// The metric at `|x0| = r d^θ`.
pub fn sup_distance(
    params: &ModelParams,
    t: f64,
    r: f64,
    theta: f64,
    metric: &dyn Metric,
) -> Result<Distance> {
    let x0 = r * (params.d() as f64).powf(theta);
    metric.evaluate(&flow_state(params, t, x0)?)
}

/// One point of a cutoff curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutoffScanRow {
    pub d: usize,
    pub side: Side,
    #[serde(serialize_with = "ser_num")]
    pub eps: f64,
    #[serde(serialize_with = "ser_num")]
    pub t: f64,
    pub metric: String,
    pub sup_dist: Distance,
    #[serde(serialize_with = "ser_num")]
    pub x0_norm: f64,
    pub mode: Mode,
    #[serde(serialize_with = "ser_num")]
    pub r: f64,
    #[serde(serialize_with = "ser_num")]
    pub theta: f64,
}

/// Sup distances for every `(d, metric, side)`, ordered by `d`, then side,
/// then metric in the order given. Dimensions are evaluated in parallel.
pub fn scan(
    spec: &ScheduleSpec,
    dims: &[usize],
    metrics: &[&str],
    sides: &[Side],
    registry: &MetricRegistry,
) -> Result<Vec<CutoffScanRow>> {
    spec.validate()?;
    if dims.is_empty() {
        return Err(domain("dims must not be empty"));
    }
    if let Some(w) = dims.windows(2).find(|w| w[0] >= w[1]) {
        return Err(domain(format!("dims must be strictly increasing ({} then {})", w[0], w[1])));
    }
    if let Some(&d) = dims.iter().find(|&&d| d < 3) {
        return Err(domain(format!("dims must be at least 3, got {d}")));
    }
    if metrics.is_empty() || sides.is_empty() {
        return Err(domain("at least one metric and one side are required"));
    }
    let resolved: Vec<&dyn Metric> = metrics.iter().map(|m| registry.get(m)).collect::<Result<_>>()?;
    let per_d: Vec<Result<Vec<CutoffScanRow>>> = dims
        .par_iter()
        .map(|&d| {
            let params = spec.mode.params(d)?;
            let mut rows = Vec::with_capacity(sides.len() * resolved.len());
            for &side in sides {
                let s = spec.with_side(side);
                let t = critical_time(d, &s)?;
                let x0 = s.x0_norm(d);
                let state = flow_state(&params, t, x0)?;
                for metric in &resolved {
                    rows.push(CutoffScanRow {
                        d,
                        side,
                        eps: s.eps,
                        t,
                        metric: metric.name().to_string(),
                        sup_dist: metric.evaluate(&state)?,
                        x0_norm: x0,
                        mode: s.mode,
                        r: s.r,
                        theta: s.theta,
                    });
                }
            }
            Ok(rows)
        })
        .collect();
    let mut out = Vec::new();
    for rows in per_d {
        out.extend(rows?);
    }
    Ok(out)
}

/// Outcome of a trend fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Diverges,
    Vanishes,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrendFit {
    #[serde(serialize_with = "ser_num")]
    pub slope: f64,
    #[serde(serialize_with = "ser_num")]
    pub r_squared: f64,
    pub verdict: Verdict,
    pub points: usize,
}

/// Least-squares slope of `ln sup_dist` against `ln d` over the finite,
/// positive rows. All rows must share one metric and side.
pub fn trend_fit(rows: &[CutoffScanRow]) -> Result<TrendFit> {
    if let Some(first) = rows.first() {
        if rows.iter().any(|r| r.metric != first.metric || r.side != first.side) {
            return Err(domain("trend_fit needs rows of a single (metric, side)"));
        }
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| match r.sup_dist {
            Distance::Finite(v) if v > 0.0 => Some(((r.d as f64).ln(), v.ln())),
            _ => None,
        })
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "trend fit needs at least 3 finite positive rows, got {}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all rows share one dimension".into()));
    }
    let slope = sxy / sxx;
    let ss_res: f64 = pts
        .iter()
        .map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    let verdict = if r_squared > R_SQUARED_THRESHOLD && slope > SLOPE_THRESHOLD {
        Verdict::Diverges
    } else if r_squared > R_SQUARED_THRESHOLD && slope < -SLOPE_THRESHOLD {
        Verdict::Vanishes
    } else {
        Verdict::Inconclusive
    };
    Ok(TrendFit {
        slope,
        r_squared,
        verdict,
        points: pts.len(),
    })
}

/// Trend fits for each `(metric, side)` present in `rows`, in first-seen order.
pub fn trend_summary(rows: &[CutoffScanRow]) -> Vec<(String, Side, Result<TrendFit>)> {
    let mut keys: Vec<(String, Side)> = Vec::new();
    for r in rows {
        let k = (r.metric.clone(), r.side);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(metric, side)| {
            let sel: Vec<CutoffScanRow> = rows
                .iter()
                .filter(|r| r.metric == metric && r.side == side)
                .cloned()
                .collect();
            let fit = trend_fit(&sel);
            (metric, side, fit)
        })
        .collect()
}

/// Powers of ten from `10^lo` to `10^hi`.
pub fn decades(lo: u32, hi: u32) -> Vec<usize> {
    (lo..=hi).map(|k| 10usize.pow(k)).collect()
}
