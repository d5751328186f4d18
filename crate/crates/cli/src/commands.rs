//! Subcommand bodies. Each returns the full output text so that `--out`
//! and stdout receive identical bytes.

use std::fmt::Write as _;

use clap::{Args, ValueEnum};
use cutoff_core::barenblatt::{ModelParams, Profile, Regime};
use cutoff_core::cutoff::{decades, scan as run_scan, trend_summary, CutoffScanRow, Mode, ScheduleSpec, Side, TrendFit};
use cutoff_core::divergences::{divergence_report, Distance, MetricRegistry};
use cutoff_core::dynamics::flow_state;
use cutoff_core::format::{ser_num, ser_opt_num, ser_vec_num, sig17, Num};
use cutoff_core::oracles::sampling::{axis_point, sample_barenblatt};
use cutoff_core::pde::{evolve, front_position, init_from_closed_form, l1_error, Geometry, GridSpec};
use cutoff_core::verify::SuiteRegistry;
use serde::{Deserialize, Serialize};

use crate::{CliError, Format, Global};

pub struct Output {
    pub text: String,
    /// False when a verification check failed.
    pub passed: bool,
}

impl Output {
    fn ok(text: String) -> Self {
        Self { text, passed: true }
    }
}

fn to_json<T: Serialize>(v: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(v)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| CliError::Failure(e.to_string()))
}

fn distance_cell(d: &Distance) -> String {
    match d {
        Distance::Finite(v) => sig17(*v),
        Distance::Infinite => "inf".into(),
        Distance::NotComputed => "not_computed".into(),
    }
}

fn required<T>(v: Option<T>, flag: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Usage(format!("--{flag} is required")))
}

/// `--alpha` or `--m`, exactly one.
fn model(d: usize, alpha: Option<f64>, m: Option<f64>) -> Result<ModelParams, CliError> {
    match (alpha, m) {
        (Some(a), None) => Ok(ModelParams::from_alpha(d, a)?),
        (None, Some(m)) => Ok(ModelParams::from_m(d, m)?),
        _ => Err(CliError::Usage("give exactly one of --alpha and --m".into())),
    }
}

#[derive(Args, Debug, Serialize, Deserialize)]
pub struct ParamsArgs {
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub m: Option<f64>,
}

#[derive(Serialize)]
struct ParamsDoc {
    d: usize,
    regime: &'static str,
    #[serde(serialize_with = "ser_num")]
    m: f64,
    #[serde(serialize_with = "ser_num")]
    m_minus_one: f64,
    #[serde(serialize_with = "ser_num")]
    alpha: f64,
    #[serde(serialize_with = "ser_num")]
    two_alpha_minus_one: f64,
    #[serde(serialize_with = "ser_num")]
    p: f64,
    #[serde(serialize_with = "ser_num")]
    b: f64,
    #[serde(serialize_with = "ser_num")]
    c: f64,
    #[serde(serialize_with = "ser_num")]
    c_stat: f64,
    #[serde(serialize_with = "ser_opt_num")]
    support_radius: Option<f64>,
    #[serde(serialize_with = "ser_num")]
    m2: f64,
    #[serde(serialize_with = "ser_num")]
    nm: f64,
}

pub fn params(a: ParamsArgs, g: &Global) -> Result<Output, CliError> {
    let d = required(a.d, "d")?;
    let p = model(d, a.alpha, a.m)?;
    if !p.has_second_moment() {
        return Err(CliError::Usage(format!(
            "constraint violated: m > d/(d+2) (finite second moment) fails for m = {}, d/(d+2) = {}",
            p.m(),
            d as f64 / (d as f64 + 2.0)
        )));
    }
    let doc = ParamsDoc {
        d,
        regime: p.regime().name(),
        m: p.m(),
        m_minus_one: p.m_minus_one(),
        alpha: p.alpha(),
        two_alpha_minus_one: p.two_alpha_minus_one(),
        p: p.p(),
        b: p.b(),
        c: p.c(),
        c_stat: p.c_stat(),
        support_radius: p.stationary_profile().support_radius(),
        m2: p.m2()?,
        nm: p.nm()?,
    };
    let text = match g.format.unwrap_or(Format::Json) {
        Format::Json => to_json(&doc)?,
        Format::Csv => {
            let mut s = String::from("key,value\n");
            let opt = |x: Option<f64>| x.map(sig17).unwrap_or_default();
            for (k, v) in [
                ("d", d.to_string()),
                ("regime", doc.regime.to_string()),
                ("m", sig17(doc.m)),
                ("m_minus_one", sig17(doc.m_minus_one)),
                ("alpha", sig17(doc.alpha)),
                ("two_alpha_minus_one", sig17(doc.two_alpha_minus_one)),
                ("p", sig17(doc.p)),
                ("b", sig17(doc.b)),
                ("c", sig17(doc.c)),
                ("c_stat", sig17(doc.c_stat)),
                ("support_radius", opt(doc.support_radius)),
                ("m2", sig17(doc.m2)),
                ("nm", sig17(doc.nm)),
            ] {
                writeln!(s, "{k},{v}").unwrap();
            }
            s
        }
    };
    Ok(Output::ok(text))
}

#[derive(Args, Debug, Serialize, Deserialize)]
pub struct DistanceArgs {
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub m: Option<f64>,
    #[arg(long)]
    pub t: Option<f64>,
    /// Norm of the initial centre.
    #[arg(long)]
    pub x0: Option<f64>,
}

pub fn distance(a: DistanceArgs, g: &Global) -> Result<Output, CliError> {
    let d = required(a.d, "d")?;
    let p = model(d, a.alpha, a.m)?;
    let t = required(a.t, "t")?;
    let r = divergence_report(&p, t, a.x0.unwrap_or(0.0))?;
    let text = match g.format.unwrap_or(Format::Json) {
        Format::Json => to_json(&r)?,
        Format::Csv => format!(
            "d,m,alpha,t,x0_norm,w2_sq,entropy,fisher\n{},{},{},{},{},{},{},{}\n",
            r.d,
            sig17(r.m),
            sig17(r.alpha),
            sig17(r.t),
            sig17(r.x0_norm),
            distance_cell(&r.w2_sq),
            distance_cell(&r.entropy),
            distance_cell(&r.fisher)
        ),
    };
    Ok(Output::ok(text))
}

#[derive(Args, Debug, Serialize, Deserialize)]
pub struct ScanArgs {
    /// Fixed α as d varies.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Fixed m as d varies.
    #[arg(long)]
    pub m: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    /// Radius factor of the initial ball `|x0| ≤ r d^θ`.
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long)]
    pub theta: Option<f64>,
    /// Comma-separated, strictly increasing. Default 100,...,1000000.
    #[arg(long, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
    /// Comma-separated metric names. Default: all.
    #[arg(long, value_delimiter = ',')]
    pub metrics: Option<Vec<String>>,
    /// Comma-separated subset of below,above.
    #[arg(long, value_delimiter = ',')]
    pub sides: Option<Vec<String>>,
}

#[derive(Serialize)]
struct TrendEntry {
    metric: String,
    side: Side,
    #[serde(skip_serializing_if = "Option::is_none")]
    fit: Option<TrendFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Serialize)]
struct ScanSummary<'a> {
    schedule: &'a ScheduleSpec,
    trends: &'a [TrendEntry],
}

#[derive(Serialize)]
struct ScanDoc<'a> {
    schedule: &'a ScheduleSpec,
    rows: &'a [CutoffScanRow],
    trends: &'a [TrendEntry],
}

pub fn scan(a: ScanArgs, g: &Global) -> Result<Output, CliError> {
    let mode = match (a.alpha, a.m) {
        (Some(x), None) => Mode::FixedAlpha(x),
        (None, Some(x)) => Mode::FixedM(x),
        _ => return Err(CliError::Usage("give exactly one of --alpha and --m".into())),
    };
    let sides: Vec<Side> = a
        .sides
        .unwrap_or_else(|| vec!["below".into(), "above".into()])
        .iter()
        .map(|s| Side::parse(s))
        .collect::<Result<_, _>>()?;
    let spec = ScheduleSpec::new(
        mode,
        a.eps.unwrap_or(0.2),
        a.r.unwrap_or(1.0),
        a.theta.unwrap_or(0.5),
        *sides.first().ok_or_else(|| CliError::Usage("sides must not be empty".into()))?,
    )?;
    let dims = a.dims.unwrap_or_else(|| decades(2, 6));
    let registry = MetricRegistry::default();
    let metrics: Vec<String> = a
        .metrics
        .unwrap_or_else(|| registry.names().iter().map(|s| s.to_string()).collect());
    let metric_refs: Vec<&str> = metrics.iter().map(|s| s.as_str()).collect();
    let rows = run_scan(&spec, &dims, &metric_refs, &sides, &registry)?;
    let trends: Vec<TrendEntry> = trend_summary(&rows)
        .into_iter()
        .map(|(metric, side, fit)| {
            let (fit, error) = match fit {
                Ok(f) => (Some(f), None),
                Err(e) => (None, Some(e.to_string())),
            };
            TrendEntry { metric, side, fit, error }
        })
        .collect();
    let text = match g.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut s = String::from("d,side,eps,t,metric,sup_dist,x0_norm\n");
            for r in &rows {
                writeln!(
                    s,
                    "{},{},{},{},{},{},{}",
                    r.d,
                    r.side.name(),
                    sig17(r.eps),
                    sig17(r.t),
                    r.metric,
                    distance_cell(&r.sup_dist),
                    sig17(r.x0_norm)
                )
                .unwrap();
            }
            let summary = ScanSummary { schedule: &spec, trends: &trends };
            writeln!(s, "# {}", serde_json::to_string(&summary).map_err(|e| CliError::Failure(e.to_string()))?).unwrap();
            s
        }
        Format::Json => to_json(&ScanDoc {
            schedule: &spec,
            rows: &rows,
            trends: &trends,
        })?,
    };
    Ok(Output::ok(text))
}

#[derive(Args, Debug, Serialize, Deserialize)]
pub struct VerifyArgs {
    /// moments, transport, entropy_production, pde or all.
    pub suite: Option<String>,
}

pub fn verify(a: VerifyArgs, g: &Global) -> Result<Output, CliError> {
    let suite = a.suite.unwrap_or_else(|| "all".into());
    let report = SuiteRegistry::default().run(&suite, g.seed.unwrap_or(0))?;
    let text = match g.format.unwrap_or(Format::Json) {
        Format::Json => to_json(&report)?,
        Format::Csv => {
            let mut s = String::from("suite,id,measured,tolerance,passed\n");
            for suite in &report.suites {
                for c in &suite.checks {
                    writeln!(s, "{},{},{},{},{}", suite.suite, c.id, sig17(c.measured), sig17(c.tolerance), c.passed).unwrap();
                }
            }
            s
        }
    };
    Ok(Output {
        text,
        passed: report.passed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometryKind {
    Line,
    Radial,
}

#[derive(Args, Debug, Serialize, Deserialize)]
pub struct PdeArgs {
    /// line (d = 1) or radial.
    #[arg(long, value_enum)]
    pub geometry: Option<GeometryKind>,
    /// Dimension of a radial run (default 3).
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub m: Option<f64>,
    /// Initial centre on the line.
    #[arg(long)]
    pub x0: Option<f64>,
    #[arg(long)]
    pub cells: Option<usize>,
    /// Half-width of the line or radius of the ball. Default 12, or 1.5
    /// support radii for a radial porous run.
    #[arg(long)]
    pub extent: Option<f64>,
    #[arg(long)]
    pub t0: Option<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Comma-separated output times; default the end time only.
    #[arg(long, value_delimiter = ',')]
    pub times: Option<Vec<f64>>,
}

#[derive(Serialize)]
struct FrontDoc {
    #[serde(serialize_with = "ser_opt_num")]
    position: Option<f64>,
    #[serde(serialize_with = "ser_num")]
    closed_form: f64,
    #[serde(serialize_with = "ser_num")]
    dx: f64,
}

#[derive(Serialize)]
struct PdeSummary {
    d: usize,
    #[serde(serialize_with = "ser_num")]
    m: f64,
    grid: GridSpec,
    #[serde(serialize_with = "ser_num")]
    x0_norm: f64,
    #[serde(serialize_with = "ser_num")]
    t0: f64,
    #[serde(serialize_with = "ser_num")]
    t_end: f64,
    steps: usize,
    #[serde(serialize_with = "ser_num")]
    l1_error: f64,
    #[serde(serialize_with = "ser_num")]
    max_entropy_increase: f64,
    #[serde(serialize_with = "ser_num")]
    max_mass_drift: f64,
    #[serde(serialize_with = "ser_num")]
    clipped_mass: f64,
    front: Option<FrontDoc>,
}

#[derive(Serialize)]
struct SnapshotDoc<'a> {
    #[serde(serialize_with = "ser_num")]
    time: f64,
    #[serde(serialize_with = "ser_num")]
    mass: f64,
    #[serde(serialize_with = "ser_num")]
    entropy: f64,
    #[serde(serialize_with = "ser_vec_num")]
    values: &'a [f64],
}

#[derive(Serialize)]
struct PdeDoc<'a> {
    summary: &'a PdeSummary,
    #[serde(serialize_with = "ser_vec_num")]
    cell_centers: &'a [f64],
    snapshots: Vec<SnapshotDoc<'a>>,
}

pub fn pde(a: PdeArgs, g: &Global) -> Result<Output, CliError> {
    let kind = a.geometry.unwrap_or(GeometryKind::Line);
    let d = match kind {
        GeometryKind::Line => 1,
        GeometryKind::Radial => a.d.unwrap_or(3),
    };
    let params = model(d, a.alpha, a.m)?;
    let x0 = a.x0.unwrap_or(0.0);
    let geometry = match kind {
        GeometryKind::Line => Geometry::Line {
            half_width: a.extent.unwrap_or(12.0),
        },
        GeometryKind::Radial => Geometry::Radial {
            radius: match (a.extent, params.stationary_profile().support_radius()) {
                (Some(r), _) => r,
                (None, Some(r)) => 1.5 * r,
                (None, None) => return Err(CliError::Usage("--extent is required for a radial run without compact support".into())),
            },
        },
    };
    let t0 = a.t0.unwrap_or(0.05);
    let t_end = a.t_end.unwrap_or(2.0);
    let mut times = a.times.unwrap_or_default();
    if times.last().is_none_or(|&t| t < t_end) {
        times.push(t_end);
    }
    let grid = init_from_closed_form(
        &params,
        t0,
        x0,
        GridSpec {
            geometry,
            cells: a.cells.unwrap_or(1024),
        },
    )?;
    let (end, traj) = evolve(grid.clone(), &times)?;
    let front = match params.regime() {
        Regime::PorousMedium => {
            let r_inf = params.stationary_profile().support_radius().unwrap_or(f64::NAN);
            let state = flow_state(&params, end.time, x0)?;
            Some(FrontDoc {
                position: front_position(&end, 0.0),
                closed_form: state.a * r_inf + if d == 1 { state.h_norm } else { 0.0 },
                dx: end.dx(),
            })
        }
        _ => None,
    };
    let summary = PdeSummary {
        d,
        m: params.m(),
        grid: end.spec(),
        x0_norm: x0,
        t0,
        t_end: end.time,
        steps: traj.steps,
        l1_error: l1_error(&end)?,
        max_entropy_increase: traj.max_entropy_increase,
        max_mass_drift: traj.max_mass_drift,
        clipped_mass: traj.clipped_mass,
        front,
    };
    let text = match g.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut s = String::from("time,cell_center,value\n");
            for snap in &traj.snapshots {
                let t = sig17(snap.time);
                for (x, v) in grid.centers.iter().zip(&snap.values) {
                    writeln!(s, "{t},{},{}", sig17(*x), sig17(*v)).unwrap();
                }
            }
            writeln!(s, "# {}", serde_json::to_string(&summary).map_err(|e| CliError::Failure(e.to_string()))?).unwrap();
            s
        }
        Format::Json => {
            let snapshots: Vec<SnapshotDoc> = traj
                .snapshots
                .iter()
                .map(|s| SnapshotDoc {
                    time: s.time,
                    mass: s.mass,
                    entropy: s.entropy,
                    values: &s.values,
                })
                .collect();
            to_json(&PdeDoc {
                summary: &summary,
                cell_centers: &grid.centers,
                snapshots,
            })?
        }
    };
    Ok(Output::ok(text))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileKind {
    Unit,
    Stationary,
}

#[derive(Args, Debug, Serialize, Deserialize)]
pub struct SampleArgs {
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub m: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Norm of the centre, placed on the first axis.
    #[arg(long)]
    pub x0: Option<f64>,
    /// Default: stationary.
    #[arg(long, value_enum)]
    pub profile: Option<ProfileKind>,
}

#[derive(Serialize)]
struct SampleDoc<'a> {
    d: usize,
    seed: u64,
    #[serde(serialize_with = "ser_vec_num")]
    center: &'a [f64],
    points: Vec<Vec<Num>>,
}

pub fn sample(a: SampleArgs, g: &Global) -> Result<Output, CliError> {
    let d = required(a.d, "d")?;
    let params = model(d, a.alpha, a.m)?;
    let n = required(a.n, "n")?;
    let which = match a.profile.unwrap_or(ProfileKind::Stationary) {
        ProfileKind::Unit => Profile::Unit,
        ProfileKind::Stationary => Profile::Stationary,
    };
    let seed = g.seed.unwrap_or(0);
    let cloud = sample_barenblatt(&params, n, &axis_point(d, a.x0.unwrap_or(0.0)), seed, which)?;
    let text = match g.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut s = String::from("index");
            for k in 1..=d {
                write!(s, ",x_{k}").unwrap();
            }
            s.push('\n');
            for (i, p) in cloud.points.iter().enumerate() {
                write!(s, "{i}").unwrap();
                for x in p {
                    write!(s, ",{}", sig17(*x)).unwrap();
                }
                s.push('\n');
            }
            s
        }
        Format::Json => to_json(&SampleDoc {
            d,
            seed,
            center: &cloud.center,
            points: cloud.points.iter().map(|p| p.iter().map(|v| Num(*v)).collect()).collect(),
        })?,
    };
    Ok(Output::ok(text))
}
