//! Front tracking and the per-run metrics: speed, invading interface,
//! residual levels, AUC and the three categorical classifications.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pde::{Field, Snapshot, Trajectory};
use crate::scalar::Scalar;

/// Tunables for metric extraction. Defaults follow the documented protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricOptions {
    pub front_threshold: f64,
    pub speed_window: (f64, f64),
    /// Time of the u-metrics on the short grid.
    pub u_time: f64,
    /// Time of the v-metrics and residuals on the long grid; `None` means `t_end`.
    pub v_time: Option<f64>,
    pub v0: f64,
    pub tension_tol: f64,
    pub pulse_eps: f64,
    /// Interface matching half-width in cells.
    pub interface_cells: usize,
}

impl Default for MetricOptions {
    fn default() -> Self {
        Self {
            front_threshold: 1e-3,
            speed_window: (10.0, 15.0),
            u_time: 15.0,
            v_time: None,
            v0: 1.0,
            tension_tol: 1e-3,
            pulse_eps: 1e-6,
            interface_cells: 5,
        }
    }
}

/// Span behind the leading edge searched for a local maximum, in cells.
pub const INTERFACE_SPAN: usize = 50;
/// Fraction of the peak slope that marks a flattened profile.
pub const FLAT_SLOPE_FRACTION: f64 = 0.01;
/// Plateau test for the steady-state maximum.
pub const PLATEAU_SLOPE: f64 = 1e-4;
pub const PLATEAU_NODES: usize = 20;
pub const PLATEAU_LEVEL_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TensionClass {
    Relieved,
    Exacerbated,
    TransientRiseThenRelief,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MaxLocation {
    AtInterface,
    AtSteadyState,
    Intermediate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PulseClass {
    NearPulse,
    NonPulse,
}

macro_rules! text_enum {
    ($ty:ident { $($var:ident => $s:literal),* $(,)? }) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($ty::$var => $s),* })
            }
        }

        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($s => Ok($ty::$var),)*
                    other => Err(Error::Parse(format!("unknown {} '{}'", stringify!($ty), other))),
                }
            }
        }
    };
}

text_enum!(TensionClass { Relieved => "relieved", Exacerbated => "exacerbated", TransientRiseThenRelief => "transient" });
text_enum!(MaxLocation { AtInterface => "interface", AtSteadyState => "steady", Intermediate => "intermediate" });
text_enum!(PulseClass { NearPulse => "near_pulse", NonPulse => "non_pulse" });

/// Largest `x` with `u(x) > threshold`, linearly interpolated towards the
/// next node; `-inf` when `u` never exceeds the threshold.
pub fn front_position<T: Scalar>(snap: &Snapshot<T>, threshold: T) -> T {
    let u = &snap.u;
    let Some(i) = u.iter().rposition(|&x| x > threshold) else {
        return T::neg_infinity();
    };
    if i + 1 == u.len() {
        return snap.x(i);
    }
    let frac = (u[i] - threshold) / (u[i] - u[i + 1]);
    snap.x(i) + snap.dx * frac
}

/// Least-squares slope of the front position over the snapshots whose time
/// falls in `window`.
pub fn wave_speed<T: Scalar>(traj: &Trajectory<T>, threshold: T, window: (T, T)) -> Result<T> {
    let slack = traj.grid.dt / T::lit(2.0);
    let mut pts = Vec::new();
    for s in traj.snapshots.iter().filter(|s| s.t >= window.0 - slack && s.t <= window.1 + slack) {
        let x = front_position(s, threshold);
        if !x.is_finite() {
            return Err(Error::NoFront(format!("u never exceeds {threshold} at t = {}", s.t)));
        }
        pts.push((s.t, x));
    }
    if pts.len() < 3 {
        return Err(Error::NoFront(format!(
            "{} snapshots in [{}, {}], need at least 3",
            pts.len(),
            window.0,
            window.1
        )));
    }
    Ok(least_squares_slope(&pts))
}

pub(crate) fn least_squares_slope<T: Scalar>(pts: &[(T, T)]) -> T {
    let n = T::from_usize(pts.len()).expect("count fits scalar");
    let mx = pts.iter().fold(T::zero(), |a, p| a + p.0) / n;
    let my = pts.iter().fold(T::zero(), |a, p| a + p.1) / n;
    let (sxy, sxx) = pts.iter().fold((T::zero(), T::zero()), |(sxy, sxx), &(x, y)| {
        (sxy + (x - mx) * (y - my), sxx + (x - mx) * (x - mx))
    });
    sxy / sxx
}

/// Location and level of the invading interface.
///
/// Scans left from the leading edge for the first strict local maximum of
/// `u` within `INTERFACE_SPAN` cells. A profile that is monotone over that
/// span instead yields the first point behind the edge where `|du/dx|` drops
/// below `FLAT_SLOPE_FRACTION` of its peak.
pub fn invading_interface<T: Scalar>(snap: &Snapshot<T>, threshold: T) -> Result<(T, T)> {
    let edge = front_position(snap, threshold);
    if !edge.is_finite() {
        return Err(Error::NoFront(format!("u never exceeds {threshold} at t = {}", snap.t)));
    }
    let u = &snap.u;
    let n = u.len();
    let ie = ((edge - snap.x_min) / snap.dx).floor().to_usize().unwrap_or(0).min(n - 1);
    let lo = ie.saturating_sub(INTERFACE_SPAN).max(1);
    for i in (lo..=ie.min(n - 2)).rev() {
        if u[i] > u[i - 1] && u[i] > u[i + 1] {
            return Ok((snap.x(i), u[i]));
        }
    }
    // Monotone behind the edge: slopes between node i and i+1.
    let slope = |i: usize| (u[i + 1] - u[i]).abs() / snap.dx;
    let top = ie.min(n - 2);
    let mut i_peak = top;
    for i in (0..=top).rev() {
        if slope(i) > slope(i_peak) {
            i_peak = i;
        }
    }
    let cut = slope(i_peak) * T::lit(FLAT_SLOPE_FRACTION);
    let i_flat = (0..=i_peak).rev().find(|&i| slope(i) < cut).unwrap_or(0);
    Ok((snap.x(i_flat), u[i_flat]))
}

/// `(u, v, P)` at the probe node `x_min`.
pub fn probe_levels<T: Scalar>(snap: &Snapshot<T>) -> (T, T, T) {
    (snap.u[0], snap.v[0], snap.p[0])
}

/// Probe levels in the final snapshot.
pub fn residual_levels<T: Scalar>(traj: &Trajectory<T>) -> (T, T, T) {
    probe_levels(traj.final_snapshot())
}

/// Trapezoidal integral of `field` over the whole grid.
pub fn auc<T: Scalar>(snap: &Snapshot<T>, field: Field) -> T {
    trapezoid(snap.field(field), snap.dx)
}

pub(crate) fn trapezoid<T: Scalar>(y: &[T], dx: T) -> T {
    if y.len() < 2 {
        return T::zero();
    }
    let half = T::lit(0.5);
    let inner = y[1..y.len() - 1].iter().fold(T::zero(), |a, &b| a + b);
    dx * (inner + half * (y[0] + y[y.len() - 1]))
}

/// Tension class from the probe history of `v` up to the final snapshot.
pub fn classify_tension<T: Scalar>(traj: &Trajectory<T>, v0: T, tol: T) -> TensionClass {
    let (_, v_res, _) = residual_levels(traj);
    let t_end = traj.final_snapshot().t;
    let peak = traj
        .probe
        .iter()
        .filter(|s| s.t <= t_end)
        .map(|s| s.v)
        .chain(traj.snapshots.iter().map(|s| s.v[0]))
        .fold(T::neg_infinity(), T::max);
    tension_class(v_res, peak, v0, tol)
}

/// Class from the residual and peak probe tension.
pub fn tension_class<T: Scalar>(v_res: T, v_peak: T, v0: T, tol: T) -> TensionClass {
    if v_res > v0 + tol {
        TensionClass::Exacerbated
    } else if v_peak <= v0 + tol {
        TensionClass::Relieved
    } else {
        TensionClass::TransientRiseThenRelief
    }
}

/// Where the global maximum of `u` sits in `snap`, relative to the invading
/// interface and the probe level `u(x_min)`.
pub fn classify_max_location<T: Scalar>(snap: &Snapshot<T>, threshold: T, cells: usize) -> Result<MaxLocation> {
    let (x_int, _) = invading_interface(snap, threshold)?;
    let u = &snap.u;
    let mut i_max = 0;
    for (i, &x) in u.iter().enumerate() {
        if x > u[i_max] {
            i_max = i;
        }
    }
    let x_max = snap.x(i_max);
    let w = snap.dx * T::from_usize(cells).expect("cell count fits scalar");
    if (x_max - x_int).abs() <= w {
        return Ok(MaxLocation::AtInterface);
    }
    let u_res = u[0];
    if (u[i_max] - u_res).abs() <= T::lit(PLATEAU_LEVEL_TOL) && on_plateau(snap, i_max) {
        return Ok(MaxLocation::AtSteadyState);
    }
    Ok(MaxLocation::Intermediate)
}

/// `|du/dx| < PLATEAU_SLOPE` over `PLATEAU_NODES` nodes around node `i`.
fn on_plateau<T: Scalar>(snap: &Snapshot<T>, i: usize) -> bool {
    let n = snap.len();
    if n < PLATEAU_NODES {
        return false;
    }
    let start = i.saturating_sub(PLATEAU_NODES / 2).min(n - PLATEAU_NODES);
    let tol = T::lit(PLATEAU_SLOPE);
    (start..start + PLATEAU_NODES - 1).all(|j| ((snap.u[j + 1] - snap.u[j]) / snap.dx).abs() < tol)
}

pub fn classify_pulse<T: Scalar>(residual_u: T, eps: T) -> PulseClass {
    if residual_u < eps {
        PulseClass::NearPulse
    } else {
        PulseClass::NonPulse
    }
}

/// Metrics taken from the short run: speed and the u-profile at `u_time`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShortMetrics {
    pub speed: f64,
    pub invading_x: f64,
    pub invading_level: f64,
    pub auc_u: f64,
    pub maxloc_class: MaxLocation,
}

impl ShortMetrics {
    pub fn from_run<T: Scalar>(short: &Trajectory<T>, opts: &MetricOptions) -> Result<Self> {
        let th = T::lit(opts.front_threshold);
        let speed = wave_speed(short, th, (T::lit(opts.speed_window.0), T::lit(opts.speed_window.1)))?;
        let snap = short.snapshot_at(T::lit(opts.u_time));
        let (x, level) = invading_interface(snap, th)?;
        Ok(Self {
            speed: speed.as_f64(),
            invading_x: x.as_f64(),
            invading_level: level.as_f64(),
            auc_u: auc(snap, Field::U).as_f64(),
            maxloc_class: classify_max_location(snap, th, opts.interface_cells)?,
        })
    }
}

/// Metrics taken from the long run: probe residuals and the v-profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LongMetrics {
    pub residual_u: f64,
    pub residual_v: f64,
    pub residual_p: f64,
    pub auc_v: f64,
    pub tension_class: TensionClass,
    pub pulse_class: PulseClass,
}

impl LongMetrics {
    /// Evaluated at `opts.v_time`, or at the final snapshot.
    pub fn from_run<T: Scalar>(long: &Trajectory<T>, opts: &MetricOptions) -> Self {
        let snap = match opts.v_time {
            Some(t) => long.snapshot_at(T::lit(t)),
            None => long.final_snapshot(),
        };
        let (ru, rv, rp) = probe_levels(snap);
        let peak = long.probe.iter().filter(|s| s.t <= snap.t).map(|s| s.v).fold(rv, T::max);
        Self {
            residual_u: ru.as_f64(),
            residual_v: rv.as_f64(),
            residual_p: rp.as_f64(),
            auc_v: auc(snap, Field::V).as_f64(),
            tension_class: tension_class(rv, peak, T::lit(opts.v0), T::lit(opts.tension_tol)),
            pulse_class: classify_pulse(ru, T::lit(opts.pulse_eps)),
        }
    }
}

/// Per-run metric bundle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveReport {
    pub speed: f64,
    pub invading_x: f64,
    pub invading_level: f64,
    pub residual_u: f64,
    pub residual_v: f64,
    pub residual_p: f64,
    pub auc_u: f64,
    pub auc_v: f64,
    pub tension_class: TensionClass,
    pub maxloc_class: MaxLocation,
    pub pulse_class: PulseClass,
}

/// Column names of a report row, after the three exponents.
pub const REPORT_COLUMNS: [&str; 11] = [
    "speed",
    "invading_x",
    "invading_level",
    "residual_u",
    "residual_v",
    "residual_P",
    "auc_u",
    "auc_v",
    "tension_class",
    "maxloc_class",
    "pulse_class",
];

/// Columns filled from the short run.
pub const SHORT_COLUMNS: [&str; 5] = ["speed", "invading_x", "invading_level", "auc_u", "maxloc_class"];

/// Report cells in `REPORT_COLUMNS` order; missing parts leave empty cells.
pub fn report_cells(short: Option<&ShortMetrics>, long: Option<&LongMetrics>) -> [String; 11] {
    let s = |f: &dyn Fn(&ShortMetrics) -> String| short.map(f).unwrap_or_default();
    let l = |f: &dyn Fn(&LongMetrics) -> String| long.map(f).unwrap_or_default();
    [
        s(&|m| m.speed.to_string()),
        s(&|m| m.invading_x.to_string()),
        s(&|m| m.invading_level.to_string()),
        l(&|m| m.residual_u.to_string()),
        l(&|m| m.residual_v.to_string()),
        l(&|m| m.residual_p.to_string()),
        s(&|m| m.auc_u.to_string()),
        l(&|m| m.auc_v.to_string()),
        l(&|m| m.tension_class.to_string()),
        s(&|m| m.maxloc_class.to_string()),
        l(&|m| m.pulse_class.to_string()),
    ]
}

impl WaveReport {
    pub fn from_parts(s: &ShortMetrics, l: &LongMetrics) -> Self {
        Self {
            speed: s.speed,
            invading_x: s.invading_x,
            invading_level: s.invading_level,
            residual_u: l.residual_u,
            residual_v: l.residual_v,
            residual_p: l.residual_p,
            auc_u: s.auc_u,
            auc_v: l.auc_v,
            tension_class: l.tension_class,
            maxloc_class: s.maxloc_class,
            pulse_class: l.pulse_class,
        }
    }

    /// Builds the report from a short run (u-metrics, speed) and a long run
    /// (residuals, v-metrics).
    pub fn from_runs<T: Scalar>(short: &Trajectory<T>, long: &Trajectory<T>, opts: &MetricOptions) -> Result<Self> {
        Ok(Self::from_parts(&ShortMetrics::from_run(short, opts)?, &LongMetrics::from_run(long, opts)))
    }

    pub fn short(&self) -> ShortMetrics {
        ShortMetrics {
            speed: self.speed,
            invading_x: self.invading_x,
            invading_level: self.invading_level,
            auc_u: self.auc_u,
            maxloc_class: self.maxloc_class,
        }
    }

    pub fn long(&self) -> LongMetrics {
        LongMetrics {
            residual_u: self.residual_u,
            residual_v: self.residual_v,
            residual_p: self.residual_p,
            auc_v: self.auc_v,
            tension_class: self.tension_class,
            pulse_class: self.pulse_class,
        }
    }

    /// Comma-separated values in `REPORT_COLUMNS` order.
    pub fn csv_fields(&self) -> String {
        report_cells(Some(&self.short()), Some(&self.long())).join(",")
    }

    /// Inverse of `csv_fields`.
    pub fn parse_csv_fields(fields: &[&str]) -> Result<Self> {
        let (s, l) = parse_report_cells(fields)?;
        match (s, l) {
            (Some(s), Some(l)) => Ok(Self::from_parts(&s, &l)),
            _ => Err(Error::Parse("report row has empty cells".into())),
        }
    }
}

/// Inverse of [`report_cells`]: a part is `None` when all of its cells are empty.
pub fn parse_report_cells(fields: &[&str]) -> Result<(Option<ShortMetrics>, Option<LongMetrics>)> {
    if fields.len() != REPORT_COLUMNS.len() {
        return Err(Error::Parse(format!("expected {} report fields, got {}", REPORT_COLUMNS.len(), fields.len())));
    }
    let num = |i: usize| -> Result<f64> {
        fields[i].parse().map_err(|_| Error::Parse(format!("bad {} '{}'", REPORT_COLUMNS[i], fields[i])))
    };
    let empty = |idx: &[usize]| idx.iter().all(|&i| fields[i].is_empty());
    let short = if empty(&[0, 1, 2, 6, 9]) {
        None
    } else {
        Some(ShortMetrics {
            speed: num(0)?,
            invading_x: num(1)?,
            invading_level: num(2)?,
            auc_u: num(6)?,
            maxloc_class: fields[9].parse()?,
        })
    };
    let long = if empty(&[3, 4, 5, 7, 8, 10]) {
        None
    } else {
        Some(LongMetrics {
            residual_u: num(3)?,
            residual_v: num(4)?,
            residual_p: num(5)?,
            auc_v: num(7)?,
            tension_class: fields[8].parse()?,
            pulse_class: fields[10].parse()?,
        })
    };
    Ok((short, long))
}
