//! Lattice sweeps over `(k0, k1, k2)`: one short and one long run per point,
//! metrics written as CSV rows.
//!
//! Rows are appended to `<output>.partial` as they finish, so an interrupted
//! sweep can resume. The final file is sorted by `(k0, k1, k2)` and written
//! atomically; wall times go to a `<output>.timing` sidecar so the CSV body
//! is a pure function of the spec.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinetics::ModelParams;
use crate::pde::{simulate, Field, GridSpec, InitialCondition};
use crate::wave_metrics::{
    auc, probe_levels, report_cells, LongMetrics, MetricOptions, ShortMetrics, REPORT_COLUMNS, SHORT_COLUMNS,
};

/// Exponent bounds enforced unless `allow_unsafe` is set.
pub const K0_BOUNDS: (f64, f64) = (-5.0, 5.0);
pub const K12_BOUNDS: (f64, f64) = (-10.0, 10.0);
/// Thread cap for the worker pool.
pub const THREADS_ENV: &str = "PROTESTWAVE_THREADS";
/// Largest subdivision of the requested step before a point is declared unstable.
pub const MAX_SUBSTEPS: f64 = 4096.0;

/// Inclusive lattice `min, min + step, ..., max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl Range {
    pub fn single(x: f64) -> Self {
        Self { min: x, max: x, step: 1.0 }
    }

    pub fn values(&self) -> Vec<f64> {
        let n = ((self.max - self.min) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| clean(self.min + self.step * i as f64)).collect()
    }
}

/// Rounds away accumulated lattice noise such as `0.30000000000000004`.
fn clean(x: f64) -> f64 {
    let r = (x * 1e9).round() / 1e9;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

impl FromStr for Range {
    type Err = Error;

    /// `min:max:step` or a single value.
    fn from_str(s: &str) -> Result<Self> {
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad number '{t}' in range '{s}'")));
        let parts: Vec<&str> = s.split(':').collect();
        let r = match parts.as_slice() {
            [x] => Self::single(num(x)?),
            [a, b, c] => Self { min: num(a)?, max: num(b)?, step: num(c)? },
            _ => return Err(Error::Parse(format!("range '{s}' must be VALUE or MIN:MAX:STEP"))),
        };
        if !(r.step > 0.0) || !(r.min <= r.max) || !r.min.is_finite() || !r.max.is_finite() {
            return Err(Error::InvalidParameter { name: "range", reason: format!("'{s}' needs min <= max and step > 0") });
        }
        Ok(r)
    }
}

impl fmt::Display for Range {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.min == self.max {
            write!(f, "{}", self.min)
        } else {
            write!(f, "{}:{}:{}", self.min, self.max, self.step)
        }
    }
}

/// Time step policy for the long runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DtGate {
    /// Cheap step used when the gate passes.
    pub fast_dt: f64,
    /// Reference step.
    pub reference_dt: f64,
    /// Horizon of the comparison run.
    pub horizon: f64,
    /// Bound on probe-level and relative `auc_v` differences.
    pub tol: f64,
}

impl Default for DtGate {
    fn default() -> Self {
        Self { fast_dt: 1e-3, reference_dt: 1e-4, horizon: 20.0, tol: 1e-3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateOutcome {
    pub passed: bool,
    pub max_diff: f64,
    pub sentinel: (f64, f64, f64),
}

/// Compares the long-run probe levels and `auc_v` at `gate.horizon` between
/// the fast and reference steps at one sentinel point.
pub fn run_dt_gate(p: &ModelParams<f64>, long: &GridSpec<f64>, gate: &DtGate) -> Result<GateOutcome> {
    let g = long.clone().with_t_end(gate.horizon.min(long.t_end)).with_snapshots(vec![]);
    let fast = simulate(p, &stable_grid(p, g.clone().with_dt(gate.fast_dt))?, &InitialCondition::PaperDefault)?;
    let reference = simulate(p, &stable_grid(p, g.with_dt(gate.reference_dt))?, &InitialCondition::PaperDefault)?;
    let (a, b) = (fast.final_snapshot(), reference.final_snapshot());
    let (pa, pb) = (probe_levels(a), probe_levels(b));
    let (va, vb) = (auc(a, Field::V), auc(b, Field::V));
    let max_diff = [(pa.0 - pb.0).abs(), (pa.1 - pb.1).abs(), (pa.2 - pb.2).abs(), ((va - vb) / vb).abs()]
        .into_iter()
        .fold(0.0, f64::max);
    Ok(GateOutcome { passed: max_diff < gate.tol, max_diff, sentinel: (p.k0, p.k1, p.k2) })
}

/// Splits `dt` into the fewest equal substeps that pass the grid's stability
/// check, keeping every multiple of the requested step on the time lattice.
pub fn stable_grid(p: &ModelParams<f64>, mut g: GridSpec<f64>) -> Result<GridSpec<f64>> {
    match g.check(p) {
        Err(Error::Unstable(_)) => {}
        other => return other.map(|_| g),
    }
    let limit = g.max_stable_dt(p);
    let base = g.dt;
    let mut n = (base / limit).ceil().max(2.0);
    while base / n > limit {
        n += 1.0;
    }
    if n > MAX_SUBSTEPS {
        return Err(Error::Unstable(format!("dt = {base} needs {n} substeps, more than {MAX_SUBSTEPS}")));
    }
    g.dt = base / n;
    g.check(p).map(|_| g)
}

/// Everything that determines a sweep's output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub k0_values: Vec<f64>,
    pub k1: Range,
    pub k2: Range,
    pub base: ModelParams<f64>,
    /// Short grid; its snapshot schedule is derived from `metrics`.
    pub short_grid: GridSpec<f64>,
    pub long_grid: GridSpec<f64>,
    pub metrics: MetricOptions,
    /// Requested report columns; runs no column needs are skipped.
    pub columns: Vec<String>,
    /// Long-run step policy; `None` keeps `long_grid.dt` as given.
    pub gate: Option<DtGate>,
    pub allow_unsafe: bool,
}

impl SweepSpec {
    /// Default grids: short runs to the last u-metric time at
    /// `dt = 1e-4`, long runs to `t = 100` behind the `dt = 1e-3` gate.
    pub fn new(k0_values: Vec<f64>, k1: Range, k2: Range) -> Self {
        let metrics = MetricOptions::default();
        Self {
            k0_values,
            k1,
            k2,
            base: ModelParams::simulation_base(),
            short_grid: GridSpec::short_run(),
            long_grid: GridSpec::long_run().with_snapshots(vec![]),
            metrics,
            columns: REPORT_COLUMNS.iter().map(|s| s.to_string()).collect(),
            gate: Some(DtGate::default()),
            allow_unsafe: false,
        }
    }

    /// Long runs at the reference step `dt = 1e-4`, no gate.
    pub fn paper_exact(mut self) -> Self {
        self.gate = None;
        self.long_grid.dt = 1e-4;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.k0_values.is_empty() {
            return Err(Error::InvalidParameter { name: "k0", reason: "no values".into() });
        }
        for c in &self.columns {
            if !REPORT_COLUMNS.contains(&c.as_str()) {
                return Err(Error::InvalidParameter { name: "metrics", reason: format!("unknown column '{c}'") });
            }
        }
        if !self.allow_unsafe {
            let out = |x: f64, (lo, hi): (f64, f64)| x < lo || x > hi;
            if let Some(k) = self.k0_values.iter().find(|&&k| out(k, K0_BOUNDS)) {
                return Err(Error::InvalidParameter { name: "k0", reason: format!("{k} outside [-5, 5]; pass --unsafe") });
            }
            for (name, r) in [("k1", &self.k1), ("k2", &self.k2)] {
                if out(r.min, K12_BOUNDS) || out(r.max, K12_BOUNDS) {
                    return Err(Error::InvalidParameter { name, reason: format!("{r} outside [-10, 10]; pass --unsafe") });
                }
            }
        }
        self.short_grid.validate()?;
        self.long_grid.validate()?;
        Ok(())
    }

    pub fn points(&self) -> Vec<(f64, f64, f64)> {
        let (k1s, k2s) = (self.k1.values(), self.k2.values());
        let mut pts = Vec::with_capacity(self.k0_values.len() * k1s.len() * k2s.len());
        for &k0 in &self.k0_values {
            for &k1 in &k1s {
                for &k2 in &k2s {
                    pts.push((clean(k0), k1, k2));
                }
            }
        }
        pts.sort_by(|a, b| a.partial_cmp(b).expect("finite exponents"));
        pts.dedup();
        pts
    }

    pub fn needs_short(&self) -> bool {
        self.columns.iter().any(|c| SHORT_COLUMNS.contains(&c.as_str()))
    }

    pub fn needs_long(&self) -> bool {
        self.columns.iter().any(|c| !SHORT_COLUMNS.contains(&c.as_str()))
    }

    /// Short grid with snapshots over the speed window and at `u_time`,
    /// ending at the last of them.
    pub fn short_run_grid(&self) -> GridSpec<f64> {
        let m = &self.metrics;
        let (a, b) = m.speed_window;
        let n = 10;
        let mut times: Vec<f64> = (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect();
        times.push(m.u_time);
        times.sort_by(|x, y| x.partial_cmp(y).expect("finite times"));
        times.dedup();
        let t_end = times.last().copied().unwrap_or(self.short_grid.t_end);
        let mut g = self.short_grid.clone();
        g.t_end = t_end;
        g.with_snapshots(times)
    }

    /// Long grid with a snapshot at `v_time` when one is set.
    pub fn long_run_grid(&self, dt: f64) -> GridSpec<f64> {
        let times = self.metrics.v_time.into_iter().collect();
        self.long_grid.clone().with_dt(dt).with_snapshots(times)
    }

    /// `#`-prefixed description written at the top of the CSV.
    pub fn header_lines(&self, long_dt: f64, gate: Option<&GateOutcome>) -> Vec<String> {
        let mut h = vec![
            format!("# spec = {}", serde_json::to_string(self).expect("spec serialises")),
            format!("# long_dt = {long_dt}"),
        ];
        if let Some(g) = gate {
            h.push(format!("# dt_gate = {}", serde_json::to_string(g).expect("gate serialises")));
        }
        h
    }
}

/// Outcome of one lattice point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub k0: f64,
    pub k1: f64,
    pub k2: f64,
    pub short: Option<ShortMetrics>,
    pub long: Option<LongMetrics>,
    /// `ok`, or the first failure.
    pub status: String,
    pub short_dt: Option<f64>,
    pub long_dt: Option<f64>,
    /// FNV-1a of the two grids as run.
    pub grid_checksum: String,
    pub wall_seconds: f64,
}

pub fn csv_header() -> String {
    let mut cols = vec!["k0", "k1", "k2"];
    cols.extend(REPORT_COLUMNS);
    cols.extend(["status", "short_dt", "long_dt", "grid_checksum"]);
    cols.join(",")
}

impl RunRecord {
    pub fn key(&self) -> (f64, f64, f64) {
        (self.k0, self.k1, self.k2)
    }

    pub fn csv_row(&self) -> String {
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{}",
            self.k0,
            self.k1,
            self.k2,
            report_cells(self.short.as_ref(), self.long.as_ref()).join(","),
            self.status.replace([',', '\n'], ";"),
            opt(self.short_dt),
            opt(self.long_dt),
            self.grid_checksum
        )
    }

    /// Inverse of `csv_row`; wall time is not part of the row.
    pub fn parse_row(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.split(',').collect();
        let n = 3 + REPORT_COLUMNS.len() + 4;
        if f.len() != n {
            return Err(Error::Parse(format!("expected {n} columns, got {}", f.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| Error::Parse(format!("bad number '{s}'")));
        let opt = |s: &str| if s.is_empty() { Ok(None) } else { num(s).map(Some) };
        let (short, long) = crate::wave_metrics::parse_report_cells(&f[3..3 + REPORT_COLUMNS.len()])?;
        let t = 3 + REPORT_COLUMNS.len();
        Ok(Self {
            k0: num(f[0])?,
            k1: num(f[1])?,
            k2: num(f[2])?,
            short,
            long,
            status: f[t].to_string(),
            short_dt: opt(f[t + 1])?,
            long_dt: opt(f[t + 2])?,
            grid_checksum: f[t + 3].to_string(),
            wall_seconds: 0.0,
        })
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf29ce484222325u64, |h, &b| (h ^ b as u64).wrapping_mul(0x100000001b3))
}

fn grid_checksum(grids: &[&GridSpec<f64>]) -> String {
    let text = serde_json::to_string(grids).expect("grids serialise");
    format!("{:016x}", fnv1a(text.as_bytes()))
}

/// Runs one lattice point. Failures are recorded in `status`.
pub fn run_point(spec: &SweepSpec, k: (f64, f64, f64), long_dt: f64) -> RunRecord {
    let start = Instant::now();
    let p = spec.base.with_k(k.0, k.1, k.2);
    let mut status = Vec::new();
    let mut grids = Vec::new();
    let (mut short, mut long, mut short_dt, mut ldt) = (None, None, None, None);
    if spec.needs_short() {
        match stable_grid(&p, spec.short_run_grid()) {
            Ok(g) => {
                short_dt = Some(g.dt);
                match simulate(&p, &g, &InitialCondition::PaperDefault).and_then(|t| ShortMetrics::from_run(&t, &spec.metrics)) {
                    Ok(m) => short = Some(m),
                    Err(e) => status.push(format!("short: {e}")),
                }
                grids.push(g);
            }
            Err(e) => status.push(format!("short: {e}")),
        }
    }
    if spec.needs_long() {
        match stable_grid(&p, spec.long_run_grid(long_dt)) {
            Ok(g) => {
                ldt = Some(g.dt);
                match simulate(&p, &g, &InitialCondition::PaperDefault) {
                    Ok(t) => long = Some(LongMetrics::from_run(&t, &spec.metrics)),
                    Err(e) => status.push(format!("long: {e}")),
                }
                grids.push(g);
            }
            Err(e) => status.push(format!("long: {e}")),
        }
    }
    RunRecord {
        k0: k.0,
        k1: k.1,
        k2: k.2,
        short,
        long,
        status: if status.is_empty() { "ok".into() } else { status.join("; ") },
        short_dt,
        long_dt: ldt,
        grid_checksum: grid_checksum(&grids.iter().collect::<Vec<_>>()),
        wall_seconds: start.elapsed().as_secs_f64(),
    }
}

/// Output paths of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub csv: PathBuf,
}

impl SweepOutput {
    pub fn new(csv: impl Into<PathBuf>) -> Self {
        Self { csv: csv.into() }
    }

    pub fn partial(&self) -> PathBuf {
        with_suffix(&self.csv, ".partial")
    }

    pub fn timing(&self) -> PathBuf {
        with_suffix(&self.csv, ".timing")
    }
}

fn with_suffix(p: &Path, suffix: &str) -> PathBuf {
    let mut s = p.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Worker count: `PROTESTWAVE_THREADS` when set and positive, else rayon's default.
pub fn thread_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(rayon::current_num_threads)
}

/// Settles the long-run step: the gate's fast step when it passes,
/// otherwise its reference step.
pub fn resolve_long_dt(spec: &SweepSpec) -> Result<(f64, Option<GateOutcome>)> {
    let Some(gate) = spec.gate else {
        return Ok((spec.long_grid.dt, None));
    };
    if !spec.needs_long() {
        return Ok((gate.fast_dt, None));
    }
    let (k0, k1, k2) = spec.points()[0];
    let outcome = run_dt_gate(&spec.base.with_k(k0, k1, k2), &spec.long_grid, &gate)?;
    Ok((if outcome.passed { gate.fast_dt } else { gate.reference_dt }, Some(outcome)))
}

/// Runs every lattice point not already present in the partial file and
/// writes the sorted result. With `resume = false` any partial file is
/// discarded first.
pub fn run_sweep(spec: &SweepSpec, out: &SweepOutput, resume: bool) -> Result<Vec<RunRecord>> {
    spec.validate()?;
    let partial = out.partial();
    let mut done: BTreeMap<Key, RunRecord> = BTreeMap::new();
    let (long_dt, header) = match (resume, partial.exists()) {
        (true, true) => {
            let (header, records) = read_partial(&partial)?;
            let expected = format!("# spec = {}", serde_json::to_string(spec).expect("spec serialises"));
            if header.first() != Some(&expected) {
                return Err(Error::InvalidState(format!("{} was written by a different sweep spec", partial.display())));
            }
            let long_dt = header
                .iter()
                .find_map(|l| l.strip_prefix("# long_dt = "))
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::Parse("partial file lacks long_dt".into()))?;
            for r in records {
                done.insert(Key(r.key()), r);
            }
            (long_dt, header)
        }
        _ => {
            let (long_dt, gate) = resolve_long_dt(spec)?;
            let header = spec.header_lines(long_dt, gate.as_ref());
            let mut f = File::create(&partial)?;
            for l in &header {
                writeln!(f, "{l}")?;
            }
            writeln!(f, "{}", csv_header())?;
            f.sync_all()?;
            File::create(out.timing())?;
            (long_dt, header)
        }
    };

    let todo: Vec<_> = spec.points().into_iter().filter(|k| !done.contains_key(&Key(*k))).collect();
    let sink = Mutex::new((
        OpenOptions::new().append(true).open(&partial)?,
        OpenOptions::new().create(true).append(true).open(out.timing())?,
    ));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count())
        .build()
        .map_err(|e| Error::Io(e.to_string()))?;
    let fresh: Vec<RunRecord> = pool.install(|| {
        todo.par_iter()
            .map(|&k| {
                let rec = run_point(spec, k, long_dt);
                let mut guard = sink.lock().expect("sink lock");
                let (rows, timing) = &mut *guard;
                writeln!(rows, "{}", rec.csv_row())?;
                rows.flush()?;
                writeln!(timing, "{},{},{},{}", rec.k0, rec.k1, rec.k2, rec.wall_seconds)?;
                Ok(rec)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    for r in fresh {
        done.insert(Key(r.key()), r);
    }
    let records: Vec<RunRecord> = done.into_values().collect();
    write_final(&out.csv, &header, &records)?;
    fs::remove_file(&partial)?;
    Ok(records)
}

/// Total order on lattice keys.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Key((f64, f64, f64));

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        let (a, b) = (self.0, other.0);
        a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.total_cmp(&b.2))
    }
}

fn read_partial(path: &Path) -> Result<(Vec<String>, Vec<RunRecord>)> {
    let mut header = Vec::new();
    let mut records = Vec::new();
    let col_header = csv_header();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if line.starts_with('#') {
            header.push(line);
        } else if line == col_header || line.is_empty() {
            continue;
        } else if let Ok(r) = RunRecord::parse_row(&line) {
            // A torn final line from a crash fails to parse and is rerun.
            records.push(r);
        }
    }
    Ok((header, records))
}

fn write_final(path: &Path, header: &[String], records: &[RunRecord]) -> Result<()> {
    let tmp = with_suffix(path, ".tmp");
    {
        let mut f = File::create(&tmp)?;
        for l in header {
            writeln!(f, "{l}")?;
        }
        writeln!(f, "{}", csv_header())?;
        for r in records {
            writeln!(f, "{}", r.csv_row())?;
        }
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Reads a finished sweep CSV.
pub fn read_sweep_csv(path: &Path) -> Result<Vec<RunRecord>> {
    Ok(read_partial(path)?.1)
}
