//! Explicit finite-difference integration of the 1-D system
//!
//! ```text
//! u_t = d1 u_xx + f(u,v,P)
//! v_t = d2 v_xx + g(u,v,P)
//! P_t = s(u,v,P)
//! ```
//!
//! Forward Euler in time, second-order central differences in space and
//! homogeneous Neumann conditions through ghost-node reflection.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinetics::ModelParams;
use crate::scalar::Scalar;

/// Any field exceeding this magnitude aborts the run.
pub const BLOWUP_LIMIT: f64 = 1e6;

/// Discretisation of the domain and the time axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec<T> {
    pub x_min: T,
    pub x_max: T,
    pub dx: T,
    pub dt: T,
    pub t_end: T,
    /// Sorted output times; `t_end` is always recorded as well.
    pub snapshot_times: Vec<T>,
    /// Spacing of the probe time series recorded at `x_min`.
    pub probe_interval: T,
}

impl<T: Scalar> GridSpec<T> {
    pub fn new(x_min: T, x_max: T, dx: T, dt: T, t_end: T, snapshot_times: Vec<T>) -> Result<Self> {
        let g = Self { x_min, x_max, dx, dt, t_end, snapshot_times, probe_interval: T::lit(0.01) };
        g.validate()?;
        Ok(g)
    }

    /// Short-run grid: `[0, 500]`, `dx = 0.1`, `dt = 1e-4`, `t_end = 20`.
    pub fn short_run() -> Self {
        Self {
            x_min: T::zero(),
            x_max: T::lit(500.0),
            dx: T::lit(0.1),
            dt: T::lit(1e-4),
            t_end: T::lit(20.0),
            snapshot_times: vec![T::lit(15.0)],
            probe_interval: T::lit(0.01),
        }
    }

    /// Long-run grid: `[0, 5000]`, `dx = 1`, `dt = 1e-4`, `t_end = 100`.
    pub fn long_run() -> Self {
        Self {
            x_min: T::zero(),
            x_max: T::lit(5000.0),
            dx: T::one(),
            dt: T::lit(1e-4),
            t_end: T::lit(100.0),
            snapshot_times: vec![T::lit(95.0)],
            probe_interval: T::lit(0.01),
        }
    }

    pub fn with_dt(mut self, dt: T) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_t_end(mut self, t_end: T) -> Self {
        self.t_end = t_end;
        self.snapshot_times.retain(|&t| t <= t_end);
        self
    }

    pub fn with_snapshots(mut self, times: Vec<T>) -> Self {
        self.snapshot_times = times;
        self.snapshot_times.sort_by(|a, b| a.partial_cmp(b).expect("finite snapshot times"));
        self
    }

    pub fn n_nodes(&self) -> usize {
        ((self.x_max - self.x_min) / self.dx).round().to_usize().unwrap_or(0) + 1
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round().to_usize().unwrap_or(0)
    }

    pub fn x(&self, i: usize) -> T {
        self.x_min + self.dx * T::from_usize(i).expect("node index fits scalar")
    }

    /// Geometry and time-axis checks that do not depend on the model.
    pub fn validate(&self) -> Result<()> {
        let bad = |name: &'static str, reason: String| Err(Error::InvalidParameter { name, reason });
        if !(self.dx > T::zero()) {
            return bad("dx", format!("{} must be > 0", self.dx));
        }
        if !(self.dt > T::zero()) {
            return bad("dt", format!("{} must be > 0", self.dt));
        }
        if !(self.x_min < self.x_max) {
            return bad("x_max", format!("x_min {} must be < x_max {}", self.x_min, self.x_max));
        }
        if !(self.t_end > T::zero()) {
            return bad("t_end", format!("{} must be > 0", self.t_end));
        }
        if !(self.probe_interval > T::zero()) {
            return bad("probe_interval", format!("{} must be > 0", self.probe_interval));
        }
        if self.n_nodes() < 2 {
            return bad("dx", "grid has fewer than two nodes".into());
        }
        if self.snapshot_times.windows(2).any(|w| !(w[0] <= w[1])) {
            return bad("snapshot_times", "must be sorted".into());
        }
        if self.snapshot_times.iter().any(|&t| t < T::zero() || t > self.t_end) {
            return bad("snapshot_times", "must lie in [0, t_end]".into());
        }
        Ok(())
    }

    /// Largest stable step: explicit diffusion limit and reaction stiffness.
    pub fn max_stable_dt(&self, params: &ModelParams<T>) -> T {
        let two = T::lit(2.0);
        let d = params.d1.max(params.d2);
        let diffusive = if d > T::zero() { self.dx * self.dx / (two * d) } else { T::infinity() };
        diffusive.min(two / reaction_stiffness(params))
    }

    /// Full validation against the model, including the stability limits.
    pub fn check(&self, params: &ModelParams<T>) -> Result<()> {
        self.validate()?;
        params.validate()?;
        let two = T::lit(2.0);
        let d = params.d1.max(params.d2);
        if d > T::zero() && self.dt > self.dx * self.dx / (two * d) {
            return Err(Error::Unstable(format!(
                "dt = {} exceeds dx^2/(2 max(d1,d2)) = {}",
                self.dt,
                self.dx * self.dx / (two * d)
            )));
        }
        let l = reaction_stiffness(params);
        if self.dt > two / l {
            return Err(Error::Unstable(format!("dt = {} exceeds 2/L = {} (L = {})", self.dt, two / l, l)));
        }
        Ok(())
    }
}

/// Upper bound `L` on the reaction Jacobian's stiff diagonal over
/// `0 <= u, P <= 1`: `max(1, max(1,2^k1) Γ + ω, θ max(1,2^-k2) max(1,2^-k0))`.
pub fn reaction_stiffness<T: Scalar>(p: &ModelParams<T>) -> T {
    let one = T::one();
    let two = T::lit(2.0);
    let activity = two.powf(p.k1).max(one) * p.gamma + p.omega;
    let tension = p.theta * two.powf(-p.k2).max(one) * two.powf(-p.k0).max(one);
    activity.max(tension).max(one)
}

/// One-dimensional spatial profile used to build initial data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Profile<T> {
    Const(T),
    /// `amp * exp(-rate * (x - x_min))`
    Exp { amp: T, rate: T },
    /// `amp * exp(-((x - center) / width)^2)`
    Gaussian { amp: T, center: T, width: T },
    /// `left` for `x < at`, `right` otherwise.
    Step { left: T, right: T, at: T },
}

impl<T: Scalar> Profile<T> {
    pub fn eval(&self, x: T, x_min: T) -> T {
        match *self {
            Profile::Const(c) => c,
            Profile::Exp { amp, rate } => amp * (-rate * (x - x_min)).exp(),
            Profile::Gaussian { amp, center, width } => {
                let z = (x - center) / width;
                amp * (-z * z).exp()
            }
            Profile::Step { left, right, at } => {
                if x < at {
                    left
                } else {
                    right
                }
            }
        }
    }
}

impl<T: Scalar> fmt::Display for Profile<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Const(c) => write!(f, "const:{c}"),
            Profile::Exp { amp, rate } => write!(f, "exp:{amp}:{rate}"),
            Profile::Gaussian { amp, center, width } => write!(f, "gauss:{amp}:{center}:{width}"),
            Profile::Step { left, right, at } => write!(f, "step:{left}:{right}:{at}"),
        }
    }
}

impl<T: Scalar + FromStr> FromStr for Profile<T> {
    type Err = Error;

    /// `const:C`, `exp:AMP:RATE`, `gauss:AMP:CENTER:WIDTH`, `step:LEFT:RIGHT:AT`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |i: usize| -> Result<T> {
            parts
                .get(i)
                .ok_or_else(|| Error::Parse(format!("profile '{s}' is missing a field")))?
                .trim()
                .parse::<T>()
                .map_err(|_| Error::Parse(format!("bad number in profile '{s}'")))
        };
        let expect = |n: usize| -> Result<()> {
            if parts.len() == n {
                Ok(())
            } else {
                Err(Error::Parse(format!("profile '{s}' takes {} numbers", n - 1)))
            }
        };
        match parts[0] {
            "const" => {
                expect(2)?;
                Ok(Profile::Const(num(1)?))
            }
            "exp" => {
                expect(3)?;
                Ok(Profile::Exp { amp: num(1)?, rate: num(2)? })
            }
            "gauss" => {
                expect(4)?;
                Ok(Profile::Gaussian { amp: num(1)?, center: num(2)?, width: num(3)? })
            }
            "step" => {
                expect(4)?;
                Ok(Profile::Step { left: num(1)?, right: num(2)?, at: num(3)? })
            }
            other => Err(Error::Parse(format!("unknown profile kind '{other}'"))),
        }
    }
}

/// Initial data specification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InitialCondition<T> {
    /// `u = exp(-5 (x - x_min))`, `v = 1`, `P = 0`.
    PaperDefault,
    Custom { u: Profile<T>, v: Profile<T>, p: Profile<T> },
}

impl<T: Scalar> InitialCondition<T> {
    /// Localised trigger `exp(-5 (x - x_min))` invading the trivial state at
    /// police level `p_ambient`.
    pub fn invading(params: &ModelParams<T>, p_ambient: T) -> Self {
        InitialCondition::Custom {
            u: Profile::Exp { amp: T::one(), rate: T::lit(5.0) },
            v: Profile::Const(params.trivial_tension(p_ambient)),
            p: Profile::Const(p_ambient),
        }
    }

    pub fn uniform(u: T, v: T, p: T) -> Self {
        InitialCondition::Custom { u: Profile::Const(u), v: Profile::Const(v), p: Profile::Const(p) }
    }
}

impl<T: Scalar> fmt::Display for InitialCondition<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialCondition::PaperDefault => write!(f, "paper-default"),
            InitialCondition::Custom { u, v, p } => write!(f, "u={u};v={v};P={p}"),
        }
    }
}

/// Nodal values of the three fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fields<T> {
    pub u: Vec<T>,
    pub v: Vec<T>,
    pub p: Vec<T>,
}

impl<T: Scalar> Fields<T> {
    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }
}

/// Samples `kind` at the grid nodes.
pub fn initial_condition<T: Scalar>(grid: &GridSpec<T>, kind: &InitialCondition<T>) -> Fields<T> {
    let n = grid.n_nodes();
    let (pu, pv, pp) = match *kind {
        InitialCondition::PaperDefault => (
            Profile::Exp { amp: T::one(), rate: T::lit(5.0) },
            Profile::Const(T::one()),
            Profile::Const(T::zero()),
        ),
        InitialCondition::Custom { u, v, p } => (u, v, p),
    };
    let xs: Vec<T> = (0..n).map(|i| grid.x(i)).collect();
    Fields {
        u: xs.iter().map(|&x| pu.eval(x, grid.x_min)).collect(),
        v: xs.iter().map(|&x| pv.eval(x, grid.x_min)).collect(),
        p: xs.iter().map(|&x| pp.eval(x, grid.x_min)).collect(),
    }
}

/// The three fields at one output time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot<T> {
    pub t: T,
    pub x_min: T,
    pub dx: T,
    pub u: Vec<T>,
    pub v: Vec<T>,
    pub p: Vec<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    U,
    V,
    P,
}

impl<T: Scalar> Snapshot<T> {
    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn x(&self, i: usize) -> T {
        self.x_min + self.dx * T::from_usize(i).expect("node index fits scalar")
    }

    pub fn x_max(&self) -> T {
        self.x(self.len().saturating_sub(1))
    }

    pub fn field(&self, which: Field) -> &[T] {
        match which {
            Field::U => &self.u,
            Field::V => &self.v,
            Field::P => &self.p,
        }
    }

    /// Copy shifted by `shift` in space.
    pub fn translated(&self, shift: T) -> Self {
        Self { x_min: self.x_min + shift, ..self.clone() }
    }
}

/// Field values at the probe node `x_min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeSample<T> {
    pub t: T,
    pub u: T,
    pub v: T,
    pub p: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<T> {
    pub grid: GridSpec<T>,
    pub params: ModelParams<T>,
    pub snapshots: Vec<Snapshot<T>>,
    /// Probe time series at `x_min`, every `grid.probe_interval`.
    pub probe: Vec<ProbeSample<T>>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn final_snapshot(&self) -> &Snapshot<T> {
        self.snapshots.last().expect("trajectory always records t_end")
    }

    /// Snapshot whose time is nearest to `t`.
    pub fn snapshot_at(&self, t: T) -> &Snapshot<T> {
        self.snapshots
            .iter()
            .min_by(|a, b| (a.t - t).abs().partial_cmp(&(b.t - t).abs()).expect("finite times"))
            .expect("trajectory has snapshots")
    }
}

/// Integrates from `ic` over `grid`. The grid must satisfy its stability limits.
pub fn integrate<T: Scalar>(params: &ModelParams<T>, grid: &GridSpec<T>, ic: &Fields<T>) -> Result<Trajectory<T>> {
    grid.check(params)?;
    integrate_unchecked(params, grid, ic)
}

/// [`integrate`] without the step-size stability check. An unstable step
/// surfaces as [`Error::BlowUp`].
pub fn integrate_unchecked<T: Scalar>(params: &ModelParams<T>, grid: &GridSpec<T>, ic: &Fields<T>) -> Result<Trajectory<T>> {
    grid.validate()?;
    params.validate()?;
    let n = grid.n_nodes();
    if ic.u.len() != n || ic.v.len() != n || ic.p.len() != n {
        return Err(Error::InvalidState(format!(
            "initial arrays have lengths ({}, {}, {}), grid has {n} nodes",
            ic.u.len(),
            ic.v.len(),
            ic.p.len()
        )));
    }
    Stepper::new(params, grid, ic).run()
}

/// Builds the initial data from `kind` and integrates.
pub fn simulate<T: Scalar>(params: &ModelParams<T>, grid: &GridSpec<T>, kind: &InitialCondition<T>) -> Result<Trajectory<T>> {
    integrate(params, grid, &initial_condition(grid, kind))
}

struct Stepper<'a, T> {
    params: &'a ModelParams<T>,
    grid: &'a GridSpec<T>,
    cur: Fields<T>,
    next: Fields<T>,
    /// Every node at or beyond `frozen` still holds the far-field state,
    /// which is an exact fixed point of the scheme.
    frozen: usize,
    far: Option<(T, T, T)>,
    cache: FactorCache<T>,
}

/// Per-node transcendental factors keyed on the exact input values. Behind
/// the front the fields settle to bit-identical values step after step.
struct FactorCache<T> {
    p: Vec<T>,
    police: Vec<(T, T)>,
    u: Vec<T>,
    relax: Vec<T>,
    v: Vec<T>,
    switch: Vec<T>,
}

impl<T: Scalar> FactorCache<T> {
    fn new(params: &ModelParams<T>, f: &Fields<T>) -> Self {
        Self {
            p: f.p.clone(),
            police: f.p.iter().map(|&p| params.police_factors(p)).collect(),
            u: f.u.clone(),
            relax: f.u.iter().map(|&u| params.relaxation(u)).collect(),
            v: f.v.clone(),
            switch: f.v.iter().map(|&v| params.switch(v)).collect(),
        }
    }

    #[inline]
    fn rates(&mut self, params: &ModelParams<T>, i: usize, u: T, v: T, p: T) -> (T, T, T) {
        if p != self.p[i] {
            self.p[i] = p;
            self.police[i] = params.police_factors(p);
        }
        if u != self.u[i] {
            self.u[i] = u;
            self.relax[i] = params.relaxation(u);
        }
        if v != self.v[i] {
            self.v[i] = v;
            self.switch[i] = params.switch(v);
        }
        params.rates_from(u, v, p, self.police[i], self.relax[i], self.switch[i])
    }
}

impl<'a, T: Scalar> Stepper<'a, T> {
    fn new(params: &'a ModelParams<T>, grid: &'a GridSpec<T>, ic: &Fields<T>) -> Self {
        let mut cur = ic.clone();
        let flush = flush_level::<T>();
        for u in cur.u.iter_mut() {
            if u.abs() < flush {
                *u = T::zero();
            }
        }
        let n = cur.len();
        let last = (cur.u[n - 1], cur.v[n - 1], cur.p[n - 1]);
        let (f, g, s) = params.rates(last.0, last.1, last.2);
        let fixed = last.0 == T::zero() && f == T::zero() && g == T::zero() && s == T::zero();
        let (frozen, far) = if fixed {
            let mut i = n;
            while i > 0 && (cur.u[i - 1], cur.v[i - 1], cur.p[i - 1]) == last {
                i -= 1;
            }
            (i, Some(last))
        } else {
            (n, None)
        };
        let next = cur.clone();
        let cache = FactorCache::new(params, &cur);
        Self { params, grid, cur, next, frozen, far, cache }
    }

    fn probe(&self, t: T) -> ProbeSample<T> {
        ProbeSample { t, u: self.cur.u[0], v: self.cur.v[0], p: self.cur.p[0] }
    }

    fn snapshot(&self, t: T) -> Snapshot<T> {
        Snapshot {
            t,
            x_min: self.grid.x_min,
            dx: self.grid.dx,
            u: self.cur.u.clone(),
            v: self.cur.v.clone(),
            p: self.cur.p.clone(),
        }
    }

    fn run(mut self) -> Result<Trajectory<T>> {
        let grid = self.grid;
        let dt = grid.dt;
        let n_steps = grid.n_steps();
        let to_step = |t: T| (t / dt).round().to_usize().unwrap_or(0).min(n_steps);
        let mut snap_steps: Vec<usize> = grid.snapshot_times.iter().map(|&t| to_step(t)).collect();
        snap_steps.push(n_steps);
        snap_steps.dedup();
        let probe_every = (grid.probe_interval / dt).round().to_usize().unwrap_or(1).max(1);

        let time = |k: usize| dt * T::from_usize(k).expect("step index fits scalar");
        let mut snapshots = Vec::with_capacity(snap_steps.len());
        let mut probe = Vec::with_capacity(n_steps / probe_every + 2);
        let mut next_snap = 0;
        for k in 0..=n_steps {
            if k > 0 {
                self.step(time(k))?;
            }
            if k % probe_every == 0 || k == n_steps {
                probe.push(self.probe(time(k)));
            }
            while next_snap < snap_steps.len() && snap_steps[next_snap] == k {
                snapshots.push(self.snapshot(time(k)));
                next_snap += 1;
            }
        }
        Ok(Trajectory { grid: grid.clone(), params: *self.params, snapshots, probe })
    }

    /// Advances one step; `t` is the time reached, used only for error reports.
    fn step(&mut self, t: T) -> Result<()> {
        let p = self.params;
        let n = self.cur.len();
        let dt = self.grid.dt;
        let two = T::lit(2.0);
        let inv_dx2 = T::one() / (self.grid.dx * self.grid.dx);
        let cu = p.d1 * dt * inv_dx2;
        let cv = p.d2 * dt * inv_dx2;
        let limit = T::lit(BLOWUP_LIMIT);
        let flush = flush_level::<T>();
        let upper = (self.frozen + 1).min(n);

        let Fields { u, v, p: pol } = &self.cur;
        let Fields { u: un, v: vn, p: pn } = &mut self.next;
        for i in 0..upper {
            let (il, ir) = match i {
                0 => (1, 1),
                _ if i == n - 1 => (n - 2, n - 2),
                _ => (i - 1, i + 1),
            };
            let (ui, vi, pi) = (u[i], v[i], pol[i]);
            let lap_u = u[il] - two * ui + u[ir];
            let lap_v = v[il] - two * vi + v[ir];
            let (f, g, s) = self.cache.rates(p, i, ui, vi, pi);
            let mut u_new = ui + cu * lap_u + dt * f;
            let v_new = vi + cv * lap_v + dt * g;
            let p_new = pi + dt * s;
            if u_new.abs() < flush {
                u_new = T::zero();
            }
            if !(u_new.abs() <= limit && v_new.abs() <= limit && p_new.abs() <= limit) {
                return Err(Error::BlowUp { t: t.as_f64(), x: self.grid.x(i).as_f64() });
            }
            un[i] = u_new;
            vn[i] = v_new;
            pn[i] = p_new;
        }
        if let Some(far) = self.far {
            let j = self.frozen;
            if j < n && (un[j], vn[j], pn[j]) != far {
                self.frozen += 1;
            }
        }
        std::mem::swap(&mut self.cur, &mut self.next);
        Ok(())
    }
}

/// Activity below this magnitude is flushed to zero so the leading edge
/// never drags subnormal values across the whole grid.
fn flush_level<T: Scalar>() -> T {
    T::min_positive_value().sqrt()
}

/// Outcome of a grid-refinement comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefineReport {
    pub t: f64,
    /// `max_i |u_coarse(x_i) - u_fine(x_i)|` over the coarse nodes.
    pub sup_diff: f64,
    pub coarse_nodes: usize,
    pub fine_nodes: usize,
}

/// Runs `(dx, dt)` and `(dx/2, dt/4)` and compares `u` at `t_end` on the
/// coarse nodes.
pub fn refine_check<T: Scalar>(params: &ModelParams<T>, grid: &GridSpec<T>, ic: &InitialCondition<T>) -> Result<RefineReport> {
    let coarse = simulate(params, grid, ic)?;
    let mut fine_grid = grid.clone();
    fine_grid.dx = grid.dx / T::lit(2.0);
    fine_grid.dt = grid.dt / T::lit(4.0);
    fine_grid.snapshot_times.clear();
    let fine = simulate(params, &fine_grid, ic)?;
    let (a, b) = (coarse.final_snapshot(), fine.final_snapshot());
    let sup_diff = a
        .u
        .iter()
        .enumerate()
        .map(|(i, &uc)| (uc - b.u[2 * i]).abs().as_f64())
        .fold(0.0, f64::max);
    Ok(RefineReport { t: a.t.as_f64(), sup_diff, coarse_nodes: a.len(), fine_nodes: b.len() })
}

/// Writes `x,u,v,P` rows preceded by `#`-comment lines carrying `t` and the
/// full parameter set.
pub fn write_profile_csv<T: Scalar, W: Write>(mut w: W, snap: &Snapshot<T>, params: &ModelParams<T>) -> Result<()> {
    writeln!(w, "# t = {}", snap.t)?;
    for (name, val) in [
        ("d1", params.d1),
        ("d2", params.d2),
        ("alpha", params.alpha),
        ("beta", params.beta),
        ("gamma", params.gamma),
        ("omega", params.omega),
        ("theta", params.theta),
        ("k0", params.k0),
        ("k1", params.k1),
        ("k2", params.k2),
    ] {
        writeln!(w, "# {name} = {val}")?;
    }
    writeln!(w, "x,u,v,P")?;
    for i in 0..snap.len() {
        writeln!(w, "{},{},{},{}", snap.x(i), snap.u[i], snap.v[i], snap.p[i])?;
    }
    Ok(())
}
