//! Exponential approach rates of travelling waves `u(x - ct)` to their end
//! states, from the five-dimensional first-order linearisation, and the
//! log-slope fits used to check them against simulated tails.

use std::fmt;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinetics::{jacobian, nontrivial_steady_states, trivial_steady_state, ModelParams, StatePoint, SteadyState};
use crate::pde::{simulate, GridSpec, InitialCondition, Profile, Snapshot};
use crate::wave_metrics::{least_squares_slope, wave_speed};

/// Band treated as equality when comparing rates or `c` against `2√f_u`.
pub const CASE_TOL: f64 = 1e-9;
/// Default deviation band for tail fits.
pub const FIT_DEVIATION: (f64, f64) = (1e-10, 1e-2);
/// Minimum number of nodes in a tail fit.
pub const MIN_TAIL_NODES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Tail {
    PlusInfinity,
    MinusInfinity,
}

impl fmt::Display for Tail {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tail::PlusInfinity => "+inf",
            Tail::MinusInfinity => "-inf",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayPrediction {
    pub tail: Tail,
    pub case_label: String,
    /// Negative at `+inf`, positive at `-inf`; NaN when not applicable.
    pub rate: f64,
    /// Repeated eigenvalue: the tail carries a polynomial prefactor.
    pub degenerate: bool,
    pub applicable: bool,
}

impl DecayPrediction {
    fn new(tail: Tail, case: &str, rate: f64, degenerate: bool) -> Self {
        Self { tail, case_label: case.to_string(), rate, degenerate, applicable: true }
    }
}

/// `μ1,2 = -(f_u + g_v) ± sqrt((f_u + g_v)² + 4 f_v g_u - 4 f_u g_v)` at a
/// nontrivial state; `mu1 >= mu2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuPair {
    pub mu1: f64,
    pub mu2: f64,
}

fn check_speed(c: f64) -> Result<()> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidParameter { name: "c", reason: format!("wave speed {c} must be > 0") });
    }
    Ok(())
}

fn check_unit_diffusion(p: &ModelParams<f64>) -> Result<()> {
    if p.d1 != 1.0 || p.d2 != 1.0 {
        return Err(Error::NotApplicable(format!(
            "closed-form tail rates assume d1 = d2 = 1, got d1 = {}, d2 = {}",
            p.d1, p.d2
        )));
    }
    Ok(())
}

/// Linearisation of the travelling-wave system in `(u, v, P, u', v')`.
pub fn tw_linearization(p: &ModelParams<f64>, s: &StatePoint<f64>, c: f64) -> Result<[[f64; 5]; 5]> {
    check_speed(c)?;
    if !(p.d1 > 0.0 && p.d2 > 0.0) {
        return Err(Error::NotApplicable("travelling-wave system needs d1, d2 > 0".into()));
    }
    let j = jacobian(p, s)?;
    let (d1, d2) = (p.d1, p.d2);
    Ok([
        [0.0, 0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, 1.0],
        [-j[2][0] / c, -j[2][1] / c, -j[2][2] / c, 0.0, 0.0],
        [-j[0][0] / d1, -j[0][1] / d1, -j[0][2] / d1, -c / d1, 0.0],
        [-j[1][0] / d2, -j[1][1] / d2, -j[1][2] / d2, 0.0, -c / d2],
    ])
}

/// `(-c ± sqrt(c² - 4a)) / 2`, plus sign first.
fn root_pair(c: f64, a: f64) -> (Complex<f64>, Complex<f64>) {
    let sq = Complex::new(c * c - 4.0 * a, 0.0).sqrt();
    ((sq - c) / 2.0, (-sq - c) / 2.0)
}

/// `[0, λ2, λ3, λ4, λ5]` at the trivial state with `λ2,3` from `f_u` and
/// `λ4,5` from `g_v`.
pub fn trivial_tw_eigenvalues(p: &ModelParams<f64>, p_ambient: f64, c: f64) -> Result<[Complex<f64>; 5]> {
    check_speed(c)?;
    check_unit_diffusion(p)?;
    let (fu, gv) = trivial_rates(p, p_ambient)?;
    let (l2, l3) = root_pair(c, fu);
    let (l4, l5) = root_pair(c, gv);
    Ok([Complex::new(0.0, 0.0), l2, l3, l4, l5])
}

/// `[λ1, λ2, λ3, λ4, λ5]` at a nontrivial state: `λ1 = u*/c`, `λ2,3` from
/// `μ2` and `λ4,5` from `μ1`.
pub fn nontrivial_tw_eigenvalues(p: &ModelParams<f64>, state: &SteadyState<f64>, c: f64) -> Result<[Complex<f64>; 5]> {
    check_speed(c)?;
    check_unit_diffusion(p)?;
    let (tr, disc) = block_invariants(p, state)?;
    let sq = Complex::new(disc, 0.0).sqrt();
    let mu1 = -tr + sq;
    let mu2 = -tr - sq;
    let half = |mu: Complex<f64>| {
        let r = (c * c + 2.0 * mu).sqrt();
        ((r - c) / 2.0, (-r - c) / 2.0)
    };
    let (l2, l3) = half(mu2);
    let (l4, l5) = half(mu1);
    Ok([Complex::new(state.point.u / c, 0.0), l2, l3, l4, l5])
}

/// `(f_u, g_v)` at the trivial state.
pub fn trivial_rates(p: &ModelParams<f64>, p_ambient: f64) -> Result<(f64, f64)> {
    let ss = trivial_steady_state(p, p_ambient)?;
    let j = jacobian(p, &ss.point)?;
    Ok((j[0][0], j[1][1]))
}

/// Trace and `(f_u + g_v)² + 4 f_v g_u - 4 f_u g_v` of the (u,v) block.
fn block_invariants(p: &ModelParams<f64>, state: &SteadyState<f64>) -> Result<(f64, f64)> {
    let j = jacobian(p, &state.point)?;
    let (fu, fv, gu, gv) = (j[0][0], j[0][1], j[1][0], j[1][1]);
    let tr = fu + gv;
    Ok((tr, tr * tr + 4.0 * fv * gu - 4.0 * fu * gv))
}

pub fn mu_pair(p: &ModelParams<f64>, state: &SteadyState<f64>) -> Result<MuPair> {
    let (tr, disc) = block_invariants(p, state)?;
    if disc < 0.0 {
        return Err(Error::ComplexMu(disc));
    }
    let sq = disc.sqrt();
    Ok(MuPair { mu1: -tr + sq, mu2: -tr - sq })
}

/// Spreading-speed threshold `2 sqrt(max(f_u, 0))` at the trivial state.
pub fn minimal_speed(p: &ModelParams<f64>, p_ambient: f64) -> Result<f64> {
    let (fu, _) = trivial_rates(p, p_ambient)?;
    Ok(2.0 * fu.max(0.0).sqrt())
}

/// Principal rate at `+inf` for waves invading the trivial state at police
/// level `p_ambient`.
pub fn principal_rate_plus(p: &ModelParams<f64>, p_ambient: f64, c: f64) -> Result<DecayPrediction> {
    check_unit_diffusion(p)?;
    let (fu, gv) = trivial_rates(p, p_ambient)?;
    plus_rate_from(fu, gv, c)
}

/// Case selection at `+inf` from `f_u`, `g_v` of the trivial state.
pub fn plus_rate_from(fu: f64, gv: f64, c: f64) -> Result<DecayPrediction> {
    check_speed(c)?;
    let tail = Tail::PlusInfinity;
    if fu.abs() <= CASE_TOL {
        return Ok(DecayPrediction { applicable: false, ..DecayPrediction::new(tail, "Case 4", f64::NAN, false) });
    }
    let (l2, l3) = root_pair(c, fu);
    if fu > 0.0 {
        let c_min = 2.0 * fu.sqrt();
        if (c - c_min).abs() <= CASE_TOL {
            return Ok(DecayPrediction::new(tail, "Case 5.2", -c / 2.0, true));
        }
        if c < c_min {
            return Err(Error::RealityViolation { c, c_min });
        }
        return Ok(DecayPrediction::new(tail, "Case 5.1", l2.re, false));
    }
    let (_, l5) = root_pair(c, gv);
    if (fu - gv).abs() <= CASE_TOL {
        Ok(DecayPrediction::new(tail, "Case 2", l5.re, true))
    } else if fu < gv {
        Ok(DecayPrediction::new(tail, "Case 1", l5.re, false))
    } else {
        Ok(DecayPrediction::new(tail, "Case 3", l3.re, false))
    }
}

/// The largest nontrivial state, the `-inf` end of a wave.
pub fn upper_state(p: &ModelParams<f64>) -> Result<SteadyState<f64>> {
    nontrivial_steady_states(p)?
        .pop()
        .ok_or_else(|| Error::NotApplicable("no nontrivial steady state to approach at -inf".into()))
}

/// Principal rate at `-inf`, approaching the largest nontrivial state.
pub fn principal_rate_minus(p: &ModelParams<f64>, c: f64) -> Result<DecayPrediction> {
    let state = upper_state(p)?;
    principal_rate_minus_at(p, &state, c)
}

pub fn principal_rate_minus_at(p: &ModelParams<f64>, state: &SteadyState<f64>, c: f64) -> Result<DecayPrediction> {
    check_unit_diffusion(p)?;
    minus_rate_from(state.point.u, mu_pair(p, state)?, c)
}

/// Case selection at `-inf` from `u*` and `μ1,2`.
pub fn minus_rate_from(u_star: f64, mu: MuPair, c: f64) -> Result<DecayPrediction> {
    check_speed(c)?;
    if !(mu.mu2 > 0.0) {
        return Err(Error::NotApplicable(format!("mu2 = {} is not positive: the end state is not stable", mu.mu2)));
    }
    let tail = Tail::MinusInfinity;
    let l1 = u_star / c;
    let l2 = ((c * c + 2.0 * mu.mu2).sqrt() - c) / 2.0;
    let l4 = ((c * c + 2.0 * mu.mu1).sqrt() - c) / 2.0;
    let eq = |a: f64, b: f64| (a - b).abs() <= CASE_TOL;
    Ok(if eq(l1, l2) && eq(l2, l4) {
        DecayPrediction::new(tail, "Case 3", l1, true)
    } else if eq(l1, l2) {
        DecayPrediction::new(tail, "Case 2", l1, true)
    } else if eq(l2, l4) && l2 < l1 {
        DecayPrediction::new(tail, "Case 4", l2, true)
    } else if l1 < l2 {
        DecayPrediction::new(tail, "Case 1", l1, false)
    } else {
        DecayPrediction::new(tail, "Case 5", l2, false)
    })
}

/// Which stretch of the profile a tail fit uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailWindow {
    /// Accepted `|u - u_ref|` band.
    pub deviation: (f64, f64),
    /// Optional explicit `x` interval.
    pub x_range: Option<(f64, f64)>,
}

impl Default for TailWindow {
    fn default() -> Self {
        Self { deviation: FIT_DEVIATION, x_range: None }
    }
}

/// Least-squares slope of `ln|u - u_ref|` against `x` on one side of the
/// front.
///
/// `u_other` is the state at the opposite tail. Uses the contiguous run of
/// in-band nodes nearest the front (the rightmost crossing of the level
/// `(u_ref + u_other)/2`) on the requested side.
pub fn fit_tail_rate(snap: &Snapshot<f64>, tail: Tail, u_ref: f64, u_other: f64, window: &TailWindow) -> Result<f64> {
    let n = snap.len();
    let mid = 0.5 * (u_ref + u_other);
    let u_right = match tail {
        Tail::PlusInfinity => u_ref,
        Tail::MinusInfinity => u_other,
    };
    // Rightmost node at least halfway from the right-hand state.
    let i_front = (0..n)
        .rev()
        .find(|&i| (snap.u[i] - u_right).abs() >= (mid - u_right).abs())
        .ok_or_else(|| Error::NoFront("profile never crosses the midpoint level".into()))?;
    let (lo, hi) = window.deviation;
    let usable = |i: usize| {
        let d = (snap.u[i] - u_ref).abs();
        let x = snap.x(i);
        d >= lo && d <= hi && window.x_range.is_none_or(|(a, b)| x >= a && x <= b)
    };
    let order: Box<dyn Iterator<Item = usize>> = match tail {
        Tail::PlusInfinity => Box::new(i_front..n),
        Tail::MinusInfinity => Box::new((0..=i_front).rev()),
    };
    let mut run = Vec::new();
    for i in order {
        if usable(i) {
            run.push((snap.x(i), (snap.u[i] - u_ref).abs().ln()));
        } else if !run.is_empty() {
            break;
        }
    }
    if run.len() < MIN_TAIL_NODES {
        return Err(Error::InsufficientTail(run.len()));
    }
    Ok(least_squares_slope(&run))
}

/// How the simulated wave is seeded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TailSeed {
    /// `u = exp(-rate x)` into the trivial state. A rate below `c*/2`
    /// selects the faster wave `c = rate + f_u/rate`.
    Exponential(f64),
    /// The upper state on `[0, width)`, the trivial state beyond.
    Plateau(f64),
}

/// Settings for [`decay_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayCheckSpec {
    pub p_ambient: f64,
    pub x_max: f64,
    pub dx: f64,
    /// `None` picks half the stability limit.
    pub dt: Option<f64>,
    pub t_end: f64,
    /// `None` picks `Exponential(c*/3)` when `c* > 0`, else `Plateau(x_max/20)`.
    pub seed: Option<TailSeed>,
    pub plus_window: TailWindow,
    pub minus_window: TailWindow,
}

impl Default for DecayCheckSpec {
    fn default() -> Self {
        Self {
            p_ambient: 1.0,
            x_max: 1200.0,
            dx: 0.25,
            dt: None,
            t_end: 600.0,
            seed: None,
            plus_window: TailWindow::default(),
            minus_window: TailWindow { deviation: (1e-10, 1e-5), x_range: None },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailCheck {
    pub tail: Tail,
    pub prediction: Option<DecayPrediction>,
    pub fitted_rate: Option<f64>,
    pub relative_error: Option<f64>,
    /// Why the prediction or the fit is missing.
    pub error: Option<String>,
}

impl TailCheck {
    fn build(tail: Tail, prediction: Result<DecayPrediction>, fitted: Result<f64>) -> Self {
        let mut errors = Vec::new();
        let prediction = prediction.map_err(|e| errors.push(format!("prediction: {e}"))).ok();
        let fitted_rate = fitted.map_err(|e| errors.push(format!("fit: {e}"))).ok();
        let relative_error = match (&prediction, fitted_rate) {
            (Some(p), Some(f)) if p.applicable => Some(((f - p.rate) / p.rate).abs()),
            _ => None,
        };
        Self { tail, prediction, fitted_rate, relative_error, error: (!errors.is_empty()).then(|| errors.join("; ")) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub speed: f64,
    pub minimal_speed: f64,
    pub seed: TailSeed,
    pub plus: TailCheck,
    pub minus: TailCheck,
}

/// Simulates a wave from the trivial state at `p_ambient` to the upper
/// nontrivial state, measures its speed over the last quarter of the run and
/// compares fitted `u` tail slopes with the predicted principal rates.
pub fn decay_check(p: &ModelParams<f64>, spec: &DecayCheckSpec) -> Result<DecayReport> {
    let up = upper_state(p)?;
    let c_min = minimal_speed(p, spec.p_ambient)?;
    let seed = spec
        .seed
        .unwrap_or(if c_min > 0.0 { TailSeed::Exponential(c_min / 3.0) } else { TailSeed::Plateau(spec.x_max / 20.0) });
    let v_amb = p.trivial_tension(spec.p_ambient);
    let (u0, v0) = match seed {
        TailSeed::Exponential(rate) => (Profile::Exp { amp: 1.0, rate }, Profile::Const(v_amb)),
        TailSeed::Plateau(width) => (
            Profile::Step { left: up.point.u, right: 0.0, at: width },
            Profile::Step { left: up.point.v, right: v_amb, at: width },
        ),
    };
    let ic = InitialCondition::Custom { u: u0, v: v0, p: Profile::Const(spec.p_ambient) };
    let n_snap = 40;
    let times: Vec<f64> = (0..=n_snap).map(|i| spec.t_end * (0.5 + 0.5 * i as f64 / n_snap as f64)).collect();
    let mut grid = GridSpec::new(0.0, spec.x_max, spec.dx, 1.0, spec.t_end, times)?;
    grid.dt = spec.dt.unwrap_or(0.5 * grid.max_stable_dt(p));
    let traj = simulate(p, &grid, &ic)?;
    let speed = wave_speed(&traj, 0.5 * up.point.u, (0.75 * spec.t_end, spec.t_end))?;
    let last = traj.final_snapshot();
    let plus = TailCheck::build(
        Tail::PlusInfinity,
        principal_rate_plus(p, spec.p_ambient, speed),
        fit_tail_rate(last, Tail::PlusInfinity, 0.0, up.point.u, &spec.plus_window),
    );
    let minus = TailCheck::build(
        Tail::MinusInfinity,
        principal_rate_minus_at(p, &up, speed),
        fit_tail_rate(last, Tail::MinusInfinity, up.point.u, 0.0, &spec.minus_window),
    );
    Ok(DecayReport { speed, minimal_speed: c_min, seed, plus, minus })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::eigenvalues5;

    fn base() -> ModelParams<f64> {
        ModelParams::analysis_base()
    }

    fn snap(n: usize, dx: f64, f: impl Fn(f64) -> f64) -> Snapshot<f64> {
        let u: Vec<f64> = (0..n).map(|i| f(i as f64 * dx)).collect();
        Snapshot { t: 0.0, x_min: 0.0, dx, v: vec![1.0; n], p: vec![1.0; n], u }
    }

    #[test]
    fn plus_cases() {
        let r = plus_rate_from(-1.0, -2.0, 1.0).unwrap();
        assert_eq!(r.case_label, "Case 3");
        assert!((r.rate - (-1.0 - 5f64.sqrt()) / 2.0).abs() < 1e-12);
        let r = plus_rate_from(1.0, -1.0, 2.0).unwrap();
        assert_eq!((r.case_label.as_str(), r.degenerate), ("Case 5.2", true));
        assert!((r.rate + 1.0).abs() < 1e-12);
        let r = plus_rate_from(-1.5, -1.5, 1.0).unwrap();
        assert_eq!((r.case_label.as_str(), r.degenerate), ("Case 2", true));
        let r = plus_rate_from(-3.0, -1.0, 1.0).unwrap();
        assert_eq!(r.case_label, "Case 1");
        assert!((r.rate - (-1.0 - 5f64.sqrt()) / 2.0).abs() < 1e-12);
        let r = plus_rate_from(0.0, -1.0, 1.0).unwrap();
        assert!(!r.applicable && r.case_label == "Case 4");
        let r = plus_rate_from(1.0, -1.0, 3.0).unwrap();
        assert_eq!(r.case_label, "Case 5.1");
        assert!((r.rate - (-3.0 + 5f64.sqrt()) / 2.0).abs() < 1e-12);
        assert!(matches!(plus_rate_from(1.0, -1.0, 1.0), Err(Error::RealityViolation { .. })));
        assert!(plus_rate_from(1.0, -1.0, 0.0).is_err());
    }

    #[test]
    fn minus_cases() {
        // mu = 3/2 gives lambda = (-c + sqrt(c² + 3))/2 = 1/2 at c = 1.
        let r = minus_rate_from(0.1, MuPair { mu1: 4.0, mu2: 1.5 }, 1.0).unwrap();
        assert_eq!(r.case_label, "Case 1");
        assert!((r.rate - 0.1).abs() < 1e-15);
        let r = minus_rate_from(0.9, MuPair { mu1: 4.0, mu2: 1.5 }, 1.0).unwrap();
        assert_eq!(r.case_label, "Case 5");
        assert!((r.rate - 0.5).abs() < 1e-12);
        let r = minus_rate_from(0.5, MuPair { mu1: 4.0, mu2: 1.5 }, 1.0).unwrap();
        assert_eq!((r.case_label.as_str(), r.degenerate), ("Case 2", true));
        let r = minus_rate_from(0.5, MuPair { mu1: 1.5, mu2: 1.5 }, 1.0).unwrap();
        assert_eq!((r.case_label.as_str(), r.degenerate), ("Case 3", true));
        let r = minus_rate_from(0.9, MuPair { mu1: 1.5, mu2: 1.5 }, 1.0).unwrap();
        assert_eq!((r.case_label.as_str(), r.degenerate), ("Case 4", true));
        assert!(minus_rate_from(0.5, MuPair { mu1: 1.0, mu2: -0.1 }, 1.0).is_err());
    }

    #[test]
    fn closed_forms_match_dense_eigenvalues() {
        let p = base().with_k(4.5, 0.5, 0.5);
        let c = 1.3;
        let tr = trivial_steady_state(&p, 1.0).unwrap();
        let dense = eigenvalues5(&tw_linearization(&p, &tr.point, c).unwrap());
        let mut closed = trivial_tw_eigenvalues(&p, 1.0, c).unwrap();
        crate::linalg::sort_complex(&mut closed);
        for (a, b) in dense.iter().zip(&closed) {
            assert!((a - b).norm() < 1e-10, "{a} vs {b}");
        }
        let up = upper_state(&p).unwrap();
        let dense = eigenvalues5(&tw_linearization(&p, &up.point, c).unwrap());
        let mut closed = nontrivial_tw_eigenvalues(&p, &up, c).unwrap();
        crate::linalg::sort_complex(&mut closed);
        for (a, b) in dense.iter().zip(&closed) {
            assert!((a - b).norm() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn minimal_speed_formula() {
        // f_u = 0 for the base point without police.
        assert_eq!(minimal_speed(&base(), 0.0).unwrap(), 0.0);
        let p = base().with_k(4.5, 0.5, 0.5);
        let (fu, _) = trivial_rates(&p, 1.0).unwrap();
        assert!((minimal_speed(&p, 1.0).unwrap() - 2.0 * fu.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn mu_pair_is_ordered() {
        let p = base().with_k(4.5, 0.5, 0.5);
        let mu = mu_pair(&p, &upper_state(&p).unwrap()).unwrap();
        assert!(mu.mu1 >= mu.mu2 && mu.mu2 > 0.0);
    }

    #[test]
    fn tail_fit_of_exponentials() {
        let s = snap(4001, 0.01, |x| (-1.5 * x).exp());
        let k = fit_tail_rate(&s, Tail::PlusInfinity, 0.0, 0.5, &TailWindow::default()).unwrap();
        assert!((k + 1.5).abs() < 1e-3, "{k}");
        let s = snap(4001, 0.01, |x| x * (-x).exp());
        let k = fit_tail_rate(&s, Tail::PlusInfinity, 0.0, 0.5, &TailWindow::default()).unwrap();
        assert!(k > -1.0 && k < -0.8, "{k}");
        // Approach to 0.8 from below on the left.
        let s = snap(4001, 0.01, |x| 0.8 - (0.7 * (x - 40.0)).exp());
        let k = fit_tail_rate(&s, Tail::MinusInfinity, 0.8, 0.0, &TailWindow::default()).unwrap();
        assert!((k - 0.7).abs() < 1e-3, "{k}");
        let short = snap(5, 0.01, |x| (-1.5 * x).exp());
        assert!(matches!(
            fit_tail_rate(&short, Tail::PlusInfinity, 0.0, 0.5, &TailWindow::default()),
            Err(Error::InsufficientTail(_))
        ));
    }
}
