//! Reaction terms of the protest/tension/police system and the analysis of
//! its spatially homogeneous flow.
//!
//! The three kinetic functions are
//!
//! ```text
//! f(u,v,P) = (1+P)^k1 * r(v) * Γ u (1-u) - ω u,    r(v) = 1 / (1 + exp(-β (v - α)))
//! g(u,v,P) = 1 - (1+P)^(-k2) * θ (1+u)^(-k0) * v
//! s(u,v,P) = u (1 - P)
//! ```
//!
//! Steady states split into the trivial hyperplane `u = 0`, `v = θ⁻¹(1+P)^k2`
//! and nontrivial states on `P = 1`.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::roots;
use crate::scalar::Scalar;

/// Bracket scan resolution in `u` for nontrivial steady states.
pub const ROOT_SCAN_STEP: f64 = 1e-4;

/// Two nontrivial roots closer than this (in `u`) are reported as a tangency.
pub const TANGENCY_TOL: f64 = 1e-6;

/// The ten model constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams<T> {
    pub d1: T,
    pub d2: T,
    pub alpha: T,
    pub beta: T,
    pub gamma: T,
    pub omega: T,
    pub theta: T,
    pub k0: T,
    pub k1: T,
    pub k2: T,
}

impl<T: Scalar> ModelParams<T> {
    /// α = β = Γ = θ = 1, ω = 0.5, unit diffusivities, all exponents zero.
    /// These are the constants used for the steady-state and region analysis.
    pub fn analysis_base() -> Self {
        Self {
            d1: T::one(),
            d2: T::one(),
            alpha: T::one(),
            beta: T::one(),
            gamma: T::one(),
            omega: T::lit(0.5),
            theta: T::one(),
            k0: T::zero(),
            k1: T::zero(),
            k2: T::zero(),
        }
    }

    /// Constants of the published parameter sweeps: ω = 100, Γ = 500, β = 20.
    pub fn simulation_base() -> Self {
        Self {
            d1: T::one(),
            d2: T::one(),
            alpha: T::one(),
            beta: T::lit(20.0),
            gamma: T::lit(500.0),
            omega: T::lit(100.0),
            theta: T::one(),
            k0: T::zero(),
            k1: T::zero(),
            k2: T::zero(),
        }
    }

    pub fn with_k(mut self, k0: T, k1: T, k2: T) -> Self {
        self.k0 = k0;
        self.k1 = k1;
        self.k2 = k2;
        self
    }

    /// `Γ = ω = 0`: the activity equation reduces to pure diffusion. Only
    /// accepted as a limiting configuration for conservation checks.
    pub fn is_pure_transport(&self) -> bool {
        self.gamma == T::zero() && self.omega == T::zero()
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            ("d1", self.d1),
            ("d2", self.d2),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("omega", self.omega),
            ("theta", self.theta),
            ("k0", self.k0),
            ("k1", self.k1),
            ("k2", self.k2),
        ];
        for (name, x) in all {
            if !x.is_finite() {
                return Err(Error::InvalidParameter { name, reason: format!("{x} is not finite") });
            }
        }
        for (name, x) in [("d1", self.d1), ("d2", self.d2)] {
            if x < T::zero() {
                return Err(Error::InvalidParameter { name, reason: format!("{x} must be >= 0") });
            }
        }
        let mut positive = vec![("alpha", self.alpha), ("beta", self.beta), ("theta", self.theta)];
        if !self.is_pure_transport() {
            positive.push(("gamma", self.gamma));
            positive.push(("omega", self.omega));
        }
        for (name, x) in positive {
            if x <= T::zero() {
                return Err(Error::InvalidParameter { name, reason: format!("{x} must be > 0") });
            }
        }
        Ok(())
    }

    /// Tension switch `r(v)`.
    #[inline]
    pub fn switch(&self, v: T) -> T {
        T::one() / (T::one() + (-self.beta * (v - self.alpha)).exp())
    }

    /// Tension of the trivial steady state at police level `p`.
    #[inline]
    pub fn trivial_tension(&self, p: T) -> T {
        (T::one() + p).powf(self.k2) / self.theta
    }

    /// Tension on the `v`-nullcline at `P = 1`.
    #[inline]
    pub fn nullcline_tension(&self, u: T) -> T {
        T::lit(2.0).powf(self.k2) * (T::one() + u).powf(self.k0) / self.theta
    }

    /// `f/u` along the `v`-nullcline at `P = 1`; its zeros in (0,1) are the
    /// nontrivial steady states.
    #[inline]
    pub fn reduced_activity_rate(&self, u: T) -> T {
        let v = self.nullcline_tension(u);
        T::lit(2.0).powf(self.k1) * self.switch(v) * self.gamma * (T::one() - u) - self.omega
    }

    /// Unchecked `(f, g, s)`. Powers are evaluated as `exp(k * ln_1p(x))`
    /// with shortcuts for `u = 0` and `P = 0`, which keeps states on the
    /// `u = 0, P = 0` hyperplane exact fixed points.
    #[inline]
    pub(crate) fn rates(&self, u: T, v: T, p: T) -> (T, T, T) {
        self.rates_from(u, v, p, self.police_factors(p), self.relaxation(u), self.switch(v))
    }

    /// `((1+P)^k1, (1+P)^-k2)`.
    pub(crate) fn police_factors(&self, p: T) -> (T, T) {
        if p == T::zero() {
            (T::one(), T::one())
        } else {
            let l = p.ln_1p();
            ((self.k1 * l).exp(), (-self.k2 * l).exp())
        }
    }

    /// `θ (1+u)^-k0`.
    pub(crate) fn relaxation(&self, u: T) -> T {
        if u == T::zero() || self.k0 == T::zero() {
            self.theta
        } else {
            self.theta * (-self.k0 * u.ln_1p()).exp()
        }
    }

    /// Rates from precomputed transcendental factors.
    #[inline]
    pub(crate) fn rates_from(&self, u: T, v: T, p: T, (h_p, t_p): (T, T), relax: T, switch: T) -> (T, T, T) {
        let one = T::one();
        let f = if u == T::zero() {
            T::zero()
        } else {
            h_p * switch * self.gamma * u * (one - u) - self.omega * u
        };
        let g = one - t_p * relax * v;
        let s = u * (one - p);
        (f, g, s)
    }
}

/// A point `(u, v, P)` of the homogeneous phase space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatePoint<T> {
    pub u: T,
    pub v: T,
    pub p: T,
}

impl<T: Scalar> StatePoint<T> {
    pub fn new(u: T, v: T, p: T) -> Self {
        Self { u, v, p }
    }

    /// Checks `u >= 0`, `v >= 0`, `0 <= P <= 1`.
    pub fn validate(&self) -> Result<()> {
        if self.u.is_nan() || self.v.is_nan() || self.p.is_nan() {
            return Err(Error::InvalidState("NaN component".into()));
        }
        if self.u < T::zero() || self.v < T::zero() || self.p < T::zero() || self.p > T::one() {
            return Err(Error::InvalidState(format!(
                "({}, {}, {}) outside u>=0, v>=0, 0<=P<=1",
                self.u, self.v, self.p
            )));
        }
        Ok(())
    }

    fn check_domain(&self) -> Result<()> {
        if self.u.is_nan() || self.v.is_nan() || self.p.is_nan() {
            return Err(Error::Domain("NaN component".into()));
        }
        if self.u < -T::one() {
            return Err(Error::Domain(format!("u = {} < -1", self.u)));
        }
        if self.p < -T::one() {
            return Err(Error::Domain(format!("P = {} < -1", self.p)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SteadyKind {
    Trivial,
    Nontrivial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stability {
    /// Every eigenvalue has negative real part.
    Stable,
    /// No eigenvalue with positive real part, at least one on the imaginary axis.
    Marginal,
    /// Some eigenvalue has positive real part.
    Unstable,
}

impl Stability {
    pub fn classify<T: Scalar>(eigenvalues: &[Complex<T>]) -> Self {
        let tol = T::lit(1e-12).max(T::epsilon() * T::lit(16.0));
        if eigenvalues.iter().any(|z| z.re > tol) {
            Stability::Unstable
        } else if eigenvalues.iter().any(|z| z.re.abs() <= tol) {
            Stability::Marginal
        } else {
            Stability::Stable
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyState<T> {
    pub point: StatePoint<T>,
    pub kind: SteadyKind,
    /// Trivial: `[0, λ2, λ3]`. Nontrivial: `[λ+, λ-, -u*]` of the (u,v) block
    /// and the police direction.
    pub eigenvalues: [Complex<T>; 3],
    pub stability: Stability,
}

/// `(f, g, s)` at `s`.
pub fn evaluate_kinetics<T: Scalar>(p: &ModelParams<T>, s: &StatePoint<T>) -> Result<(T, T, T)> {
    s.check_domain()?;
    Ok(p.rates(s.u, s.v, s.p))
}

/// Analytic Jacobian of `(f, g, s)` with respect to `(u, v, P)`.
pub fn jacobian<T: Scalar>(p: &ModelParams<T>, s: &StatePoint<T>) -> Result<[[T; 3]; 3]> {
    s.check_domain()?;
    Ok(jacobian_unchecked(p, s))
}

pub(crate) fn jacobian_unchecked<T: Scalar>(p: &ModelParams<T>, s: &StatePoint<T>) -> [[T; 3]; 3] {
    let one = T::one();
    let (u, v, pp) = (s.u, s.v, s.p);
    let police = one + pp;
    let h = police.powf(p.k1);
    let dh = p.k1 * police.powf(p.k1 - one);
    let r = p.switch(v);
    let dr = p.beta * r * (one - r);
    let g_act = p.gamma * u * (one - u);
    let dg_act = p.gamma * (one - T::lit(2.0) * u);
    let relax = p.theta * (one + u).powf(-p.k0);
    let drelax = -p.k0 * p.theta * (one + u).powf(-p.k0 - one);
    let t = police.powf(-p.k2);
    let dt = -p.k2 * police.powf(-p.k2 - one);
    [
        [h * r * dg_act - p.omega, h * dr * g_act, dh * r * g_act],
        [-drelax * t * v, -relax * t, -relax * dt * v],
        [one - pp, T::zero(), -u],
    ]
}

/// The trivial steady state on the hyperplane `u = 0` at police level `police`.
pub fn trivial_steady_state<T: Scalar>(p: &ModelParams<T>, police: T) -> Result<SteadyState<T>> {
    p.validate()?;
    if !(police >= T::zero() && police <= T::one()) {
        return Err(Error::InvalidState(format!("police level {police} outside [0,1]")));
    }
    let v = p.trivial_tension(police);
    let one = T::one();
    let lambda2 = (one + police).powf(p.k1) * p.gamma * p.switch(v) - p.omega;
    let lambda3 = -p.theta * (one + police).powf(-p.k2);
    let eigenvalues = [Complex::new(T::zero(), T::zero()), Complex::new(lambda2, T::zero()), Complex::new(lambda3, T::zero())];
    Ok(SteadyState {
        point: StatePoint::new(T::zero(), v, police),
        kind: SteadyKind::Trivial,
        stability: Stability::classify(&eigenvalues),
        eigenvalues,
    })
}

/// Roots of [`ModelParams::reduced_activity_rate`] in (0, 1), ascending.
/// No tangency check.
pub fn nontrivial_roots<T: Scalar>(p: &ModelParams<T>, step: T) -> Vec<T> {
    let phi = |u: T| p.reduced_activity_rate(u);
    roots::sign_change_brackets(phi, T::zero(), T::one(), step)
        .into_iter()
        .map(|(lo, hi)| roots::bisect(phi, lo, hi))
        .filter(|&u| u > T::zero() && u < T::one())
        .collect()
}

/// All nontrivial steady states, ordered by ascending `u*`.
pub fn nontrivial_steady_states<T: Scalar>(p: &ModelParams<T>) -> Result<Vec<SteadyState<T>>> {
    p.validate()?;
    let us = nontrivial_roots(p, T::lit(ROOT_SCAN_STEP));
    for w in us.windows(2) {
        if (w[1] - w[0]).abs() < T::lit(TANGENCY_TOL) {
            return Err(Error::Degenerate(w[0].as_f64(), w[1].as_f64()));
        }
    }
    Ok(us.into_iter().map(|u| nontrivial_state_at(p, u)).collect())
}

/// Builds the nontrivial state with activity `u` (assumed to be a root).
pub fn nontrivial_state_at<T: Scalar>(p: &ModelParams<T>, u: T) -> SteadyState<T> {
    let point = StatePoint::new(u, p.nullcline_tension(u), T::one());
    let j = jacobian_unchecked(p, &point);
    let (fu, fv, gu, gv) = (j[0][0], j[0][1], j[1][0], j[1][1]);
    let two = T::lit(2.0);
    let tr = fu + gv;
    let disc = tr * tr + T::lit(4.0) * fv * gu - T::lit(4.0) * fu * gv;
    // P = 1 makes the police row [0, 0, -u], so the (u,v) block decouples.
    let (l1, l2) = if disc >= T::zero() {
        let sq = disc.sqrt();
        (Complex::new((tr + sq) / two, T::zero()), Complex::new((tr - sq) / two, T::zero()))
    } else {
        let sq = (-disc).sqrt();
        (Complex::new(tr / two, sq / two), Complex::new(tr / two, -sq / two))
    };
    let eigenvalues = [l1, l2, Complex::new(-u, T::zero())];
    SteadyState { point, kind: SteadyKind::Nontrivial, stability: Stability::classify(&eigenvalues), eigenvalues }
}

/// Eigenvalues of the Jacobian at `s` from a general dense eigensolver.
pub fn dense_eigenvalues<T: Scalar>(p: &ModelParams<T>, s: &StatePoint<T>) -> Result<[Complex<f64>; 3]> {
    let j = jacobian(p, s)?;
    let m = j.map(|row| row.map(|x| x.as_f64()));
    Ok(linalg::eigenvalues3(&m))
}

/// Negativity of both (u,v)-block eigenvalues at a nontrivial state: the
/// determinant inequality in closed form together with a negative trace.
/// Returns `false` for a trivial state.
pub fn check_negativity_condition<T: Scalar>(p: &ModelParams<T>, ss: &SteadyState<T>) -> bool {
    if ss.kind != SteadyKind::Nontrivial {
        return false;
    }
    let StatePoint { u, v, .. } = ss.point;
    let one = T::one();
    let lhs = p.omega * p.beta * p.k0 * (-p.beta * (v - p.alpha)).exp() * v / (one + u);
    let rhs = T::lit(2.0).powf(p.k1) * p.gamma;
    let j = jacobian_unchecked(p, &ss.point);
    lhs < rhs && j[0][0] + j[1][1] < T::zero()
}

/// Sufficient condition for a monotone (cooperative) system on `0 <= u, P <= 1`.
pub fn is_monotone<T: Scalar>(p: &ModelParams<T>) -> bool {
    let z = T::zero();
    p.k0 >= z && p.k1 >= z && p.k2 >= z && p.beta >= z && p.gamma >= z
}
