//! Region labels in the `k1`-`k2` plane and the three boundary curves that
//! separate them.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::minimal_speed;
use crate::error::{Error, Result};
use crate::kinetics::{
    is_monotone, jacobian, nontrivial_roots, nontrivial_steady_states, trivial_steady_state, ModelParams, Stability,
    SteadyState, ROOT_SCAN_STEP,
};
use crate::roots;

/// `|λ2|` below this puts a point on the `λ2 = 0` curve.
pub const LAMBDA2_BOUNDARY_TOL: f64 = 1e-10;
/// Search window for every boundary curve.
pub const K2_WINDOW: (f64, f64) = (-10.0, 10.0);
/// Coarse sampling step in `k2` before bisection.
pub const K2_SCAN_STEP: f64 = 0.05;
/// Bracket width at which count boundaries stop bisecting.
pub const K2_COUNT_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SourceType {
    NearPulse,
    Bistable,
    Monostable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RegionLabel {
    pub region_id: u8,
    /// Total count, the trivial state included.
    pub steady_state_count: usize,
    pub source_type: SourceType,
}

/// The six rows: `(region, total count, λ2 > 0, source type)`.
pub const REGION_TABLE: [(u8, usize, bool, SourceType); 6] = [
    (1, 1, false, SourceType::NearPulse),
    (2, 3, false, SourceType::Bistable),
    (3, 2, true, SourceType::Monostable),
    (4, 2, false, SourceType::Bistable),
    (5, 1, true, SourceType::NearPulse),
    (6, 3, true, SourceType::Monostable),
];

impl std::fmt::Display for SourceType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SourceType::NearPulse => "near_pulse",
            SourceType::Bistable => "bistable",
            SourceType::Monostable => "monostable",
        })
    }
}

impl RegionLabel {
    /// Looks up the table row for a total count and the sign of `λ2`.
    pub fn from_count(count: usize, lambda2_positive: bool) -> Option<Self> {
        REGION_TABLE
            .iter()
            .find(|r| r.1 == count && r.2 == lambda2_positive)
            .map(|&(region_id, steady_state_count, _, source_type)| Self { region_id, steady_state_count, source_type })
    }
}

/// `λ2` of the trivial state at police level `p_ambient`.
pub fn trivial_lambda2(p: &ModelParams<f64>, p_ambient: f64) -> Result<f64> {
    Ok(trivial_steady_state(p, p_ambient)?.eigenvalues[1].re)
}

/// Region of `p` given the police level of the trivial state.
pub fn classify_region(p: &ModelParams<f64>, p_ambient: f64) -> Result<RegionLabel> {
    let lambda2 = trivial_lambda2(p, p_ambient)?;
    if lambda2.abs() < LAMBDA2_BOUNDARY_TOL {
        return Err(Error::Boundary(format!("lambda2 = {lambda2:e} at the trivial state")));
    }
    let states = match nontrivial_steady_states(p) {
        Err(Error::Degenerate(a, b)) => {
            return Err(Error::Boundary(format!("nullcline tangency near u = {a}, {b}")));
        }
        other => other?,
    };
    let count = 1 + states.len();
    RegionLabel::from_count(count, lambda2 > 0.0)
        .ok_or_else(|| Error::NotApplicable(format!("{count} steady states is not one of the six regions")))
}

/// Total steady-state count without the tangency check, for curve tracing.
pub fn total_count(p: &ModelParams<f64>) -> usize {
    1 + nontrivial_roots(p, ROOT_SCAN_STEP).len()
}

/// Boundary `k2` values at one `k1`; `None` where the curve does not cross
/// the search window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub k1: f64,
    /// `λ2(trivial; P) = 0`.
    pub k2_lambda2: Option<f64>,
    /// Count leaves 1 as `k2` increases.
    pub k2_count12: Option<f64>,
    /// Count turns from odd to even as `k2` increases, so a branch has
    /// passed through the trivial state. Usually 3 to 2; near the cusp a thin
    /// 4-state sliver sits between this and the fold into 2.
    pub k2_count23: Option<f64>,
}

/// `k2` where `λ2` of the trivial state at police level `p_ambient` vanishes.
pub fn lambda2_boundary(p_base: &ModelParams<f64>, k1: f64, p_ambient: f64) -> Result<f64> {
    let lam = |k2: f64| {
        let p = p_base.with_k(p_base.k0, k1, k2);
        trivial_lambda2(&p, p_ambient).unwrap_or(f64::NAN)
    };
    // A sample that rounds to exactly zero is only a crossing when its
    // neighbours differ in sign; `r(v)` saturating at 1 can zero `λ2` without one.
    let crosses = |&&(lo, hi): &&(f64, f64)| lo != hi || lam(lo - K2_SCAN_STEP) * lam(hi + K2_SCAN_STEP) < 0.0;
    let br = roots::sign_change_brackets(lam, K2_WINDOW.0, K2_WINDOW.1, K2_SCAN_STEP);
    let &(lo, hi) = br.iter().find(crosses).ok_or(Error::MissingBoundary { k1 })?;
    Ok(roots::bisect(lam, lo, hi))
}

/// Count boundaries `(count12, count23)` at `k1`, as defined on
/// [`BoundaryPoint`].
pub fn count_boundaries(p_base: &ModelParams<f64>, k1: f64) -> (Option<f64>, Option<f64>) {
    let count = |k2: f64| total_count(&p_base.with_k(p_base.k0, k1, k2));
    let n = ((K2_WINDOW.1 - K2_WINDOW.0) / K2_SCAN_STEP).round() as usize;
    let ks: Vec<f64> = (0..=n).map(|i| K2_WINDOW.0 + K2_SCAN_STEP * i as f64).collect();
    let cs: Vec<usize> = ks.iter().map(|&k| count(k)).collect();
    let locate = |pred: &dyn Fn(usize) -> bool| -> Option<f64> {
        let i = (1..cs.len()).find(|&i| !pred(cs[i - 1]) && pred(cs[i]))?;
        let side = |k2: f64| if pred(count(k2)) { 1.0 } else { -1.0 };
        Some(roots::bisect_to(side, ks[i - 1], ks[i], K2_COUNT_TOL))
    };
    (locate(&|c| c > 1), locate(&|c| c % 2 == 0))
}

/// Traces all three curves for each `k1`, in parallel over `k1`.
pub fn trace_boundaries(p_base: &ModelParams<f64>, k1_values: &[f64], p_ambient: f64) -> Result<Vec<BoundaryPoint>> {
    p_base.validate()?;
    if !(0.0..=1.0).contains(&p_ambient) {
        return Err(Error::InvalidState(format!("police level {p_ambient} outside [0,1]")));
    }
    Ok(k1_values
        .par_iter()
        .map(|&k1| {
            let (k2_count12, k2_count23) = count_boundaries(p_base, k1);
            BoundaryPoint { k1, k2_lambda2: lambda2_boundary(p_base, k1, p_ambient).ok(), k2_count12, k2_count23 }
        })
        .collect())
}

/// `n` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// CSV with columns `k1,k2_lambda2,k2_count12,k2_count23`; missing curves
/// leave the cell empty.
pub fn write_boundary_csv<W: Write>(mut w: W, points: &[BoundaryPoint]) -> Result<()> {
    writeln!(w, "k1,k2_lambda2,k2_count12,k2_count23")?;
    let cell = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for b in points {
        writeln!(w, "{},{},{},{}", b.k1, cell(b.k2_lambda2), cell(b.k2_count12), cell(b.k2_count23))?;
    }
    Ok(())
}

/// One `(k1, k2)` lattice cell of a region map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionCell {
    pub k1: f64,
    pub k2: f64,
    pub lambda2: f64,
    /// `Err` text for boundary points and uncovered counts.
    pub label: std::result::Result<RegionLabel, String>,
}

/// Classifies every `(k1, k2)` pair, `k2` varying fastest.
pub fn region_lattice(p_base: &ModelParams<f64>, k1_values: &[f64], k2_values: &[f64], p_ambient: f64) -> Result<Vec<RegionCell>> {
    p_base.validate()?;
    let pairs: Vec<(f64, f64)> = k1_values.iter().flat_map(|&a| k2_values.iter().map(move |&b| (a, b))).collect();
    pairs
        .par_iter()
        .map(|&(k1, k2)| {
            let p = p_base.with_k(p_base.k0, k1, k2);
            let lambda2 = trivial_lambda2(&p, p_ambient)?;
            let label = match classify_region(&p, p_ambient) {
                Ok(l) => Ok(l),
                Err(e @ (Error::Boundary(_) | Error::NotApplicable(_))) => Err(e.to_string()),
                Err(e) => return Err(e),
            };
            Ok(RegionCell { k1, k2, lambda2, label })
        })
        .collect()
}

/// CSV with columns `k1,k2,lambda2,region_id,steady_state_count,source_type,status`.
pub fn write_region_csv<W: Write>(mut w: W, cells: &[RegionCell]) -> Result<()> {
    writeln!(w, "k1,k2,lambda2,region_id,steady_state_count,source_type,status")?;
    for c in cells {
        match &c.label {
            Ok(l) => writeln!(w, "{},{},{},{},{},{},ok", c.k1, c.k2, c.lambda2, l.region_id, l.steady_state_count, l.source_type)?,
            Err(e) => writeln!(w, "{},{},{},,,,{}", c.k1, c.k2, c.lambda2, e.replace([',', '\n'], ";"))?,
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WaveRegime {
    /// Unstable trivial state invaded by the largest nontrivial state.
    Monostable,
    /// Both end states stable.
    Bistable,
    /// Neither existence theorem covers the point.
    Uncovered,
}

/// Which existence result covers a monotone parameter point, with the
/// numerical side checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub regime: WaveRegime,
    pub region: Option<RegionLabel>,
    pub trivial_lambda2: f64,
    pub nontrivial_count: usize,
    /// All eigenvalues of the largest nontrivial state real and negative.
    pub upper_state_stable: bool,
    /// Middle state has an eigenvalue in the right half plane (three states only).
    pub middle_state_unstable: Option<bool>,
    /// `k2 != 0, u1 != 1` or `k2 = 0, k1 != 0, u1 != 1` (three states only).
    pub side_conditions: Option<bool>,
    /// `f_v g_u - f_u g_v > 0` at the middle state (three states only).
    pub middle_feasible: Option<bool>,
    /// Linear spreading speed of the trivial state.
    pub c_star: f64,
}

impl TheoremReport {
    pub fn applies(&self) -> bool {
        match self.regime {
            WaveRegime::Monostable => self.upper_state_stable && self.middle_state_unstable.unwrap_or(true),
            WaveRegime::Bistable => {
                self.upper_state_stable && self.side_conditions.unwrap_or(true) && self.middle_feasible.unwrap_or(true)
            }
            WaveRegime::Uncovered => false,
        }
    }
}

fn real_negative(ss: &SteadyState<f64>) -> bool {
    ss.eigenvalues.iter().all(|z| z.im == 0.0 && z.re < 0.0)
}

/// Side conditions and the `q`-vector feasibility for a three-state point.
/// Rejects `k0 = 0`, which never has three steady states.
pub fn three_state_conditions(p: &ModelParams<f64>, middle: &SteadyState<f64>) -> Result<(bool, bool)> {
    if p.k0 == 0.0 {
        return Err(Error::NotApplicable("k0 = 0 admits at most two steady states".into()));
    }
    let u1 = middle.point.u;
    let side = if p.k2 != 0.0 { u1 != 1.0 } else { p.k1 != 0.0 && u1 != 1.0 };
    let j = jacobian(p, &middle.point)?;
    let (fu, fv, gu, gv) = (j[0][0], j[0][1], j[1][0], j[1][1]);
    Ok((side, fv * gu - fu * gv > 0.0))
}

/// Checks the existence-theorem hypotheses at `p` for waves invading the
/// trivial state at police level `p_ambient`.
pub fn theorem_preconditions(p: &ModelParams<f64>, p_ambient: f64) -> Result<TheoremReport> {
    if !is_monotone(p) {
        return Err(Error::NotApplicable(format!(
            "k0 = {}, k1 = {}, k2 = {} is outside the monotone cone",
            p.k0, p.k1, p.k2
        )));
    }
    let lambda2 = trivial_lambda2(p, p_ambient)?;
    let states = nontrivial_steady_states(p)?;
    let region = RegionLabel::from_count(1 + states.len(), lambda2 > 0.0);
    let upper_state_stable = states.last().map(real_negative).unwrap_or(false);
    let middle = (states.len() == 2).then(|| states[0]);
    let regime = if states.is_empty() || lambda2 == 0.0 {
        WaveRegime::Uncovered
    } else if lambda2 > 0.0 {
        WaveRegime::Monostable
    } else {
        WaveRegime::Bistable
    };
    let mut report = TheoremReport {
        regime,
        region,
        trivial_lambda2: lambda2,
        nontrivial_count: states.len(),
        upper_state_stable,
        middle_state_unstable: middle.map(|m| m.stability == Stability::Unstable),
        side_conditions: None,
        middle_feasible: None,
        c_star: minimal_speed(p, p_ambient)?,
    };
    if let (WaveRegime::Bistable, Some(m)) = (regime, middle) {
        let (side, feasible) = three_state_conditions(p, &m)?;
        report.side_conditions = Some(side);
        report.middle_feasible = Some(feasible);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ModelParams<f64> {
        ModelParams::analysis_base()
    }

    #[test]
    fn table_rows_are_unique() {
        for (i, a) in REGION_TABLE.iter().enumerate() {
            for b in &REGION_TABLE[i + 1..] {
                assert!(a.0 != b.0 && (a.1, a.2) != (b.1, b.2));
            }
        }
    }

    #[test]
    fn example_regions() {
        let r = classify_region(&base().with_k(4.5, 0.5, 1.0), 1.0).unwrap();
        assert_eq!((r.region_id, r.steady_state_count, r.source_type), (3, 2, SourceType::Monostable));
        let r = classify_region(&base().with_k(4.5, 0.0, -0.5), 1.0).unwrap();
        assert_eq!((r.region_id, r.steady_state_count, r.source_type), (2, 3, SourceType::Bistable));
        let r = classify_region(&base().with_k(1.0, -0.5, 0.5), 1.0).unwrap();
        assert_eq!(r.steady_state_count, 1);
        assert_eq!(r.source_type, SourceType::NearPulse);
    }

    #[test]
    fn zero_lambda2_is_a_boundary() {
        // k1 = k2 = 0 at P = 1 gives r(1) = 1/2 and lambda2 = 0.
        assert!(matches!(classify_region(&base().with_k(1.0, 0.0, 0.0), 1.0), Err(Error::Boundary(_))));
    }

    #[test]
    fn lambda2_curve_zeroes_lambda2() {
        let k2 = lambda2_boundary(&base().with_k(1.0, 0.0, 0.0), 0.3, 1.0).unwrap();
        let p = base().with_k(1.0, 0.3, k2);
        assert!(trivial_lambda2(&p, 1.0).unwrap().abs() < 1e-8);
        // Without police lambda2 does not depend on k2.
        let mut strong = base();
        strong.gamma = 2.0;
        assert!(matches!(lambda2_boundary(&strong, 0.3, 0.0), Err(Error::MissingBoundary { .. })));
    }

    #[test]
    fn small_k0_count_curves_coincide() {
        let (b, c) = count_boundaries(&base().with_k(1.0, 0.0, 0.0), 0.2);
        let (b, c) = (b.unwrap(), c.unwrap());
        assert!((b - c).abs() < 1e-3, "{b} {c}");
    }

    #[test]
    fn boundary_csv_leaves_missing_cells_empty() {
        let pts = [BoundaryPoint { k1: 0.5, k2_lambda2: None, k2_count12: Some(-1.0), k2_count23: Some(0.25) }];
        let mut buf = Vec::new();
        write_boundary_csv(&mut buf, &pts).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "k1,k2_lambda2,k2_count12,k2_count23\n0.5,,-1,0.25\n");
    }

    #[test]
    fn theorem_regimes_of_the_profile_examples() {
        let mono = base().with_k(4.5, 0.5, 0.5);
        let r = theorem_preconditions(&mono, 1.0).unwrap();
        assert_eq!(r.regime, WaveRegime::Monostable);
        assert!(r.applies() && r.c_star > 0.0);
        let mut bi = base().with_k(4.5, 0.5, 0.7);
        bi.gamma = 0.5;
        let r = theorem_preconditions(&bi, 1.0).unwrap();
        assert_eq!(r.regime, WaveRegime::Bistable);
        assert!(r.applies());
        assert_eq!(r.c_star, 0.0);
        assert!(matches!(theorem_preconditions(&base().with_k(1.0, -0.1, 1.0), 1.0), Err(Error::NotApplicable(_))));
    }

    #[test]
    fn three_state_claim_rejected_without_k0() {
        let p = base().with_k(0.0, 0.5, 0.5);
        let ss = crate::kinetics::nontrivial_state_at(&p, 0.5);
        assert!(matches!(three_state_conditions(&p, &ss), Err(Error::NotApplicable(_))));
    }
}
