//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so simulations can be shared between criteria; pass criterion
//! names (`AC-4`, ...) as arguments to run a subset.

use std::collections::HashMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use protestwave::asymptotics::{decay_check, minimal_speed, trivial_rates, upper_state, DecayCheckSpec, TailCheck};
use protestwave::kinetics::{nontrivial_steady_states, ModelParams};
use protestwave::pde::{refine_check, simulate, GridSpec, InitialCondition};
use protestwave::regions::{count_boundaries, lambda2_boundary};
use protestwave::sweep::{resolve_long_dt, stable_grid, Range, SweepSpec};
use protestwave::wave_metrics::{wave_speed, LongMetrics, ShortMetrics, TensionClass};

type Key = (i32, i32, i32);

fn key(k0: f64, k1: f64, k2: f64) -> Key {
    ((k0 * 100.0).round() as i32, (k1 * 100.0).round() as i32, (k2 * 100.0).round() as i32)
}

fn exps(k: Key) -> (f64, f64, f64) {
    (k.0 as f64 / 100.0, k.1 as f64 / 100.0, k.2 as f64 / 100.0)
}

fn lattice(k0s: &[f64], k1s: &[f64], k2s: &[f64]) -> Vec<Key> {
    let mut out = Vec::new();
    for &a in k0s {
        for &b in k1s {
            for &c in k2s {
                out.push(key(a, b, c));
            }
        }
    }
    out
}

#[derive(Clone, Copy)]
struct LongRun {
    metrics: LongMetrics,
    v0_at_95: f64,
}

/// Short and long runs shared between criteria.
struct Runs {
    spec: SweepSpec,
    long_dt: Option<f64>,
    short: HashMap<Key, Result<ShortMetrics, String>>,
    long: HashMap<Key, Result<LongRun, String>>,
}

impl Runs {
    fn new() -> Self {
        let mut spec = SweepSpec::new(vec![-1.0], "-3:3:2".parse().unwrap(), "-3:3:2".parse().unwrap());
        spec.long_grid = spec.long_grid.with_snapshots(vec![95.0]);
        Self { spec, long_dt: None, short: HashMap::new(), long: HashMap::new() }
    }

    fn long_dt(&mut self) -> f64 {
        if self.long_dt.is_none() {
            let (dt, gate) = resolve_long_dt(&self.spec).expect("dt gate runs");
            if let Some(g) = gate {
                println!("  dt gate at {:?}: max diff {:.2e}, passed = {}", g.sentinel, g.max_diff, g.passed);
            }
            self.long_dt = Some(dt);
        }
        self.long_dt.unwrap()
    }

    fn ensure_short(&mut self, keys: &[Key]) {
        let todo: Vec<Key> = keys.iter().copied().filter(|k| !self.short.contains_key(k)).collect();
        let spec = &self.spec;
        let done: Vec<_> = todo
            .par_iter()
            .map(|&k| {
                let (k0, k1, k2) = exps(k);
                let p = spec.base.with_k(k0, k1, k2);
                let r = stable_grid(&p, spec.short_run_grid())
                    .and_then(|g| simulate(&p, &g, &InitialCondition::PaperDefault))
                    .and_then(|t| ShortMetrics::from_run(&t, &spec.metrics))
                    .map_err(|e| e.to_string());
                (k, r)
            })
            .collect();
        self.short.extend(done);
    }

    fn ensure_long(&mut self, keys: &[Key]) {
        let dt = self.long_dt();
        let todo: Vec<Key> = keys.iter().copied().filter(|k| !self.long.contains_key(k)).collect();
        let spec = &self.spec;
        let done: Vec<_> = todo
            .par_iter()
            .map(|&k| {
                let (k0, k1, k2) = exps(k);
                let p = spec.base.with_k(k0, k1, k2);
                let r = stable_grid(&p, spec.long_grid.clone().with_dt(dt))
                    .and_then(|g| simulate(&p, &g, &InitialCondition::PaperDefault))
                    .map(|t| LongRun {
                        metrics: LongMetrics::from_run(&t, &spec.metrics),
                        v0_at_95: t.snapshot_at(95.0).v[0],
                    })
                    .map_err(|e| e.to_string());
                (k, r)
            })
            .collect();
        self.long.extend(done);
    }

    fn shorts(&mut self, keys: &[Key]) -> Result<Vec<(Key, ShortMetrics)>, String> {
        self.ensure_short(keys);
        keys.iter().map(|k| self.short[k].clone().map(|m| (*k, m)).map_err(|e| format!("{k:?}: {e}"))).collect()
    }

    fn longs(&mut self, keys: &[Key]) -> Result<Vec<(Key, LongRun)>, String> {
        self.ensure_long(keys);
        keys.iter().map(|k| self.long[k].clone().map(|m| (*k, m)).map_err(|e| format!("{k:?}: {e}"))).collect()
    }
}

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn analysis() -> ModelParams<f64> {
    ModelParams::analysis_base()
}

/// `f(u)/u` on `P = 1` along the tension nullcline, from the model equations.
fn reduced(p: &ModelParams<f64>, u: f64) -> f64 {
    let v = 2f64.powf(p.k2) * (1.0 + u).powf(p.k0) / p.theta;
    let r = 1.0 / (1.0 + (-p.beta * (v - p.alpha)).exp());
    2f64.powf(p.k1) * r * p.gamma * (1.0 - u) - p.omega
}

fn brute_count(p: &ModelParams<f64>) -> usize {
    let n = 100_000;
    let vals: Vec<f64> = (1..n).map(|i| reduced(p, i as f64 / n as f64)).collect();
    vals.windows(2).filter(|w| (w[0] < 0.0) != (w[1] < 0.0)).count()
}

fn ac1(_: &mut Runs) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut agree, mut excluded, mut draws) = (0, 0, 0);
    let mut mismatches = Vec::new();
    while draws < 200 {
        draws += 1;
        let p = analysis().with_k(rng.gen_range(0.0..=5.0), rng.gen_range(-2.0..=2.0), rng.gen_range(-2.0..=2.0));
        let n = brute_count(&p);
        if [-1e-3, 1e-3].iter().any(|d| brute_count(&p.with_k(p.k0, p.k1, p.k2 + d)) != n) {
            excluded += 1;
            continue;
        }
        match nontrivial_steady_states(&p) {
            Ok(s) if s.len() == n => agree += 1,
            other => mismatches.push(format!("k=({:.3},{:.3},{:.3}) lib {:?} brute {n}", p.k0, p.k1, p.k2, other.map(|s| s.len()))),
        }
    }
    check(
        mismatches.is_empty(),
        format!("{agree}/{} draws agree, {excluded} near a count boundary excluded {}", draws - excluded, mismatches.join("; ")),
    )
}

fn ac2(_: &mut Runs) -> Outcome {
    let k1s: Vec<f64> = Range { min: -1.0, max: 1.0, step: 0.1 }.values();
    let mut worst = 0.0f64;
    let mut compared = 0;
    let mut missing = Vec::new();
    for k0 in [1.0, 2.5, 4.5] {
        let p = analysis().with_k(k0, 0.0, 0.0);
        let rows: Vec<_> = k1s.par_iter().map(|&k1| (k1, lambda2_boundary(&p, k1, 1.0).ok(), count_boundaries(&p, k1).1)).collect();
        for (k1, a, c) in rows {
            match (a, c) {
                (Some(a), Some(c)) => {
                    worst = worst.max((a - c).abs());
                    compared += 1;
                }
                (None, None) => {}
                _ => missing.push(format!("k0={k0} k1={k1}")),
            }
        }
    }
    check(
        worst < 2e-3 && missing.is_empty() && compared > 0,
        format!("max |k2_lambda2 - k2_count| = {worst:.2e} over {compared} samples; one-sided curves: {missing:?}"),
    )
}

fn ode_rhs(p: &ModelParams<f64>, y: [f64; 3]) -> [f64; 3] {
    let [u, v, q] = y;
    let r = 1.0 / (1.0 + (-p.beta * (v - p.alpha)).exp());
    let f = (1.0 + q).powf(p.k1) * r * p.gamma * u * (1.0 - u) - p.omega * u;
    let g = 1.0 - (1.0 + q).powf(-p.k2) * p.theta * (1.0 + u).powf(-p.k0) * v;
    [f, g, u * (1.0 - q)]
}

fn rk4(p: &ModelParams<f64>, mut y: [f64; 3], t: f64, h: f64) -> [f64; 3] {
    let add = |a: [f64; 3], b: [f64; 3], s: f64| [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]];
    for _ in 0..(t / h).round() as usize {
        let k1 = ode_rhs(p, y);
        let k2 = ode_rhs(p, add(y, k1, h / 2.0));
        let k3 = ode_rhs(p, add(y, k2, h / 2.0));
        let k4 = ode_rhs(p, add(y, k3, h));
        for i in 0..3 {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    y
}

fn ac3(_: &mut Runs) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let draws: Vec<_> = (0..20)
        .map(|_| {
            let k = (rng.gen_range(-5.0..=5.0), rng.gen_range(-2.0..=2.0), rng.gen_range(-2.0..=2.0));
            let y0 = [rng.gen_range(0.0..=1.0), rng.gen_range(0.0..=3.0), rng.gen_range(0.0..=1.0)];
            (k, y0)
        })
        .collect();
    let errs: Vec<f64> = draws
        .par_iter()
        .map(|&(k, y0)| {
            let p = analysis().with_k(k.0, k.1, k.2);
            let g = GridSpec::new(0.0, 2.0, 0.5, 1e-6, 1.0, vec![]).unwrap();
            let s = simulate(&p, &g, &InitialCondition::uniform(y0[0], y0[1], y0[2])).unwrap();
            let s = s.final_snapshot();
            let exact = rk4(&p, y0, 1.0, 1e-4);
            (0..s.len())
                .map(|i| (s.u[i] - exact[0]).abs().max((s.v[i] - exact[1]).abs()).max((s.p[i] - exact[2]).abs()))
                .fold(0.0, f64::max)
        })
        .collect();
    let worst = errs.iter().copied().fold(0.0, f64::max);
    check(worst < 1e-5, format!("max sup-error {worst:.2e} over 20 draws"))
}

fn ac4_keys() -> Vec<Key> {
    lattice(&[-1.0], &[-3.0, -1.0, 1.0, 3.0], &[-3.0, -1.0, 1.0, 3.0])
}

fn ac4(runs: &mut Runs) -> Outcome {
    let rows = runs.longs(&ac4_keys())?;
    let bad: Vec<_> = rows
        .iter()
        .filter(|(_, r)| !(r.metrics.residual_u < 1e-3 || r.metrics.residual_p > 1.0 - 1e-3))
        .map(|(k, r)| format!("{:?} u={:.3e} P={:.6}", exps(*k), r.metrics.residual_u, r.metrics.residual_p))
        .collect();
    check(bad.is_empty(), format!("{} runs at t=100, long dt = {}; violations: {bad:?}", rows.len(), runs.long_dt()))
}

fn ac5(runs: &mut Runs) -> Outcome {
    let rows = runs.shorts(&ac4_keys())?;
    let speeds: Vec<f64> = rows.iter().map(|(_, m)| m.speed).collect();
    let n = speeds.len() as f64;
    let mean = speeds.iter().sum::<f64>() / n;
    let sd = (speeds.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let cv = sd / mean;
    let (lo, hi) = speeds.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &s| (a.min(s), b.max(s)));
    check(cv < 0.05, format!("mean speed {mean:.4}, range [{lo:.4}, {hi:.4}], CV {:.3}%", 100.0 * cv))
}

fn ac6(runs: &mut Runs) -> Outcome {
    let vals = [-3.0, -1.0, 1.0, 3.0];
    let k0s = [-1.0, 0.0, 1.0];
    let rows = runs.shorts(&lattice(&k0s, &vals, &vals))?;
    let level: HashMap<Key, f64> = rows.into_iter().map(|(k, m)| (k, m.invading_level)).collect();
    let mut lines: Vec<Vec<Key>> = Vec::new();
    for &a in &k0s {
        for &b in &vals {
            lines.push(vals.iter().map(|&c| key(a, b, c)).collect());
            lines.push(vals.iter().map(|&c| key(a, c, b)).collect());
        }
    }
    for &b in &vals {
        for &c in &vals {
            lines.push(k0s.iter().map(|&a| key(a, b, c)).collect());
        }
    }
    let mut bad = Vec::new();
    for line in &lines {
        let ys: Vec<f64> = line.iter().map(|k| level[k]).collect();
        let monotone = ys.windows(2).all(|w| w[1] >= w[0]);
        let strict = ys.windows(2).any(|w| w[1] > w[0]);
        if !(monotone && strict) {
            bad.push(format!("{:?}..{:?}: {ys:.5?}", exps(line[0]), exps(*line.last().unwrap())));
        }
    }
    check(bad.is_empty(), format!("{} lines over 48 runs; failing lines: {bad:?}", lines.len()))
}

fn ac7(runs: &mut Runs) -> Outcome {
    let vals = [-5.0, -1.0, 1.0, 5.0];
    let plus = runs.longs(&lattice(&[1.0], &vals, &vals))?;
    let minus = runs.longs(&lattice(&[-1.0], &vals, &vals))?;
    let count = |rows: &[(Key, LongRun)], c: TensionClass| rows.iter().filter(|(_, r)| r.metrics.tension_class == c).count();
    let relieved = count(&plus, TensionClass::Relieved);
    let transient = count(&minus, TensionClass::TransientRiseThenRelief);
    let tally = |rows: &[(Key, LongRun)]| {
        [TensionClass::Relieved, TensionClass::Exacerbated, TensionClass::TransientRiseThenRelief].map(|c| count(rows, c))
    };
    check(
        relieved == 0 && transient == 0,
        format!(
            "k0=1: {relieved} relieved (relieved/exacerbated/transient {:?}); k0=-1: {transient} transient ({:?})",
            tally(&plus),
            tally(&minus)
        ),
    )
}

fn ac8(runs: &mut Runs) -> Outcome {
    let keys: Vec<Key> = (-4..=1).map(|k1| key(-1.0, k1 as f64, 5.0)).collect();
    let rows = runs.longs(&keys)?;
    let v: Vec<f64> = rows.iter().map(|(_, r)| r.v0_at_95).collect();
    let lt = |a: f64, b: f64| a < b - 1e-6;
    let ok = lt(v[0], v[1]) && lt(v[1], v[2]) && lt(v[3], v[2]) && lt(v[4], v[3]) && lt(v[5], v[4]);
    check(ok, format!("v(0,95) for k1=-4..1: {v:.5?}"))
}

fn ac9(_: &mut Runs) -> Outcome {
    let p = ModelParams::simulation_base().with_k(-1.0, 1.0, 1.0);
    let g = GridSpec::short_run().with_t_end(15.0).with_snapshots(vec![]);
    let r = refine_check(&p, &g, &InitialCondition::PaperDefault).map_err(|e| e.to_string())?;
    check(
        r.sup_diff < 1e-3,
        format!("sup |u(dx=0.1,dt=1e-4) - u(dx=0.05,dt=2.5e-5)| at t=15 = {:.3e} (k=(-1,1,1))", r.sup_diff),
    )
}

fn describe(t: &TailCheck) -> String {
    match (&t.prediction, t.fitted_rate, t.relative_error) {
        (Some(p), Some(f), Some(e)) => format!("{} {}: predicted {:.5}, fitted {:.5}, error {:.2}%", t.tail, p.case_label, p.rate, f, 100.0 * e),
        _ => format!("{}: {}", t.tail, t.error.clone().unwrap_or_default()),
    }
}

fn ac10(_: &mut Runs) -> Outcome {
    let mono = analysis().with_k(4.5, 0.5, 0.5);
    let bi = ModelParams { gamma: 0.5, ..analysis() }.with_k(4.5, 0.5, 0.7);
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, p) in [("monostable", mono), ("bistable", bi)] {
        let r = decay_check(&p, &DecayCheckSpec::default()).map_err(|e| format!("{name}: {e}"))?;
        for t in [&r.plus, &r.minus] {
            ok &= t.relative_error.is_some_and(|e| e < 0.1);
        }
        parts.push(format!("{name} c={:.4}: {}; {}", r.speed, describe(&r.plus), describe(&r.minus)));
    }
    check(ok, parts.join(" | "))
}

/// Speed of a wave invading the trivial state at `P = 1` from `exp(-5x)`.
fn invasion_speed(p: &ModelParams<f64>, threshold: f64) -> Result<f64, String> {
    let t_end = 300.0;
    let times: Vec<f64> = (0..=30).map(|i| 0.75 * t_end + 0.25 * t_end * i as f64 / 30.0).collect();
    let mut g = GridSpec::new(0.0, 600.0, 0.25, 1.0, t_end, times).map_err(|e| e.to_string())?;
    g.dt = 0.5 * g.max_stable_dt(p);
    let traj = simulate(p, &g, &InitialCondition::invading(p, 1.0)).map_err(|e| e.to_string())?;
    wave_speed(&traj, threshold, (0.75 * t_end, t_end)).map_err(|e| e.to_string())
}

fn ac11(_: &mut Runs) -> Outcome {
    let mono = analysis().with_k(4.5, 0.5, 0.5);
    let c_star = minimal_speed(&mono, 1.0).map_err(|e| e.to_string())?;
    let up = upper_state(&mono).map_err(|e| e.to_string())?;
    let c = invasion_speed(&mono, 0.5 * up.point.u)?;
    // Pinned tension: tiny θ puts the trivial tension far up the switch, r ≈ 1.
    let kpp = ModelParams { theta: 1e-3, ..analysis() };
    let (fu, _) = trivial_rates(&kpp, 1.0).map_err(|e| e.to_string())?;
    let kpp_up = upper_state(&kpp).map_err(|e| e.to_string())?;
    let c_kpp = invasion_speed(&kpp, 0.5 * kpp_up.point.u)?;
    let target = 2.0 * fu.sqrt();
    let rel = (c_kpp - target).abs() / target;
    check(
        c >= 0.9 * c_star && rel < 0.1,
        format!("monostable c={c:.4} vs 0.9 c*={:.4}; KPP c={c_kpp:.4} vs 2 sqrt(f_u)={target:.4} ({:.2}%)", 0.9 * c_star, 100.0 * rel),
    )
}

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| a.starts_with("AC-")).collect();
    let criteria: [(&str, fn(&mut Runs) -> Outcome); 11] = [
        ("AC-1", ac1),
        ("AC-2", ac2),
        ("AC-3", ac3),
        ("AC-4", ac4),
        ("AC-5", ac5),
        ("AC-6", ac6),
        ("AC-7", ac7),
        ("AC-8", ac8),
        ("AC-9", ac9),
        ("AC-10", ac10),
        ("AC-11", ac11),
    ];
    let mut runs = Runs::new();
    let mut failed = Vec::new();
    for (name, f) in criteria {
        if !filters.is_empty() && !filters.iter().any(|x| x == name) {
            continue;
        }
        let start = Instant::now();
        let outcome = f(&mut runs);
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("{name} PASS ({secs:.1}s): {d}"),
            Err(d) => {
                println!("{name} FAIL ({secs:.1}s): {d}");
                failed.push(name);
            }
        }
    }
    if !failed.is_empty() {
        println!("failed: {}", failed.join(", "));
        std::process::exit(1);
    }
}
