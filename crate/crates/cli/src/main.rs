mod config;

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use protestwave::asymptotics::{decay_check, DecayCheckSpec, TailSeed, TailWindow};
use protestwave::kinetics::{nontrivial_steady_states, trivial_steady_state, ModelParams, SteadyState};
use protestwave::pde::{initial_condition, integrate, integrate_unchecked, write_profile_csv, GridSpec, InitialCondition, Profile};
use protestwave::regions::{classify_region, region_lattice, trace_boundaries, write_boundary_csv, write_region_csv};
use protestwave::sweep::{run_sweep, Range, SweepOutput, SweepSpec};
use protestwave::wave_metrics::{LongMetrics, MetricOptions};
use protestwave::{Error, ModelParams64};
use serde_json::json;

#[derive(Parser, Debug)]
#[command(name = "protestwave", version, about = "Protest/tension/police reaction-diffusion toolkit")]
struct Cli {
    /// Flat `key = value` file of flags for the subcommand; explicit flags win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Steady states, eigenvalues and region label.
    Steady(SteadyArgs),
    /// Region labels over a (k1, k2) lattice and the boundary curves.
    RegionMap(RegionMapArgs),
    /// One trajectory, written as profile CSVs.
    Simulate(SimulateArgs),
    /// WaveReport CSV over a (k0, k1, k2) lattice.
    Sweep(SweepArgs),
    /// Simulated tail slopes against the predicted decay rates, as JSON.
    DecayCheck(DecayArgs),
}

/// Overrides of the base constants.
#[derive(Args, Debug, Clone)]
struct ModelArgs {
    #[arg(long, allow_hyphen_values = true)]
    d1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    d2: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    omega: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<f64>,
}

impl ModelArgs {
    fn apply(&self, mut p: ModelParams64) -> ModelParams64 {
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut p.d1, self.d1);
        set(&mut p.d2, self.d2);
        set(&mut p.alpha, self.alpha);
        set(&mut p.beta, self.beta);
        set(&mut p.gamma, self.gamma);
        set(&mut p.omega, self.omega);
        set(&mut p.theta, self.theta);
        p
    }
}

#[derive(Args, Debug, Clone)]
struct Exponents {
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    k0: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    k1: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    k2: f64,
}

#[derive(Args, Debug)]
struct SteadyArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    k: Exponents,
    /// Police level of the trivial state.
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    p_ambient: f64,
    /// Print JSON instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct RegionMapArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    k0: f64,
    /// MIN:MAX:STEP or a single value.
    #[arg(long, default_value = "-5:5:0.1", allow_hyphen_values = true)]
    k1: Range,
    #[arg(long, default_value = "-5:5:0.1", allow_hyphen_values = true)]
    k2: Range,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    p_ambient: f64,
    /// Region lattice CSV.
    #[arg(long, default_value = "regions.csv")]
    output: PathBuf,
    /// Boundary curve CSV, one row per k1.
    #[arg(long, default_value = "boundaries.csv")]
    boundaries: PathBuf,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    k: Exponents,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    x_min: f64,
    #[arg(long, default_value_t = 5000.0, allow_hyphen_values = true)]
    x_max: f64,
    #[arg(long, default_value_t = 1.0)]
    dx: f64,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long, default_value_t = 100.0)]
    t_end: f64,
    /// Comma-separated profile times; defaults to 15 (when reached) and t_end.
    #[arg(long, value_delimiter = ',')]
    snapshots: Vec<f64>,
    /// Initial u profile: const:C, exp:A:R, gauss:A:C:W or step:L:R:AT.
    #[arg(long, allow_hyphen_values = true)]
    u_init: Option<Profile<f64>>,
    #[arg(long, allow_hyphen_values = true)]
    v_init: Option<Profile<f64>>,
    #[arg(long, allow_hyphen_values = true)]
    p_init: Option<Profile<f64>>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Run even when dt exceeds the explicit-scheme limit.
    #[arg(long)]
    skip_stability_check: bool,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Comma-separated values or ranges.
    #[arg(long, default_value = "-1", allow_hyphen_values = true)]
    k0: String,
    #[arg(long, default_value = "-5:5:1", allow_hyphen_values = true)]
    k1: Range,
    #[arg(long, default_value = "-5:5:1", allow_hyphen_values = true)]
    k2: Range,
    #[arg(long, default_value = "sweep.csv")]
    output: PathBuf,
    /// Comma-separated report columns; runs no column needs are skipped.
    #[arg(long, value_delimiter = ',')]
    metrics: Vec<String>,
    /// Continue from the `.partial` file of an interrupted sweep.
    #[arg(long)]
    resume: bool,
    /// Long runs at dt = 1e-4 with no dt gate.
    #[arg(long)]
    paper_exact: bool,
    /// Permit exponents outside k0 in [-5,5], k1,k2 in [-10,10].
    #[arg(long = "unsafe")]
    allow_unsafe: bool,
    #[arg(long)]
    short_dt: Option<f64>,
    #[arg(long)]
    long_dt: Option<f64>,
    #[arg(long)]
    long_t_end: Option<f64>,
    #[command(flatten)]
    metric_opts: MetricArgs,
}

#[derive(Args, Debug)]
struct MetricArgs {
    #[arg(long, default_value_t = 1e-3)]
    front_threshold: f64,
    #[arg(long, default_value_t = 1e-3)]
    tension_tol: f64,
    #[arg(long, default_value_t = 1e-6)]
    pulse_eps: f64,
    #[arg(long, default_value_t = 5)]
    interface_cells: usize,
    #[arg(long, default_value_t = 1.0)]
    v0: f64,
    #[arg(long, default_value_t = 15.0)]
    u_time: f64,
    /// Time of the long-run metrics; defaults to the end of the run.
    #[arg(long)]
    v_time: Option<f64>,
}

impl MetricArgs {
    fn options(&self) -> MetricOptions {
        MetricOptions {
            front_threshold: self.front_threshold,
            u_time: self.u_time,
            v_time: self.v_time,
            v0: self.v0,
            tension_tol: self.tension_tol,
            pulse_eps: self.pulse_eps,
            interface_cells: self.interface_cells,
            ..MetricOptions::default()
        }
    }
}

#[derive(Args, Debug)]
struct DecayArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    k: Exponents,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    p_ambient: f64,
    #[arg(long, default_value_t = 1200.0)]
    x_max: f64,
    #[arg(long, default_value_t = 0.25)]
    dx: f64,
    /// Defaults to half the stability limit.
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, default_value_t = 600.0)]
    t_end: f64,
    /// exp:RATE or plateau:WIDTH.
    #[arg(long)]
    seed: Option<String>,
    /// Write the JSON here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    let args = match config::splice(args, &Cli::command()) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let cli = match parse(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}

/// Later occurrences of a flag replace earlier ones, which is how explicit
/// flags override the config file.
fn parse(args: Vec<String>) -> Result<Cli, clap::Error> {
    let mut cmd = Cli::command().args_override_self(true);
    let names: Vec<String> = cmd.get_subcommands().map(|s| s.get_name().to_string()).collect();
    for name in names {
        cmd = cmd.mut_subcommand(name, |s| s.args_override_self(true));
    }
    let matches = cmd.try_get_matches_from(args)?;
    Cli::from_arg_matches(&matches)
}

fn run(cmd: Cmd) -> protestwave::Result<()> {
    match cmd {
        Cmd::Steady(a) => steady(a),
        Cmd::RegionMap(a) => region_map(a),
        Cmd::Simulate(a) => simulate_cmd(a),
        Cmd::Sweep(a) => sweep(a),
        Cmd::DecayCheck(a) => decay(a),
    }
}

fn fmt_eigs(s: &SteadyState<f64>) -> String {
    s.eigenvalues
        .iter()
        .map(|z| if z.im == 0.0 { format!("{:.6}", z.re) } else { format!("{:.6}{:+.6}i", z.re, z.im) })
        .collect::<Vec<_>>()
        .join(", ")
}

fn steady(a: SteadyArgs) -> protestwave::Result<()> {
    let p = a.model.apply(ModelParams::analysis_base()).with_k(a.k.k0, a.k.k1, a.k.k2);
    p.validate()?;
    let mut states = vec![trivial_steady_state(&p, a.p_ambient)?];
    states.extend(nontrivial_steady_states(&p)?);
    let region = classify_region(&p, a.p_ambient);
    if a.json {
        let region = match &region {
            Ok(r) => serde_json::to_value(r).expect("serialisable"),
            Err(e) => json!({ "error": e.to_string() }),
        };
        let out = json!({ "params": p, "p_ambient": a.p_ambient, "states": states, "region": region });
        println!("{}", serde_json::to_string_pretty(&out).expect("serialisable"));
        return Ok(());
    }
    println!("{:<10} {:>12} {:>12} {:>6}  {:<9} eigenvalues", "kind", "u", "v", "P", "stability");
    for s in &states {
        println!(
            "{:<10} {:>12.8} {:>12.8} {:>6}  {:<9} [{}]",
            format!("{:?}", s.kind).to_lowercase(),
            s.point.u,
            s.point.v,
            s.point.p,
            format!("{:?}", s.stability).to_lowercase(),
            fmt_eigs(s)
        );
    }
    match region {
        Ok(r) => println!(
            "region {} ({} steady states, {} source)",
            r.region_id, r.steady_state_count, r.source_type
        ),
        Err(e) => println!("region: {e}"),
    }
    Ok(())
}

fn region_map(a: RegionMapArgs) -> protestwave::Result<()> {
    let p = a.model.apply(ModelParams::analysis_base()).with_k(a.k0, 0.0, 0.0);
    let (k1s, k2s) = (a.k1.values(), a.k2.values());
    let cells = region_lattice(&p, &k1s, &k2s, a.p_ambient)?;
    write_region_csv(BufWriter::new(File::create(&a.output)?), &cells)?;
    let curves = trace_boundaries(&p, &k1s, a.p_ambient)?;
    write_boundary_csv(BufWriter::new(File::create(&a.boundaries)?), &curves)?;
    println!("{} cells -> {}", cells.len(), a.output.display());
    println!("{} boundary rows -> {}", curves.len(), a.boundaries.display());
    Ok(())
}

fn simulate_cmd(a: SimulateArgs) -> protestwave::Result<()> {
    let p = a.model.apply(ModelParams::simulation_base()).with_k(a.k.k0, a.k.k1, a.k.k2);
    let mut snapshots = if a.snapshots.is_empty() {
        [15.0, a.t_end].into_iter().filter(|&t| t <= a.t_end).collect()
    } else {
        a.snapshots.clone()
    };
    snapshots.dedup();
    let grid = GridSpec::new(a.x_min, a.x_max, a.dx, a.dt, a.t_end, snapshots)?;
    let ic = if a.u_init.is_none() && a.v_init.is_none() && a.p_init.is_none() {
        InitialCondition::PaperDefault
    } else {
        InitialCondition::Custom {
            u: a.u_init.unwrap_or(Profile::Exp { amp: 1.0, rate: 5.0 }),
            v: a.v_init.unwrap_or(Profile::Const(1.0)),
            p: a.p_init.unwrap_or(Profile::Const(0.0)),
        }
    };
    let fields = initial_condition(&grid, &ic);
    let traj = if a.skip_stability_check { integrate_unchecked(&p, &grid, &fields)? } else { integrate(&p, &grid, &fields)? };
    fs::create_dir_all(&a.out_dir)?;
    let mut files = Vec::new();
    for snap in &traj.snapshots {
        let path = a.out_dir.join(format!("profile_t{}.csv", snap.t));
        write_profile_csv(BufWriter::new(File::create(&path)?), snap, &p)?;
        files.push(path.display().to_string());
    }
    let long = LongMetrics::from_run(&traj, &MetricOptions::default());
    let out = json!({ "initial_condition": ic.to_string(), "files": files, "final": long });
    println!("{}", serde_json::to_string_pretty(&out).expect("serialisable"));
    Ok(())
}

fn sweep(a: SweepArgs) -> protestwave::Result<()> {
    let mut k0_values = Vec::new();
    for part in a.k0.split(',') {
        k0_values.extend(part.parse::<Range>()?.values());
    }
    let mut spec = SweepSpec::new(k0_values, a.k1, a.k2);
    spec.base = a.model.apply(spec.base);
    spec.metrics = a.metric_opts.options();
    spec.allow_unsafe = a.allow_unsafe;
    if !a.metrics.is_empty() {
        spec.columns = a.metrics.clone();
    }
    if a.paper_exact {
        spec = spec.paper_exact();
    }
    if let Some(dt) = a.short_dt {
        spec.short_grid.dt = dt;
    }
    if let Some(dt) = a.long_dt {
        spec.long_grid.dt = dt;
        spec.gate = None;
    }
    if let Some(t) = a.long_t_end {
        spec.long_grid.t_end = t;
    }
    let out = SweepOutput::new(&a.output);
    let records = run_sweep(&spec, &out, a.resume)?;
    let failed = records.iter().filter(|r| r.status != "ok").count();
    println!("{} records -> {} ({} with failures)", records.len(), a.output.display(), failed);
    Ok(())
}

fn parse_seed(s: &str) -> protestwave::Result<TailSeed> {
    let bad = || Error::Parse(format!("seed '{s}' must be exp:RATE or plateau:WIDTH"));
    let (kind, val) = s.split_once(':').ok_or_else(bad)?;
    let v: f64 = val.trim().parse().map_err(|_| bad())?;
    match kind.trim() {
        "exp" => Ok(TailSeed::Exponential(v)),
        "plateau" => Ok(TailSeed::Plateau(v)),
        _ => Err(bad()),
    }
}

fn decay(a: DecayArgs) -> protestwave::Result<()> {
    let p = a.model.apply(ModelParams::analysis_base()).with_k(a.k.k0, a.k.k1, a.k.k2);
    p.validate()?;
    let spec = DecayCheckSpec {
        p_ambient: a.p_ambient,
        x_max: a.x_max,
        dx: a.dx,
        dt: a.dt,
        t_end: a.t_end,
        seed: a.seed.as_deref().map(parse_seed).transpose()?,
        plus_window: TailWindow::default(),
        ..DecayCheckSpec::default()
    };
    let report = decay_check(&p, &spec)?;
    let text = serde_json::to_string_pretty(&json!({ "params": p, "spec": spec, "report": report })).expect("serialisable");
    match a.output {
        Some(path) => fs::write(path, text + "\n")?,
        None => writeln!(io::stdout(), "{text}")?,
    }
    Ok(())
}
