//! `relentropy-lab`: runs structural checks, simulations and limit studies from
//! a JSON configuration.
//!
//! Exit codes: 0 when every pass band is met, 1 on a scientific failure, 2 on a
//! usage error.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use relentropy_core::experiments::{
    adiabatic_limit, converge_eps, stability_study, unit_gas, AdiabaticConfig, ConvergeEpsConfig, InitialData,
    StabilityConfig, StudyReport, StudySolver,
};
use relentropy_core::hypotheses::{
    check_entropy_pair, check_h1, check_h3, check_h4, check_jacobians, gas_suite, HypothesisReport, SamplePlan,
};
use relentropy_core::relent::{identity_residual_gas, identity_residual_general, lemma_bounds_scan};
use relentropy_core::solver::{
    exact_trajectory, manufactured_case, read_bin, simulate, write_bin, write_csv, Grid1D, ManufacturedSolution,
    SineMode, SolverConfig, Trajectory,
};
use relentropy_core::young::{
    bound_check_z_le_h, gronwall_decay_demo, random_measures, young_suite, GronwallConfig, YoungMeasureAtomic,
};
use relentropy_core::{embed_gas_as_general, Coefficient, LinearAdvection, Model1D};
use serde_json::{json, Value};

use config::{CaseSide, ModelSection, RunConfig};

/// A non-success outcome with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }

    pub fn science(message: impl Into<String>) -> Self {
        Failure { code: 1, message: message.into() }
    }
}

impl From<relentropy_core::Error> for Failure {
    fn from(e: relentropy_core::Error) -> Self {
        use relentropy_core::Error as E;
        match e {
            E::Parameter { .. } | E::Shape(_) => Failure::usage(e.to_string()),
            _ => Failure::science(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "relentropy-lab", version, about = "Relative-entropy laboratory for hyperbolic-parabolic systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Overrides the seed of the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Prints warnings and per-check values to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
}

#[derive(Args)]
struct Io {
    /// JSON configuration; every key is optional.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Primary output file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Samples the structural hypotheses and writes a JSON report.
    CheckHypotheses {
        /// `ideal-gas` or `linear-advection`.
        #[arg(long)]
        model: Option<String>,
        #[command(flatten)]
        io: Io,
    },
    /// Runs the solver and writes a binary trajectory.
    Simulate {
        #[command(flatten)]
        io: Io,
        /// Also dump the snapshots as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Writes the term breakdown of the relative-entropy identity for a pair.
    Relent {
        #[arg(long, alias = "config")]
        case: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    ConvergeEps(Io),
    Stability(Io),
    AdiabaticLimit(Io),
    /// Averaged relative quantities on atomic measures and the oscillation decay demo.
    YoungCheck(Io),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::CheckHypotheses { .. } => "check-hypotheses",
            Command::Simulate { .. } => "simulate",
            Command::Relent { .. } => "relent",
            Command::ConvergeEps(_) => "converge-eps",
            Command::Stability(_) => "stability",
            Command::AdiabaticLimit(_) => "adiabatic-limit",
            Command::YoungCheck(_) => "young-check",
        }
    }

    fn paths(&self) -> (Option<&Path>, Option<&Path>) {
        match self {
            Command::CheckHypotheses { io, .. } | Command::Simulate { io, .. } => (io.config.as_deref(), io.out.as_deref()),
            Command::Relent { case, out } => (case.as_deref(), out.as_deref()),
            Command::ConvergeEps(io) | Command::Stability(io) | Command::AdiabaticLimit(io) | Command::YoungCheck(io) => {
                (io.config.as_deref(), io.out.as_deref())
            }
        }
    }
}

/// What a subcommand produced.
struct Outcome {
    pass: bool,
    /// Echo of the fully resolved settings.
    resolved: Value,
    result: Value,
    /// One line per failed check, for stderr.
    failures: Vec<String>,
    warnings: Vec<String>,
    summary: String,
}

struct Context<'a> {
    name: &'static str,
    config: &'a RunConfig,
    out: PathBuf,
    seed: u64,
    /// Directory that relative paths in the config refer to.
    base: PathBuf,
}

const DEFAULT_SEED: u64 = 1;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(pass) => ExitCode::from(if pass { 0 } else { 1 }),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn configure_threads() -> Result<usize, Failure> {
    if let Ok(v) = std::env::var("RELENT_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| Failure::usage(format!("RELENT_THREADS must be a positive integer, got `{v}`")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::usage(format!("RELENT_THREADS: {e}")))?;
    }
    Ok(rayon::current_num_threads())
}

fn run(cli: &Cli) -> Result<bool, Failure> {
    let threads = configure_threads()?;
    let name = cli.command.name();
    let (config_path, out_flag) = cli.command.paths();
    let config = match config_path {
        Some(p) => config::parse_config(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = &config.subcommand {
        if s != name {
            return Err(Failure::usage(format!("subcommand: config is for `{s}`, invoked `{name}`")));
        }
    }
    let out = out_flag
        .map(Path::to_path_buf)
        .or_else(|| config.output.path.clone())
        .ok_or_else(|| Failure::usage("output.path: give --out or set output.path"))?;
    let seed = cli.seed.or(config.seed).unwrap_or(DEFAULT_SEED);
    let base = config_path.and_then(Path::parent).map(Path::to_path_buf).unwrap_or_default();
    let ctx = Context { name, config: &config, out: out.clone(), seed, base };

    let t0 = Instant::now();
    let outcome = match &cli.command {
        Command::CheckHypotheses { model, .. } => check_hypotheses(&ctx, model.as_deref())?,
        Command::Simulate { csv, .. } => simulate_cmd(&ctx, csv.as_deref())?,
        Command::Relent { .. } => relent_cmd(&ctx)?,
        Command::ConvergeEps(_) => converge_cmd(&ctx)?,
        Command::Stability(_) => stability_cmd(&ctx)?,
        Command::AdiabaticLimit(_) => adiabatic_cmd(&ctx)?,
        Command::YoungCheck(_) => young_cmd(&ctx)?,
    };
    let runtime = t0.elapsed().as_secs_f64();

    let meta_path = config.output.metadata.clone().unwrap_or_else(|| sidecar(&out, "meta.json"));
    let meta = json!({
        "subcommand": name,
        "config": config,
        "resolved": outcome.resolved,
        "seed": seed,
        "threads": threads,
        "versions": {
            "relentropy-lab": env!("CARGO_PKG_VERSION"),
            "relentropy-core": relentropy_core::VERSION,
        },
        "runtime_s": runtime,
        "pass": outcome.pass,
        "result": outcome.result,
    });
    write_json(&meta_path, &meta)?;

    println!("{}", outcome.summary);
    if cli.verbose {
        for w in &outcome.warnings {
            eprintln!("warning: {w}");
        }
    }
    for f in &outcome.failures {
        eprintln!("{f}");
    }
    Ok(outcome.pass)
}

/// `<path>.<suffix>` next to `path`.
fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::usage(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn to_value(v: &impl serde::Serialize) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

/// Rejects `study` keys the subcommand would silently ignore.
fn only_study_keys(ctx: &Context, allowed: &[&str]) -> Result<(), Failure> {
    if let Value::Object(map) = to_value(&ctx.config.study) {
        for (k, v) in map {
            if !v.is_null() && !allowed.contains(&k.as_str()) {
                return Err(Failure::usage(format!("study.{k}: not used by {}", ctx.name)));
            }
        }
    }
    Ok(())
}

fn study_solver(ctx: &Context, default: StudySolver) -> Result<StudySolver, Failure> {
    let s = ctx.config.solver();
    if s.inviscid_dissipation.is_some() || s.dt_max.is_some() {
        return Err(Failure::usage(format!(
            "solver: inviscid_dissipation and dt_max are not used by {}",
            ctx.name
        )));
    }
    Ok(StudySolver {
        t_final: s.t_final.unwrap_or(default.t_final),
        output_every: s.output_every.or(default.output_every),
        cfl_hyp: s.cfl_hyp.unwrap_or(default.cfl_hyp),
        cfl_par: s.cfl_par.unwrap_or(default.cfl_par),
    })
}

fn solver_config(ctx: &Context, eps: f64, t_final: f64) -> Result<SolverConfig, Failure> {
    let s = ctx.config.solver();
    let mut c = SolverConfig::new(eps, s.t_final.unwrap_or(t_final));
    c.cfl_hyp = s.cfl_hyp.unwrap_or(c.cfl_hyp);
    c.cfl_par = s.cfl_par.unwrap_or(c.cfl_par);
    c.output_every = s.output_every;
    c.inviscid_dissipation = s.inviscid_dissipation;
    c.dt_max = s.dt_max;
    c.validate()?;
    Ok(c)
}

fn study_outcome(report: StudyReport, out: &Path, resolved: Value) -> Result<Outcome, Failure> {
    report.write_csv(out)?;
    let failures = report
        .checks
        .iter()
        .filter(|c| !c.pass)
        .map(|c| format!("check {} = {} outside [{}, {}]", c.name, c.value, c.lower, c.upper))
        .collect();
    Ok(Outcome {
        pass: report.pass,
        summary: report.summary_line(),
        warnings: report.warnings.clone(),
        failures,
        result: to_value(&report),
        resolved,
    })
}

/// A concrete model built from the config.
enum Built {
    Gas(relentropy_core::GasSystem),
    Advection(LinearAdvection),
}

impl Built {
    fn from_section(m: &ModelSection) -> Result<Self, Failure> {
        Ok(match m {
            ModelSection::IdealGas { .. } => Built::Gas(embed_gas_as_general(m.gas()?)),
            ModelSection::LinearAdvection { components, speed, diffusivity } => {
                if *components == 0 {
                    return Err(Failure::usage("model.components: must be positive"));
                }
                Built::Advection(LinearAdvection::new(*components, *speed, *diffusivity))
            }
        })
    }

    fn model(&self) -> &dyn Model1D {
        match self {
            Built::Gas(s) => s,
            Built::Advection(a) => a,
        }
    }
}

fn default_plan(model: &dyn Model1D, seed: u64) -> SamplePlan {
    if model.dim() == 3 && model.name().contains("gas") {
        SamplePlan::gas_box(200, seed)
    } else {
        SamplePlan::boxed(vec![-1.0; model.dim()], vec![1.0; model.dim()], 200, seed)
    }
}

fn check_hypotheses(ctx: &Context, model_flag: Option<&str>) -> Result<Outcome, Failure> {
    only_study_keys(ctx, &["lemma"])?;
    let section = match (model_flag, &ctx.config.model) {
        (Some(flag), Some(m)) if flag != m.cli_name() => {
            return Err(Failure::usage(format!("model.name: config names {}, --model gives {flag}", m.cli_name())))
        }
        (_, Some(m)) => m.clone(),
        (Some("ideal-gas") | None, None) => ModelSection::default(),
        (Some("linear-advection"), None) => config::parse_str(r#"{"model": {"name": "linear-advection"}}"#)?.model(),
        (Some(other), None) => return Err(Failure::usage(format!("--model: unknown model `{other}`"))),
    };
    let built = Built::from_section(&section)?;
    let model = built.model();
    let mut plan = ctx.config.sampling.clone().unwrap_or_else(|| default_plan(model, ctx.seed));
    if ctx.config.sampling.is_none() || ctx.config.seed.is_some() {
        plan.seed = ctx.seed;
    }
    let report = match &built {
        Built::Gas(sys) => gas_suite(sys, &plan)?,
        Built::Advection(a) => HypothesisReport {
            model: a.name().to_string(),
            seed: plan.seed,
            entries: vec![
                check_jacobians(a, &plan)?,
                check_h1(a, &plan)?,
                check_entropy_pair(a, &plan)?,
                check_h3(a, &plan)?,
                check_h4(a, &plan)?,
            ],
        },
    };
    write_json(&ctx.out, &report)?;
    let mut pass = report.all_pass();
    let mut failures: Vec<String> = report
        .entries
        .iter()
        .filter(|e| !e.passed())
        .map(|e| format!("check {} failed: extremal value {} (tolerance {})", e.name, e.extremal_value, e.tolerance))
        .collect();
    let mut result = json!({ "report": report });
    if let Some(lemma) = &ctx.config.study.lemma {
        let bounds = lemma_bounds_scan(model, lemma, &plan)?;
        write_json(&sidecar(&ctx.out, "lemma.json"), &bounds)?;
        if !bounds.pass {
            failures.push(format!("lemma bounds: c1 = {}, c2 = {}, C3 = {}", bounds.c1, bounds.c2, bounds.c3));
        }
        pass &= bounds.pass;
        result["lemma"] = to_value(&bounds);
    }
    let passed = report.entries.iter().filter(|e| e.passed()).count();
    Ok(Outcome {
        pass,
        summary: format!(
            "check-hypotheses {}: {passed}/{} checks pass{}",
            report.model,
            report.entries.len(),
            if pass { "" } else { " (FAIL)" }
        ),
        resolved: json!({ "model": section, "sampling": plan }),
        result,
        failures,
        warnings: Vec::new(),
    })
}

/// Single-run viscosity: an `eps` scale of the model's laws or a `(mu0, k0)` pair.
fn single_viscosity(ctx: &Context, section: &ModelSection, default_eps: f64) -> Result<(ModelSection, f64), Failure> {
    ctx.config.check_viscosity()?;
    let study = &ctx.config.study;
    match (&study.mu0, &study.k0) {
        (None, None) => Ok((section.clone(), ctx.config.solver().eps.unwrap_or(default_eps))),
        (Some(mu0), Some(k0)) if mu0.len() == 1 && k0.len() == 1 => match section {
            ModelSection::IdealGas { gas_constant, cv, .. } => Ok((
                ModelSection::IdealGas {
                    gas_constant: *gas_constant,
                    cv: *cv,
                    mu: Coefficient::Constant(mu0[0]),
                    kappa: Coefficient::ThetaProportional(k0[0]),
                },
                1.0,
            )),
            _ => Err(Failure::usage("study.mu0: transport laws apply to ideal-gas only")),
        },
        _ => Err(Failure::usage(format!("study.mu0: {} takes one mu0 and one k0", ctx.name))),
    }
}

fn simulate_cmd(ctx: &Context, csv: Option<&Path>) -> Result<Outcome, Failure> {
    only_study_keys(ctx, &["init", "mu0", "k0"])?;
    let (section, eps) = single_viscosity(ctx, &ctx.config.model(), 0.01)?;
    let built = Built::from_section(&section)?;
    let model = built.model();
    let grid = Grid1D::new(ctx.config.grid_cells(256)?, ctx.config.length())?;
    let config = solver_config(ctx, eps, 1.0)?;
    let init = match (&ctx.config.study.init, &built) {
        (Some(i), _) => i.clone(),
        (None, Built::Gas(_)) => InitialData::default(),
        (None, _) => return Err(Failure::usage("study.init: required for this model")),
    };
    let case = match (&init, &section) {
        (InitialData::Manufactured { solution }, ModelSection::IdealGas { .. }) => {
            Some(manufactured_case(&section.gas()?, solution, &grid, eps)?)
        }
        _ => None,
    };
    let source = case.as_ref().map(|c| c.source_fn());
    let field = init.field(&grid);
    if field.cells.iter().any(|c| c.len() != model.dim()) {
        return Err(Failure::usage(format!("study.init: states need {} components", model.dim())));
    }
    let traj = simulate(model, &grid, &field, &config, source.as_ref())?;
    write_bin(&traj, &ctx.out)?;
    if let Some(p) = csv {
        write_csv(&traj, p)?;
    }
    let f0 = &traj.snapshots[0];
    let f1 = traj.final_field();
    let dx = grid.dx();
    let drift: Vec<f64> = (0..model.dim())
        .map(|j| {
            let m0 = f0.integrate(dx, |u| model.a(u)[j]);
            let m1 = f1.integrate(dx, |u| model.a(u)[j]);
            (m1 - m0).abs() / m0.abs().max(1.0)
        })
        .collect();
    Ok(Outcome {
        pass: true,
        summary: format!(
            "simulate {}: {} snapshots, {} steps, t = {}",
            traj.meta.model,
            traj.len(),
            traj.meta.steps,
            f1.time
        ),
        resolved: json!({ "model": section, "grid": grid, "solver": config, "init": init }),
        result: json!({ "run": traj.meta, "conservation_drift": drift }),
        failures: Vec::new(),
        warnings: Vec::new(),
    })
}

fn default_case() -> (ManufacturedSolution, ManufacturedSolution) {
    (
        ManufacturedSolution::gas_wave(1.0, 0.2, 0.1, 1.0, 0.7, SineMode::new(1.0, 0.15, 1.0, 0.3, 0.5)),
        ManufacturedSolution::gas_wave(1.1, 0.1, -0.1, 2.0, 0.4, SineMode::new(0.9, 0.1, 1.0, -0.2, 1.0)),
    )
}

fn relent_cmd(ctx: &Context) -> Result<Outcome, Failure> {
    only_study_keys(ctx, &["case"])?;
    let section = ctx.config.model();
    let built = Built::from_section(&section)?;
    let model = built.model();
    let n = ctx.config.grid_cells(64)?;
    let grid = Grid1D::new(n, ctx.config.length())?;
    let eps_cfg = ctx.config.solver().eps;
    let eps_exact = eps_cfg.unwrap_or(0.5);
    let times = {
        let s = ctx.config.solver();
        let t_final = s.t_final.unwrap_or(std::f64::consts::FRAC_PI_4);
        SolverConfig::new(0.0, t_final).with_output_every(s.output_every.unwrap_or(grid.dx() / 2.0)).snapshot_times()
    };
    let (a, b) = default_case();
    let (side_t, side_r) = match &ctx.config.study.case {
        Some(c) => (c.trajectory.clone(), c.reference.clone()),
        None => (CaseSide::Manufactured(a), CaseSide::Manufactured(b)),
    };
    let load = |side: &CaseSide| -> Result<Trajectory, Failure> {
        match side {
            CaseSide::File(p) => {
                let p = ctx.base.join(p);
                let mut t = read_bin(&p)?;
                // The container has no run metadata; `simulate` leaves it in a sidecar.
                if let Ok(text) = std::fs::read_to_string(sidecar(&p, "meta.json")) {
                    if let Some(eps) = serde_json::from_str::<Value>(&text).ok().and_then(|v| v["result"]["run"]["eps"].as_f64()) {
                        t.meta.eps = eps;
                    }
                }
                Ok(t)
            }
            CaseSide::Manufactured(sol) => Ok(exact_trajectory(model, sol, &grid, &times, eps_exact)?),
        }
    };
    let (traj, traj_bar) = (load(&side_t)?, load(&side_r)?);
    let eps = eps_cfg.unwrap_or(if traj.meta.eps.is_nan() { eps_exact } else { traj.meta.eps });
    let breakdown = identity_residual_general(model, &traj, &traj_bar, eps)?;
    breakdown.write_csv(&ctx.out)?;
    let mut result = json!({
        "eps": eps,
        "n_times": breakdown.n_times,
        "n_cells": breakdown.n_cells,
        "integrated_residual": breakdown.integrated_residual,
        "linf_residual": breakdown.linf_residual,
    });
    if let ModelSection::IdealGas { .. } = section {
        let gas = section.gas()?;
        let g = identity_residual_gas(&gas, &traj, &gas, &traj_bar)?;
        result["gas_identity"] = json!({
            "integrated_residual": g.integrated_residual,
            "linf_residual": g.linf_residual,
            "min_dissipation": g.min_dissipation,
        });
    }
    let pass = breakdown.integrated_residual.is_finite();
    Ok(Outcome {
        pass,
        summary: format!(
            "relent: {} x {} points, integrated residual {:.6e}",
            breakdown.n_times, breakdown.n_cells, breakdown.integrated_residual
        ),
        resolved: json!({ "model": section, "grid": grid, "eps": eps, "trajectory": side_t, "reference": side_r }),
        result,
        failures: if pass { Vec::new() } else { vec!["non-finite residual".into()] },
        warnings: Vec::new(),
    })
}

fn gas_laws(ctx: &Context) -> Result<relentropy_core::GasModel, Failure> {
    match &ctx.config.model {
        Some(m) => m.gas(),
        None => Ok(unit_gas()),
    }
}

fn converge_cmd(ctx: &Context) -> Result<Outcome, Failure> {
    ctx.config.check_viscosity()?;
    only_study_keys(ctx, &["eps_list", "band", "reference", "init", "blowup_factor"])?;
    if ctx.config.solver().eps.is_some() {
        return Err(Failure::usage("solver.eps: converge-eps sweeps study.eps_list"));
    }
    let d = ConvergeEpsConfig::desk();
    let s = &ctx.config.study;
    let cfg = ConvergeEpsConfig {
        gas: gas_laws(ctx)?,
        cells: ctx.config.grid_cells(d.cells)?,
        length: ctx.config.length(),
        init: s.init.clone().unwrap_or(d.init),
        eps_list: s.eps_list.clone().unwrap_or(d.eps_list),
        solver: study_solver(ctx, d.solver)?,
        reference: s.reference.unwrap_or(d.reference),
        band: s.band.unwrap_or(d.band),
        blowup_factor: s.blowup_factor.unwrap_or(d.blowup_factor),
    };
    let report = converge_eps(&cfg)?;
    study_outcome(report, &ctx.out, to_value(&cfg))
}

fn stability_cmd(ctx: &Context) -> Result<Outcome, Failure> {
    ctx.config.check_viscosity()?;
    only_study_keys(ctx, &["eps_list", "deltas", "band", "init", "perturbation", "amplification_cap"])?;
    if ctx.config.solver().eps.is_some() {
        return Err(Failure::usage("solver.eps: stability sweeps study.eps_list"));
    }
    let d = StabilityConfig::desk();
    let s = &ctx.config.study;
    let section = ctx.config.model();
    let built = Built::from_section(&section)?;
    if !matches!(built, Built::Gas(_)) && (s.init.is_none() || s.perturbation.is_none()) {
        return Err(Failure::usage("study.init: stability on this model needs init and perturbation"));
    }
    let cfg = StabilityConfig {
        cells: ctx.config.grid_cells(d.cells)?,
        length: ctx.config.length(),
        init: s.init.clone().unwrap_or(d.init),
        perturbation: s.perturbation.clone().unwrap_or(d.perturbation),
        deltas: s.deltas.clone().unwrap_or(d.deltas),
        eps_list: s.eps_list.clone().unwrap_or(d.eps_list),
        solver: study_solver(ctx, d.solver)?,
        band: s.band.unwrap_or(d.band),
        amplification_cap: s.amplification_cap.unwrap_or(d.amplification_cap),
    };
    let report = stability_study(built.model(), &cfg)?;
    study_outcome(report, &ctx.out, json!({ "model": section, "study": cfg }))
}

fn adiabatic_cmd(ctx: &Context) -> Result<Outcome, Failure> {
    ctx.config.check_viscosity()?;
    only_study_keys(
        ctx,
        &[
            "mu0",
            "k0",
            "band",
            "reference",
            "init",
            "perturbation",
            "perturbation_amplitude",
            "constant_spread",
            "gamma_m",
            "gamma_delta",
            "blowup_factor",
        ],
    )?;
    if ctx.config.solver().eps.is_some() {
        return Err(Failure::usage(
            "ambiguous viscosity specification: adiabatic-limit takes (mu0, k0), not eps",
        ));
    }
    let d = AdiabaticConfig::desk();
    let s = &ctx.config.study;
    let mu0_k0 = match (&s.mu0, &s.k0) {
        (None, None) => d.mu0_k0.clone(),
        (Some(m), Some(k)) if m.len() == k.len() => m.iter().copied().zip(k.iter().copied()).collect(),
        _ => return Err(Failure::usage("study.k0: give mu0 and k0 lists of equal length")),
    };
    let cfg = AdiabaticConfig {
        gas: gas_laws(ctx)?,
        cells: ctx.config.grid_cells(d.cells)?,
        length: ctx.config.length(),
        init: s.init.clone().unwrap_or(d.init),
        mu0_k0,
        solver: study_solver(ctx, d.solver)?,
        reference: s.reference.unwrap_or(d.reference),
        perturbation: s.perturbation.clone().or(d.perturbation),
        perturbation_amplitude: s.perturbation_amplitude.unwrap_or(d.perturbation_amplitude),
        band: s.band.unwrap_or(d.band),
        constant_spread: s.constant_spread.unwrap_or(d.constant_spread),
        gamma_m: s.gamma_m.unwrap_or(d.gamma_m),
        gamma_delta: s.gamma_delta.unwrap_or(d.gamma_delta),
        blowup_factor: s.blowup_factor.unwrap_or(d.blowup_factor),
    };
    let report = adiabatic_limit(&cfg)?;
    study_outcome(report, &ctx.out, to_value(&cfg))
}

fn young_cmd(ctx: &Context) -> Result<Outcome, Failure> {
    only_study_keys(ctx, &["measures", "h0_targets", "init", "perturbation", "band", "rate_spread"])?;
    if ctx.config.study.mu0.is_some() || ctx.config.study.k0.is_some() {
        return Err(Failure::usage("study.mu0: young-check scales the model laws by solver.eps"));
    }
    let section = ctx.config.model();
    let built = Built::from_section(&section)?;
    let model = built.model();
    let n = model.dim();
    let gas = matches!(built, Built::Gas(_));
    let m = ctx.config.study.measures.clone().unwrap_or_default();
    let (lower, upper) = match (&m.lower, &m.upper) {
        (Some(l), Some(u)) => (l.clone(), u.clone()),
        (None, None) if gas => (vec![0.5, -1.0, 0.5], vec![2.0, 1.0, 2.0]),
        (None, None) => (vec![-1.0; n], vec![1.0; n]),
        _ => return Err(Failure::usage("study.measures: give both lower and upper")),
    };
    let ubar = DVector::from_vec(m.ubar.clone().unwrap_or_else(|| {
        if gas {
            vec![1.0, 0.0, 1.0]
        } else {
            vec![0.0; n]
        }
    }));
    if ubar.len() != n {
        return Err(Failure::usage(format!("study.measures.ubar: need {n} components")));
    }
    let nus: Vec<YoungMeasureAtomic> = match &m.file {
        Some(p) => {
            let p = &ctx.base.join(p);
            let text = std::fs::read_to_string(p).map_err(|e| Failure::usage(format!("{}: {e}", p.display())))?;
            let de = &mut serde_json::Deserializer::from_str(&text);
            serde_path_to_error::deserialize(de)
                .map_err(|e| Failure::usage(format!("{}: measure error at `{}`: {}", p.display(), e.path(), e.inner())))?
        }
        None => random_measures(&lower, &upper, m.count, m.cells, m.max_atoms, ctx.seed)?,
    };
    let (suite, per) = young_suite(&nus, model, &ubar)?;
    let zb = bound_check_z_le_h(&nus, model, &ubar, m.m_radius.unwrap_or(ubar.norm()))?;

    let mut rows = String::from("sample,cell,H,H_direct,Z_norm,Z_direct_norm,jensen_gap\n");
    for (k, q) in per.iter().enumerate() {
        for i in 0..q.h.len() {
            rows.push_str(&format!(
                "{k},{i},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                q.h[i],
                q.h_direct[i],
                q.z[i].norm(),
                q.z_direct[i].norm(),
                q.jensen_gap[i]
            ));
        }
    }
    std::fs::write(&ctx.out, rows).map_err(|e| Failure::usage(format!("{}: {e}", ctx.out.display())))?;

    let d = GronwallConfig::desk();
    let s = &ctx.config.study;
    if !gas && (s.init.is_none() || s.perturbation.is_none()) {
        return Err(Failure::usage("study.init: the decay demo on this model needs init and perturbation"));
    }
    let gcfg = GronwallConfig {
        cells: ctx.config.grid_cells(d.cells)?,
        length: ctx.config.length(),
        init: s.init.clone().unwrap_or(d.init),
        perturbation: s.perturbation.clone().unwrap_or(d.perturbation),
        h0_targets: s.h0_targets.clone().unwrap_or(d.h0_targets),
        eps: ctx.config.solver().eps.unwrap_or(d.eps),
        solver: study_solver(ctx, d.solver)?,
        band: s.band.unwrap_or(d.band),
        rate_spread: s.rate_spread.unwrap_or(d.rate_spread),
    };
    let demo = gronwall_decay_demo(model, &gcfg)?;
    demo.write_csv(&sidecar(&ctx.out, "gronwall.csv"))?;

    let pass = suite.pass && zb.pass && demo.pass;
    let mut failures = Vec::new();
    if !suite.pass {
        failures.push(format!(
            "young suite: H gap {:e}, Z gap {:e}, {} Jensen violations",
            suite.max_h_gap, suite.max_z_gap, suite.jensen_violations
        ));
    }
    if !zb.pass {
        failures.push(format!("|Z| <= C H scan: C1 = {}", zb.c1));
    }
    failures.extend(
        demo.checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| format!("check {} = {} outside [{}, {}]", c.name, c.value, c.lower, c.upper)),
    );
    Ok(Outcome {
        pass,
        summary: format!(
            "young-check: {} samples, C1 = {:.6}, {}",
            suite.samples,
            zb.c1,
            demo.summary_line()
        ),
        resolved: json!({
            "model": section,
            "measures": { "count": nus.len(), "lower": lower, "upper": upper, "ubar": ubar.as_slice(), "seed": ctx.seed },
            "gronwall": gcfg,
        }),
        result: json!({ "suite": suite, "z_bound": zb, "gronwall": demo }),
        warnings: demo.warnings.clone(),
        failures,
    })
}
