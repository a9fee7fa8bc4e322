use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    check_decades, l2_difference, relative_entropy_series, restrict, steepening, fit_rate, InitialData,
    Perturbation, StudyCheck, StudyReport, StudyRow, StudySolver,
};
use crate::error::{Error, Result};
use crate::model::{embed_gas_as_general, Coefficient, GasModel, GasState, Model1D};
use crate::numeric::{pairwise_sum, periodic_dx_vec, trapezoid_weights};
use crate::relent::gas_relative_closed_form;
use crate::solver::{exact_trajectory, manufactured_case, simulate, Field, Grid1D, SourceFn, Trajectory};

/// How the inviscid reference solution is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferencePolicy {
    /// Manufactured when the initial data are manufactured, same-grid otherwise.
    #[default]
    Auto,
    /// Closed-form reference; runs carry the reference forcing.
    Manufactured,
    /// Inviscid run on the study grid from the same data.
    SameGrid,
    /// Inviscid run on a grid four times finer, interpolated to the study grid.
    FineGrid,
}

impl ReferencePolicy {
    fn resolve(self, init: &InitialData) -> Result<Self> {
        let manufactured = matches!(init, InitialData::Manufactured { .. });
        match self {
            ReferencePolicy::Auto if manufactured => Ok(ReferencePolicy::Manufactured),
            ReferencePolicy::Auto => Ok(ReferencePolicy::SameGrid),
            ReferencePolicy::Manufactured if !manufactured => {
                Err(Error::param("reference", "manufactured reference needs manufactured initial data"))
            }
            p => Ok(p),
        }
    }
}

fn tau() -> f64 {
    std::f64::consts::TAU
}

fn unit_band() -> (f64, f64) {
    (0.9, 1.1)
}

fn blowup() -> f64 {
    10.0
}

/// Ideal gas `R = c_v = 1` with unit constant viscosity and conductivity.
pub fn unit_gas() -> GasModel {
    GasModel {
        gas_constant: 1.0,
        cv: 1.0,
        mu: Coefficient::Constant(1.0),
        kappa: Coefficient::Constant(1.0),
    }
}

fn inviscid(gas: &GasModel) -> GasModel {
    GasModel { mu: Coefficient::Constant(0.0), kappa: Coefficient::Constant(0.0), ..*gas }
}

/// Inviscid reference and the forcing both runs share.
fn reference_run(
    gas: &GasModel,
    policy: ReferencePolicy,
    init: &InitialData,
    grid: &Grid1D,
    solver: &StudySolver,
) -> Result<(Trajectory, Option<SourceFn>)> {
    let sys = embed_gas_as_general(inviscid(gas));
    let config = solver.config(0.0);
    match policy.resolve(init)? {
        ReferencePolicy::Manufactured => {
            let InitialData::Manufactured { solution } = init else {
                unreachable!("resolve admits manufactured policy only for manufactured data")
            };
            let case = manufactured_case(&inviscid(gas), solution, grid, 0.0)?;
            let traj = exact_trajectory(&sys, solution, grid, &config.snapshot_times(), 0.0)?;
            Ok((traj, Some(case.source_fn())))
        }
        ReferencePolicy::FineGrid => {
            let fine = Grid1D::new(grid.cells() * 4, grid.length())?;
            let traj = simulate(&sys, &fine, &init.field(&fine), &config, None)?;
            Ok((restrict(&traj, 4)?, None))
        }
        _ => Ok((simulate(&sys, grid, &init.field(grid), &config, None)?, None)),
    }
}

fn check_blowup(reference: &Trajectory, factor: f64) -> Result<f64> {
    let s = steepening(reference);
    if !(s <= factor) {
        return Err(Error::Precondition(format!(
            "reference blow-up window exceeded: max |d_x u| grew by {s:.3}x, limit {factor}"
        )));
    }
    Ok(s)
}

fn timed<T>(f: impl FnOnce() -> Result<T>) -> Result<(T, f64)> {
    let t0 = Instant::now();
    let v = f()?;
    Ok((v, t0.elapsed().as_secs_f64()))
}

fn sup(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn positive_fit(report: &mut StudyReport, key: &str, points: Vec<(f64, f64)>, band: (f64, f64)) {
    let kept: Vec<(f64, f64)> = points.iter().copied().filter(|(p, m)| *p > 0.0 && *m > 0.0).collect();
    if kept.len() < points.len() {
        report.warnings.push(format!("{key}: {} rows with zero metric left out of the fit", points.len() - kept.len()));
    }
    match fit_rate(&kept) {
        Ok(fit) => {
            report.checks.push(StudyCheck::band(key, fit.slope, band));
            report.fits.insert(key.to_string(), fit);
        }
        Err(e) => {
            report.warnings.push(format!("{key}: no rate fit ({e})"));
            report.checks.push(StudyCheck::band(key, f64::NAN, band));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeEpsConfig {
    /// Transport laws at unit scale; each run multiplies them by `eps`.
    #[serde(default = "unit_gas")]
    pub gas: GasModel,
    pub cells: usize,
    #[serde(default = "tau")]
    pub length: f64,
    #[serde(default)]
    pub init: InitialData,
    pub eps_list: Vec<f64>,
    pub solver: StudySolver,
    #[serde(default)]
    pub reference: ReferencePolicy,
    #[serde(default = "unit_band")]
    pub band: (f64, f64),
    /// Largest tolerated growth of `max |d_x ubar|` over the run.
    #[serde(default = "blowup")]
    pub blowup_factor: f64,
}

impl ConvergeEpsConfig {
    /// Smooth pulse, `N = 512`, `T = 0.2`, five viscosities over two decades.
    pub fn desk() -> Self {
        ConvergeEpsConfig {
            gas: unit_gas(),
            cells: 512,
            length: tau(),
            init: InitialData::default(),
            eps_list: vec![1e-2, 3e-3, 1e-3, 3e-4, 1e-4],
            solver: StudySolver::new(0.2),
            reference: ReferencePolicy::Auto,
            band: unit_band(),
            blowup_factor: blowup(),
        }
    }
}

/// Zero-viscosity convergence: `sup_t integral eta_hat(u^eps|ubar) dx` against `eps`
/// with identical initial data.
pub fn converge_eps(cfg: &ConvergeEpsConfig) -> Result<StudyReport> {
    check_decades("eps_list", &cfg.eps_list, 3)?;
    let grid = Grid1D::new(cfg.cells, cfg.length)?;
    let policy = cfg.reference.resolve(&cfg.init)?;
    let (reference, source) = reference_run(&cfg.gas, policy, &cfg.init, &grid, &cfg.solver)?;
    let steep = check_blowup(&reference, cfg.blowup_factor)?;
    let sys = embed_gas_as_general(cfg.gas);
    let init = cfg.init.field(&grid);

    let runs = cfg
        .eps_list
        .par_iter()
        .map(|&eps| {
            let (traj, secs) = timed(|| simulate(&sys, &grid, &init, &cfg.solver.config(eps), source.as_ref()))?;
            let series = relative_entropy_series(&sys, &traj, &reference)?;
            let l2 = l2_difference(&traj, &reference)?;
            Ok((eps, series, l2, secs, traj.meta.steps))
        })
        .collect::<Result<Vec<_>>>()?;
    let disc = discretization_estimate(cfg, policy, &grid, &reference, source.as_ref())?;

    let mut report = StudyReport::new("converge-eps", &["final_relent", "l2_final", "steps"]);
    for (eps, series, l2, secs, steps) in &runs {
        let metric = sup(series);
        report.rows.push(StudyRow {
            parameter: *eps,
            metric,
            runtime_s: *secs,
            extra: BTreeMap::from([
                ("final_relent".into(), *series.last().unwrap()),
                ("l2_final".into(), *l2.last().unwrap()),
                ("steps".into(), *steps as f64),
            ]),
        });
        if metric < 10.0 * disc {
            report.warnings.push(format!(
                "eps = {eps:e}: metric {metric:e} is below 10x the estimated discretization error {disc:e}"
            ));
        }
    }
    report.sort_rows();
    for w in report.rows.windows(2) {
        if w[0].metric > w[1].metric * (1.0 + 1e-12) {
            report.warnings.push(format!(
                "metric increases as eps decreases from {:e} to {:e}; outside the asymptotic regime",
                w[1].parameter, w[0].parameter
            ));
        }
    }
    let points: Vec<(f64, f64)> = report.rows.iter().map(|r| (r.parameter, r.metric)).collect();
    positive_fit(&mut report, "slope", points, cfg.band);
    let c = report.rows.iter().map(|r| r.metric / r.parameter).fold(0.0_f64, f64::max);
    report.constants.insert("C".into(), c);
    report.constants.insert("discretization_error_estimate".into(), disc);
    report.constants.insert("reference_steepening".into(), steep);
    report.finish();
    Ok(report)
}

/// Estimated `sup_t integral eta` contributed by discretization error alone at
/// the study resolution.
fn discretization_estimate(
    cfg: &ConvergeEpsConfig,
    policy: ReferencePolicy,
    grid: &Grid1D,
    reference: &Trajectory,
    source: Option<&SourceFn>,
) -> Result<f64> {
    let sys = embed_gas_as_general(inviscid(&cfg.gas));
    let config = cfg.solver.config(0.0);
    if policy.resolve(&cfg.init)? == ReferencePolicy::Manufactured {
        let numeric = simulate(&sys, grid, &cfg.init.field(grid), &config, source)?;
        return Ok(sup(&relative_entropy_series(&sys, &numeric, reference)?));
    }
    if !grid.cells().is_multiple_of(2) || grid.cells() / 2 < Grid1D::MIN_CELLS {
        return Ok(0.0);
    }
    let fine = if policy == ReferencePolicy::SameGrid {
        reference.clone()
    } else {
        simulate(&sys, grid, &cfg.init.field(grid), &config, None)?
    };
    let half = Grid1D::new(grid.cells() / 2, grid.length())?;
    let coarse = simulate(&sys, &half, &cfg.init.field(&half), &config, None)?;
    // Second order: the coarse error is four times the fine one, their difference three times.
    Ok(sup(&relative_entropy_series(&sys, &coarse, &restrict(&fine, 2)?)?) / 9.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityConfig {
    pub cells: usize,
    #[serde(default = "tau")]
    pub length: f64,
    #[serde(default)]
    pub init: InitialData,
    #[serde(default)]
    pub perturbation: Perturbation,
    pub deltas: Vec<f64>,
    pub eps_list: Vec<f64>,
    pub solver: StudySolver,
    #[serde(default = "stability_band")]
    pub band: (f64, f64),
    /// Upper limit on the reported amplification constant.
    #[serde(default = "amplification_cap")]
    pub amplification_cap: f64,
}

fn stability_band() -> (f64, f64) {
    (0.95, 1.05)
}

fn amplification_cap() -> f64 {
    100.0
}

impl StabilityConfig {
    pub fn desk() -> Self {
        StabilityConfig {
            cells: 256,
            length: tau(),
            init: InitialData::default(),
            perturbation: Perturbation::default(),
            deltas: vec![1e-2, 1e-3, 1e-4],
            eps_list: vec![1e-2, 1e-3],
            solver: StudySolver::new(0.5),
            band: stability_band(),
            amplification_cap: amplification_cap(),
        }
    }
}

/// L2 stability: both runs share `eps`; the data differ by `delta` times the
/// perturbation profile.
pub fn stability_study<M: Model1D + ?Sized>(model: &M, cfg: &StabilityConfig) -> Result<StudyReport> {
    let positive: Vec<f64> = cfg.deltas.iter().copied().filter(|d| *d > 0.0).collect();
    if cfg.deltas.iter().any(|d| !(*d >= 0.0)) {
        return Err(Error::param("deltas", "amplitudes must be nonnegative"));
    }
    check_decades("deltas", &positive, 3)?;
    if cfg.eps_list.is_empty() || cfg.eps_list.iter().any(|e| !(*e >= 0.0)) {
        return Err(Error::param("eps_list", "need at least one nonnegative viscosity"));
    }
    if cfg.perturbation.direction.len() != model.dim() {
        return Err(Error::param("perturbation.direction", format!("need {} components", model.dim())));
    }
    let grid = Grid1D::new(cfg.cells, cfg.length)?;
    let base = cfg.init.field(&grid);

    let mut jobs: Vec<(f64, f64)> = Vec::new();
    for &eps in &cfg.eps_list {
        jobs.push((eps, 0.0));
        jobs.extend(positive.iter().map(|&d| (eps, d)));
    }
    let runs = jobs
        .par_iter()
        .map(|&(eps, delta)| {
            let init: Field = cfg.perturbation.apply(&base, &grid, delta);
            timed(|| simulate(model, &grid, &init, &cfg.solver.config(eps), None))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut report = StudyReport::new("stability", &["eps", "sup_amplification", "initial_l2"]);
    if positive.len() < cfg.deltas.len() {
        report.warnings.push("delta = 0 skipped: amplification undefined, difference identically zero".into());
    }
    let mut overall = 0.0_f64;
    for &eps in &cfg.eps_list {
        let base_idx = jobs.iter().position(|j| *j == (eps, 0.0)).unwrap();
        let (base_traj, _) = &runs[base_idx];
        let mut worst = 0.0_f64;
        let mut points = Vec::new();
        for (k, (traj, secs)) in runs.iter().enumerate() {
            let (e, delta) = jobs[k];
            if e != eps || delta == 0.0 {
                continue;
            }
            let diff = l2_difference(traj, base_traj)?;
            let amp = diff.iter().map(|d| d / diff[0]).fold(0.0_f64, f64::max);
            worst = worst.max(amp);
            points.push((delta, *diff.last().unwrap()));
            report.rows.push(StudyRow {
                parameter: delta,
                metric: *diff.last().unwrap(),
                runtime_s: *secs,
                extra: BTreeMap::from([
                    ("eps".into(), eps),
                    ("sup_amplification".into(), amp),
                    ("initial_l2".into(), diff[0]),
                ]),
            });
        }
        positive_fit(&mut report, &format!("slope eps={eps:e}"), points, cfg.band);
        report.constants.insert(format!("C eps={eps:e}"), worst);
        overall = overall.max(worst);
    }
    report.constants.insert("C".into(), overall);
    report.checks.push(StudyCheck::band("amplification_bound", overall, (0.0, cfg.amplification_cap)));
    report.finish();
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdiabaticConfig {
    /// Free energy; the transport laws are replaced by the sweep.
    #[serde(default = "unit_gas")]
    pub gas: GasModel,
    pub cells: usize,
    #[serde(default = "tau")]
    pub length: f64,
    #[serde(default)]
    pub init: InitialData,
    /// Pairs `(mu0, k0)` giving `mu = mu0` and `kappa = k0 theta`.
    pub mu0_k0: Vec<(f64, f64)>,
    pub solver: StudySolver,
    #[serde(default)]
    pub reference: ReferencePolicy,
    /// Optional perturbation of the viscous initial data.
    #[serde(default)]
    pub perturbation: Option<Perturbation>,
    #[serde(default)]
    pub perturbation_amplitude: f64,
    #[serde(default = "unit_band")]
    pub band: (f64, f64),
    /// Allowed relative spread `max C / min C - 1` of the fitted constants.
    #[serde(default = "half")]
    pub constant_spread: f64,
    #[serde(default = "gamma_m")]
    pub gamma_m: f64,
    #[serde(default = "gamma_delta")]
    pub gamma_delta: f64,
    #[serde(default = "blowup")]
    pub blowup_factor: f64,
}

fn half() -> f64 {
    0.5
}

fn gamma_m() -> f64 {
    10.0
}

fn gamma_delta() -> f64 {
    0.1
}

impl AdiabaticConfig {
    pub fn desk() -> Self {
        AdiabaticConfig {
            gas: unit_gas(),
            cells: 256,
            length: tau(),
            init: InitialData::default(),
            mu0_k0: vec![(1e-2, 1e-2), (1e-3, 1e-3), (1e-4, 1e-4)],
            solver: StudySolver::new(0.2),
            reference: ReferencePolicy::Auto,
            perturbation: None,
            perturbation_amplitude: 0.0,
            band: unit_band(),
            constant_spread: half(),
            gamma_m: gamma_m(),
            gamma_delta: gamma_delta(),
            blowup_factor: blowup(),
        }
    }
}

/// Errors unless every reference state lies in `Gamma_{M,delta}`:
/// `|u| <= M`, `|v| <= M`, `delta <= theta <= M`.
pub fn check_gamma(reference: &Trajectory, m: f64, delta: f64) -> Result<()> {
    for f in &reference.snapshots {
        for (i, c) in f.cells.iter().enumerate() {
            let (u, v, th) = (c[0], c[1], c[2]);
            if !(u.abs() <= m && v.abs() <= m && th >= delta && th <= m) {
                return Err(Error::Precondition(format!(
                    "reference leaves Gamma_{{M,delta}} (M = {m}, delta = {delta}) at t = {}, cell {i}: ({u}, {v}, {th})",
                    f.time
                )));
            }
        }
    }
    Ok(())
}

/// Adiabatic limit: `sup_t integral I(U|Ubar) dx` against `mu0` with
/// `kappa = k0 theta`, and the constant in
/// `sup_t integral I <= C (integral I_0 + int int mu theta/thetabar vbar_x^2 + kappa thetabar_x^2/thetabar)`.
pub fn adiabatic_limit(cfg: &AdiabaticConfig) -> Result<StudyReport> {
    if cfg.mu0_k0.iter().any(|(m, k)| !(*m >= 0.0 && *k >= 0.0)) {
        return Err(Error::param("mu0_k0", "coefficients must be nonnegative"));
    }
    let positive: Vec<f64> = cfg.mu0_k0.iter().map(|p| p.0).filter(|m| *m > 0.0).collect();
    check_decades("mu0_k0", &positive, 3)?;
    if !(cfg.gamma_delta > 0.0 && cfg.gamma_m > cfg.gamma_delta) {
        return Err(Error::param("gamma_delta", "need 0 < delta < M"));
    }
    let grid = Grid1D::new(cfg.cells, cfg.length)?;
    let (reference, source) = reference_run(&cfg.gas, cfg.reference, &cfg.init, &grid, &cfg.solver)?;
    check_gamma(&reference, cfg.gamma_m, cfg.gamma_delta)?;
    let steep = check_blowup(&reference, cfg.blowup_factor)?;
    let mut init = cfg.init.field(&grid);
    if let Some(p) = &cfg.perturbation {
        if p.direction.len() != 3 {
            return Err(Error::param("perturbation.direction", "need 3 components"));
        }
        init = p.apply(&init, &grid, cfg.perturbation_amplitude);
    }
    let dx = grid.dx();
    let bar_dx: Vec<Vec<nalgebra::DVector<f64>>> =
        reference.snapshots.iter().map(|f| periodic_dx_vec(&f.cells, dx)).collect();

    let runs = cfg
        .mu0_k0
        .par_iter()
        .map(|&(mu0, k0)| {
            let gas = cfg.gas.with_transport(Coefficient::Constant(mu0), Coefficient::ThetaProportional(k0))?;
            let sys = embed_gas_as_general(gas);
            let (traj, secs) = timed(|| simulate(&sys, &grid, &init, &cfg.solver.config(1.0), source.as_ref()))?;
            let mut i_series = Vec::with_capacity(traj.len());
            let mut diss_series = Vec::with_capacity(traj.len());
            for (k, (f, fb)) in traj.snapshots.iter().zip(&reference.snapshots).enumerate() {
                let mut i_vals = Vec::with_capacity(f.cells.len());
                let mut d_vals = Vec::with_capacity(f.cells.len());
                for (j, (c, cb)) in f.cells.iter().zip(&fb.cells).enumerate() {
                    let s = GasState::from_vector(c)?;
                    let sb = GasState::from_vector(cb)?;
                    i_vals.push(gas_relative_closed_form(&gas, &s, &sb).i_density);
                    let (vbx, tbx) = (bar_dx[k][j][1], bar_dx[k][j][2]);
                    let mu = gas.mu_at(s.u(), s.theta());
                    let kappa = gas.kappa_at(s.u(), s.theta());
                    d_vals.push(mu * s.theta() / sb.theta() * vbx * vbx + kappa * tbx * tbx / sb.theta());
                }
                i_series.push(pairwise_sum(&i_vals) * dx);
                diss_series.push(pairwise_sum(&d_vals) * dx);
            }
            let w = trapezoid_weights(traj.len(), traj.dt()?);
            let diss: f64 = pairwise_sum(&diss_series.iter().zip(&w).map(|(d, w)| d * w).collect::<Vec<_>>());
            Ok((mu0, k0, sup(&i_series), i_series[0], diss, secs))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut report =
        StudyReport::new("adiabatic-limit", &["k0", "data_term", "dissipation_term", "bound_rhs", "constant"]);
    let mut constants = Vec::new();
    for &(mu0, k0, metric, data, diss, secs) in &runs {
        let rhs = data + diss;
        let constant = if rhs > 0.0 { metric / rhs } else { f64::NAN };
        if constant.is_finite() && metric > 0.0 {
            constants.push(constant);
        }
        report.rows.push(StudyRow {
            parameter: mu0,
            metric,
            runtime_s: secs,
            extra: BTreeMap::from([
                ("k0".into(), k0),
                ("data_term".into(), data),
                ("dissipation_term".into(), diss),
                ("bound_rhs".into(), rhs),
                ("constant".into(), constant),
            ]),
        });
    }
    report.sort_rows();
    let points: Vec<(f64, f64)> = report.rows.iter().map(|r| (r.parameter, r.metric)).collect();
    positive_fit(&mut report, "slope", points, cfg.band);
    let (cmin, cmax) = constants.iter().fold((f64::INFINITY, 0.0_f64), |(l, h), c| (l.min(*c), h.max(*c)));
    let spread = if constants.is_empty() { f64::NAN } else { cmax / cmin };
    report.constants.insert("C".into(), if constants.is_empty() { f64::NAN } else { cmax });
    report.constants.insert("reference_steepening".into(), steep);
    report.checks.push(StudyCheck::band("constant_spread", spread, (1.0, 1.0 + cfg.constant_spread)));
    report.finish();
    Ok(report)
}
