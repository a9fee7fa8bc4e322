//! Limit studies on the periodic solver and log-log rate fits.

mod studies;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Model1D;
use crate::numeric::{pairwise_sum, periodic_dx_vec};
use crate::relent::Reference;
use crate::solver::{gas_pulse, Field, Grid1D, ManufacturedSolution, SolverConfig, Trajectory};

pub use studies::{
    adiabatic_limit, converge_eps, stability_study, AdiabaticConfig, ConvergeEpsConfig, ReferencePolicy,
    StabilityConfig, unit_gas,
};

/// Least-squares line through `(ln parameter, ln value)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

impl RateFit {
    pub fn predict(&self, parameter: f64) -> f64 {
        (self.intercept + self.slope * parameter.ln()).exp()
    }
}

pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(Error::param("points", format!("need at least 3 points, got {}", points.len())));
    }
    if let Some((p, v)) = points.iter().find(|(p, v)| !(*p > 0.0 && *v > 0.0)) {
        return Err(Error::Domain(format!("log-log fit needs positive pairs, got ({p}, {v})")));
    }
    let xs: Vec<f64> = points.iter().map(|(p, _)| p.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, v)| v.ln()).collect();
    let n = points.len() as f64;
    let (mx, my) = (pairwise_sum(&xs) / n, pairwise_sum(&ys) / n);
    let sxx: f64 = pairwise_sum(&xs.iter().map(|x| (x - mx) * (x - mx)).collect::<Vec<_>>());
    let sxy: f64 = pairwise_sum(&xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).collect::<Vec<_>>());
    if sxx == 0.0 {
        return Err(Error::param("points", "parameters must not all coincide"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res = pairwise_sum(&xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).collect::<Vec<_>>());
    let ss_tot = pairwise_sum(&ys.iter().map(|y| (y - my).powi(2)).collect::<Vec<_>>());
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(RateFit { points: points.to_vec(), slope, intercept, r_squared })
}

/// One run of a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub parameter: f64,
    pub metric: f64,
    /// Wall-clock seconds; reported in the metadata, never in the CSV.
    pub runtime_s: f64,
    pub extra: BTreeMap<String, f64>,
}

/// A pass criterion on one reported number: `lower <= value <= upper`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyCheck {
    pub name: String,
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub pass: bool,
}

impl StudyCheck {
    pub fn band(name: impl Into<String>, value: f64, (lower, upper): (f64, f64)) -> Self {
        StudyCheck { name: name.into(), value, lower, upper, pass: value >= lower && value <= upper }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub study: String,
    /// Names of the `extra` columns, in CSV order.
    pub columns: Vec<String>,
    pub rows: Vec<StudyRow>,
    pub fits: BTreeMap<String, RateFit>,
    pub constants: BTreeMap<String, f64>,
    pub checks: Vec<StudyCheck>,
    pub warnings: Vec<String>,
    pub pass: bool,
}

impl StudyReport {
    pub(crate) fn new(study: &str, columns: &[&str]) -> Self {
        StudyReport {
            study: study.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            fits: BTreeMap::new(),
            constants: BTreeMap::new(),
            checks: Vec::new(),
            warnings: Vec::new(),
            pass: false,
        }
    }

    /// Sorts rows by parameter, then by the extra columns in order.
    pub(crate) fn sort_rows(&mut self) {
        let cols = self.columns.clone();
        self.rows.sort_by(|a, b| {
            let key = |r: &StudyRow| -> Vec<f64> {
                std::iter::once(r.parameter)
                    .chain(cols.iter().map(|c| r.extra.get(c).copied().unwrap_or(f64::NAN)))
                    .collect()
            };
            key(a).partial_cmp(&key(b)).unwrap_or(std::cmp::Ordering::Equal)
        });
    }

    pub(crate) fn finish(&mut self) {
        self.sort_rows();
        self.pass = !self.checks.is_empty() && self.checks.iter().all(|c| c.pass);
    }

    pub fn check(&self, name: &str) -> Option<&StudyCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn csv_header(&self) -> String {
        let mut h = vec!["parameter".to_string(), "metric".to_string()];
        h.extend(self.columns.iter().cloned());
        h.join(",")
    }

    /// Rows as CSV with 17 significant digits. Runtimes are left out so the
    /// file is reproducible byte for byte.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let io = |e: std::io::Error| Error::Precondition(format!("{}: {e}", path.display()));
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        writeln!(w, "{}", self.csv_header()).map_err(io)?;
        for r in &self.rows {
            let mut vals = vec![format!("{:.16e}", r.parameter), format!("{:.16e}", r.metric)];
            vals.extend(self.columns.iter().map(|c| format!("{:.16e}", r.extra.get(c).copied().unwrap_or(f64::NAN))));
            writeln!(w, "{}", vals.join(",")).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn summary_line(&self) -> String {
        let fits: Vec<String> = self.fits.iter().map(|(k, f)| format!("{k} {:.4}", f.slope)).collect();
        format!("{}: {} ({})", self.study, if self.pass { "PASS" } else { "FAIL" }, fits.join(", "))
    }
}

/// Initial data for a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialData {
    /// Gas at rest with a smooth temperature bump, see [`gas_pulse`].
    Pulse { amplitude: f64, width: f64, center: f64 },
    /// A closed-form state sampled at `t = 0`.
    Manufactured { solution: ManufacturedSolution },
    Constant { state: Vec<f64> },
}

impl Default for InitialData {
    fn default() -> Self {
        InitialData::Pulse { amplitude: 0.2, width: 0.5, center: std::f64::consts::PI }
    }
}

impl InitialData {
    pub fn field(&self, grid: &Grid1D) -> Field {
        match self {
            InitialData::Pulse { amplitude, width, center } => gas_pulse(grid, *amplitude, *width, *center),
            InitialData::Manufactured { solution } => Field::from_fn(grid, 0.0, |x| solution.exact(x, 0.0)),
            InitialData::Constant { state } => Field::from_fn(grid, 0.0, |_| DVector::from_vec(state.clone())),
        }
    }
}

/// `direction * cos(wavenumber * x + phase)`; wavenumber zero gives a constant shift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Perturbation {
    pub direction: Vec<f64>,
    #[serde(default = "one")]
    pub wavenumber: f64,
    #[serde(default)]
    pub phase: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for Perturbation {
    fn default() -> Self {
        Perturbation { direction: vec![0.0, 0.5, 1.0], wavenumber: 1.0, phase: 0.0 }
    }
}

impl Perturbation {
    pub fn apply(&self, field: &Field, grid: &Grid1D, amplitude: f64) -> Field {
        let dir = DVector::from_vec(self.direction.clone());
        let cells = field
            .cells
            .iter()
            .enumerate()
            .map(|(i, c)| c + &dir * (amplitude * (self.wavenumber * grid.x(i) + self.phase).cos()))
            .collect();
        Field::new(field.time, cells)
    }
}

/// Time-stepping settings shared by the runs of a study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySolver {
    pub t_final: f64,
    #[serde(default)]
    pub output_every: Option<f64>,
    #[serde(default = "cfl")]
    pub cfl_hyp: f64,
    #[serde(default = "cfl")]
    pub cfl_par: f64,
}

fn cfl() -> f64 {
    0.4
}

impl StudySolver {
    pub fn new(t_final: f64) -> Self {
        StudySolver { t_final, output_every: None, cfl_hyp: cfl(), cfl_par: cfl() }
    }

    pub fn config(&self, eps: f64) -> SolverConfig {
        let mut c = SolverConfig::new(eps, self.t_final);
        c.output_every = self.output_every;
        c.cfl_hyp = self.cfl_hyp;
        c.cfl_par = self.cfl_par;
        c
    }
}

/// `sqrt(sum |u - ubar|^2 dx)` at each snapshot.
pub fn l2_difference(a: &Trajectory, b: &Trajectory) -> Result<Vec<f64>> {
    a.check_compatible(b)?;
    let dx = a.grid.dx();
    Ok(a.snapshots
        .iter()
        .zip(&b.snapshots)
        .map(|(fa, fb)| field_l2(fa, fb, dx))
        .collect())
}

fn field_l2(a: &Field, b: &Field, dx: f64) -> f64 {
    let sq: Vec<f64> = a.cells.iter().zip(&b.cells).map(|(x, y)| (x - y).norm_squared()).collect();
    (pairwise_sum(&sq) * dx).sqrt()
}

/// `integral eta(u|ubar) dx` at each snapshot.
pub fn relative_entropy_series<M: Model1D + ?Sized>(
    model: &M,
    traj: &Trajectory,
    traj_bar: &Trajectory,
) -> Result<Vec<f64>> {
    traj.check_compatible(traj_bar)?;
    let dx = traj.grid.dx();
    traj.snapshots
        .iter()
        .zip(&traj_bar.snapshots)
        .map(|(f, fb)| {
            let vals = f
                .cells
                .iter()
                .zip(&fb.cells)
                .map(|(u, ub)| Ok(Reference::new(model, ub)?.eta_rel(model, u)))
                .collect::<Result<Vec<_>>>()?;
            Ok(pairwise_sum(&vals) * dx)
        })
        .collect()
}

/// Largest factor by which `max |d_x u|` grows over the run.
pub fn steepening(traj: &Trajectory) -> f64 {
    let dx = traj.grid.dx();
    let slope = |f: &Field| periodic_dx_vec(&f.cells, dx).iter().fold(0.0_f64, |m, d| m.max(d.amax()));
    let s0 = slope(&traj.snapshots[0]);
    let smax = traj.snapshots.iter().map(slope).fold(0.0_f64, f64::max);
    if s0 > 0.0 { smax / s0 } else if smax > 0.0 { f64::INFINITY } else { 1.0 }
}

/// Samples a periodic trajectory at the cell centers of a grid `factor` times
/// coarser, where `factor` is even; values come from four-point midpoint
/// interpolation, accurate to fourth order.
pub fn restrict(traj: &Trajectory, factor: usize) -> Result<Trajectory> {
    if factor < 2 || !factor.is_multiple_of(2) || !traj.grid.cells().is_multiple_of(factor) {
        return Err(Error::param("factor", format!("{factor} must be even and divide the grid size")));
    }
    let n = traj.grid.cells();
    let coarse = Grid1D::new(n / factor, traj.grid.length())?;
    let snapshots = traj
        .snapshots
        .iter()
        .map(|f| {
            let c = &f.cells;
            let at = |j: isize| &c[j.rem_euclid(n as isize) as usize];
            let cells = (0..coarse.cells())
                .map(|i| {
                    // Coarse center i sits midway between fine cells j and j + 1.
                    let j = (i * factor + factor / 2 - 1) as isize;
                    (at(j) * 9.0 + at(j + 1) * 9.0 - at(j - 1) - at(j + 2)) / 16.0
                })
                .collect();
            Field::new(f.time, cells)
        })
        .collect();
    Ok(Trajectory { grid: coarse, dim: traj.dim, snapshots, sources: None, meta: traj.meta.clone() })
}

pub(crate) fn check_decades(name: &str, values: &[f64], min_points: usize) -> Result<()> {
    if values.len() < min_points {
        return Err(Error::param(name, format!("need at least {min_points} values")));
    }
    if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::param(name, "values must be positive"));
    }
    let (lo, hi) = values.iter().fold((f64::INFINITY, 0.0_f64), |(l, h), v| (l.min(*v), h.max(*v)));
    if hi / lo < 100.0 * (1.0 - 1e-12) {
        return Err(Error::param(name, "values must span at least two decades"));
    }
    Ok(())
}
