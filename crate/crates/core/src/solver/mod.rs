//! Periodic method-of-lines solver for `d_t A(u) + d_x F(u) = eps d_x(B(u) d_x u) + S`.
//!
//! The conserved variable `w = A(u)` is advanced with classical RK4; the
//! primitive state is recovered cell by cell through [`Model1D::recover`].
//! Spatial terms are second-order central differences on a uniform periodic grid.

mod io;
mod manufactured;

use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Model1D;

pub use io::{read_bin, state_columns, write_bin, write_csv};
pub use manufactured::{exact_trajectory, manufactured_case, ManufacturedCase, ManufacturedSolution, SineMode};

/// External forcing `S(x, t, u)`, added to the right-hand side in conserved form.
pub type SourceFn = Arc<dyn Fn(f64, f64, &DVector<f64>) -> DVector<f64> + Send + Sync>;

/// Uniform periodic grid with cell centers `x_i = (i + 1/2) dx`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    n: usize,
    length: f64,
}

impl Grid1D {
    pub const MIN_CELLS: usize = 8;

    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n < Self::MIN_CELLS {
            return Err(Error::param("grid.N", format!("need at least {} cells, got {n}", Self::MIN_CELLS)));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::param("grid.length", format!("must be positive, got {length}")));
        }
        Ok(Grid1D { n, length })
    }

    /// `n` cells on the torus of length `2 pi`.
    pub fn periodic(n: usize) -> Result<Self> {
        Self::new(n, std::f64::consts::TAU)
    }

    pub fn cells(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }
}

/// Cell states at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub time: f64,
    pub cells: Vec<DVector<f64>>,
}

impl Field {
    pub fn new(time: f64, cells: Vec<DVector<f64>>) -> Self {
        Field { time, cells }
    }

    pub fn from_fn(grid: &Grid1D, time: f64, f: impl Fn(f64) -> DVector<f64>) -> Self {
        Field { time, cells: grid.centers().into_iter().map(f).collect() }
    }

    pub fn validate<M: Model1D + ?Sized>(&self, model: &M) -> Result<()> {
        for (i, c) in self.cells.iter().enumerate() {
            if c.len() != model.dim() {
                return Err(Error::Shape(format!("cell {i} has {} components, model needs {}", c.len(), model.dim())));
            }
            if !model.admissible(c) {
                return Err(Error::Domain(format!("cell {i} state {:?} is not admissible", c.as_slice())));
            }
        }
        Ok(())
    }

    /// Midpoint-rule integral of a pointwise functional.
    pub fn integrate(&self, dx: f64, f: impl Fn(&DVector<f64>) -> f64) -> f64 {
        let vals: Vec<f64> = self.cells.iter().map(f).collect();
        crate::numeric::pairwise_sum(&vals) * dx
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub eps: f64,
    #[serde(default = "default_cfl")]
    pub cfl_hyp: f64,
    #[serde(default = "default_cfl")]
    pub cfl_par: f64,
    pub t_final: f64,
    /// Time between stored snapshots; defaults to `t_final / 100`.
    #[serde(default)]
    pub output_every: Option<f64>,
    /// Rusanov coefficient in `[0, 1]`; off when `None`.
    #[serde(default)]
    pub inviscid_dissipation: Option<f64>,
    #[serde(default = "default_halvings")]
    pub max_halvings: u32,
    /// Upper bound on the step, independent of the stability limits.
    #[serde(default)]
    pub dt_max: Option<f64>,
}

fn default_cfl() -> f64 {
    0.4
}

fn default_halvings() -> u32 {
    10
}

impl SolverConfig {
    pub fn new(eps: f64, t_final: f64) -> Self {
        SolverConfig {
            eps,
            cfl_hyp: default_cfl(),
            cfl_par: default_cfl(),
            t_final,
            output_every: None,
            inviscid_dissipation: None,
            max_halvings: default_halvings(),
            dt_max: None,
        }
    }

    pub fn with_output_every(mut self, dt: f64) -> Self {
        self.output_every = Some(dt);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return Err(Error::param("solver.eps", "must be finite and nonnegative"));
        }
        for (name, c) in [("solver.cfl_hyp", self.cfl_hyp), ("solver.cfl_par", self.cfl_par)] {
            if !(c > 0.0 && c <= 1.0) {
                return Err(Error::param(name, format!("must lie in (0, 1], got {c}")));
            }
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::param("solver.t_final", "must be positive"));
        }
        if let Some(o) = self.output_every {
            if !(o > 0.0 && o <= self.t_final) {
                return Err(Error::param("solver.output_every", "must lie in (0, t_final]"));
            }
        }
        if let Some(a) = self.inviscid_dissipation {
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::param("solver.inviscid_dissipation", "must lie in [0, 1]"));
            }
        }
        if let Some(d) = self.dt_max {
            if !(d > 0.0) {
                return Err(Error::param("solver.dt_max", "must be positive"));
            }
        }
        Ok(())
    }

    /// Snapshot times `0, h, 2h, ..., t_final` with `h` the output interval
    /// rounded so that it divides `t_final`.
    pub fn snapshot_times(&self) -> Vec<f64> {
        let h = self.output_every.unwrap_or(self.t_final / 100.0);
        let m = (self.t_final / h - 1e-9).ceil().max(1.0) as usize;
        (0..=m).map(|k| self.t_final * k as f64 / m as f64).collect()
    }
}

/// Provenance of a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub model: String,
    pub eps: f64,
    pub cfl_hyp: f64,
    pub cfl_par: f64,
    pub scheme: String,
    pub interface_average: String,
    pub rusanov: Option<f64>,
    pub steps: usize,
    pub rejected_steps: usize,
}

impl RunMeta {
    pub fn exact(model: &str, eps: f64) -> Self {
        RunMeta {
            model: model.to_string(),
            eps,
            cfl_hyp: f64::NAN,
            cfl_par: f64::NAN,
            scheme: "exact-samples".into(),
            interface_average: "none".into(),
            rusanov: None,
            steps: 0,
            rejected_steps: 0,
        }
    }
}

/// Snapshots on a uniform time grid.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: Grid1D,
    pub dim: usize,
    pub snapshots: Vec<Field>,
    /// External source `S` at each snapshot and cell, when one was applied.
    pub sources: Option<Vec<Vec<DVector<f64>>>>,
    pub meta: RunMeta,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|f| f.time).collect()
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn final_field(&self) -> &Field {
        self.snapshots.last().expect("trajectory has at least one snapshot")
    }

    /// Uniform snapshot spacing; errors if the stamps are not uniform.
    pub fn dt(&self) -> Result<f64> {
        let t = self.times();
        if t.len() < 2 {
            return Err(Error::Shape("need at least two snapshots".into()));
        }
        let h = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
        let uniform = t
            .windows(2)
            .all(|w| w[1] > w[0] && ((w[1] - w[0]) - h).abs() <= 1e-9 * h.max(1.0));
        if !uniform {
            return Err(Error::Shape("snapshot times are not uniformly spaced".into()));
        }
        Ok(h)
    }

    /// External source at snapshot `k`, cell `i` (zero when none was applied).
    pub fn source(&self, k: usize, i: usize) -> DVector<f64> {
        match &self.sources {
            Some(s) => s[k][i].clone(),
            None => DVector::zeros(self.dim),
        }
    }

    /// Checks that two trajectories share grid and time stamps.
    pub fn check_compatible(&self, other: &Trajectory) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::Shape(format!("grid mismatch: {:?} vs {:?}", self.grid, other.grid)));
        }
        if self.dim != other.dim {
            return Err(Error::Shape("state dimensions differ".into()));
        }
        let (a, b) = (self.times(), other.times());
        if a.len() != b.len() || a.iter().zip(&b).any(|(x, y)| (x - y).abs() > 1e-9 * x.abs().max(1.0)) {
            return Err(Error::Shape("snapshot times differ".into()));
        }
        Ok(())
    }

    /// `max |d_x u| * T` over all snapshots and components.
    pub fn steepness(&self) -> f64 {
        let dx = self.grid.dx();
        let t_final = self.final_field().time;
        let mut m = 0.0_f64;
        for f in &self.snapshots {
            for d in crate::numeric::periodic_dx_vec(&f.cells, dx) {
                m = m.max(d.amax());
            }
        }
        m * t_final
    }
}

/// Time derivative of the conserved array.
pub fn semidiscrete_rhs<M: Model1D + ?Sized>(
    model: &M,
    grid: &Grid1D,
    field: &Field,
    eps: f64,
    rusanov: Option<f64>,
    source: Option<&SourceFn>,
) -> Result<Vec<DVector<f64>>> {
    let n = field.cells.len();
    if n != grid.cells() {
        return Err(Error::Shape(format!("field has {n} cells, grid has {}", grid.cells())));
    }
    let dx = grid.dx();
    let u = &field.cells;
    let flux: Vec<DVector<f64>> = u.iter().map(|c| model.flux(c)).collect();
    let next = |i: usize| (i + 1) % n;

    // Interface quantities at i + 1/2.
    let mut iface: Vec<DVector<f64>> = Vec::with_capacity(n);
    for i in 0..n {
        let j = next(i);
        let mut g = DVector::zeros(model.dim());
        if eps > 0.0 {
            let mid = 0.5 * (&u[i] + &u[j]);
            g += model.viscosity(&mid) * (&u[j] - &u[i]) * (eps / (dx * dx));
        }
        if let Some(alpha) = rusanov.filter(|a| *a > 0.0) {
            let lam = model.wave_speed(&u[i]).max(model.wave_speed(&u[j]));
            g += (model.a(&u[j]) - model.a(&u[i])) * (0.5 * alpha * lam / dx);
        }
        iface.push(g);
    }

    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let (l, r) = ((i + n - 1) % n, next(i));
        if !model.admissible(&u[i]) {
            return Err(Error::StepRejected(format!("inadmissible state in cell {i}")));
        }
        let mut d = (&flux[r] - &flux[l]) * (-0.5 / dx);
        d += &iface[i] - &iface[l];
        if let Some(p) = model.production(&u[i]) {
            d += p;
        }
        if let Some(s) = source {
            d += s(grid.x(i), field.time, &u[i]);
        }
        if d.iter().any(|v| !v.is_finite()) {
            return Err(Error::StepRejected(format!("non-finite right-hand side in cell {i}")));
        }
        out.push(d);
    }
    Ok(out)
}

fn recover_field<M: Model1D + ?Sized>(
    model: &M,
    w: &[DVector<f64>],
    guess: &[DVector<f64>],
    time: f64,
) -> Result<Field> {
    let cells = w
        .iter()
        .zip(guess)
        .enumerate()
        .map(|(i, (wi, gi))| {
            model
                .recover(wi, gi)
                .map_err(|e| Error::StepRejected(format!("cell {i}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Field { time, cells })
}

/// One classical RK4 step on `w = A(u)`.
pub fn step_rk4<M: Model1D + ?Sized>(
    model: &M,
    grid: &Grid1D,
    field: &Field,
    dt: f64,
    eps: f64,
    rusanov: Option<f64>,
    source: Option<&SourceFn>,
) -> Result<Field> {
    let w0: Vec<DVector<f64>> = field.cells.iter().map(|c| model.a(c)).collect();
    let t0 = field.time;
    let k1 = semidiscrete_rhs(model, grid, field, eps, rusanov, source)?;
    let stage = |k: &[DVector<f64>], h: f64| -> Vec<DVector<f64>> {
        w0.iter().zip(k).map(|(w, d)| w + d * h).collect()
    };
    let f2 = recover_field(model, &stage(&k1, 0.5 * dt), &field.cells, t0 + 0.5 * dt)?;
    let k2 = semidiscrete_rhs(model, grid, &f2, eps, rusanov, source)?;
    let f3 = recover_field(model, &stage(&k2, 0.5 * dt), &f2.cells, t0 + 0.5 * dt)?;
    let k3 = semidiscrete_rhs(model, grid, &f3, eps, rusanov, source)?;
    let f4 = recover_field(model, &stage(&k3, dt), &f3.cells, t0 + dt)?;
    let k4 = semidiscrete_rhs(model, grid, &f4, eps, rusanov, source)?;
    let w1: Vec<DVector<f64>> = (0..w0.len())
        .map(|i| &w0[i] + (&k1[i] + 2.0 * &k2[i] + 2.0 * &k3[i] + &k4[i]) * (dt / 6.0))
        .collect();
    recover_field(model, &w1, &f4.cells, t0 + dt)
}

/// The stable step for the current field.
pub fn stable_dt<M: Model1D + ?Sized>(model: &M, grid: &Grid1D, field: &Field, config: &SolverConfig) -> f64 {
    let dx = grid.dx();
    let (mut lam, mut b) = (0.0_f64, 0.0_f64);
    for c in &field.cells {
        lam = lam.max(model.wave_speed(c));
        if config.eps > 0.0 {
            b = b.max(model.diffusion_norm(c));
        }
    }
    let mut dt = config.dt_max.unwrap_or(f64::INFINITY);
    if lam > 0.0 {
        dt = dt.min(config.cfl_hyp * dx / lam);
    }
    if config.eps * b > 0.0 {
        dt = dt.min(config.cfl_par * dx * dx / (2.0 * config.eps * b));
    }
    if !dt.is_finite() {
        dt = config.cfl_hyp * dx;
    }
    dt
}

fn record_sources(grid: &Grid1D, field: &Field, source: Option<&SourceFn>) -> Option<Vec<DVector<f64>>> {
    source.map(|s| {
        field
            .cells
            .iter()
            .enumerate()
            .map(|(i, c)| s(grid.x(i), field.time, c))
            .collect()
    })
}

/// Integrates from `init` to `config.t_final`, storing uniform snapshots.
pub fn simulate<M: Model1D + ?Sized>(
    model: &M,
    grid: &Grid1D,
    init: &Field,
    config: &SolverConfig,
    source: Option<&SourceFn>,
) -> Result<Trajectory> {
    config.validate()?;
    init.validate(model)?;
    if init.cells.len() != grid.cells() {
        return Err(Error::Shape("initial field does not match grid".into()));
    }
    let rusanov = config.inviscid_dissipation;
    let targets = config.snapshot_times();
    let mut field = Field { time: 0.0, cells: init.cells.clone() };
    let mut snapshots = vec![field.clone()];
    let mut sources: Option<Vec<Vec<DVector<f64>>>> =
        record_sources(grid, &field, source).map(|s| vec![s]);
    let (mut steps, mut rejected) = (0usize, 0usize);

    for &target in &targets[1..] {
        while field.time < target - 1e-12 * target.max(1.0) {
            let mut dt = stable_dt(model, grid, &field, config).min(target - field.time);
            let mut attempt = 0;
            loop {
                match step_rk4(model, grid, &field, dt, config.eps, rusanov, source) {
                    Ok(next) => {
                        field = next;
                        break;
                    }
                    Err(Error::StepRejected(reason)) => {
                        rejected += 1;
                        attempt += 1;
                        if attempt > config.max_halvings {
                            return Err(Error::Aborted {
                                time: field.time,
                                reason: format!("step rejected after {} halvings: {reason}", config.max_halvings),
                            });
                        }
                        dt *= 0.5;
                    }
                    Err(e) => return Err(e),
                }
            }
            steps += 1;
        }
        field.time = target;
        if let Some(s) = sources.as_mut() {
            s.push(record_sources(grid, &field, source).unwrap_or_default());
        }
        snapshots.push(field.clone());
    }

    Ok(Trajectory {
        grid: *grid,
        dim: model.dim(),
        snapshots,
        sources,
        meta: RunMeta {
            model: model.name().to_string(),
            eps: config.eps,
            cfl_hyp: config.cfl_hyp,
            cfl_par: config.cfl_par,
            scheme: "central-fd2/rk4".into(),
            interface_average: "arithmetic-state".into(),
            rusanov,
            steps,
            rejected_steps: rejected,
        },
    })
}

/// Periodic smooth temperature pulse on a gas at rest:
/// `u = 1`, `v = 0`, `theta = 1 + amp * exp((cos(x - x0) - 1) / width^2)`.
pub fn gas_pulse(grid: &Grid1D, amp: f64, width: f64, x0: f64) -> Field {
    let k = std::f64::consts::TAU / grid.length();
    Field::from_fn(grid, 0.0, |x| {
        let th = 1.0 + amp * (((k * (x - x0)).cos() - 1.0) / (width * width)).exp();
        DVector::from_vec(vec![1.0, 0.0, th])
    })
}
