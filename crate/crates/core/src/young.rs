//! Atomic Young measures and averaged relative quantities.
//!
//! For a measure `nu` and a reference `ubar`:
//!
//! ```text
//! H(nu|ubar) = <nu, eta> - eta(ubar) - G(ubar).(<nu, A> - A(ubar))          = <nu, eta(.|ubar)>
//! Z(nu|ubar) = <nu, F> - F(ubar) - dF(ubar) dA(ubar)^-1 (<nu, A> - A(ubar)) = <nu, F(.|ubar)>
//! ```

use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{InitialData, Perturbation, StudyCheck, StudyReport, StudyRow, StudySolver};
use crate::model::{Model1D, StateVector};
use crate::numeric::pairwise_sum;
use crate::relent::Reference;
use crate::solver::{simulate, Grid1D, Trajectory};

/// Tolerance on the weight sum of each cell.
pub const WEIGHT_TOL: f64 = 1e-12;
/// Tolerance on the agreement of the two assembly routes.
pub const DUAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Atom {
    pub w: f64,
    pub state: StateVector,
}

/// A finitely supported probability measure per spatial cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<Atom>>", into = "Vec<Vec<Atom>>")]
pub struct YoungMeasureAtomic {
    cells: Vec<Vec<Atom>>,
}

impl TryFrom<Vec<Vec<Atom>>> for YoungMeasureAtomic {
    type Error = Error;
    fn try_from(cells: Vec<Vec<Atom>>) -> Result<Self> {
        Self::new(cells)
    }
}

impl From<YoungMeasureAtomic> for Vec<Vec<Atom>> {
    fn from(nu: YoungMeasureAtomic) -> Self {
        nu.cells
    }
}

impl YoungMeasureAtomic {
    pub fn new(cells: Vec<Vec<Atom>>) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::param("measure", "need at least one cell"));
        }
        let dim = cells[0].first().map_or(0, |a| a.state.len());
        for (i, atoms) in cells.iter().enumerate() {
            if atoms.is_empty() {
                return Err(Error::param("measure", format!("cell {i} has no atoms")));
            }
            if atoms.iter().any(|a| !(a.w >= 0.0 && a.w.is_finite())) {
                return Err(Error::param("measure", format!("cell {i} has a negative or non-finite weight")));
            }
            if atoms.iter().any(|a| a.state.len() != dim) {
                return Err(Error::Shape(format!("cell {i} mixes state dimensions")));
            }
            let total: f64 = atoms.iter().map(|a| a.w).sum();
            if (total - 1.0).abs() > WEIGHT_TOL {
                return Err(Error::param("measure", format!("cell {i} weights sum to {total}, not 1")));
            }
        }
        Ok(YoungMeasureAtomic { cells })
    }

    /// One Dirac mass per cell.
    pub fn dirac(states: &[DVector<f64>]) -> Result<Self> {
        let cells = states
            .iter()
            .map(|s| Ok(vec![Atom { w: 1.0, state: StateVector::from_dvector(s.clone())? }]))
            .collect::<Result<Vec<_>>>()?;
        Self::new(cells)
    }

    /// Cell `i` carries the atoms `fields[j][i]` with weights `weights[j]`.
    pub fn from_fields(weights: &[f64], fields: &[&[DVector<f64>]]) -> Result<Self> {
        if weights.len() != fields.len() || fields.is_empty() {
            return Err(Error::Shape("one weight per field required".into()));
        }
        let n = fields[0].len();
        if fields.iter().any(|f| f.len() != n) {
            return Err(Error::Shape("fields differ in length".into()));
        }
        let cells = (0..n)
            .map(|i| {
                weights
                    .iter()
                    .zip(fields)
                    .map(|(&w, f)| Ok(Atom { w, state: StateVector::from_dvector(f[i].clone())? }))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(cells)
    }

    pub fn cells(&self) -> &[Vec<Atom>] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.cells[0][0].state.len()
    }

    /// `sum_j w_j lambda_j` in cell `i`.
    pub fn barycenter(&self, i: usize) -> DVector<f64> {
        self.cells[i]
            .iter()
            .fold(DVector::zeros(self.dim()), |acc, a| acc + &*a.state * a.w)
    }
}

/// Cellwise `<nu, f>` for a vector-valued `f`.
pub fn avg(nu: &YoungMeasureAtomic, f: impl Fn(&DVector<f64>) -> DVector<f64>) -> Vec<DVector<f64>> {
    nu.cells
        .iter()
        .map(|atoms| {
            let mut it = atoms.iter();
            let first = it.next().expect("validated nonempty");
            it.fold(f(&first.state) * first.w, |acc, a| acc + f(&a.state) * a.w)
        })
        .collect()
}

/// Cellwise `<nu, f>` for a scalar `f`.
pub fn avg_scalar(nu: &YoungMeasureAtomic, f: impl Fn(&DVector<f64>) -> f64) -> Vec<f64> {
    nu.cells
        .iter()
        .map(|atoms| pairwise_sum(&atoms.iter().map(|a| a.w * f(&a.state)).collect::<Vec<_>>()))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AveragedRelEn {
    /// `H` per cell from the averaged formula.
    pub h: Vec<f64>,
    /// `<nu, eta(.|ubar)>` per cell.
    pub h_direct: Vec<f64>,
    pub z: Vec<DVector<f64>>,
    pub z_direct: Vec<DVector<f64>>,
    pub h_gap: f64,
    pub z_gap: f64,
    /// `<nu, eta(A^-1(.))> - eta(A^-1(<nu, A>))` per cell.
    pub jensen_gap: Vec<f64>,
}

impl AveragedRelEn {
    pub fn total_h(&self) -> f64 {
        pairwise_sum(&self.h)
    }
}

/// `H` and `Z` by both routes, plus the Jensen gap in `A`-coordinates.
///
/// A disagreement of the two routes beyond [`DUAL_TOL`] (relative to
/// `max(1, |value|)`) is an error.
pub fn averaged_relent<M: Model1D + ?Sized>(
    nu: &YoungMeasureAtomic,
    model: &M,
    ubar: &DVector<f64>,
) -> Result<AveragedRelEn> {
    let q = assemble(nu, model, ubar)?;
    if q.h_gap > DUAL_TOL || q.z_gap > DUAL_TOL {
        return Err(Error::Precondition(format!(
            "averaged formulas disagree with the direct averages: H by {:e}, Z by {:e}",
            q.h_gap, q.z_gap
        )));
    }
    Ok(q)
}

fn assemble<M: Model1D + ?Sized>(nu: &YoungMeasureAtomic, model: &M, ubar: &DVector<f64>) -> Result<AveragedRelEn> {
    if nu.dim() != model.dim() {
        return Err(Error::Shape("measure and model dimensions differ".into()));
    }
    let r = Reference::new(model, ubar)?;
    let a_bar = model.a(ubar);
    let f_bar = model.flux(ubar);
    let eta_bar = model.entropy(ubar);
    let jf = model.jac_flux(ubar);
    let lu = model.jac_a(ubar).lu();

    let eta_avg = avg_scalar(nu, |s| model.entropy(s));
    let a_avg = avg(nu, |s| model.a(s));
    let f_avg = avg(nu, |s| model.flux(s));
    let h_direct = avg_scalar(nu, |s| r.eta_rel(model, s));
    let z_direct = avg(nu, |s| r.eval(model, s).f_rel);

    let (mut h, mut z, mut jensen) = (Vec::new(), Vec::new(), Vec::new());
    let (mut h_gap, mut z_gap) = (0.0_f64, 0.0_f64);
    for i in 0..nu.len() {
        let da = &a_avg[i] - &a_bar;
        let hi = eta_avg[i] - eta_bar - r.multiplier().dot(&da);
        let y = lu.solve(&da).ok_or_else(|| Error::SingularGradA { state: ubar.iter().copied().collect() })?;
        let zi = &f_avg[i] - &f_bar - &jf * y;
        h_gap = h_gap.max((hi - h_direct[i]).abs() / hi.abs().max(1.0));
        z_gap = z_gap.max((&zi - &z_direct[i]).amax() / zi.amax().max(1.0));
        let guess = nu.barycenter(i);
        let u_star = model.recover(&a_avg[i], &guess)?;
        jensen.push(eta_avg[i] - model.entropy(&u_star));
        h.push(hi);
        z.push(zi);
    }
    Ok(AveragedRelEn { h, h_direct, z, z_direct, h_gap, z_gap, jensen_gap: jensen })
}

/// Random measures with `cells` cells and 1 to `max_atoms` atoms per cell, states
/// uniform in the box `[lower, upper]`.
pub fn random_measures(
    lower: &[f64],
    upper: &[f64],
    count: usize,
    cells: usize,
    max_atoms: usize,
    seed: u64,
) -> Result<Vec<YoungMeasureAtomic>> {
    if lower.len() != upper.len() || lower.is_empty() || lower.iter().zip(upper).any(|(l, u)| !(l <= u)) {
        return Err(Error::param("measures.box", "need lower <= upper componentwise"));
    }
    if cells == 0 || max_atoms == 0 {
        return Err(Error::param("measures", "cells and max_atoms must be positive"));
    }
    (0..count)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64 + 1);
            let cells = (0..cells)
                .map(|_| {
                    let m = rng.random_range(1..=max_atoms);
                    let raw: Vec<f64> = (0..m).map(|_| rng.random::<f64>() + 1e-3).collect();
                    let total: f64 = raw.iter().sum();
                    let mut w: Vec<f64> = raw.iter().map(|r| r / total).collect();
                    let head: f64 = w[..m - 1].iter().sum();
                    w[m - 1] = 1.0 - head;
                    w.into_iter()
                        .map(|w| {
                            let s = lower.iter().zip(upper).map(|(l, u)| l + (u - l) * rng.random::<f64>()).collect();
                            Ok(Atom { w, state: StateVector::new(s)? })
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            YoungMeasureAtomic::new(cells)
        })
        .collect()
}

/// Worst-case dual-formula gaps and Jensen margins over a suite of measures.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct YoungSuiteReport {
    pub samples: usize,
    pub max_h_gap: f64,
    pub max_z_gap: f64,
    pub min_jensen_gap: f64,
    pub jensen_violations: usize,
    pub pass: bool,
}

/// Evaluates every measure against `ubar`. Jensen holds when the gap is at
/// least `-DUAL_TOL * max(1, |<nu, eta>|)`.
pub fn young_suite<M: Model1D + ?Sized>(
    nus: &[YoungMeasureAtomic],
    model: &M,
    ubar: &DVector<f64>,
) -> Result<(YoungSuiteReport, Vec<AveragedRelEn>)> {
    let per = nus.par_iter().map(|nu| assemble(nu, model, ubar)).collect::<Result<Vec<_>>>()?;
    let mut r = YoungSuiteReport {
        samples: 0,
        max_h_gap: 0.0,
        max_z_gap: 0.0,
        min_jensen_gap: f64::INFINITY,
        jensen_violations: 0,
        pass: false,
    };
    for (nu, q) in nus.iter().zip(&per) {
        r.max_h_gap = r.max_h_gap.max(q.h_gap);
        r.max_z_gap = r.max_z_gap.max(q.z_gap);
        let eta_avg = avg_scalar(nu, |s| model.entropy(s));
        for (g, e) in q.jensen_gap.iter().zip(&eta_avg) {
            r.samples += 1;
            r.min_jensen_gap = r.min_jensen_gap.min(*g);
            if *g < -DUAL_TOL * e.abs().max(1.0) || g.is_nan() {
                r.jensen_violations += 1;
            }
        }
    }
    r.pass = r.samples > 0 && r.max_h_gap <= DUAL_TOL && r.max_z_gap <= DUAL_TOL && r.jensen_violations == 0;
    Ok((r, per))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZBoundReport {
    /// `max |Z| / H` over cells with `H > 0`.
    pub c1: f64,
    pub samples: usize,
    pub skipped: usize,
    /// `(measure index, cell)` of the maximizer.
    pub witness: Option<(usize, usize)>,
    pub pass: bool,
}

/// Empirical constant in `|Z| <= C H` over a suite of measures.
pub fn bound_check_z_le_h<M: Model1D + ?Sized>(
    nus: &[YoungMeasureAtomic],
    model: &M,
    ubar: &DVector<f64>,
    m_radius: f64,
) -> Result<ZBoundReport> {
    if !(ubar.norm() <= m_radius) {
        return Err(Error::param("ubar", format!("|ubar| = {} exceeds M = {m_radius}", ubar.norm())));
    }
    let per = nus
        .par_iter()
        .map(|nu| averaged_relent(nu, model, ubar))
        .collect::<Result<Vec<_>>>()?;
    let (mut c1, mut samples, mut skipped, mut witness) = (0.0_f64, 0, 0, None);
    for (k, q) in per.iter().enumerate() {
        for (i, (h, z)) in q.h.iter().zip(&q.z).enumerate() {
            if *h <= 0.0 {
                skipped += 1;
                continue;
            }
            samples += 1;
            let ratio = z.norm() / h;
            if ratio > c1 || witness.is_none() {
                c1 = c1.max(ratio);
                witness = Some((k, i));
            }
        }
    }
    Ok(ZBoundReport { c1, samples, skipped, witness, pass: c1.is_finite() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GronwallConfig {
    pub cells: usize,
    #[serde(default = "tau")]
    pub length: f64,
    #[serde(default)]
    pub init: InitialData,
    /// Shape of the oscillation: atoms `ubar_0 +- h * profile` with weight one half.
    #[serde(default)]
    pub perturbation: Perturbation,
    /// Requested values of `integral H dx` at `t = 0`; amplitudes are solved for.
    pub h0_targets: Vec<f64>,
    pub eps: f64,
    pub solver: StudySolver,
    #[serde(default = "unit_band")]
    pub band: (f64, f64),
    /// Allowed spread of the fitted exponential rate, relative to `max(|C|, 1/T)`.
    #[serde(default = "rate_spread")]
    pub rate_spread: f64,
}

fn tau() -> f64 {
    std::f64::consts::TAU
}

fn unit_band() -> (f64, f64) {
    (0.9, 1.1)
}

fn rate_spread() -> f64 {
    0.2
}

impl GronwallConfig {
    pub fn desk() -> Self {
        GronwallConfig {
            cells: 128,
            length: tau(),
            init: InitialData::default(),
            perturbation: Perturbation::default(),
            h0_targets: vec![1e-2, 1e-3, 1e-4],
            eps: 1e-3,
            solver: StudySolver::new(0.2),
            band: unit_band(),
            rate_spread: rate_spread(),
        }
    }
}

fn integrated_h<M: Model1D + ?Sized>(
    model: &M,
    atoms: &[&Trajectory],
    strong: &Trajectory,
    k: usize,
) -> Result<f64> {
    let fields: Vec<&[DVector<f64>]> = atoms.iter().map(|t| t.snapshots[k].cells.as_slice()).collect();
    let weights = vec![1.0 / atoms.len() as f64; atoms.len()];
    let nu = YoungMeasureAtomic::from_fields(&weights, &fields)?;
    let dx = strong.grid.dx();
    let vals = strong.snapshots[k]
        .cells
        .iter()
        .enumerate()
        .map(|(i, ub)| {
            let r = Reference::new(model, ub)?;
            Ok(pairwise_sum(&nu.cells[i].iter().map(|a| a.w * r.eta_rel(model, &a.state)).collect::<Vec<_>>()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(pairwise_sum(&vals) * dx)
}

/// Amplitude `h` with `integral H(0) dx` equal to `target`, by bisection.
fn amplitude_for<M: Model1D + ?Sized>(
    model: &M,
    grid: &Grid1D,
    cfg: &GronwallConfig,
    target: f64,
) -> Result<f64> {
    let base = cfg.init.field(grid);
    let h0 = |h: f64| -> Option<f64> {
        let plus = cfg.perturbation.apply(&base, grid, h);
        let minus = cfg.perturbation.apply(&base, grid, -h);
        if plus.validate(model).is_err() || minus.validate(model).is_err() {
            return None;
        }
        let vals: Option<Vec<f64>> = base
            .cells
            .iter()
            .enumerate()
            .map(|(i, ub)| {
                let r = Reference::new(model, ub).ok()?;
                Some(0.5 * (r.eta_rel(model, &plus.cells[i]) + r.eta_rel(model, &minus.cells[i])))
            })
            .collect();
        vals.map(|v| pairwise_sum(&v) * grid.dx())
    };
    let mut hi = 1.0;
    while h0(hi).is_none_or(|v| v < target) {
        if h0(hi).is_none() {
            return Err(Error::param("h0_targets", format!("{target} is not reachable with admissible atoms")));
        }
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::param("h0_targets", format!("{target} is not reachable")));
        }
    }
    let mut lo = 0.0;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        match h0(mid) {
            Some(v) if v < target => lo = mid,
            _ => hi = mid,
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Two-atom oscillations collapsing onto `ubar_0`: each atom is evolved as its
/// own run, `H` is measured against the run from `ubar_0`.
pub fn gronwall_decay_demo<M: Model1D + ?Sized>(model: &M, cfg: &GronwallConfig) -> Result<StudyReport> {
    if cfg.h0_targets.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
        return Err(Error::param("h0_targets", "targets must be nonnegative"));
    }
    if cfg.perturbation.direction.len() != model.dim() {
        return Err(Error::param("perturbation.direction", format!("need {} components", model.dim())));
    }
    let grid = Grid1D::new(cfg.cells, cfg.length)?;
    let config = cfg.solver.config(cfg.eps);
    let base = cfg.init.field(&grid);
    let strong = simulate(model, &grid, &base, &config, None)?;
    let amplitudes = cfg
        .h0_targets
        .iter()
        .map(|&t| if t == 0.0 { Ok(0.0) } else { amplitude_for(model, &grid, cfg, t) })
        .collect::<Result<Vec<_>>>()?;

    let runs = amplitudes
        .par_iter()
        .map(|&h| -> Result<(f64, Vec<f64>, f64)> {
            let t0 = Instant::now();
            if h == 0.0 {
                return Ok((h, vec![0.0; strong.len()], 0.0));
            }
            let plus = simulate(model, &grid, &cfg.perturbation.apply(&base, &grid, h), &config, None)?;
            let minus = simulate(model, &grid, &cfg.perturbation.apply(&base, &grid, -h), &config, None)?;
            let series = (0..strong.len())
                .map(|k| integrated_h(model, &[&plus, &minus], &strong, k))
                .collect::<Result<Vec<_>>>()?;
            Ok((h, series, t0.elapsed().as_secs_f64()))
        })
        .collect::<Result<Vec<_>>>()?;

    let times = strong.times();
    let t_final = *times.last().unwrap();
    let mut report = StudyReport::new("gronwall-decay", &["amplitude", "rate", "sup_ratio"]);
    let mut rates = Vec::new();
    for (h, series, secs) in &runs {
        let h0 = series[0];
        let (rate, sup_ratio) = if h0 > 0.0 {
            let rate = series
                .iter()
                .zip(&times)
                .skip(1)
                .map(|(v, t)| (v / h0).ln() / t)
                .fold(f64::NEG_INFINITY, f64::max);
            rates.push(rate);
            (rate, series.iter().map(|v| v / h0).fold(0.0_f64, f64::max))
        } else {
            report.warnings.push("zero initial oscillation: H vanishes identically".into());
            (f64::NAN, f64::NAN)
        };
        report.rows.push(StudyRow {
            parameter: h0,
            metric: *series.last().unwrap(),
            runtime_s: *secs,
            extra: BTreeMap::from([
                ("amplitude".into(), *h),
                ("rate".into(), rate),
                ("sup_ratio".into(), sup_ratio),
            ]),
        });
    }
    report.sort_rows();
    let points: Vec<(f64, f64)> = report
        .rows
        .iter()
        .filter(|r| r.parameter > 0.0 && r.metric > 0.0)
        .map(|r| (r.parameter, r.metric))
        .collect();
    match crate::experiments::fit_rate(&points) {
        Ok(fit) => {
            report.checks.push(StudyCheck::band("slope", fit.slope, cfg.band));
            report.fits.insert("slope".into(), fit);
        }
        Err(e) => {
            report.warnings.push(format!("slope: no rate fit ({e})"));
            report.checks.push(StudyCheck::band("slope", f64::NAN, cfg.band));
        }
    }
    if !rates.is_empty() {
        let (lo, hi) = rates.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), r| (l.min(*r), h.max(*r)));
        let scale = lo.abs().max(hi.abs()).max(1.0 / t_final);
        report.constants.insert("C".into(), hi);
        report.checks.push(StudyCheck::band("rate_spread", (hi - lo) / scale, (0.0, cfg.rate_spread)));
    }
    report.finish();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypotheses::h3_matrix;
    use crate::model::{embed_gas_as_general, ideal_gas_model, FnModel};
    use nalgebra::DMatrix;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_vec(xs.to_vec())
    }

    fn atom(w: f64, s: &[f64]) -> Atom {
        Atom { w, state: StateVector::new(s.to_vec()).unwrap() }
    }

    fn quadratic(flux_linear: bool) -> FnModel {
        let b = FnModel::builder(1)
            .entropy(|u| u[0] * u[0])
            .multiplier(|u| u * 2.0)
            .jac_a(|_| DMatrix::identity(1, 1))
            .jac_multiplier(|_| DMatrix::identity(1, 1) * 2.0);
        if flux_linear {
            b.flux(|u| u.clone()).entropy_flux(|u| u[0] * u[0]).jac_flux(|_| DMatrix::identity(1, 1)).build()
        } else {
            b.flux(|u| v(&[0.5 * u[0] * u[0]]))
                .entropy_flux(|u| 2.0 / 3.0 * u[0].powi(3))
                .jac_flux(|u| DMatrix::from_element(1, 1, u[0]))
                .build()
        }
    }

    #[test]
    fn weights_must_sum_to_one() {
        assert!(YoungMeasureAtomic::new(vec![vec![atom(0.5, &[1.0]), atom(0.4, &[2.0])]]).is_err());
        assert!(YoungMeasureAtomic::new(vec![vec![atom(-0.5, &[1.0]), atom(1.5, &[2.0])]]).is_err());
        let nu = YoungMeasureAtomic::new(vec![vec![atom(0.5, &[1.0]), atom(0.5, &[2.0])]]).unwrap();
        assert_eq!(nu.barycenter(0), v(&[1.5]));
    }

    #[test]
    fn json_round_trip() {
        let nu = YoungMeasureAtomic::new(vec![vec![atom(0.25, &[1.0, 2.0]), atom(0.75, &[0.0, 1.0])]]).unwrap();
        let s = serde_json::to_string(&nu).unwrap();
        assert_eq!(s, r#"[[{"w":0.25,"state":[1.0,2.0]},{"w":0.75,"state":[0.0,1.0]}]]"#);
        let back: YoungMeasureAtomic = serde_json::from_str(&s).unwrap();
        assert_eq!(back, nu);
        assert!(serde_json::from_str::<YoungMeasureAtomic>(r#"[[{"w":0.5,"state":[1.0]}]]"#).is_err());
    }

    #[test]
    fn averages() {
        let dirac = YoungMeasureAtomic::dirac(&[v(&[3.0])]).unwrap();
        assert_eq!(avg_scalar(&dirac, |s| s[0].sin())[0], 3f64.sin());
        let two = YoungMeasureAtomic::new(vec![vec![atom(0.5, &[1.0, -1.0]), atom(0.5, &[3.0, 5.0])]]).unwrap();
        assert_eq!(avg(&two, |s| s * 2.0 + v(&[1.0, 1.0]))[0], v(&[5.0, 5.0]));
        let sq = avg_scalar(&two, |s| s.norm_squared())[0];
        assert_eq!(sq, 0.5 * 2.0 + 0.5 * 34.0);
        assert!(sq > two.barycenter(0).norm_squared());
    }

    #[test]
    fn dirac_measures_reduce_to_pointwise() {
        let sys = embed_gas_as_general(ideal_gas_model(1.0, 1.0).unwrap());
        let ubar = v(&[1.0, 0.0, 1.0]);
        let at_ubar = averaged_relent(&YoungMeasureAtomic::dirac(std::slice::from_ref(&ubar)).unwrap(), &sys, &ubar).unwrap();
        assert_eq!(at_ubar.h[0], 0.0);
        assert_eq!(at_ubar.z[0].amax(), 0.0);
        let u = v(&[2.0, 0.3, 1.4]);
        let q = averaged_relent(&YoungMeasureAtomic::dirac(std::slice::from_ref(&u)).unwrap(), &sys, &ubar).unwrap();
        let pointwise = crate::relent::relative_quantities(&sys, &u, &ubar).unwrap();
        assert!((q.h[0] - pointwise.eta_rel).abs() < 1e-14);
        assert!((&q.z[0] - &pointwise.f_rel).amax() < 1e-14);
    }

    #[test]
    fn two_atom_oscillation_matches_quadratic_expansion() {
        let sys = embed_gas_as_general(ideal_gas_model(1.0, 1.0).unwrap());
        let ubar = v(&[1.2, 0.1, 0.9]);
        let d = 0.1;
        let e1 = v(&[1.0, 0.0, 0.0]);
        let nu = YoungMeasureAtomic::from_fields(
            &[0.5, 0.5],
            &[&[&ubar + &e1 * d], &[&ubar - &e1 * d]],
        )
        .unwrap();
        let q = averaged_relent(&nu, &sys, &ubar).unwrap();
        let expect = 0.5 * d * d * h3_matrix(&sys, &ubar)[(0, 0)];
        assert!(q.h[0] > 0.0);
        // Symmetric atoms cancel the cubic term, leaving O(d^4).
        assert!((q.h[0] - expect).abs() < 0.02 * expect, "{} vs {expect}", q.h[0]);
        assert!(q.jensen_gap[0] >= -1e-12);
    }

    #[test]
    fn z_bound_on_burgers_type_model_is_one_half() {
        let m = quadratic(false);
        let ubar = v(&[0.3]);
        let atoms: Vec<f64> = (0..41).map(|k| -5.0 + 0.25 * k as f64).collect();
        let nus: Vec<YoungMeasureAtomic> = atoms
            .iter()
            .flat_map(|&a| atoms.iter().map(move |&b| (a, b)))
            .map(|(a, b)| YoungMeasureAtomic::new(vec![vec![atom(0.3, &[a]), atom(0.7, &[b])]]).unwrap())
            .collect();
        let r = bound_check_z_le_h(&nus, &m, &ubar, 1.0).unwrap();
        // Brute force: F(u|ubar) = (u - ubar)^2 / 2 and eta(u|ubar) = (u - ubar)^2.
        let oracle = nus
            .iter()
            .filter_map(|nu| {
                let z: f64 = nu.cells()[0].iter().map(|a| a.w * 0.5 * (a.state[0] - 0.3).powi(2)).sum();
                let h: f64 = nu.cells()[0].iter().map(|a| a.w * (a.state[0] - 0.3).powi(2)).sum();
                (h > 0.0).then_some(z / h)
            })
            .fold(0.0_f64, f64::max);
        assert!((r.c1 - oracle).abs() < 1e-12 && (r.c1 - 0.5).abs() < 1e-12, "{}", r.c1);
        assert!(r.pass);
        let linear = bound_check_z_le_h(&nus, &quadratic(true), &ubar, 1.0).unwrap();
        assert!(linear.c1 < 1e-12);
    }

    #[test]
    fn random_gas_measures_satisfy_duality_and_jensen() {
        let sys = embed_gas_as_general(ideal_gas_model(1.0, 1.0).unwrap());
        let nus = random_measures(&[0.5, -1.0, 0.5], &[2.0, 1.0, 2.0], 200, 2, 4, 7).unwrap();
        assert!(nus.iter().all(|nu| nu.cells().iter().all(|c| (c.iter().map(|a| a.w).sum::<f64>() - 1.0).abs() <= 1e-12)));
        let (r, _) = young_suite(&nus, &sys, &v(&[1.0, 0.0, 1.0])).unwrap();
        assert!(r.pass, "{r:?}");
        assert_eq!(r.samples, 400);
        assert!(r.min_jensen_gap > -1e-12);
        let again = random_measures(&[0.5, -1.0, 0.5], &[2.0, 1.0, 2.0], 200, 2, 4, 7).unwrap();
        assert_eq!(again, nus);
    }

    #[test]
    fn jensen_fails_for_a_concave_entropy() {
        let m = FnModel::builder(1)
            .flux(|u| u.clone())
            .entropy(|u| -u[0] * u[0])
            .entropy_flux(|u| -u[0] * u[0])
            .multiplier(|u| u * -2.0)
            .jac_a(|_| DMatrix::identity(1, 1))
            .jac_flux(|_| DMatrix::identity(1, 1))
            .jac_multiplier(|_| DMatrix::identity(1, 1) * -2.0)
            .build();
        let nus = random_measures(&[-1.0], &[1.0], 20, 1, 3, 1).unwrap();
        let (r, _) = young_suite(&nus, &m, &v(&[0.0])).unwrap();
        assert!(!r.pass && r.jensen_violations > 0);
    }

    #[test]
    fn dirac_suite_at_reference_is_vacuous() {
        let m = quadratic(false);
        let ubar = v(&[0.3]);
        let nus = vec![YoungMeasureAtomic::dirac(&[ubar.clone(), ubar.clone()]).unwrap()];
        let r = bound_check_z_le_h(&nus, &m, &ubar, 1.0).unwrap();
        assert_eq!((r.samples, r.skipped), (0, 2));
        assert!(r.pass);
        assert!(bound_check_z_le_h(&nus, &m, &ubar, 0.1).is_err());
    }

    #[test]
    fn gronwall_demo_without_oscillation_is_zero() {
        let sys = embed_gas_as_general(
            ideal_gas_model(1.0, 1.0)
                .unwrap()
                .with_transport(crate::model::Coefficient::Constant(1.0), crate::model::Coefficient::Constant(1.0))
                .unwrap(),
        );
        let mut cfg = GronwallConfig::desk();
        cfg.cells = 32;
        cfg.solver = StudySolver::new(0.05);
        cfg.h0_targets = vec![0.0, 1e-2, 1e-3, 1e-4];
        let r = gronwall_decay_demo(&sys, &cfg).unwrap();
        assert_eq!(r.rows[0].metric, 0.0);
        for row in &r.rows[1..] {
            let target = row.parameter;
            assert!(cfg.h0_targets.iter().any(|t| (t - target).abs() < 1e-9 * t));
        }
        assert!(r.pass, "{r:?}");
    }
}
