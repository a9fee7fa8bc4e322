//! Sampling-based checks of the structural hypotheses on a [`Model1D`].
//!
//! Every check evaluates a quantity over a deterministic sample of states (and
//! directions, where relevant) and reports its extremal value together with the
//! state that realized it. Nothing here is a proof: a pass means no sampled
//! counterexample was found.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DerivativePath, GasModel, GasSystem, Model1D, StateVector};
use crate::numeric::{max_abs, numeric_jacobian};

/// Default tolerance when all derivatives are closed-form.
pub const TOL_ANALYTIC: f64 = 1e-8;
/// Default tolerance when any derivative comes from finite differences.
pub const TOL_FINITE_DIFFERENCE: f64 = 1e-5;

/// Where sample states come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum StateSource {
    List(Vec<StateVector>),
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
        count: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplePlan {
    pub seed: u64,
    pub states: StateSource,
    #[serde(default = "default_directions")]
    pub directions_per_state: usize,
    #[serde(default)]
    pub radius_schedule: Vec<f64>,
    /// Overrides the derivative-path default tolerance.
    #[serde(default)]
    pub tolerance: Option<f64>,
}

fn default_directions() -> usize {
    8
}

impl SamplePlan {
    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>, count: usize, seed: u64) -> Self {
        SamplePlan {
            seed,
            states: StateSource::Box { lower, upper, count },
            directions_per_state: default_directions(),
            radius_schedule: Vec::new(),
            tolerance: None,
        }
    }

    /// The box `u, theta in [0.5, 2]`, `v in [-1, 1]`.
    pub fn gas_box(count: usize, seed: u64) -> Self {
        Self::boxed(vec![0.5, -1.0, 0.5], vec![2.0, 1.0, 2.0], count, seed)
    }

    pub fn from_states(states: Vec<StateVector>, seed: u64) -> Self {
        SamplePlan {
            seed,
            states: StateSource::List(states),
            directions_per_state: default_directions(),
            radius_schedule: Vec::new(),
            tolerance: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.states {
            StateSource::List(v) if v.is_empty() => {
                return Err(Error::param("states", "need at least one state"))
            }
            StateSource::Box { lower, upper, count } => {
                if *count == 0 {
                    return Err(Error::param("states.count", "must be at least 1"));
                }
                if lower.len() != upper.len() || lower.is_empty() {
                    return Err(Error::param("states", "box bounds must have equal, nonzero length"));
                }
                if lower.iter().zip(upper).any(|(l, u)| !(l <= u)) {
                    return Err(Error::param("states", "box lower bound exceeds upper bound"));
                }
            }
            _ => {}
        }
        if self.radius_schedule.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param("radius_schedule", "radii must be strictly increasing"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match &self.states {
            StateSource::List(v) => v.first().map_or(0, |s| s.len()),
            StateSource::Box { lower, .. } => lower.len(),
        }
    }

    /// The sampled states, in a fixed order determined by the seed.
    pub fn states(&self) -> Result<Vec<DVector<f64>>> {
        self.validate()?;
        match &self.states {
            StateSource::List(v) => Ok(v.iter().map(|s| (**s).clone()).collect()),
            StateSource::Box { lower, upper, count } => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                Ok((0..*count)
                    .map(|_| {
                        DVector::from_iterator(
                            lower.len(),
                            lower.iter().zip(upper).map(|(&l, &u)| {
                                if l == u {
                                    l
                                } else {
                                    rng.random_range(l..=u)
                                }
                            }),
                        )
                    })
                    .collect())
            }
        }
    }

    /// Unit directions for state `index`: the coordinate axes followed by
    /// `directions_per_state` normalized Gaussian samples.
    pub fn directions(&self, n: usize, index: usize) -> Vec<DVector<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64 + 1);
        let mut out: Vec<DVector<f64>> = (0..n)
            .map(|k| {
                let mut e = DVector::zeros(n);
                e[k] = 1.0;
                e
            })
            .collect();
        out.extend((0..self.directions_per_state).filter_map(|_| gaussian_unit(n, &mut rng)));
        out
    }

    pub fn tolerance_for(&self, path: DerivativePath) -> f64 {
        self.tolerance.unwrap_or(match path {
            DerivativePath::Analytic => TOL_ANALYTIC,
            DerivativePath::FiniteDifference => TOL_FINITE_DIFFERENCE,
        })
    }
}

fn gaussian_unit(n: usize, rng: &mut ChaCha8Rng) -> Option<DVector<f64>> {
    let g = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
    let norm = g.norm();
    (norm > 1e-12).then(|| g / norm)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckStatus {
    Pass,
    Fail,
    Inconclusive,
}

/// The outcome of one check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckEntry {
    pub name: String,
    pub status: CheckStatus,
    pub extremal_value: f64,
    pub tolerance: f64,
    pub derivative_path: DerivativePath,
    pub samples: usize,
    pub witness_state: Option<Vec<f64>>,
    pub witness_direction: Option<Vec<f64>>,
    pub nu_min: Option<f64>,
    pub n_max: Option<f64>,
    pub mu_best: Option<f64>,
    pub details: BTreeMap<String, f64>,
}

impl CheckEntry {
    fn new(name: &str, path: DerivativePath, tolerance: f64) -> Self {
        CheckEntry {
            name: name.to_string(),
            status: CheckStatus::Inconclusive,
            extremal_value: f64::NAN,
            tolerance,
            derivative_path: path,
            samples: 0,
            witness_state: None,
            witness_direction: None,
            nu_min: None,
            n_max: None,
            mu_best: None,
            details: BTreeMap::new(),
        }
    }

    fn decide(mut self, pass: bool) -> Self {
        self.status = if pass { CheckStatus::Pass } else { CheckStatus::Fail };
        self
    }

    pub fn passed(&self) -> bool {
        self.status == CheckStatus::Pass
    }

    fn failure(name: &str, path: DerivativePath, tol: f64, state: &DVector<f64>, why: &str) -> Self {
        let mut e = CheckEntry::new(name, path, tol);
        e.status = CheckStatus::Fail;
        e.witness_state = Some(state.iter().copied().collect());
        e.details.insert(format!("evaluation_failure: {why}"), 1.0);
        e
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub model: String,
    pub seed: u64,
    pub entries: Vec<CheckEntry>,
}

impl HypothesisReport {
    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(CheckEntry::passed)
    }

    pub fn get(&self, name: &str) -> Option<&CheckEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

/// Per-state extremum with the index that realized it; ties go to the lowest index.
#[derive(Debug, Clone, Copy)]
struct Extremum {
    value: f64,
    index: usize,
}

fn argmin(values: &[f64]) -> Extremum {
    values
        .iter()
        .enumerate()
        .fold(Extremum { value: f64::INFINITY, index: 0 }, |acc, (i, &v)| {
            if v < acc.value || (v.is_nan() && !acc.value.is_nan()) {
                Extremum { value: v, index: i }
            } else {
                acc
            }
        })
}

fn argmax(values: &[f64]) -> Extremum {
    let neg: Vec<f64> = values.iter().map(|v| -v).collect();
    let e = argmin(&neg);
    Extremum { value: -e.value, index: e.index }
}

fn to_vec(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

fn admissible_states<M: Model1D + ?Sized>(
    model: &M,
    plan: &SamplePlan,
) -> Result<Vec<DVector<f64>>> {
    let states = plan.states()?;
    if states.iter().any(|s| s.len() != model.dim()) {
        return Err(Error::Shape(format!(
            "sample states must have dimension {}",
            model.dim()
        )));
    }
    Ok(states)
}

/// (H1): `grad A` is nonsingular on the sample.
pub fn check_h1<M: Model1D + ?Sized>(model: &M, plan: &SamplePlan) -> Result<CheckEntry> {
    let path = model.derivative_path();
    let tol = plan.tolerance_for(path);
    let states = admissible_states(model, plan)?;
    if let Some(bad) = states.iter().find(|s| !model.admissible(s)) {
        return Ok(CheckEntry::failure("H1", path, tol, bad, "inadmissible state"));
    }
    let rows: Vec<(f64, f64)> = states
        .par_iter()
        .map(|s| {
            let j = model.jac_a(s);
            let det = j.determinant().abs();
            let smin = j.singular_values().min();
            (det, smin)
        })
        .collect();
    let sv: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let det: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let worst = argmin(&sv);
    let mut e = CheckEntry::new("H1", path, tol);
    e.samples = states.len();
    e.extremal_value = worst.value;
    e.witness_state = Some(to_vec(&states[worst.index]));
    e.details.insert("min_abs_det".into(), argmin(&det).value);
    Ok(e.decide(worst.value > tol))
}

/// Compatibility of the multiplier: `grad G^T grad A` and `grad G^T grad F` symmetric.
pub fn check_entropy_pair<M: Model1D + ?Sized>(model: &M, plan: &SamplePlan) -> Result<CheckEntry> {
    let path = model.derivative_path();
    let tol = plan.tolerance_for(path);
    let states = admissible_states(model, plan)?;
    let rows: Vec<[f64; 4]> = states
        .par_iter()
        .map(|s| {
            let jg = model.jac_multiplier(s);
            let ja = model.jac_a(s);
            let jf = model.jac_flux(s);
            let ga = jg.transpose() * &ja;
            let gf = jg.transpose() * &jf;
            let g = model.multiplier(s);
            let eta_defect = (model.grad_entropy(s) - ja.transpose() * &g).amax();
            let q_defect = numeric_jacobian(
                |y| Ok(DVector::from_element(1, model.entropy_flux(y))),
                s,
                None,
            )
            .map(|dq| (dq.row(0).transpose() - jf.transpose() * &g).amax())
            .unwrap_or(f64::NAN);
            [
                max_abs(&(&ga - ga.transpose())),
                max_abs(&(&gf - gf.transpose())),
                eta_defect,
                q_defect,
            ]
        })
        .collect();
    let col = |k: usize| rows.iter().map(|r| r[k]).collect::<Vec<_>>();
    let combined: Vec<f64> = rows.iter().map(|r| r[0].max(r[1])).collect();
    let worst = argmax(&combined);
    let mut e = CheckEntry::new("entropy-pair", path, tol);
    e.samples = states.len();
    e.extremal_value = worst.value;
    e.witness_state = Some(to_vec(&states[worst.index]));
    e.details.insert("asym_grad_a".into(), argmax(&col(0)).value);
    e.details.insert("asym_grad_f".into(), argmax(&col(1)).value);
    e.details.insert("grad_eta_defect".into(), argmax(&col(2)).value);
    e.details.insert("grad_q_defect".into(), argmax(&col(3)).value);
    Ok(e.decide(worst.value < tol))
}

/// `grad^2 eta - sum_k G_k grad^2 A_k`, the matrix whose positivity is (H3).
pub fn h3_matrix<M: Model1D + ?Sized>(model: &M, u: &DVector<f64>) -> DMatrix<f64> {
    let g = model.multiplier(u);
    let mut m = model.hess_entropy(u);
    for (k, h) in model.hess_a(u).iter().enumerate() {
        m -= h * g[k];
    }
    0.5 * (&m + m.transpose())
}

fn min_eigen(m: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    let (i, v) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
    (v, eig.eigenvectors.column(i).into_owned())
}

/// (H3): positive definiteness of [`h3_matrix`].
pub fn check_h3<M: Model1D + ?Sized>(model: &M, plan: &SamplePlan) -> Result<CheckEntry> {
    let path = model.derivative_path();
    let tol = plan.tolerance_for(path);
    let states = admissible_states(model, plan)?;
    let rows: Vec<(f64, DVector<f64>)> = states
        .par_iter()
        .map(|s| min_eigen(&h3_matrix(model, s)))
        .collect();
    let mins: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let worst = argmin(&mins);
    let mut e = CheckEntry::new("H3", path, tol);
    e.samples = states.len();
    e.extremal_value = worst.value;
    e.witness_state = Some(to_vec(&states[worst.index]));
    e.witness_direction = Some(to_vec(&rows[worst.index].1));
    Ok(e.decide(worst.value > 0.0))
}

/// (H3) for the gas embedding, with the Gibbs conditions and the diagonal form
/// `diag(psi_uu/theta, 1/theta, eta_theta/theta)` checked as well.
pub fn check_h3_gas(sys: &GasSystem, plan: &SamplePlan) -> Result<CheckEntry> {
    let mut e = check_h3(sys, plan)?;
    let states = admissible_states(sys, plan)?;
    let rows: Vec<[f64; 3]> = states
        .par_iter()
        .map(|s| {
            let c = sys.gas.partials(s[0], s[2]);
            let th = s[2];
            let expect = DMatrix::from_diagonal(&DVector::from_vec(vec![
                c.psi_uu / th,
                1.0 / th,
                c.eta_theta / th,
            ]));
            [max_abs(&(h3_matrix(sys, s) - expect)), c.psi_uu, c.eta_theta]
        })
        .collect();
    let diag_err = argmax(&rows.iter().map(|r| r[0]).collect::<Vec<_>>());
    let psi_uu = argmin(&rows.iter().map(|r| r[1]).collect::<Vec<_>>()).value;
    let eta_t = argmin(&rows.iter().map(|r| r[2]).collect::<Vec<_>>()).value;
    e.details.insert("diag_form_error".into(), diag_err.value);
    e.details.insert("min_psi_uu".into(), psi_uu);
    e.details.insert("min_eta_theta".into(), eta_t);
    let pass = e.passed() && diag_err.value < e.tolerance && psi_uu > 0.0 && eta_t > 0.0;
    if !pass && diag_err.value >= e.tolerance {
        e.witness_state = Some(to_vec(&states[diag_err.index]));
    }
    Ok(e.decide(pass))
}

/// (H4) and its strict variant for the single viscosity matrix of a 1D model.
///
/// `nu_min`/`n_max` bracket the spectrum of the symmetric part of
/// `grad G^T B` over the sample; `details["strict_pass"]` is 1 when the form is
/// uniformly positive definite. Zero modes are eigenvalues with modulus at most
/// `tolerance * max(1, |N|)`.
pub fn check_h4<M: Model1D + ?Sized>(model: &M, plan: &SamplePlan) -> Result<CheckEntry> {
    let path = model.derivative_path();
    let tol = plan.tolerance_for(path);
    let states = admissible_states(model, plan)?;
    let n = model.dim();
    struct Row {
        form_min: f64,
        form_dir: DVector<f64>,
        form_max: f64,
        eig_min: f64,
        eig_max: f64,
        zero_modes: usize,
    }
    let rows: Vec<Row> = states
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let m = model.jac_multiplier(s).transpose() * model.viscosity(s);
            let sym = 0.5 * (&m + m.transpose());
            let dirs = plan.directions(n, i);
            let vals: Vec<f64> = dirs.iter().map(|d| d.dot(&(&sym * d))).collect();
            let lo = argmin(&vals);
            let eig = SymmetricEigen::new(sym).eigenvalues;
            let emax = eig.max();
            let zero_tol = tol * emax.abs().max(1.0);
            Row {
                form_min: lo.value,
                form_dir: dirs[lo.index].clone(),
                form_max: argmax(&vals).value,
                eig_min: eig.min(),
                eig_max: emax,
                zero_modes: eig.iter().filter(|l| l.abs() <= zero_tol).count(),
            }
        })
        .collect();
    let eig_min: Vec<f64> = rows.iter().map(|r| r.eig_min).collect();
    let form_min: Vec<f64> = rows.iter().map(|r| r.form_min).collect();
    let worst_eig = argmin(&eig_min);
    let worst_form = argmin(&form_min);
    let nu_min = worst_eig.value;
    let n_max = argmax(&rows.iter().map(|r| r.eig_max).collect::<Vec<_>>()).value;
    let extremal = nu_min.min(worst_form.value);
    let mut e = CheckEntry::new("H4", path, tol);
    e.samples = states.len();
    e.extremal_value = extremal;
    e.nu_min = Some(nu_min);
    e.n_max = Some(n_max);
    let (idx, dir) = if worst_form.value < nu_min {
        (worst_form.index, rows[worst_form.index].form_dir.clone())
    } else {
        let s = &states[worst_eig.index];
        let m = model.jac_multiplier(s).transpose() * model.viscosity(s);
        (worst_eig.index, min_eigen(&(0.5 * (&m + m.transpose()))).1)
    };
    e.witness_state = Some(to_vec(&states[idx]));
    e.witness_direction = Some(to_vec(&dir));
    let zmin = rows.iter().map(|r| r.zero_modes).min().unwrap_or(0);
    let zmax = rows.iter().map(|r| r.zero_modes).max().unwrap_or(0);
    e.details.insert("form_min".into(), worst_form.value);
    e.details
        .insert("form_max".into(), argmax(&rows.iter().map(|r| r.form_max).collect::<Vec<_>>()).value);
    e.details.insert("zero_modes_min".into(), zmin as f64);
    e.details.insert("zero_modes_max".into(), zmax as f64);
    e.details.insert("strict_pass".into(), f64::from(u8::from(extremal > tol)));
    Ok(e.decide(extremal >= -tol))
}

/// (H5) from explicit `(state, gradient)` pairs, e.g. taken from a trajectory.
pub fn check_h5_pairs<M: Model1D + ?Sized>(
    model: &M,
    pairs: &[(DVector<f64>, DVector<f64>)],
    tol: f64,
) -> CheckEntry {
    let path = model.derivative_path();
    let ratios: Vec<Option<f64>> = pairs
        .par_iter()
        .map(|(s, du)| {
            let bdu = model.viscosity(s) * du;
            let denom = bdu.norm_squared();
            if denom <= f64::EPSILON * f64::EPSILON * du.norm_squared().max(1.0) {
                None
            } else {
                Some((model.jac_multiplier(s) * du).dot(&bdu) / denom)
            }
        })
        .collect();
    let mut e = CheckEntry::new("H5", path, tol);
    e.samples = ratios.iter().flatten().count();
    e.details.insert("skipped_kernel_samples".into(), (pairs.len() - e.samples) as f64);
    if e.samples == 0 {
        return e;
    }
    let vals: Vec<f64> = ratios.iter().map(|r| r.unwrap_or(f64::INFINITY)).collect();
    let worst = argmin(&vals);
    e.extremal_value = worst.value;
    e.mu_best = Some(worst.value);
    e.witness_state = Some(to_vec(&pairs[worst.index].0));
    e.witness_direction = Some(to_vec(&pairs[worst.index].1));
    e.decide(worst.value > tol)
}

/// (H5) with gradient samples drawn per the plan's direction design.
pub fn check_h5<M: Model1D + ?Sized>(model: &M, plan: &SamplePlan) -> Result<CheckEntry> {
    let states = admissible_states(model, plan)?;
    let n = model.dim();
    let pairs: Vec<(DVector<f64>, DVector<f64>)> = states
        .iter()
        .enumerate()
        .flat_map(|(i, s)| plan.directions(n, i).into_iter().map(move |d| (s.clone(), d)))
        .collect();
    Ok(check_h5_pairs(model, &pairs, plan.tolerance_for(model.derivative_path())))
}

/// (H_d): `(G(u) - G(ubar)) . (P(u) - P(ubar)) <= 0` over all sampled pairs.
pub fn check_hd<M: Model1D + ?Sized>(model: &M, plan: &SamplePlan) -> Result<CheckEntry> {
    let path = model.derivative_path();
    let tol = plan.tolerance_for(path);
    let states = admissible_states(model, plan)?;
    let probe = &states[0];
    if model.production(probe).is_none() {
        return Err(Error::Precondition(format!(
            "model `{}` has no production term",
            model.name()
        )));
    }
    let gp: Vec<(DVector<f64>, DVector<f64>)> = states
        .iter()
        .map(|s| (model.multiplier(s), model.production(s).unwrap_or_else(|| DVector::zeros(s.len()))))
        .collect();
    let m = states.len();
    let rows: Vec<(f64, usize, usize)> = (0..m)
        .into_par_iter()
        .map(|i| {
            (i + 1..m).fold((f64::NEG_INFINITY, i, i), |acc, j| {
                let v = (&gp[i].0 - &gp[j].0).dot(&(&gp[i].1 - &gp[j].1));
                if v > acc.0 {
                    (v, i, j)
                } else {
                    acc
                }
            })
        })
        .collect();
    let best = rows
        .iter()
        .fold((f64::NEG_INFINITY, 0, 0), |acc, r| if r.0 > acc.0 { *r } else { acc });
    let mut e = CheckEntry::new("Hd", path, tol);
    e.samples = m * (m - 1) / 2;
    if e.samples == 0 {
        e.extremal_value = 0.0;
        return Ok(e.decide(true));
    }
    e.extremal_value = best.0;
    e.witness_state = Some(to_vec(&states[best.1]));
    e.witness_direction = Some(to_vec(&states[best.2]));
    e.details.insert("witness_pair_second_index".into(), best.2 as f64);
    Ok(e.decide(best.0 <= tol))
}

/// Maxwell relations and free-energy consistency for a gas.
///
/// `extremal_value` is the largest Maxwell residual from the closed-form
/// partials. `details["free_energy_fd"]` compares `sigma`, `eta`, `e` with finite
/// differences of `psi` (relative), and `details["partials_fd"]` the second
/// derivatives with finite differences of the first ones.
pub fn maxwell_residuals(gas: &GasModel, plan: &SamplePlan) -> Result<CheckEntry> {
    let tol = plan.tolerance.unwrap_or(1e-10);
    let states = plan.states()?;
    if states.iter().any(|s| s.len() != 3) {
        return Err(Error::Shape("gas states must have 3 components".into()));
    }
    let rows: Vec<[f64; 3]> = states
        .par_iter()
        .map(|s| {
            let (u, th) = (s[0], s[2]);
            let c = gas.partials(u, th);
            let maxwell = (c.sigma_theta + c.eta_u)
                .abs()
                .max((c.e_theta - th * c.eta_theta).abs())
                .max((c.e_u - (c.sigma - th * c.sigma_theta)).abs());
            let h = 1e-5;
            let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1.0);
            let psi_u = (gas.psi(u + h, th) - gas.psi(u - h, th)) / (2.0 * h);
            let psi_t = (gas.psi(u, th + h) - gas.psi(u, th - h)) / (2.0 * h);
            let fe = rel(psi_u, c.sigma)
                .max(rel(-psi_t, c.eta))
                .max(rel(c.psi + th * c.eta, c.e));
            let sig_u = (gas.sigma(u + h, th) - gas.sigma(u - h, th)) / (2.0 * h);
            let sig_t = (gas.sigma(u, th + h) - gas.sigma(u, th - h)) / (2.0 * h);
            let eta_t = (gas.eta(u, th + h) - gas.eta(u, th - h)) / (2.0 * h);
            let e_t = (gas.e(u, th + h) - gas.e(u, th - h)) / (2.0 * h);
            let pd = rel(sig_u, c.sigma_u)
                .max(rel(sig_t, c.sigma_theta))
                .max(rel(eta_t, c.eta_theta))
                .max(rel(e_t, c.e_theta))
                .max(rel(sig_u, c.psi_uu));
            [maxwell, fe, pd]
        })
        .collect();
    let col = |k: usize| rows.iter().map(|r| r[k]).collect::<Vec<_>>();
    let worst = argmax(&col(0));
    let mut e = CheckEntry::new("maxwell", DerivativePath::Analytic, tol);
    e.samples = states.len();
    e.extremal_value = worst.value;
    e.witness_state = Some(to_vec(&states[worst.index]));
    let fe = argmax(&col(1)).value;
    let pd = argmax(&col(2)).value;
    e.details.insert("free_energy_fd".into(), fe);
    e.details.insert("partials_fd".into(), pd);
    Ok(e.decide(worst.value < tol && fe < 1e-6 && pd < 1e-6))
}

/// Analytic Jacobians of `A`, `F`, `G` against central differences (relative).
pub fn check_jacobians<M: Model1D + ?Sized>(model: &M, plan: &SamplePlan) -> Result<CheckEntry> {
    let path = model.derivative_path();
    let tol = plan.tolerance.unwrap_or(1e-6);
    let states = admissible_states(model, plan)?;
    let errs: Vec<f64> = states
        .par_iter()
        .map(|s| {
            let rel = |a: &DMatrix<f64>, b: &DMatrix<f64>| max_abs(&(a - b)) / max_abs(b).max(1.0);
            let fa = numeric_jacobian(|y| Ok(model.a(y)), s, None);
            let ff = numeric_jacobian(|y| Ok(model.flux(y)), s, None);
            let fg = numeric_jacobian(|y| Ok(model.multiplier(y)), s, None);
            match (fa, ff, fg) {
                (Ok(fa), Ok(ff), Ok(fg)) => rel(&model.jac_a(s), &fa)
                    .max(rel(&model.jac_flux(s), &ff))
                    .max(rel(&model.jac_multiplier(s), &fg)),
                _ => f64::INFINITY,
            }
        })
        .collect();
    let worst = argmax(&errs);
    let mut e = CheckEntry::new("jacobians", path, tol);
    e.samples = states.len();
    e.extremal_value = worst.value;
    e.witness_state = Some(to_vec(&states[worst.index]));
    Ok(e.decide(worst.value < tol))
}

/// The default battery for the gas embedding.
pub fn gas_suite(sys: &GasSystem, plan: &SamplePlan) -> Result<HypothesisReport> {
    Ok(HypothesisReport {
        model: sys.name().to_string(),
        seed: plan.seed,
        entries: vec![
            check_jacobians(sys, plan)?,
            maxwell_residuals(&sys.gas, plan)?,
            check_h1(sys, plan)?,
            check_entropy_pair(sys, plan)?,
            check_h3_gas(sys, plan)?,
            check_h4(sys, plan)?,
        ],
    })
}

/// Ratio column of a growth scan with its decay verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthColumn {
    pub name: String,
    pub values: Vec<f64>,
    pub decaying: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthTable {
    pub radii: Vec<f64>,
    pub exponent: f64,
    /// `sup eta / (|u|^p + 1)` per radius.
    pub eta_growth: Vec<f64>,
    pub columns: Vec<GrowthColumn>,
    /// Radii at which some admissible sample had `eta <= 0`.
    pub nonpositive_entropy: Vec<f64>,
}

impl GrowthTable {
    pub fn column(&self, name: &str) -> Option<&GrowthColumn> {
        self.columns.iter().find(|c| c.name == name)
    }
}

/// Number of sphere directions per radius in [`growth_scan`].
pub const GROWTH_DIRECTIONS: usize = 64;

fn sphere_design(n: usize) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6772_6f77);
    let mut out = Vec::with_capacity(GROWTH_DIRECTIONS);
    for k in 0..n.min(GROWTH_DIRECTIONS / 2) {
        for sign in [1.0, -1.0] {
            let mut e = DVector::zeros(n);
            e[k] = sign;
            out.push(e);
        }
    }
    while out.len() < GROWTH_DIRECTIONS {
        if let Some(d) = gaussian_unit(n, &mut rng) {
            out.push(d);
        }
    }
    out
}

fn strictly_decaying(v: &[f64]) -> bool {
    v.len() >= 2 && v.iter().all(|x| x.is_finite()) && v.windows(2).all(|w| w[1] < w[0] * (1.0 - 1e-9))
}

/// Sup-ratios over the spheres `|u| = r` as a proxy for the growth conditions.
///
/// Columns: `F/eta`, `A/eta`, `G/eta` and, when the model has a production
/// term, `P/eta`. A column is `decaying` when it strictly decreases along the
/// schedule; that is the numerical stand-in for `o(1)`. Inadmissible points
/// are skipped; a sample with `eta <= 0` makes the ratio infinite.
pub fn growth_scan<M: Model1D + ?Sized>(model: &M, radii: &[f64], p: f64) -> Result<GrowthTable> {
    if radii.is_empty() || radii.windows(2).any(|w| w[1] <= w[0]) || radii[0] <= 0.0 {
        return Err(Error::param("radii", "must be positive and strictly increasing"));
    }
    let n = model.dim();
    let design = sphere_design(n);
    let has_p = model.production(&DVector::zeros(n)).is_some()
        || design.iter().any(|d| model.production(&(d * radii[0])).is_some());
    let mut names = vec!["F/eta", "A/eta", "G/eta"];
    if has_p {
        names.push("P/eta");
    }
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    let mut eta_growth = Vec::new();
    let mut nonpositive = Vec::new();
    for &r in radii {
        let mut sup = vec![f64::NEG_INFINITY; names.len()];
        let mut sup_eta = f64::NEG_INFINITY;
        let mut flagged = false;
        for d in &design {
            let u = d * r;
            if !model.admissible(&u) {
                continue;
            }
            let eta = model.entropy(&u);
            sup_eta = sup_eta.max(eta / (r.powf(p) + 1.0));
            let mut nums = vec![model.flux(&u).norm(), model.a(&u).norm(), model.multiplier(&u).norm()];
            if has_p {
                nums.push(model.production(&u).map_or(0.0, |v| v.norm()));
            }
            for (k, num) in nums.into_iter().enumerate() {
                let ratio = if eta > 0.0 { num / eta } else { f64::INFINITY };
                sup[k] = sup[k].max(ratio);
            }
            flagged |= eta <= 0.0;
        }
        if flagged {
            nonpositive.push(r);
        }
        eta_growth.push(sup_eta);
        for (c, v) in cols.iter_mut().zip(sup) {
            c.push(if v == f64::NEG_INFINITY { f64::NAN } else { v });
        }
    }
    Ok(GrowthTable {
        radii: radii.to_vec(),
        exponent: p,
        eta_growth,
        columns: names
            .into_iter()
            .zip(cols)
            .map(|(name, values)| GrowthColumn {
                name: name.to_string(),
                decaying: strictly_decaying(&values),
                values,
            })
            .collect(),
        nonpositive_entropy: nonpositive,
    })
}
