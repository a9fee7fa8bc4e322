//! Manufactured exact solutions built from one travelling sine per component.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{Field, Grid1D, RunMeta, SourceFn, Trajectory};
use crate::error::{Error, Result};
use crate::model::{embed_gas_as_general, GasModel, GasSystem, Model1D};

/// `mean + amplitude * sin(wavenumber * x - omega * t + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SineMode {
    pub mean: f64,
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default = "one")]
    pub wavenumber: f64,
    #[serde(default)]
    pub omega: f64,
    #[serde(default)]
    pub phase: f64,
}

fn one() -> f64 {
    1.0
}

impl SineMode {
    pub fn constant(mean: f64) -> Self {
        SineMode { mean, amplitude: 0.0, wavenumber: 1.0, omega: 0.0, phase: 0.0 }
    }

    pub fn new(mean: f64, amplitude: f64, wavenumber: f64, omega: f64, phase: f64) -> Self {
        SineMode { mean, amplitude, wavenumber, omega, phase }
    }

    fn arg(&self, x: f64, t: f64) -> f64 {
        self.wavenumber * x - self.omega * t + self.phase
    }

    pub fn value(&self, x: f64, t: f64) -> f64 {
        self.mean + self.amplitude * self.arg(x, t).sin()
    }

    pub fn dt(&self, x: f64, t: f64) -> f64 {
        -self.amplitude * self.omega * self.arg(x, t).cos()
    }

    pub fn dx(&self, x: f64, t: f64) -> f64 {
        self.amplitude * self.wavenumber * self.arg(x, t).cos()
    }

    pub fn dxx(&self, x: f64, t: f64) -> f64 {
        -self.amplitude * self.wavenumber * self.wavenumber * self.arg(x, t).sin()
    }
}

/// A closed-form state `u(x, t)`, one [`SineMode`] per component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManufacturedSolution {
    pub modes: Vec<SineMode>,
}

impl ManufacturedSolution {
    pub fn new(modes: Vec<SineMode>) -> Self {
        ManufacturedSolution { modes }
    }

    /// A travelling gas wave: `u = u0 + a sin(k x - w t + phi)`, `v` chosen so
    /// that `u_t = v_x`, and `theta` an independent sine.
    pub fn gas_wave(u0: f64, a: f64, v0: f64, k: f64, omega: f64, theta: SineMode) -> Self {
        let b = if k == 0.0 { 0.0 } else { -a * omega / k };
        ManufacturedSolution {
            modes: vec![
                SineMode::new(u0, a, k, omega, 0.0),
                SineMode::new(v0, b, k, omega, 0.0),
                theta,
            ],
        }
    }

    pub fn dim(&self) -> usize {
        self.modes.len()
    }

    fn map(&self, f: impl Fn(&SineMode) -> f64) -> DVector<f64> {
        DVector::from_iterator(self.modes.len(), self.modes.iter().map(f))
    }

    pub fn exact(&self, x: f64, t: f64) -> DVector<f64> {
        self.map(|m| m.value(x, t))
    }

    pub fn dt(&self, x: f64, t: f64) -> DVector<f64> {
        self.map(|m| m.dt(x, t))
    }

    pub fn dx(&self, x: f64, t: f64) -> DVector<f64> {
        self.map(|m| m.dx(x, t))
    }

    pub fn dxx(&self, x: f64, t: f64) -> DVector<f64> {
        self.map(|m| m.dxx(x, t))
    }

    /// Errors unless every wavenumber is a multiple of `2 pi / length`.
    pub fn check_periodic(&self, length: f64) -> Result<()> {
        for (c, m) in self.modes.iter().enumerate() {
            if m.amplitude == 0.0 {
                continue;
            }
            let cycles = m.wavenumber * length / std::f64::consts::TAU;
            if (cycles - cycles.round()).abs() > 1e-9 {
                return Err(Error::Precondition(format!(
                    "component {c}: wavenumber {} is not periodic on length {length}",
                    m.wavenumber
                )));
            }
        }
        Ok(())
    }

    /// The forcing that makes this state an exact solution:
    /// `S = grad A u_t + grad F u_x - eps (d_x[B(u)] u_x + B u_xx)`.
    ///
    /// `d_x[B(u(x, t))]` is taken by a fourth-order central difference in `x`.
    pub fn source<M: Model1D + ?Sized>(&self, model: &M, eps: f64, x: f64, t: f64) -> DVector<f64> {
        let u = self.exact(x, t);
        let ut = self.dt(x, t);
        let ux = self.dx(x, t);
        let mut s = model.jac_a(&u) * ut + model.jac_flux(&u) * &ux;
        if eps != 0.0 {
            let h = 1e-3;
            let b = |xx: f64| model.viscosity(&self.exact(xx, t));
            let db: DMatrix<f64> =
                (b(x - 2.0 * h) - b(x + 2.0 * h) + 8.0 * (b(x + h) - b(x - h))) / (12.0 * h);
            s -= (db * &ux + model.viscosity(&u) * self.dxx(x, t)) * eps;
        }
        s
    }
}

/// A gas manufactured solution with its body force `f` and supply `r`.
#[derive(Debug, Clone)]
pub struct ManufacturedCase {
    pub gas: GasModel,
    pub eps: f64,
    pub solution: ManufacturedSolution,
    pub init: Field,
}

impl ManufacturedCase {
    fn system(&self) -> GasSystem {
        embed_gas_as_general(self.gas)
    }

    /// Body force `f(x, t)`.
    pub fn force(&self, x: f64, t: f64) -> f64 {
        self.solution.source(&self.system(), self.eps, x, t)[1]
    }

    /// Radiative supply `r(x, t)`.
    pub fn supply(&self, x: f64, t: f64) -> f64 {
        let s = self.solution.source(&self.system(), self.eps, x, t);
        s[2] - s[1] * self.solution.modes[1].value(x, t)
    }

    /// The right-hand side `(0, f, f v + r)` with `v` the current velocity.
    pub fn source_fn(&self) -> SourceFn {
        let sys = self.system();
        let sol = self.solution.clone();
        let eps = self.eps;
        Arc::new(move |x, t, u| {
            let s = sol.source(&sys, eps, x, t);
            let f = s[1];
            let r = s[2] - f * sol.modes[1].value(x, t);
            DVector::from_vec(vec![0.0, f, f * u[1] + r])
        })
    }
}

/// Builds a gas manufactured case on `grid`; `eps` scales the transport laws.
///
/// The mass equation `u_t = v_x` carries no forcing, so the solution must
/// satisfy it exactly.
pub fn manufactured_case(
    gas: &GasModel,
    solution: &ManufacturedSolution,
    grid: &Grid1D,
    eps: f64,
) -> Result<ManufacturedCase> {
    if solution.dim() != 3 {
        return Err(Error::Shape("gas solution needs 3 components".into()));
    }
    solution.check_periodic(grid.length())?;
    let init = Field::from_fn(grid, 0.0, |x| solution.exact(x, 0.0));
    init.validate(&embed_gas_as_general(*gas))?;
    let sys = embed_gas_as_general(*gas);
    for i in 0..grid.cells() {
        for t in [0.0, 0.37, 1.0] {
            let s1 = solution.source(&sys, eps, grid.x(i), t)[0];
            if s1.abs() > 1e-12 {
                return Err(Error::Precondition(format!(
                    "mass equation u_t = v_x violated by {s1:e} at x = {}",
                    grid.x(i)
                )));
            }
        }
    }
    Ok(ManufacturedCase { gas: *gas, eps, solution: solution.clone(), init })
}

/// Samples a manufactured solution at `times`, recording the forcing.
pub fn exact_trajectory<M: Model1D + ?Sized>(
    model: &M,
    solution: &ManufacturedSolution,
    grid: &Grid1D,
    times: &[f64],
    eps: f64,
) -> Result<Trajectory> {
    if solution.dim() != model.dim() {
        return Err(Error::Shape("solution and model dimensions differ".into()));
    }
    solution.check_periodic(grid.length())?;
    let xs = grid.centers();
    let snapshots: Vec<Field> = times
        .iter()
        .map(|&t| Field::new(t, xs.iter().map(|&x| solution.exact(x, t)).collect()))
        .collect();
    for f in &snapshots {
        f.validate(model)?;
    }
    let sources = times
        .iter()
        .map(|&t| xs.iter().map(|&x| solution.source(model, eps, x, t)).collect())
        .collect();
    Ok(Trajectory {
        grid: *grid,
        dim: model.dim(),
        snapshots,
        sources: Some(sources),
        meta: RunMeta::exact(model.name(), eps),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ideal_gas_model, Coefficient};
    use crate::solver::semidiscrete_rhs;
    use approx::assert_abs_diff_eq;

    fn gas(mu: f64, kappa: f64) -> GasModel {
        ideal_gas_model(1.0, 2.5)
            .unwrap()
            .with_transport(Coefficient::Constant(mu), Coefficient::ThetaProportional(kappa))
            .unwrap()
    }

    #[test]
    fn constant_state_needs_no_forcing() {
        let g = gas(0.3, 0.2);
        let sol = ManufacturedSolution::new(vec![
            SineMode::constant(1.0),
            SineMode::constant(0.2),
            SineMode::constant(1.5),
        ]);
        let case = manufactured_case(&g, &sol, &Grid1D::periodic(16).unwrap(), 1.0).unwrap();
        assert_abs_diff_eq!(case.force(0.3, 0.1), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(case.supply(0.3, 0.1), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn steady_supply_balances_conduction() {
        let kappa = 0.7;
        let g = ideal_gas_model(1.0, 1.0)
            .unwrap()
            .with_transport(Coefficient::Constant(0.0), Coefficient::Constant(kappa))
            .unwrap();
        let sol = ManufacturedSolution::new(vec![
            SineMode::constant(1.0),
            SineMode::constant(0.0),
            SineMode::new(1.0, 0.1, 1.0, 0.0, 0.0),
        ]);
        let case = manufactured_case(&g, &sol, &Grid1D::periodic(16).unwrap(), 1.0).unwrap();
        for x in [0.1, 1.0, 2.5] {
            assert_abs_diff_eq!(case.supply(x, 0.0), 0.1 * kappa * x.sin(), epsilon = 1e-11);
            assert_abs_diff_eq!(case.force(x, 0.0), 0.1 * x.cos(), epsilon = 1e-12);
        }
    }

    #[test]
    fn travelling_wave_has_smooth_nonzero_forcing() {
        let g = gas(0.1, 0.1);
        let sol = ManufacturedSolution::gas_wave(1.0, 0.1, 0.0, 1.0, 1.0, SineMode::constant(1.0));
        assert_abs_diff_eq!(sol.modes[1].amplitude, -0.1);
        let case = manufactured_case(&g, &sol, &Grid1D::periodic(16).unwrap(), 1.0).unwrap();
        assert!(case.force(0.4, 0.0).abs() > 1e-3);
        assert!(case.supply(0.4, 0.0).abs() > 1e-6);
    }

    #[test]
    fn mass_equation_violation_is_rejected() {
        let g = gas(0.1, 0.1);
        let sol = ManufacturedSolution::new(vec![
            SineMode::new(1.0, 0.1, 1.0, 1.0, 0.0),
            SineMode::constant(0.0),
            SineMode::constant(1.0),
        ]);
        assert!(manufactured_case(&g, &sol, &Grid1D::periodic(16).unwrap(), 1.0).is_err());
    }

    #[test]
    fn discrete_defect_is_second_order() {
        let g = gas(0.2, 0.3);
        let sys = embed_gas_as_general(g);
        let sol = ManufacturedSolution::gas_wave(
            1.0,
            0.1,
            0.1,
            1.0,
            0.7,
            SineMode::new(1.2, 0.15, 2.0, -0.5, 0.3),
        );
        let defect = |n: usize| {
            let grid = Grid1D::periodic(n).unwrap();
            let case = manufactured_case(&g, &sol, &grid, 1.0).unwrap();
            let src = case.source_fn();
            let rhs = semidiscrete_rhs(&sys, &grid, &case.init, 1.0, None, Some(&src)).unwrap();
            (0..n)
                .map(|i| {
                    let x = grid.x(i);
                    let u = sol.exact(x, 0.0);
                    let wt = sys.jac_a(&u) * sol.dt(x, 0.0);
                    (&rhs[i] - wt).amax()
                })
                .fold(0.0, f64::max)
        };
        let ratio = defect(64) / defect(128);
        assert!((3.6..4.4).contains(&ratio), "ratio {ratio}");
    }
}
