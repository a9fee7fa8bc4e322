//! System models `d_t A(u) + d_x F(u) = eps d_x(B(u) d_x u) (+ P(u))` together with
//! their entropy pair `(eta, q)` and multiplier `G`.

mod advection;
mod closure;
mod gas;

pub use advection::LinearAdvection;
pub use closure::FnModel;
pub use gas::{
    embed_gas_as_general, ideal_gas_model, Coefficient, Constitutive, GasModel, GasState,
    GasSystem,
};

use std::ops::Deref;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{numeric_gradient, numeric_hessians, numeric_jacobian};

/// A point `u` in state space with finite entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct StateVector(DVector<f64>);

impl StateVector {
    pub fn new(components: Vec<f64>) -> Result<Self> {
        Self::from_dvector(DVector::from_vec(components))
    }

    pub fn from_dvector(v: DVector<f64>) -> Result<Self> {
        if v.iter().all(|x| x.is_finite()) {
            Ok(Self(v))
        } else {
            Err(Error::Domain(format!("non-finite state {:?}", v.as_slice())))
        }
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }
}

impl Deref for StateVector {
    type Target = DVector<f64>;
    fn deref(&self) -> &DVector<f64> {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for StateVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<StateVector> for Vec<f64> {
    fn from(s: StateVector) -> Vec<f64> {
        s.0.as_slice().to_vec()
    }
}

/// How a model's derivatives are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DerivativePath {
    Analytic,
    FiniteDifference,
}

/// A one-dimensional hyperbolic-parabolic system with an entropy pair.
///
/// Only the evaluators are required; every derivative has a central finite
/// difference fallback. Models with closed-form derivatives override them and
/// report [`DerivativePath::Analytic`].
pub trait Model1D: Send + Sync {
    fn name(&self) -> &str;

    /// State dimension `n`.
    fn dim(&self) -> usize;

    /// Whether `u` lies in the admissible state set (e.g. `u > 0, theta > 0` for gases).
    fn admissible(&self, u: &DVector<f64>) -> bool {
        u.iter().all(|x| x.is_finite())
    }

    fn a(&self, u: &DVector<f64>) -> DVector<f64>;
    fn flux(&self, u: &DVector<f64>) -> DVector<f64>;
    fn entropy(&self, u: &DVector<f64>) -> f64;
    fn entropy_flux(&self, u: &DVector<f64>) -> f64;
    fn multiplier(&self, u: &DVector<f64>) -> DVector<f64>;
    fn viscosity(&self, u: &DVector<f64>) -> DMatrix<f64>;

    /// Production term `P(u)` of a balance law, if any.
    fn production(&self, _u: &DVector<f64>) -> Option<DVector<f64>> {
        None
    }

    fn derivative_path(&self) -> DerivativePath {
        DerivativePath::FiniteDifference
    }

    fn jac_a(&self, u: &DVector<f64>) -> DMatrix<f64> {
        fd_jac(|x| self.a(x), u)
    }

    fn jac_flux(&self, u: &DVector<f64>) -> DMatrix<f64> {
        fd_jac(|x| self.flux(x), u)
    }

    fn jac_multiplier(&self, u: &DVector<f64>) -> DMatrix<f64> {
        fd_jac(|x| self.multiplier(x), u)
    }

    fn grad_entropy(&self, u: &DVector<f64>) -> DVector<f64> {
        numeric_gradient(|x| Ok(self.entropy(x)), u).expect("infallible evaluator")
    }

    fn hess_entropy(&self, u: &DVector<f64>) -> DMatrix<f64> {
        let h = numeric_hessians(
            |x| Ok(DMatrix::from_row_slice(1, x.len(), self.grad_entropy(x).as_slice())),
            u,
        )
        .expect("infallible evaluator");
        h.into_iter().next().unwrap_or_else(|| DMatrix::zeros(0, 0))
    }

    /// Hessians of the components of `A`; entry `k` is `d^2 A_k`.
    fn hess_a(&self, u: &DVector<f64>) -> Vec<DMatrix<f64>> {
        numeric_hessians(|x| Ok(self.jac_a(x)), u).expect("infallible evaluator")
    }

    /// Hessians of the components of `G`; entry `k` is `d^2 G_k`.
    fn hess_multiplier(&self, u: &DVector<f64>) -> Vec<DMatrix<f64>> {
        numeric_hessians(|x| Ok(self.jac_multiplier(x)), u).expect("infallible evaluator")
    }

    /// Recover `u` from conserved `w = A(u)` by damped Newton iteration from `guess`.
    fn recover(&self, w: &DVector<f64>, guess: &DVector<f64>) -> Result<DVector<f64>> {
        newton_recover(self, w, guess)
    }

    /// Largest characteristic speed `max |lambda(grad A^-1 grad F)|`.
    fn wave_speed(&self, u: &DVector<f64>) -> f64 {
        let ja = self.jac_a(u);
        let jf = self.jac_flux(u);
        match ja.lu().solve(&jf) {
            Some(m) => m
                .complex_eigenvalues()
                .iter()
                .fold(0.0_f64, |acc, z| acc.max(z.norm())),
            None => f64::INFINITY,
        }
    }

    /// Spectral norm of `grad A^-1 B`, the parabolic stiffness at `u`.
    fn diffusion_norm(&self, u: &DVector<f64>) -> f64 {
        let ja = self.jac_a(u);
        let b = self.viscosity(u);
        match ja.lu().solve(&b) {
            Some(m) => m.singular_values().max(),
            None => f64::INFINITY,
        }
    }
}

fn fd_jac<F: Fn(&DVector<f64>) -> DVector<f64>>(f: F, u: &DVector<f64>) -> DMatrix<f64> {
    numeric_jacobian(|x| Ok(f(x)), u, None).expect("infallible evaluator")
}

pub(crate) const NEWTON_MAX_ITER: usize = 25;

fn newton_recover<M: Model1D + ?Sized>(
    model: &M,
    w: &DVector<f64>,
    guess: &DVector<f64>,
) -> Result<DVector<f64>> {
    let mut u = guess.clone();
    let scale = w.amax().max(1.0);
    for _ in 0..NEWTON_MAX_ITER {
        let res = model.a(&u) - w;
        if res.amax() <= 1e-14 * scale {
            return Ok(u);
        }
        let step = model
            .jac_a(&u)
            .lu()
            .solve(&res)
            .ok_or_else(|| Error::SingularGradA {
                state: u.as_slice().to_vec(),
            })?;
        // backtrack until admissible and the residual decreases
        let mut lambda = 1.0;
        let r0 = res.norm();
        loop {
            let trial = &u - &step * lambda;
            if model.admissible(&trial) && (model.a(&trial) - w).norm() < r0 {
                u = trial;
                break;
            }
            lambda *= 0.5;
            if lambda < 1e-6 {
                return Err(Error::Newton {
                    iterations: NEWTON_MAX_ITER,
                });
            }
        }
    }
    if (model.a(&u) - w).amax() <= 1e-10 * scale {
        Ok(u)
    } else {
        Err(Error::Newton {
            iterations: NEWTON_MAX_ITER,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_vector_rejects_nan() {
        assert!(StateVector::new(vec![1.0, f64::NAN]).is_err());
        assert!(StateVector::new(vec![1.0, f64::INFINITY]).is_err());
        assert!(StateVector::new(vec![1.0, -2.0]).is_ok());
    }

    #[test]
    fn newton_recovers_nonlinear_map() {
        let m = FnModel::builder(2)
            .a(|u| DVector::from_vec(vec![u[0] + u[0].powi(3), u[1].exp()]))
            .build();
        let target = DVector::from_vec(vec![0.7, -0.3]);
        let w = m.a(&target);
        let u = m.recover(&w, &DVector::from_vec(vec![0.0, 0.0])).unwrap();
        assert!((u - target).amax() < 1e-12);
    }
}
