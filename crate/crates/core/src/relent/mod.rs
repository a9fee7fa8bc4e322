//! Relative entropy, relative fluxes and the residuals of the identities they satisfy.
//!
//! For a reference state `ubar` the relative quantities are
//!
//! ```text
//! eta(u|ubar) = eta(u) - eta(ubar) - G(ubar).(A(u) - A(ubar))
//! q(u|ubar)   = q(u) - q(ubar) - G(ubar).(F(u) - F(ubar))
//! F(u|ubar)   = F(u) - F(ubar) - dF(ubar) dA(ubar)^-1 (A(u) - A(ubar))
//! G(u|ubar)   = G(u) - G(ubar) - dG(ubar) dA(ubar)^-1 (A(u) - A(ubar))
//! phi         = dA(ubar)^-1 (A(u) - A(ubar)) - (u - ubar)
//! L           = dG(u) - dG(ubar) - d2G(ubar) . dA(ubar)^-1 (A(u) - A(ubar))
//! ```
//!
//! `dA(ubar)^-1` is always applied through an LU solve.

mod identity;
mod lemma;

use nalgebra::{DMatrix, DVector, LU};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{embed_gas_as_general, GasModel, GasState, Model1D};
use crate::numeric::contract_last;

pub use identity::{
    balance_residual, identity_residual_gas, identity_residual_general, inequality_check_hyperbolic,
    BalanceReport, GasRelEnBreakdown, GasTermRow, InequalityReport, RelEnBreakdown, TermRow,
};
pub use lemma::{lemma_bounds_scan, LemmaBounds, LemmaScanConfig, LemmaWitness, COINCIDENT};

#[derive(Debug, Clone, PartialEq)]
pub struct RelEnQuantities {
    pub eta_rel: f64,
    pub q_rel: f64,
    pub f_rel: DVector<f64>,
    pub g_rel: DVector<f64>,
    pub phi: DVector<f64>,
    pub l: DMatrix<f64>,
}

/// Everything about the reference state that the relative quantities need.
pub struct Reference {
    pub state: DVector<f64>,
    a: DVector<f64>,
    g: DVector<f64>,
    flux: DVector<f64>,
    eta: f64,
    q: f64,
    jac_g: DMatrix<f64>,
    jac_f: DMatrix<f64>,
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

/// Relative threshold below which `grad A(ubar)` is treated as singular.
const SINGULAR_RCOND: f64 = 1e-14;

impl Reference {
    pub fn new<M: Model1D + ?Sized>(model: &M, ubar: &DVector<f64>) -> Result<Self> {
        if ubar.len() != model.dim() {
            return Err(Error::Shape(format!("reference has {} components, model needs {}", ubar.len(), model.dim())));
        }
        let ja = model.jac_a(ubar);
        let scale = crate::numeric::max_abs(&ja).max(f64::MIN_POSITIVE);
        let smin = ja.singular_values().min();
        if !(smin > SINGULAR_RCOND * scale) {
            return Err(Error::SingularGradA { state: ubar.iter().copied().collect() });
        }
        Ok(Reference {
            state: ubar.clone(),
            a: model.a(ubar),
            g: model.multiplier(ubar),
            flux: model.flux(ubar),
            eta: model.entropy(ubar),
            q: model.entropy_flux(ubar),
            jac_g: model.jac_multiplier(ubar),
            jac_f: model.jac_flux(ubar),
            lu: ja.lu(),
        })
    }

    pub fn multiplier(&self) -> &DVector<f64> {
        &self.g
    }

    pub fn jac_multiplier(&self) -> &DMatrix<f64> {
        &self.jac_g
    }

    /// `dA(ubar)^-1 (A(u) - A(ubar))`.
    fn pullback<M: Model1D + ?Sized>(&self, model: &M, u: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let da = model.a(u) - &self.a;
        let y = self.lu.solve(&da).unwrap_or_else(|| DVector::from_element(da.len(), f64::NAN));
        (da, y)
    }

    /// `eta(u|ubar)` alone.
    pub fn eta_rel<M: Model1D + ?Sized>(&self, model: &M, u: &DVector<f64>) -> f64 {
        let da = model.a(u) - &self.a;
        model.entropy(u) - self.eta - self.g.dot(&da)
    }

    /// `(eta(u|ubar), F(u|ubar), A(u) - A(ubar))`.
    pub fn eta_flux_rel<M: Model1D + ?Sized>(
        &self,
        model: &M,
        u: &DVector<f64>,
    ) -> (f64, DVector<f64>, DVector<f64>) {
        let (da, y) = self.pullback(model, u);
        let eta_rel = model.entropy(u) - self.eta - self.g.dot(&da);
        let f_rel = model.flux(u) - &self.flux - &self.jac_f * &y;
        (eta_rel, f_rel, da)
    }

    pub fn eval<M: Model1D + ?Sized>(&self, model: &M, u: &DVector<f64>) -> RelEnQuantities {
        let (da, y) = self.pullback(model, u);
        let gu = model.multiplier(u);
        let fu = model.flux(u);
        let eta_rel = model.entropy(u) - self.eta - self.g.dot(&da);
        let q_rel = model.entropy_flux(u) - self.q - self.g.dot(&(&fu - &self.flux));
        let f_rel = &fu - &self.flux - &self.jac_f * &y;
        let g_rel = &gu - &self.g - &self.jac_g * &y;
        let phi = &y - (u - &self.state);
        let l = model.jac_multiplier(u) - &self.jac_g - contract_last(&model.hess_multiplier(&self.state), &y);
        RelEnQuantities { eta_rel, q_rel, f_rel, g_rel, phi, l }
    }
}

/// All six relative quantities of `u` with respect to `ubar`.
pub fn relative_quantities<M: Model1D + ?Sized>(
    model: &M,
    u: &DVector<f64>,
    ubar: &DVector<f64>,
) -> Result<RelEnQuantities> {
    if u.len() != model.dim() {
        return Err(Error::Shape(format!("state has {} components, model needs {}", u.len(), model.dim())));
    }
    Ok(Reference::new(model, ubar)?.eval(model, u))
}

/// Gas relative quantities in thermodynamic form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GasRelEn {
    /// `psi - psibar - sigmabar (u - ubar) + etabar (theta - thetabar)`
    pub psi_rel: f64,
    /// First-order Taylor remainder of `eta` at `(ubar, thetabar)`.
    pub eta_rel_gas: f64,
    /// First-order Taylor remainder of `sigma` at `(ubar, thetabar)`.
    pub sigma_rel: f64,
    /// `psi_rel + (v - vbar)^2 / 2 + (eta - etabar)(theta - thetabar)`
    pub i_density: f64,
    /// `eta_hat(U|Ubar) = i_density / thetabar` with `eta_hat = -eta`.
    pub eta_hat_rel: f64,
}

/// Tolerance for the agreement of the two routes to `eta_hat(U|Ubar)`.
pub const GAS_CROSS_TOL: f64 = 1e-10;

/// Closed-form gas relative quantities. The thermodynamic density is checked
/// against the general formula through the embedding; a disagreement beyond
/// [`GAS_CROSS_TOL`] (relative to `max(1, I)`) is reported as an error.
pub fn gas_relative_quantities(gas: &GasModel, s: &GasState, sbar: &GasState) -> Result<GasRelEn> {
    let q = gas_relative_closed_form(gas, s, sbar);
    let sys = embed_gas_as_general(*gas);
    let general = Reference::new(&sys, &sbar.to_vector())?.eta_rel(&sys, &s.to_vector());
    let gap = (general * sbar.theta() - q.i_density).abs();
    if gap > GAS_CROSS_TOL * q.i_density.abs().max(1.0) {
        return Err(Error::Precondition(format!(
            "thermodynamic and general relative entropy disagree by {gap:e}"
        )));
    }
    Ok(q)
}

/// The thermodynamic formulas alone, without the cross-check.
pub fn gas_relative_closed_form(gas: &GasModel, s: &GasState, sbar: &GasState) -> GasRelEn {
    let (u, v, th) = (s.u(), s.v(), s.theta());
    let (ub, vb, tb) = (sbar.u(), sbar.v(), sbar.theta());
    let c = gas.partials(u, th);
    let cb = gas.partials(ub, tb);
    let psi_rel = c.psi - cb.psi - cb.sigma * (u - ub) + cb.eta * (th - tb);
    let eta_rel_gas = c.eta - cb.eta - cb.eta_u * (u - ub) - cb.eta_theta * (th - tb);
    let sigma_rel = c.sigma - cb.sigma - cb.sigma_u * (u - ub) - cb.sigma_theta * (th - tb);
    let i_density = psi_rel + 0.5 * (v - vb) * (v - vb) + (c.eta - cb.eta) * (th - tb);
    GasRelEn { psi_rel, eta_rel_gas, sigma_rel, i_density, eta_hat_rel: i_density / tb }
}
