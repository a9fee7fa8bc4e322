//! Viscous, heat-conducting gas in Lagrangean coordinates with a free-energy
//! constitutive theory, and its embedding into the general [`Model1D`] form.
//!
//! The embedding uses `U = (u, v, theta)`,
//! `A(U) = (u, v, v^2/2 + e)`, `F(U) = -(v, sigma, v sigma)`,
//! `G(U) = (sigma/theta, v/theta, -1/theta)` and the mathematical entropy
//! `eta_hat(U) = -eta(u, theta)`; the entropy flux vanishes.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{DerivativePath, Model1D};
use crate::error::{Error, Result};

/// A pointwise gas state: specific volume `u > 0`, velocity `v`, temperature `theta > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GasState {
    u: f64,
    v: f64,
    theta: f64,
}

impl GasState {
    pub fn new(u: f64, v: f64, theta: f64) -> Result<Self> {
        if !(u.is_finite() && v.is_finite() && theta.is_finite()) {
            return Err(Error::Domain(format!("non-finite gas state ({u}, {v}, {theta})")));
        }
        if u <= 0.0 {
            return Err(Error::Domain(format!("specific volume u = {u} must be positive")));
        }
        if theta <= 0.0 {
            return Err(Error::Domain(format!("temperature theta = {theta} must be positive")));
        }
        Ok(Self { u, v, theta })
    }

    pub fn from_vector(x: &DVector<f64>) -> Result<Self> {
        if x.len() != 3 {
            return Err(Error::Shape(format!("gas state needs 3 components, got {}", x.len())));
        }
        Self::new(x[0], x[1], x[2])
    }

    pub fn u(&self) -> f64 {
        self.u
    }
    pub fn v(&self) -> f64 {
        self.v
    }
    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_vec(vec![self.u, self.v, self.theta])
    }
}

/// A transport coefficient law for viscosity or heat conductivity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", content = "value", rename_all = "kebab-case")]
pub enum Coefficient {
    /// `c`
    Constant(f64),
    /// `c * theta`
    ThetaProportional(f64),
}

impl Coefficient {
    pub fn eval(&self, _u: f64, theta: f64) -> f64 {
        match *self {
            Coefficient::Constant(c) => c,
            Coefficient::ThetaProportional(c) => c * theta,
        }
    }

    pub fn scale(&self) -> f64 {
        match *self {
            Coefficient::Constant(c) | Coefficient::ThetaProportional(c) => c,
        }
    }

    pub fn with_scale(&self, c: f64) -> Self {
        match self {
            Coefficient::Constant(_) => Coefficient::Constant(c),
            Coefficient::ThetaProportional(_) => Coefficient::ThetaProportional(c),
        }
    }
}

/// Constitutive values and partial derivatives at `(u, theta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constitutive {
    pub psi: f64,
    pub psi_uu: f64,
    pub sigma: f64,
    pub sigma_u: f64,
    pub sigma_theta: f64,
    pub sigma_uu: f64,
    pub sigma_utheta: f64,
    pub sigma_thetatheta: f64,
    pub eta: f64,
    pub eta_u: f64,
    pub eta_theta: f64,
    pub eta_uu: f64,
    pub eta_utheta: f64,
    pub eta_thetatheta: f64,
    pub e: f64,
    pub e_u: f64,
    pub e_theta: f64,
    pub e_uu: f64,
    pub e_utheta: f64,
    pub e_thetatheta: f64,
}

/// Ideal gas with free energy `psi = -R theta ln u - c_v theta ln theta + c_v theta`.
///
/// The affine term `c_v theta` fixes the gauge so that `e = c_v theta`; affine
/// changes of `psi` do not affect the dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GasModel {
    pub gas_constant: f64,
    pub cv: f64,
    pub mu: Coefficient,
    pub kappa: Coefficient,
}

/// Build an ideal gas with zero viscosity and conductivity.
pub fn ideal_gas_model(gas_constant: f64, cv: f64) -> Result<GasModel> {
    if !(gas_constant > 0.0 && gas_constant.is_finite()) {
        return Err(Error::param("R", format!("must be positive, got {gas_constant}")));
    }
    if !(cv > 0.0 && cv.is_finite()) {
        return Err(Error::param("c_v", format!("must be positive, got {cv}")));
    }
    Ok(GasModel {
        gas_constant,
        cv,
        mu: Coefficient::Constant(0.0),
        kappa: Coefficient::Constant(0.0),
    })
}

impl GasModel {
    pub fn with_transport(mut self, mu: Coefficient, kappa: Coefficient) -> Result<Self> {
        if mu.scale() < 0.0 || kappa.scale() < 0.0 {
            return Err(Error::param("mu/kappa", "transport coefficients must be nonnegative"));
        }
        self.mu = mu;
        self.kappa = kappa;
        Ok(self)
    }

    pub fn psi(&self, u: f64, theta: f64) -> f64 {
        let (r, cv) = (self.gas_constant, self.cv);
        -r * theta * u.ln() - cv * theta * theta.ln() + cv * theta
    }

    pub fn sigma(&self, u: f64, theta: f64) -> f64 {
        -self.gas_constant * theta / u
    }

    pub fn eta(&self, u: f64, theta: f64) -> f64 {
        self.gas_constant * u.ln() + self.cv * theta.ln()
    }

    pub fn e(&self, _u: f64, theta: f64) -> f64 {
        self.cv * theta
    }

    pub fn mu_at(&self, u: f64, theta: f64) -> f64 {
        self.mu.eval(u, theta)
    }

    pub fn kappa_at(&self, u: f64, theta: f64) -> f64 {
        self.kappa.eval(u, theta)
    }

    /// Temperature from specific volume and internal energy.
    pub fn theta_from_energy(&self, _u: f64, e: f64) -> f64 {
        e / self.cv
    }

    pub fn partials(&self, u: f64, theta: f64) -> Constitutive {
        let (r, cv) = (self.gas_constant, self.cv);
        let u2 = u * u;
        Constitutive {
            psi: self.psi(u, theta),
            psi_uu: r * theta / u2,
            sigma: -r * theta / u,
            sigma_u: r * theta / u2,
            sigma_theta: -r / u,
            sigma_uu: -2.0 * r * theta / (u2 * u),
            sigma_utheta: r / u2,
            sigma_thetatheta: 0.0,
            eta: self.eta(u, theta),
            eta_u: r / u,
            eta_theta: cv / theta,
            eta_uu: -r / u2,
            eta_utheta: 0.0,
            eta_thetatheta: -cv / (theta * theta),
            e: cv * theta,
            e_u: 0.0,
            e_theta: cv,
            e_uu: 0.0,
            e_utheta: 0.0,
            e_thetatheta: 0.0,
        }
    }

    /// Lagrangean sound speed `sqrt(sigma_u + theta sigma_theta^2 / e_theta)`.
    pub fn sound_speed(&self, u: f64, theta: f64) -> f64 {
        let c = self.partials(u, theta);
        (c.sigma_u + theta * c.sigma_theta * c.sigma_theta / c.e_theta)
            .max(0.0)
            .sqrt()
    }
}

/// The gas written as a general system; see the module docs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GasSystem {
    pub gas: GasModel,
}

pub fn embed_gas_as_general(gas: GasModel) -> GasSystem {
    GasSystem { gas }
}

impl GasSystem {
    fn unpack(x: &DVector<f64>) -> (f64, f64, f64) {
        (x[0], x[1], x[2])
    }
}

impl Model1D for GasSystem {
    fn name(&self) -> &str {
        "ideal-gas"
    }

    fn dim(&self) -> usize {
        3
    }

    fn admissible(&self, x: &DVector<f64>) -> bool {
        x.len() == 3 && x.iter().all(|c| c.is_finite()) && x[0] > 0.0 && x[2] > 0.0
    }

    fn a(&self, x: &DVector<f64>) -> DVector<f64> {
        let (u, v, th) = Self::unpack(x);
        DVector::from_vec(vec![u, v, 0.5 * v * v + self.gas.e(u, th)])
    }

    fn flux(&self, x: &DVector<f64>) -> DVector<f64> {
        let (u, v, th) = Self::unpack(x);
        let s = self.gas.sigma(u, th);
        DVector::from_vec(vec![-v, -s, -v * s])
    }

    fn entropy(&self, x: &DVector<f64>) -> f64 {
        let (u, _, th) = Self::unpack(x);
        -self.gas.eta(u, th)
    }

    fn entropy_flux(&self, _x: &DVector<f64>) -> f64 {
        0.0
    }

    fn multiplier(&self, x: &DVector<f64>) -> DVector<f64> {
        let (u, v, th) = Self::unpack(x);
        let s = self.gas.sigma(u, th);
        DVector::from_vec(vec![s / th, v / th, -1.0 / th])
    }

    fn viscosity(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let (u, v, th) = Self::unpack(x);
        let mu = self.gas.mu_at(u, th);
        let kappa = self.gas.kappa_at(u, th);
        DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 0.0, mu, 0.0, 0.0, mu * v, kappa])
    }

    fn derivative_path(&self) -> DerivativePath {
        DerivativePath::Analytic
    }

    fn jac_a(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let (u, v, th) = Self::unpack(x);
        let c = self.gas.partials(u, th);
        DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, c.e_u, v, c.e_theta])
    }

    fn jac_flux(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let (u, v, th) = Self::unpack(x);
        let c = self.gas.partials(u, th);
        -DMatrix::from_row_slice(
            3,
            3,
            &[
                0.0,
                1.0,
                0.0,
                c.sigma_u,
                0.0,
                c.sigma_theta,
                v * c.sigma_u,
                c.sigma,
                v * c.sigma_theta,
            ],
        )
    }

    fn jac_multiplier(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let (u, v, th) = Self::unpack(x);
        let c = self.gas.partials(u, th);
        let th2 = th * th;
        DMatrix::from_row_slice(
            3,
            3,
            &[
                c.sigma_u / th,
                0.0,
                c.sigma_theta / th - c.sigma / th2,
                0.0,
                1.0 / th,
                -v / th2,
                0.0,
                0.0,
                1.0 / th2,
            ],
        )
    }

    fn grad_entropy(&self, x: &DVector<f64>) -> DVector<f64> {
        let (u, _, th) = Self::unpack(x);
        let c = self.gas.partials(u, th);
        DVector::from_vec(vec![-c.eta_u, 0.0, -c.eta_theta])
    }

    fn hess_entropy(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let (u, _, th) = Self::unpack(x);
        let c = self.gas.partials(u, th);
        -DMatrix::from_row_slice(
            3,
            3,
            &[
                c.eta_uu,
                0.0,
                c.eta_utheta,
                0.0,
                0.0,
                0.0,
                c.eta_utheta,
                0.0,
                c.eta_thetatheta,
            ],
        )
    }

    fn hess_a(&self, x: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let (u, _, th) = Self::unpack(x);
        let c = self.gas.partials(u, th);
        let zero = DMatrix::zeros(3, 3);
        let a3 = DMatrix::from_row_slice(
            3,
            3,
            &[c.e_uu, 0.0, c.e_utheta, 0.0, 1.0, 0.0, c.e_utheta, 0.0, c.e_thetatheta],
        );
        vec![zero.clone(), zero, a3]
    }

    fn hess_multiplier(&self, x: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let (u, v, th) = Self::unpack(x);
        let c = self.gas.partials(u, th);
        let (th2, th3) = (th * th, th * th * th);
        // G1 = sigma / theta
        let g1_uu = c.sigma_uu / th;
        let g1_ut = c.sigma_utheta / th - c.sigma_u / th2;
        let g1_tt = c.sigma_thetatheta / th - 2.0 * c.sigma_theta / th2 + 2.0 * c.sigma / th3;
        let h1 = DMatrix::from_row_slice(3, 3, &[g1_uu, 0.0, g1_ut, 0.0, 0.0, 0.0, g1_ut, 0.0, g1_tt]);
        // G2 = v / theta
        let h2 = DMatrix::from_row_slice(
            3,
            3,
            &[0.0, 0.0, 0.0, 0.0, 0.0, -1.0 / th2, 0.0, -1.0 / th2, 2.0 * v / th3],
        );
        // G3 = -1 / theta
        let h3 = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -2.0 / th3]);
        vec![h1, h2, h3]
    }

    fn recover(&self, w: &DVector<f64>, _guess: &DVector<f64>) -> Result<DVector<f64>> {
        let (u, v) = (w[0], w[1]);
        let e = w[2] - 0.5 * v * v;
        let th = self.gas.theta_from_energy(u, e);
        let out = DVector::from_vec(vec![u, v, th]);
        if self.admissible(&out) {
            Ok(out)
        } else {
            Err(Error::Domain(format!(
                "recovered state (u, v, theta) = ({u}, {v}, {th}) is not admissible"
            )))
        }
    }

    fn wave_speed(&self, x: &DVector<f64>) -> f64 {
        self.gas.sound_speed(x[0], x[2])
    }

    fn diffusion_norm(&self, x: &DVector<f64>) -> f64 {
        let (u, _, th) = Self::unpack(x);
        let c = self.gas.partials(u, th);
        self.gas
            .mu_at(u, th)
            .abs()
            .max(self.gas.kappa_at(u, th).abs() / c.e_theta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::numeric_jacobian;
    use approx::assert_abs_diff_eq;

    fn unit_gas() -> GasModel {
        ideal_gas_model(1.0, 1.0).unwrap()
    }

    #[test]
    fn ideal_gas_values_at_unit_state() {
        let g = unit_gas();
        assert_abs_diff_eq!(g.psi(1.0, 1.0), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.sigma(1.0, 1.0), -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.eta(1.0, 1.0), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.e(1.0, 1.0), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn ideal_gas_values_at_theta_e() {
        let g = unit_gas();
        let e1 = std::f64::consts::E;
        assert_abs_diff_eq!(g.eta(1.0, e1), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.e(1.0, e1), e1, epsilon = 1e-15);
    }

    #[test]
    fn rejects_nonpositive_parameters() {
        assert!(matches!(ideal_gas_model(0.0, 1.0), Err(Error::Parameter { .. })));
        assert!(matches!(ideal_gas_model(1.0, -2.0), Err(Error::Parameter { .. })));
    }

    #[test]
    fn gas_state_enforces_positivity() {
        assert!(GasState::new(0.0, 0.0, 1.0).is_err());
        assert!(GasState::new(1.0, 0.0, -1.0).is_err());
        assert!(GasState::new(1.0, -3.0, 1.0).is_ok());
    }

    #[test]
    fn constitutive_relations_match_free_energy() {
        let g = ideal_gas_model(0.7, 2.3).unwrap();
        for &(u, th) in &[(0.6, 0.9), (1.7, 1.3), (3.0, 0.4)] {
            let h = 1e-5;
            let psi_u = (g.psi(u + h, th) - g.psi(u - h, th)) / (2.0 * h);
            let psi_t = (g.psi(u, th + h) - g.psi(u, th - h)) / (2.0 * h);
            assert_abs_diff_eq!(psi_u, g.sigma(u, th), epsilon = 1e-8);
            assert_abs_diff_eq!(-psi_t, g.eta(u, th), epsilon = 1e-8);
            assert_abs_diff_eq!(g.psi(u, th) + th * g.eta(u, th), g.e(u, th), epsilon = 1e-12);
            let c = g.partials(u, th);
            assert_abs_diff_eq!(c.sigma_theta, -c.eta_u, epsilon = 1e-14);
            assert_abs_diff_eq!(c.e_theta, th * c.eta_theta, epsilon = 1e-14);
            assert_abs_diff_eq!(c.e_u, c.sigma - th * c.sigma_theta, epsilon = 1e-14);
        }
    }

    #[test]
    fn embedding_at_rest_state() {
        let sys = embed_gas_as_general(unit_gas());
        let x = DVector::from_vec(vec![1.0, 0.0, 1.0]);
        assert_eq!(sys.multiplier(&x).as_slice(), &[-1.0, 0.0, -1.0]);
        assert_eq!(sys.a(&x).as_slice(), &[1.0, 0.0, 1.0]);
    }

    #[test]
    fn embedding_with_zero_velocity() {
        let gas = unit_gas()
            .with_transport(Coefficient::Constant(0.3), Coefficient::Constant(0.8))
            .unwrap();
        let sys = embed_gas_as_general(gas);
        let x = DVector::from_vec(vec![1.4, 0.0, 0.6]);
        let f = sys.flux(&x);
        assert_eq!(f[0], 0.0);
        assert_abs_diff_eq!(f[1], -gas.sigma(1.4, 0.6), epsilon = 1e-15);
        assert_eq!(f[2], 0.0);
        let b = sys.viscosity(&x);
        assert_eq!(b.row(2).iter().copied().collect::<Vec<_>>(), vec![0.0, 0.0, 0.8]);
    }

    #[test]
    fn analytic_jacobians_match_finite_differences() {
        let gas = ideal_gas_model(1.3, 0.8).unwrap();
        let sys = embed_gas_as_general(gas);
        let x = DVector::from_vec(vec![1.2, 0.4, 0.9]);
        let ja = numeric_jacobian(|y| Ok(sys.a(y)), &x, None).unwrap();
        let jf = numeric_jacobian(|y| Ok(sys.flux(y)), &x, None).unwrap();
        let jg = numeric_jacobian(|y| Ok(sys.multiplier(y)), &x, None).unwrap();
        assert!((ja - sys.jac_a(&x)).amax() < 1e-8);
        assert!((jf - sys.jac_flux(&x)).amax() < 1e-8);
        assert!((jg - sys.jac_multiplier(&x)).amax() < 1e-8);
    }

    #[test]
    fn grad_a_matches_closed_form_at_unit_state() {
        let gas = unit_gas();
        let sys = embed_gas_as_general(gas);
        let x = DVector::from_vec(vec![1.0, 0.0, 1.0]);
        let ja = numeric_jacobian(|y| Ok(sys.a(y)), &x, None).unwrap();
        let c = gas.partials(1.0, 1.0);
        let expect =
            DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, c.e_u, 0.0, c.e_theta]);
        assert!((ja - expect).amax() < 1e-8);
    }

    #[test]
    fn analytic_hessians_match_finite_differences() {
        let sys = embed_gas_as_general(ideal_gas_model(1.0, 2.5).unwrap());
        let x = DVector::from_vec(vec![0.8, -0.6, 1.4]);
        let fd_g = crate::numeric::numeric_hessians(|y| Ok(sys.jac_multiplier(y)), &x).unwrap();
        for (a, b) in fd_g.iter().zip(sys.hess_multiplier(&x)) {
            assert!((a - b).amax() < 1e-6);
        }
        let fd_eta = crate::numeric::numeric_hessians(
            |y| Ok(DMatrix::from_row_slice(1, 3, sys.grad_entropy(y).as_slice())),
            &x,
        )
        .unwrap();
        assert!((&fd_eta[0] - sys.hess_entropy(&x)).amax() < 1e-6);
    }

    #[test]
    fn entropy_flux_vanishes_identically() {
        let sys = embed_gas_as_general(ideal_gas_model(1.0, 1.5).unwrap());
        for &(u, v, th) in &[(1.0, 0.0, 1.0), (0.5, 2.0, 3.0), (2.2, -1.1, 0.4)] {
            let x = DVector::from_vec(vec![u, v, th]);
            let gf = sys.jac_flux(&x).transpose() * sys.multiplier(&x);
            assert!(gf.amax() < 1e-14, "{gf}");
        }
    }

    #[test]
    fn closed_form_recovery() {
        let sys = embed_gas_as_general(unit_gas());
        let w = DVector::from_vec(vec![1.0, 0.0, 1.0]);
        let x = sys.recover(&w, &w).unwrap();
        assert_eq!(x.as_slice(), &[1.0, 0.0, 1.0]);
        assert!(sys.recover(&DVector::from_vec(vec![1.0, 2.0, 1.0]), &w).is_err());
    }

    #[test]
    fn sound_speed_matches_characteristic_spectrum() {
        let sys = embed_gas_as_general(ideal_gas_model(1.0, 2.5).unwrap());
        let x = DVector::from_vec(vec![1.3, 0.2, 0.7]);
        let m = sys.jac_a(&x).lu().solve(&sys.jac_flux(&x)).unwrap();
        let rho = m.complex_eigenvalues().iter().fold(0.0_f64, |a, z| a.max(z.norm()));
        assert_abs_diff_eq!(rho, sys.wave_speed(&x), epsilon = 1e-12);
    }
}
