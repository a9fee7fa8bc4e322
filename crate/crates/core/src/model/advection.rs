use nalgebra::{DMatrix, DVector};

use super::{DerivativePath, Model1D};

/// Linear advection-diffusion `u_t + c u_x = eps b u_xx` for `n` decoupled
/// components, with the quadratic entropy `eta = |u|^2 / 2` and `G = u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearAdvection {
    pub n: usize,
    pub speed: f64,
    pub diffusivity: f64,
}

impl LinearAdvection {
    pub fn new(n: usize, speed: f64, diffusivity: f64) -> Self {
        Self {
            n,
            speed,
            diffusivity,
        }
    }
}

impl Model1D for LinearAdvection {
    fn name(&self) -> &str {
        "linear-advection"
    }

    fn dim(&self) -> usize {
        self.n
    }

    fn a(&self, u: &DVector<f64>) -> DVector<f64> {
        u.clone()
    }

    fn flux(&self, u: &DVector<f64>) -> DVector<f64> {
        u * self.speed
    }

    fn entropy(&self, u: &DVector<f64>) -> f64 {
        0.5 * u.norm_squared()
    }

    fn entropy_flux(&self, u: &DVector<f64>) -> f64 {
        0.5 * self.speed * u.norm_squared()
    }

    fn multiplier(&self, u: &DVector<f64>) -> DVector<f64> {
        u.clone()
    }

    fn viscosity(&self, _u: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::identity(self.n, self.n) * self.diffusivity
    }

    fn derivative_path(&self) -> DerivativePath {
        DerivativePath::Analytic
    }

    fn jac_a(&self, _u: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::identity(self.n, self.n)
    }

    fn jac_flux(&self, _u: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::identity(self.n, self.n) * self.speed
    }

    fn jac_multiplier(&self, _u: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::identity(self.n, self.n)
    }

    fn grad_entropy(&self, u: &DVector<f64>) -> DVector<f64> {
        u.clone()
    }

    fn hess_entropy(&self, _u: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::identity(self.n, self.n)
    }

    fn hess_a(&self, _u: &DVector<f64>) -> Vec<DMatrix<f64>> {
        vec![DMatrix::zeros(self.n, self.n); self.n]
    }

    fn hess_multiplier(&self, _u: &DVector<f64>) -> Vec<DMatrix<f64>> {
        vec![DMatrix::zeros(self.n, self.n); self.n]
    }

    fn recover(
        &self,
        w: &DVector<f64>,
        _guess: &DVector<f64>,
    ) -> crate::error::Result<DVector<f64>> {
        Ok(w.clone())
    }

    fn wave_speed(&self, _u: &DVector<f64>) -> f64 {
        self.speed.abs()
    }

    fn diffusion_norm(&self, _u: &DVector<f64>) -> f64 {
        self.diffusivity.abs()
    }
}
