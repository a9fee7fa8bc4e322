use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{DerivativePath, Model1D};

type VecFn = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
type ScalarFn = Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;
type MatFn = Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;

/// A model assembled from closures. Derivatives fall back to finite differences
/// unless a Jacobian closure is supplied.
///
/// Defaults: `A = id`, `F = 0`, `eta = q = 0`, `G = 0`, `B = 0`, no production.
#[derive(Clone)]
pub struct FnModel {
    name: String,
    n: usize,
    a: VecFn,
    flux: VecFn,
    eta: ScalarFn,
    q: ScalarFn,
    g: VecFn,
    b: MatFn,
    production: Option<VecFn>,
    jac_a: Option<MatFn>,
    jac_flux: Option<MatFn>,
    jac_g: Option<MatFn>,
    admissible: Option<PredFn>,
}

type PredFn = Arc<dyn Fn(&DVector<f64>) -> bool + Send + Sync>;

impl std::fmt::Debug for FnModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FnModel")
            .field("name", &self.name)
            .field("n", &self.n)
            .finish_non_exhaustive()
    }
}

pub struct FnModelBuilder {
    model: FnModel,
}

impl FnModel {
    pub fn builder(n: usize) -> FnModelBuilder {
        FnModelBuilder {
            model: FnModel {
                name: "closure-model".into(),
                n,
                a: Arc::new(|u| u.clone()),
                flux: Arc::new(move |u| DVector::zeros(u.len())),
                eta: Arc::new(|_| 0.0),
                q: Arc::new(|_| 0.0),
                g: Arc::new(move |u| DVector::zeros(u.len())),
                b: Arc::new(move |u| DMatrix::zeros(u.len(), u.len())),
                production: None,
                jac_a: None,
                jac_flux: None,
                jac_g: None,
                admissible: None,
            },
        }
    }
}

impl FnModelBuilder {
    pub fn name(mut self, name: &str) -> Self {
        self.model.name = name.to_string();
        self
    }

    pub fn a(mut self, f: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static) -> Self {
        self.model.a = Arc::new(f);
        self
    }

    pub fn flux(
        mut self,
        f: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        self.model.flux = Arc::new(f);
        self
    }

    pub fn entropy(mut self, f: impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'static) -> Self {
        self.model.eta = Arc::new(f);
        self
    }

    pub fn entropy_flux(
        mut self,
        f: impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.model.q = Arc::new(f);
        self
    }

    pub fn multiplier(
        mut self,
        f: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        self.model.g = Arc::new(f);
        self
    }

    pub fn viscosity(
        mut self,
        f: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        self.model.b = Arc::new(f);
        self
    }

    pub fn production(
        mut self,
        f: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        self.model.production = Some(Arc::new(f));
        self
    }

    pub fn jac_a(
        mut self,
        f: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        self.model.jac_a = Some(Arc::new(f));
        self
    }

    pub fn jac_flux(
        mut self,
        f: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        self.model.jac_flux = Some(Arc::new(f));
        self
    }

    pub fn jac_multiplier(
        mut self,
        f: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        self.model.jac_g = Some(Arc::new(f));
        self
    }

    pub fn admissible(mut self, f: impl Fn(&DVector<f64>) -> bool + Send + Sync + 'static) -> Self {
        self.model.admissible = Some(Arc::new(f));
        self
    }

    pub fn build(self) -> FnModel {
        self.model
    }
}

impl Model1D for FnModel {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.n
    }

    fn admissible(&self, u: &DVector<f64>) -> bool {
        u.iter().all(|x| x.is_finite()) && self.admissible.as_ref().is_none_or(|f| f(u))
    }

    fn a(&self, u: &DVector<f64>) -> DVector<f64> {
        (self.a)(u)
    }

    fn flux(&self, u: &DVector<f64>) -> DVector<f64> {
        (self.flux)(u)
    }

    fn entropy(&self, u: &DVector<f64>) -> f64 {
        (self.eta)(u)
    }

    fn entropy_flux(&self, u: &DVector<f64>) -> f64 {
        (self.q)(u)
    }

    fn multiplier(&self, u: &DVector<f64>) -> DVector<f64> {
        (self.g)(u)
    }

    fn viscosity(&self, u: &DVector<f64>) -> DMatrix<f64> {
        (self.b)(u)
    }

    fn production(&self, u: &DVector<f64>) -> Option<DVector<f64>> {
        self.production.as_ref().map(|p| p(u))
    }

    fn derivative_path(&self) -> DerivativePath {
        if self.jac_a.is_some() && self.jac_flux.is_some() && self.jac_g.is_some() {
            DerivativePath::Analytic
        } else {
            DerivativePath::FiniteDifference
        }
    }

    fn jac_a(&self, u: &DVector<f64>) -> DMatrix<f64> {
        match &self.jac_a {
            Some(j) => j(u),
            None => super::fd_jac(|x| self.a(x), u),
        }
    }

    fn jac_flux(&self, u: &DVector<f64>) -> DMatrix<f64> {
        match &self.jac_flux {
            Some(j) => j(u),
            None => super::fd_jac(|x| self.flux(x), u),
        }
    }

    fn jac_multiplier(&self, u: &DVector<f64>) -> DMatrix<f64> {
        match &self.jac_g {
            Some(j) => j(u),
            None => super::fd_jac(|x| self.multiplier(x), u),
        }
    }
}
