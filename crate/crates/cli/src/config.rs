//! JSON run configuration.

use std::path::{Path, PathBuf};

use relentropy_core::experiments::{InitialData, Perturbation, ReferencePolicy};
use relentropy_core::hypotheses::SamplePlan;
use relentropy_core::relent::LemmaScanConfig;
use relentropy_core::solver::{Grid1D, ManufacturedSolution};
use relentropy_core::{ideal_gas_model, Coefficient, GasModel};
use serde::{Deserialize, Serialize};

use crate::Failure;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// When present, must name the invoked subcommand.
    #[serde(default)]
    pub subcommand: Option<String>,
    #[serde(default)]
    pub model: Option<ModelSection>,
    #[serde(default)]
    pub grid: Option<GridSection>,
    #[serde(default)]
    pub solver: Option<SolverSection>,
    #[serde(default)]
    pub study: StudySection,
    #[serde(default)]
    pub sampling: Option<SamplePlan>,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSection {
    IdealGas {
        #[serde(default = "one")]
        gas_constant: f64,
        #[serde(default = "one")]
        cv: f64,
        /// Viscosity law at unit scale.
        #[serde(default = "unit_law")]
        mu: Coefficient,
        #[serde(default = "unit_law")]
        kappa: Coefficient,
    },
    LinearAdvection {
        #[serde(default = "one_usize")]
        components: usize,
        #[serde(default = "one")]
        speed: f64,
        #[serde(default = "one")]
        diffusivity: f64,
    },
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection::IdealGas { gas_constant: 1.0, cv: 1.0, mu: unit_law(), kappa: unit_law() }
    }
}

impl ModelSection {
    pub fn cli_name(&self) -> &'static str {
        match self {
            ModelSection::IdealGas { .. } => "ideal-gas",
            ModelSection::LinearAdvection { .. } => "linear-advection",
        }
    }

    pub fn gas(&self) -> Result<GasModel, Failure> {
        match self {
            ModelSection::IdealGas { gas_constant, cv, mu, kappa } => {
                Ok(ideal_gas_model(*gas_constant, *cv)?.with_transport(*mu, *kappa)?)
            }
            other => Err(Failure::usage(format!("model.name: this subcommand needs ideal-gas, got {}", other.cli_name()))),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(rename = "N")]
    pub n: i64,
    #[serde(default = "tau")]
    pub length: f64,
}

impl GridSection {
    pub fn cells(&self) -> Result<usize, Failure> {
        if self.n < Grid1D::MIN_CELLS as i64 {
            return Err(Failure::usage(format!("grid.N: need at least {} cells, got {}", Grid1D::MIN_CELLS, self.n)));
        }
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(Failure::usage("grid.length: must be positive"));
        }
        Ok(self.n as usize)
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default)]
    pub eps: Option<f64>,
    #[serde(default)]
    pub t_final: Option<f64>,
    #[serde(default)]
    pub cfl_hyp: Option<f64>,
    #[serde(default)]
    pub cfl_par: Option<f64>,
    #[serde(default)]
    pub output_every: Option<f64>,
    #[serde(default)]
    pub inviscid_dissipation: Option<f64>,
    #[serde(default)]
    pub dt_max: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    #[serde(default)]
    pub eps_list: Option<Vec<f64>>,
    #[serde(default)]
    pub deltas: Option<Vec<f64>>,
    #[serde(default)]
    pub mu0: Option<Vec<f64>>,
    #[serde(default)]
    pub k0: Option<Vec<f64>>,
    #[serde(default)]
    pub band: Option<(f64, f64)>,
    #[serde(default)]
    pub reference: Option<ReferencePolicy>,
    #[serde(default)]
    pub init: Option<InitialData>,
    #[serde(default)]
    pub perturbation: Option<Perturbation>,
    #[serde(default)]
    pub perturbation_amplitude: Option<f64>,
    #[serde(default)]
    pub amplification_cap: Option<f64>,
    #[serde(default)]
    pub constant_spread: Option<f64>,
    #[serde(default)]
    pub gamma_m: Option<f64>,
    #[serde(default)]
    pub gamma_delta: Option<f64>,
    #[serde(default)]
    pub blowup_factor: Option<f64>,
    #[serde(default)]
    pub h0_targets: Option<Vec<f64>>,
    #[serde(default)]
    pub rate_spread: Option<f64>,
    #[serde(default)]
    pub measures: Option<MeasureSection>,
    #[serde(default)]
    pub lemma: Option<LemmaScanConfig>,
    #[serde(default)]
    pub case: Option<CaseSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSection {
    #[serde(default = "thousand")]
    pub count: usize,
    #[serde(default = "one_usize")]
    pub cells: usize,
    #[serde(default = "four")]
    pub max_atoms: usize,
    #[serde(default)]
    pub lower: Option<Vec<f64>>,
    #[serde(default)]
    pub upper: Option<Vec<f64>>,
    #[serde(default)]
    pub ubar: Option<Vec<f64>>,
    /// Radius of the reference ball in the `|Z| <= C H` scan; defaults to `|ubar|`.
    #[serde(default)]
    pub m_radius: Option<f64>,
    /// JSON file with a list of measures, used instead of random ones.
    #[serde(default)]
    pub file: Option<PathBuf>,
}

impl Default for MeasureSection {
    fn default() -> Self {
        MeasureSection {
            count: thousand(),
            cells: 1,
            max_atoms: four(),
            lower: None,
            upper: None,
            ubar: None,
            m_radius: None,
            file: None,
        }
    }
}

/// One side of a relative-entropy pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum CaseSide {
    /// A trajectory written by `simulate`.
    File(PathBuf),
    /// A closed-form state sampled on the grid, with its forcing recorded.
    Manufactured(ManufacturedSolution),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseSection {
    pub trajectory: CaseSide,
    pub reference: CaseSide,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default)]
    pub path: Option<PathBuf>,
    /// Metadata sidecar; defaults to `<path>.meta.json`.
    #[serde(default)]
    pub metadata: Option<PathBuf>,
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

fn four() -> usize {
    4
}

fn thousand() -> usize {
    1000
}

fn tau() -> f64 {
    std::f64::consts::TAU
}

fn unit_law() -> Coefficient {
    Coefficient::Constant(1.0)
}

/// Reads and schema-checks a configuration file. Errors carry the key path.
pub fn parse_config(path: &Path) -> Result<RunConfig, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    parse_str(&text)
}

pub fn parse_str(text: &str) -> Result<RunConfig, Failure> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let at = e.path().to_string();
        Failure::usage(format!("config error at `{at}`: {}", e.inner()))
    })
}

impl RunConfig {
    pub fn grid_cells(&self, default: usize) -> Result<usize, Failure> {
        self.grid.map_or(Ok(default), |g| g.cells())
    }

    pub fn length(&self) -> f64 {
        self.grid.map_or(tau(), |g| g.length)
    }

    pub fn model(&self) -> ModelSection {
        self.model.clone().unwrap_or_default()
    }

    pub fn solver(&self) -> SolverSection {
        self.solver.unwrap_or_default()
    }

    /// Rejects configs that give both an `eps` scale and a `(mu0, k0)` sweep.
    pub fn check_viscosity(&self) -> Result<(), Failure> {
        let eps = self.solver().eps.is_some() || self.study.eps_list.is_some();
        let laws = self.study.mu0.is_some() || self.study.k0.is_some();
        if eps && laws {
            return Err(Failure::usage(
                "ambiguous viscosity specification: give either eps or (mu0, k0), not both",
            ));
        }
        Ok(())
    }
}
