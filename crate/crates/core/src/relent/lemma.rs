//! Empirical constants relating `eta(u|ubar)`, `|A(u) - A(ubar)|`, `|u - ubar|`,
//! `eta(u)` and `|F(u|ubar)|`.
//!
//! Reference states come from a [`SamplePlan`] restricted to the ball of radius
//! `m_radius` around `center`. For each reference, states `u` are drawn in the
//! inner ball `|u - center| <= r_radius` and in the shell
//! `r_radius <= |u - center| <= r_outer`, clipped to an optional box. The
//! extremal pairs are then polished by compass search.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Reference;
use crate::error::{Error, Result};
use crate::hypotheses::SamplePlan;
use crate::model::Model1D;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LemmaScanConfig {
    pub center: Vec<f64>,
    /// Radius `M` of the reference ball.
    pub m_radius: f64,
    /// Radius `R` separating the inner ball from the outer shell.
    pub r_radius: f64,
    /// Outer edge of the sampled shell.
    pub r_outer: f64,
    /// Exponent of the outer norm comparison.
    #[serde(default = "default_p")]
    pub p: f64,
    /// Samples per reference state in each region.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_refine")]
    pub refine_iters: usize,
    /// Componentwise bounds on `u`, e.g. positivity floors.
    #[serde(default)]
    pub lower: Option<Vec<f64>>,
    #[serde(default)]
    pub upper: Option<Vec<f64>>,
    /// Constant `B` added to `eta(u)` in the outer ratio. When absent it is
    /// chosen so that `eta + B >= 1` on the drawn outer samples.
    #[serde(default)]
    pub entropy_shift: Option<f64>,
}

fn default_p() -> f64 {
    2.0
}

fn default_samples() -> usize {
    2000
}

fn default_refine() -> usize {
    40
}

impl LemmaScanConfig {
    pub fn new(center: Vec<f64>, m_radius: f64, r_radius: f64, r_outer: f64) -> Self {
        LemmaScanConfig {
            center,
            m_radius,
            r_radius,
            r_outer,
            p: default_p(),
            samples: default_samples(),
            refine_iters: default_refine(),
            lower: None,
            upper: None,
            entropy_shift: None,
        }
    }

    pub fn with_bounds(mut self, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        self.lower = Some(lower);
        self.upper = Some(upper);
        self
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.center.len() != dim {
            return Err(Error::param("lemma.center", format!("need {dim} components")));
        }
        if !(self.m_radius > 0.0) {
            return Err(Error::param("lemma.M", "must be positive"));
        }
        if !(self.r_radius > self.m_radius) {
            return Err(Error::param("lemma.R", "must exceed M"));
        }
        if !(self.r_outer > self.r_radius) {
            return Err(Error::param("lemma.r_outer", "must exceed R"));
        }
        if !(self.p >= 1.0) {
            return Err(Error::param("lemma.p", "must be at least 1"));
        }
        if self.samples == 0 {
            return Err(Error::param("lemma.samples", "must be positive"));
        }
        for b in [&self.lower, &self.upper].into_iter().flatten() {
            if b.len() != dim {
                return Err(Error::param("lemma.bounds", format!("need {dim} components")));
            }
        }
        Ok(())
    }

    fn in_box(&self, u: &DVector<f64>) -> bool {
        let lo = self.lower.as_ref().is_none_or(|l| u.iter().zip(l).all(|(a, b)| a >= b));
        let hi = self.upper.as_ref().is_none_or(|h| u.iter().zip(h).all(|(a, b)| a <= b));
        lo && hi
    }
}

/// Pairs closer than this (relative) are skipped: the ratios have a removable
/// singularity at `u = ubar`, covered by the quadratic expansion instead, and
/// cancellation makes them unreliable nearby.
pub const COINCIDENT: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaWitness {
    pub u: Vec<f64>,
    pub ubar: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaBounds {
    /// `min eta(u|ubar) / |A(u) - A(ubar)|^2` over the inner ball.
    pub c1: f64,
    /// `min eta(u|ubar) / (eta(u) + B)` over the shell.
    pub c2: f64,
    /// `max |F(u|ubar)| / eta(u|ubar)` over both regions.
    pub c3: f64,
    /// `min eta(u|ubar) / |u - ubar|^2` over the inner ball.
    pub inner_norm_ratio: f64,
    /// `min eta(u|ubar) / |u - ubar|^p` over the shell.
    pub outer_norm_ratio: f64,
    pub entropy_shift: f64,
    pub p: f64,
    pub references: usize,
    pub inner_pairs: usize,
    pub outer_pairs: usize,
    /// Pairs dropped because `u` coincides with `ubar`.
    pub skipped: usize,
    pub witness_c1: Option<LemmaWitness>,
    pub witness_c2: Option<LemmaWitness>,
    pub witness_c3: Option<LemmaWitness>,
    pub pass: bool,
}

#[derive(Clone, Copy, PartialEq)]
enum Region {
    Inner,
    Outer,
}

#[derive(Clone, Copy)]
enum Ratio {
    C1,
    C2,
    C3,
    InnerNorm,
    OuterNorm,
}

impl Ratio {
    fn maximize(self) -> bool {
        matches!(self, Ratio::C3)
    }
}

struct Ctx<'a, M: ?Sized> {
    model: &'a M,
    cfg: &'a LemmaScanConfig,
    center: DVector<f64>,
    shift: f64,
}

impl<M: Model1D + ?Sized> Ctx<'_, M> {
    fn region_of(&self, u: &DVector<f64>) -> Option<Region> {
        if !self.cfg.in_box(u) || !self.model.admissible(u) {
            return None;
        }
        let r = (u - &self.center).norm();
        if r <= self.cfg.r_radius {
            Some(Region::Inner)
        } else if r <= self.cfg.r_outer {
            Some(Region::Outer)
        } else {
            None
        }
    }

    /// The ratio at `u`, or `None` when undefined or outside its region.
    fn eval(&self, ratio: Ratio, reference: &Reference, u: &DVector<f64>) -> Option<f64> {
        let region = self.region_of(u)?;
        let d = (u - &reference.state).norm();
        if d <= COINCIDENT * (1.0 + reference.state.norm()) {
            return None;
        }
        let wanted = match ratio {
            Ratio::C1 | Ratio::InnerNorm => Some(Region::Inner),
            Ratio::C2 | Ratio::OuterNorm => Some(Region::Outer),
            Ratio::C3 => None,
        };
        if wanted.is_some_and(|w| w != region) {
            return None;
        }
        let (eta_rel, f_rel, da) = reference.eta_flux_rel(self.model, u);
        let value = match ratio {
            Ratio::C1 => eta_rel / da.norm_squared(),
            Ratio::C2 => {
                let shifted = self.model.entropy(u) + self.shift;
                if shifted <= 0.0 {
                    return None;
                }
                eta_rel / shifted
            }
            Ratio::C3 => {
                if eta_rel <= 0.0 {
                    return Some(f64::INFINITY);
                }
                f_rel.norm() / eta_rel
            }
            Ratio::InnerNorm => eta_rel / (d * d),
            Ratio::OuterNorm => eta_rel / d.powf(self.cfg.p),
        };
        (!value.is_nan()).then_some(value)
    }

    /// Compass search from `start`, moving `u` only.
    fn refine(&self, ratio: Ratio, reference: &Reference, start: DVector<f64>, value: f64) -> (DVector<f64>, f64) {
        let n = start.len();
        let sign = if ratio.maximize() { -1.0 } else { 1.0 };
        let (mut best, mut fbest) = (start, sign * value);
        let mut step = 0.05 * self.cfg.r_radius;
        for _ in 0..self.cfg.refine_iters {
            let mut improved = false;
            for k in 0..2 * n {
                let mut cand = best.clone();
                cand[k / 2] += if k % 2 == 0 { step } else { -step };
                if let Some(v) = self.eval(ratio, reference, &cand) {
                    if sign * v < fbest {
                        best = cand;
                        fbest = sign * v;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        (best, sign * fbest)
    }
}

fn random_in_shell(rng: &mut ChaCha8Rng, center: &DVector<f64>, r0: f64, r1: f64) -> DVector<f64> {
    let n = center.len();
    let dir = loop {
        let g = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let norm = g.norm();
        if norm > 1e-12 {
            break g / norm;
        }
    };
    // Uniform in volume between the two radii.
    let (a, b) = (r0.powi(n as i32), r1.powi(n as i32));
    let r = (a + rng.random::<f64>() * (b - a)).powf(1.0 / n as f64);
    center + dir * r
}

struct Extremum {
    value: f64,
    u: Option<DVector<f64>>,
}

impl Extremum {
    fn new(maximize: bool) -> Self {
        Extremum { value: if maximize { f64::NEG_INFINITY } else { f64::INFINITY }, u: None }
    }

    fn offer(&mut self, maximize: bool, v: f64, u: &DVector<f64>) {
        if (maximize && v > self.value) || (!maximize && v < self.value) {
            self.value = v;
            self.u = Some(u.clone());
        }
    }
}

const RATIOS: [Ratio; 5] = [Ratio::C1, Ratio::C2, Ratio::C3, Ratio::InnerNorm, Ratio::OuterNorm];

struct PerReference {
    ubar: DVector<f64>,
    best: Vec<Extremum>,
    inner: usize,
    outer: usize,
    skipped: usize,
}

/// Scans the constants over the configured regions.
pub fn lemma_bounds_scan<M: Model1D + ?Sized>(
    model: &M,
    config: &LemmaScanConfig,
    plan: &SamplePlan,
) -> Result<LemmaBounds> {
    let n = model.dim();
    config.validate(n)?;
    let center = DVector::from_vec(config.center.clone());
    let refs: Vec<DVector<f64>> = plan
        .states()?
        .into_iter()
        .filter(|s| s.len() == n && (s - &center).norm() <= config.m_radius && model.admissible(s))
        .collect();
    if refs.is_empty() {
        return Err(Error::Precondition("no admissible reference state within radius M".into()));
    }

    // Draw all samples first so that the automatic shift sees the outer set.
    let draws: Vec<(Samples, Samples)> = (0..refs.len())
        .map(|j| {
            let mut rng = ChaCha8Rng::seed_from_u64(plan.seed ^ 0x5eed_1e77a);
            rng.set_stream(j as u64 + 1);
            let inner = (0..config.samples)
                .map(|_| random_in_shell(&mut rng, &center, 0.0, config.r_radius))
                .collect();
            let outer = (0..config.samples)
                .map(|_| random_in_shell(&mut rng, &center, config.r_radius, config.r_outer))
                .collect();
            (inner, outer)
        })
        .collect();
    let shift = config.entropy_shift.unwrap_or_else(|| {
        let min_eta = draws
            .iter()
            .flat_map(|(_, o)| o.iter())
            .filter(|u| config.in_box(u) && model.admissible(u))
            .map(|u| model.entropy(u))
            .fold(f64::INFINITY, f64::min);
        if min_eta.is_finite() { (1.0 - min_eta).max(0.0) } else { 0.0 }
    });
    let ctx = Ctx { model, cfg: config, center, shift };

    let per_ref = refs
        .par_iter()
        .zip(draws.par_iter())
        .map(|(ubar, (inner, outer))| -> Result<PerReference> {
            let reference = Reference::new(model, ubar)?;
            let mut best: Vec<Extremum> = RATIOS.iter().map(|r| Extremum::new(r.maximize())).collect();
            let (mut n_in, mut n_out, mut skipped) = (0, 0, 0);
            for u in inner.iter().chain(outer) {
                let Some(region) = ctx.region_of(u) else { continue };
                if (u - ubar).norm() <= COINCIDENT * (1.0 + ubar.norm()) {
                    skipped += 1;
                    continue;
                }
                match region {
                    Region::Inner => n_in += 1,
                    Region::Outer => n_out += 1,
                }
                for (r, b) in RATIOS.iter().zip(best.iter_mut()) {
                    if let Some(v) = ctx.eval(*r, &reference, u) {
                        b.offer(r.maximize(), v, u);
                    }
                }
            }
            for (r, b) in RATIOS.iter().zip(best.iter_mut()) {
                if let Some(u0) = b.u.take() {
                    if b.value.is_finite() {
                        let (u1, v1) = ctx.refine(*r, &reference, u0, b.value);
                        b.value = v1;
                        b.u = Some(u1);
                    } else {
                        b.u = Some(u0);
                    }
                }
            }
            Ok(PerReference { ubar: ubar.clone(), best, inner: n_in, outer: n_out, skipped })
        })
        .collect::<Result<Vec<_>>>()?;

    let pick = |idx: usize| -> (f64, Option<LemmaWitness>) {
        let maximize = RATIOS[idx].maximize();
        let mut out = (if maximize { f64::NEG_INFINITY } else { f64::INFINITY }, None);
        for p in &per_ref {
            let b = &p.best[idx];
            let better = if maximize { b.value > out.0 } else { b.value < out.0 };
            if better {
                out = (
                    b.value,
                    b.u.as_ref().map(|u| LemmaWitness {
                        u: u.iter().copied().collect(),
                        ubar: p.ubar.iter().copied().collect(),
                        value: b.value,
                    }),
                );
            }
        }
        out
    };
    let (c1, w1) = pick(0);
    let (c2, w2) = pick(1);
    let (c3, w3) = pick(2);
    let (inner_norm_ratio, _) = pick(3);
    let (outer_norm_ratio, _) = pick(4);
    let inner_pairs: usize = per_ref.iter().map(|p| p.inner).sum();
    let outer_pairs: usize = per_ref.iter().map(|p| p.outer).sum();
    let pass = inner_pairs > 0 && outer_pairs > 0 && c1 > 0.0 && c2 > 0.0 && c3.is_finite();
    Ok(LemmaBounds {
        c1,
        c2,
        c3,
        inner_norm_ratio,
        outer_norm_ratio,
        entropy_shift: shift,
        p: config.p,
        references: per_ref.len(),
        inner_pairs,
        outer_pairs,
        skipped: per_ref.iter().map(|p| p.skipped).sum(),
        witness_c1: w1,
        witness_c2: w2,
        witness_c3: w3,
        pass,
    })
}

type Samples = Vec<DVector<f64>>;
