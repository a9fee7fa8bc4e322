//! Discrete residuals of the relative-entropy identities along pairs of trajectories.
//!
//! Space derivatives are periodic central differences, time derivatives are
//! central differences over snapshots (one-sided three-point at the ends), so
//! for exact solutions every residual is `O(dx^2 + dt^2)`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use super::Reference;
use crate::error::{Error, Result};
use crate::model::{GasModel, GasState, Model1D};
use crate::numeric::{pairwise_sum, periodic_dx, periodic_dx_vec, time_derivative, trapezoid_weights};
use crate::relent::gas_relative_closed_form;
use crate::solver::Trajectory;

/// Terms of the general identity at one grid point.
///
/// The assembled identity is
/// `lhs_time + q_rel_flux + eps D = hyp_term + eps (J_flux + sum Q) + source_term`
/// and `residual` is the left side minus the right side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TermRow {
    pub t: f64,
    pub x: f64,
    pub eta_rel: f64,
    /// `d_t eta(u|ubar)`
    pub lhs_time: f64,
    /// `d_x q(u|ubar)`
    pub q_rel_flux: f64,
    pub d: f64,
    /// `d_x (J + j)`
    pub j_flux: f64,
    pub q: [f64; 6],
    /// `-d_x G(ubar) . F(u|ubar)`
    pub hyp_term: f64,
    /// `Sbar . G(u|ubar) + (G(u) - G(ubar)) . (S - Sbar)`
    pub source_term: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelEnBreakdown {
    pub eps: f64,
    pub n_times: usize,
    pub n_cells: usize,
    /// Snapshot-major: row `k * n_cells + i`.
    pub rows: Vec<TermRow>,
    /// Space-time L1 norm of the residual (midpoint in x, trapezoid in t).
    pub integrated_residual: f64,
    pub linf_residual: f64,
}

pub const BREAKDOWN_COLUMNS: [&str; 14] = [
    "t", "x", "eta_rel", "q_rel_flux", "D", "J_flux", "Q1", "Q2", "Q3", "Q4", "Q5", "Q6", "hyp_term",
    "residual",
];

impl RelEnBreakdown {
    pub fn row(&self, k: usize, i: usize) -> &TermRow {
        &self.rows[k * self.n_cells + i]
    }

    pub fn csv_header() -> String {
        BREAKDOWN_COLUMNS.join(",")
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::Precondition(format!("{}: {e}", path.display())))?;
        let mut w = BufWriter::new(file);
        let io = |e: std::io::Error| Error::Precondition(format!("{}: {e}", path.display()));
        writeln!(w, "{}", Self::csv_header()).map_err(io)?;
        for r in &self.rows {
            let vals = [
                r.t, r.x, r.eta_rel, r.q_rel_flux, r.d, r.j_flux, r.q[0], r.q[1], r.q[2], r.q[3], r.q[4], r.q[5],
                r.hyp_term, r.residual,
            ];
            let line: Vec<String> = vals.iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(w, "{}", line.join(",")).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    /// Space integral of the residual at each snapshot.
    pub fn residual_by_time(&self, dx: f64) -> Vec<f64> {
        (0..self.n_times)
            .map(|k| {
                let v: Vec<f64> = self.rows[k * self.n_cells..(k + 1) * self.n_cells]
                    .iter()
                    .map(|r| r.residual)
                    .collect();
                pairwise_sum(&v) * dx
            })
            .collect()
    }
}

/// Pointwise pieces shared by the general residuals.
struct Point {
    eta_rel: f64,
    q_rel: f64,
    d: f64,
    j_total: f64,
    w: DVector<f64>,
    phi: DVector<f64>,
    q: [f64; 6],
    hyp: f64,
    source: f64,
    production_linear: f64,
    production_cross: f64,
    /// `(G(u) - G(ubar)) . B(u) u_x`
    cross_flux: f64,
    /// `grad G(u) u_x . B(u) u_x`
    cross_diss: f64,
    /// `d_x G(ubar) . B(u) u_x`
    cross_rhs: f64,
}

fn snapshot_points<M: Model1D + ?Sized>(
    model: &M,
    traj: &Trajectory,
    traj_bar: &Trajectory,
    k: usize,
) -> Result<Vec<Point>> {
    let dx = traj.grid.dx();
    let u = &traj.snapshots[k].cells;
    let ub = &traj_bar.snapshots[k].cells;
    let ux = periodic_dx_vec(u, dx);
    let ubx = periodic_dx_vec(ub, dx);
    (0..u.len())
        .map(|i| {
            let r = Reference::new(model, &ub[i])?;
            let rq = r.eval(model, &u[i]);
            let gu = model.multiplier(&u[i]);
            let dgu = model.jac_multiplier(&u[i]);
            let dgb = r.jac_multiplier();
            let b = model.viscosity(&u[i]);
            let bb = model.viscosity(&ub[i]);
            let dux = &ux[i] - &ubx[i];
            let dg = &gu - r.multiplier();
            let ddg = &dgu - dgb;
            let db = &b - &bb;
            let bbar_ubx = &bb * &ubx[i];
            let b_ux = &b * &ux[i];

            let d = (&dgu * &dux).dot(&(&b * &dux));
            let j_big = dg.dot(&(&b_ux - &bbar_ubx)) + bbar_ubx.dot(&rq.g_rel);
            let j_small = bbar_ubx.dot(&(dgb * &rq.phi));
            let q2 = -bbar_ubx.dot(&(&ddg * &dux));
            let q3 = -bbar_ubx.dot(&(&rq.l * &ubx[i]));
            let q4 = -(&dgu * &dux).dot(&(&db * &ubx[i]));
            let q5 = -(&ddg * &ubx[i]).dot(&(&b * &dux));
            let q6 = -(&ddg * &ubx[i]).dot(&(&db * &ubx[i]));
            let dgb_ubx = dgb * &ubx[i];
            let hyp = -dgb_ubx.dot(&rq.f_rel);

            let p = model.production(&u[i]).unwrap_or_else(|| DVector::zeros(u[i].len()));
            let pb = model.production(&ub[i]).unwrap_or_else(|| DVector::zeros(u[i].len()));
            let s = traj.source(k, i) + &p;
            let sb = traj_bar.source(k, i) + &pb;
            let source = sb.dot(&rq.g_rel) + dg.dot(&(&s - &sb));

            Ok(Point {
                eta_rel: rq.eta_rel,
                q_rel: rq.q_rel,
                d,
                j_total: j_big + j_small,
                w: dgb.transpose() * &bbar_ubx,
                phi: rq.phi,
                q: [0.0, q2, q3, q4, q5, q6],
                hyp,
                source,
                production_linear: pb.dot(&rq.g_rel),
                production_cross: dg.dot(&(&p - &pb)),
                cross_flux: dg.dot(&b_ux),
                cross_diss: (&dgu * &ux[i]).dot(&b_ux),
                cross_rhs: dgb_ubx.dot(&b_ux),
            })
        })
        .collect()
}

fn all_points<M: Model1D + ?Sized>(
    model: &M,
    traj: &Trajectory,
    traj_bar: &Trajectory,
) -> Result<(Vec<Vec<Point>>, f64)> {
    traj.check_compatible(traj_bar)?;
    if traj.len() < 3 {
        return Err(Error::Shape(format!("need at least 3 snapshots, got {}", traj.len())));
    }
    if traj.dim != model.dim() {
        return Err(Error::Shape("trajectory and model dimensions differ".into()));
    }
    let dt = traj.dt()?;
    let pts = (0..traj.len())
        .into_par_iter()
        .map(|k| snapshot_points(model, traj, traj_bar, k))
        .collect::<Result<Vec<_>>>()?;
    Ok((pts, dt))
}

/// `d_t` of a per-point scalar, indexed `[k][i]`.
fn time_derivatives(values: &[Vec<f64>], dt: f64) -> Vec<Vec<f64>> {
    let (m, n) = (values.len(), values[0].len());
    let mut out = vec![vec![0.0; n]; m];
    let mut series = vec![0.0; m];
    for i in 0..n {
        for (s, row) in series.iter_mut().zip(values) {
            *s = row[i];
        }
        for (k, row) in out.iter_mut().enumerate() {
            row[i] = time_derivative(&series, k, dt);
        }
    }
    out
}

fn space_time_l1(residuals: &[Vec<f64>], dx: f64, dt: f64) -> f64 {
    let w = trapezoid_weights(residuals.len(), dt);
    let per_time: Vec<f64> = residuals
        .iter()
        .zip(&w)
        .map(|(r, wk)| wk * dx * pairwise_sum(&r.iter().map(|v| v.abs()).collect::<Vec<_>>()))
        .collect();
    pairwise_sum(&per_time)
}

/// Residual of the full hyperbolic-parabolic identity for two solutions of the
/// same system with viscosity scale `eps`.
pub fn identity_residual_general<M: Model1D + ?Sized>(
    model: &M,
    traj: &Trajectory,
    traj_bar: &Trajectory,
    eps: f64,
) -> Result<RelEnBreakdown> {
    let (pts, dt) = all_points(model, traj, traj_bar)?;
    let dx = traj.grid.dx();
    let eta: Vec<Vec<f64>> = pts.iter().map(|p| p.iter().map(|q| q.eta_rel).collect()).collect();
    let dt_eta = time_derivatives(&eta, dt);
    let mut rows = Vec::with_capacity(pts.len() * traj.grid.cells());
    let mut residuals = Vec::with_capacity(pts.len());
    for (k, p) in pts.iter().enumerate() {
        let q_flux = periodic_dx(&p.iter().map(|q| q.q_rel).collect::<Vec<_>>(), dx);
        let j_flux = periodic_dx(&p.iter().map(|q| q.j_total).collect::<Vec<_>>(), dx);
        let dw = periodic_dx_vec(&p.iter().map(|q| q.w.clone()).collect::<Vec<_>>(), dx);
        let t = traj.snapshots[k].time;
        let mut res_k = Vec::with_capacity(p.len());
        for (i, pt) in p.iter().enumerate() {
            let mut q = pt.q;
            q[0] = -dw[i].dot(&pt.phi);
            let lhs = dt_eta[k][i] + q_flux[i] + eps * pt.d;
            let rhs = pt.hyp + eps * (j_flux[i] + q.iter().sum::<f64>()) + pt.source;
            let residual = lhs - rhs;
            res_k.push(residual);
            rows.push(TermRow {
                t,
                x: traj.grid.x(i),
                eta_rel: pt.eta_rel,
                lhs_time: dt_eta[k][i],
                q_rel_flux: q_flux[i],
                d: pt.d,
                j_flux: j_flux[i],
                q,
                hyp_term: pt.hyp,
                source_term: pt.source,
                residual,
            });
        }
        residuals.push(res_k);
    }
    let linf = residuals.iter().flatten().fold(0.0_f64, |a, r| a.max(r.abs()));
    Ok(RelEnBreakdown {
        eps,
        n_times: pts.len(),
        n_cells: traj.grid.cells(),
        rows,
        integrated_residual: space_time_l1(&residuals, dx, dt),
        linf_residual: linf,
    })
}

/// Signed residual of `d_t eta(u|ubar) + d_x q(u|ubar) <= -d_x G(ubar) . F(u|ubar)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityReport {
    /// Largest value of left minus right side.
    pub max_residual: f64,
    pub min_residual: f64,
    pub l1_residual: f64,
    /// Viscosity scale of `traj`, read from its metadata.
    pub eps: f64,
    /// For a viscous `traj` against an inviscid `traj_bar`: the largest residual
    /// of the viscous-versus-inviscid identity, which accounts for the `O(eps)`
    /// terms that the inequality omits.
    pub cross_identity_linf: Option<f64>,
    /// Largest `|eps d_x G(ubar) . B(u) u_x|`, the term that can violate the inequality.
    pub viscous_term_linf: Option<f64>,
}

impl InequalityReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.max_residual <= tol
    }
}

pub fn inequality_check_hyperbolic<M: Model1D + ?Sized>(
    model: &M,
    traj: &Trajectory,
    traj_bar: &Trajectory,
) -> Result<InequalityReport> {
    let (pts, dt) = all_points(model, traj, traj_bar)?;
    let dx = traj.grid.dx();
    let eps = if traj.meta.eps.is_finite() { traj.meta.eps } else { 0.0 };
    let eta: Vec<Vec<f64>> = pts.iter().map(|p| p.iter().map(|q| q.eta_rel).collect()).collect();
    let dt_eta = time_derivatives(&eta, dt);
    let mut residuals = Vec::with_capacity(pts.len());
    let (mut cross_max, mut visc_max) = (0.0_f64, 0.0_f64);
    for (k, p) in pts.iter().enumerate() {
        let q_flux = periodic_dx(&p.iter().map(|q| q.q_rel).collect::<Vec<_>>(), dx);
        let cross_flux = periodic_dx(
            &p.iter().map(|q| q.q_rel - eps * q.cross_flux).collect::<Vec<_>>(),
            dx,
        );
        let mut res_k = Vec::with_capacity(p.len());
        for (i, pt) in p.iter().enumerate() {
            res_k.push(dt_eta[k][i] + q_flux[i] - pt.hyp - pt.source);
            if eps > 0.0 {
                let lhs = dt_eta[k][i] + cross_flux[i] + eps * pt.cross_diss;
                let rhs = pt.hyp + eps * pt.cross_rhs + pt.source;
                cross_max = cross_max.max((lhs - rhs).abs());
                visc_max = visc_max.max((eps * pt.cross_rhs).abs());
            }
        }
        residuals.push(res_k);
    }
    let flat = residuals.iter().flatten();
    let max_residual = flat.clone().fold(f64::NEG_INFINITY, |a, &r| a.max(r));
    let min_residual = flat.fold(f64::INFINITY, |a, &r| a.min(r));
    Ok(InequalityReport {
        max_residual,
        min_residual,
        l1_residual: space_time_l1(&residuals, dx, dt),
        eps,
        cross_identity_linf: (eps > 0.0).then_some(cross_max),
        viscous_term_linf: (eps > 0.0).then_some(visc_max),
    })
}

/// Residual of the balance-law identity with production `P` on the model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BalanceReport {
    /// Largest value of left minus right side.
    pub max_residual: f64,
    pub linf_residual: f64,
    pub l1_residual: f64,
    /// Largest `|P(ubar) . G(u|ubar)|`.
    pub production_linear_linf: f64,
    /// Largest `(G(u) - G(ubar)) . (P(u) - P(ubar))`; nonpositive under the
    /// weak dissipativity hypothesis.
    pub production_cross_max: f64,
}

pub fn balance_residual<M: Model1D + ?Sized>(
    model: &M,
    traj: &Trajectory,
    traj_bar: &Trajectory,
) -> Result<BalanceReport> {
    if model.production(&traj.snapshots[0].cells[0]).is_none() {
        return Err(Error::Precondition(format!("model `{}` has no production term", model.name())));
    }
    let (pts, dt) = all_points(model, traj, traj_bar)?;
    let dx = traj.grid.dx();
    let eta: Vec<Vec<f64>> = pts.iter().map(|p| p.iter().map(|q| q.eta_rel).collect()).collect();
    let dt_eta = time_derivatives(&eta, dt);
    let mut residuals = Vec::with_capacity(pts.len());
    let (mut lin, mut cross) = (0.0_f64, f64::NEG_INFINITY);
    for (k, p) in pts.iter().enumerate() {
        let q_flux = periodic_dx(&p.iter().map(|q| q.q_rel).collect::<Vec<_>>(), dx);
        let mut res_k = Vec::with_capacity(p.len());
        for (i, pt) in p.iter().enumerate() {
            res_k.push(dt_eta[k][i] + q_flux[i] - pt.hyp - pt.source);
            lin = lin.max(pt.production_linear.abs());
            cross = cross.max(pt.production_cross);
        }
        residuals.push(res_k);
    }
    let flat = residuals.iter().flatten();
    Ok(BalanceReport {
        max_residual: flat.clone().fold(f64::NEG_INFINITY, |a, &r| a.max(r)),
        linf_residual: flat.fold(0.0_f64, |a, &r| a.max(r.abs())),
        l1_residual: space_time_l1(&residuals, dx, dt),
        production_linear_linf: lin,
        production_cross_max: cross,
    })
}

/// Terms of the thermodynamic gas identity at one grid point.
///
/// ```text
/// lhs_time - flux_div + diss_kappa + diss_mu
///   = theta_t_term + u_t_term + force_term + supply_term + kappa_cross + mu_cross
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GasTermRow {
    pub t: f64,
    pub x: f64,
    /// `psi(u,theta|ubar,thetabar) + (v - vbar)^2/2 + (eta - etabar)(theta - thetabar)`
    pub i_density: f64,
    pub lhs_time: f64,
    /// `d_x [(sigma - sigmabar)(v - vbar) + (mu v_x - mubar vbar_x)(v - vbar)
    ///       + (theta - thetabar)(kappa theta_x/theta - kappabar thetabar_x/thetabar)]`
    pub flux_div: f64,
    /// `thetabar kappa (theta_x/theta - thetabar_x/thetabar)^2`
    pub diss_kappa: f64,
    /// `theta thetabar mu (v_x/theta - vbar_x/thetabar)^2`
    pub diss_mu: f64,
    /// `-thetabar_t eta(u,theta|ubar,thetabar)`
    pub theta_t_term: f64,
    /// `ubar_t sigma(u,theta|ubar,thetabar)`
    pub u_t_term: f64,
    /// `(f - fbar)(v - vbar)`
    pub force_term: f64,
    /// `(theta - thetabar)(r/theta - rbar/thetabar)`
    pub supply_term: f64,
    /// `-(theta_x/theta - thetabar_x/thetabar)(thetabar_x/thetabar)(thetabar kappa - theta kappabar)`
    pub kappa_cross: f64,
    /// `-theta thetabar (mu - mubar)(vbar_x/thetabar)(v_x/theta - vbar_x/thetabar)`
    pub mu_cross: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GasRelEnBreakdown {
    pub n_times: usize,
    pub n_cells: usize,
    pub rows: Vec<GasTermRow>,
    pub integrated_residual: f64,
    pub linf_residual: f64,
    /// Smallest pointwise value of either dissipation term.
    pub min_dissipation: f64,
}

impl GasRelEnBreakdown {
    pub fn row(&self, k: usize, i: usize) -> &GasTermRow {
        &self.rows[k * self.n_cells + i]
    }

    /// `integral I dx` at each snapshot (midpoint rule).
    pub fn i_by_time(&self, dx: f64) -> Vec<f64> {
        (0..self.n_times)
            .map(|k| {
                let v: Vec<f64> = self.rows[k * self.n_cells..(k + 1) * self.n_cells]
                    .iter()
                    .map(|r| r.i_density)
                    .collect();
                pairwise_sum(&v) * dx
            })
            .collect()
    }
}

/// Residual of the thermodynamic gas identity.
///
/// Each trajectory carries its own transport laws (`gas`, `gas_bar`) scaled by
/// its recorded `eps`; the constitutive functions must coincide. Body force and
/// supply are read from the recorded sources as `f = S_2`, `r = S_3 - f v`.
pub fn identity_residual_gas(
    gas: &GasModel,
    traj: &Trajectory,
    gas_bar: &GasModel,
    traj_bar: &Trajectory,
) -> Result<GasRelEnBreakdown> {
    if gas.gas_constant != gas_bar.gas_constant || gas.cv != gas_bar.cv {
        return Err(Error::Precondition("both solutions must share the free energy".into()));
    }
    traj.check_compatible(traj_bar)?;
    if traj.dim != 3 {
        return Err(Error::Shape("gas trajectories have 3 components".into()));
    }
    if traj.len() < 3 {
        return Err(Error::Shape(format!("need at least 3 snapshots, got {}", traj.len())));
    }
    let dt = traj.dt()?;
    let dx = traj.grid.dx();
    let n = traj.grid.cells();
    let m = traj.len();
    let scale = |e: f64| if e.is_finite() { e } else { 1.0 };
    let (eps, eps_bar) = (scale(traj.meta.eps), scale(traj_bar.meta.eps));

    let comp = |tr: &Trajectory, c: usize| -> Vec<Vec<f64>> {
        tr.snapshots.iter().map(|f| f.cells.iter().map(|s| s[c]).collect()).collect()
    };
    let ub_series = comp(traj_bar, 0);
    let thb_series = comp(traj_bar, 2);
    let ub_t = time_derivatives(&ub_series, dt);
    let thb_t = time_derivatives(&thb_series, dt);

    struct Pre {
        i_density: f64,
        flux: f64,
        diss_kappa: f64,
        diss_mu: f64,
        theta_t_term: f64,
        u_t_term: f64,
        force_term: f64,
        supply_term: f64,
        kappa_cross: f64,
        mu_cross: f64,
    }

    let pre: Vec<Vec<Pre>> = (0..m)
        .into_par_iter()
        .map(|k| {
            let a = &traj.snapshots[k].cells;
            let b = &traj_bar.snapshots[k].cells;
            let ax = periodic_dx_vec(a, dx);
            let bx = periodic_dx_vec(b, dx);
            (0..n)
                .map(|i| {
                    let s = GasState::from_vector(&a[i])?;
                    let sb = GasState::from_vector(&b[i])?;
                    let (u, v, th) = (s.u(), s.v(), s.theta());
                    let (ub, vb, tb) = (sb.u(), sb.v(), sb.theta());
                    let (vx, thx) = (ax[i][1], ax[i][2]);
                    let (vbx, tbx) = (bx[i][1], bx[i][2]);
                    let mu = eps * gas.mu_at(u, th);
                    let kappa = eps * gas.kappa_at(u, th);
                    let mub = eps_bar * gas_bar.mu_at(ub, tb);
                    let kappab = eps_bar * gas_bar.kappa_at(ub, tb);
                    let rel = gas_relative_closed_form(gas, &s, &sb);
                    let sigma = gas.sigma(u, th);
                    let sigmab = gas.sigma(ub, tb);
                    let src = traj.source(k, i);
                    let srcb = traj_bar.source(k, i);
                    let (f, fb) = (src[1], srcb[1]);
                    let (r, rb) = (src[2] - f * v, srcb[2] - fb * vb);
                    let gth = thx / th - tbx / tb;
                    let gv = vx / th - vbx / tb;
                    Ok(Pre {
                        i_density: rel.i_density,
                        flux: (sigma - sigmab) * (v - vb)
                            + (mu * vx - mub * vbx) * (v - vb)
                            + (th - tb) * (kappa * thx / th - kappab * tbx / tb),
                        diss_kappa: tb * kappa * gth * gth,
                        diss_mu: th * tb * mu * gv * gv,
                        theta_t_term: -thb_t[k][i] * rel.eta_rel_gas,
                        u_t_term: ub_t[k][i] * rel.sigma_rel,
                        force_term: (f - fb) * (v - vb),
                        supply_term: (th - tb) * (r / th - rb / tb),
                        kappa_cross: -gth * (tbx / tb) * (tb * kappa - th * kappab),
                        mu_cross: -th * tb * (mu - mub) * (vbx / tb) * gv,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let i_vals: Vec<Vec<f64>> = pre.iter().map(|p| p.iter().map(|q| q.i_density).collect()).collect();
    let i_t = time_derivatives(&i_vals, dt);
    let mut rows = Vec::with_capacity(m * n);
    let mut residuals = Vec::with_capacity(m);
    let mut min_diss = f64::INFINITY;
    for (k, p) in pre.iter().enumerate() {
        let flux_div = periodic_dx(&p.iter().map(|q| q.flux).collect::<Vec<_>>(), dx);
        let mut res_k = Vec::with_capacity(n);
        for (i, q) in p.iter().enumerate() {
            let lhs = i_t[k][i] - flux_div[i] + q.diss_kappa + q.diss_mu;
            let rhs = q.theta_t_term + q.u_t_term + q.force_term + q.supply_term + q.kappa_cross + q.mu_cross;
            let residual = lhs - rhs;
            min_diss = min_diss.min(q.diss_kappa).min(q.diss_mu);
            res_k.push(residual);
            rows.push(GasTermRow {
                t: traj.snapshots[k].time,
                x: traj.grid.x(i),
                i_density: q.i_density,
                lhs_time: i_t[k][i],
                flux_div: flux_div[i],
                diss_kappa: q.diss_kappa,
                diss_mu: q.diss_mu,
                theta_t_term: q.theta_t_term,
                u_t_term: q.u_t_term,
                force_term: q.force_term,
                supply_term: q.supply_term,
                kappa_cross: q.kappa_cross,
                mu_cross: q.mu_cross,
                residual,
            });
        }
        residuals.push(res_k);
    }
    let linf = residuals.iter().flatten().fold(0.0_f64, |a, r| a.max(r.abs()));
    Ok(GasRelEnBreakdown {
        n_times: m,
        n_cells: n,
        rows,
        integrated_residual: space_time_l1(&residuals, dx, dt),
        linf_residual: linf,
        min_dissipation: min_diss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{embed_gas_as_general, ideal_gas_model, Coefficient, FnModel, LinearAdvection};
    use crate::solver::{exact_trajectory, Field, Grid1D, ManufacturedSolution, RunMeta, SineMode};

    fn transport_gas(mu: f64, kappa: f64) -> GasModel {
        ideal_gas_model(1.0, 1.0)
            .unwrap()
            .with_transport(Coefficient::Constant(mu), Coefficient::ThetaProportional(kappa))
            .unwrap()
    }

    fn wave_a() -> ManufacturedSolution {
        ManufacturedSolution::gas_wave(1.0, 0.2, 0.1, 1.0, 0.7, SineMode::new(1.0, 0.15, 1.0, 0.3, 0.5))
    }

    fn wave_b() -> ManufacturedSolution {
        ManufacturedSolution::gas_wave(1.1, 0.1, -0.1, 2.0, 0.4, SineMode::new(0.9, 0.1, 1.0, -0.2, 1.0))
    }

    /// Snapshots every `dx / 2` up to `pi / 4`.
    fn times(n: usize) -> Vec<f64> {
        let dt = std::f64::consts::PI / n as f64;
        (0..=n / 4).map(|k| k as f64 * dt).collect()
    }

    fn sampled(gas: GasModel, sol: &ManufacturedSolution, n: usize, eps: f64) -> Trajectory {
        let grid = Grid1D::periodic(n).unwrap();
        exact_trajectory(&embed_gas_as_general(gas), sol, &grid, &times(n), eps).unwrap()
    }

    fn scalar_traj(n: usize, m: usize, dt: f64, f: impl Fn(f64, f64) -> f64) -> Trajectory {
        let grid = Grid1D::periodic(n).unwrap();
        let snapshots = (0..m)
            .map(|k| {
                let t = k as f64 * dt;
                Field::from_fn(&grid, t, |x| DVector::from_element(1, f(x, t)))
            })
            .collect();
        Trajectory { grid, dim: 1, snapshots, sources: None, meta: RunMeta::exact("scalar", 0.0) }
    }

    #[test]
    fn identical_trajectories_give_zero() {
        let gas = transport_gas(0.3, 0.2);
        let sys = embed_gas_as_general(gas);
        let t = sampled(gas, &wave_a(), 16, 0.5);
        let b = identity_residual_general(&sys, &t, &t, 0.5).unwrap();
        assert_eq!(b.linf_residual, 0.0);
        assert!(b.rows.iter().all(|r| r.d == 0.0 && r.q.iter().all(|q| *q == 0.0)));
        let g = identity_residual_gas(&gas, &t, &gas, &t).unwrap();
        assert_eq!(g.linf_residual, 0.0);
        assert!(g.rows.iter().all(|r| r.diss_kappa == 0.0 && r.diss_mu == 0.0));
    }

    #[test]
    fn general_residual_is_second_order() {
        let gas = transport_gas(0.3, 0.2);
        let sys = embed_gas_as_general(gas);
        let res = |n: usize| {
            let (t, tb) = (sampled(gas, &wave_a(), n, 0.5), sampled(gas, &wave_b(), n, 0.5));
            identity_residual_general(&sys, &t, &tb, 0.5).unwrap().integrated_residual
        };
        let ratio = res(32) / res(64);
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn gas_residual_is_second_order() {
        let gas = transport_gas(0.3, 0.2);
        let res = |n: usize| {
            let (t, tb) = (sampled(gas, &wave_a(), n, 0.5), sampled(gas, &wave_b(), n, 0.5));
            identity_residual_gas(&gas, &t, &gas, &tb).unwrap().integrated_residual
        };
        let ratio = res(32) / res(64);
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn gas_identity_against_adiabatic_reference() {
        let gas = transport_gas(0.3, 0.2);
        let gas_bar = transport_gas(0.3, 0.0);
        let res = |n: usize| {
            let t = sampled(gas, &wave_a(), n, 1.0);
            let tb = sampled(gas_bar, &wave_b(), n, 1.0);
            let b = identity_residual_gas(&gas, &t, &gas_bar, &tb).unwrap();
            assert!(b.min_dissipation >= -1e-12);
            b.integrated_residual
        };
        let ratio = res(32) / res(64);
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn gas_and_general_identities_share_the_left_side() {
        // eta_hat(U|Ubar) = I / thetabar, so their snapshot integrals agree for constant thetabar.
        let gas = transport_gas(0.0, 0.0);
        let sys = embed_gas_as_general(gas);
        let bar = ManufacturedSolution::new(vec![SineMode::constant(1.0), SineMode::constant(0.0), SineMode::constant(1.0)]);
        let (t, tb) = (sampled(gas, &wave_a(), 16, 0.0), sampled(gas, &bar, 16, 0.0));
        let g = identity_residual_gas(&gas, &t, &gas, &tb).unwrap();
        let b = identity_residual_general(&sys, &t, &tb, 0.0).unwrap();
        for (x, y) in g.rows.iter().zip(&b.rows) {
            assert!((x.i_density - y.eta_rel).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_inequality_is_an_equality() {
        let c = 1.3;
        let m = LinearAdvection::new(1, c, 0.0);
        let (n, dt) = (512, 0.005);
        let t = scalar_traj(n, 20, dt, |x, t| (x - c * t).sin());
        let tb = scalar_traj(n, 20, dt, |x, t| 0.5 * (2.0 * (x - c * t)).cos());
        let r = inequality_check_hyperbolic(&m, &t, &tb).unwrap();
        assert!(r.max_residual.abs() < 1e-3 && r.min_residual.abs() < 1e-3, "{r:?}");
        assert!(r.cross_identity_linf.is_none());
    }

    #[test]
    fn viscous_against_inviscid_cross_identity() {
        let (c, eps) = (1.0, 0.1);
        let m = LinearAdvection::new(1, c, 1.0);
        let (n, dt) = (512, 0.0025);
        let mut t = scalar_traj(n, 30, dt, |x, t| (-eps * t).exp() * (x - c * t).sin());
        t.meta.eps = eps;
        let tb = scalar_traj(n, 30, dt, |x, t| (x - c * t).cos());
        let r = inequality_check_hyperbolic(&m, &t, &tb).unwrap();
        assert!(r.cross_identity_linf.unwrap() < 1e-3, "{r:?}");
        assert!(r.viscous_term_linf.unwrap() > 1e-2);
    }

    #[test]
    fn damped_balance_law() {
        let c = 0.8;
        let m = FnModel::builder(1)
            .flux(move |u| u * c)
            .entropy(|u| 0.5 * u[0] * u[0])
            .entropy_flux(move |u| 0.5 * c * u[0] * u[0])
            .multiplier(|u| u.clone())
            .production(|u| -u)
            .build();
        let (n, dt) = (512, 0.0025);
        let t = scalar_traj(n, 30, dt, |x, t| (-t).exp() * (x - c * t).sin());
        let tb = scalar_traj(n, 30, dt, |x, t| (-t).exp() * (1.0 + 0.5 * (x - c * t).cos()));
        let r = balance_residual(&m, &t, &tb).unwrap();
        assert!(r.linf_residual < 2e-4, "{r:?}");
        assert!(r.production_cross_max <= 0.0);
        let same = balance_residual(&m, &t, &t).unwrap();
        assert_eq!(same.linf_residual, 0.0);
        assert!(balance_residual(&LinearAdvection::new(1, c, 0.0), &t, &tb).is_err());
    }

    #[test]
    fn breakdown_csv_header() {
        assert_eq!(
            RelEnBreakdown::csv_header(),
            "t,x,eta_rel,q_rel_flux,D,J_flux,Q1,Q2,Q3,Q4,Q5,Q6,hyp_term,residual"
        );
    }
}
