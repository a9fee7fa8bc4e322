//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Extra arguments select criteria by substring, e.g.
//! `cargo test -p relentropy-core --test acceptance -- lemma`.

use std::time::Instant;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relentropy_core::experiments::{
    adiabatic_limit, converge_eps, stability_study, unit_gas, AdiabaticConfig, ConvergeEpsConfig, StabilityConfig,
    StudyReport,
};
use relentropy_core::hypotheses::{gas_suite, SamplePlan};
use relentropy_core::relent::{
    gas_relative_closed_form, identity_residual_gas, lemma_bounds_scan, LemmaScanConfig, Reference, COINCIDENT,
};
use relentropy_core::solver::{exact_trajectory, gas_pulse, simulate, Grid1D, ManufacturedSolution, SineMode, SolverConfig};
use relentropy_core::young::{gronwall_decay_demo, random_measures, young_suite, GronwallConfig};
use relentropy_core::{embed_gas_as_general, ideal_gas_model, Coefficient, GasModel, GasState, Model1D, StateVector};

type Verdict = Result<(bool, String), String>;

const BOX_LOWER: [f64; 3] = [0.5, -1.0, 0.5];
const BOX_UPPER: [f64; 3] = [2.0, 1.0, 2.0];

fn hypothesis_suite() -> Verdict {
    let sys = embed_gas_as_general(unit_gas());
    let plan = SamplePlan::boxed(BOX_LOWER.to_vec(), BOX_UPPER.to_vec(), 256, 2024);
    let r = gas_suite(&sys, &plan).map_err(|e| e.to_string())?;
    let get = |n: &str| r.get(n).ok_or_else(|| format!("missing entry {n}"));
    let pair = get("entropy-pair")?;
    let maxwell = get("maxwell")?;
    let h3 = get("H3")?;
    let h4 = get("H4")?;
    let asym = pair.details["asym_grad_a"].max(pair.details["asym_grad_f"]);
    let diag = h3.details["diag_form_error"];
    let zeros = (h4.details["zero_modes_min"], h4.details["zero_modes_max"]);
    let pass = pair.samples >= 200
        && asym < 1e-8
        && pair.extremal_value < 1e-8
        && maxwell.extremal_value < 1e-10
        && h3.extremal_value > 0.0
        && diag < 1e-8
        && h4.extremal_value >= -1e-12
        && zeros == (1.0, 1.0);
    Ok((
        pass,
        format!(
            "samples {}, pair defect {:.2e} (asym {:.2e}), maxwell {:.2e}, H3 min eig {:.3e} diag err {:.2e}, \
             H4 min {:.2e} zero modes {}..{}",
            pair.samples, pair.extremal_value, asym, maxwell.extremal_value, h3.extremal_value, diag,
            h4.extremal_value, zeros.0, zeros.1
        ),
    ))
}

fn transport_gas(mu: f64, kappa: f64) -> GasModel {
    ideal_gas_model(1.0, 1.0)
        .unwrap()
        .with_transport(Coefficient::Constant(mu), Coefficient::ThetaProportional(kappa))
        .unwrap()
}

fn identity_order() -> Verdict {
    let gas = transport_gas(0.3, 0.2);
    let sys = embed_gas_as_general(gas);
    let wave_a = ManufacturedSolution::gas_wave(1.0, 0.2, 0.1, 1.0, 0.7, SineMode::new(1.0, 0.15, 1.0, 0.3, 0.5));
    let wave_b = ManufacturedSolution::gas_wave(1.1, 0.1, -0.1, 2.0, 0.4, SineMode::new(0.9, 0.1, 1.0, -0.2, 1.0));
    let residual = |n: usize| -> Result<f64, String> {
        let grid = Grid1D::periodic(n).map_err(|e| e.to_string())?;
        let dt = std::f64::consts::PI / n as f64;
        let times: Vec<f64> = (0..=n / 4).map(|k| k as f64 * dt).collect();
        let t = exact_trajectory(&sys, &wave_a, &grid, &times, 0.5).map_err(|e| e.to_string())?;
        let tb = exact_trajectory(&sys, &wave_b, &grid, &times, 0.5).map_err(|e| e.to_string())?;
        Ok(identity_residual_gas(&gas, &t, &gas, &tb).map_err(|e| e.to_string())?.integrated_residual)
    };
    let res = [residual(128)?, residual(256)?, residual(512)?];
    let ratios = [res[0] / res[1], res[1] / res[2]];
    let pass = ratios.iter().all(|r| (3.5..=4.5).contains(r));
    Ok((pass, format!("residuals {:.3e} {:.3e} {:.3e}, ratios {:.3} {:.3}", res[0], res[1], res[2], ratios[0], ratios[1])))
}

fn cross_formula() -> Verdict {
    let gas = unit_gas();
    let sys = embed_gas_as_general(gas);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut draw = || -> Vec<f64> { (0..3).map(|j| rng.random_range(BOX_LOWER[j]..=BOX_UPPER[j])).collect() };
    let mut worst = 0.0_f64;
    for _ in 0..10_000 {
        let (a, b) = (draw(), draw());
        let s = GasState::new(a[0], a[1], a[2]).map_err(|e| e.to_string())?;
        let sb = GasState::new(b[0], b[1], b[2]).map_err(|e| e.to_string())?;
        let closed = gas_relative_closed_form(&gas, &s, &sb).eta_hat_rel;
        let general = Reference::new(&sys, &sb.to_vector())
            .map_err(|e| e.to_string())?
            .eta_rel(&sys, &s.to_vector());
        worst = worst.max((closed - general).abs());
    }
    Ok((worst < 1e-10, format!("max |difference| {worst:.3e} over 10000 pairs")))
}

fn study_line(r: &StudyReport) -> String {
    let checks: Vec<String> = r.checks.iter().map(|c| format!("{} {:.4} in [{}, {}]", c.name, c.value, c.lower, c.upper)).collect();
    let consts: Vec<String> = r.constants.iter().map(|(k, v)| format!("{k} {v:.4e}")).collect();
    format!("{}; {}", checks.join(", "), consts.join(", "))
}

fn converge() -> Verdict {
    let r = converge_eps(&ConvergeEpsConfig::desk()).map_err(|e| e.to_string())?;
    Ok((r.pass, study_line(&r)))
}

fn stability() -> Verdict {
    let sys = embed_gas_as_general(unit_gas());
    let r = stability_study(&sys, &StabilityConfig::desk()).map_err(|e| e.to_string())?;
    Ok((r.pass, study_line(&r)))
}

fn adiabatic() -> Verdict {
    let r = adiabatic_limit(&AdiabaticConfig::desk()).map_err(|e| e.to_string())?;
    Ok((r.pass, study_line(&r)))
}

fn lemma() -> Verdict {
    let sys = embed_gas_as_general(unit_gas());
    let axis = |lo: f64, hi: f64, k: usize| -> Vec<f64> { (0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64).collect() };
    // Corners, edge midpoints and center of the hypothesis box.
    let mut refs = Vec::new();
    for u in axis(BOX_LOWER[0], BOX_UPPER[0], 3) {
        for v in axis(BOX_LOWER[1], BOX_UPPER[1], 3) {
            for th in axis(BOX_LOWER[2], BOX_UPPER[2], 3) {
                refs.push(StateVector::new(vec![u, v, th]).map_err(|e| e.to_string())?);
            }
        }
    }
    let center = vec![1.25, 0.0, 1.25];
    let m = (0..3).map(|j| (0.5 * (BOX_UPPER[j] - BOX_LOWER[j])).powi(2)).sum::<f64>().sqrt();
    let floor = 0.25;
    let cfg = LemmaScanConfig::new(center.clone(), m + 1e-9, 4.0, 6.0)
        .with_bounds(vec![floor, -10.0, floor], vec![10.0, 10.0, 10.0]);
    let plan = SamplePlan::from_states(refs.clone(), 5);
    let b = lemma_bounds_scan(&sys, &cfg, &plan).map_err(|e| e.to_string())?;

    let c = DVector::from_vec(center);
    let grid_pos = axis(floor, c[0] + cfg.r_outer, 36);
    let grid_v = axis(-cfg.r_outer, cfg.r_outer, 41);
    let (mut c1, mut c2, mut c3) = (f64::INFINITY, f64::INFINITY, 0.0_f64);
    for r in &refs {
        let reference = Reference::new(&sys, r).map_err(|e| e.to_string())?;
        for &u in &grid_pos {
            for &v in &grid_v {
                for &th in &grid_pos {
                    let x = DVector::from_vec(vec![u, v, th]);
                    let dist = (&x - &c).norm();
                    if dist > cfg.r_outer || (&x - &**r).norm() <= COINCIDENT * (1.0 + r.norm()) {
                        continue;
                    }
                    let (e, f, da) = reference.eta_flux_rel(&sys, &x);
                    if dist <= cfg.r_radius {
                        c1 = c1.min(e / da.norm_squared());
                    } else {
                        c2 = c2.min(e / (sys.entropy(&x) + b.entropy_shift));
                    }
                    c3 = c3.max(f.norm() / e);
                }
            }
        }
    }
    let close = |scan: f64, grid: f64| (scan - grid).abs() <= 0.1 * grid.abs();
    let pass = b.pass && b.c1 > 0.0 && b.c2 > 0.0 && b.c3.is_finite() && close(b.c1, c1) && close(b.c2, c2) && close(b.c3, c3);
    Ok((
        pass,
        format!(
            "M {m:.4}, R 4: scan c1 {:.4e} c2 {:.4e} C3 {:.4e}; grid c1 {c1:.4e} c2 {c2:.4e} C3 {c3:.4e}",
            b.c1, b.c2, b.c3
        ),
    ))
}

fn young() -> Verdict {
    let sys = embed_gas_as_general(unit_gas());
    let nus = random_measures(&BOX_LOWER, &BOX_UPPER, 1000, 1, 4, 17).map_err(|e| e.to_string())?;
    let ubar = DVector::from_vec(vec![1.0, 0.0, 1.0]);
    let (suite, _) = young_suite(&nus, &sys, &ubar).map_err(|e| e.to_string())?;
    let demo = gronwall_decay_demo(&sys, &GronwallConfig::desk()).map_err(|e| e.to_string())?;
    let slope = demo.check("slope").map_or(f64::NAN, |c| c.value);
    let slope_ok = (0.9..=1.1).contains(&slope);
    Ok((
        suite.pass && slope_ok,
        format!(
            "{} samples: H gap {:.2e}, Z gap {:.2e}, min Jensen gap {:.3e} ({} violations); decay slope {slope:.4}",
            suite.samples, suite.max_h_gap, suite.max_z_gap, suite.min_jensen_gap, suite.jensen_violations
        ),
    ))
}

fn solver_sanity() -> Verdict {
    let sys = embed_gas_as_general(unit_gas());
    let grid = Grid1D::periodic(256).map_err(|e| e.to_string())?;
    let init = gas_pulse(&grid, 0.2, 0.5, std::f64::consts::PI);
    let traj = simulate(&sys, &grid, &init, &SolverConfig::new(1e-2, 1.0), None).map_err(|e| e.to_string())?;
    let dx = grid.dx();
    let mass = |k: usize| -> DVector<f64> {
        DVector::from_iterator(3, (0..3).map(|j| traj.snapshots[k].integrate(dx, |u| sys.a(u)[j])))
    };
    let m0 = mass(0);
    let drift = (0..traj.len()).map(|k| (mass(k) - &m0).amax() / m0.norm()).fold(0.0_f64, f64::max);
    let entropy: Vec<f64> = traj.snapshots.iter().map(|f| f.integrate(dx, |u| sys.entropy(u))).collect();
    let scale = entropy[0].abs().max(1.0);
    let worst_rise = entropy.windows(2).map(|w| (w[1] - w[0]) / scale).fold(f64::NEG_INFINITY, f64::max);
    let monotone = worst_rise <= 1e-14;
    Ok((
        drift < 1e-10 && monotone,
        format!(
            "{} steps, relative conservation drift {drift:.3e}, largest entropy rise {worst_rise:.3e} (entropy {:.10} -> {:.10})",
            traj.meta.steps,
            entropy[0],
            entropy[entropy.len() - 1]
        ),
    ))
}

type Criterion = (&'static str, f64, fn() -> Verdict);

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [Criterion; 9] = [
        ("hypothesis-suite", 5.0, hypothesis_suite),
        ("identity-residual-order", 60.0, identity_order),
        ("cross-formula-consistency", 5.0, cross_formula),
        ("vanishing-viscosity-rate", 600.0, converge),
        ("l2-stability", 600.0, stability),
        ("adiabatic-limit", 600.0, adiabatic),
        ("lemma-bounds", 60.0, lemma),
        ("young-measures", 300.0, young),
        ("solver-sanity", 30.0, solver_sanity),
    ];
    let mut failed = 0;
    let mut ran = 0;
    for (name, budget, run) in criteria {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        let t0 = Instant::now();
        let verdict = run();
        let secs = t0.elapsed().as_secs_f64();
        let (pass, detail) = match verdict {
            Ok((p, d)) => (p && secs <= budget, d),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "{} {name} [{secs:.1}s of {budget:.0}s]: {detail}",
            if pass { "PASS" } else { "FAIL" }
        );
    }
    println!("acceptance: {}/{ran} criteria pass", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
