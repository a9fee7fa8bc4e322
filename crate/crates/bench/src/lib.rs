//! Fixtures shared by the criterion benches in `benches/`.

use relentropy_core::experiments::unit_gas;
use relentropy_core::solver::{exact_trajectory, gas_pulse, Field, Grid1D, ManufacturedSolution, SineMode, Trajectory};
use relentropy_core::young::{random_measures, YoungMeasureAtomic};
use relentropy_core::{embed_gas_as_general, GasSystem};

pub fn gas() -> GasSystem {
    embed_gas_as_general(unit_gas())
}

pub fn pulse(n: usize) -> (Grid1D, Field) {
    let grid = Grid1D::periodic(n).expect("n >= 8");
    let field = gas_pulse(&grid, 0.2, 0.5, std::f64::consts::PI);
    (grid, field)
}

pub fn wave(shift: f64) -> ManufacturedSolution {
    ManufacturedSolution::gas_wave(1.0 + shift, 0.2, 0.1, 1.0, 0.7, SineMode::new(1.0, 0.15, 1.0, 0.3, 0.5))
}

/// Two exact gas trajectories on `n` cells with `m` snapshots.
pub fn manufactured_pair(n: usize, m: usize) -> (Trajectory, Trajectory) {
    let sys = gas();
    let grid = Grid1D::periodic(n).expect("n >= 8");
    let times: Vec<f64> = (0..m).map(|k| 0.01 * k as f64).collect();
    let a = exact_trajectory(&sys, &wave(0.0), &grid, &times, 0.5).expect("periodic wave");
    let b = exact_trajectory(&sys, &wave(0.1), &grid, &times, 0.5).expect("periodic wave");
    (a, b)
}

pub fn measures(count: usize) -> Vec<YoungMeasureAtomic> {
    random_measures(&[0.5, -1.0, 0.5], &[2.0, 1.0, 2.0], count, 1, 4, 3).expect("valid box")
}
