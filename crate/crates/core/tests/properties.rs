use nalgebra::DVector;
use proptest::prelude::*;
use relentropy_core::experiments::unit_gas;
use relentropy_core::relent::{gas_relative_quantities, relative_quantities, Reference};
use relentropy_core::solver::{gas_pulse, read_bin, simulate, write_bin, Grid1D, SolverConfig};
use relentropy_core::young::{averaged_relent, Atom, YoungMeasureAtomic};
use relentropy_core::{embed_gas_as_general, GasState, LinearAdvection, Model1D, StateVector};

fn gas_state() -> impl Strategy<Value = (f64, f64, f64)> {
    (0.3..3.0f64, -2.0..2.0f64, 0.3..3.0f64)
}

fn vec3((u, v, t): (f64, f64, f64)) -> DVector<f64> {
    DVector::from_vec(vec![u, v, t])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn gas_relative_entropy_is_nonnegative(a in gas_state(), b in gas_state()) {
        let sys = embed_gas_as_general(unit_gas());
        let q = relative_quantities(&sys, &vec3(a), &vec3(b)).unwrap();
        prop_assert!(q.eta_rel >= -1e-14);
        let self_q = relative_quantities(&sys, &vec3(b), &vec3(b)).unwrap();
        prop_assert!(self_q.eta_rel.abs() < 1e-14);
        prop_assert!(self_q.f_rel.amax() < 1e-14);
    }

    #[test]
    fn thermodynamic_form_matches_embedding(a in gas_state(), b in gas_state()) {
        let s = GasState::new(a.0, a.1, a.2).unwrap();
        let sb = GasState::new(b.0, b.1, b.2).unwrap();
        let q = gas_relative_quantities(&unit_gas(), &s, &sb).unwrap();
        prop_assert!(q.i_density >= -1e-14);
        prop_assert!((q.eta_hat_rel * sb.theta() - q.i_density).abs() < 1e-12);
    }

    #[test]
    fn two_atom_measures_obey_duality_and_jensen(
        a in gas_state(), b in gas_state(), r in gas_state(), w in 0.0..1.0f64,
    ) {
        let sys = embed_gas_as_general(unit_gas());
        let nu = YoungMeasureAtomic::new(vec![vec![
            Atom { w, state: StateVector::new(vec![a.0, a.1, a.2]).unwrap() },
            Atom { w: 1.0 - w, state: StateVector::new(vec![b.0, b.1, b.2]).unwrap() },
        ]]).unwrap();
        let q = averaged_relent(&nu, &sys, &vec3(r)).unwrap();
        prop_assert!(q.h[0] >= -1e-12);
        prop_assert!(q.jensen_gap[0] >= -1e-12);
        // H is affine in the weights.
        let ra = Reference::new(&sys, &vec3(r)).unwrap();
        let mix = w * ra.eta_rel(&sys, &vec3(a)) + (1.0 - w) * ra.eta_rel(&sys, &vec3(b));
        prop_assert!((q.h[0] - mix).abs() <= 1e-12 * mix.abs().max(1.0));
    }

    #[test]
    fn advection_preserves_mass(c in -2.0..2.0f64, k in 1u32..4, phase in 0.0..6.3f64) {
        let m = LinearAdvection::new(1, c, 0.5);
        let grid = Grid1D::periodic(32).unwrap();
        let init = relentropy_core::solver::Field::from_fn(&grid, 0.0, |x| {
            DVector::from_element(1, 1.0 + 0.3 * (k as f64 * x + phase).sin())
        });
        let traj = simulate(&m, &grid, &init, &SolverConfig::new(0.1, 0.2), None).unwrap();
        let mass = |f: &relentropy_core::solver::Field| f.integrate(grid.dx(), |u| u[0]);
        prop_assert!((mass(traj.final_field()) - mass(&init)).abs() < 1e-12);
        let energy = |f: &relentropy_core::solver::Field| f.integrate(grid.dx(), |u| m.entropy(u));
        prop_assert!(energy(traj.final_field()) <= energy(&init) + 1e-14);
    }
}

#[test]
fn binary_container_round_trips() {
    let sys = embed_gas_as_general(unit_gas());
    let grid = Grid1D::periodic(16).unwrap();
    let init = gas_pulse(&grid, 0.2, 0.5, std::f64::consts::PI);
    let traj = simulate(&sys, &grid, &init, &SolverConfig::new(0.01, 0.05).with_output_every(0.01), None).unwrap();
    let path = std::env::temp_dir().join(format!("relentropy-roundtrip-{}.bin", std::process::id()));
    write_bin(&traj, &path).unwrap();
    let back = read_bin(&path).unwrap();
    std::fs::remove_file(&path).ok();
    assert_eq!(back.grid, traj.grid);
    assert_eq!(back.times(), traj.times());
    for (a, b) in back.snapshots.iter().zip(&traj.snapshots) {
        assert_eq!(a.cells, b.cells);
    }
}

#[test]
fn simulation_is_deterministic() {
    let sys = embed_gas_as_general(unit_gas());
    let grid = Grid1D::periodic(64).unwrap();
    let init = gas_pulse(&grid, 0.2, 0.5, std::f64::consts::PI);
    let cfg = SolverConfig::new(0.01, 0.1);
    let a = simulate(&sys, &grid, &init, &cfg, None).unwrap();
    let b = simulate(&sys, &grid, &init, &cfg, None).unwrap();
    assert_eq!(a.final_field().cells, b.final_field().cells);
}
