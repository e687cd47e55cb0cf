use std::f64::consts::PI;
use std::sync::Arc;

use polyflow_core::diagnostics::{check_energy_inequality, energy_budget_b, nikolskii_estimate, Monitor};
use polyflow_core::grids::phys::{Boundary, PhysGrid};
use polyflow_core::laws::{ResponseCurves, SpringLaw, Table};
use polyflow_core::stepper::{coupled_step, initialize, run, Problem, SchemeParams};
use proptest::prelude::*;

fn small_problem(bc: Boundary, t: f64, n: usize, curves: ResponseCurves) -> Problem {
    let grid = PhysGrid::unit_square(6, bc).unwrap();
    let mut p = SchemeParams::new(t, n, 1).unwrap();
    p.curves = curves;
    Problem::new(grid, &[SpringLaw::fene(4.0).unwrap()], 6, 8, p, None).unwrap()
}

fn stirred(grid: &PhysGrid, a: f64) -> Vec<f64> {
    grid.sample_velocity(|x, y| {
        let u = a * PI * (PI * x).sin().powi(2) * (2.0 * PI * y).sin();
        let v = -a * PI * (2.0 * PI * x).sin() * (PI * y).sin().powi(2);
        (u, v)
    })
}

fn perturbed_psi(problem: &Problem, amp: f64) -> Vec<f64> {
    let nn = problem.config.nnodes();
    let mut out = Vec::new();
    for c in 0..problem.grid.ncells() {
        let (x, y) = problem.grid.cell_center(c);
        for k in 0..nn {
            let q = problem.config.node_coordinates(k)[0];
            out.push(1.0 + amp * (2.0 * PI * (x + y)).cos() * q[0] * q[1] / 2.0);
        }
    }
    out
}

#[test]
fn zero_steps_reports_initial_state_only() {
    let problem = small_problem(Boundary::Periodic, 1.0, 0, ResponseCurves::constant(1.0, 1.0, 1.0, 1.0).unwrap());
    let rho = vec![1.0; problem.grid.ncells()];
    let u = vec![0.0; problem.grid.nfaces()];
    let psi = vec![1.0; problem.grid.ncells() * problem.config.nnodes()];
    let (state, _) = initialize(&problem, &rho, &u, &psi).unwrap();
    let mut seen = 0;
    let end = run(&problem, state.clone(), |_, r| {
        assert!(r.is_none());
        seen += 1;
        Ok(())
    })
    .unwrap();
    assert_eq!(seen, 1);
    assert_eq!(end, state);
}

#[test]
fn halving_dt_does_not_increase_picard_iterations() {
    let grid = PhysGrid::unit_square(6, Boundary::Periodic).unwrap();
    let iterations = |n: usize| {
        let mut p = SchemeParams::new(0.1, n, 1).unwrap();
        // undamped, so the count reflects the contraction of the coupling map
        // rather than the 1 - θ floor of the relaxation
        p.theta_fp = 1.0;
        let force = Arc::new(|_t: f64, _x: f64, y: f64| ((2.0 * PI * y).sin(), 0.0));
        let problem = Problem::new(grid.clone(), &[SpringLaw::fene(4.0).unwrap()], 6, 8, p, Some(force)).unwrap();
        let rho = vec![1.0; grid.ncells()];
        let (state, _) = initialize(&problem, &rho, &stirred(&grid, 0.3), &perturbed_psi(&problem, 0.5)).unwrap();
        coupled_step(&problem, &state).unwrap().1.iterations
    };
    let counts: Vec<usize> = [1, 2, 4].iter().map(|&n| iterations(n)).collect();
    assert!(counts.windows(2).all(|w| w[1] <= w[0]), "{counts:?}");
}

/// Started from rest so that the Δt-weighted initial smoothing is inert;
/// the estimate then approaches its limit from below with contracting
/// increments.
#[test]
fn nikolskii_estimate_settles_under_refinement() {
    let grid = PhysGrid::unit_square(6, Boundary::NoSlip).unwrap();
    let estimate = |n: usize| {
        let p = SchemeParams::new(0.5, n, 1).unwrap();
        let force = Arc::new(|t: f64, x: f64, y: f64| ((PI * y).sin() * (PI * x).sin() * (1.0 + t), 0.0));
        let problem = Problem::new(grid.clone(), &[SpringLaw::fene(4.0).unwrap()], 6, 8, p, Some(force)).unwrap();
        let rho = vec![1.0; grid.ncells()];
        let psi = vec![1.0; grid.ncells() * problem.config.nnodes()];
        let (state, _) = initialize(&problem, &rho, &vec![0.0; grid.nfaces()], &psi).unwrap();
        let mut traj = Vec::new();
        run(&problem, state, |s, _| {
            traj.push(s.u.clone());
            Ok(())
        })
        .unwrap();
        nikolskii_estimate(&grid, &traj, problem.dt(), 0.25).unwrap()
    };
    let v: Vec<f64> = [10, 20, 40, 80].iter().map(|&n| estimate(n)).collect();
    let steps: Vec<f64> = v.windows(2).map(|w| w[1] - w[0]).collect();
    assert!(v.iter().all(|e| e.is_finite() && *e > 0.0), "{v:?}");
    assert!(steps.windows(2).all(|d| d[1].abs() < d[0].abs()), "{v:?}");
    assert!(v[3] <= 1.1 * v[2], "{v:?}");
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 4, ..ProptestConfig::default() })]

    /// Variable density, affine ζ, stirring and a perturbed polymer
    /// density: every step conserves weighted mass, keeps ρ in range,
    /// respects the λ-bound and the energy ledger.
    #[test]
    fn coupled_run_invariants(amp in 0.05f64..0.3, pert in 0.0f64..0.8, zeta_hi in 1.0f64..3.0) {
        let curves = ResponseCurves::new(
            1.0,
            2.0,
            Table::new(vec![(1.0, 1.0), (2.0, 1.5)]).unwrap(),
            Table::new(vec![(1.0, 1.0), (2.0, zeta_hi)]).unwrap(),
        )
        .unwrap();
        let problem = small_problem(Boundary::NoSlip, 0.1, 5, curves.clone());
        let g = &problem.grid;
        let rho = g.sample_cells(|_, y| 1.5 + 0.5 * (8.0 * (y - 0.5)).tanh());
        let u0 = stirred(g, amp);
        let psi0 = perturbed_psi(&problem, pert);
        let (state, init) = initialize(&problem, &rho, &u0, &psi0).unwrap();
        let b2 = energy_budget_b(g, &problem.config, &curves, &rho, &u0, &psi0, 1.0, false, None).unwrap();
        let mut monitor = Monitor::new(b2);
        run(&problem, state, |s, r| {
            monitor.observe(&problem, s, r)?;
            Ok(())
        })
        .unwrap();
        let recs = &monitor.records;
        let m0 = recs[0].mass;
        for r in recs {
            prop_assert!((r.mass / m0 - 1.0).abs() <= 1e-10, "mass {}", r.mass / m0 - 1.0);
            prop_assert!(r.rho_min >= 1.0 && r.rho_max <= 2.0);
            prop_assert!(r.lambda_max <= init.omega + 1e-6);
            prop_assert!(r.div_defect <= 1e-12);
        }
        let (defect, ok) = check_energy_inequality(recs);
        prop_assert!(ok, "energy defect {defect}");
    }
}
