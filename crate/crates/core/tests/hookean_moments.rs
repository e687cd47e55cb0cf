//! Single-cell Hookean dumbbells in simple shear: the second moment obeys a
//! closed linear ODE, solved here by hand.

use polyflow_core::grids::phys::{Boundary, PhysGrid};
use polyflow_core::kinetic::second_moment;
use polyflow_core::laws::SpringLaw;
use polyflow_core::stepper::{initialize, run, Problem, SchemeParams};

/// `Σ(t)` for shear rate 1 and λ = 1, starting from the identity.
fn exact(t: f64) -> [f64; 4] {
    let e = (-t).exp();
    let s12 = 1.0 - e;
    [1.0 + 2.0 * (1.0 - e - t * e), s12, s12, 1.0]
}

fn max_relative_error(t_final: f64, n: usize) -> f64 {
    let grid = PhysGrid::unit_square(1, Boundary::Periodic).unwrap();
    let mut p = SchemeParams::new(t_final, n, 1).unwrap();
    p.imposed_gradient = Some([0.0, 1.0, 0.0, 0.0]);
    p.cutoff = false;
    p.negativity_threshold = None;
    let problem = Problem::new(grid, &[SpringLaw::hookean()], 12, 16, p, None).unwrap();
    let psi = vec![1.0; problem.config.nnodes()];
    let (state, _) = initialize(&problem, &[1.0], &vec![0.0; problem.grid.nfaces()], &psi).unwrap();
    let mut worst: f64 = 0.0;
    run(&problem, state, |s, _| {
        let sim = second_moment(&problem.config, s.psi.cell(0), 0);
        let ex = exact(s.time);
        let err: f64 = sim.iter().zip(&ex).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = ex.iter().map(|v| v * v).sum::<f64>().sqrt();
        worst = worst.max(err / norm);
        Ok(())
    })
    .unwrap();
    worst
}

#[test]
fn shear_moments_follow_the_closed_form() {
    let err = max_relative_error(1.0, 1000);
    assert!(err <= 5e-3, "{err}");
}

#[test]
fn moment_error_is_first_order_in_time() {
    let coarse = max_relative_error(0.5, 25);
    let fine = max_relative_error(0.5, 50);
    let order = (coarse / fine).log2();
    assert!((0.8..1.3).contains(&order), "{coarse} {fine} {order}");
}
