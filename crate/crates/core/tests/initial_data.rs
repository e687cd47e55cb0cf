use polyflow_core::diagnostics::{relative_entropy, relative_entropy_nodal};
use polyflow_core::grids::phys::{Boundary, PhysGrid};
use polyflow_core::laws::SpringLaw;
use polyflow_core::stepper::{initialize, smooth_initial_psi, smooth_initial_velocity, Problem, SchemeParams};
use proptest::prelude::*;

fn problem(n_steps: usize) -> Problem {
    let grid = PhysGrid::unit_square(5, Boundary::Periodic).unwrap();
    let params = SchemeParams::new(1.0, n_steps, 1).unwrap();
    Problem::new(grid, &[SpringLaw::fene(6.0).unwrap()], 6, 8, params, None).unwrap()
}

fn nodal_max(p: &Problem, psi: &polyflow_core::grids::KineticField) -> f64 {
    (0..p.grid.ncells())
        .flat_map(|c| psi.nodal(&p.config, c))
        .fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn constant_data_is_reproduced() {
    let p = problem(10);
    let rho = vec![1.0; p.grid.ncells()];
    let psi = smooth_initial_psi(&p, &vec![1.0; p.grid.ncells() * p.config.nnodes()], &rho).unwrap();
    for c in 0..p.grid.ncells() {
        for v in psi.nodal(&p.config, c) {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }
    let (u, lhs, rhs) = smooth_initial_velocity(&p, &vec![0.0; p.grid.nfaces()], &rho).unwrap();
    assert!(u.iter().all(|v| *v == 0.0));
    assert_eq!((lhs, rhs), (0.0, 0.0));
}

#[test]
fn data_above_the_cut_off_is_capped() {
    let p = problem(10);
    let l = p.params.l;
    let rho = vec![1.0; p.grid.ncells()];
    let psi = smooth_initial_psi(&p, &vec![l + 5.0; p.grid.ncells() * p.config.nnodes()], &rho).unwrap();
    assert!(nodal_max(&p, &psi) <= l + 1e-9);
}

#[test]
fn negative_or_mismatched_data_is_rejected() {
    let p = problem(10);
    let rho = vec![1.0; p.grid.ncells()];
    let mut psi = vec![1.0; p.grid.ncells() * p.config.nnodes()];
    assert!(smooth_initial_psi(&p, &psi[1..], &rho).is_err());
    psi[3] = -0.1;
    assert!(smooth_initial_psi(&p, &psi, &rho).is_err());
    let bad_rho = vec![2.0; p.grid.ncells()];
    assert!(initialize(&p, &bad_rho, &vec![0.0; p.grid.nfaces()], &vec![1.0; psi.len()]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    /// Smoothing never raises the entropy nor the polymer number density
    /// bound, and the smoothed velocity obeys its energy bound.
    #[test]
    fn smoothing_is_entropy_and_energy_stable(seed in any::<u64>(), scale in 0.1f64..4.0) {
        use rand::{Rng, SeedableRng};
        let p = problem(8);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = p.grid.ncells() * p.config.nnodes();
        let raw: Vec<f64> = (0..n).map(|_| scale * rng.random::<f64>()).collect();
        let rho = vec![1.0; p.grid.ncells()];
        let zeta = vec![1.0; p.grid.ncells()];
        let u0: Vec<f64> = {
            let mut u: Vec<f64> = (0..p.grid.nfaces()).map(|_| rng.random_range(-1.0..1.0)).collect();
            p.grid.sync_duplicates(&mut u);
            u
        };
        let (state, report) = initialize(&p, &rho, &u0, &raw).unwrap();
        let before = relative_entropy_nodal(&p.grid, &p.config, &raw, &zeta);
        let after = relative_entropy(&p.grid, &p.config, &state.psi, &zeta);
        prop_assert!(after <= before + 1e-9, "{after} > {before}");
        let lambda = state.psi.polymer_number_density().into_iter().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(lambda <= report.omega + 1e-9);
        let (lhs, rhs) = report.velocity_energy;
        prop_assert!(lhs <= rhs * (1.0 + 1e-12));
    }
}
