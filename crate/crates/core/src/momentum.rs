//! Implicit momentum step over the discretely divergence-free space.
//!
//! Velocities are written as `u = Curl ψ` on the MAC grid, so the pressure
//! never appears: the step solves `Curlᵀ B Curl ψ = Curlᵀ ℓ`.

use crate::density::DensitySlab;
use crate::error::{Error, Result};
use crate::grids::phys::{Axis, Boundary, PhysGrid, StreamSpace};
use crate::linalg::{Csr, DirectSolver, Triplets};

/// `∫ μ D(u):D(w)` as a matrix on face velocities.
pub fn viscous_matrix(grid: &PhysGrid, mu_cells: &[f64]) -> Csr {
    let v = grid.cell_volume();
    let (ux, vy) = grid.cell_stretch_operators();
    let (uy, vx) = grid.node_shear_operators();
    let d1: Vec<f64> = mu_cells.iter().map(|m| v * m).collect();
    let mu_n = grid.cells_to_nodes(mu_cells);
    let d2: Vec<f64> = grid.node_weights().iter().zip(&mu_n).map(|(w, m)| 0.5 * w * m).collect();
    let shear = uy.add(&vx);
    let a = Csr::diagonal(&d1).congruence(&ux);
    let b = Csr::diagonal(&d1).congruence(&vy);
    let c = Csr::diagonal(&d2).congruence(&shear);
    a.add(&b).add(&c)
}

/// `∫ ∇u : ∇w`, with the shear derivatives taken at nodes.
pub fn gradient_matrix(grid: &PhysGrid) -> Csr {
    let v = grid.cell_volume();
    let (ux, vy) = grid.cell_stretch_operators();
    let (uy, vx) = grid.node_shear_operators();
    let dc = Csr::diagonal(&vec![v; grid.ncells()]);
    let dn = Csr::diagonal(&grid.node_weights());
    dc.congruence(&ux).add(&dc.congruence(&vy)).add(&dn.congruence(&uy)).add(&dn.congruence(&vx))
}

fn canonical(grid: &PhysGrid, axis: Axis, i: isize, j: isize) -> Option<usize> {
    let (nx, ny) = (grid.nx() as isize, grid.ny() as isize);
    let periodic = grid.boundary() == Boundary::Periodic;
    let (ii, jj) = if periodic { (i.rem_euclid(nx), j.rem_euclid(ny)) } else { (i, j) };
    let f = match axis {
        Axis::X => {
            if ii < 0 || ii > nx || jj < 0 || jj >= ny {
                return None;
            }
            grid.uface(ii as usize, jj as usize)
        }
        Axis::Y => {
            if ii < 0 || ii >= nx || jj < 0 || jj > ny {
                return None;
            }
            grid.vface(ii as usize, jj as usize)
        }
    };
    grid.face_is_active(f).then_some(f)
}

/// `∫ ρ̄ (a·∇)u · w` by central differences, before antisymmetrization.
pub fn convection_matrix(grid: &PhysGrid, rho_faces: &[f64], a: &[f64]) -> Csr {
    let v = grid.cell_volume();
    let (hx, hy) = (grid.hx(), grid.hy());
    let mut t = Triplets::new(grid.nfaces(), grid.nfaces());
    let at = |axis, i: isize, j: isize| canonical(grid, axis, i, j).map_or(0.0, |f| a[f]);
    for f in 0..grid.nfaces() {
        if !grid.face_is_active(f) {
            continue;
        }
        let axis = grid.face_axis(f);
        let (i, j) = grid.face_ij(f);
        let (i, j) = (i as isize, j as isize);
        let (ax, ay) = match axis {
            Axis::X => (a[f], 0.25 * (at(Axis::Y, i - 1, j) + at(Axis::Y, i, j) + at(Axis::Y, i - 1, j + 1) + at(Axis::Y, i, j + 1))),
            Axis::Y => (0.25 * (at(Axis::X, i, j - 1) + at(Axis::X, i + 1, j - 1) + at(Axis::X, i, j) + at(Axis::X, i + 1, j)), a[f]),
        };
        let w = v * rho_faces[f];
        for (di, dj, coef) in [(1, 0, ax / (2.0 * hx)), (-1, 0, -ax / (2.0 * hx)), (0, 1, ay / (2.0 * hy)), (0, -1, -ay / (2.0 * hy))] {
            if let Some(g) = canonical(grid, axis, i + di, j + dj) {
                t.push(f, g, w * coef);
            }
        }
    }
    t.to_csr()
}

/// `½(N − Nᵀ)`.
pub fn skew_part(n: &Csr) -> Csr {
    n.add(&n.transpose().scaled(-1.0)).scaled(0.5)
}

/// Face-centred density weights (zero on inactive faces).
fn face_mass(grid: &PhysGrid, rho: &[f64]) -> Vec<f64> {
    let rf = grid.scalar_to_faces(rho);
    (0..grid.nfaces()).map(|f| grid.face_weight(f) * rf[f]).collect()
}

/// The bilinear form `b(·,·)` of one step, factored on the stream space.
pub struct MomentumOperator {
    space: StreamSpace,
    solver: DirectSolver,
    mass_prev: Vec<f64>,
    mass_new: Vec<f64>,
    gradient_t: Csr,
    convection: Csr,
    dt: f64,
}

impl MomentumOperator {
    pub fn new(grid: &PhysGrid, space: &StreamSpace, slab: &DensitySlab, mu_new: &[f64], dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::Parameter(format!("time step must be positive, got {dt}")));
        }
        let mass_prev = face_mass(grid, slab.start());
        let mass_new = face_mass(grid, slab.end());
        let mass: Vec<f64> = mass_prev.iter().zip(&mass_new).map(|(a, b)| 0.5 * (a + b)).collect();
        let rho_avg = grid.scalar_to_faces(&slab.average);
        let convection = skew_part(&convection_matrix(grid, &rho_avg, &slab.velocity));
        let b = Csr::diagonal(&mass)
            .add(&viscous_matrix(grid, mu_new).scaled(dt))
            .add(&convection.scaled(dt));
        let a = b.congruence(&space.curl);
        let solver = DirectSolver::factor(&a)?;
        Ok(Self {
            space: space.clone(),
            solver,
            mass_prev,
            mass_new,
            gradient_t: grid.gradient_operator().transpose(),
            convection,
            dt,
        })
    }

    /// The antisymmetrized convection matrix (without the `Δt` factor).
    pub fn convection(&self) -> &Csr {
        &self.convection
    }

    /// Solves for `u^n` given `u^{n-1}`, the polymer stress per cell and
    /// the slab-averaged body force at faces.
    pub fn solve(&self, grid: &PhysGrid, u_prev: &[f64], stress: &[[f64; 4]], force: &[f64]) -> Result<Vec<f64>> {
        let v = grid.cell_volume();
        let flat: Vec<f64> = stress.iter().flat_map(|t| t.map(|x| x * v)).collect();
        let div = self.gradient_t.mul_vec(&flat);
        let load: Vec<f64> = (0..u_prev.len())
            .map(|f| self.mass_prev[f] * u_prev[f] + self.dt * (self.mass_new[f] * force[f] - div[f]))
            .collect();
        let rhs = self.space.curl.transpose_mul_vec(&load);
        let psi = self.solver.solve(&rhs)?;
        let mut u = self.space.velocity(&psi);
        grid.sync_duplicates(&mut u);
        Ok(u)
    }
}

/// Slab average of a time-dependent body force, by the trapezoidal rule
/// over `substeps` intervals, sampled at faces.
pub fn body_force_average(
    grid: &PhysGrid,
    f: &dyn Fn(f64, f64, f64) -> (f64, f64),
    t0: f64,
    dt: f64,
    substeps: usize,
) -> Vec<f64> {
    let m = substeps.max(1);
    let mut acc = vec![0.0; grid.nfaces()];
    for k in 0..=m {
        let t = t0 + dt * k as f64 / m as f64;
        let w = if k == 0 || k == m { 0.5 } else { 1.0 } / m as f64;
        let s = grid.sample_velocity(|x, y| f(t, x, y));
        for (a, b) in acc.iter_mut().zip(&s) {
            *a += w * b;
        }
    }
    acc
}

/// Solves `∫ ρ0 u·v + Δt ∇u:∇v = ∫ ρ0 u0·v` over the divergence-free space
/// and returns the smoothed field with the two sides of its energy bound.
pub fn project_initial_velocity(
    grid: &PhysGrid,
    space: &StreamSpace,
    u0: &[f64],
    rho0: &[f64],
    dt: f64,
) -> Result<(Vec<f64>, f64, f64)> {
    let mass = face_mass(grid, rho0);
    let a = Csr::diagonal(&mass).add(&gradient_matrix(grid).scaled(dt)).congruence(&space.curl);
    let load: Vec<f64> = mass.iter().zip(u0).map(|(m, u)| m * u).collect();
    let psi = DirectSolver::factor(&a)?.solve(&space.curl.transpose_mul_vec(&load))?;
    let mut u = space.velocity(&psi);
    grid.sync_duplicates(&mut u);
    let grad = gradient_matrix(grid).mul_vec(&u);
    let lhs = grid.kinetic_energy(rho0, &u) + dt * u.iter().zip(&grad).map(|(a, b)| a * b).sum::<f64>();
    let rhs = grid.kinetic_energy(rho0, u0);
    Ok((u, lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::advance_density;
    use proptest::prelude::*;

    fn random_velocity(grid: &PhysGrid, seed: f64) -> Vec<f64> {
        let space = grid.stream_space();
        let dofs: Vec<f64> = (0..space.ndofs).map(|k| ((k as f64 + 1.0) * seed).sin()).collect();
        space.velocity(&dofs)
    }

    #[test]
    fn rest_stays_at_rest() {
        let grid = PhysGrid::unit_square(6, Boundary::NoSlip).unwrap();
        let space = grid.stream_space();
        let u0 = vec![0.0; grid.nfaces()];
        let slab = advance_density(&grid, &vec![1.0; 36], &u0, 0.1, None).unwrap();
        let op = MomentumOperator::new(&grid, &space, &slab, &vec![1.0; 36], 0.1).unwrap();
        let u = op.solve(&grid, &u0, &vec![[0.0; 4]; 36], &u0).unwrap();
        assert!(u.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn body_force_average_is_exact_for_linear_time() {
        let grid = PhysGrid::unit_square(2, Boundary::Periodic).unwrap();
        let g = |x: f64, y: f64| (x + y, x * y);
        let avg = body_force_average(&grid, &|t, x, y| (t * g(x, y).0, t * g(x, y).1), 0.0, 0.2, 3);
        let exact = grid.sample_velocity(|x, y| (0.1 * g(x, y).0, 0.1 * g(x, y).1));
        for (a, b) in avg.iter().zip(&exact) {
            assert!((a - b).abs() < 1e-15);
        }
        let c = body_force_average(&grid, &|_, _, _| (2.0, -1.0), 1.0, 0.5, 4);
        assert!(c.iter().zip(&grid.sample_velocity(|_, _| (2.0, -1.0))).all(|(a, b)| (a - b).abs() < 1e-15));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn convection_is_skew_and_energy_identity_holds(seed in 0.1f64..3.0, periodic in any::<bool>(), dt in 0.01f64..0.3) {
            let bc = if periodic { Boundary::Periodic } else { Boundary::NoSlip };
            let grid = PhysGrid::unit_square(8, bc).unwrap();
            let space = grid.stream_space();
            let u_prev = random_velocity(&grid, seed);
            let rho0 = grid.sample_cells(|x, y| 2.0 + (3.0 * x + seed).sin() * (2.0 * y).cos());
            let slab = advance_density(&grid, &rho0, &u_prev, dt, None).unwrap();
            let mu = grid.sample_cells(|x, _| 1.0 + 0.5 * x);
            let op = MomentumOperator::new(&grid, &space, &slab, &mu, dt).unwrap();
            let c = op.convection();
            let dense = c.to_dense();
            prop_assert!((&dense + dense.transpose()).abs().max() <= 1e-12);
            let stress: Vec<[f64; 4]> = (0..grid.ncells()).map(|k| {
                let s = (k as f64 * seed).sin();
                [s, 0.3 * s, 0.3 * s, -s]
            }).collect();
            let zero = vec![0.0; grid.nfaces()];
            let u = op.solve(&grid, &u_prev, &stress, &zero).unwrap();
            prop_assert!(grid.max_abs_divergence(&u) <= 1e-12);
            // ½∫ρⁿ|uⁿ|² + ½∫ρⁿ⁻¹|uⁿ−uⁿ⁻¹|² + Δt∫μ|D|² = ½∫ρⁿ⁻¹|uⁿ⁻¹|² − Δt∫τ:∇uⁿ
            let du: Vec<f64> = u.iter().zip(&u_prev).map(|(a, b)| a - b).collect();
            let lhs = 0.5 * grid.kinetic_energy(slab.end(), &u)
                + 0.5 * grid.kinetic_energy(slab.start(), &du)
                + dt * grid.viscous_dissipation(&u, &mu);
            let sigma = grid.velocity_gradient(&u);
            let work: f64 = stress.iter().zip(&sigma).map(|(t, s)| (0..4).map(|e| t[e] * s[e]).sum::<f64>()).sum::<f64>() * grid.cell_volume();
            let rhs = 0.5 * grid.kinetic_energy(slab.start(), &u_prev) - dt * work;
            prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()), "{} {}", lhs, rhs);
        }
    }

    #[test]
    fn initial_projection_energy_bound() {
        let grid = PhysGrid::unit_square(8, Boundary::NoSlip).unwrap();
        let space = grid.stream_space();
        let rho0 = grid.sample_cells(|x, _| 1.0 + x);
        let raw = grid.sample_velocity(|x, y| (y - 0.5, (3.0 * x).sin()));
        let (u, lhs, rhs) = project_initial_velocity(&grid, &space, &raw, &rho0, 0.01).unwrap();
        assert!(lhs <= rhs);
        assert!(grid.max_abs_divergence(&u) < 1e-12);
        let (z, l0, r0) = project_initial_velocity(&grid, &space, &vec![0.0; grid.nfaces()], &rho0, 0.01).unwrap();
        assert!(z.iter().all(|x| *x == 0.0) && l0 == 0.0 && r0 == 0.0);
        // smooth divergence-free data is reproduced as Δt → 0
        let smooth = space.velocity(&(0..space.ndofs).map(|k| (0.1 * k as f64).sin()).collect::<Vec<_>>());
        let mut last = f64::INFINITY;
        for dt in [1e-1, 1e-2, 1e-3, 1e-4] {
            let (u, _, _) = project_initial_velocity(&grid, &space, &smooth, &rho0, dt).unwrap();
            let d: Vec<f64> = u.iter().zip(&smooth).map(|(a, b)| a - b).collect();
            let e = grid.l2_norm_sq(&d).sqrt();
            assert!(e < last);
            last = e;
        }
    }
}

