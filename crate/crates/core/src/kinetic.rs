//! Implicit Fokker–Planck step for `ψ̃` with a frozen cut-off drag, and the
//! Kramers expressions for the polymeric stress.
//!
//! The configuration-space diffusion acts identically in every cell, so the
//! modal system is diagonalized once; each eigenmode then needs a single
//! sparse solve over physical cells.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::density::ResponseFields;
use crate::error::{Error, Result};
use crate::grids::config::ConfigGrid;
use crate::grids::field::KineticField;
use crate::grids::phys::{Axis, PhysGrid};
use crate::laws::{EntropyToolkit, RouseMatrix};
use crate::linalg::{relative_residual, Csr, DirectSolver, Triplets};

/// Eigen-decomposition of the modal q-diffusion matrix. Mode 0 (the
/// constant) is kept exactly decoupled with eigenvalue zero.
#[derive(Debug, Clone)]
pub struct QSpectrum {
    pub vectors: DMatrix<f64>,
    pub values: Vec<f64>,
}

impl QSpectrum {
    pub fn new(config: &ConfigGrid, rouse: &RouseMatrix, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::Parameter(format!("λ must be positive, got {lambda}")));
        }
        let q = config.q_diffusion_matrix(rouse, lambda)?;
        Ok(Self::from_matrix(&q))
    }

    pub fn from_matrix(q: &DMatrix<f64>) -> Self {
        let n = q.nrows();
        let mut vectors = DMatrix::zeros(n, n);
        let mut values = vec![0.0; n];
        vectors[(0, 0)] = 1.0;
        if n > 1 {
            let sub = q.view((1, 1), (n - 1, n - 1)).into_owned();
            let sym = 0.5 * (&sub + sub.transpose());
            let eig = SymmetricEigen::new(sym);
            for k in 0..n - 1 {
                values[k + 1] = eig.eigenvalues[k].max(0.0);
                for r in 0..n - 1 {
                    vectors[(r + 1, k + 1)] = eig.eigenvectors[(r, k)];
                }
            }
        }
        Self { vectors, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `β^L_δ(ψ̃)` (or `ψ̃` itself) at every configuration node of every cell.
#[derive(Debug, Clone, PartialEq)]
pub struct DragField {
    pub nnodes: usize,
    pub values: Vec<f64>,
}

impl DragField {
    pub fn cell(&self, c: usize) -> &[f64] {
        &self.values[c * self.nnodes..(c + 1) * self.nnodes]
    }
}

/// Freezes the drag factor at the iterate `psi`; `cutoff = None` disables
/// the truncation.
pub fn drag_field(config: &ConfigGrid, psi: &KineticField, cutoff: Option<&EntropyToolkit>) -> DragField {
    let values: Vec<Vec<f64>> = (0..psi.ncells())
        .into_par_iter()
        .map(|c| {
            let mut v = config.evaluate(psi.cell(c));
            if let Some(t) = cutoff {
                for x in &mut v {
                    *x = t.beta_delta(*x);
                }
            }
            v
        })
        .collect();
    DragField { nnodes: config.nnodes(), values: values.concat() }
}

/// Budget (in stored doubles) for keeping every eigenmode factorization.
const FACTOR_CACHE_BUDGET: usize = 8_000_000;

/// The bilinear form `a(·,·)` of one step, factored per eigenmode.
pub struct FokkerPlanckOperator {
    order: Vec<usize>,
    base: Csr,
    shifts: Vec<f64>,
    vectors: DMatrix<f64>,
    factors: Option<Vec<DirectSolver>>,
    volume: f64,
}

impl FokkerPlanckOperator {
    /// Assembles `ζ(ρ^n)` mass, `Δt ε` two-point x-diffusion, `Δt` upwind
    /// convection by the slab-averaged `ζ`-flux and `Δt` q-diffusion.
    pub fn new(
        grid: &PhysGrid,
        spectrum: &QSpectrum,
        fields: &ResponseFields,
        epsilon: f64,
        dt: f64,
    ) -> Result<Self> {
        if !(epsilon >= 0.0) || !(dt > 0.0) {
            return Err(Error::Parameter(format!("need ε ≥ 0 and Δt > 0, got {epsilon}, {dt}")));
        }
        let n = grid.ncells();
        let order = grid.band_order();
        let mut pos = vec![0; n];
        for (k, &c) in order.iter().enumerate() {
            pos[c] = k;
        }
        let v = grid.cell_volume();
        let mut t = Triplets::new(n, n);
        for c in 0..n {
            t.push(pos[c], pos[c], v * fields.zeta_new[c]);
        }
        for (f, g) in grid.interior_faces().iter().zip(&fields.zeta_flux) {
            let (a, b) = (pos[f.lower], pos[f.upper]);
            let h = if f.axis == Axis::X { grid.hx() } else { grid.hy() };
            let d = dt * epsilon * f.area / h;
            t.push(a, a, d);
            t.push(b, b, d);
            t.push(a, b, -d);
            t.push(b, a, -d);
            let g = dt * g;
            if g >= 0.0 {
                t.push(a, a, g);
                t.push(b, a, -g);
            } else {
                t.push(b, b, -g);
                t.push(a, b, g);
            }
        }
        let base = t.to_csr();
        let shifts: Vec<f64> = spectrum.values.iter().map(|l| dt * v * l).collect();
        let (kl, ku) = base.bandwidths();
        let per = n * (2 * kl + ku + 1);
        let factors = if per * shifts.len() <= FACTOR_CACHE_BUDGET {
            Some(shifts.par_iter().map(|s| DirectSolver::factor(&base.shifted(*s))).collect::<Result<Vec<_>>>()?)
        } else {
            None
        };
        Ok(Self { order, base, shifts, vectors: spectrum.vectors.clone(), factors, volume: v })
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    /// Solves `a(ψ, φ) = rhs(φ)` where `rhs` holds the load per cell and mode.
    pub fn solve(&self, rhs: &KineticField) -> Result<KineticField> {
        let nm = self.vectors.nrows();
        let n = rhs.ncells();
        if rhs.nmodes() != nm || n != self.order.len() {
            return Err(Error::Argument("right-hand side does not match the operator".into()));
        }
        // columns are cells in band order
        let r = DMatrix::from_fn(nm, n, |a, k| rhs.cell(self.order[k])[a]);
        let rt = self.vectors.transpose() * r;
        let cols: Vec<Vec<f64>> = (0..nm)
            .into_par_iter()
            .map(|k| -> Result<Vec<f64>> {
                let b: Vec<f64> = rt.row(k).iter().copied().collect();
                if b.iter().all(|x| *x == 0.0) {
                    return Ok(b);
                }
                let x = match &self.factors {
                    Some(f) => f[k].solve(&b)?,
                    None => {
                        let a = self.base.shifted(self.shifts[k]);
                        DirectSolver::factor(&a)?.solve(&b)?
                    }
                };
                let a = self.base.shifted(self.shifts[k]);
                let res = relative_residual(&a, &x, &b);
                if !(res <= 1e-10) {
                    return Err(Error::Solver(format!("Fokker–Planck mode {k}: relative residual {res:e}")));
                }
                Ok(x)
            })
            .collect::<Result<_>>()?;
        let xt = DMatrix::from_fn(nm, n, |k, j| cols[k][j]);
        let x = &self.vectors * xt;
        let mut out = KineticField::zeros(n, nm);
        for (k, &c) in self.order.iter().enumerate() {
            out.cell_mut(c).copy_from_slice(x.column(k).as_slice());
        }
        Ok(out)
    }
}

/// `∫ M Σ_i (σ q_i) ζ η · ∇_{q_i} φ` for every basis function, per cell,
/// including the cell volume.
pub fn drag_load(
    grid: &PhysGrid,
    config: &ConfigGrid,
    sigma: &[[f64; 4]],
    zeta: &[f64],
    drag: &DragField,
) -> KineticField {
    let v = grid.cell_volume();
    let nm = config.nmodes();
    let cells: Vec<Vec<f64>> = (0..grid.ncells())
        .into_par_iter()
        .map(|c| {
            if sigma[c].iter().all(|s| *s == 0.0) {
                return vec![0.0; nm];
            }
            let mut l = config.drag_load(drag.cell(c), &sigma[c]);
            for x in &mut l {
                *x *= v * zeta[c];
            }
            l
        })
        .collect();
    KineticField::from_coefficients(grid.ncells(), nm, cells.concat()).expect("sizes agree")
}

/// One step with a prescribed velocity gradient per cell.
pub fn fokker_planck_step_with_gradient(
    op: &FokkerPlanckOperator,
    grid: &PhysGrid,
    config: &ConfigGrid,
    psi_prev: &KineticField,
    fields: &ResponseFields,
    sigma: &[[f64; 4]],
    drag: &DragField,
    dt: f64,
) -> Result<KineticField> {
    let v = grid.cell_volume();
    let load = drag_load(grid, config, sigma, &fields.zeta_new, drag);
    let mut rhs = psi_prev.clone();
    for c in 0..grid.ncells() {
        let z = fields.zeta_prev[c];
        for (r, l) in rhs.cell_mut(c).iter_mut().zip(load.cell(c)) {
            *r = v * z * *r + dt * l;
        }
    }
    op.solve(&rhs)
}

/// One step driven by the new velocity `u_new` (face values).
#[allow(clippy::too_many_arguments)]
pub fn fokker_planck_step(
    op: &FokkerPlanckOperator,
    grid: &PhysGrid,
    config: &ConfigGrid,
    psi_prev: &KineticField,
    fields: &ResponseFields,
    u_new: &[f64],
    drag: &DragField,
    dt: f64,
) -> Result<KineticField> {
    let sigma = grid.velocity_gradient(u_new);
    fokker_planck_step_with_gradient(op, grid, config, psi_prev, fields, &sigma, drag, dt)
}

/// `C_i = ∫ M ζ ψ̃ U_i' q_i q_iᵀ` per cell and spring.
pub fn kramers_c(config: &ConfigGrid, psi: &KineticField, zeta: &[f64]) -> Vec<Vec<[f64; 4]>> {
    (0..psi.ncells())
        .map(|c| {
            config
                .kramers(psi.cell(c))
                .into_iter()
                .map(|t| t.map(|x| x * zeta[c]))
                .collect()
        })
        .collect()
}

/// `ϱ = ∫ M ζ ψ̃` per cell.
pub fn polymer_density(psi: &KineticField, zeta: &[f64]) -> Vec<f64> {
    psi.polymer_number_density().iter().zip(zeta).map(|(l, z)| l * z).collect()
}

/// `τ = k (Σ_i C_i − K ϱ I)` per cell.
pub fn kramers_stress(config: &ConfigGrid, psi: &KineticField, zeta: &[f64], k: f64) -> Vec<[f64; 4]> {
    let c = kramers_c(config, psi, zeta);
    let rho = polymer_density(psi, zeta);
    let kk = config.k() as f64;
    c.iter()
        .zip(&rho)
        .map(|(ci, r)| {
            let mut t = [0.0; 4];
            for m in ci {
                for e in 0..4 {
                    t[e] += m[e];
                }
            }
            t[0] -= kk * r;
            t[3] -= kk * r;
            t.map(|x| k * x)
        })
        .collect()
}

/// `∫∫ M Σ_i (σ q_i) ζ η · ∇_{q_i} φ`.
pub fn drag_form(
    grid: &PhysGrid,
    config: &ConfigGrid,
    u: &[f64],
    zeta: &[f64],
    drag: &DragField,
    phi: &KineticField,
) -> f64 {
    let sigma = grid.velocity_gradient(u);
    let load = drag_load(grid, config, &sigma, zeta, drag);
    load.as_slice().iter().zip(phi.as_slice()).map(|(a, b)| a * b).sum()
}

/// `∫ M ζ ψ̃` over `Ω × D`.
pub fn weighted_mass(grid: &PhysGrid, psi: &KineticField, zeta: &[f64]) -> f64 {
    // summed in cell order for reproducibility
    polymer_density(psi, zeta).iter().sum::<f64>() * grid.cell_volume()
}

/// `∫ M ψ̃ q_i q_iᵀ` for one cell.
pub fn second_moment(config: &ConfigGrid, coeffs: &[f64], spring: usize) -> [f64; 4] {
    let nodal = config.evaluate(coeffs);
    let w = config.weights();
    let dims = config.node_dims();
    let inner: usize = dims[spring + 1..].iter().product();
    let q = &config.springs()[spring].q;
    let mut m = [0.0; 4];
    for k in 0..nodal.len() {
        let qk = q[(k / inner) % dims[spring]];
        let a = w[k] * nodal[k];
        m[0] += a * qk[0] * qk[0];
        m[1] += a * qk[0] * qk[1];
        m[3] += a * qk[1] * qk[1];
    }
    m[2] = m[1];
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::eval_response_averages;
    use crate::grids::phys::Boundary;
    use crate::laws::{ResponseCurves, SpringLaw};

    fn setup(n: usize, bc: Boundary, law: SpringLaw) -> (PhysGrid, ConfigGrid, QSpectrum) {
        let grid = PhysGrid::unit_square(n, bc).unwrap();
        let config = ConfigGrid::new(&[law], 12, 16).unwrap();
        let spectrum = QSpectrum::new(&config, &RouseMatrix::linear_chain(1).unwrap(), 1.0).unwrap();
        (grid, config, spectrum)
    }

    fn fields(grid: &PhysGrid, rho: Vec<f64>, u: &[f64], dt: f64, curves: &ResponseCurves) -> ResponseFields {
        let slab = crate::density::advance_density(grid, &rho, u, dt, None).unwrap();
        eval_response_averages(grid, &slab, curves).unwrap()
    }

    #[test]
    fn equilibrium_is_stationary() {
        let (grid, config, spectrum) = setup(4, Boundary::NoSlip, SpringLaw::fene(4.0).unwrap());
        let curves = ResponseCurves::constant(1.0, 1.0, 1.0, 1.0).unwrap();
        let u = vec![0.0; grid.nfaces()];
        let f = fields(&grid, vec![1.0; 16], &u, 0.01, &curves);
        let op = FokkerPlanckOperator::new(&grid, &spectrum, &f, 0.01, 0.01).unwrap();
        let psi = KineticField::constant(&grid, &config, 1.0);
        let toolkit = EntropyToolkit::new(10.0, 1e-7).unwrap();
        let drag = drag_field(&config, &psi, Some(&toolkit));
        let next = fokker_planck_step(&op, &grid, &config, &psi, &f, &u, &drag, 0.01).unwrap();
        for (a, b) in next.as_slice().iter().zip(psi.as_slice()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn weighted_mass_is_conserved_with_flow_and_variable_drag() {
        let law = SpringLaw::fene(4.0).unwrap();
        let (grid, config, spectrum) = setup(6, Boundary::Periodic, law);
        let curves = ResponseCurves::new(
            1.0,
            3.0,
            crate::laws::Table::constant(1.0, 3.0, 1.0).unwrap(),
            crate::laws::Table::new(vec![(1.0, 1.0), (3.0, 2.0)]).unwrap(),
        )
        .unwrap();
        let space = grid.stream_space();
        let dofs: Vec<f64> = (0..space.ndofs).map(|k| (k as f64 * 0.7).sin()).collect();
        let u = space.velocity(&dofs);
        let rho = grid.sample_cells(|x, _| if x < 0.5 { 1.0 } else { 3.0 });
        let dt = 0.05;
        let f = fields(&grid, rho, &u, dt, &curves);
        let op = FokkerPlanckOperator::new(&grid, &spectrum, &f, 0.02, dt).unwrap();
        let psi = KineticField::project(&grid, &config, |x, k| {
            let q = config.springs()[0].q[k];
            1.0 + 0.3 * (2.0 * std::f64::consts::PI * x[0]).cos() * q[0] * q[1]
        });
        let drag = drag_field(&config, &psi, None);
        let next = fokker_planck_step(&op, &grid, &config, &psi, &f, &u, &drag, dt).unwrap();
        let m0 = weighted_mass(&grid, &psi, &f.zeta_prev);
        let m1 = weighted_mass(&grid, &next, &f.zeta_new);
        assert!((m1 / m0 - 1.0).abs() < 1e-12, "{m0} {m1}");
        // λ stays below its initial maximum for affine ζ
        let lmax = next.polymer_number_density().into_iter().fold(f64::MIN, f64::max);
        assert!(lmax <= 1.0 + 1e-12, "{lmax}");
    }

    #[test]
    fn equilibrium_stress_vanishes() {
        let (grid, config, _) = setup(2, Boundary::Periodic, SpringLaw::fene(4.0).unwrap());
        let psi = KineticField::constant(&grid, &config, 1.0);
        let zeta = vec![1.0; 4];
        for t in kramers_stress(&config, &psi, &zeta, 1.0) {
            assert!(t.iter().all(|x| x.abs() < 1e-10), "{t:?}");
        }
        let zero = KineticField::zeros(4, config.nmodes());
        assert!(kramers_stress(&config, &zero, &zeta, 1.0).iter().all(|t| t.iter().all(|x| *x == 0.0)));
        assert_eq!(polymer_density(&psi, &zeta), vec![1.0; 4]);
    }

    #[test]
    fn hookean_perturbation_stress_is_gaussian_fourth_moment() {
        let (grid, config, _) = setup(1, Boundary::Periodic, SpringLaw::hookean());
        for eps in [1e-3, 2e-3] {
            let psi = KineticField::project(&grid, &config, |_, k| {
                let q = config.springs()[0].q[k];
                1.0 + eps * q[0] * q[1]
            });
            let c = &kramers_c(&config, &psi, &[1.0])[0][0];
            // ∫ M q_x q_y · q_x q_y = E[x²]E[y²] = 1 for the unit Gaussian
            assert!((c[1] - eps).abs() < 1e-12, "{c:?}");
            assert!((c[0] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn drag_form_matches_kramers_contraction() {
        let (grid, config, _) = setup(4, Boundary::Periodic, SpringLaw::fene(4.0).unwrap());
        let space = grid.stream_space();
        let dofs: Vec<f64> = (0..space.ndofs).map(|k| (k as f64 * 1.3).cos()).collect();
        let u = space.velocity(&dofs);
        let psi = KineticField::project(&grid, &config, |x, k| {
            let q = config.springs()[0].q[k];
            1.0 + 0.2 * x[1] * q[0] * q[1] + 0.1 * q[0] * q[0]
        });
        let zeta = vec![1.5; grid.ncells()];
        let c = 0.7;
        let drag = DragField { nnodes: config.nnodes(), values: vec![c; grid.ncells() * config.nnodes()] };
        let lhs = drag_form(&grid, &config, &u, &zeta, &drag, &psi);
        let sigma = grid.velocity_gradient(&u);
        let cc = kramers_c(&config, &psi, &zeta);
        let rhs: f64 = (0..grid.ncells())
            .map(|k| (0..4).map(|e| cc[k][0][e] * sigma[k][e]).sum::<f64>())
            .sum::<f64>()
            * c
            * grid.cell_volume();
        assert!((lhs - rhs).abs() < 1e-9 * (1.0 + rhs.abs()), "{lhs} {rhs}");
        let zero = vec![0.0; grid.nfaces()];
        assert_eq!(drag_form(&grid, &config, &zero, &zeta, &drag, &psi), 0.0);
    }

    #[test]
    fn cut_off_is_inert_below_l() {
        let (grid, config, spectrum) = setup(4, Boundary::Periodic, SpringLaw::fene(4.0).unwrap());
        let curves = ResponseCurves::constant(1.0, 1.0, 1.0, 1.0).unwrap();
        let space = grid.stream_space();
        let u = space.velocity(&(0..space.ndofs).map(|k| 0.1 * (k as f64).sin()).collect::<Vec<_>>());
        let dt = 0.01;
        let f = fields(&grid, vec![1.0; 16], &u, dt, &curves);
        let op = FokkerPlanckOperator::new(&grid, &spectrum, &f, 0.01, dt).unwrap();
        let psi = KineticField::project(&grid, &config, |x, k| {
            let q = config.springs()[0].q[k];
            1.2 + 0.3 * x[0] * q[0] * q[1]
        });
        let tk = EntropyToolkit::new(10.0, 1e-7).unwrap();
        let a = fokker_planck_step(&op, &grid, &config, &psi, &f, &u, &drag_field(&config, &psi, Some(&tk)), dt).unwrap();
        let b = fokker_planck_step(&op, &grid, &config, &psi, &f, &u, &drag_field(&config, &psi, None), dt).unwrap();
        assert!(a.distance_sq(&b, &grid).unwrap().sqrt() < 1e-12);
    }
}
