//! Quantities from the a priori estimates, evaluated per step, and the
//! checks built on them.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grids::config::ConfigGrid;
use crate::grids::field::KineticField;
use crate::grids::phys::PhysGrid;
use crate::kinetic::weighted_mass;
use crate::laws::{entropy_f_unchecked, ResponseCurves};
use crate::stepper::{Problem, State, StepReport};

pub const CSV_HEADER: [&str; 16] = [
    "step",
    "t",
    "kinetic_energy",
    "viscous_dissipation",
    "relative_entropy",
    "fisher_x",
    "fisher_q",
    "mass",
    "rho_min",
    "rho_max",
    "lambda_max",
    "energy_lhs",
    "energy_rhs",
    "fp_iters",
    "div_defect",
    "psi_min",
];

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub step: usize,
    pub t: f64,
    pub kinetic_energy: f64,
    /// Accumulated `Σ Δt ∫ μ |D(u)|²`.
    pub viscous_dissipation: f64,
    pub relative_entropy: f64,
    /// `8kε ∫∫ M |∇_x √ψ̃|²`.
    pub fisher_x: f64,
    /// `(a0 k/λ) ∫∫ M |∇_q √ψ̃|²`.
    pub fisher_q: f64,
    pub mass: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    pub lambda_max: f64,
    pub energy_lhs: f64,
    pub energy_rhs: f64,
    pub fp_iters: usize,
    pub div_defect: f64,
    pub psi_min: f64,
}

/// Shortest round-trip decimal form, switching to exponent notation for
/// very large or very small magnitudes.
pub fn format_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-5..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

impl DiagnosticsRecord {
    pub fn to_row(&self) -> Vec<String> {
        let f = format_f64;
        vec![
            self.step.to_string(),
            f(self.t),
            f(self.kinetic_energy),
            f(self.viscous_dissipation),
            f(self.relative_entropy),
            f(self.fisher_x),
            f(self.fisher_q),
            f(self.mass),
            f(self.rho_min),
            f(self.rho_max),
            f(self.lambda_max),
            f(self.energy_lhs),
            f(self.energy_rhs),
            self.fp_iters.to_string(),
            f(self.div_defect),
            f(self.psi_min),
        ]
    }
}

/// `∫∫ M ζ F(ψ̃)` with `F(s) = s(ln s − 1) + 1`, nodal values clipped at 0.
pub fn relative_entropy(grid: &PhysGrid, config: &ConfigGrid, psi: &KineticField, zeta: &[f64]) -> f64 {
    let w = config.weights();
    let per: Vec<f64> = (0..psi.ncells())
        .into_par_iter()
        .map(|c| {
            let nodal = psi.nodal(config, c);
            zeta[c] * nodal.iter().zip(&w).map(|(p, w)| w * entropy_f_unchecked(p.max(0.0))).sum::<f64>()
        })
        .collect();
    per.iter().sum::<f64>() * grid.cell_volume()
}

/// Same, for raw nodal data.
pub fn relative_entropy_nodal(grid: &PhysGrid, config: &ConfigGrid, nodal: &[f64], zeta: &[f64]) -> f64 {
    let w = config.weights();
    nodal
        .chunks(w.len())
        .zip(zeta)
        .map(|(c, z)| z * c.iter().zip(&w).map(|(p, w)| w * entropy_f_unchecked(p.max(0.0))).sum::<f64>())
        .sum::<f64>()
        * grid.cell_volume()
}

/// `∫∫ M |∇_x √ψ̃|²` with two-point differences across interior faces.
pub fn fisher_x(grid: &PhysGrid, config: &ConfigGrid, psi: &KineticField) -> f64 {
    let w = config.weights();
    let roots: Vec<Vec<f64>> = (0..psi.ncells())
        .into_par_iter()
        .map(|c| psi.nodal(config, c).into_iter().map(|p| p.max(0.0).sqrt()).collect())
        .collect();
    grid.interior_faces()
        .iter()
        .map(|f| {
            let h = if f.axis == crate::grids::phys::Axis::X { grid.hx() } else { grid.hy() };
            let (a, b) = (&roots[f.lower], &roots[f.upper]);
            f.area / h * a.iter().zip(b).zip(&w).map(|((x, y), w)| w * (x - y) * (x - y)).sum::<f64>()
        })
        .sum()
}

/// `∫∫ M |∇_q √ψ̃|²` from the exact modal gradient.
pub fn fisher_q(grid: &PhysGrid, config: &ConfigGrid, psi: &KineticField) -> f64 {
    let per: Vec<f64> = (0..psi.ncells())
        .into_par_iter()
        .map(|c| config.fisher_q(psi.cell(c), &psi.nodal(config, c)))
        .collect();
    per.iter().sum::<f64>() * grid.cell_volume()
}

/// `max_x ∫ M ψ̃ dq`.
pub fn lambda_max(psi: &KineticField) -> f64 {
    psi.polymer_number_density().into_iter().fold(f64::NEG_INFINITY, f64::max)
}

/// `max_x (λ(x) − ω)`.
pub fn lambda_bound_check(psi: &KineticField, omega: f64) -> f64 {
    lambda_max(psi) - omega
}

/// `B² = ∫ρ0|u0|² + (force term) + 2k ∫∫ M ζ(ρ0) F(ψ̃0)`. With a body
/// force present its contribution must be supplied as `force_term`.
#[allow(clippy::too_many_arguments)]
pub fn energy_budget_b(
    grid: &PhysGrid,
    config: &ConfigGrid,
    curves: &ResponseCurves,
    rho0: &[f64],
    u0: &[f64],
    psi0_nodal: &[f64],
    k: f64,
    has_force: bool,
    force_term: Option<f64>,
) -> Result<f64> {
    let f = match (has_force, force_term) {
        (false, _) => 0.0,
        (true, Some(v)) => v,
        (true, None) => {
            return Err(Error::Parameter(
                "a body force needs user-supplied constants for its energy-budget term".into(),
            ))
        }
    };
    let zeta: Vec<f64> = rho0.iter().map(|r| curves.zeta(*r)).collect::<Result<_>>()?;
    Ok(grid.kinetic_energy(rho0, u0) + f + 2.0 * k * relative_entropy_nodal(grid, config, psi0_nodal, &zeta))
}

/// `max_n (energy_lhs − B²)` and the verdict against `1e-8 (1 + B²)`.
pub fn check_energy_inequality(records: &[DiagnosticsRecord]) -> (f64, bool) {
    let mut defect = f64::NEG_INFINITY;
    let mut ok = true;
    for r in records {
        let d = r.energy_lhs - r.energy_rhs;
        defect = defect.max(d);
        ok &= d <= 1e-8 * (1.0 + r.energy_rhs);
    }
    (defect, ok)
}

/// `sup_δ δ^{-γ} ‖u(·+δ) − u(·)‖_{L²(0,T−δ; L²)}` over shifts `δ = jΔt`
/// for a trajectory `u^0 .. u^N` (piecewise constant in time).
pub fn nikolskii_estimate(grid: &PhysGrid, trajectory: &[Vec<f64>], dt: f64, gamma: f64) -> Result<f64> {
    if trajectory.len() < 3 {
        return Err(Error::Argument(format!("need at least 3 stored levels, got {}", trajectory.len())));
    }
    if !(gamma > 0.0 && gamma < 0.5) {
        return Err(Error::Argument(format!("γ must lie in (0, 1/2) for d = 2, got {gamma}")));
    }
    let n = trajectory.len() - 1;
    let mut best: f64 = 0.0;
    for j in 1..n {
        let mut acc = 0.0;
        for m in 1..=n - j {
            let d: Vec<f64> = trajectory[m + j].iter().zip(&trajectory[m]).map(|(a, b)| a - b).collect();
            acc += dt * grid.l2_norm_sq(&d);
        }
        best = best.max((j as f64 * dt).powf(-gamma) * acc.sqrt());
    }
    Ok(best)
}

/// Accumulates the energy ledger along a run.
#[derive(Debug, Clone)]
pub struct Monitor {
    b2: f64,
    sum_du: f64,
    sum_visc: f64,
    sum_dpsi: f64,
    sum_fx: f64,
    sum_fq: f64,
    prev: Option<State>,
    pub records: Vec<DiagnosticsRecord>,
}

impl Monitor {
    pub fn new(b2: f64) -> Self {
        Self { b2, sum_du: 0.0, sum_visc: 0.0, sum_dpsi: 0.0, sum_fx: 0.0, sum_fq: 0.0, prev: None, records: Vec::new() }
    }

    pub fn budget(&self) -> f64 {
        self.b2
    }

    pub fn observe(&mut self, problem: &Problem, state: &State, report: Option<&StepReport>) -> Result<DiagnosticsRecord> {
        let grid = &problem.grid;
        let config = &problem.config;
        let p = &problem.params;
        let dt = problem.dt();
        let zeta: Vec<f64> = state.rho.iter().map(|r| p.curves.zeta(*r)).collect::<Result<_>>()?;
        let entropy = relative_entropy(grid, config, &state.psi, &zeta);
        let fx = 8.0 * p.k * p.epsilon * fisher_x(grid, config, &state.psi);
        let fq = p.rouse.a0() * p.k / p.lambda * fisher_q(grid, config, &state.psi);
        if let (Some(prev), Some(r)) = (&self.prev, report) {
            let (rho_lo, _) = p.curves.rho_bounds();
            let (zeta_lo, _) = p.curves.zeta_bounds();
            let du: Vec<f64> = state.u.iter().zip(&prev.u).map(|(a, b)| a - b).collect();
            self.sum_du += rho_lo * grid.l2_norm_sq(&du);
            self.sum_visc += dt * grid.viscous_dissipation(&state.u, &r.fields.mu_new);
            self.sum_dpsi += zeta_lo * p.k / p.l * state.psi.distance_sq(&prev.psi, grid)?;
            self.sum_fx += dt * fx;
            self.sum_fq += dt * fq;
        }
        let ke = grid.kinetic_energy(&state.rho, &state.u);
        let lhs = ke + self.sum_du + self.sum_visc + 2.0 * p.k * entropy + self.sum_dpsi + self.sum_fx + self.sum_fq;
        let psi_min = match report {
            Some(r) => r.psi_min,
            None => state.psi.min_nodal(config),
        };
        let rec = DiagnosticsRecord {
            step: state.step,
            t: state.time,
            kinetic_energy: ke,
            viscous_dissipation: self.sum_visc,
            relative_entropy: entropy,
            fisher_x: fx,
            fisher_q: fq,
            mass: weighted_mass(grid, &state.psi, &zeta),
            rho_min: state.rho.iter().copied().fold(f64::INFINITY, f64::min),
            rho_max: state.rho.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            lambda_max: lambda_max(&state.psi),
            energy_lhs: lhs,
            energy_rhs: self.b2,
            fp_iters: report.map_or(0, |r| r.iterations),
            div_defect: grid.max_abs_divergence(&state.u),
            psi_min,
        };
        self.prev = Some(state.clone());
        self.records.push(rec.clone());
        Ok(rec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grids::phys::Boundary;
    use crate::laws::SpringLaw;

    #[test]
    fn budget_examples() {
        let grid = PhysGrid::unit_square(4, Boundary::Periodic).unwrap();
        let config = ConfigGrid::new(&[SpringLaw::fene(4.0).unwrap()], 6, 8).unwrap();
        let curves = ResponseCurves::constant(1.0, 1.0, 1.0, 1.0).unwrap();
        let rho = vec![1.0; 16];
        let zero = vec![0.0; grid.nfaces()];
        let nn = config.nnodes();
        let b = energy_budget_b(&grid, &config, &curves, &rho, &zero, &vec![1.0; 16 * nn], 1.0, false, None).unwrap();
        assert_eq!(b, 0.0);
        let e = std::f64::consts::E;
        let b = energy_budget_b(&grid, &config, &curves, &rho, &zero, &vec![e; 16 * nn], 1.0, false, None).unwrap();
        assert!((b - 2.0).abs() < 1e-12);
        assert!(energy_budget_b(&grid, &config, &curves, &rho, &zero, &vec![1.0; 16 * nn], 1.0, true, None).is_err());
        let u = grid.sample_velocity(|_, _| (1.0, 0.0));
        let b = energy_budget_b(&grid, &config, &curves, &rho, &u, &vec![1.0; 16 * nn], 1.0, false, None).unwrap();
        assert!((b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nikolskii_of_constant_trajectory_vanishes() {
        let grid = PhysGrid::unit_square(2, Boundary::Periodic).unwrap();
        let u = grid.sample_velocity(|x, _| (x, 0.0));
        assert_eq!(nikolskii_estimate(&grid, &vec![u.clone(); 5], 0.1, 0.25).unwrap(), 0.0);
        assert!(nikolskii_estimate(&grid, &vec![u; 2], 0.1, 0.25).is_err());
    }

    #[test]
    fn number_formatting_round_trips() {
        for v in [0.0, 1.0, -2.5e-300, 3.0e20, 0.1 + 0.2, 123456.789] {
            assert_eq!(format_f64(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(CSV_HEADER.join(","), "step,t,kinetic_energy,viscous_dissipation,relative_entropy,fisher_x,fisher_q,mass,rho_min,rho_max,lambda_max,energy_lhs,energy_rhs,fp_iters,div_defect,psi_min");
    }
}
