//! Turns a [`RunConfig`] into discrete initial data and drives the run.

use std::f64::consts::PI;
use std::sync::Arc;

use polyflow_core::diagnostics::{energy_budget_b, DiagnosticsRecord, Monitor};
use polyflow_core::stepper::{initialize, run, ForceFn, InitialReport, Problem, State};
use polyflow_core::Result;

use crate::config::{ConfigError, DensityProfile, ForceProfile, PsiProfile, RunConfig, VelocityProfile};

/// Manufactured velocity: stream function `sin²(πx) sin²(πy)` on the unit
/// square, with `u = ∂_y ψ`, `v = −∂_x ψ`.
pub fn vortex(x: f64, y: f64) -> (f64, f64) {
    let (s2x, c2x) = (2.0 * PI * x).sin_cos();
    let (s2y, c2y) = (2.0 * PI * y).sin_cos();
    (0.5 * PI * (1.0 - c2x) * s2y, -0.5 * PI * s2x * (1.0 - c2y))
}

/// Forcing for which [`vortex`] is the steady solution with `ρ = μ = 1`
/// and no polymer stress: `f = (u·∇)u − ½Δu`.
pub fn vortex_force(x: f64, y: f64) -> (f64, f64) {
    let (s2x, c2x) = (2.0 * PI * x).sin_cos();
    let (s2y, c2y) = (2.0 * PI * y).sin_cos();
    let (u, v) = vortex(x, y);
    let p2 = PI * PI;
    let p3 = p2 * PI;
    let (ux, uy) = (p2 * s2x * s2y, p2 * (1.0 - c2x) * c2y);
    let (vx, vy) = (-p2 * c2x * (1.0 - c2y), -p2 * s2x * s2y);
    let lap_u = 2.0 * p3 * s2y * (2.0 * c2x - 1.0);
    let lap_v = -2.0 * p3 * s2x * (2.0 * c2y - 1.0);
    (u * ux + v * uy - 0.5 * lap_u, u * vx + v * vy - 0.5 * lap_v)
}

pub struct Scenario {
    pub config: RunConfig,
    pub problem: Problem,
    pub rho0: Vec<f64>,
    pub u0_raw: Vec<f64>,
    /// Raw `ψ̃0` per cell and tensor node.
    pub psi0_nodal: Vec<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum BuildError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Solver(#[from] polyflow_core::Error),
}

impl Scenario {
    pub fn build(config: &RunConfig) -> std::result::Result<Self, BuildError> {
        config.validate()?;
        let grid = config.grid()?;
        let params = config.scheme_params()?;
        let laws = config.laws()?;
        let (lx, ly) = grid.extents();
        let force: Option<ForceFn> = match config.fluid.force {
            ForceProfile::None => None,
            ForceProfile::Mms => {
                if lx != 1.0 || ly != 1.0 {
                    return Err(ConfigError::Key {
                        key: "fluid.force".into(),
                        line: None,
                        message: "the manufactured forcing is defined on the unit square".into(),
                    }
                    .into());
                }
                Some(Arc::new(|_t, x, y| vortex_force(x, y)))
            }
        };
        let problem = Problem::new(grid, &laws, config.polymer.nr, config.polymer.ntheta, params, force)?;
        let grid = &problem.grid;
        let f = &config.fluid;
        let rho0 = match f.rho0 {
            DensityProfile::Uniform => vec![0.5 * (f.rho_min + f.rho_max); grid.ncells()],
            DensityProfile::MixingLayer => grid.sample_cells(|_, y| {
                let s = 0.5 * (1.0 + ((y - 0.5 * ly) / f.rho0_width).tanh());
                (f.rho_min + (f.rho_max - f.rho_min) * s).clamp(f.rho_min, f.rho_max)
            }),
        };
        let a = f.u0_amplitude;
        let u0_raw = match f.u0 {
            VelocityProfile::Zero => vec![0.0; grid.nfaces()],
            VelocityProfile::Vortex => grid.sample_velocity(|x, y| {
                let (u, v) = vortex(x / lx, y / ly);
                (a * u, a * v)
            }),
        };
        let config_grid = &problem.config;
        let nn = config_grid.nnodes();
        let p = &config.polymer;
        let mut psi0_nodal = Vec::with_capacity(grid.ncells() * nn);
        for c in 0..grid.ncells() {
            let (x, _) = grid.cell_center(c);
            for k in 0..nn {
                psi0_nodal.push(match p.psi0 {
                    PsiProfile::Equilibrium => 1.0,
                    PsiProfile::Constant => p.psi0_amplitude,
                    PsiProfile::Perturbed => {
                        let q = config_grid.node_coordinates(k)[0];
                        1.0 + p.psi0_amplitude * (2.0 * PI * x / lx).cos() * 2.0 * q[0] * q[1] / p.b[0]
                    }
                });
            }
        }
        Ok(Self { config: config.clone(), problem, rho0, u0_raw, psi0_nodal })
    }

    /// `B²`; NaN for forced runs, whose budget needs constants the user
    /// has not supplied, and for runs with a prescribed velocity gradient,
    /// which feed energy in from outside.
    pub fn energy_budget(&self) -> Result<f64> {
        let p = &self.problem;
        if p.params.imposed_gradient.is_some() {
            return Ok(f64::NAN);
        }
        match energy_budget_b(
            &p.grid,
            &p.config,
            &p.params.curves,
            &self.rho0,
            &self.u0_raw,
            &self.psi0_nodal,
            p.params.k,
            p.force.is_some(),
            None,
        ) {
            Err(polyflow_core::Error::Parameter(_)) if p.force.is_some() => Ok(f64::NAN),
            r => r,
        }
    }
}

pub struct RunOutcome {
    pub initial: InitialReport,
    pub records: Vec<DiagnosticsRecord>,
    pub final_state: State,
    /// Velocity after every step, when requested.
    pub trajectory: Vec<Vec<f64>>,
    /// Fixed-point change history of every step.
    pub histories: Vec<Vec<f64>>,
}

/// Runs the scenario, passing each accepted state and its diagnostics to
/// `observe`.
pub fn simulate(
    scenario: &Scenario,
    mut observe: impl FnMut(&State, &DiagnosticsRecord) -> Result<()>,
) -> Result<RunOutcome> {
    let problem = &scenario.problem;
    let (state, initial) = initialize(problem, &scenario.rho0, &scenario.u0_raw, &scenario.psi0_nodal)?;
    let mut monitor = Monitor::new(scenario.energy_budget()?);
    let store = scenario.config.output.store_trajectory;
    let mut trajectory = Vec::new();
    let mut histories = Vec::new();
    let final_state = run(problem, state, |s, report| {
        let rec = monitor.observe(problem, s, report)?;
        if store {
            trajectory.push(s.u.clone());
        }
        if let Some(r) = report {
            histories.push(r.history.clone());
        }
        observe(s, &rec)
    })?;
    Ok(RunOutcome { initial, records: monitor.records, final_state, trajectory, histories })
}
