//! Initial-data smoothing, the damped Picard coupling of one time step,
//! and the outer time loop.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::density::{advance_density, eval_response_averages, DensitySlab, ResponseFields};
use crate::error::{Error, Result};
use crate::grids::config::ConfigGrid;
use crate::grids::field::KineticField;
use crate::grids::phys::{PhysGrid, StreamSpace};
use crate::kinetic::{
    drag_field, fokker_planck_step, fokker_planck_step_with_gradient, kramers_stress, FokkerPlanckOperator,
    QSpectrum,
};
use crate::laws::{EntropyToolkit, ResponseCurves, RouseMatrix, SpringLaw};
use crate::momentum::{body_force_average, project_initial_velocity, MomentumOperator};

/// Body force `f(t, x, y)`.
pub type ForceFn = Arc<dyn Fn(f64, f64, f64) -> (f64, f64) + Send + Sync>;

/// Number of steps satisfying `Δt L ln L ≤ C0`.
pub fn linkage_steps(t_final: f64, l: f64, c0: f64) -> Result<usize> {
    if !(c0 > 0.0) || !(l > 1.0) || !(t_final > 0.0) {
        return Err(Error::Parameter(format!("linkage needs T > 0, L > 1, C0 > 0; got {t_final}, {l}, {c0}")));
    }
    Ok((t_final * l * l.ln() / c0 - 1e-12).ceil().max(1.0) as usize)
}

/// `ε = (ℓ0/L0)² / (4 (K + 1) λ)`.
pub fn default_epsilon(k_springs: usize, lambda: f64, length_ratio: f64) -> f64 {
    length_ratio * length_ratio / (4.0 * (k_springs as f64 + 1.0) * lambda)
}

#[derive(Debug, Clone)]
pub struct SchemeParams {
    pub t_final: f64,
    pub n_steps: usize,
    pub l: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub lambda: f64,
    /// Polymer coupling constant; zero decouples the flow from the polymer.
    pub k: f64,
    pub rouse: RouseMatrix,
    pub curves: ResponseCurves,
    pub tol_fp: f64,
    pub maxit_fp: usize,
    pub theta_fp: f64,
    pub linkage_c0: Option<f64>,
    /// Apply `β^L_δ` in the drag (otherwise the drag uses `ψ̃` itself).
    pub cutoff: bool,
    /// Abort when `min ψ̃` drops below `−threshold`; `None` only reports.
    pub negativity_threshold: Option<f64>,
    /// Kinetic-only runs: the velocity gradient seen by the polymer is fixed
    /// and the momentum equation is not solved.
    pub imposed_gradient: Option<[f64; 4]>,
}

impl SchemeParams {
    pub fn new(t_final: f64, n_steps: usize, k_springs: usize) -> Result<Self> {
        let lambda = 1.0;
        Ok(Self {
            t_final,
            n_steps,
            l: 10.0,
            delta: 1e-7,
            epsilon: default_epsilon(k_springs, lambda, 0.1),
            lambda,
            k: 1.0,
            rouse: RouseMatrix::linear_chain(k_springs)?,
            curves: ResponseCurves::constant(1.0, 1.0, 1.0, 1.0)?,
            tol_fp: 1e-9,
            maxit_fp: 200,
            theta_fp: 0.7,
            linkage_c0: None,
            cutoff: true,
            negativity_threshold: Some(1e-6),
            imposed_gradient: None,
        })
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.n_steps.max(1) as f64
    }

    pub fn toolkit(&self) -> Result<EntropyToolkit> {
        EntropyToolkit::new(self.l, self.delta)
    }

    /// Replaces `n_steps` by the linkage-derived count when enabled.
    pub fn apply_linkage(&mut self) -> Result<()> {
        if let Some(c0) = self.linkage_c0 {
            self.n_steps = linkage_steps(self.t_final, self.l, c0)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Parameter(m));
        if !(self.t_final >= 0.0) {
            return bad(format!("T must be nonnegative, got {}", self.t_final));
        }
        if !(self.l > 1.0) {
            return bad(format!("L must exceed 1, got {}", self.l));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("δ must lie in (0, 1), got {}", self.delta));
        }
        if !(self.epsilon > 0.0) {
            return bad(format!("ε must be positive, got {}", self.epsilon));
        }
        if !(self.lambda > 0.0) {
            return bad(format!("λ must be positive, got {}", self.lambda));
        }
        if !(self.k >= 0.0) {
            return bad(format!("k must be nonnegative, got {}", self.k));
        }
        if !(self.tol_fp > 0.0) || self.maxit_fp == 0 {
            return bad("fixed-point tolerance and iteration budget must be positive".into());
        }
        if !(self.theta_fp > 0.0 && self.theta_fp <= 1.0) {
            return bad(format!("θ_fp must lie in (0, 1], got {}", self.theta_fp));
        }
        if let Some(c0) = self.linkage_c0 {
            let lhs = self.dt() * self.l * self.l.ln();
            if lhs > c0 * (1.0 + 1e-12) {
                return bad(format!("linkage violated: Δt L ln L = {lhs} > C0 = {c0}"));
            }
        }
        Ok(())
    }
}

/// Everything that stays fixed during a run.
pub struct Problem {
    pub grid: PhysGrid,
    pub config: ConfigGrid,
    pub space: StreamSpace,
    pub spectrum: QSpectrum,
    pub params: SchemeParams,
    pub force: Option<ForceFn>,
    toolkit: EntropyToolkit,
}

impl Problem {
    pub fn new(
        grid: PhysGrid,
        laws: &[SpringLaw],
        nr: usize,
        ntheta: usize,
        params: SchemeParams,
        force: Option<ForceFn>,
    ) -> Result<Self> {
        params.validate()?;
        if params.rouse.springs() != laws.len() {
            return Err(Error::Parameter(format!(
                "Rouse matrix is {0}x{0} but {1} spring laws were given",
                params.rouse.springs(),
                laws.len()
            )));
        }
        for law in laws {
            if law.is_bounded() {
                law.growth_exponent()?;
            }
        }
        let config = ConfigGrid::new(laws, nr, ntheta)?;
        let spectrum = QSpectrum::new(&config, &params.rouse, params.lambda)?;
        let space = grid.stream_space();
        let toolkit = params.toolkit()?;
        Ok(Self { grid, config, space, spectrum, params, force, toolkit })
    }

    pub fn toolkit(&self) -> &EntropyToolkit {
        &self.toolkit
    }

    pub fn dt(&self) -> f64 {
        self.params.dt()
    }

    fn cutoff(&self) -> Option<&EntropyToolkit> {
        self.params.cutoff.then_some(&self.toolkit)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub rho: Vec<f64>,
    pub u: Vec<f64>,
    pub psi: KineticField,
    pub step: usize,
    pub time: f64,
}

/// Per-step outcome of the coupling iteration.
#[derive(Debug, Clone)]
pub struct StepReport {
    pub iterations: usize,
    pub history: Vec<f64>,
    pub psi_min: f64,
    pub div_defect: f64,
    pub fields: ResponseFields,
    pub slab: DensitySlab,
}

/// Result of preparing the discrete initial data.
#[derive(Debug, Clone)]
pub struct InitialReport {
    /// `∫ρ0|u⁰|² + Δt ∫|∇u⁰|²` and `∫ρ0|u0|²`.
    pub velocity_energy: (f64, f64),
    pub omega: f64,
}

/// Smooths `u0` onto the discretely divergence-free space.
pub fn smooth_initial_velocity(problem: &Problem, u0_raw: &[f64], rho0: &[f64]) -> Result<(Vec<f64>, f64, f64)> {
    project_initial_velocity(&problem.grid, &problem.space, u0_raw, rho0, problem.dt())
}

/// Elliptic projection of `ζ(ρ0) β^L(ψ̃0)` with unit x- and q-diffusion
/// weighted by `Δt`; `psi0_nodal` holds raw values per cell and node.
pub fn smooth_initial_psi(problem: &Problem, psi0_nodal: &[f64], rho0: &[f64]) -> Result<KineticField> {
    let grid = &problem.grid;
    let config = &problem.config;
    let nn = config.nnodes();
    if psi0_nodal.len() != grid.ncells() * nn {
        return Err(Error::Argument("initial ψ̃ does not match the grids".into()));
    }
    if psi0_nodal.iter().any(|p| !(*p >= 0.0)) {
        return Err(Error::Argument("initial ψ̃ must be nonnegative".into()));
    }
    let zeta: Vec<f64> = rho0.iter().map(|r| problem.params.curves.zeta(*r)).collect::<Result<_>>()?;
    let fields = ResponseFields {
        mu_new: vec![0.0; grid.ncells()],
        zeta_new: zeta.clone(),
        zeta_prev: zeta.clone(),
        zeta_avg: zeta.clone(),
        zeta_flux: vec![0.0; grid.interior_faces().len()],
    };
    let k = config.k();
    let identity = RouseMatrix::new(DMatrix::identity(k, k))?;
    // (1/(4λ)) I with λ = 1/4 is the plain q-Laplacian
    let spectrum = QSpectrum::new(config, &identity, 0.25)?;
    let dt = problem.dt();
    let op = FokkerPlanckOperator::new(grid, &spectrum, &fields, 1.0, dt)?;
    let v = grid.cell_volume();
    let l = problem.params.l;
    let mut rhs = KineticField::zeros(grid.ncells(), config.nmodes());
    for c in 0..grid.ncells() {
        let nodal: Vec<f64> = psi0_nodal[c * nn..(c + 1) * nn].iter().map(|p| v * zeta[c] * p.min(l)).collect();
        rhs.cell_mut(c).copy_from_slice(&config.project(&nodal));
    }
    op.solve(&rhs)
}

/// `ω = max_x ∫ M ψ̃0 dq` from raw nodal data.
pub fn omega(config: &ConfigGrid, psi0_nodal: &[f64]) -> f64 {
    let w = config.weights();
    psi0_nodal
        .chunks(w.len())
        .map(|c| c.iter().zip(&w).map(|(p, w)| p * w).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Discrete initial state from raw data.
pub fn initialize(
    problem: &Problem,
    rho0: &[f64],
    u0_raw: &[f64],
    psi0_nodal: &[f64],
) -> Result<(State, InitialReport)> {
    let (lo, hi) = problem.params.curves.rho_bounds();
    if rho0.len() != problem.grid.ncells() || rho0.iter().any(|r| !(*r >= lo && *r <= hi)) {
        return Err(Error::Range(format!("initial density must lie in [{lo}, {hi}] on every cell")));
    }
    let (u, lhs, rhs) = smooth_initial_velocity(problem, u0_raw, rho0)?;
    let psi = smooth_initial_psi(problem, psi0_nodal, rho0)?;
    let state = State { rho: rho0.to_vec(), u, psi, step: 0, time: 0.0 };
    Ok((state, InitialReport { velocity_energy: (lhs, rhs), omega: omega(&problem.config, psi0_nodal) }))
}

fn relative_change(new: &KineticField, old: &KineticField, grid: &PhysGrid) -> Result<f64> {
    let num = new.distance_sq(old, grid)?.sqrt();
    let den = new.weighted_inner_product(new, grid)?.sqrt();
    Ok(if den > 0.0 { num / den } else { num })
}

/// One time step: density transport, then damped Picard iteration between
/// the momentum and Fokker–Planck solves.
pub fn coupled_step(problem: &Problem, state: &State) -> Result<(State, StepReport)> {
    let grid = &problem.grid;
    let config = &problem.config;
    let p = &problem.params;
    let dt = problem.dt();
    let slab = advance_density(grid, &state.rho, &state.u, dt, None)?;
    let fields = eval_response_averages(grid, &slab, &p.curves)?;
    let fop = FokkerPlanckOperator::new(grid, &problem.spectrum, &fields, p.epsilon, dt)?;
    let kinetic_only = p.imposed_gradient.is_some();
    let mop = if kinetic_only {
        None
    } else {
        Some(MomentumOperator::new(grid, &problem.space, &slab, &fields.mu_new, dt)?)
    };
    let force = match &problem.force {
        Some(f) => body_force_average(grid, f.as_ref(), state.time, dt, slab.substeps().max(4)),
        None => vec![0.0; grid.nfaces()],
    };

    let mut psi_iter = state.psi.clone();
    let mut u_iter = state.u.clone();
    let mut history = Vec::new();
    let mut accepted = None;
    for it in 1..=p.maxit_fp {
        let u_new = match &mop {
            Some(op) => {
                let stress = if p.k == 0.0 {
                    vec![[0.0; 4]; grid.ncells()]
                } else {
                    kramers_stress(config, &psi_iter, &fields.zeta_new, p.k)
                };
                op.solve(grid, &state.u, &stress, &force)?
            }
            None => state.u.clone(),
        };
        let drag = drag_field(config, &psi_iter, problem.cutoff());
        let psi_new = match p.imposed_gradient {
            Some(g) => {
                let sigma = vec![g; grid.ncells()];
                fokker_planck_step_with_gradient(&fop, grid, config, &state.psi, &fields, &sigma, &drag, dt)?
            }
            None => fokker_planck_step(&fop, grid, config, &state.psi, &fields, &u_new, &drag, dt)?,
        };
        let dpsi = relative_change(&psi_new, &psi_iter, grid)?;
        let du: Vec<f64> = u_new.iter().zip(&u_iter).map(|(a, b)| a - b).collect();
        let du = grid.l2_norm_sq(&du).sqrt() / (grid.l2_norm_sq(&u_new).sqrt() + 1.0);
        let change = dpsi.max(du);
        history.push(change);
        if !change.is_finite() {
            return Err(Error::Numerical(format!("non-finite fixed-point change at iteration {it}")));
        }
        if change <= p.tol_fp {
            accepted = Some((u_new, psi_new, it));
            break;
        }
        let theta = p.theta_fp;
        for (a, b) in psi_iter.as_mut_slice().iter_mut().zip(psi_new.as_slice()) {
            *a = theta * b + (1.0 - theta) * *a;
        }
        u_iter = u_new;
    }
    let Some((u, psi, iterations)) = accepted else {
        return Err(Error::NonConvergence {
            iterations: p.maxit_fp,
            last: history.last().copied().unwrap_or(f64::NAN),
            history,
        });
    };
    let psi_min = psi.min_nodal(config);
    if let Some(th) = p.negativity_threshold {
        if psi_min < -th {
            return Err(Error::Negativity { min: psi_min, threshold: th });
        }
    }
    let div_defect = grid.max_abs_divergence(&u);
    let next = State {
        rho: slab.end().to_vec(),
        u,
        psi,
        step: state.step + 1,
        time: state.time + dt,
    };
    Ok((next, StepReport { iterations, history, psi_min, div_defect, fields, slab }))
}

/// Runs `n_steps` steps, handing every accepted state to `observer`.
pub fn run(
    problem: &Problem,
    initial: State,
    mut observer: impl FnMut(&State, Option<&StepReport>) -> Result<()>,
) -> Result<State> {
    observer(&initial, None)?;
    let mut state = initial;
    for n in 1..=problem.params.n_steps {
        let (next, report) = coupled_step(problem, &state).map_err(|e| e.at_step(n))?;
        observer(&next, Some(&report)).map_err(|e| e.at_step(n))?;
        state = next;
    }
    Ok(state)
}
