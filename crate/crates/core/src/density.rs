//! Continuity equation on one time slab: monotone upwind finite volumes
//! with CFL-limited explicit substeps, frozen velocity.

use crate::error::{Error, Result};
use crate::grids::phys::{InteriorFace, PhysGrid};
use crate::laws::ResponseCurves;

/// Density history over `[t_{n-1}, t_n]`.
#[derive(Debug, Clone)]
pub struct DensitySlab {
    pub dt: f64,
    /// `levels[0] = ρ^{n-1}`, `levels[substeps] = ρ^n`.
    pub levels: Vec<Vec<f64>>,
    /// Face velocity used for transport (`u^{n-1}`).
    pub velocity: Vec<f64>,
    /// Trapezoidal slab average of `ρ`.
    pub average: Vec<f64>,
}

impl DensitySlab {
    /// A slab in which nothing moves (used at the initial level).
    pub fn frozen(rho: Vec<f64>, nfaces: usize, dt: f64) -> Self {
        Self { dt, levels: vec![rho.clone(), rho.clone()], velocity: vec![0.0; nfaces], average: rho }
    }

    pub fn substeps(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn start(&self) -> &[f64] {
        &self.levels[0]
    }

    pub fn end(&self) -> &[f64] {
        self.levels.last().expect("slab has levels")
    }
}

/// Number of substeps keeping the upwind CFL number at most 1/2.
pub fn substep_count(grid: &PhysGrid, vel: &[f64], dt: f64) -> usize {
    let umax = grid.max_abs_velocity(vel);
    ((2.0 * dt * umax / grid.h_min()).ceil() as usize).max(1)
}

fn upwind_update(faces: &[InteriorFace], vel: &[f64], rho: &[f64], tau_over_v: f64) -> Vec<f64> {
    let mut next = rho.to_vec();
    let mut lo = rho.to_vec();
    let mut hi = rho.to_vec();
    for f in faces {
        let flux = vel[f.face] * f.area;
        let up = if flux >= 0.0 { rho[f.lower] } else { rho[f.upper] };
        let t = tau_over_v * flux * up;
        next[f.lower] -= t;
        next[f.upper] += t;
        for (c, nb) in [(f.lower, f.upper), (f.upper, f.lower)] {
            lo[c] = lo[c].min(rho[nb]);
            hi[c] = hi[c].max(rho[nb]);
        }
    }
    // the update is a convex combination of the stencil; clamp away roundoff
    for c in 0..next.len() {
        next[c] = next[c].clamp(lo[c], hi[c]);
    }
    next
}

/// Transports `ρ_prev` by `u_prev` over one slab of length `dt`.
/// `substeps = None` picks the CFL-limited count.
pub fn advance_density(
    grid: &PhysGrid,
    rho_prev: &[f64],
    u_prev: &[f64],
    dt: f64,
    substeps: Option<usize>,
) -> Result<DensitySlab> {
    if rho_prev.len() != grid.ncells() || u_prev.len() != grid.nfaces() {
        return Err(Error::Argument("density or velocity does not match the grid".into()));
    }
    if rho_prev.iter().chain(u_prev).any(|v| !v.is_finite()) {
        return Err(Error::Argument("non-finite value in density transport input".into()));
    }
    if !(dt > 0.0) {
        return Err(Error::Argument(format!("time step must be positive, got {dt}")));
    }
    let needed = substep_count(grid, u_prev, dt);
    let m = substeps.map_or(needed, |s| s.max(needed));
    let tau = dt / m as f64;
    let faces = grid.interior_faces();
    let tov = tau / grid.cell_volume();
    let mut levels = Vec::with_capacity(m + 1);
    levels.push(rho_prev.to_vec());
    for k in 0..m {
        let next = upwind_update(&faces, u_prev, &levels[k], tov);
        levels.push(next);
    }
    let average = trapezoid(&levels, |r| r);
    Ok(DensitySlab { dt, levels, velocity: u_prev.to_vec(), average })
}

fn trapezoid(levels: &[Vec<f64>], g: impl Fn(f64) -> f64) -> Vec<f64> {
    let m = (levels.len() - 1) as f64;
    let n = levels[0].len();
    (0..n)
        .map(|c| {
            let mut s = 0.5 * (g(levels[0][c]) + g(levels[levels.len() - 1][c]));
            for l in &levels[1..levels.len() - 1] {
                s += g(l[c]);
            }
            s / m
        })
        .collect()
}

/// Coefficient fields derived from a slab.
#[derive(Debug, Clone)]
pub struct ResponseFields {
    pub mu_new: Vec<f64>,
    pub zeta_new: Vec<f64>,
    pub zeta_prev: Vec<f64>,
    /// Trapezoidal time average of `ζ(ρ)`.
    pub zeta_avg: Vec<f64>,
    /// Time-averaged upwind `ζ`-flux through every interior face, in the
    /// order of [`PhysGrid::interior_faces`], oriented lower to upper.
    pub zeta_flux: Vec<f64>,
}

pub fn eval_response_averages(grid: &PhysGrid, slab: &DensitySlab, curves: &ResponseCurves) -> Result<ResponseFields> {
    let eval = |v: &[f64], f: &dyn Fn(f64) -> Result<f64>| v.iter().map(|r| f(*r)).collect::<Result<Vec<f64>>>();
    let zeta = |r: f64| curves.zeta(r);
    let zeta_levels: Vec<Vec<f64>> = slab.levels.iter().map(|l| eval(l, &zeta)).collect::<Result<_>>()?;
    let mu_new = eval(slab.end(), &|r| curves.mu(r))?;
    let zeta_avg = trapezoid(&zeta_levels, |z| z);
    let m = slab.substeps() as f64;
    let zeta_flux = grid
        .interior_faces()
        .iter()
        .map(|f| {
            let flux = slab.velocity[f.face] * f.area;
            let up = if flux >= 0.0 { f.lower } else { f.upper };
            zeta_levels[..slab.substeps()].iter().map(|z| z[up]).sum::<f64>() * flux / m
        })
        .collect();
    Ok(ResponseFields {
        mu_new,
        zeta_new: zeta_levels.last().cloned().unwrap_or_default(),
        zeta_prev: zeta_levels[0].clone(),
        zeta_avg,
        zeta_flux,
    })
}

/// `∫ ρ^p` for the L^p monotonicity diagnostics.
pub fn lp_norm_pow(grid: &PhysGrid, rho: &[f64], p: f64) -> f64 {
    rho.iter().map(|r| r.abs().powf(p)).sum::<f64>() * grid.cell_volume()
}
