//! The invariant suite behind `polyflow check`.

use polyflow_core::grids::config::SpringBasis;
use polyflow_core::laws::{entropy_f, lemma_basic_check, EntropyToolkit, Quadratic, SpringLaw};
use polyflow_core::quadrature::integrate_adaptive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{DensityProfile, ForceProfile, PsiProfile, RunConfig, VelocityProfile};
use crate::scenario::{simulate, BuildError, Scenario};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckResult {
    /// Passes when `value ≤ tolerance`.
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance, passed: value <= tolerance }
    }
}

impl std::fmt::Display for CheckResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {} value={:e} tolerance={:e}", self.name, self.value, self.tolerance)
    }
}

fn law_name(law: &SpringLaw) -> String {
    if law.is_bounded() {
        format!("{:?}(b={})", law.family(), law.b()).to_lowercase()
    } else {
        format!("{:?}", law.family()).to_lowercase()
    }
}

/// Random cubic `φ` with its gradient.
fn random_cubic(rng: &mut ChaCha8Rng) -> impl Fn([f64; 2]) -> (f64, [f64; 2]) {
    let mut c = Vec::new();
    for i in 0..=3usize {
        for j in 0..=3 - i {
            c.push((i as i32, j as i32, rng.random_range(-1.0..1.0)));
        }
    }
    move |q: [f64; 2]| {
        let mut v = 0.0;
        let mut g = [0.0; 2];
        for &(i, j, a) in &c {
            v += a * q[0].powi(i) * q[1].powi(j);
            if i > 0 {
                g[0] += a * i as f64 * q[0].powi(i - 1) * q[1].powi(j);
            }
            if j > 0 {
                g[1] += a * j as f64 * q[0].powi(i) * q[1].powi(j - 1);
            }
        }
        (v, g)
    }
}

/// Maxwellian normalization against adaptive integration, the moment
/// identity and randomized integration by parts.
pub fn quadrature_checks(law: SpringLaw, nr: usize, ntheta: usize, seed: u64) -> Vec<CheckResult> {
    let name = law_name(&law);
    let basis = match SpringBasis::new(law, nr, ntheta) {
        Ok(b) => b,
        Err(e) => {
            log::error!("{name}: {e}");
            return vec![CheckResult::at_most(format!("quadrature.build[{name}]"), f64::INFINITY, 0.0)];
        }
    };
    let mut out = Vec::new();
    let upper = if law.is_bounded() { law.s_max() } else { 80.0 };
    let gibbs = |s: f64| law.potential(s).map(|u| (-u).exp()).unwrap_or(0.0);
    let z = integrate_adaptive(&gibbs, 0.0, upper, 1e-14).map(|v| 2.0 * std::f64::consts::PI * v);
    let norm = match z {
        Ok(z) => (basis.integrate(|_| 1.0) * basis.z / z - 1.0).abs(),
        Err(_) => f64::INFINITY,
    };
    out.push(CheckResult::at_most(format!("quadrature.normalization[{name}]"), norm, 1e-8));
    let m = basis.maxwellian_moment_tensor();
    let dev = [m[0] - 1.0, m[1], m[2], m[3] - 1.0].iter().fold(0.0f64, |a, v| a.max(v.abs()));
    out.push(CheckResult::at_most(format!("quadrature.moment_identity[{name}]"), dev, 1e-6));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let a = rng.random_range(-1.0..1.0);
        let b = [[a, rng.random_range(-1.0..1.0)], [rng.random_range(-1.0..1.0), -a]];
        let phi = random_cubic(&mut rng);
        worst = worst.max(basis.integration_by_parts_residual(b, phi).unwrap_or(f64::INFINITY));
    }
    out.push(CheckResult::at_most(format!("quadrature.integration_by_parts[{name}]"), worst, 1e-8));
    out
}

/// Randomized and dense-grid checks of the entropy functions.
pub fn entropy_checks(seed: u64) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tk = EntropyToolkit::new(2.0, 0.1).expect("valid parameters");
    let mut out = Vec::new();
    for (label, pair) in [("quadratic", &Quadratic as &dyn polyflow_core::laws::EntropyPair), ("cutoff", &tk)] {
        let mut worst: f64 = 0.0;
        let mut ineq = true;
        for _ in 0..1000 {
            let (a, b) = (rng.random_range(0.0..5.0), rng.random_range(0.0..5.0));
            let (ca, cb) = (rng.random_range(0.0..3.0), rng.random_range(0.0..3.0));
            match lemma_basic_check(pair, a, b, ca, cb) {
                Ok(r) => {
                    worst = worst.max(r.residual);
                    ineq &= r.inequality_holds != Some(false);
                }
                Err(_) => worst = f64::INFINITY,
            }
        }
        out.push(CheckResult::at_most(format!("entropy.lemma_identity[{label}]"), worst, 1e-10));
        out.push(CheckResult::at_most(format!("entropy.lemma_inequality[{label}]"), if ineq { 0.0 } else { 1.0 }, 0.0));
    }
    let mut excess: f64 = f64::NEG_INFINITY;
    for _ in 0..500 {
        let kappa: f64 = rng.random_range(1e-12..=1.0);
        let s = rng.random_range(-10.0..10.0);
        excess = excess.max(tk.f_ld(kappa * s) - tk.f_ld(s) - 1.0);
    }
    out.push(CheckResult::at_most("entropy.scaling_bound", excess.max(0.0), 1e-14));
    let c = tk.lower_bound_constant();
    let (mut dominance, mut beta, mut below) = (f64::NEG_INFINITY, 0.0f64, f64::NEG_INFINITY);
    for k in 1..=20_000 {
        let s = k as f64 * 1e-3;
        let fl = tk.f_l(s).unwrap_or(f64::NAN);
        dominance = dominance.max(entropy_f(s).unwrap_or(f64::NAN) - fl);
        beta = beta.max((tk.beta(s) - 1.0 / tk.f_l_second(s).unwrap_or(f64::NAN)).abs() / s.max(1.0));
        below = below.max(s * s / (4.0 * tk.l()) - c - tk.f_ld(s));
        let neg = -s;
        below = below.max(neg * neg / (2.0 * tk.delta()) - tk.f_ld(neg));
    }
    out.push(CheckResult::at_most("entropy.cutoff_dominates", dominance.max(0.0), 1e-14));
    out.push(CheckResult::at_most("entropy.beta_inverse_curvature", beta, 1e-14));
    out.push(CheckResult::at_most("entropy.quadratic_lower_bound", below.max(0.0), 1e-12));
    out
}

/// The equilibrium version of `config`: same grids and parameters, data at
/// rest and unforced.
pub fn equilibrium_of(config: &RunConfig) -> RunConfig {
    let mut c = config.clone();
    c.polymer.psi0 = PsiProfile::Equilibrium;
    c.polymer.velocity_gradient = None;
    c.fluid.u0 = VelocityProfile::Zero;
    c.fluid.force = ForceProfile::None;
    c.fluid.rho0 = DensityProfile::Uniform;
    if c.scheme.n_steps > 100 {
        c.scheme.t_final = config.scheme.t_final / config.scheme.n_steps as f64 * 100.0;
        c.scheme.n_steps = 100;
    }
    c
}

/// Runs `config` and judges the per-step invariants.
pub fn run_checks(config: &RunConfig, label: &str) -> Result<Vec<CheckResult>, BuildError> {
    let scenario = Scenario::build(config)?;
    let grid = scenario.problem.grid.clone();
    let cfg = scenario.problem.config.clone();
    let (rho_lo, rho_hi) = scenario.problem.params.curves.rho_bounds();
    let mut max_u: f64 = 0.0;
    let mut max_dpsi: f64 = 0.0;
    let outcome = simulate(&scenario, |s, _| {
        max_u = max_u.max(s.u.iter().fold(0.0, |a: f64, v| a.max(v.abs())));
        for c in 0..grid.ncells() {
            for v in s.psi.nodal(&cfg, c) {
                max_dpsi = max_dpsi.max((v - 1.0).abs());
            }
        }
        Ok(())
    });
    let mut out = Vec::new();
    let outcome = match outcome {
        Ok(o) => o,
        Err(e) => {
            log::error!("{label}: {e}");
            out.push(CheckResult::at_most(format!("{label}.run"), f64::INFINITY, 0.0));
            return Ok(out);
        }
    };
    let r = &outcome.records;
    let m0 = r[0].mass;
    let mass = r.iter().map(|x| (x.mass / m0 - 1.0).abs()).fold(0.0, f64::max);
    out.push(CheckResult::at_most(format!("{label}.mass"), mass, 1e-10));
    let lam = r.iter().map(|x| x.lambda_max - outcome.initial.omega).fold(f64::NEG_INFINITY, f64::max);
    out.push(CheckResult::at_most(format!("{label}.lambda_bound"), lam.max(0.0), 1e-6));
    let rho = r.iter().map(|x| (rho_lo - x.rho_min).max(x.rho_max - rho_hi)).fold(f64::NEG_INFINITY, f64::max);
    out.push(CheckResult::at_most(format!("{label}.density_bounds"), rho.max(0.0), 0.0));
    if r[0].energy_rhs.is_finite() {
        let b2 = r[0].energy_rhs;
        let (defect, _) = polyflow_core::diagnostics::check_energy_inequality(r);
        out.push(CheckResult::at_most(format!("{label}.energy"), defect.max(0.0), 1e-8 * (1.0 + b2)));
    }
    if config == &equilibrium_of(config) {
        out.push(CheckResult::at_most(format!("{label}.rest_velocity"), max_u, 1e-11));
        out.push(CheckResult::at_most(format!("{label}.rest_density"), max_dpsi, 1e-9));
    }
    Ok(out)
}

/// The full suite for one configuration.
pub fn full_suite(config: &RunConfig, seed: u64) -> Result<Vec<CheckResult>, BuildError> {
    let mut out = Vec::new();
    let mut seen = Vec::new();
    for (i, law) in config.laws()?.into_iter().enumerate() {
        if !seen.contains(&law) {
            out.extend(quadrature_checks(law, config.polymer.nr, config.polymer.ntheta, seed.wrapping_add(i as u64)));
            seen.push(law);
        }
    }
    out.extend(entropy_checks(seed));
    let eq = equilibrium_of(config);
    out.extend(run_checks(&eq, "equilibrium")?);
    if &eq != config {
        out.extend(run_checks(config, &config.preset)?);
    }
    Ok(out)
}
