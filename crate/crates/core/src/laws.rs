//! Spring potentials, Maxwellians, the Rouse matrix, density-response curves
//! and the entropy / cut-off function family.
//!
//! All spring quantities are written in the variable `s = |q|^2 / 2`, so the
//! potential is `U(s)`, the force is `U'(s) q`, and the Maxwellian of one
//! spring is `M(q) = exp(-U(s)) / Z`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::quadrature::{gauss_jacobi, gauss_laguerre, integrate_adaptive, stieltjes, Rule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpringFamily {
    Fene,
    Cpail,
    Hookean,
    InverseLangevin,
}

/// Exponent of the Maxwellian's boundary decay `M ~ dist(q, ∂D)^γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Growth {
    Finite(f64),
    /// Hookean springs live on all of R^d.
    Unbounded,
    /// Inverse Langevin: no exponent is asserted.
    Unspecified,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpringLaw {
    family: SpringFamily,
    b: f64,
    d: usize,
}

impl SpringLaw {
    pub fn new(family: SpringFamily, b: f64, d: usize) -> Result<Self> {
        if d != 2 && d != 3 {
            return Err(Error::Parameter(format!("spatial dimension must be 2 or 3, got {d}")));
        }
        let law = Self { family, b, d };
        match family {
            SpringFamily::Hookean => {}
            SpringFamily::InverseLangevin => {
                if !(b > 0.0) || !b.is_finite() {
                    return Err(Error::Parameter(format!("b must be positive, got {b}")));
                }
            }
            _ => {
                law.growth_exponent()?;
            }
        }
        Ok(law)
    }

    pub fn fene(b: f64) -> Result<Self> {
        Self::new(SpringFamily::Fene, b, 2)
    }

    pub fn cpail(b: f64) -> Result<Self> {
        Self::new(SpringFamily::Cpail, b, 2)
    }

    pub fn hookean() -> Self {
        Self { family: SpringFamily::Hookean, b: f64::INFINITY, d: 2 }
    }

    pub fn inverse_langevin(b: f64) -> Result<Self> {
        Self::new(SpringFamily::InverseLangevin, b, 2)
    }

    pub fn family(&self) -> SpringFamily {
        self.family
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn is_bounded(&self) -> bool {
        self.family != SpringFamily::Hookean
    }

    /// Supremum of admissible `s` (`b/2`, or infinity for Hookean springs).
    pub fn s_max(&self) -> f64 {
        if self.is_bounded() {
            0.5 * self.b
        } else {
            f64::INFINITY
        }
    }

    pub fn growth_exponent(&self) -> Result<Growth> {
        let (gamma, what) = match self.family {
            SpringFamily::Hookean => return Ok(Growth::Unbounded),
            SpringFamily::InverseLangevin => return Ok(Growth::Unspecified),
            SpringFamily::Fene => (0.5 * self.b, "FENE"),
            SpringFamily::Cpail => (self.b / 3.0, "CPAIL"),
        };
        if !(gamma > 1.0) || !gamma.is_finite() {
            return Err(Error::Parameter(format!(
                "{what} with b = {}: growth exponent γ = {gamma} ≤ 1 inadmissible",
                self.b
            )));
        }
        Ok(Growth::Finite(gamma))
    }

    fn check_domain(&self, s: f64) -> Result<()> {
        if !(s >= 0.0) {
            return Err(Error::Domain(format!("s = {s} must be nonnegative")));
        }
        if self.is_bounded() && s >= 0.5 * self.b {
            return Err(Error::Domain(format!("s = {s} outside [0, b/2) with b/2 = {}", 0.5 * self.b)));
        }
        Ok(())
    }

    /// `U(s)`.
    pub fn potential(&self, s: f64) -> Result<f64> {
        self.check_domain(s)?;
        Ok(self.potential_unchecked(s))
    }

    /// `U'(s)`, the scalar factor of the spring force.
    pub fn potential_derivative(&self, s: f64) -> Result<f64> {
        self.check_domain(s)?;
        Ok(self.potential_derivative_unchecked(s))
    }

    pub(crate) fn potential_unchecked(&self, s: f64) -> f64 {
        let b = self.b;
        match self.family {
            SpringFamily::Hookean => s,
            SpringFamily::Fene => -0.5 * b * (-2.0 * s / b).ln_1p(),
            SpringFamily::Cpail => s / 3.0 - b / 3.0 * (-2.0 * s / b).ln_1p(),
            SpringFamily::InverseLangevin => {
                let x = (2.0 * s / b).sqrt();
                if x == 0.0 {
                    return 0.0;
                }
                let t = inverse_langevin(x);
                b / 3.0 * (t * x - ln_sinhc(t))
            }
        }
    }

    pub(crate) fn potential_derivative_unchecked(&self, s: f64) -> f64 {
        let b = self.b;
        match self.family {
            SpringFamily::Hookean => 1.0,
            SpringFamily::Fene => 1.0 / (1.0 - 2.0 * s / b),
            SpringFamily::Cpail => 1.0 / 3.0 + (2.0 / 3.0) / (1.0 - 2.0 * s / b),
            SpringFamily::InverseLangevin => {
                let x = (2.0 * s / b).sqrt();
                if x < 1e-8 {
                    return 1.0;
                }
                inverse_langevin(x) / (3.0 * x)
            }
        }
    }

    /// Spring force `U'(|q|^2/2) q`.
    pub fn force(&self, q: &[f64]) -> Result<Vec<f64>> {
        let s = 0.5 * q.iter().map(|v| v * v).sum::<f64>();
        if self.is_bounded() && 2.0 * s >= self.b {
            return Err(Error::Domain(format!("|q|^2 = {} ≥ b = {}", 2.0 * s, self.b)));
        }
        let f = self.potential_derivative(s)?;
        Ok(q.iter().map(|v| f * v).collect())
    }

    /// Jacobi exponent used as the base weight `(1 - 2s/b)^α` when building
    /// radial rules; the remaining factor of `exp(-U)` is smooth.
    fn base_exponent(&self) -> f64 {
        match self.family {
            SpringFamily::Fene => 0.5 * self.b,
            SpringFamily::Cpail | SpringFamily::InverseLangevin => self.b / 3.0,
            SpringFamily::Hookean => 0.0,
        }
    }

    /// Gauss rule in `s` for `∫_0^{s_max} g(s) w(s) ds`, where
    /// `w = exp(-U)` (or `exp(-U) U'` when `with_force` is set).
    pub fn radial_rule(&self, n: usize, with_force: bool) -> Result<Rule> {
        if n == 0 {
            return Err(Error::Argument("radial rule needs at least one node".into()));
        }
        match self.family {
            // exp(-s) and exp(-s) * 1
            SpringFamily::Hookean => gauss_laguerre(n, 0.0),
            // (1 - 2s/b)^{b/2}, and times (1 - 2s/b)^{-1}
            SpringFamily::Fene => {
                let alpha = if with_force { 0.5 * self.b - 1.0 } else { 0.5 * self.b };
                let r = gauss_jacobi(n, alpha, 0.0)?;
                let quarter = 0.25 * self.b;
                Ok(r.mapped(quarter, quarter, 0.5f64.powf(alpha)))
            }
            SpringFamily::Cpail | SpringFamily::InverseLangevin => {
                let alpha = self.base_exponent() - if with_force { 1.0 } else { 0.0 };
                let nb = 6 * n + 80;
                let base = gauss_jacobi(nb, alpha, 0.0)?;
                let quarter = 0.25 * self.b;
                let mut base = base.mapped(quarter, quarter, 0.5f64.powf(alpha));
                for (s, w) in base.nodes.iter().zip(base.weights.iter_mut()) {
                    let g = 1.0 - 2.0 * s / self.b;
                    let mut h = (-self.potential_unchecked(*s)).exp() / g.powf(self.base_exponent());
                    if with_force {
                        h *= self.potential_derivative_unchecked(*s) * g;
                    }
                    *w *= h;
                }
                stieltjes(&base, n)?.gauss(n)
            }
        }
    }

    /// `Z = ∫ exp(-U(|q|^2/2)) dq` over one spring's ball.
    pub fn partition_constant(&self, rule: &Rule) -> Result<f64> {
        partition_from_rule(self.d, rule)
    }
}

fn sphere_area(d: usize) -> f64 {
    if d == 2 {
        2.0 * PI
    } else {
        4.0 * PI
    }
}

/// `dq = |S^{d-1}| (2s)^{(d-2)/2} ds dΩ / |S^{d-1}|`, so a radial rule in `s`
/// integrates over the ball after multiplication by the sphere factor.
fn partition_from_rule(d: usize, rule: &Rule) -> Result<f64> {
    let z: f64 = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .map(|(s, w)| w * (2.0 * s).powf(0.5 * (d as f64 - 2.0)))
        .sum::<f64>()
        * sphere_area(d);
    if !z.is_finite() || z <= 0.0 {
        return Err(Error::Numerical(format!("partition constant evaluated to {z}")));
    }
    Ok(z)
}

/// Langevin function `coth t - 1/t`.
pub fn langevin(t: f64) -> f64 {
    if t.abs() < 0.1 {
        let t2 = t * t;
        t * (1.0 / 3.0 + t2 * (-1.0 / 45.0 + t2 * (2.0 / 945.0 + t2 * (-1.0 / 4725.0 + t2 * 2.0 / 93555.0))))
    } else {
        1.0 / t.tanh() - 1.0 / t
    }
}

fn langevin_derivative(t: f64) -> f64 {
    if t.abs() < 0.1 {
        let t2 = t * t;
        1.0 / 3.0 + t2 * (-1.0 / 15.0 + t2 * (2.0 / 189.0 + t2 * (-1.0 / 675.0 + t2 * 2.0 / 10395.0)))
    } else {
        let sh = t.sinh();
        1.0 / (t * t) - 1.0 / (sh * sh)
    }
}

/// Inverse of the Langevin function on `[0, 1)` by safeguarded Newton.
pub fn inverse_langevin(x: f64) -> f64 {
    debug_assert!((0.0..1.0).contains(&x));
    if x == 0.0 {
        return 0.0;
    }
    // Cohen's approximant is already within a few percent
    let mut t = x * (3.0 - x * x) / (1.0 - x * x);
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    for _ in 0..100 {
        let r = langevin(t) - x;
        if r > 0.0 {
            hi = hi.min(t);
        } else {
            lo = lo.max(t);
        }
        let mut next = t - r / langevin_derivative(t);
        if !(next > lo && next < hi) {
            next = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * t };
        }
        if (next - t).abs() <= 1e-15 * t.max(1.0) {
            return next;
        }
        t = next;
    }
    t
}

/// `ln(sinh t / t)`, stable for small and large `t`.
fn ln_sinhc(t: f64) -> f64 {
    if t < 1e-4 {
        t * t / 6.0
    } else if t > 20.0 {
        t - std::f64::consts::LN_2 - t.ln() + (-2.0 * t).exp().ln_1p()
    } else {
        (t.sinh() / t).ln()
    }
}

/// Growth-sandwich ratios `M(q) / dist(q, ∂D)^γ` at radii approaching the
/// boundary; finite positive values over all samples confirm the two-sided
/// bound at those points.
pub fn growth_sandwich_ratios(law: &SpringLaw, z: f64, samples: usize) -> Result<Vec<f64>> {
    let gamma = match law.growth_exponent()? {
        Growth::Finite(g) => g,
        _ => return Err(Error::Argument("growth sandwich needs a bounded law with an exponent".into())),
    };
    let rmax = law.b.sqrt();
    (1..=samples)
        .map(|k| {
            let dist = rmax * 0.5f64.powi(k as i32);
            let r = rmax - dist;
            let m = (-law.potential(0.5 * r * r)?).exp() / z;
            Ok(m / dist.powf(gamma))
        })
        .collect()
}

/// Symmetric positive definite chain matrix with its smallest eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct RouseMatrix {
    a: DMatrix<f64>,
    a0: f64,
}

impl RouseMatrix {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        if a.nrows() == 0 || a.nrows() != a.ncols() {
            return Err(Error::Argument("Rouse matrix must be square and nonempty".into()));
        }
        let asym = (&a - a.transpose()).abs().max();
        if asym > 1e-14 * a.abs().max().max(1.0) {
            return Err(Error::Parameter("Rouse matrix must be symmetric".into()));
        }
        let a0 = SymmetricEigen::new(a.clone()).eigenvalues.min();
        if !(a0 > 0.0) {
            return Err(Error::Parameter(format!("Rouse matrix not positive definite (a0 = {a0})")));
        }
        Ok(Self { a, a0 })
    }

    /// `tridiag[-1, 2, -1]` of size `k`.
    pub fn linear_chain(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Argument("chain needs at least one spring".into()));
        }
        let a = DMatrix::from_fn(k, k, |i, j| {
            if i == j {
                2.0
            } else if i.abs_diff(j) == 1 {
                -1.0
            } else {
                0.0
            }
        });
        Self::new(a)
    }

    pub fn springs(&self) -> usize {
        self.a.nrows()
    }

    pub fn a0(&self) -> f64 {
        self.a0
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.a[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }
}

/// Piecewise-linear table over `[x_min, x_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    points: Vec<(f64, f64)>,
}

impl Table {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Parameter("table needs at least one point".into()));
        }
        if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::Parameter("table entries must be finite".into()));
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::Parameter("table abscissae must be strictly increasing".into()));
        }
        Ok(Self { points })
    }

    pub fn constant(x_min: f64, x_max: f64, value: f64) -> Result<Self> {
        if x_max > x_min {
            Self::new(vec![(x_min, value), (x_max, value)])
        } else {
            Self::new(vec![(x_min, value)])
        }
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.points[0].0, self.points[self.points.len() - 1].0)
    }

    pub fn range(&self) -> (f64, f64) {
        let lo = self.points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let hi = self.points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        let (lo, hi) = self.domain();
        if !(x >= lo && x <= hi) {
            return Err(Error::Range(format!("{x} outside table domain [{lo}, {hi}]")));
        }
        let p = &self.points;
        if p.len() == 1 {
            return Ok(p[0].1);
        }
        let k = p.partition_point(|q| q.0 <= x).clamp(1, p.len() - 1);
        let (x0, y0) = p[k - 1];
        let (x1, y1) = p[k];
        let t = (x - x0) / (x1 - x0);
        Ok(y0 + t * (y1 - y0))
    }

    pub fn is_affine(&self) -> bool {
        if self.points.len() <= 2 {
            return true;
        }
        let (x0, y0) = self.points[0];
        let (x1, y1) = self.points[self.points.len() - 1];
        let slope = (y1 - y0) / (x1 - x0);
        self.points
            .iter()
            .all(|(x, y)| (y0 + slope * (x - x0) - y).abs() <= 1e-14 * (1.0 + y.abs()))
    }
}

/// Viscosity `μ(ρ)` and drag `ζ(ρ)` over the admissible density interval.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseCurves {
    pub mu: Table,
    pub zeta: Table,
    rho_min: f64,
    rho_max: f64,
}

impl ResponseCurves {
    pub fn new(rho_min: f64, rho_max: f64, mu: Table, zeta: Table) -> Result<Self> {
        if !(rho_min > 0.0) || !(rho_max >= rho_min) {
            return Err(Error::Parameter(format!("need 0 < rho_min ≤ rho_max, got [{rho_min}, {rho_max}]")));
        }
        for (name, t) in [("mu", &mu), ("zeta", &zeta)] {
            let (lo, hi) = t.domain();
            if lo != rho_min || hi != rho_max {
                return Err(Error::Parameter(format!(
                    "{name} table must span [{rho_min}, {rho_max}], spans [{lo}, {hi}]"
                )));
            }
            if !(t.range().0 > 0.0) {
                return Err(Error::Parameter(format!("{name} must be positive")));
            }
        }
        Ok(Self { mu, zeta, rho_min, rho_max })
    }

    pub fn constant(rho_min: f64, rho_max: f64, mu: f64, zeta: f64) -> Result<Self> {
        Self::new(
            rho_min,
            rho_max,
            Table::constant(rho_min, rho_max, mu)?,
            Table::constant(rho_min, rho_max, zeta)?,
        )
    }

    pub fn rho_bounds(&self) -> (f64, f64) {
        (self.rho_min, self.rho_max)
    }

    pub fn mu(&self, rho: f64) -> Result<f64> {
        self.mu.eval(rho)
    }

    pub fn zeta(&self, rho: f64) -> Result<f64> {
        self.zeta.eval(rho)
    }

    pub fn mu_bounds(&self) -> (f64, f64) {
        self.mu.range()
    }

    pub fn zeta_bounds(&self) -> (f64, f64) {
        self.zeta.range()
    }
}

/// `F(s) = s(ln s - 1) + 1`, with `F(0) = 1`.
pub fn entropy_f(s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::Domain(format!("entropy needs s ≥ 0, got {s}")));
    }
    Ok(entropy_f_unchecked(s))
}

pub(crate) fn entropy_f_unchecked(s: f64) -> f64 {
    if s == 0.0 {
        1.0
    } else {
        s * (s.ln() - 1.0) + 1.0
    }
}

pub fn beta_l(l: f64, s: f64) -> f64 {
    s.min(l)
}

pub fn beta_l_delta(l: f64, delta: f64, s: f64) -> f64 {
    s.min(l).max(delta)
}

/// The convex cut-off regularizations of `F` for fixed `L` and `δ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyToolkit {
    l: f64,
    delta: f64,
}

impl EntropyToolkit {
    pub fn new(l: f64, delta: f64) -> Result<Self> {
        if !(l > 1.0) || !l.is_finite() {
            return Err(Error::Parameter(format!("cut-off L must exceed 1, got {l}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Parameter(format!("δ must lie in (0, 1), got {delta}")));
        }
        Ok(Self { l, delta })
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn beta(&self, s: f64) -> f64 {
        beta_l(self.l, s)
    }

    pub fn beta_delta(&self, s: f64) -> f64 {
        beta_l_delta(self.l, self.delta, s)
    }

    /// `F^L(s)`, defined for `s ≥ 0`.
    pub fn f_l(&self, s: f64) -> Result<f64> {
        if !(s >= 0.0) {
            return Err(Error::Domain(format!("F^L needs s ≥ 0, got {s}")));
        }
        let l = self.l;
        Ok(if s <= l { entropy_f_unchecked(s) } else { (s * s - l * l) / (2.0 * l) + s * (l.ln() - 1.0) + 1.0 })
    }

    pub fn f_l_prime(&self, s: f64) -> Result<f64> {
        if !(s > 0.0) {
            return Err(Error::Domain(format!("[F^L]' needs s > 0, got {s}")));
        }
        Ok(if s <= self.l { s.ln() } else { s / self.l + self.l.ln() - 1.0 })
    }

    /// `[F^L]''(s)`; infinite at `s = 0`.
    pub fn f_l_second(&self, s: f64) -> Result<f64> {
        if !(s >= 0.0) {
            return Err(Error::Domain(format!("[F^L]'' needs s ≥ 0, got {s}")));
        }
        Ok(1.0 / s.min(self.l))
    }

    pub fn f_ld(&self, s: f64) -> f64 {
        let (l, d) = (self.l, self.delta);
        if s <= d {
            (s * s - d * d) / (2.0 * d) + s * (d.ln() - 1.0) + 1.0
        } else if s <= l {
            s * (s.ln() - 1.0) + 1.0
        } else {
            (s * s - l * l) / (2.0 * l) + s * (l.ln() - 1.0) + 1.0
        }
    }

    pub fn f_ld_prime(&self, s: f64) -> f64 {
        let (l, d) = (self.l, self.delta);
        if s <= d {
            s / d + d.ln() - 1.0
        } else if s <= l {
            s.ln()
        } else {
            s / l + l.ln() - 1.0
        }
    }

    pub fn f_ld_second(&self, s: f64) -> f64 {
        1.0 / self.beta_delta(s)
    }

    pub fn g_ld(&self, s: f64) -> f64 {
        let (l, d) = (self.l, self.delta);
        if s <= d {
            (s * s + d * d) / (2.0 * d) - 1.0
        } else if s <= l {
            s - 1.0
        } else {
            (s * s + l * l) / (2.0 * l) - 1.0
        }
    }

    pub fn g_ld_prime(&self, s: f64) -> f64 {
        s / self.beta_delta(s)
    }

    /// `C(L) = max_{s ≥ 0} (s^2/(4L) - F^L_δ(s))`, the constant of the
    /// quadratic lower bound `F^L_δ(s) ≥ s^2/(4L) - C(L)`.
    pub fn lower_bound_constant(&self) -> f64 {
        let h = |s: f64| s * s / (4.0 * self.l) - self.f_ld(s);
        // h is concave beyond L and tends to -inf, so a coarse scan brackets the maximum
        let upper = 8.0 * self.l * (1.0 + self.l.ln().abs()) + 10.0;
        let n = 4000;
        let mut best = 0;
        let mut best_val = f64::NEG_INFINITY;
        for k in 0..=n {
            let v = h(upper * k as f64 / n as f64);
            if v > best_val {
                best_val = v;
                best = k;
            }
        }
        let step = upper / n as f64;
        let (mut a, mut b) = ((best as f64 - 1.0).max(0.0) * step, (best as f64 + 1.0) * step);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..200 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if h(c) >= h(d) {
                b = d;
            } else {
                a = c;
            }
        }
        best_val.max(h(0.5 * (a + b))).max(h(0.0))
    }
}

/// A twice-differentiable function `F` together with a primitive `G` of
/// `s F''(s)` and the constant `c0 = s F' - F - G`.
pub trait EntropyPair {
    fn f(&self, s: f64) -> f64;
    fn fp(&self, s: f64) -> f64;
    fn fpp(&self, s: f64) -> f64;
    fn g(&self, s: f64) -> f64;
    fn c0(&self) -> f64;
    /// Points where `F''` may jump.
    fn kinks(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// `F(s) = s^2`, `G(s) = s^2`.
#[derive(Debug, Clone, Copy)]
pub struct Quadratic;

impl EntropyPair for Quadratic {
    fn f(&self, s: f64) -> f64 {
        s * s
    }
    fn fp(&self, s: f64) -> f64 {
        2.0 * s
    }
    fn fpp(&self, _s: f64) -> f64 {
        2.0
    }
    fn g(&self, s: f64) -> f64 {
        s * s
    }
    fn c0(&self) -> f64 {
        0.0
    }
}

impl EntropyPair for EntropyToolkit {
    fn f(&self, s: f64) -> f64 {
        self.f_ld(s)
    }
    fn fp(&self, s: f64) -> f64 {
        self.f_ld_prime(s)
    }
    fn fpp(&self, s: f64) -> f64 {
        self.f_ld_second(s)
    }
    fn g(&self, s: f64) -> f64 {
        self.g_ld(s)
    }
    fn c0(&self) -> f64 {
        0.0
    }
    fn kinks(&self) -> Vec<f64> {
        vec![self.delta, self.l]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaBasicResult {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    /// Part c) verdict, present when `B ≥ 0`.
    pub inequality_holds: Option<bool>,
}

/// Evaluates both sides of
/// `(Aa - Bb)F'(a) - (A-B)G(a) = A(F(a)+c0) - B(F(b)+c0) + B(b-a)^2 ∫_0^1 F''(θa+(1-θ)b) θ dθ`.
pub fn lemma_basic_check(
    pair: &dyn EntropyPair,
    a: f64,
    b: f64,
    cap_a: f64,
    cap_b: f64,
) -> Result<LemmaBasicResult> {
    let c0 = pair.c0();
    let lhs = (cap_a * a - cap_b * b) * pair.fp(a) - (cap_a - cap_b) * pair.g(a);
    let remainder = if a == b {
        0.0
    } else {
        // split the θ-range where θa + (1-θ)b crosses a kink of F''
        let mut cuts = vec![0.0, 1.0];
        for k in pair.kinks() {
            let th = (k - b) / (a - b);
            if th > 0.0 && th < 1.0 {
                cuts.push(th);
            }
        }
        cuts.sort_by(f64::total_cmp);
        let integrand = |th: f64| pair.fpp(th * a + (1.0 - th) * b) * th;
        let mut acc = 0.0;
        for w in cuts.windows(2) {
            acc += integrate_adaptive(&integrand, w[0], w[1], 1e-14)?;
        }
        acc
    };
    let base = cap_a * (pair.f(a) + c0) - cap_b * (pair.f(b) + c0);
    let rhs = base + cap_b * (b - a).powi(2) * remainder;
    let inequality_holds = (cap_b >= 0.0).then(|| {
        let d0 = (0..=256)
            .map(|k| {
                let th = k as f64 / 256.0;
                pair.fpp(th * a + (1.0 - th) * b)
            })
            .fold(f64::INFINITY, f64::min);
        let bound = base + 0.5 * d0 * cap_b * (b - a).powi(2);
        lhs >= bound - 1e-12 * (1.0 + lhs.abs())
    });
    Ok(LemmaBasicResult { lhs, rhs, residual: (lhs - rhs).abs(), inequality_holds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn potential_values() {
        assert_eq!(SpringLaw::hookean().potential(0.7).unwrap(), 0.7);
        let fene = SpringLaw::fene(4.0).unwrap();
        assert_eq!(fene.potential(0.0).unwrap(), 0.0);
        assert_relative_eq!(fene.potential(1.0).unwrap(), 2.0 * 2f64.ln(), epsilon = 1e-15);
        assert_eq!(SpringLaw::cpail(9.0).unwrap().potential(0.0).unwrap(), 0.0);
        let err = fene.potential(2.0).unwrap_err().to_string();
        assert!(err.contains("b/2"), "{err}");
    }

    #[test]
    fn force_values() {
        let f = SpringLaw::fene(4.0).unwrap().force(&[1.0, 0.0]).unwrap();
        assert_relative_eq!(f[0], 1.0 / (1.0 - 0.25), epsilon = 1e-15);
        let c = SpringLaw::cpail(9.0).unwrap().force(&[1.5, 0.0]).unwrap();
        assert_relative_eq!(c[0], (1.0 - 2.25 / 27.0) / (1.0 - 2.25 / 9.0) * 1.5, epsilon = 1e-14);
        assert_eq!(SpringLaw::hookean().force(&[-2.0, 5.0]).unwrap(), vec![-2.0, 5.0]);
        assert!(SpringLaw::fene(4.0).unwrap().force(&[2.0, 0.1]).is_err());
    }

    #[test]
    fn growth_exponents() {
        assert_eq!(SpringLaw::fene(4.0).unwrap().growth_exponent().unwrap(), Growth::Finite(2.0));
        assert_eq!(SpringLaw::cpail(9.0).unwrap().growth_exponent().unwrap(), Growth::Finite(3.0));
        let err = SpringLaw::fene(2.0).unwrap_err().to_string();
        assert!(err.contains("γ") && err.contains("≤ 1 inadmissible"), "{err}");
        assert!(SpringLaw::cpail(3.0).is_err());
        assert_eq!(SpringLaw::hookean().growth_exponent().unwrap(), Growth::Unbounded);
    }

    #[test]
    fn partition_constants() {
        let h = SpringLaw::hookean();
        let z = h.partition_constant(&h.radial_rule(12, false).unwrap()).unwrap();
        assert_relative_eq!(z, 2.0 * PI, epsilon = 1e-13);
        let f = SpringLaw::fene(4.0).unwrap();
        let z = f.partition_constant(&f.radial_rule(12, false).unwrap()).unwrap();
        // 2π ∫_0^{b/2} (1-2s/b)^{b/2} ds = 2π b/(b+2)
        assert_relative_eq!(z, 4.0 * PI / 3.0, epsilon = 1e-13);
        assert_relative_eq!(1.0 / z, 3.0 / (4.0 * PI), epsilon = 1e-13);
    }

    #[test]
    fn cpail_rule_matches_adaptive_integration() {
        let law = SpringLaw::cpail(9.0).unwrap();
        for with_force in [false, true] {
            let rule = law.radial_rule(12, with_force).unwrap();
            for k in 0..6 {
                let g = |s: f64| {
                    let w = (-law.potential_unchecked(s)).exp();
                    let w = if with_force { w * law.potential_derivative_unchecked(s) } else { w };
                    w * s.powi(k)
                };
                let exact = integrate_adaptive(&g, 0.0, 4.5, 1e-15).unwrap();
                assert_relative_eq!(rule.integrate(|s| s.powi(k)), exact, max_relative = 1e-11);
            }
        }
    }

    #[test]
    fn inverse_langevin_inverts() {
        for &x in &[1e-6, 0.01, 0.3, 0.7, 0.95, 0.999] {
            let t = inverse_langevin(x);
            assert_relative_eq!(langevin(t), x, max_relative = 1e-13);
        }
        let law = SpringLaw::inverse_langevin(10.0).unwrap();
        // U' by finite differences of U
        let s = 2.0;
        let h = 1e-5;
        let fd = (law.potential(s + h).unwrap() - law.potential(s - h).unwrap()) / (2.0 * h);
        assert_relative_eq!(fd, law.potential_derivative(s).unwrap(), max_relative = 1e-8);
        assert_relative_eq!(law.potential_derivative(1e-12).unwrap(), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn sandwich_ratios_are_finite_and_positive() {
        let law = SpringLaw::fene(4.0).unwrap();
        let z = 4.0 * PI / 3.0;
        let ratios = growth_sandwich_ratios(&law, z, 20).unwrap();
        let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().cloned().fold(0.0, f64::max);
        assert!(lo > 0.0 && hi.is_finite() && hi / lo < 2.0);
    }

    #[test]
    fn rouse_chain() {
        let r1 = RouseMatrix::linear_chain(1).unwrap();
        assert_relative_eq!(r1.a0(), 2.0, epsilon = 1e-14);
        let r2 = RouseMatrix::linear_chain(2).unwrap();
        assert_eq!(r2.entry(0, 1), -1.0);
        assert_relative_eq!(r2.a0(), 1.0, epsilon = 1e-14);
        let r3 = RouseMatrix::linear_chain(3).unwrap();
        assert_relative_eq!(r3.a0(), 2.0 - 2f64.sqrt(), epsilon = 1e-14);
        assert!(RouseMatrix::linear_chain(0).is_err());
    }

    #[test]
    fn tables() {
        let t = Table::new(vec![(1.0, 2.0), (3.0, 6.0)]).unwrap();
        assert_eq!(t.eval(2.0).unwrap(), 4.0);
        assert_eq!(t.eval(3.0).unwrap(), 6.0);
        assert!(t.eval(3.0 + 1e-12).is_err());
        assert!(t.is_affine());
        let curves = ResponseCurves::constant(1.0, 3.0, 1.0, 1.0).unwrap();
        assert!(matches!(curves.zeta(0.5), Err(Error::Range(_))));
    }

    #[test]
    fn entropy_values() {
        assert_eq!(entropy_f(1.0).unwrap(), 0.0);
        assert_eq!(entropy_f(0.0).unwrap(), 1.0);
        assert_relative_eq!(entropy_f(std::f64::consts::E).unwrap(), 1.0, epsilon = 1e-15);
        assert!(entropy_f(-1.0).is_err());
        let tk = EntropyToolkit::new(2.0, 0.5).unwrap();
        // F^L(3) = 5/4 + 3(ln 2 - 1) + 1
        let fl3 = 1.25 + 3.0 * (2f64.ln() - 1.0) + 1.0;
        assert_relative_eq!(tk.f_l(3.0).unwrap(), fl3, epsilon = 1e-15);
        assert!((tk.f_l(3.0).unwrap() - 1.329441).abs() < 1e-6);
        assert!((entropy_f(3.0).unwrap() - 1.295837).abs() < 5e-7);
        let fld = (0.0625 - 0.25) / 1.0 + 0.25 * (0.5f64.ln() - 1.0) + 1.0;
        assert_relative_eq!(tk.f_ld(0.25), fld, epsilon = 1e-15);
        assert!((tk.f_ld(0.25) - 0.389213).abs() < 5e-7);
        assert_eq!([tk.f_ld_second(0.1), tk.f_ld_second(1.0), tk.f_ld_second(3.0)], [2.0, 1.0, 0.5]);
        assert!(EntropyToolkit::new(1.0, 0.5).is_err());
        assert!(EntropyToolkit::new(2.0, 1.0).is_err());
    }

    #[test]
    fn cut_off_functions() {
        assert_eq!(beta_l(2.0, 1.5), 1.5);
        assert_eq!(beta_l(2.0, 3.0), 2.0);
        assert_eq!(beta_l_delta(2.0, 0.1, -5.0), 0.1);
    }

    #[test]
    fn lemma_basic_examples() {
        let r = lemma_basic_check(&Quadratic, 1.0, 2.0, 3.0, 4.0).unwrap();
        assert_relative_eq!(r.lhs, -9.0, epsilon = 1e-14);
        assert_relative_eq!(r.rhs, -9.0, epsilon = 1e-13);
        let tk = EntropyToolkit::new(2.0, 0.1).unwrap();
        let r = lemma_basic_check(&tk, 1.3, 1.3, -2.0, 7.0).unwrap();
        assert!(r.residual < 1e-15);
    }

    #[test]
    fn constant_c_of_l_is_tight() {
        let tk = EntropyToolkit::new(10.0, 1e-3).unwrap();
        let c = tk.lower_bound_constant();
        let worst = (0..200_000)
            .map(|k| {
                let s = k as f64 * 1e-3;
                s * s / 40.0 - tk.f_ld(s)
            })
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(c >= worst - 1e-12);
        assert!(c - worst < 1e-6);
    }

    proptest! {
        #[test]
        fn force_is_odd(x in -1.9f64..1.9, y in -1.9f64..1.9) {
            prop_assume!(x * x + y * y < 3.99);
            for law in [SpringLaw::fene(4.0).unwrap(), SpringLaw::cpail(9.0).unwrap(), SpringLaw::hookean()] {
                let f = law.force(&[x, y]).unwrap();
                let g = law.force(&[-x, -y]).unwrap();
                prop_assert_eq!(f[0] + g[0], 0.0);
                prop_assert_eq!(f[1] + g[1], 0.0);
            }
        }

        #[test]
        fn potential_is_nonnegative_and_increasing(s in 0.0f64..1.99, ds in 1e-6f64..0.01) {
            for law in [SpringLaw::fene(4.0).unwrap(), SpringLaw::cpail(9.0).unwrap(), SpringLaw::inverse_langevin(4.5).unwrap()] {
                let u0 = law.potential(s).unwrap();
                prop_assert!(u0 >= 0.0);
                prop_assert!(law.potential(s + ds).unwrap() > u0);
            }
        }

        #[test]
        fn kappa_scaling_bound(kappa in 1e-9f64..=1.0, s in -10.0f64..10.0) {
            let tk = EntropyToolkit::new(2.0, 0.1).unwrap();
            prop_assert!(tk.f_ld(kappa * s) <= tk.f_ld(s) + 1.0 + 1e-14);
        }

        #[test]
        fn beta_is_inverse_second_derivative(s in 1e-6f64..50.0) {
            let tk = EntropyToolkit::new(5.0, 0.01).unwrap();
            prop_assert!((tk.beta(s) - 1.0 / tk.f_l_second(s).unwrap()).abs() <= 1e-14 * s.max(1.0));
            prop_assert!(tk.f_l(s).unwrap() >= entropy_f(s).unwrap() - 1e-14);
        }

        #[test]
        fn lemma_basic_identity_and_inequality(a in 0.0f64..5.0, b in 0.0f64..5.0, ca in 0.0f64..3.0, cb in 0.0f64..3.0) {
            let tk = EntropyToolkit::new(2.0, 0.1).unwrap();
            let r = lemma_basic_check(&tk, a, b, ca, cb).unwrap();
            prop_assert!(r.residual <= 1e-10, "residual {}", r.residual);
            prop_assert_eq!(r.inequality_holds, Some(true));
        }
    }
}
