//! Configuration-space discretization: per spring, a polar Gauss grid whose
//! radial weights absorb the Maxwellian, and an M-orthonormal polynomial
//! basis of total degree `p` in `q`. Chains of `K` springs use tensor
//! products of the single-spring objects.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::laws::{RouseMatrix, SpringLaw};
use crate::quadrature::{stieltjes, Recurrence, Rule};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Harmonic {
    Cos,
    Sin,
}

/// `φ = c Re/Im((q1 + i q2)^m) P_n(|q|^2/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mode {
    pub m: usize,
    pub n: usize,
    pub harmonic: Harmonic,
}

impl Mode {
    pub fn degree(&self) -> usize {
        self.m + 2 * self.n
    }
}

/// Nodes, weights and tabulated basis functions for one spring.
#[derive(Debug, Clone)]
pub struct SpringBasis {
    pub law: SpringLaw,
    pub z: f64,
    pub nr: usize,
    pub ntheta: usize,
    pub degree: usize,
    pub modes: Vec<Mode>,
    radial: Vec<Recurrence>,
    /// Configuration vectors at the Maxwellian-rule nodes.
    pub q: Vec<[f64; 2]>,
    /// `∫ M g ≈ Σ w g`; sums to one.
    pub w: Vec<f64>,
    pub phi: DMatrix<f64>,
    pub dphi: [DMatrix<f64>; 2],
    /// Nodes and weights of the rule for `∫ M U' g`.
    pub q_force: Vec<[f64; 2]>,
    pub w_force: Vec<f64>,
    pub phi_force: DMatrix<f64>,
    /// `Φᵀ diag(w)`: projection of nodal values onto modes.
    pub project: DMatrix<f64>,
    /// `∫ M ∇φ_a · ∇φ_b`.
    pub stiffness: DMatrix<f64>,
    /// `gm[c][(a, b)] = ∫ M ∂_c φ_a φ_b`.
    pub gm: [DMatrix<f64>; 2],
    /// `∫ M U' q qᵀ φ_a` as `[xx, xy, yx, yy]`.
    pub kramers: Vec<[f64; 4]>,
}

impl SpringBasis {
    pub fn new(law: SpringLaw, nr: usize, ntheta: usize) -> Result<Self> {
        if law.dim() != 2 {
            return Err(Error::Parameter("configuration grids are implemented for d = 2".into()));
        }
        if nr < 2 || ntheta < 3 {
            return Err(Error::Parameter(format!("q-grid too coarse: nr = {nr}, ntheta = {ntheta}")));
        }
        let degree = ((ntheta - 1) / 2).min(2 * (nr - 1));
        let rule = law.radial_rule(nr, false)?;
        let rule_f = law.radial_rule(nr, true)?;
        let total: f64 = rule.weights.iter().sum();
        let z = law.partition_constant(&rule)?;

        let mut modes = Vec::new();
        for deg in 0..=degree {
            for m in (0..=deg).rev() {
                if (deg - m) % 2 != 0 {
                    continue;
                }
                let n = (deg - m) / 2;
                modes.push(Mode { m, n, harmonic: Harmonic::Cos });
                if m > 0 {
                    modes.push(Mode { m, n, harmonic: Harmonic::Sin });
                }
            }
        }

        // radial orthonormal polynomials for each angular order m
        let recs: Vec<Recurrence> = (0..=degree)
            .map(|m| {
                let weights = rule
                    .nodes
                    .iter()
                    .zip(&rule.weights)
                    .map(|(s, w)| w / total * (2.0 * s).powi(m as i32))
                    .collect();
                let n_needed = (degree - m) / 2 + 1;
                stieltjes(&Rule { nodes: rule.nodes.clone(), weights }, n_needed)
            })
            .collect::<Result<_>>()?;

        let thetas: Vec<f64> = (0..ntheta).map(|l| 2.0 * PI * (l as f64 + 0.5) / ntheta as f64).collect();
        let build = |r: &Rule, norm: f64| {
            let mut q = Vec::with_capacity(nr * ntheta);
            let mut w = Vec::with_capacity(nr * ntheta);
            for (sj, wj) in r.nodes.iter().zip(&r.weights) {
                let rad = (2.0 * sj).sqrt();
                for th in &thetas {
                    q.push([rad * th.cos(), rad * th.sin()]);
                    w.push(wj / (ntheta as f64 * norm));
                }
            }
            (q, w)
        };
        let (q, w) = build(&rule, total);
        let (q_force, w_force) = build(&rule_f, total);

        let tab = |q: &[[f64; 2]], with_grad: bool| {
            let nn = q.len();
            let nm = modes.len();
            let mut phi = DMatrix::zeros(nn, nm);
            let mut dx = DMatrix::zeros(if with_grad { nn } else { 0 }, nm);
            let mut dy = DMatrix::zeros(if with_grad { nn } else { 0 }, nm);
            for (k, qk) in q.iter().enumerate() {
                let (v, g) = eval_basis(&recs, &modes, degree, *qk);
                for a in 0..nm {
                    phi[(k, a)] = v[a];
                    if with_grad {
                        dx[(k, a)] = g[0][a];
                        dy[(k, a)] = g[1][a];
                    }
                }
            }
            (phi, dx, dy)
        };
        let (phi, dphi_x, dphi_y) = tab(&q, true);
        let (phi_force, _, _) = tab(&q_force, false);
        let nm = modes.len();

        let mut project = phi.transpose();
        for k in 0..q.len() {
            project.column_mut(k).scale_mut(w[k]);
        }
        let weighted = |a: &DMatrix<f64>| {
            let mut out = a.clone();
            for k in 0..q.len() {
                out.row_mut(k).scale_mut(w[k]);
            }
            out
        };
        let stiffness = dphi_x.transpose() * weighted(&dphi_x) + dphi_y.transpose() * weighted(&dphi_y);
        let gm = [dphi_x.transpose() * weighted(&phi), dphi_y.transpose() * weighted(&phi)];
        let kramers = (0..nm)
            .map(|a| {
                let mut t = [0.0; 4];
                for k in 0..q_force.len() {
                    let [x, y] = q_force[k];
                    let wv = w_force[k] * phi_force[(k, a)];
                    t[0] += wv * x * x;
                    t[1] += wv * x * y;
                    t[3] += wv * y * y;
                }
                t[2] = t[1];
                t
            })
            .collect();

        Ok(Self {
            law,
            z,
            nr,
            ntheta,
            degree,
            modes,
            radial: recs,
            q,
            w,
            phi,
            dphi: [dphi_x, dphi_y],
            q_force,
            w_force,
            phi_force,
            project,
            stiffness,
            gm,
            kramers,
        })
    }

    pub fn nmodes(&self) -> usize {
        self.modes.len()
    }

    /// Basis values and gradients at an arbitrary configuration vector.
    pub fn basis_at(&self, q: [f64; 2]) -> (Vec<f64>, [Vec<f64>; 2]) {
        eval_basis(&self.radial, &self.modes, self.degree, q)
    }

    pub fn nnodes(&self) -> usize {
        self.q.len()
    }

    /// `∫ M g` by the Maxwellian rule.
    pub fn integrate(&self, g: impl Fn([f64; 2]) -> f64) -> f64 {
        self.q.iter().zip(&self.w).map(|(q, w)| w * g(*q)).sum()
    }

    /// `∫ M U' g` by the force-weighted rule.
    pub fn integrate_force_weighted(&self, g: impl Fn([f64; 2]) -> f64) -> f64 {
        self.q_force.iter().zip(&self.w_force).map(|(q, w)| w * g(*q)).sum()
    }

    /// `∫ M U'(|q|^2/2) q qᵀ dq`, which integration by parts identifies with `I`.
    pub fn maxwellian_moment_tensor(&self) -> [f64; 4] {
        let xx = self.integrate_force_weighted(|q| q[0] * q[0]);
        let xy = self.integrate_force_weighted(|q| q[0] * q[1]);
        let yy = self.integrate_force_weighted(|q| q[1] * q[1]);
        [xx, xy, xy, yy]
    }

    /// Coefficients of a function given analytically, by projection.
    pub fn project_fn(&self, g: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
        let vals: Vec<f64> = self.q.iter().map(|q| g(*q)).collect();
        (&self.project * nalgebra::DVector::from_vec(vals)).as_slice().to_vec()
    }

    /// Residual of `∫ M (B q)·∇φ = ∫ M φ U' q qᵀ : B` for trace-free `B`
    /// and a test function given with its gradient.
    pub fn integration_by_parts_residual(
        &self,
        b: [[f64; 2]; 2],
        phi: impl Fn([f64; 2]) -> (f64, [f64; 2]),
    ) -> Result<f64> {
        let tr = b[0][0] + b[1][1];
        if tr.abs() > 1e-14 {
            return Err(Error::Argument(format!("B must be trace-free, tr B = {tr:e}")));
        }
        let lhs = self.integrate(|q| {
            let (_, g) = phi(q);
            let bq = [b[0][0] * q[0] + b[0][1] * q[1], b[1][0] * q[0] + b[1][1] * q[1]];
            bq[0] * g[0] + bq[1] * g[1]
        });
        let rhs = self.integrate_force_weighted(|q| {
            let (v, _) = phi(q);
            let mut qq = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    qq += q[i] * q[j] * b[i][j];
                }
            }
            v * qq
        });
        Ok((lhs - rhs).abs())
    }
}

fn eval_basis(recs: &[Recurrence], modes: &[Mode], degree: usize, q: [f64; 2]) -> (Vec<f64>, [Vec<f64>; 2]) {
    let [x, y] = q;
    let s = 0.5 * (x * x + y * y);
    let r = (2.0 * s).sqrt();
    let th = y.atan2(x);
    let radial: Vec<(Vec<f64>, Vec<f64>)> = recs
        .iter()
        .enumerate()
        .map(|(m, rec)| rec.eval_with_derivative((degree - m) / 2 + 1, s))
        .collect();
    let nm = modes.len();
    let mut v = vec![0.0; nm];
    let mut gx = vec![0.0; nm];
    let mut gy = vec![0.0; nm];
    for (a, md) in modes.iter().enumerate() {
        if a == 0 {
            v[0] = 1.0;
            continue;
        }
        let c = if md.m == 0 { 1.0 } else { std::f64::consts::SQRT_2 };
        let mf = md.m as f64;
        let (h, hx, hy) = if md.m == 0 {
            (1.0, 0.0, 0.0)
        } else {
            let rm = r.powi(md.m as i32);
            let rm1 = r.powi(md.m as i32 - 1);
            let (cm, sm) = ((mf * th).cos(), (mf * th).sin());
            let (cm1, sm1) = (((mf - 1.0) * th).cos(), ((mf - 1.0) * th).sin());
            match md.harmonic {
                Harmonic::Cos => (rm * cm, mf * rm1 * cm1, -mf * rm1 * sm1),
                Harmonic::Sin => (rm * sm, mf * rm1 * sm1, mf * rm1 * cm1),
            }
        };
        let (p, dp) = (radial[md.m].0[md.n], radial[md.m].1[md.n]);
        v[a] = c * h * p;
        gx[a] = c * (hx * p + h * dp * x);
        gy[a] = c * (hy * p + h * dp * y);
    }
    (v, [gx, gy])
}

/// Applies `mat` along `axis` of a row-major tensor with shape `dims`.
pub fn apply_axis(data: &[f64], dims: &[usize], axis: usize, mat: &DMatrix<f64>) -> Vec<f64> {
    let inner: usize = dims[axis + 1..].iter().product();
    let outer: usize = dims[..axis].iter().product();
    let (rows, cols) = mat.shape();
    assert_eq!(cols, dims[axis]);
    let mut out = vec![0.0; outer * rows * inner];
    for o in 0..outer {
        let src = &data[o * cols * inner..(o + 1) * cols * inner];
        let dst = &mut out[o * rows * inner..(o + 1) * rows * inner];
        for r in 0..rows {
            let drow = &mut dst[r * inner..(r + 1) * inner];
            for k in 0..cols {
                let a = mat[(r, k)];
                if a == 0.0 {
                    continue;
                }
                let srow = &src[k * inner..(k + 1) * inner];
                for (d, s) in drow.iter_mut().zip(srow) {
                    *d += a * s;
                }
            }
        }
    }
    out
}

/// Tensor-product configuration grid for a chain of `K` springs.
#[derive(Debug, Clone)]
pub struct ConfigGrid {
    springs: Vec<SpringBasis>,
}

/// Largest `K d` allowed without an explicit override.
pub const DEFAULT_MAX_KD: usize = 4;

impl ConfigGrid {
    pub fn new(laws: &[SpringLaw], nr: usize, ntheta: usize) -> Result<Self> {
        Self::with_limit(laws, nr, ntheta, DEFAULT_MAX_KD)
    }

    pub fn with_limit(laws: &[SpringLaw], nr: usize, ntheta: usize, max_kd: usize) -> Result<Self> {
        if laws.is_empty() {
            return Err(Error::Argument("need at least one spring".into()));
        }
        let kd = laws.len() * 2;
        if kd > max_kd {
            return Err(Error::Parameter(format!("K·d = {kd} exceeds the memory guard {max_kd}")));
        }
        let mut springs: Vec<SpringBasis> = Vec::with_capacity(laws.len());
        for law in laws {
            // identical springs share one tabulation
            if let Some(s) = springs.iter().find(|s| s.law == *law) {
                springs.push(s.clone());
            } else {
                springs.push(SpringBasis::new(*law, nr, ntheta)?);
            }
        }
        Ok(Self { springs })
    }

    pub fn springs(&self) -> &[SpringBasis] {
        &self.springs
    }

    pub fn k(&self) -> usize {
        self.springs.len()
    }

    pub fn mode_dims(&self) -> Vec<usize> {
        self.springs.iter().map(|s| s.nmodes()).collect()
    }

    pub fn node_dims(&self) -> Vec<usize> {
        self.springs.iter().map(|s| s.nnodes()).collect()
    }

    pub fn nmodes(&self) -> usize {
        self.mode_dims().iter().product()
    }

    pub fn nnodes(&self) -> usize {
        self.node_dims().iter().product()
    }

    /// Connector vectors `(q_1, .., q_K)` at flat tensor node `k`.
    pub fn node_coordinates(&self, mut k: usize) -> Vec<[f64; 2]> {
        let mut out = vec![[0.0; 2]; self.k()];
        for (i, s) in self.springs.iter().enumerate().rev() {
            out[i] = s.q[k % s.nnodes()];
            k /= s.nnodes();
        }
        out
    }

    /// Tensor-product Maxwellian weights (sum to one).
    pub fn weights(&self) -> Vec<f64> {
        let mut w = vec![1.0];
        for s in &self.springs {
            w = w.iter().flat_map(|a| s.w.iter().map(move |b| a * b)).collect();
        }
        w
    }

    /// Nodal values from modal coefficients.
    pub fn evaluate(&self, coeffs: &[f64]) -> Vec<f64> {
        self.transform(coeffs, |s| &s.phi, false)
    }

    /// Components of `∇_{q_i} ψ` at nodes for spring `i`.
    pub fn evaluate_gradient(&self, coeffs: &[f64], spring: usize) -> [Vec<f64>; 2] {
        let mut out = [Vec::new(), Vec::new()];
        for (c, o) in out.iter_mut().enumerate() {
            let mut dims = self.mode_dims();
            let mut data = coeffs.to_vec();
            for (ax, s) in self.springs.iter().enumerate() {
                let mat = if ax == spring { &s.dphi[c] } else { &s.phi };
                data = apply_axis(&data, &dims, ax, mat);
                dims[ax] = s.nnodes();
            }
            *o = data;
        }
        out
    }

    /// Modal coefficients of nodal values by weighted projection.
    pub fn project(&self, nodal: &[f64]) -> Vec<f64> {
        self.transform(nodal, |s| &s.project, true)
    }

    fn transform<'a>(&'a self, data: &[f64], pick: impl Fn(&'a SpringBasis) -> &'a DMatrix<f64>, to_modes: bool) -> Vec<f64> {
        let mut dims = if to_modes { self.node_dims() } else { self.mode_dims() };
        let mut data = data.to_vec();
        for (ax, s) in self.springs.iter().enumerate() {
            let mat = pick(s);
            data = apply_axis(&data, &dims, ax, mat);
            dims[ax] = mat.nrows();
        }
        data
    }

    /// `∫ M Σ_i (σ q_i) η · ∇_{q_i} φ_B` for every basis function `B`, with
    /// `η` given at nodes and `σ = [σ11, σ12, σ21, σ22]`.
    pub fn drag_load(&self, eta: &[f64], sigma: &[f64; 4]) -> Vec<f64> {
        let w = self.weights();
        let node_dims = self.node_dims();
        let mut total = vec![0.0; self.nmodes()];
        for i in 0..self.k() {
            for c in 0..2 {
                // (σ q_i)_c η w at every tensor node
                let qi = &self.springs[i].q;
                let inner: usize = node_dims[i + 1..].iter().product();
                let ni = node_dims[i];
                let vals: Vec<f64> = (0..eta.len())
                    .map(|k| {
                        let q = qi[(k / inner) % ni];
                        let sq = sigma[2 * c] * q[0] + sigma[2 * c + 1] * q[1];
                        sq * eta[k] * w[k]
                    })
                    .collect();
                let mut dims = node_dims.clone();
                let mut data = vals;
                for (ax, s) in self.springs.iter().enumerate() {
                    let mat = if ax == i { s.dphi[c].transpose() } else { s.phi.transpose() };
                    data = apply_axis(&data, &dims, ax, &mat);
                    dims[ax] = s.nmodes();
                }
                for (t, d) in total.iter_mut().zip(&data) {
                    *t += d;
                }
            }
        }
        total
    }

    /// Dense matrix of `Σ_ij coef_ij ∫ M ∇_{q_j} φ_A · ∇_{q_i} φ_B`.
    pub fn gradient_form(&self, coef: &DMatrix<f64>) -> DMatrix<f64> {
        let dims = self.mode_dims();
        let n = self.nmodes();
        let k = self.k();
        let mut out = DMatrix::zeros(n, n);
        let multi = |mut idx: usize| -> Vec<usize> {
            let mut v = vec![0; k];
            for ax in (0..k).rev() {
                v[ax] = idx % dims[ax];
                idx /= dims[ax];
            }
            v
        };
        let idx: Vec<Vec<usize>> = (0..n).map(multi).collect();
        for (bi, b) in idx.iter().enumerate() {
            for (ai, a) in idx.iter().enumerate() {
                let mut v = 0.0;
                for i in 0..k {
                    for j in 0..k {
                        let cij = coef[(i, j)];
                        if cij == 0.0 {
                            continue;
                        }
                        let others_match = (0..k).filter(|&l| l != i && l != j).all(|l| a[l] == b[l]);
                        if !others_match {
                            continue;
                        }
                        if i == j {
                            v += cij * self.springs[i].stiffness[(a[i], b[i])];
                        } else {
                            let (si, sj) = (&self.springs[i], &self.springs[j]);
                            for c in 0..2 {
                                v += cij * sj.gm[c][(a[j], b[j])] * si.gm[c][(b[i], a[i])];
                            }
                        }
                    }
                }
                out[(bi, ai)] = v;
            }
        }
        out
    }

    /// `(1/(4λ)) Σ_ij A_ij ∫ M ∇_{q_j} φ_A · ∇_{q_i} φ_B`.
    pub fn q_diffusion_matrix(&self, rouse: &RouseMatrix, lambda: f64) -> Result<DMatrix<f64>> {
        if rouse.springs() != self.k() {
            return Err(Error::Argument(format!(
                "Rouse matrix has {} springs, grid has {}",
                rouse.springs(),
                self.k()
            )));
        }
        Ok(self.gradient_form(rouse.matrix()) / (4.0 * lambda))
    }

    /// Kramers tensors `C_i = ∫ M U_i' q_i q_iᵀ ψ̃` for modal `ψ̃`.
    pub fn kramers(&self, coeffs: &[f64]) -> Vec<[f64; 4]> {
        let dims = self.mode_dims();
        (0..self.k())
            .map(|i| {
                let stride: usize = dims[i + 1..].iter().product();
                let mut t = [0.0; 4];
                for (a, ta) in self.springs[i].kramers.iter().enumerate() {
                    let c = coeffs[a * stride];
                    for e in 0..4 {
                        t[e] += c * ta[e];
                    }
                }
                t
            })
            .collect()
    }

    /// `∫ M |∇_q ψ|^2 / (4ψ)` at one point in space, skipping nonpositive nodes.
    pub fn fisher_q(&self, coeffs: &[f64], nodal: &[f64]) -> f64 {
        let w = self.weights();
        let mut acc = 0.0;
        for i in 0..self.k() {
            let [gx, gy] = self.evaluate_gradient(coeffs, i);
            for k in 0..nodal.len() {
                if nodal[k] > 0.0 {
                    acc += w[k] * (gx[k] * gx[k] + gy[k] * gy[k]) / (4.0 * nodal[k]);
                }
            }
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn fene() -> SpringBasis {
        SpringBasis::new(SpringLaw::fene(4.0).unwrap(), 12, 16).unwrap()
    }

    fn hookean() -> SpringBasis {
        SpringBasis::new(SpringLaw::hookean(), 12, 16).unwrap()
    }

    #[test]
    fn basis_is_orthonormal() {
        for b in [fene(), hookean()] {
            assert_eq!(b.nmodes(), 36);
            let gram = b.phi.transpose() * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(b.w.clone())) * &b.phi;
            let err = (gram - DMatrix::identity(36, 36)).abs().max();
            assert!(err < 1e-11, "{err}");
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let b = fene();
        let h = 1e-6;
        for q in [[0.3, -0.4], [1.1, 0.7], [-0.2, 1.5]] {
            let (_, g) = b.basis_at(q);
            let (vxp, _) = b.basis_at([q[0] + h, q[1]]);
            let (vxm, _) = b.basis_at([q[0] - h, q[1]]);
            let (vyp, _) = b.basis_at([q[0], q[1] + h]);
            let (vym, _) = b.basis_at([q[0], q[1] - h]);
            for a in 0..b.nmodes() {
                let fx = (vxp[a] - vxm[a]) / (2.0 * h);
                let fy = (vyp[a] - vym[a]) / (2.0 * h);
                assert!((fx - g[0][a]).abs() < 1e-6 * (1.0 + fx.abs()), "mode {a}");
                assert!((fy - g[1][a]).abs() < 1e-6 * (1.0 + fy.abs()), "mode {a}");
            }
        }
        assert!(b.stiffness.row(0).iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn hookean_linear_mode_gradient() {
        let b = hookean();
        // q_x is in the span; ∫ M |∇ q_x|^2 = 1 and ∫ M q_x^2 = 1
        let c = b.project_fn(|q| q[0]);
        let norm: f64 = c.iter().map(|v| v * v).sum();
        assert_relative_eq!(norm, 1.0, epsilon = 1e-12);
        let energy = (b.stiffness.clone() * nalgebra::DVector::from_vec(c.clone())).dot(&nalgebra::DVector::from_vec(c));
        assert_relative_eq!(energy, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn moment_tensors_are_identity() {
        for b in [fene(), hookean()] {
            let t = b.maxwellian_moment_tensor();
            assert!((t[0] - 1.0).abs() < 1e-10 && (t[3] - 1.0).abs() < 1e-10, "{t:?}");
            assert!(t[1].abs() < 1e-12);
            assert!((b.w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn integration_by_parts_hookean_example() {
        let b = hookean();
        let r = b
            .integration_by_parts_residual([[0.0, 1.0], [0.0, 0.0]], |q| (q[0] * q[1], [q[1], q[0]]))
            .unwrap();
        assert!(r < 1e-10);
        let lhs = b.integrate(|q| q[1] * q[1]);
        assert_relative_eq!(lhs, 1.0, epsilon = 1e-12);
        assert!(b.integration_by_parts_residual([[1.0, 0.0], [0.0, 0.0]], |_| (1.0, [0.0, 0.0])).is_err());
    }

    #[test]
    fn tensor_product_matches_single_spring() {
        let law = SpringLaw::fene(4.0).unwrap();
        let g = ConfigGrid::with_limit(&[law, law], 4, 5, 4).unwrap();
        let nm = g.nmodes();
        let coeffs: Vec<f64> = (0..nm).map(|k| ((k * 31 % 17) as f64 - 8.0) / 10.0).collect();
        let nodal = g.evaluate(&coeffs);
        let back = g.project(&nodal);
        for (a, b) in coeffs.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
        let rouse = RouseMatrix::linear_chain(2).unwrap();
        let q = g.q_diffusion_matrix(&rouse, 1.0).unwrap();
        assert!((q.clone() - q.transpose()).abs().max() < 1e-13);
        assert!(ConfigGrid::new(&[law, law, law], 4, 5).is_err());
    }
}
