//! Gauss rules built from three-term recurrences (Golub–Welsch), a discretized
//! Stieltjes procedure for non-classical weights, and adaptive Gauss–Kronrod
//! integration on intervals.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Nodes and weights of a one-dimensional quadrature rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    /// Affine change of variables `x -> scale * x + shift`; weights are
    /// multiplied by `|scale|` times `weight_factor`.
    pub fn mapped(&self, scale: f64, shift: f64, weight_factor: f64) -> Rule {
        Rule {
            nodes: self.nodes.iter().map(|x| scale * x + shift).collect(),
            weights: self.weights.iter().map(|w| w * scale.abs() * weight_factor).collect(),
        }
    }
}

/// Orthonormal three-term recurrence
/// `sqrt(b[k+1]) p_{k+1}(x) = (x - a[k]) p_k(x) - sqrt(b[k]) p_{k-1}(x)`,
/// with `b[0]` the total mass of the measure and `p_0 = 1/sqrt(b[0])`.
#[derive(Debug, Clone, PartialEq)]
pub struct Recurrence {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl Recurrence {
    /// Number of polynomials the recurrence can generate.
    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    /// Values and derivatives of `p_0 .. p_{n-1}` at `x`.
    pub fn eval_with_derivative(&self, n: usize, x: f64) -> (Vec<f64>, Vec<f64>) {
        assert!(n <= self.a.len() + 1, "recurrence too short for {n} polynomials");
        let mut p = vec![0.0; n];
        let mut dp = vec![0.0; n];
        if n == 0 {
            return (p, dp);
        }
        p[0] = 1.0 / self.b[0].sqrt();
        for k in 0..n - 1 {
            let prev = if k > 0 { p[k - 1] } else { 0.0 };
            let dprev = if k > 0 { dp[k - 1] } else { 0.0 };
            let sb = if k > 0 { self.b[k].sqrt() } else { 0.0 };
            let sn = self.b[k + 1].sqrt();
            p[k + 1] = ((x - self.a[k]) * p[k] - sb * prev) / sn;
            dp[k + 1] = (p[k] + (x - self.a[k]) * dp[k] - sb * dprev) / sn;
        }
        (p, dp)
    }

    /// Gauss rule with `n` nodes (Golub–Welsch).
    pub fn gauss(&self, n: usize) -> Result<Rule> {
        if n == 0 || n > self.a.len() || n > self.b.len() {
            return Err(Error::Argument(format!(
                "cannot build a {n}-point rule from a recurrence of length {}",
                self.a.len()
            )));
        }
        let mut jm = DMatrix::<f64>::zeros(n, n);
        for k in 0..n {
            jm[(k, k)] = self.a[k];
            if k + 1 < n {
                let off = self.b[k + 1].sqrt();
                jm[(k, k + 1)] = off;
                jm[(k + 1, k)] = off;
            }
        }
        let eig = SymmetricEigen::new(jm);
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|k| {
                let v0 = eig.eigenvectors[(0, k)];
                (eig.eigenvalues[k], self.b[0] * v0 * v0)
            })
            .collect();
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
        let rule = Rule {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        };
        if rule.nodes.iter().chain(&rule.weights).any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite Gauss rule".into()));
        }
        Ok(rule)
    }
}

/// Natural log of the gamma function (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    let t = x + 7.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Recurrence for the Jacobi weight `(1-x)^alpha (1+x)^beta` on `[-1, 1]`.
pub fn jacobi_recurrence(n: usize, alpha: f64, beta: f64) -> Result<Recurrence> {
    if alpha <= -1.0 || beta <= -1.0 {
        return Err(Error::Parameter(format!("Jacobi exponents must exceed -1 (alpha={alpha}, beta={beta})")));
    }
    let ab = alpha + beta;
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n + 1);
    let mu0 = ((ab + 1.0) * std::f64::consts::LN_2 + ln_gamma(alpha + 1.0) + ln_gamma(beta + 1.0)
        - ln_gamma(ab + 2.0))
    .exp();
    b.push(mu0);
    for k in 0..n {
        let kf = k as f64;
        let ak = if k == 0 {
            (beta - alpha) / (ab + 2.0)
        } else {
            (beta * beta - alpha * alpha) / ((2.0 * kf + ab) * (2.0 * kf + ab + 2.0))
        };
        a.push(ak);
        let k1 = kf + 1.0;
        let bk = if k == 0 {
            4.0 * (1.0 + alpha) * (1.0 + beta) / ((2.0 + ab).powi(2) * (3.0 + ab))
        } else {
            4.0 * k1 * (k1 + alpha) * (k1 + beta) * (k1 + ab)
                / ((2.0 * k1 + ab).powi(2) * (2.0 * k1 + ab + 1.0) * (2.0 * k1 + ab - 1.0))
        };
        b.push(bk);
    }
    Ok(Recurrence { a, b })
}

/// Recurrence for the generalized Laguerre weight `x^alpha e^{-x}` on `[0, inf)`.
pub fn laguerre_recurrence(n: usize, alpha: f64) -> Recurrence {
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n + 1);
    b.push(ln_gamma(alpha + 1.0).exp());
    for k in 0..n {
        let kf = k as f64;
        a.push(2.0 * kf + alpha + 1.0);
        b.push((kf + 1.0) * (kf + 1.0 + alpha));
    }
    Recurrence { a, b }
}

pub fn gauss_jacobi(n: usize, alpha: f64, beta: f64) -> Result<Rule> {
    jacobi_recurrence(n, alpha, beta)?.gauss(n)
}

pub fn gauss_legendre(n: usize) -> Rule {
    gauss_jacobi(n, 0.0, 0.0).expect("Legendre weight is admissible")
}

pub fn gauss_laguerre(n: usize, alpha: f64) -> Result<Rule> {
    laguerre_recurrence(n, alpha).gauss(n)
}

/// Orthonormal recurrence of a discrete measure (discretized Stieltjes
/// procedure with re-orthogonalized vectors).
pub fn stieltjes(rule: &Rule, n: usize) -> Result<Recurrence> {
    let m = rule.len();
    if n > m {
        return Err(Error::Argument(format!("discrete measure with {m} points supports at most {m} polynomials")));
    }
    let w = &rule.weights;
    let x = &rule.nodes;
    let mu0: f64 = w.iter().sum();
    if !(mu0 > 0.0) || !mu0.is_finite() {
        return Err(Error::Numerical(format!("discrete measure has mass {mu0}")));
    }
    let mut a = Vec::with_capacity(n);
    let mut b = vec![mu0];
    let mut qs: Vec<Vec<f64>> = vec![vec![1.0 / mu0.sqrt(); m]];
    for k in 0..n {
        let qk = &qs[k];
        let ak: f64 = (0..m).map(|j| w[j] * x[j] * qk[j] * qk[j]).sum();
        a.push(ak);
        let mut r: Vec<f64> = (0..m)
            .map(|j| {
                let prev = if k > 0 { b[k].sqrt() * qs[k - 1][j] } else { 0.0 };
                (x[j] - ak) * qk[j] - prev
            })
            .collect();
        // one pass of re-orthogonalization against all previous vectors
        for q in &qs {
            let c: f64 = (0..m).map(|j| w[j] * r[j] * q[j]).sum();
            for j in 0..m {
                r[j] -= c * q[j];
            }
        }
        let bk: f64 = (0..m).map(|j| w[j] * r[j] * r[j]).sum();
        b.push(bk);
        if k + 1 < m.min(n + 1) && bk > 0.0 {
            let s = bk.sqrt();
            qs.push(r.iter().map(|v| v / s).collect());
        } else {
            qs.push(vec![0.0; m]);
        }
    }
    Ok(Recurrence { a, b })
}

/// Adaptive Gauss–Kronrod (7, 15) integration of `f` over `[a, b]`.
pub fn integrate_adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
        const XK: [f64; 8] = [
            0.991_455_371_120_812_6,
            0.949_107_912_342_758_5,
            0.864_864_423_359_769_1,
            0.741_531_185_599_394_4,
            0.586_087_235_467_691_1,
            0.405_845_151_377_397_2,
            0.207_784_955_007_898_5,
            0.0,
        ];
        const WK: [f64; 8] = [
            0.022_935_322_010_529_22,
            0.063_092_092_629_978_55,
            0.104_790_010_322_250_2,
            0.140_653_259_715_525_9,
            0.169_004_726_639_267_9,
            0.190_350_578_064_785_4,
            0.204_432_940_075_298_9,
            0.209_482_141_084_728_0,
        ];
        const WG: [f64; 4] = [
            0.129_484_966_168_869_7,
            0.279_705_391_489_276_7,
            0.381_830_050_505_118_9,
            0.417_959_183_673_469_4,
        ];
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let fc = f(c);
        let mut kron = WK[7] * fc;
        let mut gauss = WG[3] * fc;
        for i in 0..7 {
            let fx = f(c - h * XK[i]) + f(c + h * XK[i]);
            kron += WK[i] * fx;
            if i % 2 == 1 {
                gauss += WG[i / 2] * fx;
            }
        }
        (kron * h, ((kron - gauss) * h).abs())
    }

    let mut stack = vec![(a, b, 0usize)];
    let mut total = 0.0;
    while let Some((lo, hi, depth)) = stack.pop() {
        let (val, err) = gk15(f, lo, hi);
        let width = (hi - lo).abs() / (b - a).abs().max(f64::MIN_POSITIVE);
        if err <= (tol * width).max(1e-300) || depth >= 50 {
            if depth >= 50 && err > tol {
                return Err(Error::Numerical(format!("adaptive quadrature failed on [{lo}, {hi}]")));
            }
            total += val;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((mid, hi, depth + 1));
            stack.push((lo, mid, depth + 1));
        }
    }
    if !total.is_finite() {
        return Err(Error::Numerical("non-finite integral".into()));
    }
    Ok(total)
}
