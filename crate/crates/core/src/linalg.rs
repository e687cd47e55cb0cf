//! Small sparse-matrix toolkit and direct solvers (banded LU without
//! pivoting for diagonally dominant / positive-real systems, dense LU
//! otherwise).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

/// Coordinate-format accumulator; duplicates are summed on conversion.
#[derive(Debug, Clone, Default)]
pub struct Triplets {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl Triplets {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, entries: Vec::new() }
    }

    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.nrows && j < self.ncols, "({i},{j}) out of {}x{}", self.nrows, self.ncols);
        if v != 0.0 {
            self.entries.push((i, j, v));
        }
    }

    pub fn to_csr(mut self) -> Csr {
        self.entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0; self.nrows + 1];
        let mut indices = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in self.entries {
            if last == Some((i, j)) {
                *values.last_mut().expect("entry exists") += v;
            } else {
                indices.push(j);
                values.push(v);
                indptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..self.nrows {
            indptr[i + 1] += indptr[i];
        }
        Csr { nrows: self.nrows, ncols: self.ncols, indptr, indices, values }
    }
}

impl Csr {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Triplets::new(nrows, ncols).to_csr()
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let mut t = Triplets::new(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            t.push(i, i, v);
        }
        t.to_csr()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.indptr[i]..self.indptr[i + 1]).map(move |k| (self.indices[k], self.values[k]))
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    pub fn transpose_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                for (j, v) in self.row(i) {
                    y[j] += v * xi;
                }
            }
        }
        y
    }

    pub fn transpose(&self) -> Csr {
        let mut t = Triplets::new(self.ncols, self.nrows);
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                t.push(j, i, v);
            }
        }
        t.to_csr()
    }

    pub fn scale_rows(&self, s: &[f64]) -> Csr {
        let mut out = self.clone();
        for i in 0..self.nrows {
            for k in out.indptr[i]..out.indptr[i + 1] {
                out.values[k] *= s[i];
            }
        }
        out
    }

    pub fn scaled(&self, a: f64) -> Csr {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= a);
        out
    }

    /// `self * rhs`.
    pub fn matmul(&self, rhs: &Csr) -> Csr {
        assert_eq!(self.ncols, rhs.nrows);
        let mut t = Triplets::new(self.nrows, rhs.ncols);
        let mut acc = vec![0.0; rhs.ncols];
        let mut touched: Vec<usize> = Vec::new();
        let mut mark = vec![false; rhs.ncols];
        for i in 0..self.nrows {
            for (k, a) in self.row(i) {
                for (j, b) in rhs.row(k) {
                    if !mark[j] {
                        mark[j] = true;
                        touched.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                t.push(i, j, acc[j]);
                acc[j] = 0.0;
                mark[j] = false;
            }
            touched.clear();
        }
        t.to_csr()
    }

    pub fn add(&self, rhs: &Csr) -> Csr {
        assert_eq!((self.nrows, self.ncols), (rhs.nrows, rhs.ncols));
        let mut t = Triplets::new(self.nrows, self.ncols);
        for m in [self, rhs] {
            for i in 0..m.nrows {
                for (j, v) in m.row(i) {
                    t.push(i, j, v);
                }
            }
        }
        t.to_csr()
    }

    /// `Pᵀ self P`.
    pub fn congruence(&self, p: &Csr) -> Csr {
        p.transpose().matmul(&self.matmul(p))
    }

    /// `A + s I` for a square matrix with a stored diagonal.
    pub fn shifted(&self, s: f64) -> Csr {
        let mut out = self.clone();
        for i in 0..self.nrows {
            for k in out.indptr[i]..out.indptr[i + 1] {
                if out.indices[k] == i {
                    out.values[k] += s;
                }
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                d[(i, j)] += v;
            }
        }
        d
    }

    /// Largest `|i - j|` over stored entries, split into lower and upper.
    pub fn bandwidths(&self) -> (usize, usize) {
        let (mut kl, mut ku) = (0, 0);
        for i in 0..self.nrows {
            for (j, _) in self.row(i) {
                if j < i {
                    kl = kl.max(i - j);
                } else {
                    ku = ku.max(j - i);
                }
            }
        }
        (kl, ku)
    }
}

/// LU factorization of a banded matrix without pivoting.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    // row-major band storage: entry (i, j) at i * width + (j + kl - i)
    band: Vec<f64>,
}

impl BandedLu {
    pub fn factor(a: &Csr) -> Result<Self> {
        if a.nrows != a.ncols {
            return Err(Error::Argument("banded LU needs a square matrix".into()));
        }
        let n = a.nrows;
        let (kl, ku) = a.bandwidths();
        let width = kl + ku + 1;
        let mut band = vec![0.0; n * width];
        for i in 0..n {
            for (j, v) in a.row(i) {
                band[i * width + (j + kl - i)] += v;
            }
        }
        let scale = band.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        for k in 0..n {
            let pivot = band[k * width + kl];
            if !(pivot.abs() > 1e-14 * scale) || !pivot.is_finite() {
                return Err(Error::Solver(format!("zero pivot {pivot:e} at row {k} in banded LU")));
            }
            for i in k + 1..(k + kl + 1).min(n) {
                let ik = i * width + (k + kl - i);
                let l = band[ik] / pivot;
                band[ik] = l;
                if l == 0.0 {
                    continue;
                }
                for j in k + 1..(k + ku + 1).min(n) {
                    band[i * width + (j + kl - i)] -= l * band[k * width + (j + kl - k)];
                }
            }
        }
        Ok(Self { n, kl, ku, band })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let width = kl + ku + 1;
        let mut x = b.to_vec();
        for i in 0..n {
            let mut s = x[i];
            for j in i.saturating_sub(kl)..i {
                s -= self.band[i * width + (j + kl - i)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..(i + ku + 1).min(n) {
                s -= self.band[i * width + (j + kl - i)] * x[j];
            }
            x[i] = s / self.band[i * width + kl];
        }
        x
    }
}

/// Direct solver choosing banded or dense LU by bandwidth.
#[derive(Debug, Clone)]
pub enum DirectSolver {
    Banded(BandedLu),
    Dense(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

impl DirectSolver {
    pub fn factor(a: &Csr) -> Result<Self> {
        let (kl, ku) = a.bandwidths();
        let n = a.nrows;
        if (kl + ku + 1) * 4 <= n || n <= 8 {
            BandedLu::factor(a).map(Self::Banded)
        } else {
            let lu = a.to_dense().lu();
            if !lu.is_invertible() {
                return Err(Error::Solver("singular matrix in dense LU".into()));
            }
            Ok(Self::Dense(lu))
        }
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let x = match self {
            Self::Banded(lu) => lu.solve(b),
            Self::Dense(lu) => lu
                .solve(&DVector::from_column_slice(b))
                .ok_or_else(|| Error::Solver("dense LU solve failed".into()))?
                .as_slice()
                .to_vec(),
        };
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Solver("non-finite solution".into()));
        }
        Ok(x)
    }
}

/// Relative residual `‖Ax - b‖ / max(‖b‖, tiny)`.
pub fn relative_residual(a: &Csr, x: &[f64], b: &[f64]) -> f64 {
    let r = a.mul_vec(x);
    let num: f64 = r.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    num / den.max(1e-300)
}
