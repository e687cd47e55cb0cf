//! Staggered (MAC) grid on the rectangle `[0, lx] x [0, ly]`.
//!
//! Scalars live at cell centres, `u` on vertical faces and `v` on horizontal
//! faces. Velocities are stored in one vector, `u` faces first. Under
//! periodic boundaries the faces at `i = nx` (resp. `j = ny`) duplicate the
//! faces at `0`; they are kept in sync and carry zero quadrature weight.
//! Discretely divergence-free fields are parametrized by a stream function
//! on the grid nodes, so the discrete divergence of any field in that space
//! vanishes identically.

use crate::error::{Error, Result};
use crate::linalg::{Csr, Triplets};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Boundary {
    NoSlip,
    Periodic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhysGrid {
    lx: f64,
    ly: f64,
    nx: usize,
    ny: usize,
    bc: Boundary,
}

/// Face orientation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

/// Faces across which scalars exchange flux: the two cells, the face's
/// velocity index and the face area (length in 2D).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InteriorFace {
    pub lower: usize,
    pub upper: usize,
    pub face: usize,
    pub axis: Axis,
    pub area: f64,
}

impl PhysGrid {
    pub fn new(lx: f64, ly: f64, nx: usize, ny: usize, bc: Boundary) -> Result<Self> {
        if !(lx > 0.0 && ly > 0.0) || !lx.is_finite() || !ly.is_finite() {
            return Err(Error::Parameter(format!("domain extents must be positive, got {lx} x {ly}")));
        }
        let min_cells = if bc == Boundary::NoSlip { 2 } else { 1 };
        if nx < min_cells || ny < min_cells {
            return Err(Error::Parameter(format!("need at least {min_cells} cells per direction, got {nx} x {ny}")));
        }
        Ok(Self { lx, ly, nx, ny, bc })
    }

    pub fn unit_square(n: usize, bc: Boundary) -> Result<Self> {
        Self::new(1.0, 1.0, n, n, bc)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn extents(&self) -> (f64, f64) {
        (self.lx, self.ly)
    }

    pub fn boundary(&self) -> Boundary {
        self.bc
    }

    pub fn hx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    pub fn h_min(&self) -> f64 {
        self.hx().min(self.hy())
    }

    pub fn cell_volume(&self) -> f64 {
        self.hx() * self.hy()
    }

    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }

    pub fn ncells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn cell(&self, i: usize, j: usize) -> usize {
        i + self.nx * j
    }

    pub fn cell_ij(&self, c: usize) -> (usize, usize) {
        (c % self.nx, c / self.nx)
    }

    pub fn cell_center(&self, c: usize) -> (f64, f64) {
        let (i, j) = self.cell_ij(c);
        ((i as f64 + 0.5) * self.hx(), (j as f64 + 0.5) * self.hy())
    }

    pub fn n_ufaces(&self) -> usize {
        (self.nx + 1) * self.ny
    }

    pub fn n_vfaces(&self) -> usize {
        self.nx * (self.ny + 1)
    }

    pub fn nfaces(&self) -> usize {
        self.n_ufaces() + self.n_vfaces()
    }

    pub fn uface(&self, i: usize, j: usize) -> usize {
        i + (self.nx + 1) * j
    }

    pub fn vface(&self, i: usize, j: usize) -> usize {
        self.n_ufaces() + i + self.nx * j
    }

    pub fn face_axis(&self, f: usize) -> Axis {
        if f < self.n_ufaces() {
            Axis::X
        } else {
            Axis::Y
        }
    }

    /// Integer position of a face: `(i, j)` in the u- or v-face lattice.
    pub fn face_ij(&self, f: usize) -> (usize, usize) {
        if f < self.n_ufaces() {
            (f % (self.nx + 1), f / (self.nx + 1))
        } else {
            let g = f - self.n_ufaces();
            (g % self.nx, g / self.nx)
        }
    }

    pub fn face_center(&self, f: usize) -> (f64, f64) {
        let (i, j) = self.face_ij(f);
        match self.face_axis(f) {
            Axis::X => (i as f64 * self.hx(), (j as f64 + 0.5) * self.hy()),
            Axis::Y => ((i as f64 + 0.5) * self.hx(), j as f64 * self.hy()),
        }
    }

    /// True for faces that carry an independent unknown (not a periodic
    /// duplicate and not a wall-normal face).
    pub fn face_is_active(&self, f: usize) -> bool {
        let (i, j) = self.face_ij(f);
        match (self.face_axis(f), self.bc) {
            (Axis::X, Boundary::NoSlip) => i > 0 && i < self.nx,
            (Axis::Y, Boundary::NoSlip) => j > 0 && j < self.ny,
            (Axis::X, Boundary::Periodic) => i < self.nx,
            (Axis::Y, Boundary::Periodic) => j < self.ny,
        }
    }

    /// Control-volume weight of a face for velocity quadrature.
    pub fn face_weight(&self, f: usize) -> f64 {
        if self.face_is_active(f) {
            self.cell_volume()
        } else {
            0.0
        }
    }

    /// A cell ordering with small bandwidth for nearest-neighbour stencils:
    /// rings are interleaved (0, n-1, 1, n-2, ...) under periodic wrap.
    /// `order[k]` is the cell stored at position `k`.
    pub fn band_order(&self) -> Vec<usize> {
        let ring = |n: usize| -> Vec<usize> {
            match self.bc {
                Boundary::NoSlip => (0..n).collect(),
                Boundary::Periodic => (0..n).map(|k| if k % 2 == 0 { k / 2 } else { n - 1 - k / 2 }).collect(),
            }
        };
        let (rx, ry) = (ring(self.nx), ring(self.ny));
        let mut order = Vec::with_capacity(self.ncells());
        for &j in &ry {
            for &i in &rx {
                order.push(self.cell(i, j));
            }
        }
        order
    }

    /// The (up to two) cells sharing a face, lower/left first.
    pub fn face_cells(&self, f: usize) -> (Option<usize>, Option<usize>) {
        let (i, j) = self.face_ij(f);
        match self.face_axis(f) {
            Axis::X => {
                let left = if i > 0 {
                    Some(self.cell(i - 1, j))
                } else if self.bc == Boundary::Periodic {
                    Some(self.cell(self.nx - 1, j))
                } else {
                    None
                };
                let right = if i < self.nx {
                    Some(self.cell(i, j))
                } else if self.bc == Boundary::Periodic {
                    Some(self.cell(0, j))
                } else {
                    None
                };
                (left, right)
            }
            Axis::Y => {
                let below = if j > 0 {
                    Some(self.cell(i, j - 1))
                } else if self.bc == Boundary::Periodic {
                    Some(self.cell(i, self.ny - 1))
                } else {
                    None
                };
                let above = if j < self.ny {
                    Some(self.cell(i, j))
                } else if self.bc == Boundary::Periodic {
                    Some(self.cell(i, 0))
                } else {
                    None
                };
                (below, above)
            }
        }
    }

    /// Faces through which neighbouring cells exchange flux (each once).
    pub fn interior_faces(&self) -> Vec<InteriorFace> {
        (0..self.nfaces())
            .filter(|&f| self.face_is_active(f))
            .filter_map(|f| match self.face_cells(f) {
                (Some(lower), Some(upper)) if lower != upper => {
                    let axis = self.face_axis(f);
                    let area = if axis == Axis::X { self.hy() } else { self.hx() };
                    Some(InteriorFace { lower, upper, face: f, axis, area })
                }
                _ => None,
            })
            .collect()
    }

    /// Cell averages of a scalar to active faces (zero elsewhere).
    pub fn scalar_to_faces(&self, cells: &[f64]) -> Vec<f64> {
        (0..self.nfaces())
            .map(|f| {
                if !self.face_is_active(f) {
                    return 0.0;
                }
                match self.face_cells(f) {
                    (Some(a), Some(b)) => 0.5 * (cells[a] + cells[b]),
                    (Some(a), None) | (None, Some(a)) => cells[a],
                    (None, None) => 0.0,
                }
            })
            .collect()
    }

    /// Samples a vector field at face centres (normal component only).
    pub fn sample_velocity(&self, f: impl Fn(f64, f64) -> (f64, f64)) -> Vec<f64> {
        let mut out: Vec<f64> = (0..self.nfaces())
            .map(|k| {
                let (x, y) = self.face_center(k);
                let (u, v) = f(x, y);
                if self.face_axis(k) == Axis::X {
                    u
                } else {
                    v
                }
            })
            .collect();
        self.sync_duplicates(&mut out);
        out
    }

    pub fn sample_cells(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        (0..self.ncells())
            .map(|c| {
                let (x, y) = self.cell_center(c);
                f(x, y)
            })
            .collect()
    }

    /// Copies periodic master faces onto their duplicates and zeros
    /// wall-normal faces.
    pub fn sync_duplicates(&self, vel: &mut [f64]) {
        for j in 0..self.ny {
            match self.bc {
                Boundary::Periodic => vel[self.uface(self.nx, j)] = vel[self.uface(0, j)],
                Boundary::NoSlip => {
                    vel[self.uface(0, j)] = 0.0;
                    vel[self.uface(self.nx, j)] = 0.0;
                }
            }
        }
        for i in 0..self.nx {
            match self.bc {
                Boundary::Periodic => vel[self.vface(i, self.ny)] = vel[self.vface(i, 0)],
                Boundary::NoSlip => {
                    vel[self.vface(i, 0)] = 0.0;
                    vel[self.vface(i, self.ny)] = 0.0;
                }
            }
        }
    }

    /// Discrete divergence per cell.
    pub fn divergence(&self, vel: &[f64]) -> Vec<f64> {
        let (hx, hy) = (self.hx(), self.hy());
        (0..self.ncells())
            .map(|c| {
                let (i, j) = self.cell_ij(c);
                (vel[self.uface(i + 1, j)] - vel[self.uface(i, j)]) / hx
                    + (vel[self.vface(i, j + 1)] - vel[self.vface(i, j)]) / hy
            })
            .collect()
    }

    pub fn max_abs_divergence(&self, vel: &[f64]) -> f64 {
        self.divergence(vel).iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_velocity(&self, vel: &[f64]) -> f64 {
        vel.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Grid nodes on which corner derivatives live, with their quadrature
    /// weights: `(nx+1)(ny+1)` nodes for walls, `nx ny` for periodic.
    pub fn nnodes(&self) -> usize {
        match self.bc {
            Boundary::NoSlip => (self.nx + 1) * (self.ny + 1),
            Boundary::Periodic => self.nx * self.ny,
        }
    }

    fn node(&self, i: usize, j: usize) -> usize {
        match self.bc {
            Boundary::NoSlip => i + (self.nx + 1) * j,
            Boundary::Periodic => (i % self.nx) + self.nx * (j % self.ny),
        }
    }

    pub fn node_weights(&self) -> Vec<f64> {
        let v = self.cell_volume();
        match self.bc {
            Boundary::Periodic => vec![v; self.nnodes()],
            Boundary::NoSlip => {
                let mut w = vec![0.0; self.nnodes()];
                for j in 0..=self.ny {
                    for i in 0..=self.nx {
                        let fx = if i == 0 || i == self.nx { 0.5 } else { 1.0 };
                        let fy = if j == 0 || j == self.ny { 0.5 } else { 1.0 };
                        w[self.node(i, j)] = v * fx * fy;
                    }
                }
                w
            }
        }
    }

    /// Operators `(∂u/∂y, ∂v/∂x)` at nodes, with mirrored ghost values
    /// enforcing zero tangential velocity at walls.
    pub fn node_shear_operators(&self) -> (Csr, Csr) {
        let (nx, ny) = (self.nx, self.ny);
        let (hx, hy) = (self.hx(), self.hy());
        let mut uy = Triplets::new(self.nnodes(), self.nfaces());
        let mut vx = Triplets::new(self.nnodes(), self.nfaces());
        match self.bc {
            Boundary::Periodic => {
                for j in 0..ny {
                    for i in 0..nx {
                        let n = self.node(i, j);
                        let jm = (j + ny - 1) % ny;
                        let im = (i + nx - 1) % nx;
                        uy.push(n, self.uface(i, j), 1.0 / hy);
                        uy.push(n, self.uface(i, jm), -1.0 / hy);
                        vx.push(n, self.vface(i, j), 1.0 / hx);
                        vx.push(n, self.vface(im, j), -1.0 / hx);
                    }
                }
            }
            Boundary::NoSlip => {
                for j in 0..=ny {
                    for i in 0..=nx {
                        let n = self.node(i, j);
                        if i > 0 && i < nx {
                            if j == 0 {
                                uy.push(n, self.uface(i, 0), 2.0 / hy);
                            } else if j == ny {
                                uy.push(n, self.uface(i, ny - 1), -2.0 / hy);
                            } else {
                                uy.push(n, self.uface(i, j), 1.0 / hy);
                                uy.push(n, self.uface(i, j - 1), -1.0 / hy);
                            }
                        }
                        if j > 0 && j < ny {
                            if i == 0 {
                                vx.push(n, self.vface(0, j), 2.0 / hx);
                            } else if i == nx {
                                vx.push(n, self.vface(nx - 1, j), -2.0 / hx);
                            } else {
                                vx.push(n, self.vface(i, j), 1.0 / hx);
                                vx.push(n, self.vface(i - 1, j), -1.0 / hx);
                            }
                        }
                    }
                }
            }
        }
        (uy.to_csr(), vx.to_csr())
    }

    /// Operators `∂u/∂x` and `∂v/∂y` at cell centres.
    pub fn cell_stretch_operators(&self) -> (Csr, Csr) {
        let (hx, hy) = (self.hx(), self.hy());
        let mut ux = Triplets::new(self.ncells(), self.nfaces());
        let mut vy = Triplets::new(self.ncells(), self.nfaces());
        for c in 0..self.ncells() {
            let (i, j) = self.cell_ij(c);
            ux.push(c, self.uface(i + 1, j), 1.0 / hx);
            ux.push(c, self.uface(i, j), -1.0 / hx);
            vy.push(c, self.vface(i, j + 1), 1.0 / hy);
            vy.push(c, self.vface(i, j), -1.0 / hy);
        }
        (ux.to_csr(), vy.to_csr())
    }

    /// Full velocity gradient `σ = ∇u` at cell centres, rows
    /// `4c + [∂u/∂x, ∂u/∂y, ∂v/∂x, ∂v/∂y]`; off-diagonal entries average the
    /// four corner values.
    pub fn gradient_operator(&self) -> Csr {
        let (ux, vy) = self.cell_stretch_operators();
        let (uy, vx) = self.node_shear_operators();
        let mut avg = Triplets::new(self.ncells(), self.nnodes());
        for c in 0..self.ncells() {
            let (i, j) = self.cell_ij(c);
            for (a, b) in [(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)] {
                avg.push(c, self.node(a, b), 0.25);
            }
        }
        let avg = avg.to_csr();
        let uy_c = avg.matmul(&uy);
        let vx_c = avg.matmul(&vx);
        let mut g = Triplets::new(4 * self.ncells(), self.nfaces());
        for (comp, op) in [(0usize, &ux), (1, &uy_c), (2, &vx_c), (3, &vy)] {
            for c in 0..self.ncells() {
                for (f, v) in op.row(c) {
                    g.push(4 * c + comp, f, v);
                }
            }
        }
        g.to_csr()
    }

    /// Velocity gradient per cell as `[[σ11, σ12], [σ21, σ22]]` flattened.
    pub fn velocity_gradient(&self, vel: &[f64]) -> Vec<[f64; 4]> {
        let g = self.gradient_operator().mul_vec(vel);
        g.chunks(4).map(|c| [c[0], c[1], c[2], c[3]]).collect()
    }

    /// Symmetric part `D(u)` per cell.
    pub fn rate_of_strain(&self, vel: &[f64]) -> Vec<[f64; 4]> {
        self.velocity_gradient(vel)
            .into_iter()
            .map(|s| {
                let off = 0.5 * (s[1] + s[2]);
                [s[0], off, off, s[3]]
            })
            .collect()
    }

    /// `∫ μ |D(u)|^2`, with the shear part integrated at nodes.
    pub fn viscous_dissipation(&self, vel: &[f64], mu_cells: &[f64]) -> f64 {
        let (ux, vy) = self.cell_stretch_operators();
        let (uy, vx) = self.node_shear_operators();
        let a = ux.mul_vec(vel);
        let d = vy.mul_vec(vel);
        let v = self.cell_volume();
        let stretch: f64 = (0..self.ncells()).map(|c| v * mu_cells[c] * (a[c] * a[c] + d[c] * d[c])).sum();
        let b = uy.mul_vec(vel);
        let e = vx.mul_vec(vel);
        let mu_n = self.cells_to_nodes(mu_cells);
        let w = self.node_weights();
        let shear: f64 = (0..self.nnodes())
            .map(|n| {
                let d12 = 0.5 * (b[n] + e[n]);
                2.0 * w[n] * mu_n[n] * d12 * d12
            })
            .sum();
        stretch + shear
    }

    /// Average of the cells touching each node.
    pub fn cells_to_nodes(&self, cells: &[f64]) -> Vec<f64> {
        let (nx, ny) = (self.nx, self.ny);
        let mut out = vec![0.0; self.nnodes()];
        match self.bc {
            Boundary::Periodic => {
                for j in 0..ny {
                    for i in 0..nx {
                        let im = (i + nx - 1) % nx;
                        let jm = (j + ny - 1) % ny;
                        out[self.node(i, j)] = 0.25
                            * (cells[self.cell(i, j)]
                                + cells[self.cell(im, j)]
                                + cells[self.cell(i, jm)]
                                + cells[self.cell(im, jm)]);
                    }
                }
            }
            Boundary::NoSlip => {
                for j in 0..=ny {
                    for i in 0..=nx {
                        let mut s = 0.0;
                        let mut k = 0;
                        for (a, b) in [(i.wrapping_sub(1), j.wrapping_sub(1)), (i, j.wrapping_sub(1)), (i.wrapping_sub(1), j), (i, j)] {
                            if a < nx && b < ny {
                                s += cells[self.cell(a, b)];
                                k += 1;
                            }
                        }
                        out[self.node(i, j)] = s / k as f64;
                    }
                }
            }
        }
        out
    }

    /// `∫ ρ |u|^2` with face-averaged density.
    pub fn kinetic_energy(&self, rho_cells: &[f64], vel: &[f64]) -> f64 {
        let rf = self.scalar_to_faces(rho_cells);
        (0..self.nfaces()).map(|f| self.face_weight(f) * rf[f] * vel[f] * vel[f]).sum()
    }

    /// `∫ |u|^2` over faces.
    pub fn l2_norm_sq(&self, vel: &[f64]) -> f64 {
        (0..self.nfaces()).map(|f| self.face_weight(f) * vel[f] * vel[f]).sum()
    }

    /// Discretely divergence-free subspace.
    pub fn stream_space(&self) -> StreamSpace {
        StreamSpace::new(self)
    }
}

/// Velocities `u = Curl ψ (+ mean flow)`; the columns of `curl` span the
/// discretely divergence-free fields satisfying the boundary conditions.
#[derive(Debug, Clone)]
pub struct StreamSpace {
    pub curl: Csr,
    pub ndofs: usize,
}

impl StreamSpace {
    fn new(g: &PhysGrid) -> Self {
        let (nx, ny) = (g.nx, g.ny);
        let (hx, hy) = (g.hx(), g.hy());
        match g.bc {
            Boundary::NoSlip => {
                let dof = |i: usize, j: usize| -> Option<usize> {
                    (i > 0 && i < nx && j > 0 && j < ny).then(|| (i - 1) + (nx - 1) * (j - 1))
                };
                let ndofs = (nx - 1) * (ny - 1);
                let mut t = Triplets::new(g.nfaces(), ndofs);
                for j in 0..ny {
                    for i in 0..=nx {
                        let f = g.uface(i, j);
                        if let Some(d) = dof(i, j + 1) {
                            t.push(f, d, 1.0 / hy);
                        }
                        if let Some(d) = dof(i, j) {
                            t.push(f, d, -1.0 / hy);
                        }
                    }
                }
                for j in 0..=ny {
                    for i in 0..nx {
                        let f = g.vface(i, j);
                        if let Some(d) = dof(i + 1, j) {
                            t.push(f, d, -1.0 / hx);
                        }
                        if let Some(d) = dof(i, j) {
                            t.push(f, d, 1.0 / hx);
                        }
                    }
                }
                Self { curl: t.to_csr(), ndofs }
            }
            Boundary::Periodic => {
                let dof = |i: usize, j: usize| -> Option<usize> {
                    let k = (i % nx) + nx * (j % ny);
                    (k > 0).then(|| k - 1)
                };
                let nstream = nx * ny - 1;
                let ndofs = nstream + 2;
                let mut t = Triplets::new(g.nfaces(), ndofs);
                for j in 0..ny {
                    for i in 0..=nx {
                        let f = g.uface(i, j);
                        t.push(f, nstream, 1.0);
                        if let Some(d) = dof(i, j + 1) {
                            t.push(f, d, 1.0 / hy);
                        }
                        if let Some(d) = dof(i, j) {
                            t.push(f, d, -1.0 / hy);
                        }
                    }
                }
                for j in 0..=ny {
                    for i in 0..nx {
                        let f = g.vface(i, j);
                        t.push(f, nstream + 1, 1.0);
                        if let Some(d) = dof(i + 1, j) {
                            t.push(f, d, -1.0 / hx);
                        }
                        if let Some(d) = dof(i, j) {
                            t.push(f, d, 1.0 / hx);
                        }
                    }
                }
                Self { curl: t.to_csr(), ndofs }
            }
        }
    }

    pub fn velocity(&self, dofs: &[f64]) -> Vec<f64> {
        self.curl.mul_vec(dofs)
    }
}
