//! Kinetic unknowns: modal coefficients of `ψ̃` in every physical cell.

use crate::error::{Error, Result};
use crate::grids::config::ConfigGrid;
use crate::grids::phys::PhysGrid;

#[derive(Debug, Clone, PartialEq)]
pub struct KineticField {
    ncells: usize,
    nmodes: usize,
    data: Vec<f64>,
}

/// One row of a nodal snapshot: cell indices, per-spring radial and angular
/// node indices, and the value of `ψ̃`.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotRow {
    pub ix: usize,
    pub iy: usize,
    pub ir: Vec<usize>,
    pub itheta: Vec<usize>,
    pub value: f64,
}

impl KineticField {
    pub fn zeros(ncells: usize, nmodes: usize) -> Self {
        Self { ncells, nmodes, data: vec![0.0; ncells * nmodes] }
    }

    pub fn from_coefficients(ncells: usize, nmodes: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != ncells * nmodes {
            return Err(Error::Argument(format!(
                "expected {} coefficients, got {}",
                ncells * nmodes,
                data.len()
            )));
        }
        Ok(Self { ncells, nmodes, data })
    }

    /// The equilibrium state `ψ̃ = c` in every cell.
    pub fn constant(grid: &PhysGrid, config: &ConfigGrid, c: f64) -> Self {
        let mut f = Self::zeros(grid.ncells(), config.nmodes());
        for cell in 0..f.ncells {
            f.data[cell * f.nmodes] = c;
        }
        f
    }

    /// Projects `g(x, nodes)` onto the basis; `g` receives the cell centre and
    /// the flat tensor-node index.
    pub fn project(grid: &PhysGrid, config: &ConfigGrid, g: impl Fn([f64; 2], usize) -> f64) -> Self {
        let nm = config.nmodes();
        let nn = config.nnodes();
        let mut data = Vec::with_capacity(grid.ncells() * nm);
        for c in 0..grid.ncells() {
            let (cx, cy) = grid.cell_center(c);
            let x = [cx, cy];
            let nodal: Vec<f64> = (0..nn).map(|k| g(x, k)).collect();
            data.extend(config.project(&nodal));
        }
        Self { ncells: grid.ncells(), nmodes: nm, data }
    }

    pub fn ncells(&self) -> usize {
        self.ncells
    }

    pub fn nmodes(&self) -> usize {
        self.nmodes
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn cell(&self, c: usize) -> &[f64] {
        &self.data[c * self.nmodes..(c + 1) * self.nmodes]
    }

    pub fn cell_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.data[c * self.nmodes..(c + 1) * self.nmodes]
    }

    /// `∫_D M ψ̃ dq` per cell.
    pub fn polymer_number_density(&self) -> Vec<f64> {
        (0..self.ncells).map(|c| self.data[c * self.nmodes]).collect()
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.ncells != other.ncells || self.nmodes != other.nmodes {
            return Err(Error::Argument(format!(
                "grid mismatch: {}x{} against {}x{}",
                self.ncells, self.nmodes, other.ncells, other.nmodes
            )));
        }
        Ok(())
    }

    /// `∫_Ω ∫_D M a b`, exact for the orthonormal basis.
    pub fn weighted_inner_product(&self, other: &Self, grid: &PhysGrid) -> Result<f64> {
        self.check_compatible(other)?;
        if grid.ncells() != self.ncells {
            return Err(Error::Argument("field does not live on this grid".into()));
        }
        let v = grid.cell_volume();
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum::<f64>() * v)
    }

    /// `‖a − b‖²` in the Maxwellian-weighted norm.
    pub fn distance_sq(&self, other: &Self, grid: &PhysGrid) -> Result<f64> {
        self.check_compatible(other)?;
        let v = grid.cell_volume();
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() * v)
    }

    pub fn nodal(&self, config: &ConfigGrid, c: usize) -> Vec<f64> {
        config.evaluate(self.cell(c))
    }

    /// Smallest nodal value over all cells and nodes.
    pub fn min_nodal(&self, config: &ConfigGrid) -> f64 {
        (0..self.ncells)
            .map(|c| self.nodal(config, c).into_iter().fold(f64::INFINITY, f64::min))
            .fold(f64::INFINITY, f64::min)
    }

    /// Nodal snapshot of the selected cells.
    pub fn snapshot(&self, grid: &PhysGrid, config: &ConfigGrid, cells: &[usize]) -> Vec<SnapshotRow> {
        let dims = config.node_dims();
        let nth: Vec<usize> = config.springs().iter().map(|s| s.ntheta).collect();
        let mut rows = Vec::new();
        for &c in cells {
            let (ix, iy) = grid.cell_ij(c);
            for (k, value) in self.nodal(config, c).into_iter().enumerate() {
                let mut rem = k;
                let mut ir = vec![0; dims.len()];
                let mut it = vec![0; dims.len()];
                for ax in (0..dims.len()).rev() {
                    let local = rem % dims[ax];
                    rem /= dims[ax];
                    ir[ax] = local / nth[ax];
                    it[ax] = local % nth[ax];
                }
                rows.push(SnapshotRow { ix, iy, ir, itheta: it, value });
            }
        }
        rows
    }
}

/// Column names of a snapshot for a chain of `k` springs.
pub fn snapshot_header(k: usize) -> Vec<String> {
    let mut h = vec!["ix".to_string(), "iy".to_string()];
    h.extend((1..=k).map(|i| format!("ir{i}")));
    h.extend((1..=k).map(|i| format!("itheta{i}")));
    h.push("value".into());
    h
}
