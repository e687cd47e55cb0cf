//! Physical and configuration-space grids.

pub mod config;
pub mod field;
pub mod phys;

pub use config::{ConfigGrid, SpringBasis};
pub use field::KineticField;
pub use phys::{Boundary, PhysGrid, StreamSpace};
