//! Numerical workbench for the Weyl calculus on phase-space metrics.

pub mod error;
pub mod jet;
pub mod metric;
pub mod moyal;
pub mod partition;
pub mod quad;
pub mod quantizer;
pub mod sampling;
pub mod spectral;
pub mod symbol;
pub mod symplectic;
pub mod verify;
pub mod window;

pub use error::{Result, WeylError};
