//! Non-splitting semi-Lagrangian discontinuous Galerkin solver for the
//! 1D-1V Vlasov–Poisson system.

pub mod basis;
pub mod clipper;
pub mod dg_field;
pub mod driver;
pub mod error;
pub mod mesh;
pub mod poisson;
pub mod poly;
pub mod quadrature;
pub mod remap;
pub mod tracer;

pub use dg_field::DGField;
pub use error::{Error, Result};
pub use mesh::{Location, PhaseMesh};
