//! Finite element solver for Cahn–Hilliard equations with dynamic boundary
//! conditions, discretized by a linear scalar-auxiliary-variable scheme.
//!
//! The pipeline is: build or load a triangulation ([`mesh`]), assemble P1
//! operators ([`fem`]), pick double-well potentials ([`potential`]) and
//! advance states with [`stepper`]. [`diagnostics`] evaluates energies and
//! masses, [`eoc`] runs convergence studies.

pub mod diagnostics;
pub mod eoc;
pub mod error;
pub mod fem;
pub mod linsolve;
pub mod mesh;
pub mod potential;
pub mod scenario;
pub mod sparse;
pub mod stepper;

pub use error::{Error, Result};
pub use fem::{assemble_operators, FemOperators};
pub use linsolve::SolverOptions;
pub use mesh::{build_unit_square_mesh, load_mesh, BoundaryMesh, BulkMesh};
pub use potential::DoubleWell;
pub use sparse::CsrMatrix;
pub use stepper::{Params, State, Stepper};
