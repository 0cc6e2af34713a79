//! Self-contained numerical kernels.
//!
//! Everything in this module is generic numerics with no knowledge of the
//! physical model: eigensolvers for symmetric tridiagonal and small dense
//! symmetric matrices, adaptive Gauss-Legendre quadrature, an adaptive
//! embedded Runge-Kutta integrator for complex linear systems, dense least
//! squares with nonnegativity constraints, and a few special-function
//! helpers.
//!
//! The kernels are deliberately dependency-free (no external linear-algebra
//! backend): the matrices arising from the model are either tridiagonal —
//! where textbook QL iteration plus inverse iteration is both faster and
//! more transparent than a general eigensolver — or small enough (reduced
//! density matrices, fit design matrices) for Jacobi rotations and
//! Householder QR to be fully adequate.

pub mod tridiag;
pub mod jacobi;
pub mod quad;
pub mod ode;
pub mod lsq;
pub mod special;

pub use tridiag::{SymTridiag, TridiagError, TridiagResult};
pub use quad::{integrate, QuadError, QuadResult, Quadrature};
pub use ode::{Advance, AdaptiveRk, OdeError, OdeOptions, OdeResult, OdeRhs, StepInfo, StepOutcome};
