//! Deterministic numerical kernels shared by the fitting and control code:
//! tensor Gauss-Legendre quadrature on the unit square, damped Newton
//! minimization of smooth convex objectives, and bisection root-finding.

mod bisect;
mod newton;
mod quad;

pub use bisect::bisect;
pub use newton::{newton_minimize, ObjectiveEval, SolverConfig};
pub use quad::{gauss_legendre, integrate2d, QuadratureRule};
