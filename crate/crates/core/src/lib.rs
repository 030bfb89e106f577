//! Numerical Riemann-Hilbert problems on systems of disjoint circles.
//!
//! The crate discretizes matrix Riemann-Hilbert problems posed on finite
//! unions of oriented circles, solves the associated singular integral
//! equation `(I - C_w) mu = h` by spectral collocation, and provides the
//! tooling around it:
//!
//! * [`contour`]: circles, side bookkeeping, inversion `z -> 1/conj(z)`.
//! * [`cauchy`]: grid functions, Cauchy projections `C+`/`C-`, off-contour
//!   Cauchy integrals.
//! * [`rhp`]: factorization data, the solver, kernel/cokernel diagnostics and
//!   the inversion-symmetry/positivity checks.
//! * [`factorize`]: scalar Wiener-Hopf factorization and the positive
//!   Hermitian factorization `v = (w+)# w+`.
//! * [`idnls`]: jump matrices of discrete NLS type, pole removal and the
//!   conjugation that restores inversion symmetry.
//! * [`expr`] and [`problem`]: the expression language and JSON problem files
//!   used by the `rhc` command-line tool.

pub mod cauchy;
pub mod contour;
pub mod error;
pub mod expr;
pub mod factorize;
pub mod idnls;
pub mod linalg;
pub mod problem;
pub mod rhp;

pub use cauchy::{CauchyProjectors, CauchyTransform, GridFunction};
pub use contour::{invert_circle, invert_point, Circle, ContourSystem, Orientation, Side};
pub use error::{Error, Result};
pub use rhp::{JumpData, JumpProvider, RHProblem, RHSolution, Tolerances};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
/// Dense complex matrix (per-node values and assembled operators).
pub type CMat = nalgebra::DMatrix<C64>;
