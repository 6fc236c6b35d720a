//! Solver and certification library for third-order operator-differential
//! boundary value problems on the half-line, with a perturbed boundary
//! condition of the form u'(0) = K u.
//!
//! The pipeline:
//! - [`operator`]: spectral calculus for the generating self-adjoint
//!   positive-definite operator (powers, decaying exponentials, the damped
//!   oscillation kernel).
//! - [`space`]: grids, quadrature norms, derivatives and traces for
//!   vector-valued functions on the truncated half-line.
//! - [`boundary`]: the boundary perturbation K and a numerical estimate of
//!   its norm kappa.
//! - [`principal`]: the unperturbed equation u''' - A^3 u = f solved by a
//!   whole-line Fourier multiplier plus a homogeneous boundary correction
//!   fixed by a contraction.
//! - [`perturbed`]: the full equation with lower-order terms, solved by
//!   outer fixed-point iteration over the principal solver.
//! - [`analyzer`]: the explicit solvability constants, the solvability
//!   verdict, and randomized certification of every estimate the solver
//!   relies on.

pub mod analyzer;
pub mod boundary;
pub mod error;
pub mod expoly;
pub mod linalg;
pub mod operator;
pub mod perturbed;
pub mod principal;
pub mod space;

pub use boundary::{BoundaryOperator, BoundaryTerm};
pub use num_complex::Complex64;
pub use error::{Error, Result};
pub use linalg::Matrix;
pub use operator::{HVector, Operator, ScaleIndex};
pub use space::{differentiate, GridFunction, GridSpec, Trace, TraceKind, W23Element};
