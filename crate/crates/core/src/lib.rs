//! Computing with free (noncommutative) holomorphic functions on tuples of
//! square matrices.
//!
//! The crate covers polynomial and rational evaluation at every matrix
//! level, membership in basic free open sets `G_δ = {x : ‖δ(x)‖ < 1}`,
//! transfer-function realizations with certified Neumann-series evaluation,
//! lurking-isometry fitting from finite model data, certified polynomial
//! approximation, and inversion certificates for meromorphic functions.

pub mod approx;
pub mod error;
pub mod expr;
pub mod freepoly;
pub mod func;
pub mod mat;
pub mod mero;
pub mod model;
pub mod ncpoint;
pub mod realize;
pub mod sample;

pub use error::{Error, Result};
pub use expr::{Expr, ExprAst};
pub use freepoly::{FreePoly, GradedPoint, MatPoly, PolyMatrix, Word};
pub use func::NcFunction;
pub use mat::CMatrix;
pub use num_complex::Complex64;
