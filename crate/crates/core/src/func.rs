//! The graded-function abstraction shared by polynomials, expressions and
//! realizations.

use crate::error::Result;
use crate::freepoly::{FreePoly, GradedPoint, MatPoly, PolyMatrix};
use crate::mat::CMatrix;

/// A graded `L(H, K)`-valued function: at level n it returns an
/// `(n·K)×(n·H)` matrix with the level index outermost.
///
/// Implementations must be safe to call concurrently; every implementation in
/// this crate is pure.
pub trait NcFunction {
    /// Number of variables.
    fn d(&self) -> usize;

    fn eval(&self, x: &GradedPoint) -> Result<CMatrix>;
}

impl<T: NcFunction + ?Sized> NcFunction for &T {
    fn d(&self) -> usize {
        (**self).d()
    }

    fn eval(&self, x: &GradedPoint) -> Result<CMatrix> {
        (**self).eval(x)
    }
}

impl NcFunction for FreePoly {
    fn d(&self) -> usize {
        FreePoly::d(self)
    }

    fn eval(&self, x: &GradedPoint) -> Result<CMatrix> {
        FreePoly::eval(self, x)
    }
}

impl NcFunction for MatPoly {
    fn d(&self) -> usize {
        MatPoly::d(self)
    }

    fn eval(&self, x: &GradedPoint) -> Result<CMatrix> {
        MatPoly::eval(self, x)
    }
}

/// `‖δ(x)‖` exposed as a function is not nc-valued, but `δ` itself is when
/// re-laid out; this wrapper evaluates a [`PolyMatrix`] in the level-outer
/// layout so it can be checked like any other nc function.
pub struct PolyMatrixFn<'a>(pub &'a PolyMatrix);

impl NcFunction for PolyMatrixFn<'_> {
    fn d(&self) -> usize {
        self.0.d()
    }

    fn eval(&self, x: &GradedPoint) -> Result<CMatrix> {
        MatPoly::from_poly_matrix(self.0).eval(x)
    }
}

/// Adapts a closure into an [`NcFunction`].
pub struct FnEval<F> {
    d: usize,
    f: F,
}

impl<F> FnEval<F>
where
    F: Fn(&GradedPoint) -> Result<CMatrix>,
{
    pub fn new(d: usize, f: F) -> Self {
        FnEval { d, f }
    }
}

impl<F> NcFunction for FnEval<F>
where
    F: Fn(&GradedPoint) -> Result<CMatrix>,
{
    fn d(&self) -> usize {
        self.d
    }

    fn eval(&self, x: &GradedPoint) -> Result<CMatrix> {
        (self.f)(x)
    }
}
